#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "disem/comm_agent.hpp"
#include "disem/environments.hpp"
#include "disem/trainer.hpp"

namespace disem {

/// Everything that determines one run. Serialized as nested JSON whose leaf
/// paths are the dotted config keys (e.g. "quantizer.delta").
struct RunConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "runs";
  int threads = 0;

  EnvSpec env = EnvSpec::make(Task::kPredatorPrey, Setting::kA);
  AgentConfig agent;
  TrainSchedule schedule = TrainSchedule::for_task(Task::kPredatorPrey);

  int eval_episodes = 100;
  int metric_episodes = 20;
  int eval_every = 1;
  std::uint64_t eval_seed = 0xE7A1;

  /// Defaults for a task/setting: environment constants and the two-phase
  /// schedule values for that task.
  static RunConfig defaults(Task task, Setting setting);
  /// Starts from defaults(env.task, env.setting) and applies every other leaf.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load_file(const std::string& path);

  nlohmann::json to_json() const;
  void validate() const;

  /// Applies one dotted key. Numeric values may be given as strings.
  void set(const std::string& key, const nlohmann::json& value);

  /// All recognised dotted keys.
  static const std::vector<std::string>& keys();
};

/// Writes `value` at dotted path `key` inside nested object `j`.
void set_dotted(nlohmann::json& j, const std::string& key, const nlohmann::json& value);

}  // namespace disem
