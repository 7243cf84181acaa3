#pragma once

#include <string>
#include <vector>

#include "disem/environments.hpp"
#include "disem/trainer.hpp"

namespace disem {

inline constexpr int kTraceFormatVersion = 1;

/// Writes one header line then one JSON line per (episode, t) with every
/// agent's observation, action, reward and pre-quantization message.
void write_trace(const std::string& path, const EnvSpec& spec, const RolloutBatch& batch, double delta);

struct TraceMessages {
  int msg_len = 0;
  double delta = 0.25;
  int n_agents = 0;
  std::string env_label;
  std::vector<std::vector<double>> messages;  // every active agent's message, in file order
  std::vector<int> senders;                   // agent index of each message
};

TraceMessages read_trace_messages(const std::string& path);

}  // namespace disem
