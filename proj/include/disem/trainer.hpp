#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "disem/autodiff.hpp"
#include "disem/comm_agent.hpp"
#include "disem/entropy.hpp"
#include "disem/environments.hpp"
#include "disem/quantizer.hpp"

namespace disem {

/// ORI: base framework. ZC: messages forced to zero. DifEM: Gaussian
/// differential-entropy penalty. DisEM: discrete-entropy pseudo gradient.
enum class Variant { kOri, kZc, kDifEm, kDisEm };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);

enum class OptimizerKind { kSgd, kAdam };

struct TrainSchedule {
  Variant variant = Variant::kDisEm;
  int t_n = 100;     // epochs before the regularizer switches on
  int t_max = 150;   // total epochs
  double alpha_p = 0.05;
  double lr = 0.01;
  double momentum = 0.9;
  OptimizerKind optimizer = OptimizerKind::kSgd;
  int episodes_per_epoch = 32;
  double delta = 0.25;
  double epsilon = kDefaultEpsilon;
  double difem_var_eps = 1e-4;
  double grad_clip = 0.0;  // global norm, 0 disables

  /// Two-phase values for each task; everything else keeps the defaults.
  static TrainSchedule for_task(Task task);

  double alpha(int epoch) const { return epoch < t_n ? 0.0 : alpha_p; }
  void validate() const;
};

enum class RolloutMode {
  kTrain,  // stochastic actions, training-time delivery
  kEval,   // greedy actions, quantized delivery
};

/// One episode of one rollout: tape nodes for the update plus plain values.
struct EpisodeRecord {
  std::unique_ptr<ad::Tape> tape;  // null in evaluation rollouts
  int length = 0;
  bool success = false;
  // Indexed [t][agent].
  std::vector<std::vector<char>> active;
  std::vector<std::vector<int>> actions;
  std::vector<std::vector<double>> rewards;
  std::vector<std::vector<ad::Var>> log_probs;
  std::vector<std::vector<ad::Var>> message_nodes;
  std::vector<std::vector<std::vector<double>>> messages;  // pre-quantization
  std::vector<std::vector<std::vector<double>>> observations;

  double team_return() const;
};

struct RolloutBatch {
  std::vector<EpisodeRecord> episodes;
  std::uint64_t params_version = 0;
  int n_agents = 0;
  int msg_len = 0;

  /// Every message agent `agent` sent in the batch, in (episode, t) order.
  std::optional<MessageBatch> messages_of(int agent) const;
  std::size_t message_count(int agent) const;
};

struct RolloutOptions {
  RolloutMode mode = RolloutMode::kTrain;
  Variant variant = Variant::kOri;
  int episodes = 1;
  std::uint64_t seed = 0;
  int threads = 1;
};

/// Per-episode seeds derived from (seed, episode index); each episode runs on
/// its own tape so results do not depend on the thread count.
RolloutBatch collect(const EnvSpec& spec, CommModel& model, const Quantizer& q, const RolloutOptions& opts);

class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, double momentum);
  void step(ad::ParameterSet& params);

 private:
  OptimizerKind kind_;
  double lr_;
  double momentum_;
  long steps_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

struct DifemPenalty {
  double value = 0.0;
  std::vector<double> grad;  // d value / d message, row-major like the batch
};

/// Sum over digits of 0.5 * log2(2 pi e (var_d + var_eps)) with population
/// variance, and its gradient with respect to every message value.
DifemPenalty difem_penalty(const MessageBatch& batch, double var_eps);

struct UpdateDiagnostics {
  double alpha = 0.0;
  double policy_loss = 0.0;
  double grad_norm = 0.0;
  double train_entropy_bits = 0.0;  // mean over agents, training batch
  double regularizer = 0.0;         // DifEM penalty or DisEM entropy when active
  std::size_t samples = 0;
};

/// REINFORCE with discounted per-step returns normalized across the batch.
/// When alpha(epoch) > 0, DisEM injects alpha * pseudo gradient at every
/// recorded message node and DifEM injects alpha * d(penalty)/d(message).
UpdateDiagnostics policy_gradient_update(RolloutBatch& batch, CommModel& model, Optimizer& optimizer,
                                         const TrainSchedule& schedule, int epoch, const Quantizer& q,
                                         double gamma, int threads = 1);

/// Gradient of the update's loss without applying it (param grads left in the
/// model). Used by tests that compare gradient composition.
UpdateDiagnostics compute_gradients(RolloutBatch& batch, CommModel& model, const TrainSchedule& schedule,
                                    int epoch, const Quantizer& q, double gamma, int threads = 1);

struct EvalSummary {
  int episodes = 0;
  double perf = 0.0;  // mean episode length, or success rate for the junction
  double perf_std = 0.0;
  double entropy_bits = 0.0;  // mean over agents of the per-agent batch entropy
  double mean_return = 0.0;
  std::vector<double> agent_entropy_bits;
};

/// Greedy, quantized-delivery evaluation. Optionally writes a line-delimited
/// trace of every step. Reported entropy uses plain counts unless `epsilon` is
/// given.
EvalSummary evaluate(const EnvSpec& spec, CommModel& model, const Quantizer& q, Variant variant,
                     int episodes, std::uint64_t seed, int threads = 1,
                     const std::string& trace_path = "", double epsilon = 0.0);

EvalSummary summarize(const EnvSpec& spec, const RolloutBatch& batch, const Quantizer& q, double epsilon);

struct EpochMetrics {
  int epoch = 0;
  double alpha = 0.0;
  double perf = 0.0;
  double entropy_bits = 0.0;
  double mean_return = 0.0;
  double wall_time_s = 0.0;
};

struct TrainOptions {
  std::string out_dir;        // empty: keep everything in memory
  int metric_episodes = 20;   // evaluation episodes behind each metrics row
  int eval_every = 1;         // epochs between metrics rows (last epoch always)
  std::uint64_t eval_seed = 0xE7A1;
  int threads = 1;
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainResult {
  ad::ParameterSet checkpoint_tn;  // parameters after t_n epochs
  ad::ParameterSet final_params;   // parameters after t_max epochs
  std::vector<EpochMetrics> metrics;
};

/// Two-phase training: alpha = 0 for t_n epochs, alpha_p afterwards.
TrainResult train(const EnvSpec& spec, const AgentConfig& agent, const TrainSchedule& schedule,
                  std::uint64_t seed, const TrainOptions& opts = {});

inline constexpr const char* kMetricsHeader =
    "epoch,variant,task,setting,seed,perf_metric,entropy_bits,mean_return,wall_time_s";

/// 64-bit mix used to derive independent seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace disem
