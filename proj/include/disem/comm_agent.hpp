#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "disem/autodiff.hpp"
#include "disem/quantizer.hpp"

namespace disem {

/// How received messages are pooled: a learned per-sender gate with mean
/// pooling (IC3Net-like) or single-head dot-product attention (TarMAC-like).
enum class Scheme { kGatedMean, kAttention };

/// What receivers see on the wire.
enum class Delivery {
  kContinuous,       // raw generator output, differentiable
  kStraightThrough,  // quantized forward, identity backward
  kQuantized,        // quantized constants, no gradient (evaluation)
};

std::string to_string(Scheme s);
Scheme parse_scheme(const std::string& s);
std::string to_string(Delivery d);
Delivery parse_delivery(const std::string& s);

struct AgentConfig {
  Scheme scheme = Scheme::kGatedMean;
  int hidden = 64;
  int msg_len = 16;
  int key_dim = 8;
  bool share_params = true;
  Delivery train_delivery = Delivery::kContinuous;
};

// Plain-value reference versions of the pooling rules.
std::vector<double> attention_weights(std::span<const double> query,
                                      std::span<const std::vector<double>> keys);
/// Gated mean: sum_j w_j m_j / |received|. Attention: sum_j w_j m_j.
std::vector<double> aggregate(std::span<const std::vector<double>> received, Scheme scheme,
                              std::span<const double> weights, std::size_t msg_len);

/// Everything an agent broadcast at one timestep, as tape nodes.
struct Outgoing {
  ad::Var message;  // what receivers see (after delivery)
  ad::Var gate;     // 1x1, gated-mean scheme
  ad::Var key;      // key_dim x 1, attention scheme
  bool active = true;
};

struct AgentOutput {
  ad::Var logits;
  ad::Var message;  // pre-quantization generator output in (-1, 1)
  ad::Var hidden;
  ad::Var gate;
  ad::Var key;
};

/// Parameters for a team of agents: one shared set, or one set per agent
/// (names prefixed "a<i>.").
class CommModel {
 public:
  CommModel(const AgentConfig& config, int n_agents, int obs_dim, int num_actions, std::uint64_t seed);
  CommModel(const AgentConfig& config, int n_agents, int obs_dim, int num_actions, ad::ParameterSet params);

  const AgentConfig& config() const { return config_; }
  int n_agents() const { return n_agents_; }
  int obs_dim() const { return obs_dim_; }
  int num_actions() const { return num_actions_; }

  ad::ParameterSet& params() { return params_; }
  const ad::ParameterSet& params() const { return params_; }

  /// Tensor `name` used by `agent`.
  ad::Tensor& weight(int agent, const std::string& name);

  /// Incremented by every parameter update; rollouts remember it.
  std::uint64_t version() const { return version_; }
  void bump_version() { ++version_; }

 private:
  void add_agent_params(const std::string& prefix, std::uint64_t seed);
  void check_layout() const;

  AgentConfig config_;
  int n_agents_;
  int obs_dim_;
  int num_actions_;
  ad::ParameterSet params_;
  std::uint64_t version_ = 0;
};

/// Pools the received set on the tape. `query` is only used by attention.
ad::Var aggregate(ad::Tape& tape, std::span<const Outgoing> received, Scheme scheme, ad::Var query,
                  std::size_t msg_len);

/// One recurrent step of agent `agent`: pools `received`, updates the hidden
/// state and emits action logits, a squashed message and gate/key.
AgentOutput step_agent(ad::Tape& tape, CommModel& model, int agent, ad::Var observation,
                       std::span<const Outgoing> received, ad::Var hidden);

/// Builds every agent's received set from the previous step's outputs.
/// Zero-comm replaces all messages by zeros; quantized delivery replaces them
/// by grid values.
std::vector<std::vector<Outgoing>> exchange(ad::Tape& tape, std::span<const AgentOutput> previous,
                                            const std::vector<bool>& active, Delivery delivery,
                                            bool zero_comm, const Quantizer& q);

/// Outputs standing in for "t = -1": zero messages, zero gates and keys.
std::vector<AgentOutput> initial_outputs(ad::Tape& tape, const CommModel& model);

}  // namespace disem
