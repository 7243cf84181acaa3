#include "disem/comm_agent.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace disem {

using ad::Tape;
using ad::Var;

std::string to_string(Scheme s) { return s == Scheme::kGatedMean ? "ic3net_like" : "tarmac_like"; }

Scheme parse_scheme(const std::string& s) {
  if (s == "ic3net_like" || s == "gated_mean") return Scheme::kGatedMean;
  if (s == "tarmac_like" || s == "attention") return Scheme::kAttention;
  throw std::invalid_argument("unknown agent.scheme: " + s);
}

std::string to_string(Delivery d) {
  switch (d) {
    case Delivery::kContinuous: return "continuous";
    case Delivery::kStraightThrough: return "straight_through";
    case Delivery::kQuantized: return "quantized";
  }
  return "?";
}

Delivery parse_delivery(const std::string& s) {
  if (s == "continuous") return Delivery::kContinuous;
  if (s == "straight_through") return Delivery::kStraightThrough;
  if (s == "quantized") return Delivery::kQuantized;
  throw std::invalid_argument("unknown delivery mode: " + s);
}

std::vector<double> attention_weights(std::span<const double> query,
                                      std::span<const std::vector<double>> keys) {
  if (keys.empty()) return {};
  const double norm = 1.0 / std::sqrt(static_cast<double>(query.size()));
  std::vector<double> w(keys.size());
  for (std::size_t j = 0; j < keys.size(); ++j) {
    if (keys[j].size() != query.size()) throw std::invalid_argument("key/query size mismatch");
    double s = 0.0;
    for (std::size_t d = 0; d < query.size(); ++d) s += query[d] * keys[j][d];
    w[j] = s * norm;
  }
  const double mx = *std::max_element(w.begin(), w.end());
  double z = 0.0;
  for (double& v : w) z += (v = std::exp(v - mx));
  for (double& v : w) v /= z;
  return w;
}

std::vector<double> aggregate(std::span<const std::vector<double>> received, Scheme scheme,
                              std::span<const double> weights, std::size_t msg_len) {
  std::vector<double> out(msg_len, 0.0);
  if (received.empty()) return out;
  if (weights.size() != received.size()) throw std::invalid_argument("one weight per sender required");
  for (std::size_t j = 0; j < received.size(); ++j) {
    if (received[j].size() != msg_len) throw std::invalid_argument("message length mismatch");
    for (std::size_t d = 0; d < msg_len; ++d) out[d] += weights[j] * received[j][d];
  }
  if (scheme == Scheme::kGatedMean)
    for (double& v : out) v /= static_cast<double>(received.size());
  return out;
}

// ---------------------------------------------------------------------------

CommModel::CommModel(const AgentConfig& config, int n_agents, int obs_dim, int num_actions,
                     std::uint64_t seed)
    : config_(config), n_agents_(n_agents), obs_dim_(obs_dim), num_actions_(num_actions) {
  if (n_agents < 1 || obs_dim < 1 || num_actions < 1) throw std::invalid_argument("bad model dimensions");
  if (config.hidden < 1 || config.msg_len < 1 || config.key_dim < 1)
    throw std::invalid_argument("agent.hidden, agent.msg_len and key size must be positive");
  if (config_.share_params) {
    add_agent_params("", seed);
  } else {
    for (int i = 0; i < n_agents; ++i) add_agent_params("a" + std::to_string(i) + ".", seed + 7919 * i);
  }
}

CommModel::CommModel(const AgentConfig& config, int n_agents, int obs_dim, int num_actions,
                     ad::ParameterSet params)
    : config_(config), n_agents_(n_agents), obs_dim_(obs_dim), num_actions_(num_actions),
      params_(std::move(params)) {
  check_layout();
}

void CommModel::add_agent_params(const std::string& prefix, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto init = [&](const std::string& name, std::size_t rows, std::size_t cols) {
    ad::Tensor& t = params_.add(prefix + name, rows, cols);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (double& v : t.data) v = u(rng);
  };
  const std::size_t h = config_.hidden, l = config_.msg_len;
  init("enc_w", h, obs_dim_ + l);
  init("rec_w", h, h);
  params_.add(prefix + "enc_b", h, 1);
  init("pi_w", num_actions_, h);
  params_.add(prefix + "pi_b", num_actions_, 1);
  init("msg_w", l, h);
  params_.add(prefix + "msg_b", l, 1);
  if (config_.scheme == Scheme::kGatedMean) {
    init("gate_w", 1, h);
    params_.add(prefix + "gate_b", 1, 1).data[0] = 1.0;  // start mostly open
  } else {
    init("key_w", config_.key_dim, h);
    init("query_w", config_.key_dim, h);
  }
}

void CommModel::check_layout() const {
  const auto expect = [&](int agent, const std::string& name, std::size_t rows, std::size_t cols) {
    const std::string full = config_.share_params ? name : "a" + std::to_string(agent) + "." + name;
    const ad::Tensor& t = params_.at(full);
    if (t.rows != rows || t.cols != cols) throw std::invalid_argument("parameter " + full + " has wrong shape");
  };
  const int owners = config_.share_params ? 1 : n_agents_;
  const std::size_t h = config_.hidden, l = config_.msg_len;
  for (int i = 0; i < owners; ++i) {
    expect(i, "enc_w", h, obs_dim_ + l);
    expect(i, "rec_w", h, h);
    expect(i, "pi_w", num_actions_, h);
    expect(i, "msg_w", l, h);
    if (config_.scheme == Scheme::kGatedMean) expect(i, "gate_w", 1, h);
    else expect(i, "key_w", config_.key_dim, h);
  }
}

ad::Tensor& CommModel::weight(int agent, const std::string& name) {
  if (config_.share_params) return params_.at(name);
  return params_.at("a" + std::to_string(agent) + "." + name);
}

Var aggregate(Tape& tape, std::span<const Outgoing> received, Scheme scheme, Var query, std::size_t msg_len) {
  std::vector<const Outgoing*> live;
  for (const auto& o : received)
    if (o.active) live.push_back(&o);
  if (live.empty()) return tape.zeros(msg_len);
  std::vector<Var> terms;
  if (scheme == Scheme::kGatedMean) {
    for (const Outgoing* o : live) terms.push_back(ad::scale(o->message, o->gate));
    // Denominator counts every other agent slot, live or not.
    return ad::scale(ad::add_n(terms), 1.0 / static_cast<double>(received.size()));
  }
  const double norm = 1.0 / std::sqrt(static_cast<double>(query.size()));
  std::vector<Var> scores;
  for (const Outgoing* o : live) scores.push_back(ad::scale(ad::dot(query, o->key), norm));
  const Var weights = ad::softmax(ad::concat(scores));
  for (std::size_t j = 0; j < live.size(); ++j)
    terms.push_back(ad::scale(live[j]->message, ad::pick(weights, j)));
  return ad::add_n(terms);
}

AgentOutput step_agent(Tape& tape, CommModel& model, int agent, Var observation,
                       std::span<const Outgoing> received, Var hidden) {
  const AgentConfig& cfg = model.config();
  if (observation.size() != static_cast<std::size_t>(model.obs_dim()))
    throw std::invalid_argument("observation size does not match the environment");
  if (hidden.size() != static_cast<std::size_t>(cfg.hidden))
    throw std::invalid_argument("hidden state size mismatch");
  const auto w = [&](const char* name) { return tape.param(model.weight(agent, name)); };

  Var query;
  if (cfg.scheme == Scheme::kAttention) query = ad::matmul(w("query_w"), hidden);
  const Var pooled = aggregate(tape, received, cfg.scheme, query, cfg.msg_len);
  const Var parts[] = {observation, pooled};
  const Var input = ad::concat(parts);

  AgentOutput out;
  out.hidden = ad::rnn_cell(input, hidden, w("enc_w"), w("rec_w"), w("enc_b"));
  out.logits = ad::add(ad::matmul(w("pi_w"), out.hidden), w("pi_b"));
  out.message = ad::squash(ad::add(ad::matmul(w("msg_w"), out.hidden), w("msg_b")));
  if (cfg.scheme == Scheme::kGatedMean)
    out.gate = ad::sigmoid(ad::add(ad::matmul(w("gate_w"), out.hidden), w("gate_b")));
  else
    out.key = ad::matmul(w("key_w"), out.hidden);
  return out;
}

std::vector<std::vector<Outgoing>> exchange(Tape& tape, std::span<const AgentOutput> previous,
                                            const std::vector<bool>& active, Delivery delivery,
                                            bool zero_comm, const Quantizer& q) {
  const std::size_t n = previous.size();
  if (active.size() != n) throw std::invalid_argument("one activity flag per agent required");
  std::vector<Outgoing> sent(n);
  for (std::size_t j = 0; j < n; ++j) {
    const AgentOutput& p = previous[j];
    Outgoing& o = sent[j];
    o.gate = p.gate;
    o.key = p.key;
    o.active = active[j];
    if (zero_comm) {
      o.message = tape.zeros(p.message.size());
      continue;
    }
    switch (delivery) {
      case Delivery::kContinuous: o.message = p.message; break;
      case Delivery::kStraightThrough:
        o.message = ad::straight_through(p.message, [&q](double x) { return q.quantize(x); });
        break;
      case Delivery::kQuantized: {
        std::vector<double> v(p.message.value().begin(), p.message.value().end());
        for (double& x : v) x = q.quantize(x);
        o.message = tape.column(std::move(v));
        break;
      }
    }
  }
  std::vector<std::vector<Outgoing>> received(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) received[i].push_back(sent[j]);
  return received;
}

std::vector<AgentOutput> initial_outputs(Tape& tape, const CommModel& model) {
  const AgentConfig& cfg = model.config();
  std::vector<AgentOutput> out(model.n_agents());
  for (auto& o : out) {
    o.message = tape.zeros(cfg.msg_len);
    o.hidden = tape.zeros(cfg.hidden);
    o.gate = tape.zeros(1);
    o.key = tape.zeros(cfg.key_dim);
    o.logits = tape.zeros(model.num_actions());
  }
  return out;
}

}  // namespace disem
