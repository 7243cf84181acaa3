#include "disem/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "disem/parallel.hpp"
#include "disem/trace.hpp"

namespace disem {

using ad::Tape;
using ad::Var;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kOri: return "ORI";
    case Variant::kZc: return "ZC";
    case Variant::kDifEm: return "DifEM";
    case Variant::kDisEm: return "DisEM";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  std::string u = s;
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return std::toupper(c); });
  if (u == "ORI") return Variant::kOri;
  if (u == "ZC") return Variant::kZc;
  if (u == "DIFEM") return Variant::kDifEm;
  if (u == "DISEM") return Variant::kDisEm;
  throw std::invalid_argument("unknown variant: " + s);
}

TrainSchedule TrainSchedule::for_task(Task task) {
  TrainSchedule s;
  switch (task) {
    case Task::kTreasureHunt: s.t_n = 100, s.alpha_p = 0.2, s.t_max = 200; break;
    case Task::kPredatorPrey: s.t_n = 100, s.alpha_p = 0.05, s.t_max = 150; break;
    case Task::kTrafficJunction: s.t_n = 1000, s.alpha_p = 0.05, s.t_max = 1250; break;
  }
  return s;
}

void TrainSchedule::validate() const {
  if (t_n < 0 || t_n > t_max) throw std::invalid_argument("schedule needs 0 <= T_N <= T_max");
  if (alpha_p < 0.0) throw std::invalid_argument("alpha_p must be non-negative");
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("momentum must be in [0, 1)");
  if (episodes_per_epoch < 1) throw std::invalid_argument("episodes_per_epoch must be positive");
  if (!(epsilon >= 0.0) || !(difem_var_eps > 0.0)) throw std::invalid_argument("bad smoothing constants");
  if (grad_clip < 0.0) throw std::invalid_argument("grad_clip must be non-negative");
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 over the combined words
  std::uint64_t z = a * 0x9E3779B97F4A7C15ULL + b + 0x632BE59BD9B4E019ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double EpisodeRecord::team_return() const {
  double total = 0.0;
  for (const auto& step : rewards)
    for (double r : step) total += r;
  return rewards.empty() ? 0.0 : total / static_cast<double>(rewards.front().size());
}

std::size_t RolloutBatch::message_count(int agent) const {
  std::size_t n = 0;
  for (const auto& ep : episodes)
    for (const auto& step : ep.active) n += step[agent] ? 1 : 0;
  return n;
}

std::optional<MessageBatch> RolloutBatch::messages_of(int agent) const {
  const std::size_t n = message_count(agent);
  if (n == 0) return std::nullopt;
  std::vector<double> values;
  values.reserve(n * msg_len);
  for (const auto& ep : episodes)
    for (std::size_t t = 0; t < ep.active.size(); ++t)
      if (ep.active[t][agent]) values.insert(values.end(), ep.messages[t][agent].begin(), ep.messages[t][agent].end());
  return MessageBatch(n, msg_len, std::move(values));
}

// ---------------------------------------------------------------------------
// Rollouts

namespace {

int sample_action(std::span<const double> log_probs, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double r = u(rng);
  double acc = 0.0;
  for (std::size_t a = 0; a < log_probs.size(); ++a) {
    acc += std::exp(log_probs[a]);
    if (r < acc) return static_cast<int>(a);
  }
  return static_cast<int>(log_probs.size()) - 1;
}

int greedy_action(std::span<const double> logits) {
  return static_cast<int>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

EpisodeRecord run_episode(const EnvSpec& spec, CommModel& model, const Quantizer& q, RolloutMode mode,
                          Variant variant, std::uint64_t env_seed, std::uint64_t action_seed) {
  const bool training = mode == RolloutMode::kTrain;
  const bool zero_comm = variant == Variant::kZc;
  const Delivery delivery = training ? model.config().train_delivery : Delivery::kQuantized;
  const int n = spec.n_agents;
  const int msg_len = model.config().msg_len;

  EpisodeRecord rec;
  auto tape = std::make_unique<Tape>();
  auto env = make_environment(spec);
  std::mt19937_64 action_rng(action_seed);

  std::vector<Observation> obs = env->reset(env_seed);
  const std::vector<AgentOutput> silent = initial_outputs(*tape, model);
  std::vector<AgentOutput> prev = silent;
  std::vector<bool> prev_active(n, false);  // nothing was sent before t = 0
  std::vector<Var> hidden(n);
  for (int i = 0; i < n; ++i) hidden[i] = silent[i].hidden;

  while (!env->done()) {
    const auto received = exchange(*tape, prev, prev_active, delivery, zero_comm, q);
    std::vector<AgentOutput> out = silent;
    std::vector<bool> now_active(n, false);
    std::vector<int> actions(n, 0);
    rec.active.emplace_back(n, 0);
    rec.log_probs.emplace_back(n);
    rec.message_nodes.emplace_back(n);
    rec.messages.emplace_back(n);
    rec.observations.push_back(obs);

    for (int i = 0; i < n; ++i) {
      if (!env->active(i)) {
        hidden[i] = silent[i].hidden;  // a new occupant starts from scratch
        continue;
      }
      AgentOutput o = step_agent(*tape, model, i, tape->column(obs[i]), received[i], hidden[i]);
      if (zero_comm) o.message = tape->zeros(msg_len);
      hidden[i] = o.hidden;
      if (training) {
        const Var lp = ad::log_softmax(o.logits);
        actions[i] = sample_action(lp.value(), action_rng);
        rec.log_probs.back()[i] = ad::pick(lp, actions[i]);
      } else {
        actions[i] = greedy_action(o.logits.value());
      }
      rec.message_nodes.back()[i] = o.message;
      rec.messages.back()[i].assign(o.message.value().begin(), o.message.value().end());
      rec.active.back()[i] = 1;
      now_active[i] = true;
      out[i] = o;
    }
    rec.actions.push_back(actions);
    StepResult r = env->step(actions);
    rec.rewards.push_back(std::move(r.rewards));
    obs = std::move(r.observations);
    prev = std::move(out);
    prev_active = std::move(now_active);
  }
  rec.length = env->t();
  rec.success = env->success();
  if (training) rec.tape = std::move(tape);
  else rec.message_nodes.clear();  // nodes die with the tape
  return rec;
}

}  // namespace

RolloutBatch collect(const EnvSpec& spec, CommModel& model, const Quantizer& q, const RolloutOptions& opts) {
  if (opts.episodes < 1) throw std::invalid_argument("rollout needs at least one episode");
  if (model.n_agents() != spec.n_agents || model.obs_dim() != spec.obs_dim() ||
      model.num_actions() != spec.num_actions())
    throw std::invalid_argument("model does not match environment " + spec.label());
  RolloutBatch batch;
  batch.params_version = model.version();
  batch.n_agents = spec.n_agents;
  batch.msg_len = model.config().msg_len;
  batch.episodes.resize(opts.episodes);
  parallel_for(static_cast<std::size_t>(opts.episodes), opts.threads, [&](std::size_t e) {
    batch.episodes[e] = run_episode(spec, model, q, opts.mode, opts.variant, mix_seed(opts.seed, 2 * e),
                                    mix_seed(opts.seed, 2 * e + 1));
  });
  return batch;
}

// ---------------------------------------------------------------------------
// Optimization

Optimizer::Optimizer(OptimizerKind kind, double lr, double momentum)
    : kind_(kind), lr_(lr), momentum_(momentum) {}

void Optimizer::step(ad::ParameterSet& params) {
  if (first_.empty()) {
    for (std::size_t p = 0; p < params.size(); ++p) {
      first_.emplace_back(params.tensor(p).size(), 0.0);
      second_.emplace_back(params.tensor(p).size(), 0.0);
    }
  }
  if (first_.size() != params.size()) throw std::logic_error("optimizer bound to a different parameter set");
  ++steps_;
  constexpr double kBeta2 = 0.999;
  constexpr double kAdamEps = 1e-8;
  for (std::size_t p = 0; p < params.size(); ++p) {
    ad::Tensor& t = params.tensor(p);
    if (t.grad.size() != t.size()) continue;
    auto& m = first_[p];
    auto& v = second_[p];
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double g = t.grad[i];
      if (kind_ == OptimizerKind::kSgd) {
        m[i] = momentum_ * m[i] + g;
        t.data[i] -= lr_ * m[i];
      } else {
        m[i] = momentum_ * m[i] + (1.0 - momentum_) * g;
        v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g * g;
        const double mh = m[i] / (1.0 - std::pow(momentum_, static_cast<double>(steps_)));
        const double vh = v[i] / (1.0 - std::pow(kBeta2, static_cast<double>(steps_)));
        t.data[i] -= lr_ * mh / (std::sqrt(vh) + kAdamEps);
      }
    }
  }
}

DifemPenalty difem_penalty(const MessageBatch& batch, double var_eps) {
  const std::size_t n = batch.size(), len = batch.length();
  if (n < 2) throw std::invalid_argument("differential-entropy penalty needs at least two messages");
  DifemPenalty out;
  out.grad.assign(n * len, 0.0);
  const double total = static_cast<double>(n);
  for (std::size_t d = 0; d < len; ++d) {
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += batch.at(i, d);
    mu /= total;
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) var += (batch.at(i, d) - mu) * (batch.at(i, d) - mu);
    var /= total;
    const double s = var + var_eps;
    out.value += 0.5 * std::log2(2.0 * std::numbers::pi * std::numbers::e * s);
    for (std::size_t i = 0; i < n; ++i)
      out.grad[i * len + d] = (batch.at(i, d) - mu) / (total * std::numbers::ln2 * s);
  }
  return out;
}

UpdateDiagnostics compute_gradients(RolloutBatch& batch, CommModel& model, const TrainSchedule& schedule,
                                    int epoch, const Quantizer& q, double gamma, int threads) {
  if (batch.params_version != model.version())
    throw std::logic_error("stale rollout batch: parameters changed since collection");
  for (const auto& ep : batch.episodes)
    if (!ep.tape || ep.tape->backward_done())
      throw std::logic_error("rollout batch has no fresh tapes (evaluation batch or already used)");

  const int n = batch.n_agents;
  const std::size_t num_eps = batch.episodes.size();
  UpdateDiagnostics diag;
  diag.alpha = schedule.alpha(epoch);

  // Discounted returns per live step; a slot that goes idle ends its chain.
  // The baseline is the batch mean return at the same timestep.
  std::vector<std::vector<std::vector<double>>> adv(num_eps);
  std::vector<double> base_sum, base_cnt;
  for (std::size_t e = 0; e < num_eps; ++e) {
    const EpisodeRecord& ep = batch.episodes[e];
    const std::size_t len = ep.rewards.size();
    if (base_sum.size() < len) {
      base_sum.resize(len, 0.0);
      base_cnt.resize(len, 0.0);
    }
    adv[e].assign(len, std::vector<double>(n, 0.0));
    for (int i = 0; i < n; ++i) {
      double g = 0.0;
      for (std::size_t t = len; t-- > 0;) {
        if (!ep.active[t][i]) {
          g = 0.0;
          continue;
        }
        g = ep.rewards[t][i] + gamma * g;
        adv[e][t][i] = g;
        base_sum[t] += g;
        base_cnt[t] += 1.0;
      }
    }
  }
  double sq = 0.0;
  std::size_t samples = 0;
  for (std::size_t e = 0; e < num_eps; ++e)
    for (std::size_t t = 0; t < adv[e].size(); ++t)
      for (int i = 0; i < n; ++i)
        if (batch.episodes[e].active[t][i]) {
          adv[e][t][i] -= base_sum[t] / base_cnt[t];
          sq += adv[e][t][i] * adv[e][t][i];
          ++samples;
        }
  diag.samples = samples;
  const double sd = samples ? std::sqrt(sq / samples) : 0.0;
  for (std::size_t e = 0; e < num_eps; ++e)
    for (std::size_t t = 0; t < adv[e].size(); ++t)
      for (int i = 0; i < n; ++i)
        if (batch.episodes[e].active[t][i]) adv[e][t][i] /= sd + 1e-8;

  // Message-space regularizer gradients, injected at the generator outputs.
  int agents_with_messages = 0;
  const bool regularize = diag.alpha > 0.0 && (schedule.variant == Variant::kDisEm ||
                                               schedule.variant == Variant::kDifEm);
  for (int i = 0; i < n; ++i) {
    const auto messages = batch.messages_of(i);
    if (!messages) continue;
    ++agents_with_messages;
    const double h = entropy(*messages, q, schedule.epsilon);
    diag.train_entropy_bits += h;
    if (!regularize) continue;
    std::vector<double> grad;
    if (schedule.variant == Variant::kDisEm) {
      grad = pseudo_gradient(*messages, q, schedule.epsilon).grads;
      diag.regularizer += h;
    } else {
      if (messages->size() < 2) continue;
      DifemPenalty pen = difem_penalty(*messages, schedule.difem_var_eps);
      grad = std::move(pen.grad);
      diag.regularizer += pen.value;
    }
    const std::size_t len = messages->length();
    std::size_t row = 0;
    std::vector<double> g(len);
    for (auto& ep : batch.episodes)
      for (std::size_t t = 0; t < ep.active.size(); ++t) {
        if (!ep.active[t][i]) continue;
        for (std::size_t d = 0; d < len; ++d) g[d] = diag.alpha * grad[row * len + d];
        ep.tape->inject_gradient(ep.message_nodes[t][i], g);
        ++row;
      }
  }
  if (agents_with_messages > 0) diag.train_entropy_bits /= agents_with_messages;

  std::vector<double> losses(num_eps, 0.0);
  parallel_for(num_eps, threads, [&](std::size_t e) {
    EpisodeRecord& ep = batch.episodes[e];
    Tape& tape = *ep.tape;
    std::vector<Var> terms;
    for (std::size_t t = 0; t < ep.active.size(); ++t)
      for (int i = 0; i < n; ++i)
        if (ep.active[t][i]) terms.push_back(ad::scale(ep.log_probs[t][i], adv[e][t][i]));
    const Var loss = terms.empty() ? tape.zeros(1, 1)
                                   : ad::scale(ad::add_n(terms), -1.0 / static_cast<double>(num_eps));
    losses[e] = loss.scalar();
    tape.backward(loss);
  });

  model.params().zero_grad();
  for (const auto& ep : batch.episodes) ep.tape->accumulate_param_grads();
  diag.policy_loss = std::accumulate(losses.begin(), losses.end(), 0.0);
  double norm_sq = 0.0;
  for (std::size_t p = 0; p < model.params().size(); ++p)
    for (double g : model.params().tensor(p).grad) norm_sq += g * g;
  diag.grad_norm = std::sqrt(norm_sq);
  if (!std::isfinite(diag.grad_norm))
    throw std::runtime_error("non-finite gradient at epoch " + std::to_string(epoch) +
                             " (policy loss " + std::to_string(diag.policy_loss) + ")");
  return diag;
}

UpdateDiagnostics policy_gradient_update(RolloutBatch& batch, CommModel& model, Optimizer& optimizer,
                                         const TrainSchedule& schedule, int epoch, const Quantizer& q,
                                         double gamma, int threads) {
  UpdateDiagnostics diag = compute_gradients(batch, model, schedule, epoch, q, gamma, threads);
  if (schedule.grad_clip > 0.0 && diag.grad_norm > schedule.grad_clip) {
    const double s = schedule.grad_clip / diag.grad_norm;
    for (std::size_t p = 0; p < model.params().size(); ++p)
      for (double& g : model.params().tensor(p).grad) g *= s;
  }
  optimizer.step(model.params());
  model.bump_version();
  return diag;
}

// ---------------------------------------------------------------------------
// Evaluation and the training loop

EvalSummary summarize(const EnvSpec& spec, const RolloutBatch& batch, const Quantizer& q, double epsilon) {
  EvalSummary s;
  s.episodes = static_cast<int>(batch.episodes.size());
  std::vector<double> perf;
  for (const auto& ep : batch.episodes) {
    perf.push_back(spec.task == Task::kTrafficJunction ? (ep.success ? 1.0 : 0.0) : ep.length);
    s.mean_return += ep.team_return();
  }
  s.mean_return /= s.episodes;
  s.perf = std::accumulate(perf.begin(), perf.end(), 0.0) / perf.size();
  for (double p : perf) s.perf_std += (p - s.perf) * (p - s.perf);
  s.perf_std = std::sqrt(s.perf_std / perf.size());
  for (int i = 0; i < batch.n_agents; ++i) {
    const auto m = batch.messages_of(i);
    if (!m) continue;
    s.agent_entropy_bits.push_back(entropy(*m, q, epsilon));
  }
  if (!s.agent_entropy_bits.empty())
    s.entropy_bits = std::accumulate(s.agent_entropy_bits.begin(), s.agent_entropy_bits.end(), 0.0) /
                     s.agent_entropy_bits.size();
  return s;
}

EvalSummary evaluate(const EnvSpec& spec, CommModel& model, const Quantizer& q, Variant variant, int episodes,
                     std::uint64_t seed, int threads, const std::string& trace_path, double epsilon) {
  RolloutOptions opts;
  opts.mode = RolloutMode::kEval;
  opts.variant = variant;
  opts.episodes = episodes;
  opts.seed = seed;
  opts.threads = threads;
  const RolloutBatch batch = collect(spec, model, q, opts);
  if (!trace_path.empty()) write_trace(trace_path, spec, batch, q.delta());
  return summarize(spec, batch, q, epsilon);
}

TrainResult train(const EnvSpec& spec, const AgentConfig& agent, const TrainSchedule& schedule,
                  std::uint64_t seed, const TrainOptions& opts) {
  spec.validate();
  schedule.validate();
  if (opts.eval_every < 1 || opts.metric_episodes < 1)
    throw std::invalid_argument("eval_every and metric_episodes must be positive");
  const Quantizer q(schedule.delta);
  CommModel model(agent, spec.n_agents, spec.obs_dim(), spec.num_actions(), mix_seed(seed, 0x5EED));
  Optimizer optimizer(schedule.optimizer, schedule.lr, schedule.momentum);

  std::ofstream metrics_csv;
  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    metrics_csv.open(std::filesystem::path(opts.out_dir) / "metrics.csv");
    if (!metrics_csv) throw std::runtime_error("cannot write metrics to " + opts.out_dir);
    metrics_csv << kMetricsHeader << '\n';
  }
  const auto save = [&](const ad::ParameterSet& p, const char* name) {
    if (!opts.out_dir.empty()) p.save_file((std::filesystem::path(opts.out_dir) / name).string());
  };

  TrainResult result;
  if (schedule.t_n == 0) {
    result.checkpoint_tn = model.params();
    save(result.checkpoint_tn, "checkpoint_tn.params");
  }
  for (int epoch = 0; epoch < schedule.t_max; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    RolloutOptions ro;
    ro.mode = RolloutMode::kTrain;
    ro.variant = schedule.variant;
    ro.episodes = schedule.episodes_per_epoch;
    ro.seed = mix_seed(seed, 1000003ULL + epoch);
    ro.threads = opts.threads;
    RolloutBatch batch = collect(spec, model, q, ro);
    double batch_return = 0.0;
    for (const auto& ep : batch.episodes) batch_return += ep.team_return();
    batch_return /= batch.episodes.size();
    policy_gradient_update(batch, model, optimizer, schedule, epoch, q, spec.gamma, opts.threads);

    if (epoch + 1 == schedule.t_n) {
      result.checkpoint_tn = model.params();
      save(result.checkpoint_tn, "checkpoint_tn.params");
    }
    const bool last = epoch + 1 == schedule.t_max;
    if ((epoch + 1) % opts.eval_every == 0 || last) {
      const EvalSummary ev = evaluate(spec, model, q, schedule.variant, opts.metric_episodes, opts.eval_seed,
                                      opts.threads, "");
      EpochMetrics m;
      m.epoch = epoch;
      m.alpha = schedule.alpha(epoch);
      m.perf = ev.perf;
      m.entropy_bits = ev.entropy_bits;
      m.mean_return = batch_return;
      m.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      result.metrics.push_back(m);
      if (metrics_csv.is_open()) {
        metrics_csv << m.epoch << ',' << to_string(schedule.variant) << ',' << to_string(spec.task) << ','
                    << to_string(spec.setting) << ',' << seed << ',' << m.perf << ',' << m.entropy_bits << ','
                    << m.mean_return << ',' << m.wall_time_s << '\n';
        metrics_csv.flush();
      }
      if (opts.on_epoch) opts.on_epoch(m);
    }
  }
  result.final_params = model.params();
  save(result.final_params, "checkpoint_final.params");
  return result;
}

}  // namespace disem
