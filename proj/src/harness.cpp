#include "disem/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "disem/entropy.hpp"
#include "disem/parallel.hpp"

namespace disem {

namespace fs = std::filesystem;

namespace {

void write_atomic(const fs::path& path, const std::string& contents) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
  }
  fs::rename(tmp, path);
}

std::string cell_dir_name(const RunConfig& c) {
  return c.env.label() + "_" + to_string(c.agent.scheme) + "_" + to_string(c.schedule.variant) + "_L" +
         std::to_string(c.agent.msg_len) + "_s" + std::to_string(c.seed);
}

std::string csv_row(const CellResult& r) {
  std::ostringstream os;
  const auto dash = r.env_label.find('-');
  os << r.env_label.substr(0, dash) << ',' << r.env_label.substr(dash + 1) << ',' << to_string(r.scheme) << ','
     << to_string(r.variant) << ',' << r.seed << ',' << r.msg_len << ',' << r.eval.perf << ',' << r.eval.perf_std
     << ',' << r.eval.entropy_bits << ',' << r.eval.mean_return << ',' << (r.ok ? "ok" : "failed") << '\n';
  return os.str();
}

bool is_junction(const std::string& label) { return label.rfind("TJ", 0) == 0; }

}  // namespace

CellResult run_cell(const RunConfig& config, const std::string& dir) {
  CellResult r;
  r.env_label = config.env.label();
  r.scheme = config.agent.scheme;
  r.variant = config.schedule.variant;
  r.seed = config.seed;
  r.msg_len = config.agent.msg_len;
  const auto start = std::chrono::steady_clock::now();
  try {
    config.validate();
    fs::create_directories(dir);
    {
      std::ofstream cfg(fs::path(dir) / "config.json");
      cfg << config.to_json().dump(2) << '\n';
    }
    TrainOptions opts;
    opts.out_dir = dir;
    opts.metric_episodes = config.metric_episodes;
    opts.eval_every = config.eval_every;
    opts.eval_seed = config.eval_seed;
    opts.threads = config.threads;
    TrainResult trained = train(config.env, config.agent, config.schedule, config.seed, opts);
    const Quantizer q(config.schedule.delta);
    CommModel model(config.agent, config.env.n_agents, config.env.obs_dim(), config.env.num_actions(),
                    std::move(trained.final_params));
    r.eval = evaluate(config.env, model, q, config.schedule.variant, config.eval_episodes, config.eval_seed,
                      config.threads, (fs::path(dir) / "eval_trace.jsonl").string());
    r.ok = true;
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  try {
    fs::create_directories(dir);
    write_atomic(fs::path(dir) / "result.csv", std::string(kMatrixHeader) + '\n' + csv_row(r));
  } catch (const std::exception& e) {
    if (r.ok) {
      r.ok = false;
      r.error = e.what();
    }
  }
  return r;
}

std::string format_mean_std(const std::vector<double>& values, int precision) {
  if (values.empty()) return "n/a";
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / values.size());
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << mean << " ±" << sd;
  return os.str();
}

std::string results_table(const std::vector<CellResult>& cells) {
  std::vector<std::string> groups;
  std::vector<Variant> variants;
  std::map<std::pair<std::string, Variant>, std::vector<const CellResult*>> by_cell;
  for (const auto& c : cells) {
    const std::string group = c.env_label + " " + to_string(c.scheme);
    if (std::find(groups.begin(), groups.end(), group) == groups.end()) groups.push_back(group);
    if (std::find(variants.begin(), variants.end(), c.variant) == variants.end()) variants.push_back(c.variant);
    if (c.ok) by_cell[{group, c.variant}].push_back(&c);
  }
  std::ostringstream os;
  constexpr int kLabel = 34;
  constexpr int kCol = 16;
  os << std::left << std::setw(kLabel) << "";
  for (Variant v : variants) os << std::setw(kCol) << to_string(v);
  os << '\n';
  for (const auto& g : groups) {
    const bool junction = is_junction(g);
    for (int row = 0; row < 2; ++row) {
      const std::string metric = row == 0 ? (junction ? "success rates (up)" : "timesteps (down)") : "entropy (down)";
      os << std::setw(kLabel) << (g + " " + metric);
      for (Variant v : variants) {
        std::vector<double> vals;
        for (const CellResult* c : by_cell[{g, v}]) vals.push_back(row == 0 ? c->eval.perf : c->eval.entropy_bits);
        os << std::setw(kCol) << format_mean_std(vals, row == 0 && junction ? 2 : 1);
      }
      os << '\n';
    }
  }
  return os.str();
}

MatrixResult run_matrix(const ExperimentMatrix& m) {
  struct Job {
    RunConfig config;
    std::string dir;
    CellResult rejected;  // filled when the cell's configuration is invalid
  };
  std::vector<Job> jobs;
  if (m.schemes.empty()) throw std::invalid_argument("matrix needs at least one scheme");
  for (Task task : m.tasks)
    for (Setting setting : m.settings)
      for (Scheme scheme : m.schemes)
        for (Variant variant : m.variants)
          for (std::uint64_t seed : m.seeds) {
            nlohmann::json j = m.overrides;
            set_dotted(j, "env.task", to_string(task));
            set_dotted(j, "env.setting", to_string(setting));
            set_dotted(j, "agent.scheme", to_string(scheme));
            set_dotted(j, "train.variant", to_string(variant));
            set_dotted(j, "run.seed", seed);
            if (m.workers > 1) set_dotted(j, "run.threads", 1);
            Job job;
            try {
              job.config = RunConfig::from_json(j);
              job.dir = (fs::path(m.out_dir) / "cells" / cell_dir_name(job.config)).string();
            } catch (const std::exception& e) {
              CellResult& r = job.rejected;
              r.env_label = EnvSpec::make(task, setting).label();
              r.scheme = scheme;
              r.variant = variant;
              r.seed = seed;
              r.error = e.what();
            }
            jobs.push_back(std::move(job));
          }
  if (jobs.empty()) throw std::invalid_argument("matrix has no cells");

  MatrixResult result;
  result.cells.resize(jobs.size());
  parallel_for(jobs.size(), m.workers, [&](std::size_t j) {
    result.cells[j] = jobs[j].dir.empty() ? jobs[j].rejected : run_cell(jobs[j].config, jobs[j].dir);
  });

  fs::create_directories(m.out_dir);
  std::string raw = std::string(kMatrixSchema) + '\n' + kMatrixHeader + '\n';
  for (const auto& c : result.cells) raw += csv_row(c);
  write_atomic(fs::path(m.out_dir) / "matrix_raw.csv", raw);
  result.table = results_table(result.cells);
  write_atomic(fs::path(m.out_dir) / "summary.txt", result.table);
  return result;
}

SweepResult sweep_msg_len(const RunConfig& base, const std::vector<int>& lengths,
                          const std::vector<Variant>& variants, const std::vector<std::uint64_t>& seeds,
                          const std::string& out_dir, int workers, double perf_tolerance) {
  for (int l : lengths)
    if (l < 1) throw std::invalid_argument("message lengths must be positive");
  struct Job {
    RunConfig config;
    std::string dir;
  };
  std::vector<Job> jobs;
  for (int len : lengths)
    for (Variant v : variants)
      for (std::uint64_t seed : seeds) {
        RunConfig c = base;
        c.agent.msg_len = len;
        c.schedule.variant = v;
        c.seed = seed;
        if (workers > 1) c.threads = 1;
        jobs.push_back({c, (fs::path(out_dir) / "cells" / cell_dir_name(c)).string()});
      }
  std::vector<CellResult> cells(jobs.size());
  parallel_for(jobs.size(), workers, [&](std::size_t j) { cells[j] = run_cell(jobs[j].config, jobs[j].dir); });

  SweepResult out;
  std::ostringstream csv;
  csv << kSweepSchema << '\n' << kSweepHeader << '\n';
  for (const auto& c : cells) {
    out.points.push_back({c.msg_len, c.variant, c.seed, c.eval.entropy_bits, c.eval.perf, c.ok});
    if (!c.ok) continue;
    csv << short_name(base.env.task) << ',' << to_string(base.env.setting) << ',' << to_string(base.agent.scheme)
        << ',' << c.msg_len << ',' << to_string(c.variant) << ',' << c.seed << ',' << c.eval.entropy_bits << ','
        << c.eval.perf << '\n';
  }
  fs::create_directories(out_dir);
  write_atomic(fs::path(out_dir) / "sweep.csv", csv.str());

  const bool lower_better = base.env.lower_is_better();
  for (int len : lengths) {
    const auto mean_of = [&](Variant v, bool entropy_field) {
      double s = 0.0;
      int n = 0;
      for (const auto& p : out.points)
        if (p.ok && p.msg_len == len && p.variant == v) {
          s += entropy_field ? p.entropy_bits : p.perf;
          ++n;
        }
      return n ? s / n : std::nan("");
    };
    const double h_ori = mean_of(Variant::kOri, true), h_dis = mean_of(Variant::kDisEm, true);
    const double p_ori = mean_of(Variant::kOri, false), p_dis = mean_of(Variant::kDisEm, false);
    if (std::isnan(h_ori) || std::isnan(h_dis)) continue;
    const bool perf_ok = lower_better ? p_dis <= p_ori * (1.0 + perf_tolerance)
                                      : p_dis >= p_ori * (1.0 - perf_tolerance);
    const bool ok = h_dis < h_ori && perf_ok;
    std::ostringstream os;
    os << (ok ? "ok  " : "WARN") << " L=" << len << ": DisEM (H=" << h_dis << ", perf=" << p_dis << ") vs ORI (H="
       << h_ori << ", perf=" << p_ori << ")";
    out.soft_checks.push_back(os.str());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lemma check

namespace {

// Brute-force bin lookup by scanning every interval.
int scan_bin(double x, double delta, int levels) {
  if (x == 1.0) return levels;
  for (int k = 0; k <= levels; ++k)
    if (x >= (k - 0.5) * delta - 1.0 && x < (k + 0.5) * delta - 1.0) return k;
  throw std::logic_error("value outside every bin");
}

std::vector<std::int64_t> scan_counts(const MessageBatch& b, double delta, int levels) {
  std::vector<std::int64_t> c(levels + 1, 0);
  for (std::size_t i = 0; i < b.size(); ++i) ++c[scan_bin(b.at(i, 0), delta, levels)];
  return c;
}

double scan_entropy(const std::vector<std::int64_t>& counts, std::size_t n, double eps) {
  double h = 0.0;
  for (auto c : counts) {
    const double p = (static_cast<double>(c) + eps) / static_cast<double>(n);
    if (p > 0.0) h -= p * std::log(p) / std::log(2.0);
  }
  return h;
}

}  // namespace

LemmaReport lemma_check(int trials, std::uint64_t seed, double delta, bool grid_only) {
  if (trials < 1) throw std::invalid_argument("lemma check needs at least one trial");
  const auto start = std::chrono::steady_clock::now();
  const Quantizer q(delta);
  const int levels = q.levels();
  const double eps = kDefaultEpsilon;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> batch_size(2, 200);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  LemmaReport rep;
  rep.trials = trials;
  for (int trial = 0; trial < trials; ++trial) {
    const int n = batch_size(rng);
    // Skewed random bin popularity so adjacent counts differ in both directions.
    std::vector<double> weights(levels + 1);
    for (double& w : weights) w = std::pow(unit(rng), 3.0);
    std::discrete_distribution<int> bin(weights.begin(), weights.end());
    std::vector<double> values(n);
    for (double& v : values) {
      const int k = bin(rng);
      v = std::clamp(q.grid_point(k) + (unit(rng) - 0.5) * delta, -1.0, 1.0);
      if (grid_only || unit(rng) < 0.05) v = q.grid_point(k);
    }
    const int i = std::uniform_int_distribution<int>(0, n - 1)(rng);
    const bool grid_trial = unit(rng) < 0.1;
    if (grid_trial) values[i] = q.grid_point(std::uniform_int_distribution<int>(0, levels)(rng));
    MessageBatch batch(n, 1, values);
    const double x = values[i];

    const auto before = scan_counts(batch, delta, levels);
    const double h_before = scan_entropy(before, n, eps);
    const double grad = pseudo_gradient_at(x, histogram(batch, 0, q, eps), n, q);

    int lower = -1;  // cell (g_lower, g_lower+1) containing x, -1 on a grid point
    for (int k = 0; k < levels; ++k)
      if (x > k * delta - 1.0 && x < (k + 1) * delta - 1.0) lower = k;

    if (lower < 0) {
      ++rep.grid_trials;
      pseudo_step_single(batch, i, 0, 0.01, q, eps);
      if (batch.at(i, 0) != x) ++rep.grid_violations;
      continue;
    }

    const std::int64_t nu = before[lower], nu1 = before[lower + 1];
    const int expected_sign = nu > nu1 ? 1 : (nu < nu1 ? -1 : 0);
    const int actual_sign = grad > 0.0 ? 1 : (grad < 0.0 ? -1 : 0);
    if (expected_sign != actual_sign) ++rep.sign_violations;

    // Admissible step: eta * |grad| strictly below delta / 2.
    const double eta = grad != 0.0 ? (0.05 + 0.949 * unit(rng)) * (0.5 * delta) / std::abs(grad) : 1.0;
    pseudo_step_single(batch, i, 0, eta, q, eps);
    const auto after = scan_counts(batch, delta, levels);

    std::vector<std::int64_t> diff(levels + 1);
    for (int k = 0; k <= levels; ++k) diff[k] = after[k] - before[k];
    const bool unchanged = std::all_of(diff.begin(), diff.end(), [](auto d) { return d == 0; });
    if (!unchanged) {
      ++rep.moved;
      std::vector<std::int64_t> allowed(levels + 1, 0);
      if (expected_sign != 0) {
        const int gain = expected_sign > 0 ? lower : lower + 1;
        allowed[gain] = 1;
        allowed[gain == lower ? lower + 1 : lower] = -1;
      }
      if (diff != allowed) ++rep.transfer_violations;
    }
    if (scan_entropy(after, n, eps) > h_before + 1e-12) ++rep.entropy_violations;
  }
  rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

}  // namespace disem
