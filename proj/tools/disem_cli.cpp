// disem: train, evaluate and inspect low-entropy communicating agents.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "disem/codec.hpp"
#include "disem/config.hpp"
#include "disem/harness.hpp"
#include "disem/trace.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitProperty = 2;
constexpr int kExitRuntime = 3;

struct ConfigFlags {
  std::string file;
  std::map<std::string, std::string> values;
};

// One --<dotted.key> flag per recognised configuration key.
void add_config_flags(CLI::App* app, ConfigFlags& flags) {
  app->add_option("--config", flags.file, "JSON configuration file")->check(CLI::ExistingFile);
  for (const auto& key : disem::RunConfig::keys()) {
    flags.values[key];
    app->add_option("--" + key, flags.values[key], "override " + key);
  }
}

// Config file, then environment overrides, then flags.
json resolve_json(const ConfigFlags& flags) {
  json j = json::object();
  if (!flags.file.empty()) {
    std::ifstream in(flags.file);
    j = json::parse(in);
  }
  if (const char* dir = std::getenv("DISEM_OUT_DIR")) disem::set_dotted(j, "run.out_dir", std::string(dir));
  if (const char* t = std::getenv("DISEM_THREADS")) disem::set_dotted(j, "run.threads", std::string(t));
  for (const auto& [key, value] : flags.values)
    if (!value.empty()) disem::set_dotted(j, key, value);
  return j;
}

disem::RunConfig resolve_config(const ConfigFlags& flags) { return disem::RunConfig::from_json(resolve_json(flags)); }

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void print_eval(const disem::EvalSummary& e) {
  std::cout << "episodes,perf_metric,perf_std,entropy_bits,mean_return\n"
            << e.episodes << ',' << e.perf << ',' << e.perf_std << ',' << e.entropy_bits << ',' << e.mean_return
            << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"disem: low-entropy discrete communication for multi-agent RL"};
  app.require_subcommand(1);

  ConfigFlags train_flags, eval_flags, matrix_flags, sweep_flags;

  auto* train_cmd = app.add_subcommand("train", "train one configuration and evaluate it");
  add_config_flags(train_cmd, train_flags);
  std::string train_dir;
  train_cmd->add_option("--dir", train_dir, "output directory (default <run.out_dir>/<cell>)");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate saved parameters");
  add_config_flags(eval_cmd, eval_flags);
  std::string params_path, trace_path;
  eval_cmd->add_option("--params", params_path, "parameter checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--trace", trace_path, "write an evaluation trace (JSONL)");

  auto* matrix_cmd = app.add_subcommand("matrix", "train every task x setting x scheme x variant x seed cell");
  add_config_flags(matrix_cmd, matrix_flags);
  std::string m_tasks = "TH,PP,TJ", m_settings = "A,B", m_schemes = "ic3net_like,tarmac_like",
              m_variants = "ORI,ZC,DifEM,DisEM";
  int m_seeds = 0, m_workers = 1;
  bool paper_scale = false;
  matrix_cmd->add_option("--tasks", m_tasks, "comma-separated tasks");
  matrix_cmd->add_option("--settings", m_settings, "comma-separated settings");
  matrix_cmd->add_option("--schemes", m_schemes, "comma-separated schemes");
  matrix_cmd->add_option("--variants", m_variants, "comma-separated variants");
  matrix_cmd->add_option("--seeds", m_seeds, "number of seeds (desk 2, full 5)");
  matrix_cmd->add_option("--workers", m_workers, "cells trained concurrently");
  matrix_cmd->add_flag("--paper-scale", paper_scale, "5 seeds and 500 evaluation episodes");

  auto* sweep_cmd = app.add_subcommand("sweep", "entropy/performance over message lengths");
  add_config_flags(sweep_cmd, sweep_flags);
  std::string s_lengths = "1,2,4,8,16", s_variants = "ORI,DisEM";
  int s_seeds = 2, s_workers = 1;
  sweep_cmd->add_option("--lengths", s_lengths, "comma-separated message lengths");
  sweep_cmd->add_option("--variants", s_variants, "comma-separated variants");
  sweep_cmd->add_option("--seeds", s_seeds, "number of seeds");
  sweep_cmd->add_option("--workers", s_workers, "cells trained concurrently");

  auto* lemma_cmd = app.add_subcommand("lemma-check", "randomized check of the single-variable update");
  int trials = 1000000;
  std::uint64_t lemma_seed = 7;
  double lemma_delta = 0.25;
  lemma_cmd->add_option("--trials", trials, "number of random trials");
  lemma_cmd->add_option("--seed", lemma_seed, "random seed");
  lemma_cmd->add_option("--delta", lemma_delta, "quantization step");
  bool grid_only = false;
  lemma_cmd->add_flag("--grid-only", grid_only, "place every value on a grid point");

  auto* codec_cmd = app.add_subcommand("codec-report", "Huffman code lengths against entropy for a trace");
  std::string codec_trace;
  codec_cmd->add_option("--trace", codec_trace, "evaluation trace (JSONL)")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (*train_cmd) {
      const auto config = resolve_config(train_flags);
      const std::string dir =
          train_dir.empty() ? (fs::path(config.out_dir) / (config.env.label() + "_" +
                                                            disem::to_string(config.schedule.variant) + "_s" +
                                                            std::to_string(config.seed)))
                                  .string()
                            : train_dir;
      const auto r = disem::run_cell(config, dir);
      if (!r.ok) {
        std::cerr << "training failed: " << r.error << '\n';
        return kExitRuntime;
      }
      print_eval(r.eval);
      std::cerr << "wrote " << dir << " in " << r.wall_time_s << " s\n";
      return 0;
    }
    if (*eval_cmd) {
      const auto config = resolve_config(eval_flags);
      disem::CommModel model(config.agent, config.env.n_agents, config.env.obs_dim(), config.env.num_actions(),
                             disem::ad::ParameterSet::load_file(params_path));
      const disem::Quantizer q(config.schedule.delta);
      print_eval(disem::evaluate(config.env, model, q, config.schedule.variant, config.eval_episodes,
                                 config.eval_seed, config.threads, trace_path));
      return 0;
    }
    if (*matrix_cmd) {
      disem::ExperimentMatrix m;
      m.overrides = resolve_json(matrix_flags);
      if (paper_scale) disem::set_dotted(m.overrides, "eval.episodes", 500);
      const auto base = disem::RunConfig::from_json(m.overrides);
      const int n_seeds = m_seeds > 0 ? m_seeds : (paper_scale ? 5 : 2);
      for (const auto& t : split(m_tasks)) m.tasks.push_back(disem::parse_task(t));
      for (const auto& s : split(m_settings)) m.settings.push_back(disem::parse_setting(s));
      for (const auto& s : split(m_schemes)) m.schemes.push_back(disem::parse_scheme(s));
      for (const auto& v : split(m_variants)) m.variants.push_back(disem::parse_variant(v));
      for (int s = 0; s < n_seeds; ++s) m.seeds.push_back(base.seed + s);
      m.out_dir = (fs::path(base.out_dir) / "matrix").string();
      m.workers = m_workers;
      const auto result = disem::run_matrix(m);
      std::cout << result.table;
      int failed = 0;
      for (const auto& c : result.cells)
        if (!c.ok) {
          ++failed;
          std::cerr << "cell failed: " << c.env_label << ' ' << disem::to_string(c.variant) << " seed " << c.seed
                    << ": " << c.error << '\n';
        }
      return failed ? kExitRuntime : 0;
    }
    if (*sweep_cmd) {
      const auto base = resolve_config(sweep_flags);
      std::vector<int> lengths;
      for (const auto& l : split(s_lengths)) lengths.push_back(std::stoi(l));
      std::vector<disem::Variant> variants;
      for (const auto& v : split(s_variants)) variants.push_back(disem::parse_variant(v));
      std::vector<std::uint64_t> seeds;
      for (int s = 0; s < s_seeds; ++s) seeds.push_back(base.seed + s);
      const auto out = (fs::path(base.out_dir) / "sweep").string();
      const auto result = disem::sweep_msg_len(base, lengths, variants, seeds, out, s_workers);
      std::ifstream csv(fs::path(out) / "sweep.csv");
      std::cout << csv.rdbuf();
      for (const auto& line : result.soft_checks) std::cerr << line << '\n';
      return 0;
    }
    if (*lemma_cmd) {
      const auto rep = disem::lemma_check(trials, lemma_seed, lemma_delta, grid_only);
      std::cout << "trials,moved,grid_trials,entropy_violations,sign_violations,transfer_violations,"
                   "grid_violations,seconds\n"
                << rep.trials << ',' << rep.moved << ',' << rep.grid_trials << ',' << rep.entropy_violations << ','
                << rep.sign_violations << ',' << rep.transfer_violations << ',' << rep.grid_violations << ','
                << rep.seconds << '\n';
      return rep.ok() ? 0 : kExitProperty;
    }
    if (*codec_cmd) {
      const auto trace = disem::read_trace_messages(codec_trace);
      if (trace.messages.empty()) throw std::runtime_error("trace contains no messages");
      std::vector<double> flat;
      for (const auto& m : trace.messages) flat.insert(flat.end(), m.begin(), m.end());
      const disem::MessageBatch batch(trace.messages.size(), trace.msg_len, std::move(flat));
      const disem::Quantizer q(trace.delta);
      std::cout << "digit,symbols,entropy_bits,mean_code_length,coded_bits,lossless\n";
      for (const auto& d : disem::codec::report(batch, q))
        std::cout << d.digit << ',' << d.symbols << ',' << d.entropy_bits << ',' << d.mean_length << ','
                  << d.coded_bits << ',' << (d.lossless ? "yes" : "no") << '\n';
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}
