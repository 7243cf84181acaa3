#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "disem/config.hpp"
#include "disem/trainer.hpp"

namespace disem {

/// Outcome of one (config, seed) training run plus its final evaluation.
struct CellResult {
  std::string env_label;
  Scheme scheme = Scheme::kGatedMean;
  Variant variant = Variant::kOri;
  std::uint64_t seed = 0;
  int msg_len = 0;
  EvalSummary eval;
  bool ok = false;
  std::string error;
  double wall_time_s = 0.0;
};

/// Trains `config`, evaluates the final parameters and writes everything under
/// `dir` (metrics.csv, checkpoints, eval_trace.jsonl, result.csv). result.csv
/// appears atomically once the cell is complete.
CellResult run_cell(const RunConfig& config, const std::string& dir);

struct ExperimentMatrix {
  /// Dotted-key overrides applied on top of each cell's task defaults.
  nlohmann::json overrides = nlohmann::json::object();
  std::vector<Task> tasks;
  std::vector<Setting> settings;
  std::vector<Scheme> schemes;
  std::vector<Variant> variants;
  std::vector<std::uint64_t> seeds;
  std::string out_dir = "runs/matrix";
  int workers = 1;  // cells trained concurrently
};

struct MatrixResult {
  std::vector<CellResult> cells;
  std::string table;  // human-readable Table-I-style summary
};

/// "mean ±std" with population std at the given precision.
std::string format_mean_std(const std::vector<double>& values, int precision);

inline constexpr const char* kMatrixSchema = "# schema: disem.matrix.v1";
inline constexpr const char* kMatrixHeader =
    "task,setting,scheme,variant,seed,msg_len,perf_metric,perf_std,entropy_bits,mean_return,status";
inline constexpr const char* kSweepSchema = "# schema: disem.sweep.v1";
inline constexpr const char* kSweepHeader = "task,setting,scheme,msg_len,variant,seed,entropy_bits,perf_metric";

/// Every task x setting x scheme x variant x seed cell. A failing cell is
/// recorded and the rest continue.
MatrixResult run_matrix(const ExperimentMatrix& matrix);

std::string results_table(const std::vector<CellResult>& cells);

struct SweepPoint {
  int msg_len = 0;
  Variant variant = Variant::kOri;
  std::uint64_t seed = 0;
  double entropy_bits = 0.0;
  double perf = 0.0;
  bool ok = false;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  /// Per length: does DisEM sit left of ORI (lower entropy) without losing
  /// more than `perf_tolerance` relative performance?
  std::vector<std::string> soft_checks;
};

SweepResult sweep_msg_len(const RunConfig& base, const std::vector<int>& lengths,
                          const std::vector<Variant>& variants, const std::vector<std::uint64_t>& seeds,
                          const std::string& out_dir, int workers = 1, double perf_tolerance = 0.2);

struct LemmaReport {
  int trials = 0;
  int moved = 0;                // trials whose update changed a bin count
  int grid_trials = 0;          // trials that queried a grid point
  int entropy_violations = 0;   // H(M') > H(M) + 1e-12
  int sign_violations = 0;      // sign(grad) != sign(N_u - N_{u+1})
  int transfer_violations = 0;  // count change outside the two allowed outcomes
  int grid_violations = 0;      // a grid point moved
  double seconds = 0.0;

  bool ok() const {
    return entropy_violations == 0 && sign_violations == 0 && transfer_violations == 0 && grid_violations == 0;
  }
};

/// Randomized single-variable pseudo-gradient updates checked against a
/// brute-force entropy recomputation. With `grid_only` every value sits on a
/// grid point. Throws std::invalid_argument for trials < 1.
LemmaReport lemma_check(int trials, std::uint64_t seed, double delta = 0.25, bool grid_only = false);

}  // namespace disem
