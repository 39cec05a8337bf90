#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "ssgd/analyzer.hpp"
#include "ssgd/simulator.hpp"

namespace ssgd {

inline constexpr int kSpecVersion = 1;

// 2^-16, 2^-15, ..., 2^4.
std::vector<double> default_stepsize_grid();
// {1, 5, 10, ..., n} restricted to [1, n]; n itself is always included.
std::vector<std::size_t> default_worker_grid(std::size_t n);

struct TimeModelSpec {
  std::string kind = "fixed";  // fixed | random | power
  std::size_t n = 100;

  // fixed
  std::string taus = "sqrt";  // sqrt | linear | power | custom
  double exponent = 1.0;
  double scale = 1.0;
  std::vector<double> values;

  // random: one distribution shared by every worker
  std::string distribution = "uniform";
  std::map<std::string, double> params;

  // power
  std::string generator = "chaotic";  // chaotic | periodic | participation | speedup | csv
  double step = 0.1;
  double horizon = 100.0;
  std::uint64_t profile_seed = 0;
  double speed = 1.0;
  double idle_fraction = 0.0;
  std::string idle_mode = "round_robin";
  double interval = 1.0;
  bool allow_out_of_regime = false;
  double t_switch = 1.0;
  double multiplier = 1e6;
  std::string csv_path;
  std::string interpolation = "linear";
};

struct AlgorithmSpec {
  Algorithm algorithm = Algorithm::kSync;
  std::vector<double> stepsizes;     // empty until defaults are filled
  std::vector<std::size_t> workers;  // m for m_sync, B for rennala
  std::optional<double> staleness_clip;
  bool default_stepsizes = false;  // grids filled by finalize_spec, refilled if n changes
  bool default_workers = false;
};

struct GapSpec {
  std::vector<double> noise_ratios{100.0, 1000.0};  // sigma^2 / eps
  double smooth_ratio = 1.0;                        // L Delta / eps
  std::vector<std::size_t> m;                       // empty: 1..n
  double c1 = 16.0;
  double c2 = 1.0;
  double upper_units = 2.0;  // gradients per upper-recursion step
  double max_horizon = 1e6;
};

struct AnalyzeSpec {
  double eps = 1e-3;
  // Override the constants measured on the problem instance.
  std::optional<double> L, delta, sigma2;
  std::optional<double> R;
  std::size_t r_samples = 100000;
  std::optional<double> participation_power;
  std::optional<double> participation_idle_fraction;
};

struct ExperimentSpec {
  int spec_version = kSpecVersion;
  std::string scenario;
  std::uint64_t seed = 0;
  std::size_t replications = 1;
  std::string output_dir = "out";
  std::size_t dim = 1000;
  double noise_probability = 0.01;
  double time_budget = 1000.0;
  std::int64_t max_iterations = 0;
  std::size_t max_records = 10000;
  std::string trajectories = "all";  // all | best | none
  std::size_t threads = 0;           // 0: hardware concurrency
  TimeModelSpec time_model;
  std::vector<AlgorithmSpec> algorithms;
  GapSpec gap;
  AnalyzeSpec analyze;
};

// Parse YAML text. ParseError carries the line; ValidationError lists every
// violation including unknown keys.
ExperimentSpec parse_spec(const std::string& text);
ExperimentSpec load_spec(const std::filesystem::path& path);
// Fills grids that depend on n and checks every invariant.
void finalize_spec(ExperimentSpec& spec);

nlohmann::json to_json(const ExperimentSpec& spec);
std::string spec_hash(const ExperimentSpec& spec);  // sha256 of the canonical JSON

// Time model of the spec; profiles for the power kind are generated up to
// `horizon_override` when given.
TimeModel build_time_model(const ExperimentSpec& spec,
                           std::optional<double> horizon_override = std::nullopt);

struct RunKey {
  Algorithm algorithm;
  double stepsize;
  std::size_t m;  // m (m_sync), B (rennala), n (sync), 1 (async)
  std::uint64_t seed;
};

struct RunResult {
  RunKey key;
  bool ok = false;
  std::string error;
  Trajectory trajectory;
};

struct BestEntry {
  Algorithm algorithm;
  std::size_t m;
  double stepsize;
  double mean_final_objective;  // over replications; +inf if any run failed
  std::size_t run_index;         // first replication of the chosen cell
};

struct SweepResult {
  ExperimentSpec spec;
  std::string spec_hash;
  double optimal_value = 0.0;
  std::vector<RunResult> runs;  // canonical order
  std::vector<BestEntry> best_per_algorithm;
  std::vector<BestEntry> best_per_parameter;  // best stepsize for each (algorithm, m)
  std::size_t failed_runs = 0;
};

std::string run_file_name(const std::string& scenario, const RunKey& key);

SweepResult run_sweep(const ExperimentSpec& spec);

// Picks the cell with the lowest mean final objective, ties to smaller
// stepsize then smaller m. Non-finite objectives rank last.
std::optional<BestEntry> select_best(const std::vector<BestEntry>& cells);

void emit_report(const SweepResult& result, const std::filesystem::path& dir);

// Single simulation plus its sidecar.
std::string trajectory_to_csv(const Trajectory& traj);
nlohmann::json trajectory_sidecar(const SimConfig& config, const Trajectory& traj);

struct GapCell {
  double noise_ratio = 0.0;
  std::size_t m = 0;
  bool ok = false;
  std::string error;
  std::int64_t k_lower = 0;
  std::int64_t k_upper = 0;
  double t_lower = 0.0;
  double t_upper = 0.0;
  double ratio = 0.0;
};

struct GapSummary {
  double noise_ratio;
  std::optional<double> min_ratio;
  std::size_t best_m = 0;
};

struct GapStudy {
  std::vector<GapCell> cells;
  std::vector<GapSummary> summary;
  double horizon_used = 0.0;
};

GapStudy run_gap_study(const ExperimentSpec& spec);
nlohmann::json to_json(const GapStudy& study);
std::string gap_to_csv(const GapStudy& study);

// Mean-time surrogate report, with R measured or estimated when the model is random.
ComplexityReport run_analysis(const ExperimentSpec& spec);

}  // namespace ssgd
