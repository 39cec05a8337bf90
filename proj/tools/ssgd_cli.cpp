#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "ssgd/analyzer.hpp"
#include "ssgd/errors.hpp"
#include "ssgd/harness.hpp"
#include "ssgd/io.hpp"

namespace fs = std::filesystem;
using namespace ssgd;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

struct Common {
  std::string spec_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  bool full = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("spec", c.spec_path, "experiment spec (YAML)")->required()->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", c.out, "output directory (default: the spec's output_dir)");
  cmd->add_option("--seed", c.seed, "master seed override");
  cmd->add_option("--threads", c.threads, "worker threads for independent cells (0: all cores)");
  cmd->add_flag("--full", c.full, "full scale: n = 1000 workers, d = 1000");
}

ExperimentSpec load(const Common& c) {
  ExperimentSpec spec = load_spec(c.spec_path);
  if (c.seed) spec.seed = *c.seed;
  if (c.threads) spec.threads = *c.threads;
  if (c.full) {
    spec.time_model.n = 1000;
    spec.dim = 1000;
  }
  finalize_spec(spec);
  return spec;
}

fs::path out_dir(const Common& c, const ExperimentSpec& spec) {
  return c.out.empty() ? fs::path(spec.output_dir) : fs::path(c.out);
}

int cmd_simulate(const Common& c, const std::optional<std::string>& algo,
                 const std::optional<double>& stepsize, const std::optional<std::size_t>& m,
                 const std::optional<double>& horizon, const std::optional<std::int64_t>& iters) {
  ExperimentSpec spec = load(c);
  if (horizon) spec.time_budget = *horizon;
  if (iters) spec.max_iterations = *iters;
  finalize_spec(spec);

  SimConfig config;
  if (algo) {
    config.algorithm = parse_algorithm(*algo);
  } else if (!spec.algorithms.empty()) {
    config.algorithm = spec.algorithms.front().algorithm;
  }
  const AlgorithmSpec* entry = nullptr;
  for (const auto& a : spec.algorithms) {
    if (a.algorithm == config.algorithm) {
      entry = &a;
      break;
    }
  }
  if (stepsize) {
    config.stepsize = *stepsize;
  } else if (entry) {
    config.stepsize = entry->stepsizes.front();
  } else {
    throw ContractError("--stepsize is required when the spec does not list the algorithm");
  }
  std::size_t w = m.value_or(entry && !entry->workers.empty() ? entry->workers.front() : 1);
  if (config.algorithm == Algorithm::kMSync) config.m = w;
  if (config.algorithm == Algorithm::kRennala) config.batch = w;
  if (entry && entry->staleness_clip) config.staleness_clip = entry->staleness_clip;

  config.problem = std::make_shared<const QuadraticProblem>(spec.dim, spec.noise_probability);
  config.time_model = std::make_shared<const TimeModel>(build_time_model(spec));
  config.time_budget = spec.time_budget;
  config.max_iterations = spec.max_iterations;
  config.seed = spec.seed;
  config.max_records = spec.max_records;
  validate(config);

  Trajectory traj;
  try {
    traj = simulate(config);
  } catch (const StalledError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  const fs::path dir = out_dir(c, spec);
  fs::create_directories(dir);
  const std::size_t n = worker_count(*config.time_model);
  const RunKey key{config.algorithm, config.stepsize,
                   config.algorithm == Algorithm::kSync    ? n
                   : config.algorithm == Algorithm::kAsync ? 1
                                                           : w,
                   config.seed};
  const std::string name = run_file_name(spec.scenario, key);
  write_text_file(dir / name, trajectory_to_csv(traj));
  nlohmann::json side = trajectory_sidecar(config, traj);
  side["scenario"] = spec.scenario;
  side["spec_hash"] = spec_hash(spec);
  write_text_file(dir / (name.substr(0, name.size() - 4) + ".json"), side.dump(2) + "\n");

  const auto& last = traj.final_record();
  std::cout << to_string(config.algorithm) << " t=" << format_double(last.time)
            << " iter=" << last.iteration << " f-f*="
            << format_double(last.objective - config.problem->optimal_value())
            << (traj.diverged ? " (diverged)" : "") << "\n"
            << "wrote " << (dir / name).string() << "\n";
  return kOk;
}

int cmd_sweep(const Common& c) {
  const ExperimentSpec spec = load(c);
  const SweepResult result = run_sweep(spec);
  const fs::path dir = out_dir(c, spec);
  emit_report(result, dir);
  for (const auto& b : result.best_per_algorithm) {
    std::cout << to_string(b.algorithm) << ": best gamma=" << format_double(b.stepsize)
              << " m=" << b.m
              << " f-f*=" << format_double(b.mean_final_objective - result.optimal_value) << "\n";
  }
  std::cout << result.runs.size() << " runs, " << result.failed_runs << " failed; wrote "
            << dir.string() << "\n";
  if (!result.runs.empty() && result.failed_runs == result.runs.size()) return kRuntime;
  return kOk;
}

int cmd_gap(const Common& c) {
  const ExperimentSpec spec = load(c);
  const GapStudy study = run_gap_study(spec);
  const fs::path dir = out_dir(c, spec);
  fs::create_directories(dir);
  write_text_file(dir / "gap.json", to_json(study).dump(2) + "\n");
  write_text_file(dir / "gap.csv", gap_to_csv(study));
  bool any_ok = false;
  for (const auto& s : study.summary) {
    std::cout << "sigma2/eps=" << format_double(s.noise_ratio) << ": ";
    if (s.min_ratio) {
      any_ok = true;
      std::cout << "min gap " << format_double(*s.min_ratio) << " at m=" << s.best_m << "\n";
    } else {
      std::cout << "every cell stalled\n";
    }
  }
  std::cout << "wrote " << (dir / "gap.json").string() << "\n";
  return any_ok ? kOk : kRuntime;
}

int cmd_analyze(const Common& c, const std::optional<double>& eps, const std::optional<double>& R) {
  ExperimentSpec spec = load(c);
  if (eps) spec.analyze.eps = *eps;
  if (R) spec.analyze.R = *R;
  finalize_spec(spec);
  const ComplexityReport report = run_analysis(spec);
  const std::string text = to_json(report).dump(2) + "\n";
  if (c.out.empty()) {
    std::cout << text;
  } else {
    fs::create_directories(c.out);
    write_text_file(fs::path(c.out) / "complexity.json", text);
    std::cout << "T_sync=" << format_double(report.sync.value) << " (m*=" << report.sync.m
              << ") T_optimal=" << format_double(report.optimal.value)
              << " (m=" << report.optimal.m << ")\n";
  }
  return kOk;
}

int cmd_estimate_r(const std::string& samples_path, const std::string& spec_path,
                   std::size_t count) {
  std::vector<double> samples;
  if (!samples_path.empty()) {
    const std::string text = read_text_file(samples_path);
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t eol = text.find('\n', pos);
      if (eol == std::string::npos) eol = text.size();
      for (auto field : split_csv_line(std::string_view(text).substr(pos, eol - pos))) {
        if (field.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        samples.push_back(parse_double(field));
      }
      pos = eol + 1;
    }
  } else {
    ExperimentSpec spec = load_spec(spec_path);
    if (spec.time_model.kind != "random") {
      throw ValidationError({"estimate-r needs a random time model or --samples"});
    }
    const TimeModel model = build_time_model(spec);
    Rng rng = make_stream(spec.seed, 0, Stream::kDelay);
    const auto& dist = std::get<RandomDelays>(model).per_worker.front();
    samples.resize(count);
    for (double& s : samples) s = dist.sample(rng);
  }
  std::cout << format_double(estimate_R(samples)) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulator and complexity analyzer for synchronous and asynchronous SGD"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SSGD_VERSION);

  Common sim_c, sweep_c, gap_c, an_c;
  std::optional<std::string> algo;
  std::optional<double> stepsize, horizon, eps, R;
  std::optional<std::size_t> m;
  std::optional<std::int64_t> iters;

  auto* sim = app.add_subcommand("simulate", "run one simulation and write its trajectory");
  add_common(sim, sim_c);
  sim->add_option("-a,--algorithm", algo, "sync, m_sync, async or rennala");
  sim->add_option("-g,--stepsize", stepsize, "stepsize");
  sim->add_option("-m,--m", m, "m for m_sync, batch for rennala");
  sim->add_option("--horizon", horizon, "wall-clock budget in seconds");
  sim->add_option("--max-iterations", iters, "iteration cap");

  auto* sweep = app.add_subcommand("sweep", "grid search over stepsizes and m");
  add_common(sweep, sweep_c);

  auto* gap = app.add_subcommand("gap", "lower/upper recursion gap over m and noise levels");
  add_common(gap, gap_c);

  auto* analyze = app.add_subcommand("analyze", "closed-form time complexities");
  add_common(analyze, an_c);
  analyze->add_option("--eps", eps, "target squared gradient norm");
  analyze->add_option("--R", R, "sub-exponential scale of the delays");

  std::string samples_path, r_spec;
  std::size_t count = 100000;
  auto* est = app.add_subcommand("estimate-r", "estimate R from delay samples");
  auto* src = est->add_option_group("source");
  src->add_option("--samples", samples_path, "file of samples (one or more per line)")
      ->check(CLI::ExistingFile);
  src->add_option("spec", r_spec, "spec with a random time model")->check(CLI::ExistingFile);
  src->require_option(1);
  est->add_option("-n,--count", count, "samples drawn from the spec's distribution")
      ->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInvalid;
  }

  try {
    if (*sim) return cmd_simulate(sim_c, algo, stepsize, m, horizon, iters);
    if (*sweep) return cmd_sweep(sweep_c);
    if (*gap) return cmd_gap(gap_c);
    if (*analyze) return cmd_analyze(an_c, eps, R);
    if (*est) return cmd_estimate_r(samples_path, r_spec, count);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const OutOfRegimeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kOk;
}
