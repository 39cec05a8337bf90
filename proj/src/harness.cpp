#include "ssgd/harness.hpp"

#include <openssl/evp.h>
#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <thread>

#include "ssgd/errors.hpp"
#include "ssgd/io.hpp"

namespace ssgd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------- parsing

int line_of(const YAML::Node& node) { return node.Mark().is_null() ? 0 : node.Mark().line + 1; }

class Section {
 public:
  Section(YAML::Node node, std::string path, std::vector<std::string>& problems,
          std::set<std::string> allowed)
      : node_(std::move(node)), path_(std::move(path)), problems_(problems) {
    if (!node_ || node_.IsNull()) return;
    if (!node_.IsMap()) {
      throw ParseError("expected a mapping", line_of(node_), path_);
    }
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!allowed.count(key)) {
        problems_.push_back("unknown key '" + key + "'" + where() + " (line " +
                            std::to_string(line_of(kv.first)) + ")");
      }
    }
  }

  bool has(const char* key) const { return node_ && node_.IsMap() && node_[key]; }

  YAML::Node child(const char* key) const {
    return has(key) ? node_[key] : YAML::Node(YAML::NodeType::Null);
  }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  void get(const char* key, T& out) const {
    if (!has(key)) return;
    out = convert<T>(node_[key], field(key));
  }

  template <class T>
  void get(const char* key, std::optional<T>& out) const {
    if (!has(key)) return;
    out = convert<T>(node_[key], field(key));
  }

  template <class T>
  static T convert(const YAML::Node& n, const std::string& field) {
    try {
      if constexpr (std::is_same_v<T, std::vector<double>> ||
                    std::is_same_v<T, std::vector<std::size_t>>) {
        if (n.IsScalar()) return T{n.as<typename T::value_type>()};
      }
      if constexpr (std::is_same_v<T, double>) {
        // yaml-cpp accepts .inf, but not "inf".
        const auto s = n.as<std::string>();
        if (s == "inf" || s == "infinity") return kInf;
      }
      return n.as<T>();
    } catch (const YAML::Exception&) {
      throw ParseError("cannot read value of '" + field + "'", line_of(n), field);
    }
  }

 private:
  std::string where() const { return path_.empty() ? "" : " in '" + path_ + "'"; }

  YAML::Node node_;
  std::string path_;
  std::vector<std::string>& problems_;
};

void parse_time_model(const Section& root, TimeModelSpec& tm, std::vector<std::string>& problems) {
  const Section s(root.child("time_model"), "time_model", problems,
                  {"kind", "n", "taus", "exponent", "scale", "values", "distribution", "params",
                   "generator", "step", "horizon", "seed", "speed", "idle_fraction", "idle_mode",
                   "interval", "allow_out_of_regime", "t_switch", "multiplier", "csv_path",
                   "interpolation"});
  s.get("kind", tm.kind);
  s.get("n", tm.n);
  s.get("taus", tm.taus);
  s.get("exponent", tm.exponent);
  s.get("scale", tm.scale);
  s.get("values", tm.values);
  s.get("distribution", tm.distribution);
  s.get("params", tm.params);
  s.get("generator", tm.generator);
  s.get("step", tm.step);
  s.get("horizon", tm.horizon);
  s.get("seed", tm.profile_seed);
  s.get("speed", tm.speed);
  s.get("idle_fraction", tm.idle_fraction);
  s.get("idle_mode", tm.idle_mode);
  s.get("interval", tm.interval);
  s.get("allow_out_of_regime", tm.allow_out_of_regime);
  s.get("t_switch", tm.t_switch);
  s.get("multiplier", tm.multiplier);
  s.get("csv_path", tm.csv_path);
  s.get("interpolation", tm.interpolation);
  if (tm.taus == "custom" && !s.has("n")) tm.n = tm.values.size();
}

AlgorithmSpec parse_algorithm_entry(const YAML::Node& node, std::size_t index,
                                    std::vector<std::string>& problems) {
  const std::string path = "algorithms[" + std::to_string(index) + "]";
  AlgorithmSpec a;
  std::string name;
  if (node.IsScalar()) {
    name = Section::convert<std::string>(node, path);
  } else {
    const Section s(node, path, problems, {"name", "stepsizes", "m", "batch", "staleness_clip"});
    if (!s.has("name")) {
      problems.push_back(path + ": missing 'name'");
      return a;
    }
    s.get("name", name);
    s.get("stepsizes", a.stepsizes);
    if (s.has("m") && s.has("batch")) problems.push_back(path + ": give either 'm' or 'batch'");
    s.get("m", a.workers);
    s.get("batch", a.workers);
    s.get("staleness_clip", a.staleness_clip);
    if (s.has("m") && name != "m_sync") problems.push_back(path + ": 'm' is only used by m_sync");
    if (s.has("batch") && name != "rennala") {
      problems.push_back(path + ": 'batch' is only used by rennala");
    }
    if (s.has("staleness_clip") && name != "async") {
      problems.push_back(path + ": 'staleness_clip' is only used by async");
    }
  }
  try {
    a.algorithm = parse_algorithm(name);
  } catch (const ContractError&) {
    problems.push_back(path + ": unknown algorithm '" + name +
                       "' (expected sync, m_sync, async or rennala)");
  }
  return a;
}

bool safe_name(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char ch) {
    return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-' || ch == '.';
  });
}

void check(bool ok, std::vector<std::string>& problems, const std::string& what) {
  if (!ok) problems.push_back(what);
}

std::vector<std::string> sorted_keys(const std::map<std::string, double>& m) {
  std::vector<std::string> keys;
  for (const auto& kv : m) keys.push_back(kv.first);
  return keys;
}

DelayDistribution make_distribution(const std::string& name,
                                    const std::map<std::string, double>& params) {
  const auto need = [&](std::initializer_list<const char*> keys) {
    std::set<std::string> expected(keys.begin(), keys.end());
    for (const auto& k : sorted_keys(params)) {
      if (!expected.count(k)) throw ContractError("unknown parameter '" + k + "' for " + name);
    }
    for (const auto& k : expected) {
      if (!params.count(k)) throw ContractError("missing parameter '" + k + "' for " + name);
    }
  };
  const auto at = [&](const char* k) { return params.at(k); };
  if (name == "constant") {
    need({"tau"});
    return DelayDistribution::constant(at("tau"));
  }
  if (name == "uniform") {
    need({"lo", "hi"});
    return DelayDistribution::uniform(at("lo"), at("hi"));
  }
  if (name == "truncated_normal") {
    need({"mu", "sd"});
    return DelayDistribution::truncated_normal(at("mu"), at("sd"));
  }
  if (name == "exponential") {
    need({"rate"});
    return DelayDistribution::exponential(at("rate"));
  }
  if (name == "shifted_exponential") {
    need({"shift", "rate"});
    return DelayDistribution::shifted_exponential(at("shift"), at("rate"));
  }
  if (name == "gamma") {
    need({"shape", "scale"});
    return DelayDistribution::gamma(at("shape"), at("scale"));
  }
  if (name == "chi_square") {
    need({"dof"});
    return DelayDistribution::chi_square(at("dof"));
  }
  throw ContractError("unknown distribution '" + name + "'");
}

IdleMode parse_idle_mode(const std::string& s) {
  if (s == "fixed") return IdleMode::kFixed;
  if (s == "round_robin") return IdleMode::kRoundRobin;
  if (s == "adversarial") return IdleMode::kAdversarialToFastest;
  if (s == "random") return IdleMode::kRandom;
  throw ContractError("unknown idle_mode '" + s + "'");
}

Interpolation parse_interpolation(const std::string& s) {
  if (s == "linear") return Interpolation::kLinear;
  if (s == "step") return Interpolation::kStep;
  throw ContractError("unknown interpolation '" + s + "'");
}

std::size_t csv_worker_count(const std::string& path) {
  const std::string text = read_text_file(path);
  const auto eol = text.find('\n');
  const auto header = split_csv_line(std::string_view(text).substr(0, eol));
  return header.empty() ? 0 : header.size() - 1;
}

void validate_time_model(TimeModelSpec& tm, std::vector<std::string>& problems) {
  const auto bad = [&](const std::string& what) { problems.push_back("time_model: " + what); };
  if (tm.kind == "fixed") {
    if (tm.taus == "custom") {
      if (tm.values.empty()) bad("custom taus need a nonempty 'values' list");
      if (tm.n != tm.values.size()) bad("'n' must match the length of 'values'");
      for (double v : tm.values) {
        if (!(v > 0.0) || !std::isfinite(v)) {
          bad("every custom tau must be positive");
          break;
        }
      }
    } else if (tm.taus != "sqrt" && tm.taus != "linear" && tm.taus != "power") {
      bad("unknown taus '" + tm.taus + "' (expected sqrt, linear, power or custom)");
    }
    if (!(tm.scale > 0.0)) bad("scale must be positive");
  } else if (tm.kind == "random") {
    try {
      make_distribution(tm.distribution, tm.params);
    } catch (const ContractError& e) {
      bad(e.what());
    }
  } else if (tm.kind == "power") {
    const std::string& g = tm.generator;
    if (g == "chaotic" || g == "periodic") {
      if (!(tm.step > 0.0)) bad("step must be positive");
    } else if (g == "participation") {
      if (!(tm.speed > 0.0)) bad("speed must be positive");
      if (!(tm.interval > 0.0)) bad("interval must be positive");
      if (!(tm.idle_fraction >= 0.0 && tm.idle_fraction < 1.0)) {
        bad("idle_fraction must lie in [0, 1)");
      } else if (tm.idle_fraction >= 0.4 && !tm.allow_out_of_regime) {
        bad("idle_fraction >= 0.4 needs allow_out_of_regime: true");
      }
      try {
        parse_idle_mode(tm.idle_mode);
      } catch (const ContractError& e) {
        bad(e.what());
      }
    } else if (g == "speedup") {
      if (!(tm.speed > 0.0)) bad("speed must be positive");
      if (!(tm.t_switch > 0.0)) bad("t_switch must be positive");
      if (!(tm.multiplier >= 1.0)) bad("multiplier must be >= 1");
    } else if (g == "csv") {
      if (tm.csv_path.empty()) {
        bad("csv generator needs csv_path");
      } else {
        try {
          tm.n = csv_worker_count(tm.csv_path);
        } catch (const std::exception& e) {
          bad(e.what());
        }
      }
      try {
        parse_interpolation(tm.interpolation);
      } catch (const ContractError& e) {
        bad(e.what());
      }
    } else {
      bad("unknown generator '" + g + "'");
    }
    if (!(tm.horizon > 0.0) || !std::isfinite(tm.horizon)) bad("horizon must be positive");
  } else {
    bad("unknown kind '" + tm.kind + "' (expected fixed, random or power)");
  }
  if (tm.n < 1) bad("n must be >= 1");
}

// ---------------------------------------------------------------- utilities

void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) body(i);
    });
  }
  for (auto& th : pool) th.join();
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

nlohmann::json number(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

double objective_rank(double f) { return std::isfinite(f) ? f : kInf; }

bool better(const BestEntry& a, const BestEntry& b) {
  const double fa = objective_rank(a.mean_final_objective);
  const double fb = objective_rank(b.mean_final_objective);
  if (fa != fb) return fa < fb;
  if (a.stepsize != b.stepsize) return a.stepsize < b.stepsize;
  return a.m < b.m;
}

std::size_t key_m(const AlgorithmSpec& a, std::size_t w, std::size_t n) {
  switch (a.algorithm) {
    case Algorithm::kSync:
      return n;
    case Algorithm::kAsync:
      return 1;
    default:
      return w;
  }
}

}  // namespace

// ---------------------------------------------------------------- spec

std::vector<double> default_stepsize_grid() {
  std::vector<double> g;
  for (int e = -16; e <= 4; ++e) g.push_back(std::ldexp(1.0, e));
  return g;
}

std::vector<std::size_t> default_worker_grid(std::size_t n) {
  std::vector<std::size_t> g{1};
  for (std::size_t m = 5; m < n; m += 5) g.push_back(m);
  if (n > 1) g.push_back(n);
  return g;
}

ExperimentSpec parse_spec(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ParseError(e.msg, e.mark.line + 1);
  }
  std::vector<std::string> problems;
  ExperimentSpec spec;
  const Section s(root, "", problems,
                  {"spec_version", "scenario", "seed", "replications", "output_dir", "problem",
                   "time_model", "algorithms", "output", "threads", "gap", "analyze"});
  s.get("spec_version", spec.spec_version);
  s.get("scenario", spec.scenario);
  s.get("seed", spec.seed);
  s.get("replications", spec.replications);
  s.get("output_dir", spec.output_dir);
  s.get("threads", spec.threads);

  const Section p(s.child("problem"), "problem", problems,
                  {"d", "p", "horizon", "max_iterations"});
  p.get("d", spec.dim);
  p.get("p", spec.noise_probability);
  p.get("horizon", spec.time_budget);
  p.get("max_iterations", spec.max_iterations);

  const Section o(s.child("output"), "output", problems, {"trajectories", "max_records"});
  o.get("trajectories", spec.trajectories);
  o.get("max_records", spec.max_records);

  parse_time_model(s, spec.time_model, problems);

  const YAML::Node algos = s.child("algorithms");
  if (algos && !algos.IsNull()) {
    if (!algos.IsSequence()) throw ParseError("expected a list", line_of(algos), "algorithms");
    for (std::size_t i = 0; i < algos.size(); ++i) {
      spec.algorithms.push_back(parse_algorithm_entry(algos[i], i, problems));
    }
  }

  const Section g(s.child("gap"), "gap", problems,
                  {"noise_ratios", "smooth_ratio", "m", "c1", "c2", "upper_units", "max_horizon"});
  g.get("noise_ratios", spec.gap.noise_ratios);
  g.get("smooth_ratio", spec.gap.smooth_ratio);
  g.get("m", spec.gap.m);
  g.get("c1", spec.gap.c1);
  g.get("c2", spec.gap.c2);
  g.get("upper_units", spec.gap.upper_units);
  g.get("max_horizon", spec.gap.max_horizon);

  const Section a(s.child("analyze"), "analyze", problems,
                  {"eps", "L", "delta", "sigma2", "R", "r_samples", "participation"});
  a.get("eps", spec.analyze.eps);
  a.get("L", spec.analyze.L);
  a.get("delta", spec.analyze.delta);
  a.get("sigma2", spec.analyze.sigma2);
  a.get("R", spec.analyze.R);
  a.get("r_samples", spec.analyze.r_samples);
  const Section pp(a.child("participation"), "analyze.participation", problems, {"v", "p"});
  pp.get("v", spec.analyze.participation_power);
  pp.get("p", spec.analyze.participation_idle_fraction);

  try {
    finalize_spec(spec);
  } catch (const ValidationError& e) {
    problems.insert(problems.end(), e.problems().begin(), e.problems().end());
  }
  if (!problems.empty()) throw ValidationError(problems);
  return spec;
}

ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw ParseError(e.what(), 0);
  }
  return parse_spec(text);
}

void finalize_spec(ExperimentSpec& spec) {
  std::vector<std::string> problems;
  check(spec.spec_version == kSpecVersion, problems,
        "spec_version must be " + std::to_string(kSpecVersion));
  check(safe_name(spec.scenario), problems,
        "scenario must be a nonempty name of letters, digits, '_', '-' or '.'");
  check(spec.replications >= 1, problems, "replications must be >= 1");
  check(spec.dim >= 1, problems, "problem.d must be >= 1");
  check(spec.noise_probability > 0.0 && spec.noise_probability <= 1.0, problems,
        "problem.p must lie in (0, 1]");
  check(spec.time_budget > 0.0, problems, "problem.horizon must be positive");
  check(spec.max_iterations >= 0, problems, "problem.max_iterations must be >= 0");
  check(std::isfinite(spec.time_budget) || spec.max_iterations > 0, problems,
        "an infinite horizon needs problem.max_iterations");
  check(spec.max_records >= 4, problems, "output.max_records must be >= 4");
  check(spec.trajectories == "all" || spec.trajectories == "best" || spec.trajectories == "none",
        problems, "output.trajectories must be all, best or none");
  validate_time_model(spec.time_model, problems);
  const std::size_t n = spec.time_model.n;

  for (std::size_t i = 0; i < spec.algorithms.size(); ++i) {
    AlgorithmSpec& a = spec.algorithms[i];
    const std::string path = "algorithms[" + std::to_string(i) + "]";
    if (a.stepsizes.empty() || a.default_stepsizes) {
      a.stepsizes = default_stepsize_grid();
      a.default_stepsizes = true;
    }
    for (double g : a.stepsizes) {
      if (!(g > 0.0) || !std::isfinite(g)) {
        problems.push_back(path + ": stepsizes must be positive");
        break;
      }
    }
    const bool uses_workers = a.algorithm == Algorithm::kMSync || a.algorithm == Algorithm::kRennala;
    if (uses_workers && (a.workers.empty() || a.default_workers)) {
      a.workers = default_worker_grid(n);
      a.default_workers = true;
    }
    for (std::size_t w : a.workers) {
      if (w < 1 || (a.algorithm == Algorithm::kMSync && w > n)) {
        problems.push_back(path + (a.algorithm == Algorithm::kMSync
                                       ? ": m must lie in [1, n]"
                                       : ": batch must be >= 1"));
        break;
      }
    }
    if (a.staleness_clip && !(*a.staleness_clip > 0.0)) {
      problems.push_back(path + ": staleness_clip must be positive");
    }
  }

  GapSpec& g = spec.gap;
  check(!g.noise_ratios.empty(), problems, "gap.noise_ratios must be nonempty");
  for (double r : g.noise_ratios) {
    if (!(r >= 0.0) || !std::isfinite(r)) {
      problems.push_back("gap.noise_ratios must be nonnegative");
      break;
    }
  }
  check(g.smooth_ratio > 0.0, problems, "gap.smooth_ratio must be positive");
  check(g.c1 > 0.0 && g.c2 > 0.0, problems, "gap.c1 and gap.c2 must be positive");
  check(g.max_horizon > 0.0, problems, "gap.max_horizon must be positive");
  check(g.upper_units > 0.0, problems, "gap.upper_units must be positive");
  for (std::size_t m : g.m) {
    if (m < 1 || m > n) {
      problems.push_back("gap.m must lie in [1, n]");
      break;
    }
  }

  const AnalyzeSpec& an = spec.analyze;
  check(an.eps > 0.0, problems, "analyze.eps must be positive");
  check(!an.L || *an.L > 0.0, problems, "analyze.L must be positive");
  check(!an.delta || *an.delta > 0.0, problems, "analyze.delta must be positive");
  check(!an.sigma2 || *an.sigma2 >= 0.0, problems, "analyze.sigma2 must be nonnegative");
  check(!an.R || *an.R > 0.0, problems, "analyze.R must be positive");
  check(an.r_samples >= 2, problems, "analyze.r_samples must be >= 2");
  check(an.participation_power.has_value() == an.participation_idle_fraction.has_value(), problems,
        "analyze.participation needs both v and p");

  if (!problems.empty()) throw ValidationError(problems);
}

nlohmann::json to_json(const ExperimentSpec& spec) {
  const TimeModelSpec& tm = spec.time_model;
  nlohmann::json model = {{"kind", tm.kind}, {"n", tm.n}};
  if (tm.kind == "fixed") {
    model["taus"] = tm.taus;
    model["scale"] = tm.scale;
    if (tm.taus == "power") model["exponent"] = tm.exponent;
    if (tm.taus == "custom") model["values"] = tm.values;
  } else if (tm.kind == "random") {
    model["distribution"] = tm.distribution;
    model["params"] = tm.params;
  } else {
    model["generator"] = tm.generator;
    model["horizon"] = tm.horizon;
    if (tm.generator == "chaotic" || tm.generator == "periodic") {
      model["step"] = tm.step;
      model["seed"] = tm.profile_seed;
    } else if (tm.generator == "participation") {
      model["speed"] = tm.speed;
      model["idle_fraction"] = tm.idle_fraction;
      model["idle_mode"] = tm.idle_mode;
      model["interval"] = tm.interval;
      model["seed"] = tm.profile_seed;
      model["allow_out_of_regime"] = tm.allow_out_of_regime;
    } else if (tm.generator == "speedup") {
      model["speed"] = tm.speed;
      model["t_switch"] = tm.t_switch;
      model["multiplier"] = tm.multiplier;
    } else {
      model["csv_path"] = tm.csv_path;
      model["interpolation"] = tm.interpolation;
    }
  }
  nlohmann::json algos = nlohmann::json::array();
  for (const auto& a : spec.algorithms) {
    nlohmann::json j = {{"name", std::string(to_string(a.algorithm))}, {"stepsizes", a.stepsizes}};
    if (a.algorithm == Algorithm::kMSync) j["m"] = a.workers;
    if (a.algorithm == Algorithm::kRennala) j["batch"] = a.workers;
    if (a.staleness_clip) j["staleness_clip"] = *a.staleness_clip;
    algos.push_back(std::move(j));
  }
  nlohmann::json analyze = {{"eps", spec.analyze.eps}, {"r_samples", spec.analyze.r_samples}};
  if (spec.analyze.L) analyze["L"] = *spec.analyze.L;
  if (spec.analyze.delta) analyze["delta"] = *spec.analyze.delta;
  if (spec.analyze.sigma2) analyze["sigma2"] = *spec.analyze.sigma2;
  if (spec.analyze.R) analyze["R"] = *spec.analyze.R;
  if (spec.analyze.participation_power) {
    analyze["participation"] = {{"v", *spec.analyze.participation_power},
                                {"p", *spec.analyze.participation_idle_fraction}};
  }
  return {
      {"spec_version", spec.spec_version},
      {"scenario", spec.scenario},
      {"seed", spec.seed},
      {"replications", spec.replications},
      {"problem",
       {{"d", spec.dim},
        {"p", spec.noise_probability},
        {"horizon", number(spec.time_budget)},
        {"max_iterations", spec.max_iterations}}},
      {"output", {{"trajectories", spec.trajectories}, {"max_records", spec.max_records}}},
      {"time_model", std::move(model)},
      {"algorithms", std::move(algos)},
      {"gap",
       {{"noise_ratios", spec.gap.noise_ratios},
        {"smooth_ratio", spec.gap.smooth_ratio},
        {"m", spec.gap.m},
        {"c1", spec.gap.c1},
        {"c2", spec.gap.c2},
        {"upper_units", spec.gap.upper_units},
        {"max_horizon", spec.gap.max_horizon}}},
      {"analyze", std::move(analyze)},
  };
}

std::string spec_hash(const ExperimentSpec& spec) { return sha256_hex(to_json(spec).dump()); }

TimeModel build_time_model(const ExperimentSpec& spec, std::optional<double> horizon_override) {
  const TimeModelSpec& tm = spec.time_model;
  const std::size_t n = tm.n;
  if (tm.kind == "fixed") {
    std::vector<double> taus;
    if (tm.taus == "custom") {
      for (double v : tm.values) taus.push_back(v * tm.scale);
    } else {
      const double e = tm.taus == "sqrt" ? 0.5 : tm.taus == "linear" ? 1.0 : tm.exponent;
      taus = power_law_taus(n, e, tm.scale);
    }
    return FixedTimes(std::move(taus));
  }
  if (tm.kind == "random") {
    return RandomDelays{std::vector<DelayDistribution>(n, make_distribution(tm.distribution, tm.params))};
  }
  const double horizon = horizon_override.value_or(tm.horizon);
  if (tm.generator == "chaotic") {
    return PowerProfiles{generate_chaotic_profiles(n, tm.step, horizon, tm.profile_seed)};
  }
  if (tm.generator == "periodic") {
    return PowerProfiles{generate_periodic_profiles(n, tm.step, horizon, tm.profile_seed)};
  }
  if (tm.generator == "participation") {
    ParticipationSchedule s;
    s.speed = tm.speed;
    s.idle_fraction = tm.idle_fraction;
    s.mode = parse_idle_mode(tm.idle_mode);
    s.interval = tm.interval;
    s.seed = tm.profile_seed;
    s.allow_out_of_regime = tm.allow_out_of_regime;
    return PowerProfiles{generate_participation_profiles(s, n, horizon)};
  }
  if (tm.generator == "speedup") {
    return PowerProfiles{generate_speedup_switch_profiles(n, tm.speed, tm.t_switch, tm.multiplier)};
  }
  if (tm.generator == "csv") {
    return PowerProfiles{
        profiles_from_csv(read_text_file(tm.csv_path), parse_interpolation(tm.interpolation))};
  }
  throw ContractError("unknown generator '" + tm.generator + "'");
}

// ---------------------------------------------------------------- sweep

std::string run_file_name(const std::string& scenario, const RunKey& key) {
  return scenario + "__" + std::string(to_string(key.algorithm)) + "__g" +
         format_double(key.stepsize) + "__m" + std::to_string(key.m) + "__s" +
         std::to_string(key.seed) + ".csv";
}

std::optional<BestEntry> select_best(const std::vector<BestEntry>& cells) {
  if (cells.empty()) return std::nullopt;
  BestEntry best = cells.front();
  for (const auto& c : cells) {
    if (better(c, best)) best = c;
  }
  return best;
}

SweepResult run_sweep(const ExperimentSpec& spec) {
  SweepResult result;
  result.spec = spec;
  result.spec_hash = spec_hash(spec);

  auto problem = std::make_shared<const QuadraticProblem>(spec.dim, spec.noise_probability);
  auto model = std::make_shared<const TimeModel>(build_time_model(spec));
  result.optimal_value = problem->optimal_value();
  const std::size_t n = worker_count(*model);

  struct Cell {
    SimConfig config;
    RunKey key;
  };
  std::vector<Cell> cells;
  for (const auto& a : spec.algorithms) {
    const std::vector<std::size_t> workers =
        a.workers.empty() ? std::vector<std::size_t>{0} : a.workers;
    for (std::size_t w : workers) {
      for (double gamma : a.stepsizes) {
        for (std::size_t r = 0; r < spec.replications; ++r) {
          SimConfig c;
          c.algorithm = a.algorithm;
          c.problem = problem;
          c.time_model = model;
          c.stepsize = gamma;
          c.staleness_clip = a.staleness_clip;
          if (a.algorithm == Algorithm::kMSync) c.m = w;
          if (a.algorithm == Algorithm::kRennala) c.batch = w;
          c.time_budget = spec.time_budget;
          c.max_iterations = spec.max_iterations;
          c.seed = spec.seed + r;
          c.max_records = spec.max_records;
          cells.push_back({c, {a.algorithm, gamma, key_m(a, w, n), c.seed}});
        }
      }
    }
  }

  result.runs.resize(cells.size());
  parallel_for(cells.size(), spec.threads, [&](std::size_t i) {
    RunResult& run = result.runs[i];
    run.key = cells[i].key;
    try {
      run.trajectory = simulate(cells[i].config);
      run.ok = true;
    } catch (const std::exception& e) {
      run.error = e.what();
    }
  });

  // Cells are consecutive groups of `replications` runs.
  std::vector<BestEntry> entries;
  for (std::size_t i = 0; i < result.runs.size(); i += spec.replications) {
    double sum = 0.0;
    for (std::size_t r = 0; r < spec.replications; ++r) {
      const RunResult& run = result.runs[i + r];
      sum += run.ok ? objective_rank(run.trajectory.final_record().objective) : kInf;
    }
    const RunKey& k = result.runs[i].key;
    entries.push_back({k.algorithm, k.m, k.stepsize, sum / static_cast<double>(spec.replications), i});
  }
  for (const auto& run : result.runs) result.failed_runs += run.ok ? 0 : 1;

  for (const auto& a : spec.algorithms) {
    std::vector<BestEntry> mine;
    std::map<std::size_t, std::vector<BestEntry>> by_m;
    for (const auto& e : entries) {
      if (e.algorithm != a.algorithm) continue;
      mine.push_back(e);
      by_m[e.m].push_back(e);
    }
    if (auto b = select_best(mine)) result.best_per_algorithm.push_back(*b);
    for (const auto& [m, group] : by_m) {
      if (auto b = select_best(group)) result.best_per_parameter.push_back(*b);
    }
  }
  return result;
}

std::string trajectory_to_csv(const Trajectory& traj) {
  std::string out = "time,iter,f,grad_sq_norm\n";
  for (const auto& r : traj.records) {
    out += format_double(r.time) + ',' + std::to_string(r.iteration) + ',' +
           format_double(r.objective) + ',' + format_double(r.grad_sq_norm) + '\n';
  }
  return out;
}

nlohmann::json trajectory_sidecar(const SimConfig& config, const Trajectory& traj) {
  const TrajectoryRecord& last = traj.final_record();
  nlohmann::json j = {
      {"algorithm", std::string(to_string(config.algorithm))},
      {"stepsize", config.stepsize},
      {"seed", config.seed},
      {"time_budget", number(config.time_budget)},
      {"max_iterations", config.max_iterations},
      {"dim", config.problem->dim()},
      {"p", config.problem->noise_probability()},
      {"workers", worker_count(*config.time_model)},
      {"optimal_value", config.problem->optimal_value()},
      {"iterations", traj.iterations},
      {"gradients_computed", traj.gradients_computed},
      {"gradients_used", traj.gradients_used},
      {"gradients_discarded", traj.gradients_discarded},
      {"diverged", traj.diverged},
      {"final",
       {{"time", number(last.time)},
        {"iter", last.iteration},
        {"f", number(last.objective)},
        {"grad_sq_norm", number(last.grad_sq_norm)}}},
      {"version", SSGD_VERSION},
  };
  if (config.algorithm == Algorithm::kMSync) j["m"] = config.m;
  if (config.algorithm == Algorithm::kRennala) j["batch"] = config.batch;
  if (config.staleness_clip) j["staleness_clip"] = *config.staleness_clip;
  return j;
}

void emit_report(const SweepResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
  const std::string& scenario = result.spec.scenario;

  std::set<std::size_t> best_runs;
  for (const auto& b : result.best_per_algorithm) best_runs.insert(b.run_index);

  std::vector<std::pair<std::string, std::string>> files;
  const auto put = [&](const std::string& name, std::string contents) {
    write_text_file(dir / name, contents);
    files.emplace_back(name, sha256_hex(contents));
  };

  std::string grid =
      "scenario,algorithm,stepsize,m,seed,status,final_time,iterations,final_f,final_grad_sq_norm,"
      "gradients_computed,gradients_used,gradients_discarded,diverged,error\n";
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    const RunResult& run = result.runs[i];
    const RunKey& k = run.key;
    grid += csv_field(scenario) + ',' + std::string(to_string(k.algorithm)) + ',' +
            format_double(k.stepsize) + ',' + std::to_string(k.m) + ',' + std::to_string(k.seed) +
            ',';
    if (run.ok) {
      const Trajectory& t = run.trajectory;
      const TrajectoryRecord& last = t.final_record();
      grid += "ok," + format_double(last.time) + ',' + std::to_string(t.iterations) + ',' +
              format_double(last.objective) + ',' + format_double(last.grad_sq_norm) + ',' +
              std::to_string(t.gradients_computed) + ',' + std::to_string(t.gradients_used) + ',' +
              std::to_string(t.gradients_discarded) + ',' + (t.diverged ? "true" : "false") + ",\n";
    } else {
      grid += "failed,,,,,,,,," + csv_field(run.error) + '\n';
    }
  }
  if (!result.runs.empty()) put("grid.csv", grid);

  std::vector<std::string> trajectory_files;
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    const RunResult& run = result.runs[i];
    if (!run.ok) continue;
    const bool wanted = result.spec.trajectories == "all" ||
                        (result.spec.trajectories == "best" && best_runs.count(i));
    if (!wanted) continue;
    const std::string name = run_file_name(scenario, run.key);
    put(name, trajectory_to_csv(run.trajectory));
    trajectory_files.push_back(name);
  }

  const auto entry_json = [&](const BestEntry& b) {
    const RunResult& run = result.runs[b.run_index];
    nlohmann::json j = {{"algorithm", std::string(to_string(b.algorithm))},
                        {"stepsize", b.stepsize},
                        {"m", b.m},
                        {"mean_final_f", number(b.mean_final_objective)},
                        {"mean_final_gap", number(b.mean_final_objective - result.optimal_value)},
                        {"file", run.ok ? nlohmann::json(run_file_name(scenario, run.key))
                                        : nlohmann::json(nullptr)}};
    return j;
  };
  nlohmann::json best = nlohmann::json::array();
  for (const auto& b : result.best_per_algorithm) best.push_back(entry_json(b));
  nlohmann::json per_param = nlohmann::json::array();
  for (const auto& b : result.best_per_parameter) per_param.push_back(entry_json(b));

  nlohmann::json summary = {
      {"scenario", scenario},
      {"spec_hash", result.spec_hash},
      {"version", SSGD_VERSION},
      {"seed", result.spec.seed},
      {"optimal_value", result.optimal_value},
      {"runs", result.runs.size()},
      {"failed_runs", result.failed_runs},
      {"best_per_algorithm", std::move(best)},
      {"best_per_parameter", std::move(per_param)},
      {"trajectory_files", trajectory_files},
      {"spec", to_json(result.spec)},
  };
  put("summary.json", summary.dump(2) + "\n");

  nlohmann::json manifest = {{"seed", result.spec.seed},
                             {"spec_hash", result.spec_hash},
                             {"version", SSGD_VERSION},
                             {"files", nlohmann::json::array()}};
  for (const auto& [name, hash] : files) {
    manifest["files"].push_back({{"name", name}, {"sha256", hash}});
  }
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------- gap study

GapStudy run_gap_study(const ExperimentSpec& spec) {
  if (spec.time_model.kind != "power") {
    throw ValidationError({"gap study needs a power time model"});
  }
  const std::string& gen = spec.time_model.generator;
  const bool extendable = gen == "chaotic" || gen == "periodic" || gen == "participation";
  const GapSpec& g = spec.gap;

  std::vector<std::size_t> ms = g.m;
  if (ms.empty()) {
    for (std::size_t m = 1; m <= spec.time_model.n; ++m) ms.push_back(m);
  }

  GapStudy study;
  double horizon = spec.time_model.horizon;
  while (true) {
    const TimeModel model = build_time_model(spec, horizon);
    const auto& profiles = std::get<PowerProfiles>(model).per_worker;
    study.cells.clear();
    for (double r : g.noise_ratios) {
      for (std::size_t m : ms) {
        GapCell cell;
        cell.noise_ratio = r;
        cell.m = m;
        study.cells.push_back(cell);
      }
    }
    parallel_for(study.cells.size(), spec.threads, [&](std::size_t i) {
      GapCell& cell = study.cells[i];
      RateConstants c;
      c.L = g.smooth_ratio;
      c.delta = 1.0;
      c.eps = 1.0;
      c.sigma2 = cell.noise_ratio;
      try {
        const BoundSequences seq = bound_sequences(profiles, c, cell.m, g.c1, g.c2, g.upper_units);
        cell.ok = true;
        cell.k_lower = static_cast<std::int64_t>(seq.lower.size()) - 1;
        cell.k_upper = static_cast<std::int64_t>(seq.upper.size()) - 1;
        cell.t_lower = seq.lower.back();
        cell.t_upper = seq.upper.back();
        cell.ratio = seq.gap_ratio();
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
    });
    study.horizon_used = horizon;
    if (!extendable) break;
    // Past the horizon the profiles are extrapolated; regenerate further out
    // until every sequence lives inside the generated window.
    double needed = 0.0;
    bool stalled = false;
    for (const auto& cell : study.cells) {
      if (cell.ok) {
        needed = std::max({needed, cell.t_lower, cell.t_upper});
      } else {
        stalled = true;
      }
    }
    if (needed <= horizon && !stalled) break;
    if (horizon >= g.max_horizon) break;
    double next = horizon * 2.0;
    while (next < needed) next *= 2.0;
    horizon = std::min(next, g.max_horizon);
  }

  for (double r : g.noise_ratios) {
    GapSummary s{r, std::nullopt, 0};
    for (const auto& cell : study.cells) {
      if (cell.noise_ratio != r || !cell.ok) continue;
      if (!s.min_ratio || cell.ratio < *s.min_ratio * (1.0 - 1e-12)) {
        s.min_ratio = cell.ratio;
        s.best_m = cell.m;
      }
    }
    study.summary.push_back(s);
  }
  return study;
}

nlohmann::json to_json(const GapStudy& study) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : study.cells) {
    nlohmann::json j = {{"noise_ratio", c.noise_ratio}, {"m", c.m}, {"ok", c.ok}};
    if (c.ok) {
      j["K_lower"] = c.k_lower;
      j["K_upper"] = c.k_upper;
      j["t_lower"] = c.t_lower;
      j["t_upper"] = c.t_upper;
      j["ratio"] = c.ratio;
    } else {
      j["error"] = c.error;
    }
    cells.push_back(std::move(j));
  }
  nlohmann::json summary = nlohmann::json::array();
  for (const auto& s : study.summary) {
    summary.push_back({{"noise_ratio", s.noise_ratio},
                       {"min_ratio", s.min_ratio ? nlohmann::json(*s.min_ratio) : nlohmann::json()},
                       {"best_m", s.best_m}});
  }
  return {{"horizon", study.horizon_used}, {"summary", summary}, {"cells", cells}};
}

std::string gap_to_csv(const GapStudy& study) {
  std::string out = "noise_ratio,m,status,K_lower,K_upper,t_lower,t_upper,ratio,error\n";
  for (const auto& c : study.cells) {
    out += format_double(c.noise_ratio) + ',' + std::to_string(c.m) + ',';
    if (c.ok) {
      out += "ok," + std::to_string(c.k_lower) + ',' + std::to_string(c.k_upper) + ',' +
             format_double(c.t_lower) + ',' + format_double(c.t_upper) + ',' +
             format_double(c.ratio) + ",\n";
    } else {
      out += "stalled,,,,,," + csv_field(c.error) + '\n';
    }
  }
  return out;
}

// ---------------------------------------------------------------- analysis

ComplexityReport run_analysis(const ExperimentSpec& spec) {
  const AnalyzeSpec& a = spec.analyze;
  const QuadraticProblem problem(spec.dim, spec.noise_probability);
  RateConstants c;
  c.L = a.L.value_or(problem.smoothness());
  c.delta = a.delta.value_or(problem.initial_gap());
  c.sigma2 = a.sigma2.value_or(problem.variance(problem.initial_point()));
  c.eps = a.eps;
  c.R = a.R;

  std::optional<ComplexityReport> report;
  if (spec.time_model.kind == "power") {
    // Only the partial participation bound applies; use unit taus for the table.
    if (!a.participation_power) {
      throw ValidationError({"analyze on a power model needs analyze.participation"});
    }
    report = complexity_report(FixedTimes(std::vector<double>(spec.time_model.n, 1.0 / *a.participation_power)), c);
  } else {
    const TimeModel model = build_time_model(spec);
    if (spec.time_model.kind == "random" && !c.R) {
      // Every worker shares the distribution, so one sample set suffices.
      const auto& dist = std::get<RandomDelays>(model).per_worker.front();
      Rng rng = make_stream(spec.seed, 0, Stream::kDelay);
      std::vector<double> samples(a.r_samples);
      for (double& s : samples) s = dist.sample(rng);
      try {
        c.R = estimate_R(samples);
      } catch (const ContractError&) {
        c.R.reset();  // constant delays have no dispersion
      }
    }
    report = complexity_report(mean_times(model), c);
  }
  if (a.participation_power) {
    report->participation = partial_participation_bound(
        *a.participation_power, *a.participation_idle_fraction, spec.time_model.n, c);
    report->participation_power = a.participation_power;
    report->participation_idle_fraction = a.participation_idle_fraction;
  }
  return *report;
}

}  // namespace ssgd
