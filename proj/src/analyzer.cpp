#include "ssgd/analyzer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "ssgd/errors.hpp"
#include "ssgd/io.hpp"

namespace ssgd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTieTol = 1e-12;

void require(bool ok, const std::string& what) {
  if (!ok) throw ContractError(what);
}

void check_m(std::size_t m, std::size_t n) {
  require(m >= 1 && m <= n, "m must lie in [1, n]");
}

// tau_m max{1, s / m} with the product formed first so that exact ties stay exact.
double sync_factor(double tau, double s, std::size_t m) {
  return std::max(tau, tau * s / static_cast<double>(m));
}

std::size_t floor_tol(double x) {
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return static_cast<std::size_t>(r);
  return static_cast<std::size_t>(std::floor(x));
}

// Keeps the first index unless a later value is smaller by more than rounding.
struct ArgMin {
  double value = kInf;
  std::size_t m = 0;
  void offer(double v, std::size_t candidate) {
    if (m == 0 || v < value * (1.0 - kTieTol)) {
      value = v;
      m = candidate;
    }
  }
};

}  // namespace

void RateConstants::validate() const {
  require(L > 0.0 && std::isfinite(L), "L must be positive");
  require(delta > 0.0 && std::isfinite(delta), "Delta must be positive");
  require(eps > 0.0 && std::isfinite(eps), "eps must be positive");
  require(sigma2 >= 0.0 && std::isfinite(sigma2), "sigma^2 must be nonnegative");
  if (R) require(*R > 0.0 && std::isfinite(*R), "R must be positive");
}

RateConstants RateConstants::from_problem(const QuadraticProblem& problem, double eps) {
  RateConstants c;
  c.L = problem.smoothness();
  c.delta = problem.initial_gap();
  c.sigma2 = problem.variance(problem.initial_point());
  c.eps = eps;
  c.validate();
  return c;
}

std::int64_t ceil_tol(double x) {
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return static_cast<std::int64_t>(r);
  return static_cast<std::int64_t>(std::ceil(x));
}

std::int64_t iteration_count(const RateConstants& c, std::size_t m) {
  c.validate();
  require(m >= 1, "m must be >= 1");
  const double a = c.smooth_ratio();
  const double b = c.noise_ratio() * a / static_cast<double>(m);
  return ceil_tol(16.0 * std::max(a, b));
}

Minimizer t_sync(const FixedTimes& taus, const RateConstants& c) {
  c.validate();
  const double s = c.noise_ratio();
  ArgMin best;
  for (std::size_t m = 1; m <= taus.size(); ++m) best.offer(sync_factor(taus[m - 1], s, m), m);
  return {16.0 * c.smooth_ratio() * best.value, best.m};
}

Minimizer t_optimal(const FixedTimes& taus, const RateConstants& c) {
  c.validate();
  const double a = c.smooth_ratio();
  const double s = c.noise_ratio();
  ArgMin best;
  double inv_sum = 0.0;
  for (std::size_t m = 1; m <= taus.size(); ++m) {
    inv_sum += 1.0 / taus[m - 1];
    const double harmonic = static_cast<double>(m) / inv_sum;
    best.offer(harmonic * std::max(a, s * a / static_cast<double>(m)), m);
  }
  return {best.value, best.m};
}

double log_gap_certificate(const FixedTimes& taus, const RateConstants& c) {
  const double n = static_cast<double>(taus.size());
  return t_sync(taus, c).value / (t_optimal(taus, c).value * std::log(n + 1.0));
}

double g_of_m(const FixedTimes& taus, const RateConstants& c, std::size_t m) {
  c.validate();
  check_m(m, taus.size());
  return sync_factor(taus[m - 1], c.noise_ratio(), m);
}

double h_of_m(const FixedTimes& taus, std::size_t m) {
  check_m(m, taus.size());
  return taus[m - 1] / static_cast<double>(m);
}

std::size_t optimal_m(const FixedTimes& taus, const RateConstants& c) {
  c.validate();
  const auto cap = static_cast<std::size_t>(std::max<std::int64_t>(1, ceil_tol(c.noise_ratio())));
  const std::size_t upto = std::min(cap, taus.size());
  ArgMin best;
  for (std::size_t m = 1; m <= upto; ++m) best.offer(g_of_m(taus, c, m), m);
  return best.m;
}

PowerLawChoice power_law_m(double tau1, double alpha, double delta, const RateConstants& c,
                           std::size_t n) {
  c.validate();
  require(tau1 > 0.0, "tau1 must be positive");
  require(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1]");
  require(delta >= 0.0, "delta must be nonnegative");
  require(n >= 1, "n must be >= 1");
  const auto cap = static_cast<std::size_t>(std::max<std::int64_t>(1, ceil_tol(c.noise_ratio())));
  const std::size_t m = std::min(cap, n);
  if (alpha == 0.0) {
    return {m, delta == 0.0, delta == 0.0 ? 0.0 : kInf};
  }
  const double threshold = std::pow(delta / tau1, 1.0 / alpha);
  return {m, static_cast<double>(m) >= threshold * (1.0 - 1e-12), threshold};
}

double random_noise_term(double R, std::size_t n) {
  require(R > 0.0, "R must be positive");
  require(n >= 1, "n must be >= 1");
  return R * std::log(static_cast<double>(n));
}

double expected_random_bound(const FixedTimes& taus, const RateConstants& c, double R,
                             std::size_t m) {
  c.validate();
  check_m(m, taus.size());
  const double noise = random_noise_term(R, taus.size());
  return 16.0 * c.smooth_ratio() *
         sync_factor(taus[m - 1] + noise, c.noise_ratio(), m);
}

ParticipationBound partial_participation_bound(double v, double p, std::size_t n,
                                               const RateConstants& c) {
  require(v > 0.0 && std::isfinite(v), "v must be positive");
  require(n >= 1, "n must be >= 1");
  require(p >= 0.0, "p must be nonnegative");
  if (p >= 0.4) {
    throw OutOfRegimeError("partial participation bound needs p < 0.4, got p = " +
                           format_double(p));
  }
  const std::int64_t k = iteration_count(c, n);
  const std::size_t lo = std::max<std::size_t>(1, n / 5);
  const std::size_t hi = floor_tol((1.0 - 2.0 * p) * static_cast<double>(n));
  return {4.0 / v * static_cast<double>(k), k, lo, hi};
}

std::vector<double> lower_bound_sequence(std::span<const PowerProfile> profiles,
                                         const RateConstants& c, double c1, double c2) {
  c.validate();
  require(!profiles.empty(), "need at least one profile");
  require(c1 > 0.0 && c2 > 0.0, "c1 and c2 must be positive");
  const std::int64_t steps = ceil_tol(c1 * c.smooth_ratio());
  const std::int64_t target =
      std::max<std::int64_t>(1, ceil_tol(c2 * static_cast<double>(ceil_tol(c.noise_ratio()))));

  // sum_i N_i(t_k, t) jumps exactly at the per-worker completion times
  // time_to_complete(t_k, j), so the minimal t is the target-th smallest of
  // those across workers. A heap merge visits them in order.
  struct Jump {
    double time;
    std::size_t worker;
    std::int64_t units;
  };
  const auto later = [](const Jump& a, const Jump& b) {
    if (a.time != b.time) return a.time > b.time;
    return a.worker > b.worker;
  };

  std::vector<double> t{0.0};
  t.reserve(static_cast<std::size_t>(steps) + 1);
  for (std::int64_t k = 0; k < steps; ++k) {
    const double start = t.back();
    std::priority_queue<Jump, std::vector<Jump>, decltype(later)> heap(later);
    for (std::size_t i = 0; i < profiles.size(); ++i) {
      heap.push({profiles[i].time_to_complete(start, 1.0), i, 1});
    }
    double reached = kInf;
    for (std::int64_t got = 0; got < target; ++got) {
      Jump j = heap.top();
      heap.pop();
      if (j.time == kInf) break;
      if (got + 1 == target) {
        reached = j.time;
        break;
      }
      heap.push({profiles[j.worker].time_to_complete(start, static_cast<double>(j.units + 1)),
                 j.worker, j.units + 1});
    }
    if (reached == kInf) {
      throw StalledError("lower recursion stalled: not enough work remains after t = " +
                             format_double(start),
                         static_cast<long>(k));
    }
    t.push_back(reached);
  }
  return t;
}

double upper_step(std::span<const PowerProfile> profiles, double t, std::size_t m, double units) {
  check_m(m, profiles.size());
  require(units > 0.0, "units per step must be positive");
  std::vector<double> done(profiles.size());
  for (std::size_t i = 0; i < profiles.size(); ++i) done[i] = profiles[i].time_to_complete(t, units);
  std::nth_element(done.begin(), done.begin() + static_cast<std::ptrdiff_t>(m - 1), done.end());
  return done[m - 1];
}

std::vector<double> upper_bound_sequence(std::span<const PowerProfile> profiles,
                                         const RateConstants& c, std::size_t m, double units) {
  c.validate();
  check_m(m, profiles.size());
  require(units > 0.0, "units per step must be positive");
  const std::int64_t steps = iteration_count(c, m);
  std::vector<double> t{0.0};
  t.reserve(static_cast<std::size_t>(steps) + 1);
  for (std::int64_t k = 0; k < steps; ++k) {
    const double start = t.back();
    const double next = upper_step(profiles, start, m, units);
    if (next == kInf) {
      throw StalledError("upper recursion stalled: fewer than m workers finish after t = " +
                             format_double(start),
                         static_cast<long>(k));
    }
    t.push_back(next);
  }
  return t;
}

double upper_step_by_subsets(std::span<const PowerProfile> profiles, double t, std::size_t m,
                             double units) {
  const std::size_t n = profiles.size();
  check_m(m, n);
  require(n <= 20, "subset enumeration is limited to n <= 20");
  std::vector<double> done(n);
  for (std::size_t i = 0; i < n; ++i) done[i] = profiles[i].time_to_complete(t, units);
  // The first time some size-m subset has every member at N_i = units is the
  // minimum over subsets of the latest member completion.
  double best = kInf;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != m) continue;
    double latest = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) latest = std::max(latest, done[i]);
    }
    best = std::min(best, latest);
  }
  return best;
}

BoundSequences bound_sequences(std::span<const PowerProfile> profiles, const RateConstants& c,
                               std::size_t m, double c1, double c2, double upper_units) {
  BoundSequences seq;
  seq.lower = lower_bound_sequence(profiles, c, c1, c2);
  seq.upper = upper_bound_sequence(profiles, c, m, upper_units);
  seq.c1 = c1;
  seq.c2 = c2;
  seq.upper_units = upper_units;
  seq.m = m;
  return seq;
}

double gap_ratio(std::span<const PowerProfile> profiles, const RateConstants& c, std::size_t m,
                 double c1, double c2, double upper_units) {
  return bound_sequences(profiles, c, m, c1, c2, upper_units).gap_ratio();
}

ComplexityReport complexity_report(const FixedTimes& taus, const RateConstants& c) {
  c.validate();
  ComplexityReport r;
  r.constants = c;
  r.n = taus.size();
  r.taus.assign(taus.taus().begin(), taus.taus().end());
  const double a = c.smooth_ratio();
  double inv_sum = 0.0;
  for (std::size_t m = 1; m <= r.n; ++m) {
    inv_sum += 1.0 / taus[m - 1];
    ComplexityRow row;
    row.m = m;
    row.iterations = iteration_count(c, m);
    row.g = g_of_m(taus, c, m);
    row.h = h_of_m(taus, m);
    row.sync_time = 16.0 * a * row.g;
    row.optimal_time =
        static_cast<double>(m) / inv_sum * std::max(a, c.noise_ratio() * a / static_cast<double>(m));
    if (c.R) row.expected_random = expected_random_bound(taus, c, *c.R, m);
    r.rows.push_back(row);
  }
  r.sync = t_sync(taus, c);
  r.optimal = t_optimal(taus, c);
  r.g_minimizer = optimal_m(taus, c);
  r.log_gap = log_gap_certificate(taus, c);
  return r;
}

namespace {

nlohmann::json number(double x) {
  if (std::isfinite(x)) return x;
  return format_double(x);
}

}  // namespace

nlohmann::json to_json(const RateConstants& c) {
  nlohmann::json j = {{"L", c.L}, {"delta", c.delta}, {"sigma2", c.sigma2}, {"eps", c.eps}};
  j["R"] = c.R ? nlohmann::json(*c.R) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const ComplexityReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json j = {{"m", row.m},
                        {"iterations", row.iterations},
                        {"g", number(row.g)},
                        {"h", number(row.h)},
                        {"sync_time", number(row.sync_time)},
                        {"optimal_time", number(row.optimal_time)}};
    if (row.expected_random) j["expected_random_bound"] = number(*row.expected_random);
    rows.push_back(std::move(j));
  }
  nlohmann::json j = {
      {"constants", to_json(r.constants)},
      {"n", r.n},
      {"taus", r.taus},
      {"t_sync", {{"value", number(r.sync.value)}, {"m", r.sync.m}}},
      {"t_optimal", {{"value", number(r.optimal.value)}, {"m", r.optimal.m}, {"constant", 1}}},
      {"optimal_m", r.g_minimizer},
      {"log_gap_certificate", number(r.log_gap)},
      {"random_bound_constant", 16},
      {"rows", std::move(rows)},
  };
  if (r.participation) {
    j["partial_participation"] = {{"v", *r.participation_power},
                                  {"p", *r.participation_idle_fraction},
                                  {"seconds", number(r.participation->seconds)},
                                  {"iterations", r.participation->iterations},
                                  {"m_min", r.participation->m_min},
                                  {"m_max", r.participation->m_max}};
  }
  return j;
}

nlohmann::json to_json(const BoundSequences& seq) {
  return {{"c1", seq.c1},
          {"c2", seq.c2},
          {"upper_units", seq.upper_units},
          {"m", seq.m},
          {"K_lower", seq.lower.size() - 1},
          {"K_upper", seq.upper.size() - 1},
          {"t_lower", seq.lower},
          {"t_upper", seq.upper},
          {"gap_ratio", number(seq.gap_ratio())}};
}

std::string sequences_to_csv(const BoundSequences& seq) {
  std::string out = "k,t_lower,t_upper\n";
  const std::size_t rows = std::max(seq.lower.size(), seq.upper.size());
  for (std::size_t k = 0; k < rows; ++k) {
    out += std::to_string(k);
    out += ',';
    if (k < seq.lower.size()) out += format_double(seq.lower[k]);
    out += ',';
    if (k < seq.upper.size()) out += format_double(seq.upper[k]);
    out += '\n';
  }
  return out;
}

}  // namespace ssgd
