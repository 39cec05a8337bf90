#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "ssgd/power_profile.hpp"
#include "ssgd/problem.hpp"
#include "ssgd/time_models.hpp"

namespace ssgd {

struct RateConstants {
  double L = 1.0;
  double delta = 1.0;   // f(x0) - f*
  double sigma2 = 0.0;
  double eps = 1.0;
  std::optional<double> R;

  // Throws ContractError unless L, delta, eps > 0, sigma2 >= 0, R > 0.
  void validate() const;
  double smooth_ratio() const { return L * delta / eps; }  // L Delta / eps
  double noise_ratio() const { return sigma2 / eps; }      // sigma^2 / eps

  // L, Delta from the instance, sigma^2 from the oracle variance at x0.
  static RateConstants from_problem(const QuadraticProblem& problem, double eps);
};

// ceil(x), except that values within 1e-9 (relative) of an integer snap to it,
// so 100.00000000000001 counts as 100.
std::int64_t ceil_tol(double x);

// K = ceil(16 max{L Delta / eps, sigma^2 L Delta / (m eps^2)}).
std::int64_t iteration_count(const RateConstants& c, std::size_t m);

struct Minimizer {
  double value;
  std::size_t m;  // 1-based, smallest minimizer
};

// (16 L Delta / eps) min_m tau_m max{1, sigma^2 / (m eps)}.
Minimizer t_sync(const FixedTimes& taus, const RateConstants& c);
// min_m (m / sum_{i<=m} 1/tau_i) max{L Delta / eps, sigma^2 L Delta / (m eps^2)}.
Minimizer t_optimal(const FixedTimes& taus, const RateConstants& c);
// T_sync / (T_optimal log(n + 1)).
double log_gap_certificate(const FixedTimes& taus, const RateConstants& c);

double g_of_m(const FixedTimes& taus, const RateConstants& c, std::size_t m);
double h_of_m(const FixedTimes& taus, std::size_t m);
// argmin of g over 1..min{ceil(sigma^2/eps), n}.
std::size_t optimal_m(const FixedTimes& taus, const RateConstants& c);

struct PowerLawChoice {
  std::size_t m;
  bool valid;
  double threshold;  // (delta / tau1)^(1 / alpha)
};
PowerLawChoice power_law_m(double tau1, double alpha, double delta, const RateConstants& c,
                           std::size_t n);

// R log n.
double random_noise_term(double R, std::size_t n);
// 16 (L Delta / eps) (tau_m + R log n) max{1, sigma^2 / (m eps)}.
double expected_random_bound(const FixedTimes& taus, const RateConstants& c, double R,
                             std::size_t m);

struct ParticipationBound {
  double seconds;
  std::int64_t iterations;
  std::size_t m_min;
  std::size_t m_max;
};
// 4/v ceil(16 max{L Delta/eps, sigma^2 L Delta/(n eps^2)}) for m in
// [floor(n/5), floor((1 - 2p) n)]. Throws OutOfRegimeError when p >= 0.4.
ParticipationBound partial_participation_bound(double v, double p, std::size_t n,
                                               const RateConstants& c);

struct BoundSequences {
  std::vector<double> lower;  // t_0 .. t_Klower
  std::vector<double> upper;  // t_0 .. t_Kupper
  double c1 = 16.0;
  double c2 = 1.0;
  double upper_units = 2.0;
  std::size_t m = 0;
  double gap_ratio() const { return upper.back() / lower.back(); }
};

// Lower recursion: t_{k+1} = min{t : sum_i N_i(t_k, t) >= c2 ceil(sigma^2/eps)},
// for ceil(c1 L Delta / eps) steps. Throws StalledError when unreachable.
std::vector<double> lower_bound_sequence(std::span<const PowerProfile> profiles,
                                         const RateConstants& c, double c1 = 16.0,
                                         double c2 = 1.0);
// Upper recursion: t_{k+1} = m-th smallest time_to_complete(profile_i, t_k, units),
// units = 2 by default.
std::vector<double> upper_bound_sequence(std::span<const PowerProfile> profiles,
                                         const RateConstants& c, std::size_t m,
                                         double units = 2.0);
// One upper step from t: the m-th smallest time_to_complete(profile_i, t, units).
double upper_step(std::span<const PowerProfile> profiles, double t, std::size_t m,
                  double units = 2.0);
// Same recursion step by brute force over all size-m subsets; for checking.
double upper_step_by_subsets(std::span<const PowerProfile> profiles, double t, std::size_t m,
                             double units = 2.0);

BoundSequences bound_sequences(std::span<const PowerProfile> profiles, const RateConstants& c,
                               std::size_t m, double c1 = 16.0, double c2 = 1.0,
                               double upper_units = 2.0);
double gap_ratio(std::span<const PowerProfile> profiles, const RateConstants& c, std::size_t m,
                 double c1 = 16.0, double c2 = 1.0, double upper_units = 2.0);

struct ComplexityRow {
  std::size_t m;
  std::int64_t iterations;
  double g;
  double h;
  double sync_time;                      // 16 (L Delta/eps) g(m)
  double optimal_time;                   // harmonic term times max{...}
  std::optional<double> expected_random;  // with R
};

struct ComplexityReport {
  RateConstants constants;
  std::size_t n = 0;
  std::vector<double> taus;
  std::vector<ComplexityRow> rows;
  Minimizer sync{};
  Minimizer optimal{};
  std::size_t g_minimizer = 0;
  double log_gap = 0.0;
  std::optional<ParticipationBound> participation;
  std::optional<double> participation_power;
  std::optional<double> participation_idle_fraction;
};

ComplexityReport complexity_report(const FixedTimes& taus, const RateConstants& c);

nlohmann::json to_json(const RateConstants& c);
nlohmann::json to_json(const ComplexityReport& report);
nlohmann::json to_json(const BoundSequences& seq);
// k,t_lower,t_upper; the shorter sequence leaves its column empty.
std::string sequences_to_csv(const BoundSequences& seq);

}  // namespace ssgd
