#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ssgd {

enum class Interpolation {
  kLinear,  // straight lines between knots
  kStep,    // v(t) = v_k on [t_k, t_{k+1})
};

/// Computation power v(t) (gradients per second) given on the uniform grid
/// t_k = k * step. Past the last knot the last value is held forever.
///
/// Cumulative work W(t) is kept at the knots so that integrals are exact
/// closed forms and the inverse query is a binary search plus one quadratic
/// solve inside a single segment.
class PowerProfile {
 public:
  PowerProfile(double step, std::vector<double> values,
               Interpolation interpolation = Interpolation::kLinear);

  double step() const { return step_; }
  std::span<const double> values() const { return values_; }
  Interpolation interpolation() const { return interpolation_; }
  double horizon() const { return step_ * static_cast<double>(values_.size() - 1); }
  double tail_value() const { return values_.back(); }

  double power_at(double t) const;

  // Exact integral of v over [t0, t1]; requires 0 <= t0 <= t1.
  double integrate(double t0, double t1) const;

  // floor(integrate(t0, t1)).
  std::int64_t gradients_completed(double t0, double t1) const;

  // Smallest t >= t0 with integrate(t0, t) >= units, or +infinity when the
  // worker dies (zero tail) before finishing. The result is consistent with
  // integrate(): integrate(t0, result) >= units holds in floating point.
  double time_to_complete(double t0, double units) const;

  // Total work still available after t0; +infinity when the tail is positive.
  double remaining_work(double t0) const;

 private:
  std::size_t segment(double t) const;
  double knot_time(std::size_t k) const { return step_ * static_cast<double>(k); }
  double slope(std::size_t k) const;
  double value_in_segment(std::size_t k, double t) const;
  // Work from t to the end of segment k (k must not be the tail).
  double rest_of_segment(std::size_t k, double t) const;
  // Offset a in segment k starting at t_start such that the work is `need`.
  double solve_in_segment(std::size_t k, double t_start, double need) const;
  double raw_time_to_complete(double t0, double units) const;

  double step_;
  std::vector<double> values_;
  std::vector<double> cumulative_;  // W(t_k)
  Interpolation interpolation_;
};

PowerProfile constant_profile(double power);

// v_i(t_k) = max{sin(a_i t_k + s_i) + noise, 0}, a_i ~ U(0.5, 1),
// s_i ~ U(0, 2 pi), noise ~ N(0, 0.1^2).
std::vector<PowerProfile> generate_chaotic_profiles(std::size_t n, double step, double horizon,
                                                    std::uint64_t seed);

// v_i(t_k) = max{s_i + 3 sin(t_k + phi_i) + noise, 0.1}, s_i ~ U(10.5, 11),
// phi_i ~ U(0, 2 pi), noise ~ N(0, 0.1^2).
std::vector<PowerProfile> generate_periodic_profiles(std::size_t n, double step, double horizon,
                                                     std::uint64_t seed);

enum class IdleMode {
  kFixed,                  // the last floor(p n) workers are always idle
  kRoundRobin,             // idle window slides by floor(p n) every interval
  kAdversarialToFastest,   // idle the workers with the most work done so far
  kRandom,                 // seeded uniform subset per interval
};

struct ParticipationSchedule {
  double speed = 1.0;          // v
  double idle_fraction = 0.0;  // p
  IdleMode mode = IdleMode::kRoundRobin;
  double interval = 1.0;       // seconds between idle-set changes
  std::uint64_t seed = 0;      // used by kRandom
  bool allow_out_of_regime = false;  // permit 0.4 <= p < 1
};

// Step profiles: in every interval the idle set has power 0 and everyone
// else has power `speed`.
std::vector<PowerProfile> generate_participation_profiles(const ParticipationSchedule& schedule,
                                                          std::size_t n, double horizon);

// Number of idle workers per interval, floor(p n).
std::size_t idle_count(double idle_fraction, std::size_t n);

// Worker 0 runs at v until t_switch and at v * fast_multiplier afterwards;
// everyone else stays at v.
std::vector<PowerProfile> generate_speedup_switch_profiles(std::size_t n, double power,
                                                           double t_switch,
                                                           double fast_multiplier = 1e6);

// CSV with header t,v_1,...,v_n; all profiles must share step and length.
std::string profiles_to_csv(std::span<const PowerProfile> profiles);
std::vector<PowerProfile> profiles_from_csv(std::string_view text,
                                            Interpolation interpolation = Interpolation::kLinear);

}  // namespace ssgd
