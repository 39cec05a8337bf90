#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "ssgd/power_profile.hpp"
#include "ssgd/rng.hpp"

namespace ssgd {

/// Per-worker fixed gradient times, kept sorted ascending. original_index()[i]
/// is the position the i-th fastest worker had in the caller's list.
class FixedTimes {
 public:
  explicit FixedTimes(std::vector<double> taus);

  std::span<const double> taus() const { return taus_; }
  std::span<const std::size_t> original_index() const { return original_index_; }
  std::size_t size() const { return taus_.size(); }
  double operator[](std::size_t i) const { return taus_[i]; }

 private:
  std::vector<double> taus_;
  std::vector<std::size_t> original_index_;
};

// tau_i = scale * i^exponent for i = 1..n.
std::vector<double> power_law_taus(std::size_t n, double exponent, double scale = 1.0);

namespace delay {
struct Constant { double tau; };
struct Uniform { double lo, hi; };
// Normal(mu, sd^2) conditioned on the sample being nonnegative.
struct TruncatedNormal { double mu, sd; };
struct Exponential { double rate; };
struct ShiftedExponential { double shift, rate; };
struct Gamma { double shape, scale; };
struct ChiSquare { double dof; };
}  // namespace delay

/// Nonnegative random gradient time. Parameters are validated on construction
/// so sampling never fails.
class DelayDistribution {
 public:
  using Variant = std::variant<delay::Constant, delay::Uniform, delay::TruncatedNormal,
                               delay::Exponential, delay::ShiftedExponential, delay::Gamma,
                               delay::ChiSquare>;

  DelayDistribution(Variant v);  // NOLINT(google-explicit-constructor)

  static DelayDistribution constant(double tau) { return Variant(delay::Constant{tau}); }
  static DelayDistribution uniform(double lo, double hi) { return Variant(delay::Uniform{lo, hi}); }
  static DelayDistribution truncated_normal(double mu, double sd) {
    return Variant(delay::TruncatedNormal{mu, sd});
  }
  static DelayDistribution exponential(double rate) { return Variant(delay::Exponential{rate}); }
  static DelayDistribution shifted_exponential(double shift, double rate) {
    return Variant(delay::ShiftedExponential{shift, rate});
  }
  static DelayDistribution gamma(double shape, double scale) { return Variant(delay::Gamma{shape, scale}); }
  static DelayDistribution chi_square(double dof) { return Variant(delay::ChiSquare{dof}); }

  // Closed-form E[tau].
  double mean() const;
  double sample(Rng& rng) const;
  std::string describe() const;
  const Variant& get() const { return v_; }

 private:
  Variant v_;
};

inline double sample_delay(const DelayDistribution& dist, Rng& rng) { return dist.sample(rng); }

// Smallest R > 0 with mean_j exp(|x_j - mean(x)| / R) = 2.
double estimate_R(std::span<const double> samples);

struct RandomDelays {
  std::vector<DelayDistribution> per_worker;
};

struct PowerProfiles {
  std::vector<PowerProfile> per_worker;
};

using TimeModel = std::variant<FixedTimes, RandomDelays, PowerProfiles>;

std::size_t worker_count(const TimeModel& model);

// Mean-delay surrogate used by the closed-form analyzer: the taus themselves,
// per-worker means for random delays. Power profiles have no such surrogate.
FixedTimes mean_times(const TimeModel& model);

}  // namespace ssgd
