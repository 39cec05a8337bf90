#include "ssgd/time_models.hpp"

#include <algorithm>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

#include "ssgd/errors.hpp"
#include "ssgd/io.hpp"

namespace ssgd {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

void require(bool ok, const std::string& what) {
  if (!ok) throw ContractError(what);
}

}  // namespace

FixedTimes::FixedTimes(std::vector<double> taus) {
  require(!taus.empty(), "FixedTimes: need at least one worker");
  for (double t : taus) require(t > 0.0 && std::isfinite(t), "FixedTimes: every tau must be positive");
  original_index_.resize(taus.size());
  std::iota(original_index_.begin(), original_index_.end(), 0);
  std::stable_sort(original_index_.begin(), original_index_.end(),
                   [&](std::size_t a, std::size_t b) { return taus[a] < taus[b]; });
  taus_.reserve(taus.size());
  for (std::size_t i : original_index_) taus_.push_back(taus[i]);
}

std::vector<double> power_law_taus(std::size_t n, double exponent, double scale) {
  std::vector<double> taus(n);
  for (std::size_t i = 0; i < n; ++i) {
    taus[i] = scale * std::pow(static_cast<double>(i + 1), exponent);
  }
  return taus;
}

DelayDistribution::DelayDistribution(Variant v) : v_(v) {
  std::visit(
      overloaded{
          [](const delay::Constant& d) { require(d.tau >= 0.0, "Constant: tau must be >= 0"); },
          [](const delay::Uniform& d) {
            require(d.lo >= 0.0, "Uniform: lo must be >= 0");
            require(d.hi >= d.lo, "Uniform: hi must be >= lo");
          },
          [](const delay::TruncatedNormal& d) {
            require(d.sd >= 0.0, "TruncatedNormal: sd must be >= 0");
            require(std::isfinite(d.mu), "TruncatedNormal: mu must be finite");
            if (d.sd == 0.0) {
              require(d.mu >= 0.0, "TruncatedNormal: degenerate mu must be >= 0");
            } else {
              // Rejection sampling has acceptance P(N(mu, sd^2) >= 0).
              require(normal_upper_tail(-d.mu / d.sd) >= 1e-6,
                      "TruncatedNormal: mu/sd too negative for rejection sampling");
            }
          },
          [](const delay::Exponential& d) { require(d.rate > 0.0, "Exponential: rate must be > 0"); },
          [](const delay::ShiftedExponential& d) {
            require(d.shift >= 0.0, "ShiftedExponential: shift must be >= 0");
            require(d.rate > 0.0, "ShiftedExponential: rate must be > 0");
          },
          [](const delay::Gamma& d) {
            require(d.shape > 0.0, "Gamma: shape must be > 0");
            require(d.scale > 0.0, "Gamma: scale must be > 0");
          },
          [](const delay::ChiSquare& d) { require(d.dof > 0.0, "ChiSquare: dof must be > 0"); },
      },
      v_);
}

double DelayDistribution::mean() const {
  return std::visit(
      overloaded{
          [](const delay::Constant& d) { return d.tau; },
          [](const delay::Uniform& d) { return 0.5 * (d.lo + d.hi); },
          [](const delay::TruncatedNormal& d) {
            if (d.sd == 0.0) return d.mu;
            const double alpha = -d.mu / d.sd;
            const double pdf = std::exp(-0.5 * alpha * alpha) / std::sqrt(2.0 * std::numbers::pi);
            return d.mu + d.sd * pdf / normal_upper_tail(alpha);
          },
          [](const delay::Exponential& d) { return 1.0 / d.rate; },
          [](const delay::ShiftedExponential& d) { return d.shift + 1.0 / d.rate; },
          [](const delay::Gamma& d) { return d.shape * d.scale; },
          [](const delay::ChiSquare& d) { return d.dof; },
      },
      v_);
}

double DelayDistribution::sample(Rng& rng) const {
  return std::visit(
      overloaded{
          [](const delay::Constant& d) { return d.tau; },
          [&](const delay::Uniform& d) { return d.lo + (d.hi - d.lo) * uniform01(rng); },
          [&](const delay::TruncatedNormal& d) {
            if (d.sd == 0.0) return d.mu;
            std::normal_distribution<double> normal(d.mu, d.sd);
            double x;
            do {
              x = normal(rng);
            } while (x < 0.0);
            return x;
          },
          [&](const delay::Exponential& d) {
            return std::exponential_distribution<double>(d.rate)(rng);
          },
          [&](const delay::ShiftedExponential& d) {
            return d.shift + std::exponential_distribution<double>(d.rate)(rng);
          },
          [&](const delay::Gamma& d) {
            return std::gamma_distribution<double>(d.shape, d.scale)(rng);
          },
          [&](const delay::ChiSquare& d) {
            return std::chi_squared_distribution<double>(d.dof)(rng);
          },
      },
      v_);
}

std::string DelayDistribution::describe() const {
  return std::visit(
      overloaded{
          [](const delay::Constant& d) { return "constant(" + format_double(d.tau) + ")"; },
          [](const delay::Uniform& d) {
            return "uniform(" + format_double(d.lo) + "," + format_double(d.hi) + ")";
          },
          [](const delay::TruncatedNormal& d) {
            return "truncated_normal(" + format_double(d.mu) + "," + format_double(d.sd) + ")";
          },
          [](const delay::Exponential& d) { return "exponential(" + format_double(d.rate) + ")"; },
          [](const delay::ShiftedExponential& d) {
            return "shifted_exponential(" + format_double(d.shift) + "," + format_double(d.rate) +
                   ")";
          },
          [](const delay::Gamma& d) {
            return "gamma(" + format_double(d.shape) + "," + format_double(d.scale) + ")";
          },
          [](const delay::ChiSquare& d) { return "chi_square(" + format_double(d.dof) + ")"; },
      },
      v_);
}

double estimate_R(std::span<const double> samples) {
  if (samples.size() < 2) throw ContractError("estimate_R: need at least two samples");
  const double n = static_cast<double>(samples.size());
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  std::vector<double> dev(samples.size());
  double max_dev = 0.0;
  for (std::size_t j = 0; j < samples.size(); ++j) {
    dev[j] = std::abs(samples[j] - mean);
    max_dev = std::max(max_dev, dev[j]);
  }
  if (max_dev == 0.0) throw ContractError("estimate_R: zero-dispersion sample");

  // Solve in units of the largest deviation so that rescaling the data
  // rescales R without touching the root finder.
  for (double& u : dev) u /= max_dev;
  const auto excess = [&](double r) {
    double s = 0.0;
    for (double u : dev) s += std::exp(u / r);
    return s / n - 2.0;
  };
  // excess(lo) >= 0 because one term alone is exp(1 / lo) = 2 n;
  // excess(hi) <= 0 because every term is at most exp(1 / hi) = 2.
  const double lo = 1.0 / std::log(2.0 * n);
  const double hi = 1.0 / std::log(2.0);
  if (excess(hi) >= 0.0) return hi * max_dev;

  std::uintmax_t max_iter = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(
      excess, lo, hi, [](double x, double y) { return std::abs(x - y) <= 1e-12 * std::abs(y); },
      max_iter);
  return 0.5 * (a + b) * max_dev;
}

std::size_t worker_count(const TimeModel& model) {
  return std::visit(overloaded{
                        [](const FixedTimes& m) { return m.size(); },
                        [](const RandomDelays& m) { return m.per_worker.size(); },
                        [](const PowerProfiles& m) { return m.per_worker.size(); },
                    },
                    model);
}

FixedTimes mean_times(const TimeModel& model) {
  return std::visit(overloaded{
                        [](const FixedTimes& m) { return m; },
                        [](const RandomDelays& m) {
                          std::vector<double> taus;
                          for (const auto& d : m.per_worker) taus.push_back(d.mean());
                          return FixedTimes(std::move(taus));
                        },
                        [](const PowerProfiles&) -> FixedTimes {
                          throw ContractError("power profiles have no mean-time surrogate");
                        },
                    },
                    model);
}

}  // namespace ssgd
