#include <cmath>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "ssgd/errors.hpp"
#include "ssgd/time_models.hpp"

using namespace ssgd;

namespace {

double monte_carlo_mean(const DelayDistribution& d, std::size_t n, std::uint64_t seed,
                        double* sd_out = nullptr) {
  Rng rng = make_stream(seed, 0, Stream::kDelay);
  double s = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = d.sample(rng);
    CHECK(x >= 0.0);
    s += x;
    s2 += x * x;
  }
  const double mean = s / static_cast<double>(n);
  if (sd_out) *sd_out = std::sqrt(std::max(0.0, s2 / static_cast<double>(n) - mean * mean));
  return mean;
}

}  // namespace

TEST_CASE("FixedTimes sorts and remembers positions") {
  const FixedTimes t({3.0, 1.0, 2.0, 1.0});
  CHECK(t.size() == 4);
  CHECK(t[0] == 1.0);
  CHECK(t[1] == 1.0);
  CHECK(t[3] == 3.0);
  CHECK(t.original_index()[0] == 1);
  CHECK(t.original_index()[1] == 3);
  CHECK(t.original_index()[3] == 0);
  CHECK_THROWS_AS(FixedTimes({}), ContractError);
  CHECK_THROWS_AS(FixedTimes({1.0, 0.0}), ContractError);
}

TEST_CASE("power_law_taus") {
  const auto t = power_law_taus(4, 0.5, 2.0);
  CHECK(t[0] == 2.0);
  CHECK(t[3] == doctest::Approx(4.0));
}

TEST_CASE("delay distributions: closed-form means match Monte Carlo") {
  const std::vector<DelayDistribution> dists = {
      DelayDistribution::constant(2.5),
      DelayDistribution::uniform(0.5, 1.5),
      DelayDistribution::truncated_normal(1.0, 0.5),
      DelayDistribution::truncated_normal(0.0, 1.0),
      DelayDistribution::exponential(2.0),
      DelayDistribution::shifted_exponential(1.0, 0.5),
      DelayDistribution::gamma(2.0, 1.5),
      DelayDistribution::chi_square(3.0),
  };
  std::uint64_t seed = 10;
  for (const auto& d : dists) {
    CAPTURE(d.describe());
    double sd = 0.0;
    const std::size_t n = 200000;
    const double m = monte_carlo_mean(d, n, seed++, &sd);
    CHECK(std::abs(m - d.mean()) <= 5.0 * sd / std::sqrt(static_cast<double>(n)) + 1e-12);
  }
  CHECK(DelayDistribution::truncated_normal(0.0, 1.0).mean() ==
        doctest::Approx(std::sqrt(2.0 / M_PI)));
}

TEST_CASE("delay distributions reject bad parameters") {
  CHECK_THROWS_AS(DelayDistribution::constant(-1.0), ContractError);
  CHECK_THROWS_AS(DelayDistribution::uniform(2.0, 1.0), ContractError);
  CHECK_THROWS_AS(DelayDistribution::uniform(-1.0, 1.0), ContractError);
  CHECK_THROWS_AS(DelayDistribution::exponential(0.0), ContractError);
  CHECK_THROWS_AS(DelayDistribution::gamma(0.0, 1.0), ContractError);
  CHECK_THROWS_AS(DelayDistribution::chi_square(-2.0), ContractError);
  CHECK_THROWS_AS(DelayDistribution::truncated_normal(-100.0, 1.0), ContractError);
}

TEST_CASE("estimate_R: two-point sample") {
  // |x - mean| = 1 for both points, so exp(1/R) = 2.
  const std::vector<double> s = {0.0, 2.0};
  CHECK(estimate_R(s) == doctest::Approx(1.0 / std::log(2.0)).epsilon(1e-10));
}

TEST_CASE("estimate_R satisfies its defining equation and scales linearly") {
  const auto d = DelayDistribution::exponential(1.0);
  Rng rng = make_stream(3, 0, Stream::kDelay);
  std::vector<double> s(100000);
  for (double& x : s) x = d.sample(rng);
  const double R = estimate_R(s);
  CHECK(R > 0.3);
  CHECK(R < 3.0);
  const double mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
  double lhs = 0.0;
  for (double x : s) lhs += std::exp(std::abs(x - mean) / R);
  CHECK(lhs / static_cast<double>(s.size()) == doctest::Approx(2.0).epsilon(1e-8));

  std::vector<double> scaled(s);
  for (double& x : scaled) x = 3.0 * x + 7.0;
  CHECK(estimate_R(scaled) == doctest::Approx(3.0 * R).epsilon(1e-8));
}

TEST_CASE("estimate_R rejects degenerate samples") {
  CHECK_THROWS_AS(estimate_R(std::vector<double>{5.0, 5.0, 5.0}), ContractError);
  CHECK_THROWS_AS(estimate_R(std::vector<double>{1.0}), ContractError);
}

TEST_CASE("time model helpers") {
  const TimeModel fixed = FixedTimes({2.0, 1.0});
  CHECK(worker_count(fixed) == 2);
  CHECK(mean_times(fixed)[0] == 1.0);

  const TimeModel random = RandomDelays{{DelayDistribution::uniform(0.0, 4.0),
                                         DelayDistribution::constant(1.0),
                                         DelayDistribution::exponential(0.25)}};
  CHECK(worker_count(random) == 3);
  const FixedTimes m = mean_times(random);
  CHECK(m[0] == 1.0);
  CHECK(m[1] == 2.0);
  CHECK(m[2] == 4.0);

  const TimeModel power = PowerProfiles{{constant_profile(1.0)}};
  CHECK(worker_count(power) == 1);
  CHECK_THROWS_AS(mean_times(power), ContractError);
}
