#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "ssgd/errors.hpp"
#include "ssgd/power_profile.hpp"

using namespace ssgd;

namespace {

// Midpoint Riemann sum with n cells of the interpolated power.
double riemann(const PowerProfile& p, double t0, double t1, int cells) {
  const double h = (t1 - t0) / cells;
  double s = 0.0;
  for (int i = 0; i < cells; ++i) s += p.power_at(t0 + (i + 0.5) * h);
  return s * h;
}

// Bisection on integrate() for the first time the work reaches `units`.
double bisect_completion(const PowerProfile& p, double t0, double units, double hi) {
  double lo = t0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (p.integrate(t0, mid) >= units ? hi : lo) = mid;
  }
  return hi;
}

}  // namespace

TEST_CASE("integrate: closed-form examples") {
  const PowerProfile c3 = constant_profile(3.0);
  CHECK(c3.integrate(1.0, 2.0) == 3.0);
  const PowerProfile ramp(2.0, {0.0, 2.0});
  CHECK(ramp.integrate(0.0, 2.0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(ramp.integrate(0.0, 4.0) == doctest::Approx(6.0).epsilon(1e-15));  // held at 2 past the grid
  CHECK(ramp.integrate(1.5, 1.5) == 0.0);
  CHECK_THROWS_AS(ramp.integrate(2.0, 1.0), ContractError);
  CHECK_THROWS_AS(ramp.integrate(-1.0, 1.0), ContractError);
}

TEST_CASE("integrate matches a fine Riemann sum on chaotic profiles") {
  const auto profiles = generate_chaotic_profiles(5, 0.1, 50.0, 42);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (const auto& p : profiles) {
    for (int t = 0; t < 20; ++t) {
      double a = u(rng), b = u(rng);
      if (a > b) std::swap(a, b);
      // Integrate knot-aligned pieces with the midpoint rule, exact for lines.
      double ref = 0.0;
      double lo = a;
      while (lo < b) {
        const double knot = (std::floor(lo / 0.1 + 1e-12) + 1) * 0.1;
        const double hi = std::min(b, knot);
        ref += riemann(p, lo, hi, 4);
        lo = hi;
      }
      CHECK(std::abs(p.integrate(a, b) - ref) < 1e-9);
    }
  }
}

TEST_CASE("additive and floor consistency") {
  const auto profiles = generate_chaotic_profiles(4, 0.1, 30.0, 7);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 35.0);
  for (const auto& p : profiles) {
    for (int t = 0; t < 200; ++t) {
      double x[3] = {u(rng), u(rng), u(rng)};
      std::sort(x, x + 3);
      CHECK(std::abs(p.integrate(x[0], x[2]) - p.integrate(x[0], x[1]) - p.integrate(x[1], x[2])) <
            1e-12);
      const auto a = p.gradients_completed(x[0], x[1]) + p.gradients_completed(x[1], x[2]);
      const auto b = p.gradients_completed(x[0], x[2]);
      CHECK(a <= b + 1);
      CHECK(a >= b - 1);
    }
  }
}

TEST_CASE("gradients_completed") {
  const PowerProfile v2 = constant_profile(2.0);
  CHECK(v2.gradients_completed(0.0, 1.4) == 2);
  CHECK(v2.gradients_completed(0.0, 0.49) == 0);
  CHECK(v2.gradients_completed(3.0, 3.0) == 0);
}

TEST_CASE("time_to_complete: examples and dead tails") {
  CHECK(constant_profile(4.0).time_to_complete(0.0, 2.0) == 0.5);
  const PowerProfile late(1.0, {0.0, 0.0, 1.0}, Interpolation::kStep);
  CHECK(late.time_to_complete(0.0, 1.0) == doctest::Approx(3.0));
  const PowerProfile delayed_on(1.0, {0.0, 0.0, 1.0});  // linear ramp from t=1 to t=2
  CHECK(delayed_on.time_to_complete(0.0, 1.0) == doctest::Approx(2.5));
  const PowerProfile dies(1.0, {1.0, 1.0, 0.0});
  CHECK(dies.remaining_work(0.0) == doctest::Approx(1.5));
  CHECK(std::isinf(dies.time_to_complete(0.0, 2.0)));
  CHECK(std::isinf(dies.time_to_complete(5.0, 1.0)));
  CHECK(std::isinf(dies.remaining_work(0.0)) == false);
  CHECK(std::isinf(constant_profile(1.0).remaining_work(3.0)));
}

TEST_CASE("time_to_complete agrees with bisection and is left-most") {
  for (auto interp : {Interpolation::kLinear, Interpolation::kStep}) {
    auto base = generate_chaotic_profiles(6, 0.1, 40.0, 3);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 30.0);
    for (const auto& b : base) {
      const PowerProfile p(b.step(), std::vector<double>(b.values().begin(), b.values().end()),
                           interp);
      for (int t = 0; t < 50; ++t) {
        const double t0 = u(rng);
        const double units = 1.0 + static_cast<double>(rng() % 3);
        const double r = p.time_to_complete(t0, units);
        if (std::isinf(r)) {
          CHECK(p.remaining_work(t0) < units);
          continue;
        }
        const double w = p.integrate(t0, r);
        CHECK(w >= units);
        CHECK(w <= units + 1e-9);
        if (r > t0) {
          CHECK(p.integrate(t0, std::max(t0, r - 1e-6)) < units);
          CHECK(p.integrate(t0, std::nextafter(r, 0.0)) < units);
        }
        CHECK(std::abs(r - bisect_completion(p, t0, units, r + 100.0)) < 1e-9);
      }
    }
  }
}

TEST_CASE("chaotic generator") {
  const auto a = generate_chaotic_profiles(50, 0.1, 200.0, 11);
  const auto b = generate_chaotic_profiles(50, 0.1, 200.0, 11);
  std::size_t zeros = 0, total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::equal(a[i].values().begin(), a[i].values().end(), b[i].values().begin()));
    for (double v : a[i].values()) {
      CHECK(v >= 0.0);
      zeros += v == 0.0;
      ++total;
    }
  }
  const double frac = static_cast<double>(zeros) / static_cast<double>(total);
  CHECK(frac > 0.2);
  CHECK(frac < 0.7);
  // Longer horizons extend rather than redraw.
  const auto longer = generate_chaotic_profiles(50, 0.1, 400.0, 11);
  for (std::size_t k = 0; k < a[3].values().size(); ++k) {
    CHECK(longer[3].values()[k] == a[3].values()[k]);
  }
}

TEST_CASE("periodic generator") {
  const auto p = generate_periodic_profiles(20, 0.1, 2.0 * M_PI * 20, 5);
  const auto q = generate_periodic_profiles(20, 0.1, 2.0 * M_PI * 20, 5);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto v = p[i].values();
    CHECK(std::equal(v.begin(), v.end(), q[i].values().begin()));
    for (double x : v) CHECK(x >= 0.1);
    // The sine part averages out over whole periods; the level is s_i in [10.5, 11].
    const double mean = p[i].integrate(0.0, 2.0 * M_PI * 20) / (2.0 * M_PI * 20);
    CHECK(mean > 10.5 - 0.2);
    CHECK(mean < 11.0 + 0.2);
  }
}

TEST_CASE("participation generator") {
  ParticipationSchedule s;
  s.speed = 2.0;
  s.idle_fraction = 0.0;
  for (const auto& p : generate_participation_profiles(s, 5, 10.0)) {
    for (double v : p.values()) CHECK(v == 2.0);
  }

  for (IdleMode mode : {IdleMode::kFixed, IdleMode::kRoundRobin, IdleMode::kAdversarialToFastest,
                        IdleMode::kRandom}) {
    s.idle_fraction = 0.1;
    s.mode = mode;
    s.interval = 0.5;
    const auto prof = generate_participation_profiles(s, 10, 50.0);
    for (std::size_t k = 0; k < prof[0].values().size(); ++k) {
      std::size_t active = 0;
      for (const auto& p : prof) {
        const double v = p.values()[k];
        CHECK((v == 0.0 || v == 2.0));
        active += v == 2.0;
      }
      CHECK(active >= 9);
    }
    // Exact at interval boundaries: power jumps at multiples of the interval.
    CHECK(prof[0].interpolation() == Interpolation::kStep);
  }

  s.mode = IdleMode::kRoundRobin;
  s.idle_fraction = 0.3;
  s.interval = 1.0;
  const auto rr = generate_participation_profiles(s, 10, 1000.0);
  for (const auto& p : rr) {
    CHECK(std::abs(p.integrate(0.0, 1000.0) / 1000.0 - 0.7 * 2.0) < 0.02 * 1.4);
  }

  s.mode = IdleMode::kAdversarialToFastest;
  s.idle_fraction = 0.2;
  const auto adv = generate_participation_profiles(s, 5, 20.0);
  // Interval 0: everyone tied, the stable order idles the first id.
  CHECK(adv[0].values()[0] == 0.0);
  CHECK(adv[1].values()[0] == 2.0);

  s.idle_fraction = 0.45;
  CHECK_THROWS_AS(generate_participation_profiles(s, 10, 5.0), OutOfRegimeError);
  s.allow_out_of_regime = true;
  CHECK_NOTHROW(generate_participation_profiles(s, 10, 5.0));
  s.idle_fraction = 1.0;
  CHECK_THROWS_AS(generate_participation_profiles(s, 10, 5.0), ContractError);
  CHECK(idle_count(0.3, 10) == 3);
  CHECK(idle_count(0.3, 50) == 15);
}

TEST_CASE("speedup switch generator") {
  const auto same = generate_speedup_switch_profiles(3, 1.0, 5.0, 1.0);
  for (const auto& p : same) CHECK(p.integrate(0.0, 20.0) == doctest::Approx(20.0));
  const auto fast = generate_speedup_switch_profiles(3, 1.0, 5.0, 1e6);
  CHECK(fast[0].power_at(4.0) == 1.0);
  CHECK(fast[0].power_at(6.0) == 1e6);
  CHECK(fast[1].power_at(6.0) == 1.0);
  CHECK(fast[1].integrate(0.0, 7.0) == same[1].integrate(0.0, 7.0));
}

TEST_CASE("profile CSV round-trips bit-exactly") {
  const auto p = generate_chaotic_profiles(3, 0.1, 5.0, 9);
  const std::string text = profiles_to_csv(p);
  CHECK(text.rfind("t,v_1,v_2,v_3\n", 0) == 0);
  const auto back = profiles_from_csv(text);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].step() == p[i].step());
    CHECK(std::equal(p[i].values().begin(), p[i].values().end(), back[i].values().begin(),
                     back[i].values().end()));
  }
  CHECK(profiles_to_csv(back) == text);
  CHECK_THROWS_AS(profiles_from_csv("x,v_1\n0,1\n"), ParseError);
  CHECK_THROWS_AS(profiles_from_csv("t,v_1\n0,1\n1,1,2\n"), ParseError);
  CHECK_THROWS_AS(profiles_from_csv("t,v_1\n0,1\n1,1\n3,1\n"), ParseError);
}

TEST_CASE("profile validation") {
  CHECK_THROWS_AS(PowerProfile(0.0, {1.0}), ContractError);
  CHECK_THROWS_AS(PowerProfile(1.0, {}), ContractError);
  CHECK_THROWS_AS(PowerProfile(1.0, {1.0, -0.5}), ContractError);
}
