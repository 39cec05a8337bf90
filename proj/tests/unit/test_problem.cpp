#include <cmath>
#include <random>

#include "doctest.h"
#include "ssgd/errors.hpp"
#include "ssgd/problem.hpp"

using namespace ssgd;

namespace {

// Dense reference: A = 1/4 tridiag(-1, 2, -1), b = -1/4 e1.
struct Dense {
  std::size_t d;
  std::vector<std::vector<double>> A;
  explicit Dense(std::size_t dim) : d(dim), A(dim, std::vector<double>(dim, 0.0)) {
    for (std::size_t i = 0; i < d; ++i) {
      A[i][i] = 0.5;
      if (i > 0) A[i][i - 1] = -0.25;
      if (i + 1 < d) A[i][i + 1] = -0.25;
    }
  }
  double f(const std::vector<double>& x) const {
    double q = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) q += x[i] * A[i][j] * x[j];
    }
    return 0.5 * q + 0.25 * x[0];
  }
};

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> x(d);
  for (double& v : x) v = n(rng);
  return x;
}

}  // namespace

TEST_CASE("prog") {
  CHECK(prog(std::vector<double>{0, 0, 0}) == 0);
  CHECK(prog(std::vector<double>{3, 0, 0}) == 1);
  CHECK(prog(std::vector<double>{1, 0, 2, 0}) == 3);
  CHECK(prog(std::vector<double>{}) == 0);
}

TEST_CASE("objective matches hand values and the dense oracle") {
  const QuadraticProblem p4(4, 0.5);
  CHECK(p4.objective(std::vector<double>(4, 0.0)) == 0.0);
  CHECK(p4.objective(std::vector<double>{1, 0, 0, 0}) == doctest::Approx(0.5).epsilon(1e-15));

  const QuadraticProblem p(1000, 0.01);
  const Dense dense(1000);
  const auto x0 = p.initial_point();
  CHECK(x0[0] == doctest::Approx(std::sqrt(1000.0)));
  CHECK(prog(x0) == 1);
  const double ref = dense.f(x0);
  CHECK(std::abs(p.objective(x0) - ref) <= 1e-10 * std::abs(ref));

  std::mt19937_64 rng(3);
  const QuadraticProblem p50(50, 0.2);
  const Dense d50(50);
  for (int t = 0; t < 20; ++t) {
    const auto x = random_vector(rng, 50);
    CHECK(std::abs(p50.objective(x) - d50.f(x)) <= 1e-12 * (1.0 + std::abs(d50.f(x))));
  }
}

TEST_CASE("gradient: zero point, finite differences, stationary point") {
  const QuadraticProblem p(50, 0.1);
  const auto g0 = p.gradient(std::vector<double>(50, 0.0));
  CHECK(g0[0] == 0.25);
  for (std::size_t j = 1; j < 50; ++j) CHECK(g0[j] == 0.0);

  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    auto x = random_vector(rng, 50);
    const auto g = p.gradient(x);
    for (std::size_t j = 0; j < 50; ++j) {
      const double h = 1e-5;
      auto xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      CHECK(std::abs((p.objective(xp) - p.objective(xm)) / (2 * h) - g[j]) < 1e-6);
    }
  }
  const auto gs = p.gradient(p.minimizer());
  for (double v : gs) CHECK(std::abs(v) < 1e-10);
}

TEST_CASE("Thomas solver against a dense product") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::size_t n = 40;
  std::vector<double> lo(n), di(n), up(n), rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    lo[i] = u(rng);
    up[i] = u(rng);
    di[i] = 3.0 + u(rng);
    rhs[i] = u(rng);
  }
  const auto x = solve_tridiagonal(lo, di, up, rhs);
  for (std::size_t i = 0; i < n; ++i) {
    double r = di[i] * x[i];
    if (i > 0) r += lo[i] * x[i - 1];
    if (i + 1 < n) r += up[i] * x[i + 1];
    CHECK(r == doctest::Approx(rhs[i]).epsilon(1e-12));
  }
  CHECK_THROWS_AS(solve_tridiagonal(lo, di, up, std::vector<double>(3)), ContractError);
}

TEST_CASE("f*, Delta and L") {
  for (std::size_t d : {1u, 2u, 10u, 200u}) {
    const QuadraticProblem p(d, 0.5);
    CHECK(p.optimal_value() == doctest::Approx(p.objective(p.minimizer())).epsilon(1e-12));
    CHECK(p.initial_gap() == doctest::Approx(p.objective(p.initial_point()) - p.optimal_value()));
    CHECK(p.smoothness() < 1.0);
  }
  // L-smoothness with L <= 1.
  const QuadraticProblem p(30, 0.5);
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) {
    const auto x = random_vector(rng, 30), y = random_vector(rng, 30);
    const auto gx = p.gradient(x), gy = p.gradient(y);
    double dg = 0, dx = 0;
    for (std::size_t j = 0; j < 30; ++j) {
      dg += (gx[j] - gy[j]) * (gx[j] - gy[j]);
      dx += (x[j] - y[j]) * (x[j] - y[j]);
    }
    CHECK(std::sqrt(dg) <= p.smoothness() * std::sqrt(dx) + 1e-12);
  }
}

TEST_CASE("stochastic oracle branches") {
  const QuadraticProblem exact(6, 1.0);
  const std::vector<double> x{1, 2, 0, 0, 0, 0};
  CHECK(exact.stochastic_gradient(x, true) == exact.gradient(x));

  const QuadraticProblem p(6, 0.25);
  const auto g = p.gradient(x);
  const auto tails = p.stochastic_gradient(x, false);
  const auto heads = p.stochastic_gradient(x, true);
  for (std::size_t j = 0; j < 6; ++j) {
    if (j < 2) {
      CHECK(tails[j] == g[j]);
      CHECK(heads[j] == g[j]);
    } else {
      CHECK(tails[j] == 0.0);
      CHECK(heads[j] == g[j] / 0.25);
    }
  }
}

TEST_CASE("two-outcome enumeration is unbiased") {
  std::mt19937_64 rng(17);
  for (double prob : {0.01, 0.5, 1.0}) {
    const QuadraticProblem p(50, prob);
    for (int t = 0; t < 100; ++t) {
      auto x = random_vector(rng, 50);
      const std::size_t cut = rng() % 51;
      for (std::size_t j = cut; j < 50; ++j) x[j] = 0.0;
      const auto g = p.gradient(x);
      const auto h = p.stochastic_gradient(x, true);
      const auto z = p.stochastic_gradient(x, false);
      for (std::size_t j = 0; j < 50; ++j) {
        CHECK(std::abs(prob * h[j] + (1 - prob) * z[j] - g[j]) <= 1e-12 * (1 + std::abs(g[j])));
      }
    }
  }
}

TEST_CASE("sampled mean converges and variance matches enumeration") {
  const QuadraticProblem p(8, 0.3);
  const std::vector<double> x{1, -1, 0.5, 0, 0, 0, 0, 0};
  Rng rng = make_stream(2, 0, Stream::kNoise);
  const int N = 100000;
  std::vector<double> mean(8, 0.0), sq(8, 0.0);
  for (int i = 0; i < N; ++i) {
    const auto s = p.stochastic_gradient(x, rng);
    for (std::size_t j = 0; j < 8; ++j) {
      mean[j] += s[j];
      sq[j] += s[j] * s[j];
    }
  }
  const auto g = p.gradient(x);
  for (std::size_t j = 0; j < 8; ++j) {
    mean[j] /= N;
    const double sd = std::sqrt(std::max(0.0, sq[j] / N - mean[j] * mean[j]));
    CHECK(std::abs(mean[j] - g[j]) <= 5 * sd / std::sqrt(N) + 1e-15);
  }
  const auto h = p.stochastic_gradient(x, true), z = p.stochastic_gradient(x, false);
  double var = 0.0;
  for (std::size_t j = 0; j < 8; ++j) {
    var += 0.3 * (h[j] - g[j]) * (h[j] - g[j]) + 0.7 * (z[j] - g[j]) * (z[j] - g[j]);
  }
  CHECK(p.variance(x) == doctest::Approx(var).epsilon(1e-12));
}

TEST_CASE("minibatch equals the mean of its oracle calls") {
  const QuadraticProblem p(5, 0.1);
  const std::vector<double> x{2, 1, 0, 0, 0};
  std::vector<double> out(5);
  p.minibatch_gradient_into(x, 3, 7, out);
  const auto h = p.stochastic_gradient(x, true), z = p.stochastic_gradient(x, false);
  for (std::size_t j = 0; j < 5; ++j) CHECK(out[j] == doctest::Approx((3 * h[j] + 4 * z[j]) / 7));
  CHECK_THROWS_AS(p.minibatch_gradient_into(x, 8, 7, out), ContractError);
}

TEST_CASE("a gradient step advances prog by at most one") {
  const QuadraticProblem p(40, 0.5);
  Rng rng = make_stream(4, 0, Stream::kNoise);
  auto x = p.initial_point();
  for (int k = 0; k < 200; ++k) {
    const std::size_t before = prog(x);
    const auto g = p.stochastic_gradient(x, rng);
    for (std::size_t j = 0; j < 40; ++j) x[j] -= 0.5 * g[j];
    CHECK(prog(x) <= before + 1);
  }
}

TEST_CASE("contract errors") {
  CHECK_THROWS_AS(QuadraticProblem(0, 0.5), ContractError);
  CHECK_THROWS_AS(QuadraticProblem(3, 0.0), ContractError);
  CHECK_THROWS_AS(QuadraticProblem(3, 1.5), ContractError);
  const QuadraticProblem p(3, 0.5);
  CHECK_THROWS_AS(p.objective(std::vector<double>(2)), ContractError);
  CHECK_THROWS_AS(p.gradient(std::vector<double>(4)), ContractError);
}
