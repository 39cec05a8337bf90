#include "ssgd/problem.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "ssgd/errors.hpp"

namespace ssgd {

namespace {

constexpr double kB1 = -0.25;  // the only nonzero entry of b

}  // namespace

std::size_t prog(std::span<const double> x) {
  for (std::size_t i = x.size(); i > 0; --i) {
    if (x[i - 1] != 0.0) return i;
  }
  return 0;
}

std::vector<double> solve_tridiagonal(std::span<const double> lower,
                                      std::span<const double> diag,
                                      std::span<const double> upper,
                                      std::span<const double> rhs) {
  const std::size_t n = diag.size();
  if (lower.size() != n || upper.size() != n || rhs.size() != n) {
    throw ContractError("solve_tridiagonal: band and rhs lengths differ");
  }
  if (n == 0) return {};

  std::vector<double> c_prime(n);
  std::vector<double> x(n);
  c_prime[0] = upper[0] / diag[0];
  x[0] = rhs[0] / diag[0];

  // Forward sweep
  for (std::size_t i = 1; i < n; ++i) {
    const double factor = 1.0 / (diag[i] - lower[i] * c_prime[i - 1]);
    c_prime[i] = upper[i] * factor;
    x[i] = (rhs[i] - lower[i] * x[i - 1]) * factor;
  }

  // Back substitution
  for (std::size_t i = n - 1; i > 0; --i) {
    x[i - 1] -= c_prime[i - 1] * x[i];
  }
  return x;
}

QuadraticProblem::QuadraticProblem(std::size_t dim, double noise_probability)
    : dim_(dim), p_(noise_probability) {
  if (dim_ == 0) throw ContractError("QuadraticProblem: dimension must be positive");
  if (!(p_ > 0.0 && p_ <= 1.0)) {
    throw ContractError("QuadraticProblem: noise probability must lie in (0, 1], got " +
                        std::to_string(p_));
  }

  std::vector<double> lower(dim_, -0.25);
  std::vector<double> diag(dim_, 0.5);
  std::vector<double> upper(dim_, -0.25);
  std::vector<double> rhs(dim_, 0.0);
  rhs[0] = kB1;
  minimizer_ = solve_tridiagonal(lower, diag, upper, rhs);

  // At the minimizer f* = -1/2 b^T x*.
  f_star_ = -0.5 * kB1 * minimizer_[0];
  initial_gap_ = objective(initial_point()) - f_star_;
}

std::vector<double> QuadraticProblem::initial_point() const {
  std::vector<double> x(dim_, 0.0);
  x[0] = std::sqrt(static_cast<double>(dim_));
  return x;
}

void QuadraticProblem::check_dim(std::span<const double> x) const {
  if (x.size() != dim_) {
    throw ContractError("QuadraticProblem: expected a vector of length " + std::to_string(dim_) +
                        ", got " + std::to_string(x.size()));
  }
}

void QuadraticProblem::apply_matrix(std::span<const double> x, std::span<double> out) const {
  check_dim(x);
  if (out.size() != dim_) throw ContractError("QuadraticProblem: output length mismatch");
  const std::size_t d = dim_;
  for (std::size_t i = 0; i < d; ++i) {
    double s = 2.0 * x[i];
    if (i > 0) s -= x[i - 1];
    if (i + 1 < d) s -= x[i + 1];
    out[i] = 0.25 * s;
  }
}

double QuadraticProblem::objective(std::span<const double> x) const {
  check_dim(x);
  // x^T A x = 1/4 (2 sum x_i^2 - 2 sum x_i x_{i+1})
  double diag = 0.0;
  double off = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    diag += x[i] * x[i];
    if (i + 1 < dim_) off += x[i] * x[i + 1];
  }
  const double quad = 0.25 * (2.0 * diag - 2.0 * off);
  return 0.5 * quad - kB1 * x[0];
}

void QuadraticProblem::gradient_into(std::span<const double> x, std::span<double> out) const {
  apply_matrix(x, out);
  out[0] -= kB1;
}

std::vector<double> QuadraticProblem::gradient(std::span<const double> x) const {
  std::vector<double> g(dim_);
  gradient_into(x, g);
  return g;
}

std::vector<double> QuadraticProblem::stochastic_gradient(std::span<const double> x,
                                                          bool xi) const {
  std::vector<double> g(dim_);
  minibatch_gradient_into(x, xi ? 1 : 0, 1, g);
  return g;
}

std::vector<double> QuadraticProblem::stochastic_gradient(std::span<const double> x,
                                                          Rng& rng) const {
  return stochastic_gradient(x, bernoulli(rng, p_));
}

void QuadraticProblem::minibatch_gradient_into(std::span<const double> x, std::size_t heads,
                                               std::size_t count,
                                               std::span<double> out) const {
  if (count == 0 || heads > count) {
    throw ContractError("minibatch_gradient_into: need 0 <= heads <= count, count >= 1");
  }
  gradient_into(x, out);
  const double scale = static_cast<double>(heads) / (static_cast<double>(count) * p_);
  for (std::size_t j = prog(x); j < dim_; ++j) out[j] *= scale;
}

double QuadraticProblem::variance(std::span<const double> x) const {
  const std::vector<double> g = gradient(x);
  // heads: (1/p - 1)^2 g_j^2 with weight p; tails: g_j^2 with weight 1 - p.
  const double factor = (1.0 - p_) * (1.0 - p_) / p_ + (1.0 - p_);
  double tail = 0.0;
  for (std::size_t j = prog(x); j < dim_; ++j) tail += g[j] * g[j];
  return factor * tail;
}

double QuadraticProblem::smoothness() const {
  return 0.5 * (1.0 + std::cos(std::numbers::pi / static_cast<double>(dim_ + 1)));
}

}  // namespace ssgd
