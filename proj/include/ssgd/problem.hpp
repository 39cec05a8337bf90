#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ssgd/rng.hpp"

namespace ssgd {

// Largest 1-based index of a nonzero coordinate, 0 for the zero vector.
std::size_t prog(std::span<const double> x);

// Thomas algorithm for a tridiagonal system. lower[0] and upper[n-1] are ignored.
// Requires a nonsingular system that needs no pivoting (e.g. diagonally dominant
// or symmetric positive definite).
std::vector<double> solve_tridiagonal(std::span<const double> lower,
                                      std::span<const double> diag,
                                      std::span<const double> upper,
                                      std::span<const double> rhs);

/// Quadratic f(x) = 1/2 x^T A x - b^T x with A = 1/4 tridiag(-1, 2, -1) and
/// b = -1/4 e_1, plus a stochastic oracle that reveals coordinates beyond
/// prog(x) only when a Bernoulli(p) coin comes up heads.
///
/// A and b are never stored; every product is an O(d) stencil sweep. The
/// minimizer is computed once at construction so that f* and
/// Delta = f(x0) - f* are available to the analyzer.
class QuadraticProblem {
 public:
  QuadraticProblem(std::size_t dim, double noise_probability);

  std::size_t dim() const { return dim_; }
  double noise_probability() const { return p_; }

  // x0 = [sqrt(d), 0, ..., 0].
  std::vector<double> initial_point() const;

  void apply_matrix(std::span<const double> x, std::span<double> out) const;

  double objective(std::span<const double> x) const;
  std::vector<double> gradient(std::span<const double> x) const;
  void gradient_into(std::span<const double> x, std::span<double> out) const;

  // One oracle call with the coin already tossed.
  std::vector<double> stochastic_gradient(std::span<const double> x, bool xi) const;
  // One oracle call, drawing xi ~ Bernoulli(p) from the caller's stream.
  std::vector<double> stochastic_gradient(std::span<const double> x, Rng& rng) const;

  // Mean of `count` oracle calls at the same x of which `heads` drew xi = 1.
  // Coordinates up to prog(x) are exact, the rest are scaled by heads/(count*p).
  void minibatch_gradient_into(std::span<const double> x, std::size_t heads,
                               std::size_t count, std::span<double> out) const;

  // E||grad f(x; xi) - grad f(x)||^2, by enumerating both coin outcomes.
  double variance(std::span<const double> x) const;

  const std::vector<double>& minimizer() const { return minimizer_; }
  double optimal_value() const { return f_star_; }
  double initial_gap() const { return initial_gap_; }
  // lambda_max(A) = (1 + cos(pi / (d + 1))) / 2.
  double smoothness() const;

 private:
  void check_dim(std::span<const double> x) const;

  std::size_t dim_;
  double p_;
  std::vector<double> minimizer_;
  double f_star_ = 0.0;
  double initial_gap_ = 0.0;
};

}  // namespace ssgd
