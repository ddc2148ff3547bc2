#pragma once

#include <span>

#include "almc/linalg.hpp"

namespace almc {

/// Quadratic measurement potential R(x) = ||Ax - y||^2 / (2 sigma^2),
/// shifted so its minimum over x is exactly zero. The shift makes the
/// least-squares minimizer satisfy R(x*) = 0 even when y is not in the
/// range of A. Rank-deficient A is allowed; the lower curvature bound is
/// then zero while the warm-start target stays 1-strongly log-concave
/// through the Gaussian factor.
class QuadraticPotential {
 public:
  QuadraticPotential(Matrix a, Vec y, double noise_var);

  /// R with A = 0: the potential vanishes identically (no measurement).
  static QuadraticPotential zero(std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t measurement_dim() const { return a_.rows(); }
  const Matrix& a() const { return a_; }
  const Vec& y() const { return y_; }
  double noise_var() const { return noise_var_; }

  /// AᵀA / sigma^2, the constant Hessian.
  const Matrix& hessian() const { return hessian_; }
  /// Aᵀy / sigma^2.
  const Vec& linear_term() const { return linear_term_; }

  /// Least-squares minimizer; R evaluates to 0 there.
  const Vec& minimizer() const { return minimizer_; }
  double minimizer_norm() const { return minimizer_norm_; }

  double operator()(std::span<const double> x) const;
  Vec gradient(std::span<const double> x) const;
  /// Alloc-free gradient for the sampler hot loop.
  void gradient_into(const double* x, double* out, double* scratch_m) const;

  /// (lambda_min, lambda_max) of AᵀA / sigma^2.
  std::pair<double, double> curvature_bounds() const { return curvature_; }

 private:
  void check_dim(std::size_t n) const;

  Matrix a_;
  Vec y_;
  double noise_var_;
  std::size_t dim_;

  Matrix hessian_;
  Vec linear_term_;
  Vec minimizer_;
  double minimizer_norm_ = 0.0;
  double min_value_ = 0.0;  // unshifted R at the minimizer
  std::pair<double, double> curvature_{0.0, 0.0};
};

}  // namespace almc
