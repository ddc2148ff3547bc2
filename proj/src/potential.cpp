#include "almc/potential.hpp"

#include <cmath>
#include <stdexcept>

namespace almc {

QuadraticPotential::QuadraticPotential(Matrix a, Vec y, double noise_var)
    : a_(std::move(a)), y_(std::move(y)), noise_var_(noise_var), dim_(a_.cols()) {
  if (a_.rows() != y_.size())
    throw std::invalid_argument("potential: A rows must match measurement size");
  if (!(noise_var_ > 0.0))
    throw std::invalid_argument("potential: noise variance must be positive");
  if (dim_ == 0) throw std::invalid_argument("potential: zero-dimensional A");

  hessian_ = (1.0 / noise_var_) * gram(a_);
  linear_term_ = transpose(a_) * y_;
  for (double& v : linear_term_) v /= noise_var_;

  minimizer_ = least_squares(a_, y_);
  minimizer_norm_ = norm(minimizer_);
  Vec r = a_ * minimizer_;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= y_[i];
  min_value_ = squared_norm(r) / (2.0 * noise_var_);

  const SymmetricEigen eig = symmetric_eigen(gram(a_));
  const double lo = eig.values.empty() ? 0.0 : std::max(0.0, eig.values.front());
  const double hi = eig.values.empty() ? 0.0 : std::max(0.0, eig.values.back());
  curvature_ = {lo / noise_var_, hi / noise_var_};
}

QuadraticPotential QuadraticPotential::zero(std::size_t dim) {
  return QuadraticPotential(Matrix(1, dim, 0.0), Vec{0.0}, 1.0);
}

void QuadraticPotential::check_dim(std::size_t n) const {
  if (n != dim_) throw std::invalid_argument("potential: dimension mismatch");
}

double QuadraticPotential::operator()(std::span<const double> x) const {
  check_dim(x.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a_.rows(); ++i) {
    double r = -y_[i];
    for (std::size_t j = 0; j < dim_; ++j) r += a_(i, j) * x[j];
    s += r * r;
  }
  return s / (2.0 * noise_var_) - min_value_;
}

Vec QuadraticPotential::gradient(std::span<const double> x) const {
  check_dim(x.size());
  Vec out(dim_);
  Vec scratch(a_.rows());
  gradient_into(x.data(), out.data(), scratch.data());
  return out;
}

void QuadraticPotential::gradient_into(const double* x, double* out,
                                       double* scratch_m) const {
  // Aᵀ(Ax − y) / sigma^2
  for (std::size_t i = 0; i < a_.rows(); ++i) {
    double r = -y_[i];
    for (std::size_t j = 0; j < dim_; ++j) r += a_(i, j) * x[j];
    scratch_m[i] = r;
  }
  for (std::size_t j = 0; j < dim_; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < a_.rows(); ++i) s += a_(i, j) * scratch_m[i];
    out[j] = s / noise_var_;
  }
}

}  // namespace almc
