#pragma once

#include <functional>

#include "almc/gaussian_mixture.hpp"
#include "almc/linalg.hpp"

namespace almc {

/// Axis-aligned quadrature domain with adaptive trapezoid refinement.
/// Supports one and two dimensions; that is all the density-based
/// diagnostics in this project promise.
struct GridSpec {
  Vec lo;
  Vec hi;
  std::size_t initial_points_per_dim = 257;
  double rel_tol = 1e-8;
  std::size_t max_points_per_dim = 1 << 21;  // 1D cap; 2D capped at 4097

  std::size_t dim() const { return lo.size(); }
  void validate() const;
};

/// Domain covering every component mean plus/minus 12 standard deviations
/// along each axis (widest component wins), per the tail scales the
/// Gaussian-mixture diagnostics have to resolve.
GridSpec default_grid(const GaussianMixture& p, double sigmas = 12.0);
/// Same rule applied to the union of two mixtures.
GridSpec default_grid(const GaussianMixture& a, const GaussianMixture& b,
                      double sigmas = 12.0);

/// Adaptive composite-trapezoid integral of f over the grid domain,
/// doubling resolution until successive refinements agree to rel_tol.
double integrate(const GridSpec& grid, const std::function<double(const Vec&)>& f);

/// Composite trapezoid on 1D intervals with the same refinement rule.
double integrate_1d(double lo, double hi, const std::function<double(double)>& f,
                    double rel_tol = 1e-10, std::size_t initial_points = 129,
                    std::size_t max_points = 1 << 22);

}  // namespace almc
