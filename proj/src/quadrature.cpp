#include "almc/quadrature.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace almc {

void GridSpec::validate() const {
  if (lo.size() != hi.size() || lo.empty() || lo.size() > 2)
    throw std::invalid_argument("grid: dimension must be 1 or 2");
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (!(lo[i] < hi[i])) throw std::invalid_argument("grid: empty interval");
  if (initial_points_per_dim < 3)
    throw std::invalid_argument("grid: needs at least 3 points per dim");
}

namespace {

GridSpec grid_from_bounds(Vec lo, Vec hi, std::size_t dim) {
  GridSpec g;
  g.lo = std::move(lo);
  g.hi = std::move(hi);
  if (dim == 2) {
    g.initial_points_per_dim = 129;
    g.max_points_per_dim = 4097;
  }
  return g;
}

void expand_bounds(const GaussianMixture& p, double sigmas, Vec& lo, Vec& hi) {
  for (const auto& c : p.components()) {
    const double spread = sigmas * std::sqrt(symmetric_eigen(c.cov).values.back());
    for (std::size_t i = 0; i < p.dim(); ++i) {
      lo[i] = std::min(lo[i], c.mean[i] - spread);
      hi[i] = std::max(hi[i], c.mean[i] + spread);
    }
  }
}

double trapezoid_pass(const GridSpec& grid, std::size_t n,
                      const std::function<double(const Vec&)>& f) {
  const std::size_t d = grid.dim();
  if (d == 1) {
    const double h = (grid.hi[0] - grid.lo[0]) / static_cast<double>(n - 1);
    double s = 0.0;
    Vec x(1);
    for (std::size_t i = 0; i < n; ++i) {
      x[0] = grid.lo[0] + h * static_cast<double>(i);
      const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
      s += w * f(x);
    }
    return s * h;
  }
  const double hx = (grid.hi[0] - grid.lo[0]) / static_cast<double>(n - 1);
  const double hy = (grid.hi[1] - grid.lo[1]) / static_cast<double>(n - 1);
  double s = 0.0;
  Vec x(2);
  for (std::size_t i = 0; i < n; ++i) {
    x[0] = grid.lo[0] + hx * static_cast<double>(i);
    const double wi = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      x[1] = grid.lo[1] + hy * static_cast<double>(j);
      const double wj = (j == 0 || j == n - 1) ? 0.5 : 1.0;
      row += wj * f(x);
    }
    s += wi * row;
  }
  return s * hx * hy;
}

}  // namespace

GridSpec default_grid(const GaussianMixture& p, double sigmas) {
  Vec lo(p.dim(), std::numeric_limits<double>::infinity());
  Vec hi(p.dim(), -std::numeric_limits<double>::infinity());
  expand_bounds(p, sigmas, lo, hi);
  return grid_from_bounds(std::move(lo), std::move(hi), p.dim());
}

GridSpec default_grid(const GaussianMixture& a, const GaussianMixture& b, double sigmas) {
  if (a.dim() != b.dim())
    throw std::invalid_argument("grid: mixtures have different dimensions");
  Vec lo(a.dim(), std::numeric_limits<double>::infinity());
  Vec hi(a.dim(), -std::numeric_limits<double>::infinity());
  expand_bounds(a, sigmas, lo, hi);
  expand_bounds(b, sigmas, lo, hi);
  return grid_from_bounds(std::move(lo), std::move(hi), a.dim());
}

double integrate(const GridSpec& grid, const std::function<double(const Vec&)>& f) {
  grid.validate();
  const std::size_t cap =
      grid.dim() == 1 ? grid.max_points_per_dim : std::min<std::size_t>(grid.max_points_per_dim, 4097);
  std::size_t n = grid.initial_points_per_dim;
  double prev = trapezoid_pass(grid, n, f);
  while (2 * (n - 1) + 1 <= cap) {
    n = 2 * (n - 1) + 1;
    const double cur = trapezoid_pass(grid, n, f);
    const double scale = std::max({std::abs(cur), std::abs(prev), 1e-12});
    if (std::abs(cur - prev) <= grid.rel_tol * scale) return cur;
    prev = cur;
  }
  return prev;
}

double integrate_1d(double lo, double hi, const std::function<double(double)>& f,
                    double rel_tol, std::size_t initial_points, std::size_t max_points) {
  GridSpec g;
  g.lo = {lo};
  g.hi = {hi};
  g.initial_points_per_dim = initial_points;
  g.rel_tol = rel_tol;
  g.max_points_per_dim = max_points;
  return integrate(g, [&f](const Vec& x) { return f(x[0]); });
}

}  // namespace almc
