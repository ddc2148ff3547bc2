#include "almc/curve_measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "almc/errors.hpp"
#include "almc/quadrature.hpp"

namespace almc {

namespace {

/// Weighted arc integral of g(point) over one segment.
double segment_integral(const CurveMeasure& mu, std::size_t k,
                        const std::function<double(const std::array<double, 2>&)>& g) {
  const Segment& s = mu.segments[k];
  const double len = s.length();
  return integrate_1d(
      0.0, 1.0,
      [&](double u) {
        const auto p = s.point(u);
        return g(p) * mu.weight_at(p);
      },
      1e-10, 257, 1 << 17) * len;
}

double xlogx(double v) { return v > 0.0 ? v * std::log(v) : 0.0; }

}  // namespace

double Segment::length() const {
  const double dx = b[0] - a[0];
  const double dy = b[1] - a[1];
  return std::sqrt(dx * dx + dy * dy);
}

std::array<double, 2> Segment::point(double u) const {
  return {a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])};
}

double CurveMeasure::weight_at(const std::array<double, 2>& p) const {
  if (!tilt_potential) return 1.0;
  const Vec x{p[0], p[1]};
  return std::exp(-(*tilt_potential)(x));
}

double CurveMeasure::segment_mass(std::size_t k) const {
  return segment_integral(*this, k, [](const std::array<double, 2>&) { return 1.0; });
}

double CurveMeasure::normalizer() const {
  double z = 0.0;
  for (std::size_t k = 0; k < segments.size(); ++k) z += segment_mass(k);
  return z;
}

double CurveMeasure::density2d(const std::array<double, 2>& p) const {
  // distance to the closest segment decides tube membership
  double best = std::numeric_limits<double>::infinity();
  for (const Segment& s : segments) {
    const double vx = s.b[0] - s.a[0], vy = s.b[1] - s.a[1];
    const double len2 = vx * vx + vy * vy;
    double u = ((p[0] - s.a[0]) * vx + (p[1] - s.a[1]) * vy) / len2;
    u = std::clamp(u, 0.0, 1.0);
    const double dx = p[0] - (s.a[0] + u * vx);
    const double dy = p[1] - (s.a[1] + u * vy);
    best = std::min(best, std::sqrt(dx * dx + dy * dy));
  }
  if (best > 0.5 * thickness) return 0.0;
  return weight_at(p) / (thickness * normalizer());
}

void CurveMeasure::validate() const {
  if (segments.empty()) throw std::invalid_argument("curve measure: no segments");
  if (!(thickness > 0.0)) throw std::invalid_argument("curve measure: thickness <= 0");
  double total = 0.0;
  for (const Segment& s : segments) total += s.length();
  if (!(total > 0.0)) throw std::invalid_argument("curve measure: zero total length");
}

double lsi_ratio(const CurveMeasure& mu, const PiecewiseAffine& f) {
  mu.validate();
  if (f.pieces.size() != mu.segments.size())
    throw std::invalid_argument("lsi_ratio: test function pieces must align with segments");

  double z = 0.0;
  double energy = 0.0;     // int ||grad f||^2 dmu (unnormalized)
  double f2 = 0.0;         // int f^2 dmu
  double f2logf2 = 0.0;    // int f^2 log f^2 dmu
  for (std::size_t k = 0; k < mu.segments.size(); ++k) {
    const double mass = mu.segment_mass(k);
    z += mass;
    const auto& piece = f.pieces[k];
    energy += (piece.grad[0] * piece.grad[0] + piece.grad[1] * piece.grad[1]) * mass;
    f2 += segment_integral(mu, k, [&](const std::array<double, 2>& p) {
      const double v = f.value(k, p);
      return v * v;
    });
    f2logf2 += segment_integral(mu, k, [&](const std::array<double, 2>& p) {
      const double v = f.value(k, p);
      return xlogx(v * v);
    });
  }

  energy /= z;
  f2 /= z;
  f2logf2 /= z;
  if (!(energy > 1e-14))
    throw DegenerateTestFunctionError("lsi_ratio: test function has zero gradient energy");

  const double entropy = f2logf2 - xlogx(f2);
  return entropy / energy;
}

std::pair<CurveMeasure, CurveMeasure> segment_instance(double ell) {
  if (!(ell >= 1.0)) throw std::invalid_argument("segment_instance: ell must be >= 1");
  const double half = std::exp(ell);
  CurveMeasure flat;
  flat.segments = {Segment{{-half, 0.0}, {half, 0.0}}};

  CurveMeasure tilted = flat;
  // e^{-x^2} as a quadratic potential: A = [1 0], y = 0, sigma^2 = 1/2
  Matrix a(1, 2);
  a(0, 0) = 1.0;
  tilted.tilt_potential = QuadraticPotential(a, Vec{0.0}, 0.5);
  return {flat, tilted};
}

UShapeInstance u_shape_instance(double ell) {
  if (!(ell >= 2.0)) throw std::invalid_argument("u_shape_instance: ell must be >= 2");
  UShapeInstance inst;
  // legs a and c rise to height ell; the bar joins them at the top so the
  // curve stays connected
  const Segment leg_a{{-1.0, 0.0}, {-1.0, ell}};
  const Segment bar{{-1.0, ell}, {1.0, ell}};
  const Segment leg_c{{1.0, 0.0}, {1.0, ell}};
  inst.untilted.segments = {leg_a, bar, leg_c};

  inst.tilted = inst.untilted;
  inst.tilted.tilt_potential =
      QuadraticPotential(Matrix::identity(2), Vec{0.0, 0.0}, 1.0);

  inst.test_function.pieces = {
      PiecewiseAffine::Piece{{0.0, 0.0}, 0.0},  // 0 on a
      PiecewiseAffine::Piece{{1.0, 0.0}, 1.0},  // x + 1 on the bar
      PiecewiseAffine::Piece{{0.0, 0.0}, 2.0},  // 2 on c
  };
  inst.ratio = lsi_ratio(inst.tilted, inst.test_function);
  return inst;
}

}  // namespace almc
