#pragma once

#include <array>
#include <optional>
#include <vector>

#include "almc/potential.hpp"

namespace almc {

/// Line segment in the plane.
struct Segment {
  std::array<double, 2> a{0.0, 0.0};
  std::array<double, 2> b{0.0, 0.0};

  double length() const;
  /// Point at arc parameter u in [0, 1].
  std::array<double, 2> point(double u) const;
};

/// Uniform measure on a thin tube around a piecewise-linear curve, with an
/// optional exponential tilt e^{-R}. The tube thickness only matters when
/// evaluating the 2D density; every integral of a per-segment function
/// reduces to a weighted arc-length integral, so the reported ratios do not
/// depend on it.
struct CurveMeasure {
  std::vector<Segment> segments;
  double thickness = 1e-2;
  std::optional<QuadraticPotential> tilt_potential;
  bool connected = true;

  /// e^{-R(p)} at a point of the curve (1 when untilted).
  double weight_at(const std::array<double, 2>& p) const;
  /// Unnormalized weighted arc mass of one segment.
  double segment_mass(std::size_t k) const;
  /// Sum of segment masses.
  double normalizer() const;
  /// 2D tube density at a point (0 outside the tube).
  double density2d(const std::array<double, 2>& p) const;

  void validate() const;
};

/// Test function defined per segment as an affine map of the plane point,
/// with a constant gradient on each piece.
struct PiecewiseAffine {
  struct Piece {
    std::array<double, 2> grad{0.0, 0.0};
    double offset = 0.0;
  };
  std::vector<Piece> pieces;  // aligned with the measure's segments

  double value(std::size_t k, const std::array<double, 2>& p) const {
    return pieces[k].grad[0] * p[0] + pieces[k].grad[1] * p[1] + pieces[k].offset;
  }
};

/// Entropy/energy ratio Ent_mu(f^2) / int ||grad f||^2 dmu, the standard
/// test-function lower bound on the measure's log-Sobolev constant.
/// Raises DegenerateTestFunctionError when the gradient energy vanishes.
double lsi_ratio(const CurveMeasure& mu, const PiecewiseAffine& f);

/// Long flat segment [-e^ell, e^ell] x {0} and its Gaussian-tilted version
/// (tilt e^{-x^2}): the flat measure has an exponentially large ratio for
/// f = x while the tilted one is strongly log-concave along the segment and
/// stays below 2.
std::pair<CurveMeasure, CurveMeasure> segment_instance(double ell);

struct UShapeInstance {
  CurveMeasure untilted;
  CurveMeasure tilted;
  PiecewiseAffine test_function;  // 0 on leg a, x+1 on the bar, 2 on leg c
  double ratio = 0.0;             // tilted-measure ratio for the test function
};

/// Two legs at x = +-1 spanning y in [0, ell] joined by a bar at height ell,
/// tilted by e^{-||x||^2 / 2}. The tilt starves the bar of mass and blows
/// the ratio up past e^{ell^2 / 4}.
UShapeInstance u_shape_instance(double ell);

}  // namespace almc
