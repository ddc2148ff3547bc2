#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "almc/linalg.hpp"
#include "almc/potential.hpp"
#include "almc/rng.hpp"

namespace almc {

/// Ornstein-Uhlenbeck smoothing time. t = 0 is the raw, unsmoothed law.
struct SmoothTime {
  double t = 0.0;
  explicit SmoothTime(double time);
};

/// Regularity metadata: an upper bound on the subgaussian parameter and on
/// the score Lipschitz constant, clamped to be at least one.
struct RegularityConstants {
  double m_subgaussian = 1.0;
  double score_lipschitz = 1.0;
  std::size_t dim = 1;
};

/// Weighted mixture of full-covariance Gaussians.
///
/// This one type carries the prior, every OU-smoothed prior, and every
/// tilted posterior in the project; all of them stay inside the family, so
/// densities, scores and conditional means are available in closed form.
/// Construction validates the invariants (positive weights summing to one,
/// symmetric covariances with eigenvalues above 1e-12, matching dimensions)
/// and caches a Cholesky factorization per component. Values are immutable
/// after construction and safe to share across threads.
class GaussianMixture {
 public:
  struct Component {
    double weight;
    Vec mean;
    Matrix cov;
  };

  explicit GaussianMixture(std::vector<Component> components);

  static GaussianMixture single(Vec mean, Matrix cov);
  /// Standard Gaussian in the given dimension.
  static GaussianMixture standard(std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t component_count() const { return components_.size(); }
  const std::vector<Component>& components() const { return components_; }
  const Component& component(std::size_t i) const { return components_[i]; }

  const Matrix& precision(std::size_t i) const { return cache_[i].precision; }
  const Matrix& cholesky_lower(std::size_t i) const { return cache_[i].chol_lower; }
  /// log weight − ½ log det(2π Σ), the constant part of the log component term.
  double log_weight_norm(std::size_t i) const { return cache_[i].log_weight_norm; }

  double log_density(std::span<const double> x) const;
  double density(std::span<const double> x) const { return std::exp(log_density(x)); }

  /// ∇ log p(x) = Σ_i r_i(x) Σ_i⁻¹ (m_i − x), responsibilities in log space.
  Vec score(std::span<const double> x) const;

  /// Law of the OU process dX = −X dt + √2 dB at time t started from this
  /// mixture: componentwise (w, e⁻ᵗ m, e⁻²ᵗ Σ + (1 − e⁻²ᵗ) I).
  GaussianMixture ou_smooth(SmoothTime t) const;

  /// ∂_t log p_t(x) by differentiating the smoothed parameters in t.
  /// Rejects t = 0, where the derivative may diverge.
  double dt_log_density(SmoothTime t, std::span<const double> x) const;

  /// E[x0 | e⁻ᵗ x0 + sqrt(1−e⁻²ᵗ) η = x_t] via per-component Gaussian
  /// conditioning. Rejects t = 0.
  Vec posterior_mean(SmoothTime t, std::span<const double> x_t) const;

  Vec sample(SplitRng& rng) const;

  /// Mixture mean and covariance (moment-matched single Gaussian).
  Vec mean() const;
  Matrix covariance() const;

  /// Largest covariance eigenvalue over components.
  double max_cov_eigenvalue() const;

 private:
  struct ComponentCache {
    Matrix chol_lower;
    Matrix precision;
    double log_weight_norm;
    double min_eigenvalue;
  };

  void check_dim(std::size_t n) const;
  /// Fills log(w_i) − ½log det(2πΣ_i) − ½ q_i(x) for each component.
  void component_log_terms(std::span<const double> x, double* out) const;

  std::vector<Component> components_;
  std::vector<ComponentCache> cache_;
  std::size_t dim_ = 0;
};

/// Exact mixture proportional to p(x)·e^{−R(x)}: conjugate update of every
/// component plus a marginal-likelihood reweighting, renormalized in log
/// space. The constant shift in R cancels.
GaussianMixture tilt(const GaussianMixture& prior, const QuadraticPotential& r);

/// Conservative regularity proxies for a mixture: the subgaussian bound is
/// max_i (|mean_i| + lambda_max(cov_i)) and the score Lipschitz bound is the
/// largest component precision eigenvalue, both floored at one.
RegularityConstants regularity_proxy(const GaussianMixture& p);

}  // namespace almc
