#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "almc/gaussian_mixture.hpp"
#include "almc/quadrature.hpp"
#include "almc/sample_batch.hpp"

namespace almc {

enum class DivergenceKind { KL, FisherInfo, TV, W2_1D, ModeWeights };

std::string kind_name(DivergenceKind kind);

/// One measured divergence with its estimator provenance. `values` carries
/// the per-cell breakdown for mode weights; `value` is then the first cell.
struct DivergenceReport {
  DivergenceKind kind = DivergenceKind::KL;
  double value = 0.0;
  std::string estimator;  // quadrature | histogram | sorted-1D | kde-score
  std::string spec;       // grid / bin / smoothing description
  std::optional<double> mc_std_err;
  Vec values;
};

/// KL(rho || pi) by adaptive quadrature over the grid. Requires the grid to
/// hold at least 1 - 1e-8 of rho's mass; otherwise raises CoverageError
/// with the missing-mass estimate.
double kl_quadrature(const GaussianMixture& rho, const GaussianMixture& pi,
                     const GridSpec& grid);

/// FI(rho || pi) = E_rho || grad log rho - grad log pi ||^2, same grid rules.
double fisher_quadrature(const GaussianMixture& rho, const GaussianMixture& pi,
                         const GridSpec& grid);

struct HistogramSpec {
  Vec lo;
  Vec hi;
  std::vector<std::size_t> bins;  // per dimension

  std::size_t dim() const { return lo.size(); }
  std::size_t cell_count() const;
};

HistogramSpec default_histogram(const GaussianMixture& target, std::size_t bins = 200);

/// Histogram TV and smoothed histogram KL(target || empirical), plus a
/// sorted-sample W2 against target quantiles in one dimension.
std::vector<DivergenceReport> empirical_divergences(const SampleBatch& batch,
                                                    const GaussianMixture& target,
                                                    const HistogramSpec& hist);

/// Kernel-score Fisher divergence estimate of the sample law against an
/// analytic target. High variance; reported with the kde-score flag and
/// never used as an acceptance quantity.
DivergenceReport empirical_fisher_kde(const SampleBatch& batch,
                                      const GaussianMixture& target,
                                      std::optional<double> bandwidth = std::nullopt,
                                      std::size_t max_points = 2000);

struct HalfSpaceCell {
  Vec normal;
  double offset = 0.0;      // contains x iff normal . x <= offset
  bool complement = false;  // true flips containment, giving an exact 2-cell split
};
struct BoxCell {
  Vec lo;
  Vec hi;  // contains x iff lo <= x < hi componentwise
};
using PartitionCell = std::variant<HalfSpaceCell, BoxCell>;

struct ModeWeightReport {
  Vec weights;
  Vec std_errors;  // binomial
};

/// Empirical mass per partition cell. Every sample must land in exactly one
/// cell; anything else is rejected as a non-covering or overlapping
/// partition.
ModeWeightReport mode_weights(const SampleBatch& batch,
                              const std::vector<PartitionCell>& partition);

/// Exact mixture mass of the half space {x : normal . x <= offset}.
double halfspace_mass(const GaussianMixture& p, const Vec& normal, double offset);

/// The two-Gaussian posterior of the well-separated-prior instance together
/// with its weight-flipped twin: the flipped law keeps a small Fisher
/// divergence to the true posterior while their KL stays bounded away from
/// zero, so Fisher closeness alone cannot certify mode weights.
struct FlippedPosteriorPair {
  GaussianMixture posterior;
  GaussianMixture flipped;
  double fisher_divergence = 0.0;
  double kl_divergence = 0.0;
};

FlippedPosteriorPair flipped_posterior_example(double ell);

/// Quadrature check of the tilted posterior's mean and second moment
/// against the subgaussian bounds  ||E Y||^2 <= 3 r m^2  and
/// E||Y||^2 <= 9 r m^2 (m + |x*|/2)^2 d + 3 r m^2, with m the documented
/// subgaussian proxy of the prior and r the top curvature of R, clamped to
/// at least one as the source bounds assume.
struct SubgaussianReport {
  Vec posterior_mean;
  double mean_sq_norm = 0.0;
  double second_moment = 0.0;
  double bound_mean_sq = 0.0;
  double bound_second_moment = 0.0;
  double m_proxy = 0.0;
  double curvature = 0.0;
  bool mean_bound_holds = false;
  bool second_moment_bound_holds = false;
};

SubgaussianReport subgaussian_posterior_check(const GaussianMixture& prior,
                                              const QuadraticPotential& r);

}  // namespace almc
