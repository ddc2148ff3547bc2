#include "almc/divergence.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "almc/errors.hpp"

namespace almc {

namespace {

constexpr double kCoverageTarget = 1.0 - 1e-8;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Mass of a 1D mixture on (-inf, x].
double mixture_cdf_1d(const GaussianMixture& p, double x) {
  double s = 0.0;
  for (const auto& c : p.components())
    s += c.weight * normal_cdf((x - c.mean[0]) / std::sqrt(c.cov(0, 0)));
  return s;
}

double mixture_quantile_1d(const GaussianMixture& p, double prob, double lo, double hi) {
  while (mixture_cdf_1d(p, lo) > prob) lo -= (hi - lo);
  while (mixture_cdf_1d(p, hi) < prob) hi += (hi - lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mixture_cdf_1d(p, mid) < prob)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-13 * std::max(1.0, std::abs(mid))) break;
  }
  return 0.5 * (lo + hi);
}

void require_coverage(const GaussianMixture& rho, const GridSpec& grid) {
  const double mass = integrate(grid, [&rho](const Vec& x) { return rho.density(x); });
  if (mass < kCoverageTarget) {
    std::ostringstream msg;
    msg << "quadrature grid covers only " << mass << " of the reference mass";
    throw CoverageError(msg.str(), 1.0 - mass);
  }
}

/// Analytic mass of each histogram cell plus a trailing overflow cell.
Vec analytic_cell_masses(const GaussianMixture& target, const HistogramSpec& hist) {
  const std::size_t cells = hist.cell_count();
  Vec masses(cells + 1, 0.0);
  if (hist.dim() == 1) {
    const std::size_t b = hist.bins[0];
    const double w = (hist.hi[0] - hist.lo[0]) / static_cast<double>(b);
    double prev = mixture_cdf_1d(target, hist.lo[0]);
    for (std::size_t i = 0; i < b; ++i) {
      const double edge = hist.lo[0] + w * static_cast<double>(i + 1);
      const double cur = mixture_cdf_1d(target, edge);
      masses[i] = std::max(0.0, cur - prev);
      prev = cur;
    }
  } else {
    // 3x3 Gauss-Legendre per cell; adequate against the coarse TV/KL bins
    static const double gl_nodes[3] = {-0.7745966692414834, 0.0, 0.7745966692414834};
    static const double gl_weights[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    const std::size_t bx = hist.bins[0], by = hist.bins[1];
    const double wx = (hist.hi[0] - hist.lo[0]) / static_cast<double>(bx);
    const double wy = (hist.hi[1] - hist.lo[1]) / static_cast<double>(by);
    Vec x(2);
    for (std::size_t i = 0; i < bx; ++i) {
      const double cx = hist.lo[0] + wx * (static_cast<double>(i) + 0.5);
      for (std::size_t j = 0; j < by; ++j) {
        const double cy = hist.lo[1] + wy * (static_cast<double>(j) + 0.5);
        double m = 0.0;
        for (int a = 0; a < 3; ++a)
          for (int bq = 0; bq < 3; ++bq) {
            x[0] = cx + 0.5 * wx * gl_nodes[a];
            x[1] = cy + 0.5 * wy * gl_nodes[bq];
            m += gl_weights[a] * gl_weights[bq] * target.density(x);
          }
        masses[i * by + j] = m * 0.25 * wx * wy;
      }
    }
  }
  double covered = 0.0;
  for (std::size_t i = 0; i < cells; ++i) covered += masses[i];
  masses[cells] = std::max(0.0, 1.0 - covered);
  return masses;
}

/// Cell index for a sample, or the overflow cell when outside the range.
std::size_t cell_index(const HistogramSpec& hist, std::span<const double> x) {
  std::size_t idx = 0;
  std::size_t stride = 1;
  for (std::size_t d = hist.dim(); d-- > 0;) {
    if (x[d] < hist.lo[d] || x[d] >= hist.hi[d]) return hist.cell_count();
    const double w = (hist.hi[d] - hist.lo[d]) / static_cast<double>(hist.bins[d]);
    std::size_t b = static_cast<std::size_t>((x[d] - hist.lo[d]) / w);
    b = std::min(b, hist.bins[d] - 1);
    idx += b * stride;
    stride *= hist.bins[d];
  }
  return idx;
}

}  // namespace

std::string kind_name(DivergenceKind kind) {
  switch (kind) {
    case DivergenceKind::KL: return "KL";
    case DivergenceKind::FisherInfo: return "FI";
    case DivergenceKind::TV: return "TV";
    case DivergenceKind::W2_1D: return "W2-1D";
    case DivergenceKind::ModeWeights: return "mode-weights";
  }
  return "?";
}

std::size_t HistogramSpec::cell_count() const {
  std::size_t n = 1;
  for (std::size_t b : bins) n *= b;
  return n;
}

double kl_quadrature(const GaussianMixture& rho, const GaussianMixture& pi,
                     const GridSpec& grid) {
  if (rho.dim() != pi.dim())
    throw std::invalid_argument("kl_quadrature: dimension mismatch");
  if (rho.dim() > 2)
    throw std::invalid_argument("kl_quadrature: quadrature supports dim <= 2");
  require_coverage(rho, grid);
  return integrate(grid, [&](const Vec& x) {
    const double lr = rho.log_density(x);
    const double d = std::exp(lr);
    if (d == 0.0) return 0.0;
    return d * (lr - pi.log_density(x));
  });
}

double fisher_quadrature(const GaussianMixture& rho, const GaussianMixture& pi,
                         const GridSpec& grid) {
  if (rho.dim() != pi.dim())
    throw std::invalid_argument("fisher_quadrature: dimension mismatch");
  if (rho.dim() > 2)
    throw std::invalid_argument("fisher_quadrature: quadrature supports dim <= 2");
  require_coverage(rho, grid);
  return integrate(grid, [&](const Vec& x) {
    const double d = std::exp(rho.log_density(x));
    if (d == 0.0) return 0.0;
    const Vec sr = rho.score(x);
    const Vec sp = pi.score(x);
    double n2 = 0.0;
    for (std::size_t i = 0; i < sr.size(); ++i) {
      const double diff = sr[i] - sp[i];
      n2 += diff * diff;
    }
    return d * n2;
  });
}

HistogramSpec default_histogram(const GaussianMixture& target, std::size_t bins) {
  const GridSpec g = default_grid(target);
  HistogramSpec h;
  h.lo = g.lo;
  h.hi = g.hi;
  h.bins.assign(target.dim(), bins);
  return h;
}

std::vector<DivergenceReport> empirical_divergences(const SampleBatch& batch,
                                                    const GaussianMixture& target,
                                                    const HistogramSpec& hist) {
  if (batch.size() == 0) throw std::invalid_argument("empirical_divergences: empty batch");
  if (batch.dim != target.dim() || hist.dim() != target.dim())
    throw std::invalid_argument("empirical_divergences: dimension mismatch");
  if (target.dim() > 2)
    throw std::invalid_argument("empirical_divergences: histogram supports dim <= 2");

  const std::size_t cells = hist.cell_count();
  const std::size_t n = batch.size();
  std::vector<double> counts(cells + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) counts[cell_index(hist, batch.sample(i))] += 1.0;

  const Vec masses = analytic_cell_masses(target, hist);

  std::ostringstream binspec;
  binspec << "bins=" << hist.bins[0];
  if (hist.dim() == 2) binspec << "x" << hist.bins[1];
  binspec << " range=[" << hist.lo[0] << "," << hist.hi[0] << "]";

  std::vector<DivergenceReport> out;

  double tv = 0.0;
  for (std::size_t i = 0; i <= cells; ++i)
    tv += std::abs(counts[i] / static_cast<double>(n) - masses[i]);
  out.push_back({DivergenceKind::TV, 0.5 * tv, "histogram", binspec.str(), {}, {}});

  // KL(target || smoothed empirical); bail out when the occupied bins miss
  // too much of the target mass for the estimate to mean anything.
  double occupied_mass = 0.0;
  for (std::size_t i = 0; i <= cells; ++i)
    if (counts[i] > 0.0) occupied_mass += masses[i];
  if (occupied_mass < 0.5) {
    std::ostringstream msg;
    msg << "histogram KL: occupied bins hold only " << occupied_mass
        << " of the target mass";
    throw CoverageError(msg.str(), 1.0 - occupied_mass);
  }
  const double eps = 1.0 / (10.0 * static_cast<double>(n) * static_cast<double>(cells + 1));
  const double denom = 1.0 + static_cast<double>(cells + 1) * eps;
  double kl = 0.0;
  for (std::size_t i = 0; i <= cells; ++i) {
    if (masses[i] <= 0.0) continue;
    const double q = (counts[i] / static_cast<double>(n) + eps) / denom;
    kl += masses[i] * std::log(masses[i] / q);
  }
  std::ostringstream klspec;
  klspec << binspec.str() << " add-eps=1/(10*N*bins)";
  out.push_back({DivergenceKind::KL, kl, "histogram", klspec.str(), {}, {}});

  if (target.dim() == 1) {
    std::vector<double> sorted(batch.data);
    std::sort(sorted.begin(), sorted.end());
    double lo = hist.lo[0], hi = hist.hi[0];
    double w2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double prob = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
      const double q = mixture_quantile_1d(target, prob, lo, hi);
      const double diff = sorted[i] - q;
      w2 += diff * diff;
    }
    out.push_back({DivergenceKind::W2_1D, std::sqrt(w2 / static_cast<double>(n)),
                   "sorted-1D", "quantile matching", {}, {}});
  }
  return out;
}

DivergenceReport empirical_fisher_kde(const SampleBatch& batch,
                                      const GaussianMixture& target,
                                      std::optional<double> bandwidth,
                                      std::size_t max_points) {
  if (batch.size() == 0) throw std::invalid_argument("empirical_fisher_kde: empty batch");
  const std::size_t d = batch.dim;
  const std::size_t stride = std::max<std::size_t>(1, batch.size() / max_points);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < batch.size(); i += stride) idx.push_back(i);
  const std::size_t n = idx.size();

  double h = bandwidth.value_or(0.0);
  if (h <= 0.0) {
    // Silverman rule on the pooled standard deviation
    double mean = 0.0, var = 0.0;
    for (std::size_t i : idx)
      for (std::size_t c = 0; c < d; ++c) mean += batch.sample(i)[c];
    mean /= static_cast<double>(n * d);
    for (std::size_t i : idx)
      for (std::size_t c = 0; c < d; ++c) {
        const double dv = batch.sample(i)[c] - mean;
        var += dv * dv;
      }
    var /= static_cast<double>(n * d);
    h = 1.06 * std::sqrt(var) * std::pow(static_cast<double>(n), -0.2);
  }

  const double inv_h2 = 1.0 / (h * h);
  double fi = 0.0;
  Vec grad(d);
  for (std::size_t ii = 0; ii < n; ++ii) {
    const auto xi = batch.sample(idx[ii]);
    double wsum = 0.0;
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t jj = 0; jj < n; ++jj) {
      const auto xj = batch.sample(idx[jj]);
      double q = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double dv = xi[c] - xj[c];
        q += dv * dv;
      }
      const double w = std::exp(-0.5 * q * inv_h2);
      wsum += w;
      for (std::size_t c = 0; c < d; ++c) grad[c] += w * (xj[c] - xi[c]) * inv_h2;
    }
    const Vec st = target.score(xi);
    double n2 = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = grad[c] / wsum - st[c];
      n2 += diff * diff;
    }
    fi += n2;
  }
  std::ostringstream spec;
  spec << "kde bandwidth=" << h << " points=" << n;
  return {DivergenceKind::FisherInfo, fi / static_cast<double>(n), "kde-score",
          spec.str(), {}, {}};
}

ModeWeightReport mode_weights(const SampleBatch& batch,
                              const std::vector<PartitionCell>& partition) {
  if (batch.size() == 0) throw std::invalid_argument("mode_weights: empty batch");
  if (partition.empty()) throw std::invalid_argument("mode_weights: empty partition");

  const auto contains = [](const PartitionCell& cell, std::span<const double> x) {
    if (const auto* hs = std::get_if<HalfSpaceCell>(&cell)) {
      if (hs->normal.size() != x.size())
        throw std::invalid_argument("mode_weights: cell dimension mismatch");
      const bool inside = dot(hs->normal, x) <= hs->offset;
      return inside != hs->complement;
    }
    const auto& box = std::get<BoxCell>(cell);
    if (box.lo.size() != x.size())
      throw std::invalid_argument("mode_weights: cell dimension mismatch");
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i] < box.lo[i] || x[i] >= box.hi[i]) return false;
    return true;
  };

  Vec counts(partition.size(), 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto x = batch.sample(i);
    std::size_t hits = 0, last = 0;
    for (std::size_t c = 0; c < partition.size(); ++c) {
      if (contains(partition[c], x)) {
        ++hits;
        last = c;
      }
    }
    if (hits == 0)
      throw std::invalid_argument("mode_weights: partition does not cover a sample");
    if (hits > 1)
      throw std::invalid_argument("mode_weights: partition cells overlap on a sample");
    counts[last] += 1.0;
  }

  const double n = static_cast<double>(batch.size());
  ModeWeightReport rep;
  rep.weights.resize(partition.size());
  rep.std_errors.resize(partition.size());
  for (std::size_t c = 0; c < partition.size(); ++c) {
    const double p = counts[c] / n;
    rep.weights[c] = p;
    rep.std_errors[c] = std::sqrt(std::max(0.0, p * (1.0 - p) / n));
  }
  return rep;
}

double halfspace_mass(const GaussianMixture& p, const Vec& normal, double offset) {
  if (normal.size() != p.dim())
    throw std::invalid_argument("halfspace_mass: dimension mismatch");
  double mass = 0.0;
  for (const auto& c : p.components()) {
    const double mu = dot(normal, c.mean);
    double var = 0.0;
    for (std::size_t i = 0; i < p.dim(); ++i)
      for (std::size_t j = 0; j < p.dim(); ++j)
        var += normal[i] * c.cov(i, j) * normal[j];
    mass += c.weight * normal_cdf((offset - mu) / std::sqrt(var));
  }
  return mass;
}

FlippedPosteriorPair flipped_posterior_example(double ell) {
  if (!(ell >= 2.0))
    throw std::invalid_argument("flipped_posterior_example: ell must be >= 2");
  const double var = ell * ell / (ell * ell + 2.0);
  const double mean_far = -ell;
  const double mean_near = ell * (ell * ell - 2.0) / (ell * ell + 2.0);
  const double w = std::exp(-4.0 + 8.0 / (ell * ell + 2.0));  // light / heavy

  Matrix cov(1, 1);
  cov(0, 0) = var;
  const double z = 1.0 + w;
  GaussianMixture posterior({{1.0 / z, {mean_far}, cov}, {w / z, {mean_near}, cov}});
  GaussianMixture flipped({{w / z, {mean_far}, cov}, {1.0 / z, {mean_near}, cov}});

  const GridSpec grid = default_grid(posterior, 14.0);
  FlippedPosteriorPair pair{posterior, flipped, 0.0, 0.0};
  pair.fisher_divergence = fisher_quadrature(flipped, posterior, grid);
  pair.kl_divergence = kl_quadrature(flipped, posterior, grid);
  return pair;
}

SubgaussianReport subgaussian_posterior_check(const GaussianMixture& prior,
                                              const QuadraticPotential& r) {
  if (prior.dim() > 2)
    throw std::invalid_argument("subgaussian_posterior_check: quadrature supports dim <= 2");
  if (prior.dim() != r.dim())
    throw std::invalid_argument("subgaussian_posterior_check: dimension mismatch");

  // the closed-form tilt only places the grid; moments come from quadrature
  const GridSpec grid = default_grid(prior, tilt(prior, r));
  const auto unnorm = [&](const Vec& x) {
    return std::exp(prior.log_density(x) - r(x));
  };
  const double z = integrate(grid, unnorm);

  const std::size_t d = prior.dim();
  SubgaussianReport rep;
  rep.posterior_mean.resize(d);
  for (std::size_t i = 0; i < d; ++i) {
    rep.posterior_mean[i] =
        integrate(grid, [&](const Vec& x) { return x[i] * unnorm(x); }) / z;
  }
  rep.second_moment =
      integrate(grid, [&](const Vec& x) { return squared_norm(x) * unnorm(x); }) / z;
  rep.mean_sq_norm = squared_norm(rep.posterior_mean);

  rep.m_proxy = regularity_proxy(prior).m_subgaussian;
  rep.curvature = r.curvature_bounds().second;
  // the lemma's constants are stated for regularity constants >= 1
  const double curv = std::max(1.0, rep.curvature);
  const double m2 = rep.m_proxy * rep.m_proxy;
  const double shifted = rep.m_proxy + 0.5 * r.minimizer_norm();
  rep.bound_mean_sq = 3.0 * curv * m2;
  rep.bound_second_moment =
      9.0 * curv * m2 * shifted * shifted * static_cast<double>(d) +
      3.0 * curv * m2;
  rep.mean_bound_holds = rep.mean_sq_norm <= rep.bound_mean_sq + 1e-12;
  rep.second_moment_bound_holds = rep.second_moment <= rep.bound_second_moment + 1e-12;
  return rep;
}

}  // namespace almc
