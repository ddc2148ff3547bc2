#include "almc/gaussian_mixture.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace almc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)
constexpr double kWeightSumTol = 1e-12;
constexpr double kMinEigenvalue = 1e-12;

double log_sum_exp(const double* terms, std::size_t n) {
  double m = terms[0];
  for (std::size_t i = 1; i < n; ++i) m = std::max(m, terms[i]);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(terms[i] - m);
  return m + std::log(s);
}

}  // namespace

SmoothTime::SmoothTime(double time) : t(time) {
  if (!(time >= 0.0) || !std::isfinite(time))
    throw std::invalid_argument("smooth time must be finite and nonnegative");
}

GaussianMixture::GaussianMixture(std::vector<Component> components)
    : components_(std::move(components)) {
  if (components_.empty())
    throw std::invalid_argument("mixture: needs at least one component");
  dim_ = components_.front().mean.size();
  if (dim_ == 0) throw std::invalid_argument("mixture: zero-dimensional component");

  double weight_sum = 0.0;
  cache_.reserve(components_.size());
  for (const Component& c : components_) {
    if (!(c.weight > 0.0))
      throw std::invalid_argument("mixture: weights must be strictly positive");
    weight_sum += c.weight;
    if (c.mean.size() != dim_ || c.cov.rows() != dim_ || c.cov.cols() != dim_)
      throw std::invalid_argument("mixture: component dimensions disagree");
    const double scale = std::max(1.0, c.cov.max_abs());
    if (!c.cov.is_symmetric(1e-12 * scale))
      throw std::invalid_argument("mixture: covariance not symmetric");
    const SymmetricEigen eig = symmetric_eigen(c.cov);
    if (!(eig.values.front() > kMinEigenvalue))
      throw std::invalid_argument("mixture: covariance eigenvalue below 1e-12 floor");

    ComponentCache cc;
    Cholesky chol(c.cov);
    cc.log_weight_norm =
        std::log(c.weight) - 0.5 * (static_cast<double>(dim_) * kLog2Pi + chol.log_det());
    cc.precision = chol.inverse();
    cc.chol_lower = chol.lower();
    cc.min_eigenvalue = eig.values.front();
    cache_.push_back(std::move(cc));
  }
  if (std::abs(weight_sum - 1.0) > kWeightSumTol)
    throw std::invalid_argument("mixture: weights must sum to one");
}

GaussianMixture GaussianMixture::single(Vec mean, Matrix cov) {
  return GaussianMixture({Component{1.0, std::move(mean), std::move(cov)}});
}

GaussianMixture GaussianMixture::standard(std::size_t dim) {
  return single(Vec(dim, 0.0), Matrix::identity(dim));
}

void GaussianMixture::check_dim(std::size_t n) const {
  if (n != dim_) throw std::invalid_argument("mixture: dimension mismatch");
}

void GaussianMixture::component_log_terms(std::span<const double> x, double* out) const {
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const Component& c = components_[i];
    const Matrix& p = cache_[i].precision;
    double q = 0.0;
    for (std::size_t r = 0; r < dim_; ++r) {
      const double dr = x[r] - c.mean[r];
      double row = 0.0;
      for (std::size_t s = 0; s < dim_; ++s) row += p(r, s) * (x[s] - c.mean[s]);
      q += dr * row;
    }
    out[i] = cache_[i].log_weight_norm - 0.5 * q;
  }
}

double GaussianMixture::log_density(std::span<const double> x) const {
  check_dim(x.size());
  std::vector<double> terms(components_.size());
  component_log_terms(x, terms.data());
  return log_sum_exp(terms.data(), terms.size());
}

Vec GaussianMixture::score(std::span<const double> x) const {
  check_dim(x.size());
  const std::size_t k = components_.size();
  std::vector<double> terms(k);
  component_log_terms(x, terms.data());
  const double lse = log_sum_exp(terms.data(), k);

  Vec out(dim_, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const double r = std::exp(terms[i] - lse);
    if (r == 0.0) continue;
    const Component& c = components_[i];
    const Matrix& p = cache_[i].precision;
    for (std::size_t a = 0; a < dim_; ++a) {
      double s = 0.0;
      for (std::size_t b = 0; b < dim_; ++b) s += p(a, b) * (c.mean[b] - x[b]);
      out[a] += r * s;
    }
  }
  return out;
}

GaussianMixture GaussianMixture::ou_smooth(SmoothTime t) const {
  if (t.t == 0.0) return *this;
  const double decay = std::exp(-t.t);
  const double var_mix = std::exp(-2.0 * t.t);
  std::vector<Component> smoothed;
  smoothed.reserve(components_.size());
  for (const Component& c : components_) {
    Component s;
    s.weight = c.weight;
    s.mean = c.mean;
    for (double& v : s.mean) v *= decay;
    s.cov = var_mix * c.cov;
    for (std::size_t i = 0; i < dim_; ++i) s.cov(i, i) += 1.0 - var_mix;
    smoothed.push_back(std::move(s));
  }
  return GaussianMixture(std::move(smoothed));
}

double GaussianMixture::dt_log_density(SmoothTime t, std::span<const double> x) const {
  check_dim(x.size());
  if (t.t == 0.0)
    throw std::domain_error("dt_log_density: undefined at t = 0");

  const GaussianMixture ps = ou_smooth(t);
  const std::size_t k = components_.size();
  std::vector<double> terms(k);
  ps.component_log_terms(x, terms.data());
  const double lse = log_sum_exp(terms.data(), k);

  const double e2t = std::exp(-2.0 * t.t);
  Vec u(dim_);
  double total = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double r = std::exp(terms[i] - lse);
    if (r == 0.0) continue;
    const Component& orig = components_[i];
    const Component& sm = ps.components_[i];
    const Matrix& p = ps.cache_[i].precision;

    // u = Sigma_t^{-1} (x - m_t)
    for (std::size_t a = 0; a < dim_; ++a) {
      double s = 0.0;
      for (std::size_t b = 0; b < dim_; ++b) s += p(a, b) * (x[b] - sm.mean[b]);
      u[a] = s;
    }

    // Sigma_t' = 2 e^{-2t} (I - Sigma_0); m_t' = -m_t
    double tr = 0.0;
    for (std::size_t a = 0; a < dim_; ++a) {
      tr += p(a, a);
      for (std::size_t b = 0; b < dim_; ++b) tr -= p(a, b) * orig.cov(b, a);
    }
    const double trace_term = -0.5 * 2.0 * e2t * tr;

    double mean_term = 0.0;
    for (std::size_t a = 0; a < dim_; ++a) mean_term += -sm.mean[a] * u[a];

    double quad = 0.0;
    for (std::size_t a = 0; a < dim_; ++a) {
      double row = u[a];
      for (std::size_t b = 0; b < dim_; ++b) row -= orig.cov(a, b) * u[b];
      quad += u[a] * row;
    }
    const double quad_term = 0.5 * 2.0 * e2t * quad;

    total += r * (trace_term + mean_term + quad_term);
  }
  return total;
}

Vec GaussianMixture::posterior_mean(SmoothTime t, std::span<const double> x_t) const {
  check_dim(x_t.size());
  if (t.t == 0.0)
    throw std::domain_error("posterior_mean: undefined at t = 0");

  const double a = std::exp(-t.t);
  const double b2 = 1.0 - a * a;

  const GaussianMixture ps = ou_smooth(t);
  const std::size_t k = components_.size();
  std::vector<double> terms(k);
  ps.component_log_terms(x_t, terms.data());
  const double lse = log_sum_exp(terms.data(), k);

  Vec out(dim_, 0.0);
  Vec rhs(dim_);
  for (std::size_t i = 0; i < k; ++i) {
    const double r = std::exp(terms[i] - lse);
    if (r == 0.0) continue;
    const Component& c = components_[i];
    const Matrix& p0 = cache_[i].precision;

    Matrix lam = p0;
    for (std::size_t d = 0; d < dim_; ++d) lam(d, d) += a * a / b2;
    for (std::size_t d = 0; d < dim_; ++d) {
      double s = (a / b2) * x_t[d];
      for (std::size_t e = 0; e < dim_; ++e) s += p0(d, e) * c.mean[e];
      rhs[d] = s;
    }
    const Vec cond_mean = Cholesky(lam).solve(rhs);
    for (std::size_t d = 0; d < dim_; ++d) out[d] += r * cond_mean[d];
  }
  return out;
}

Vec GaussianMixture::sample(SplitRng& rng) const {
  std::size_t pick = components_.size() - 1;
  const double u = rng.next_uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < components_.size(); ++i) {
    acc += components_[i].weight;
    if (u < acc) {
      pick = i;
      break;
    }
  }
  const Component& c = components_[pick];
  const Matrix& l = cache_[pick].chol_lower;
  Vec z(dim_);
  rng.fill_normal(z.data(), dim_);
  Vec x = c.mean;
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t j = 0; j <= i; ++j) x[i] += l(i, j) * z[j];
  return x;
}

Vec GaussianMixture::mean() const {
  Vec m(dim_, 0.0);
  for (const Component& c : components_)
    for (std::size_t i = 0; i < dim_; ++i) m[i] += c.weight * c.mean[i];
  return m;
}

Matrix GaussianMixture::covariance() const {
  const Vec m = mean();
  Matrix cov(dim_, dim_);
  for (const Component& c : components_)
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = 0; j < dim_; ++j)
        cov(i, j) += c.weight *
                     (c.cov(i, j) + (c.mean[i] - m[i]) * (c.mean[j] - m[j]));
  return cov;
}

double GaussianMixture::max_cov_eigenvalue() const {
  double m = 0.0;
  for (const Component& c : components_)
    m = std::max(m, symmetric_eigen(c.cov).values.back());
  return m;
}

GaussianMixture tilt(const GaussianMixture& prior, const QuadraticPotential& r) {
  if (r.dim() != prior.dim())
    throw std::invalid_argument("tilt: potential dimension mismatch");
  const std::size_t d = prior.dim();
  const std::size_t m = r.measurement_dim();
  const std::size_t k = prior.component_count();

  std::vector<GaussianMixture::Component> out(k);
  std::vector<double> log_w(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& c = prior.component(i);
    const Matrix& p0 = prior.precision(i);

    // conjugate update of the component
    const Matrix lam = p0 + r.hessian();
    Cholesky lam_chol(lam);
    Vec rhs = p0 * c.mean;
    for (std::size_t j = 0; j < d; ++j) rhs[j] += r.linear_term()[j];
    out[i].mean = lam_chol.solve(rhs);
    out[i].cov = lam_chol.inverse();
    out[i].weight = 1.0;  // placeholder until renormalization

    // marginal likelihood of y under x ~ component: N(y; A m, A Sigma Aᵀ + sigma^2 I)
    Matrix s(m, m);
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = 0; b < m; ++b) {
        double v = 0.0;
        for (std::size_t p = 0; p < d; ++p)
          for (std::size_t q = 0; q < d; ++q)
            v += r.a()(a, p) * c.cov(p, q) * r.a()(b, q);
        s(a, b) = v;
      }
    for (std::size_t a = 0; a < m; ++a) s(a, a) += r.noise_var();
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a + 1; b < m; ++b) {
        const double v = 0.5 * (s(a, b) + s(b, a));
        s(a, b) = v;
        s(b, a) = v;
      }
    Vec resid(m);
    for (std::size_t a = 0; a < m; ++a) {
      double v = r.y()[a];
      for (std::size_t p = 0; p < d; ++p) v -= r.a()(a, p) * c.mean[p];
      resid[a] = v;
    }
    Cholesky s_chol(s);
    const Vec sinv_resid = s_chol.solve(resid);
    log_w[i] = std::log(c.weight) - 0.5 * s_chol.log_det() -
               0.5 * dot(resid, sinv_resid);
  }

  const double lse = log_sum_exp(log_w.data(), k);
  for (std::size_t i = 0; i < k; ++i) out[i].weight = std::exp(log_w[i] - lse);
  // nudge the weights so they sum to one exactly despite rounding
  double ws = 0.0;
  for (const auto& c : out) ws += c.weight;
  for (auto& c : out) c.weight /= ws;
  return GaussianMixture(std::move(out));
}

RegularityConstants regularity_proxy(const GaussianMixture& p) {
  double m = 0.0;
  double lip = 0.0;
  for (std::size_t i = 0; i < p.component_count(); ++i) {
    const auto& c = p.component(i);
    const SymmetricEigen eig = symmetric_eigen(c.cov);
    m = std::max(m, norm(c.mean) + eig.values.back());
    lip = std::max(lip, 1.0 / eig.values.front());
  }
  return RegularityConstants{std::max(1.0, m), std::max(1.0, lip), p.dim()};
}

}  // namespace almc
