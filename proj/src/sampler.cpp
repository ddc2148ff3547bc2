#include "almc/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "almc/errors.hpp"
#include "almc/hash.hpp"
#include "almc/parallel.hpp"
#include "almc/rng.hpp"

namespace almc {

namespace {

constexpr double kBlowupGuard = 1e8;
// annealing streams must not collide with the warm-up streams (one per chain)
constexpr std::uint64_t kAnnealStreamBase = 1ull << 32;

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

/// Mixture score flattened for the hot loop: per component the constant
/// log-term, mean and precision, evaluated without heap traffic.
struct ScoreKernel {
  std::size_t dim = 0;
  std::size_t k = 0;
  std::vector<double> consts;  // k
  std::vector<double> means;   // k * dim
  std::vector<double> precs;   // k * dim * dim

  void build(const GaussianMixture& m) {
    dim = m.dim();
    k = m.component_count();
    consts.resize(k);
    means.resize(k * dim);
    precs.resize(k * dim * dim);
    for (std::size_t i = 0; i < k; ++i) {
      consts[i] = m.log_weight_norm(i);
      const auto& c = m.component(i);
      std::copy(c.mean.begin(), c.mean.end(), means.begin() + i * dim);
      const Matrix& p = m.precision(i);
      std::copy(p.data().begin(), p.data().end(), precs.begin() + i * dim * dim);
    }
  }

  // out = grad log p(x); terms is scratch of size k
  void score(const double* x, double* out, double* terms) const {
    if (k == 1) {
      const double* mu = means.data();
      const double* p = precs.data();
      for (std::size_t a = 0; a < dim; ++a) {
        double s = 0.0;
        for (std::size_t b = 0; b < dim; ++b) s += p[a * dim + b] * (mu[b] - x[b]);
        out[a] = s;
      }
      return;
    }
    if (k == 2) {
      // one exp via the pairwise softmax
      double q[2];
      for (std::size_t i = 0; i < 2; ++i) {
        const double* mu = means.data() + i * dim;
        const double* p = precs.data() + i * dim * dim;
        double acc = 0.0;
        for (std::size_t a = 0; a < dim; ++a) {
          double row = 0.0;
          for (std::size_t b = 0; b < dim; ++b) row += p[a * dim + b] * (x[b] - mu[b]);
          acc += (x[a] - mu[a]) * row;
        }
        q[i] = consts[i] - 0.5 * acc;
      }
      const double r1 = 1.0 / (1.0 + std::exp(q[0] - q[1]));
      const double r0 = 1.0 - r1;
      const double* mu0 = means.data();
      const double* mu1 = means.data() + dim;
      const double* p0 = precs.data();
      const double* p1 = precs.data() + dim * dim;
      for (std::size_t a = 0; a < dim; ++a) {
        double s0 = 0.0, s1 = 0.0;
        for (std::size_t b = 0; b < dim; ++b) {
          s0 += p0[a * dim + b] * (mu0[b] - x[b]);
          s1 += p1[a * dim + b] * (mu1[b] - x[b]);
        }
        out[a] = r0 * s0 + r1 * s1;
      }
      return;
    }
    double tmax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
      const double* mu = means.data() + i * dim;
      const double* p = precs.data() + i * dim * dim;
      double q = 0.0;
      for (std::size_t a = 0; a < dim; ++a) {
        double row = 0.0;
        for (std::size_t b = 0; b < dim; ++b) row += p[a * dim + b] * (x[b] - mu[b]);
        q += (x[a] - mu[a]) * row;
      }
      terms[i] = consts[i] - 0.5 * q;
      tmax = std::max(tmax, terms[i]);
    }
    double denom = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      terms[i] = std::exp(terms[i] - tmax);
      denom += terms[i];
    }
    for (std::size_t a = 0; a < dim; ++a) out[a] = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double r = terms[i] / denom;
      if (r == 0.0) continue;
      const double* mu = means.data() + i * dim;
      const double* p = precs.data() + i * dim * dim;
      for (std::size_t a = 0; a < dim; ++a) {
        double s = 0.0;
        for (std::size_t b = 0; b < dim; ++b) s += p[a * dim + b] * (mu[b] - x[b]);
        out[a] += r * s;
      }
    }
  }
};

void check_guard(const double* x, std::size_t dim, std::size_t chain,
                 std::size_t iteration) {
  for (std::size_t a = 0; a < dim; ++a) {
    if (!(std::abs(x[a]) <= kBlowupGuard)) {
      std::ostringstream msg;
      msg << "chain " << chain << " left the admissible region at iteration "
          << iteration << " (|x| > 1e8 or non-finite); reduce the step size";
      throw BlowupError(msg.str(), chain, iteration);
    }
  }
}

}  // namespace

double SamplerConfig::resolved_step_size() const {
  return step_size ? *step_size : std::pow(rate, -0.25);
}

double SamplerConfig::resolved_stop_time() const {
  if (stop_time) return *stop_time;
  const double delta = resolved_step_size();
  const double total = warm_start_time * rate / delta;
  return std::pow(total, 0.75) * delta / rate;
}

double SamplerConfig::resolved_warm_step(const QuadraticPotential& r) const {
  if (warm_step_size) return *warm_step_size;
  const auto [curv_lo, curv_hi] = r.curvature_bounds();
  const double alpha = 1.0 + curv_lo;
  const double beta = 1.0 + curv_hi;
  const double eps2 = 0.01;
  const double d = static_cast<double>(r.dim());
  return std::min(eps2 * alpha / (beta * beta * d), 1.0 / (4.0 * beta));
}

std::int64_t SamplerConfig::annealing_start_index() const {
  return std::llround(warm_start_time * rate / resolved_step_size());
}

std::int64_t SamplerConfig::annealing_stop_index() const {
  return std::llround(resolved_stop_time() * rate / resolved_step_size());
}

void SamplerConfig::validate() const {
  if (step_size && (!(*step_size > 0.0) || !std::isfinite(*step_size)))
    throw ConfigError("sampler: step_size must be positive");
  if (!(rate >= 1.0) || !std::isfinite(rate))
    throw ConfigError("sampler: rate must be >= 1");
  if (warm_up_iters < 0) throw ConfigError("sampler: warm_up_iters must be >= 0");
  if (!(warm_start_time > 0.0))
    throw ConfigError("sampler: warm_start_time must be positive");
  if (chains == 0) throw ConfigError("sampler: needs at least one chain");
  if (warm_step_size && !(*warm_step_size > 0.0))
    throw ConfigError("sampler: warm_step_size must be positive");

  const double tau = resolved_stop_time();
  if (!(tau >= 0.0) || tau > warm_start_time)
    throw ConfigError("sampler: stop_time must lie in [0, warm_start_time]");

  if (!checkpoint_windows.empty() &&
      checkpoint_windows.size() != checkpoint_times.size())
    throw ConfigError("sampler: checkpoint_windows must align with checkpoint_times");
  const double half_step = 0.5 * resolved_step_size() / rate;
  double prev = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < checkpoint_times.size(); ++i) {
    const double t = checkpoint_times[i];
    if (t < prev) throw ConfigError("sampler: checkpoint_times must be ascending");
    prev = t;
    if (t < tau - half_step || t > warm_start_time + half_step)
      throw ConfigError("sampler: checkpoint time outside [stop_time, warm_start_time]");
    if (!checkpoint_windows.empty() && checkpoint_windows[i] == 0)
      throw ConfigError("sampler: checkpoint window must be >= 1");
  }
}

std::string SamplerConfig::digest() const {
  std::ostringstream os;
  os.precision(17);
  os << resolved_step_size() << '|' << rate << '|' << warm_up_iters << '|' << warm_start_time
     << '|' << resolved_stop_time() << '|'
     << (warm_step_size ? *warm_step_size : -1.0) << '|' << chains << '|' << seed;
  for (double t : checkpoint_times) os << '|' << t;
  for (std::size_t w : checkpoint_windows) os << '|' << w;
  return to_hex(fnv1a64(os.str()));
}

Vec lmc_step(const Vec& x, const Vec& drift, double delta, const Vec& noise,
             std::size_t iterate_index) {
  if (x.size() != drift.size() || x.size() != noise.size())
    throw std::invalid_argument("lmc_step: size mismatch");
  for (double v : drift)
    if (!std::isfinite(v))
      throw BlowupError("lmc_step: non-finite drift", 0, iterate_index);
  const double root = std::sqrt(2.0 * delta);
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = x[i] + delta * drift[i] + root * noise[i];
  return out;
}

std::vector<ChainState> warm_start(const QuadraticPotential& r,
                                   const SamplerConfig& cfg) {
  cfg.validate();
  if (cfg.warm_up_iters < 1)
    throw ConfigError("warm_start: needs at least one iteration");

  const std::size_t d = r.dim();
  const double h = cfg.resolved_warm_step(r);
  const double root = std::sqrt(2.0 * h);
  const std::int64_t iters = cfg.warm_up_iters;

  // drift -x - grad R(x) = Mx + b with M = -(I + H)
  const Matrix& hess = r.hessian();
  std::vector<double> m(d * d);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = 0; b < d; ++b)
      m[a * d + b] = -hess(a, b) - (a == b ? 1.0 : 0.0);
  const Vec& lin = r.linear_term();

  std::vector<double> positions(cfg.chains * d);
  parallel_for(cfg.chains, [&](std::size_t begin, std::size_t end) {
    std::vector<double> drift(d);
    for (std::size_t c = begin; c < end; ++c) {
      SplitRng rng(cfg.seed, c);
      double* x = positions.data() + c * d;
      rng.fill_normal(x, d);
      for (std::int64_t it = 0; it < iters; ++it) {
        for (std::size_t a = 0; a < d; ++a) {
          double s = lin[a];
          for (std::size_t b = 0; b < d; ++b) s += m[a * d + b] * x[b];
          drift[a] = s;
        }
        for (std::size_t a = 0; a < d; ++a)
          x[a] += h * drift[a] + root * rng.next_normal();
        check_guard(x, d, c, static_cast<std::size_t>(it));
      }
    }
  });

  const std::int64_t start_index = cfg.annealing_start_index();
  std::vector<ChainState> chains(cfg.chains);
  for (std::size_t c = 0; c < cfg.chains; ++c) {
    chains[c].position.assign(positions.begin() + c * d, positions.begin() + (c + 1) * d);
    chains[c].algorithm_iter = start_index;
    chains[c].target_time = cfg.warm_start_time;
  }
  return chains;
}

std::vector<SampleBatch> anneal(std::vector<ChainState> chains,
                                const GaussianMixture& prior,
                                const QuadraticPotential& r,
                                const SamplerConfig& cfg) {
  cfg.validate();
  if (prior.dim() != r.dim())
    throw std::invalid_argument("anneal: prior and potential dimensions disagree");
  if (chains.size() != cfg.chains)
    throw ConfigError("anneal: chain count does not match config");
  const std::size_t d = prior.dim();
  const double dt_half = 0.5 * cfg.resolved_step_size() / cfg.rate;
  for (const ChainState& s : chains) {
    if (s.position.size() != d)
      throw std::invalid_argument("anneal: chain dimension mismatch");
    if (std::abs(s.target_time - cfg.warm_start_time) > dt_half + 1e-12)
      throw ConfigError("anneal: chains must be positioned at target time T_ws");
  }

  const std::int64_t start = cfg.annealing_start_index();
  const std::int64_t stop = cfg.annealing_stop_index();
  const double delta = cfg.resolved_step_size();
  const double kappa = cfg.rate;
  const double root = std::sqrt(2.0 * delta);
  const std::string digest = cfg.digest();

  // checkpoint index -> batch slots; index `start` is the warm-start state
  struct Recorder {
    std::int64_t first_index;  // lowest iterate index pooled into the batch
    std::size_t window;
    std::size_t batch;
  };
  std::vector<Recorder> recorders;
  std::vector<SampleBatch> batches;
  auto add_checkpoint = [&](double t, std::size_t window) {
    std::int64_t idx = std::llround(t * kappa / delta);
    idx = std::clamp(idx, stop, start);
    window = std::min<std::size_t>(window, static_cast<std::size_t>(start - idx) + 1);
    SampleBatch b;
    b.dim = d;
    b.target_time = static_cast<double>(idx) * delta / kappa;
    b.seed = cfg.seed;
    b.config_hash = digest;
    b.data.assign(cfg.chains * window * d, 0.0);
    recorders.push_back({idx, window, batches.size()});
    batches.push_back(std::move(b));
  };
  for (std::size_t i = 0; i < cfg.checkpoint_times.size(); ++i) {
    const std::size_t w =
        cfg.checkpoint_windows.empty() ? 1 : cfg.checkpoint_windows[i];
    add_checkpoint(cfg.checkpoint_times[i], w);
  }
  add_checkpoint(static_cast<double>(stop) * delta / kappa, 1);  // final batch

  // record the warm-start state for any checkpoint that already covers it
  for (const Recorder& rec : recorders) {
    const std::int64_t hi = rec.first_index + static_cast<std::int64_t>(rec.window) - 1;
    if (start >= rec.first_index && start <= hi) {
      const std::size_t slot = static_cast<std::size_t>(start - rec.first_index);
      for (std::size_t c = 0; c < cfg.chains; ++c) {
        double* dst = batches[rec.batch].data.data() + (slot * cfg.chains + c) * d;
        std::copy(chains[c].position.begin(), chains[c].position.end(), dst);
      }
    }
  }

  const std::int64_t total_steps = start - stop;
  if (total_steps > 0) {
    const std::size_t k = prior.component_count();
    const std::size_t bytes_per_step = (1 + d + d * d) * k * sizeof(double) + 64;
    const std::int64_t window_steps = std::max<std::int64_t>(
        1, static_cast<std::int64_t>((256ull << 20) / bytes_per_step));

    std::vector<double> positions(cfg.chains * d);
    for (std::size_t c = 0; c < cfg.chains; ++c)
      std::copy(chains[c].position.begin(), chains[c].position.end(),
                positions.data() + c * d);

    std::vector<SplitRng> rngs;
    rngs.reserve(cfg.chains);
    for (std::size_t c = 0; c < cfg.chains; ++c)
      rngs.emplace_back(cfg.seed, kAnnealStreamBase + c);

    std::vector<ScoreKernel> kernels;
    // per-step recording slots, rebuilt for each window
    struct Slot {
      std::size_t batch;
      std::size_t slot;
    };
    std::vector<std::vector<Slot>> step_slots;

    std::int64_t i = start;
    while (i > stop) {
      const std::int64_t window = std::min<std::int64_t>(window_steps, i - stop);
      kernels.assign(static_cast<std::size_t>(window), ScoreKernel{});
      step_slots.assign(static_cast<std::size_t>(window), {});
      for (std::int64_t s = 0; s < window; ++s) {
        // step s moves index i-s -> i-s-1 and uses target time (i-s) delta/kappa
        const double t = static_cast<double>(i - s) * delta / kappa;
        kernels[static_cast<std::size_t>(s)].build(prior.ou_smooth(SmoothTime(t)));
        const std::int64_t produced = i - s - 1;
        for (const Recorder& rec : recorders) {
          const std::int64_t hi =
              rec.first_index + static_cast<std::int64_t>(rec.window) - 1;
          if (produced >= rec.first_index && produced <= hi)
            step_slots[static_cast<std::size_t>(s)].push_back(
                {rec.batch, static_cast<std::size_t>(produced - rec.first_index)});
        }
      }

      // grad R(x) = Hx - b with H, b cached flat
      std::vector<double> hess_flat(d * d);
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) hess_flat[a * d + b] = r.hessian()(a, b);
      const Vec& lin = r.linear_term();

      parallel_for(cfg.chains, [&](std::size_t begin, std::size_t end) {
        std::vector<double> terms(k);
        std::vector<double> drift(d);
        for (std::size_t c = begin; c < end; ++c) {
          double* x = positions.data() + c * d;
          SplitRng& rng = rngs[c];
          for (std::int64_t s = 0; s < window; ++s) {
            kernels[static_cast<std::size_t>(s)].score(x, drift.data(), terms.data());
            for (std::size_t a = 0; a < d; ++a) {
              double g = -lin[a];
              for (std::size_t b = 0; b < d; ++b) g += hess_flat[a * d + b] * x[b];
              drift[a] -= g;
            }
            for (std::size_t aidx = 0; aidx < d; ++aidx)
              x[aidx] += delta * drift[aidx] + root * rng.next_normal();
            check_guard(x, d, c, static_cast<std::size_t>(i - s));
            for (const Slot& sl : step_slots[static_cast<std::size_t>(s)]) {
              double* dst =
                  batches[sl.batch].data.data() + (sl.slot * cfg.chains + c) * d;
              std::copy(x, x + d, dst);
            }
          }
        }
      });
      i -= window;
    }

    for (std::size_t c = 0; c < cfg.chains; ++c)
      std::copy(positions.data() + c * d, positions.data() + (c + 1) * d,
                chains[c].position.begin());
  }

  return batches;
}

AlgorithmResult run_algorithm(const GaussianMixture& prior, const QuadraticPotential& r,
                              const SamplerConfig& cfg) {
  AlgorithmResult out;
  const double t0 = now_seconds();
  std::vector<ChainState> chains = warm_start(r, cfg);
  const double t1 = now_seconds();
  std::vector<SampleBatch> batches = anneal(std::move(chains), prior, r, cfg);
  const double t2 = now_seconds();

  out.stats.warm_iterations = static_cast<std::size_t>(cfg.warm_up_iters);
  out.stats.anneal_iterations =
      static_cast<std::size_t>(cfg.annealing_start_index() - cfg.annealing_stop_index());
  out.stats.warm_seconds = t1 - t0;
  out.stats.anneal_seconds = t2 - t1;

  out.final = std::move(batches.back());
  batches.pop_back();
  out.checkpoints = std::move(batches);
  return out;
}

}  // namespace almc
