#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "almc/gaussian_mixture.hpp"
#include "almc/potential.hpp"
#include "almc/sample_batch.hpp"

namespace almc {

/// All of the algorithm's knobs.
///
/// The run has two phases. Warm up: T iterations of LMC from gamma toward
/// the log-concave mu_inf = gamma e^{-R}/Z. Annealing: starting at target
/// time T_ws, iterate index i runs down from T_ws*kappa/delta to
/// tau*kappa/delta, where the step at index i uses the target
/// tilt(p_{i delta/kappa}, R). Larger kappa traverses the posterior path
/// more slowly and tracks it more tightly.
struct SamplerConfig {
  /// Annealing delta. Defaults to the coupled scaling kappa^{-1/4}.
  std::optional<double> step_size;
  double rate = 64.0;  // kappa >= 1
  std::int64_t warm_up_iters = 2000;
  double warm_start_time = 2.0;  // T_ws
  /// Annealing stop time tau. Defaults to (T_ws kappa/delta)^{3/4} delta/kappa,
  /// the stopping index used by the tracking analysis.
  std::optional<double> stop_time;
  /// Warm-up step size. Defaults to eps^2 alpha / (beta^2 d) with eps = 0.1,
  /// alpha/beta the strong-convexity/smoothness of -log(gamma e^{-R}),
  /// capped at 1/(4 beta).
  std::optional<double> warm_step_size;
  std::size_t chains = 1;
  std::uint64_t seed = 0;
  /// Ascending target times in [tau, T_ws] at which to emit batches.
  std::vector<double> checkpoint_times;
  /// Pooling window (in annealing steps) per checkpoint; aligned with
  /// checkpoint_times, default 1 (plain snapshot). Windows > 1 pool the
  /// positions of the preceding steps into one batch, materializing the
  /// step-averaged law.
  std::vector<std::size_t> checkpoint_windows;

  double resolved_step_size() const;
  double resolved_stop_time() const;
  double resolved_warm_step(const QuadraticPotential& r) const;
  std::int64_t annealing_start_index() const;
  std::int64_t annealing_stop_index() const;

  void validate() const;
  /// Digest of every field, carried by emitted batches.
  std::string digest() const;
};

struct ChainState {
  Vec position;
  std::int64_t algorithm_iter = 0;
  double target_time = 0.0;
};

struct PhaseStats {
  std::size_t warm_iterations = 0;
  std::size_t anneal_iterations = 0;
  double warm_seconds = 0.0;
  double anneal_seconds = 0.0;
};

/// One Euler-Maruyama update x + delta*drift + sqrt(2 delta)*noise.
/// Non-finite drift raises BlowupError tagged with iterate_index.
Vec lmc_step(const Vec& x, const Vec& drift, double delta, const Vec& noise,
             std::size_t iterate_index = 0);

/// Warm-up phase: chains drawn from gamma, then warm_up_iters LMC steps with
/// drift -x - grad R, returned positioned at target time T_ws.
std::vector<ChainState> warm_start(const QuadraticPotential& r, const SamplerConfig& cfg);

/// Annealing phase from T_ws down to tau; emits a batch at every checkpoint
/// and always a final batch at tau (last element of the result).
std::vector<SampleBatch> anneal(std::vector<ChainState> chains,
                                const GaussianMixture& prior,
                                const QuadraticPotential& r, const SamplerConfig& cfg);

struct AlgorithmResult {
  SampleBatch final;
  std::vector<SampleBatch> checkpoints;  // excludes the final batch
  PhaseStats stats;
};

/// Full pipeline: warm_start then anneal.
AlgorithmResult run_algorithm(const GaussianMixture& prior, const QuadraticPotential& r,
                              const SamplerConfig& cfg);

}  // namespace almc
