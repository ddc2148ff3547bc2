#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "almc/divergence.hpp"
#include "almc/sampler.hpp"
#include "almc/serialization.hpp"

namespace almc {

inline constexpr const char* kVersion = "0.1.0";

/// Which divergences to measure at every emitted batch, against the
/// analytic target tilt(ou_smooth(prior, t), R).
struct DiagnosticsSpec {
  std::size_t bins = 200;
  std::vector<std::string> divergences = {"TV", "KL", "W2"};
  std::vector<PartitionCell> partition;  // empty: skip mode weights
  bool kde_fisher = false;
  /// Explicit histogram range per dimension; default covers the analytic
  /// target out to 12 standard deviations.
  std::optional<std::pair<Vec, Vec>> range;
};

/// Quadrature-only analyses that need no sampling run.
struct AnalysisSpec {
  std::string type;  // flipped-posterior | lsi-segment | lsi-ushape | subgaussian-check
  double ell = 3.0;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string output_dir = "runs";
  std::optional<GaussianMixture> prior;
  std::optional<QuadraticPotential> measurement;
  std::optional<SamplerConfig> sampler;
  DiagnosticsSpec diagnostics;
  std::vector<AnalysisSpec> analyses;

  void validate() const;
};

/// Command-line overrides applied after the config is loaded.
struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> chains;
  std::optional<double> kappa;
  std::optional<double> delta;
};

json experiment_config_to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const json& j);

struct ExperimentResult {
  std::filesystem::path directory;
  json manifest;
};

/// Runs the configured pipeline and writes the report bundle
/// (manifest.json, per-batch CSVs, divergences.csv) plus a timings.json
/// sidecar that is deliberately kept out of the deterministic bundle.
/// On numerical blowup the manifest records the failing iterate before the
/// error propagates.
ExperimentResult run_experiment(ExperimentConfig cfg, const RunOverrides& overrides = {});

/// Runs every member of a suite, then writes a cross-run summary CSV.
/// Member failures are recorded and do not stop the remaining runs; the
/// return value is the number of failed members.
int run_suite(const json& suite, const RunOverrides& overrides = {});

/// Re-hashes the embedded config and every referenced artifact header.
/// Returns true when everything matches the manifest.
bool verify_manifest(const std::filesystem::path& manifest_path, std::string* message);

std::vector<std::string> preset_names();
bool is_suite_preset(const std::string& name);
json preset_config(const std::string& name);

}  // namespace almc
