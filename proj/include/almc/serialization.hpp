#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "almc/curve_measure.hpp"
#include "almc/divergence.hpp"
#include "almc/gaussian_mixture.hpp"
#include "almc/potential.hpp"
#include "almc/sample_batch.hpp"
#include "almc/sampler.hpp"

namespace almc {

using json = nlohmann::json;

// Mixtures travel as {dim, components: [{weight, mean, cov}]} with the
// covariance as row-major nested arrays; floats are written in shortest
// round-trip form, so read -> write -> read is exact.
json mixture_to_json(const GaussianMixture& p);
GaussianMixture mixture_from_json(const json& j);

json potential_to_json(const QuadraticPotential& r);
QuadraticPotential potential_from_json(const json& j);

json sampler_config_to_json(const SamplerConfig& cfg);
SamplerConfig sampler_config_from_json(const json& j);

json report_to_json(const DivergenceReport& rep);

json partition_cell_to_json(const PartitionCell& cell);
PartitionCell partition_cell_from_json(const json& j);

json curve_measure_to_json(const CurveMeasure& mu);

/// FNV-1a hex digest of the canonical (sorted-key) dump.
std::string config_hash(const json& j);

json load_json_file(const std::filesystem::path& path);
/// Atomic write: temp file then rename, so the target is valid JSON at
/// every point in time.
void write_json_file(const std::filesystem::path& path, const json& j);

void write_batch_csv(const std::filesystem::path& path, const SampleBatch& batch,
                     const std::string& config_hash_hex);
SampleBatch read_batch_csv(const std::filesystem::path& path);

}  // namespace almc
