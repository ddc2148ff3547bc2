#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace almc {

/// Multi-chain sample snapshot, tagged with the target time at which it was
/// recorded. Rows are reproducible bit for bit from (config, seed).
struct SampleBatch {
  std::size_t dim = 0;
  std::vector<double> data;  // row-major, size() * dim entries
  double target_time = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;

  std::size_t size() const { return dim == 0 ? 0 : data.size() / dim; }
  std::span<const double> sample(std::size_t i) const {
    return {data.data() + i * dim, dim};
  }
};

}  // namespace almc
