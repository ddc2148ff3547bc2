#include "almc/serialization.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "almc/errors.hpp"
#include "almc/hash.hpp"

namespace almc {

namespace {

Vec vec_from_json(const json& j) { return j.get<Vec>(); }

Matrix matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty())
    throw ConfigError("matrix: expected a non-empty nested array");
  const std::size_t rows = j.size();
  const std::size_t cols = j.at(0).size();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& row = j.at(i);
    if (row.size() != cols) throw ConfigError("matrix: ragged rows");
    for (std::size_t k = 0; k < cols; ++k) m(i, k) = row.at(k).get<double>();
  }
  return m;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

json mixture_to_json(const GaussianMixture& p) {
  json comps = json::array();
  for (const auto& c : p.components()) {
    comps.push_back(
        {{"weight", c.weight}, {"mean", c.mean}, {"cov", matrix_to_json(c.cov)}});
  }
  return {{"dim", p.dim()}, {"components", std::move(comps)}};
}

GaussianMixture mixture_from_json(const json& j) {
  try {
    std::vector<GaussianMixture::Component> comps;
    for (const auto& cj : j.at("components")) {
      GaussianMixture::Component c;
      c.weight = cj.at("weight").get<double>();
      c.mean = vec_from_json(cj.at("mean"));
      c.cov = matrix_from_json(cj.at("cov"));
      comps.push_back(std::move(c));
    }
    GaussianMixture p(std::move(comps));
    if (j.contains("dim") && j.at("dim").get<std::size_t>() != p.dim())
      throw ConfigError("mixture: dim field disagrees with components");
    return p;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("mixture: malformed JSON: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("mixture: ") + e.what());
  }
}

json potential_to_json(const QuadraticPotential& r) {
  return {{"A", matrix_to_json(r.a())}, {"y", r.y()}, {"noise_var", r.noise_var()}};
}

QuadraticPotential potential_from_json(const json& j) {
  try {
    return QuadraticPotential(matrix_from_json(j.at("A")), vec_from_json(j.at("y")),
                              j.at("noise_var").get<double>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("potential: malformed JSON: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("potential: ") + e.what());
  }
}

json sampler_config_to_json(const SamplerConfig& cfg) {
  json j{{"rate", cfg.rate},
         {"warm_up_iters", cfg.warm_up_iters},
         {"warm_start_time", cfg.warm_start_time},
         {"chains", cfg.chains},
         {"seed", cfg.seed},
         {"checkpoint_times", cfg.checkpoint_times}};
  if (cfg.step_size) j["step_size"] = *cfg.step_size;
  if (cfg.stop_time) j["stop_time"] = *cfg.stop_time;
  if (cfg.warm_step_size) j["warm_step_size"] = *cfg.warm_step_size;
  if (!cfg.checkpoint_windows.empty()) j["checkpoint_windows"] = cfg.checkpoint_windows;
  return j;
}

SamplerConfig sampler_config_from_json(const json& j) {
  try {
    SamplerConfig cfg;
    cfg.rate = j.at("rate").get<double>();
    if (j.contains("step_size")) cfg.step_size = j.at("step_size").get<double>();
    cfg.warm_up_iters = j.at("warm_up_iters").get<std::int64_t>();
    cfg.warm_start_time = j.at("warm_start_time").get<double>();
    if (j.contains("stop_time")) cfg.stop_time = j.at("stop_time").get<double>();
    if (j.contains("warm_step_size"))
      cfg.warm_step_size = j.at("warm_step_size").get<double>();
    cfg.chains = j.at("chains").get<std::size_t>();
    cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("checkpoint_times"))
      cfg.checkpoint_times = j.at("checkpoint_times").get<std::vector<double>>();
    if (j.contains("checkpoint_windows"))
      cfg.checkpoint_windows =
          j.at("checkpoint_windows").get<std::vector<std::size_t>>();
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("sampler config: malformed JSON: ") + e.what());
  }
}

json report_to_json(const DivergenceReport& rep) {
  json j{{"kind", kind_name(rep.kind)},
         {"value", rep.value},
         {"estimator", rep.estimator},
         {"spec", rep.spec}};
  if (rep.mc_std_err) j["mc_std_err"] = *rep.mc_std_err;
  if (!rep.values.empty()) j["values"] = rep.values;
  return j;
}

json partition_cell_to_json(const PartitionCell& cell) {
  if (const auto* hs = std::get_if<HalfSpaceCell>(&cell)) {
    json j{{"type", "halfspace"}, {"normal", hs->normal}, {"offset", hs->offset}};
    if (hs->complement) j["complement"] = true;
    return j;
  }
  const auto& box = std::get<BoxCell>(cell);
  return {{"type", "box"}, {"lo", box.lo}, {"hi", box.hi}};
}

PartitionCell partition_cell_from_json(const json& j) {
  try {
    const std::string type = j.at("type").get<std::string>();
    if (type == "halfspace") {
      HalfSpaceCell hs;
      hs.normal = vec_from_json(j.at("normal"));
      hs.offset = j.at("offset").get<double>();
      hs.complement = j.value("complement", false);
      return hs;
    }
    if (type == "box") {
      BoxCell box;
      box.lo = vec_from_json(j.at("lo"));
      box.hi = vec_from_json(j.at("hi"));
      return box;
    }
    throw ConfigError("partition cell: unknown type '" + type + "'");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("partition cell: malformed JSON: ") + e.what());
  }
}

json curve_measure_to_json(const CurveMeasure& mu) {
  json segments = json::array();
  for (const Segment& s : mu.segments)
    segments.push_back({{"a", {s.a[0], s.a[1]}}, {"b", {s.b[0], s.b[1]}}});
  json j{{"segments", std::move(segments)},
         {"thickness", mu.thickness},
         {"connected", mu.connected}};
  if (mu.tilt_potential) j["tilt"] = potential_to_json(*mu.tilt_potential);
  return j;
}

std::string config_hash(const json& j) { return to_hex(fnv1a64(j.dump())); }

json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_batch_csv(const std::filesystem::path& path, const SampleBatch& batch,
                     const std::string& config_hash_hex) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# seed=" << batch.seed << '\n';
  out << "# target_time=" << format_double(batch.target_time) << '\n';
  out << "# config_hash=" << config_hash_hex << '\n';
  for (std::size_t c = 0; c < batch.dim; ++c) {
    if (c) out << ',';
    out << "x_" << (c + 1);
  }
  out << '\n';
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto row = batch.sample(i);
    for (std::size_t c = 0; c < batch.dim; ++c) {
      if (c) out << ',';
      out << format_double(row[c]);
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

SampleBatch read_batch_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  SampleBatch batch;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      const std::string value = line.substr(eq + 1);
      key.erase(0, key.find_first_not_of(' '));
      key.erase(key.find_last_not_of(' ') + 1);
      if (key == "seed") batch.seed = std::stoull(value);
      if (key == "target_time") batch.target_time = std::stod(value);
      if (key == "config_hash") batch.config_hash = value;
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      batch.dim = static_cast<std::size_t>(
          std::count(line.begin(), line.end(), ',') + 1);
      continue;
    }
    std::stringstream row(line);
    std::string cellv;
    while (std::getline(row, cellv, ',')) batch.data.push_back(std::stod(cellv));
  }
  if (!header_seen || batch.dim == 0)
    throw std::runtime_error("malformed batch CSV: " + path.string());
  return batch;
}

}  // namespace almc
