#include "almc/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "almc/curve_measure.hpp"
#include "almc/errors.hpp"

namespace almc {

namespace {

namespace fs = std::filesystem;

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool wants(const DiagnosticsSpec& spec, const std::string& kind) {
  return std::find(spec.divergences.begin(), spec.divergences.end(), kind) !=
         spec.divergences.end();
}

/// Divergence records for one batch against its analytic target.
json batch_divergences(const SampleBatch& batch, const GaussianMixture& prior,
                       const QuadraticPotential& r, const DiagnosticsSpec& spec) {
  json records = json::array();
  const GaussianMixture target =
      batch.target_time > 0.0
          ? tilt(prior.ou_smooth(SmoothTime(batch.target_time)), r)
          : tilt(prior, r);

  const bool density_kinds = wants(spec, "TV") || wants(spec, "KL") || wants(spec, "W2");
  if (density_kinds && target.dim() <= 2) {
    HistogramSpec hist = default_histogram(target, spec.bins);
    if (spec.range) {
      hist.lo = spec.range->first;
      hist.hi = spec.range->second;
    }
    for (const DivergenceReport& rep : empirical_divergences(batch, target, hist)) {
      if (rep.kind == DivergenceKind::TV && !wants(spec, "TV")) continue;
      if (rep.kind == DivergenceKind::KL && !wants(spec, "KL")) continue;
      if (rep.kind == DivergenceKind::W2_1D && !wants(spec, "W2")) continue;
      records.push_back(report_to_json(rep));
    }
  }
  if (!spec.partition.empty()) {
    const ModeWeightReport mw = mode_weights(batch, spec.partition);
    DivergenceReport rep;
    rep.kind = DivergenceKind::ModeWeights;
    rep.value = mw.weights.empty() ? 0.0 : mw.weights[0];
    rep.estimator = "histogram";
    rep.spec = "partition cells=" + std::to_string(spec.partition.size());
    rep.values = mw.weights;
    json j = report_to_json(rep);
    j["std_errors"] = mw.std_errors;
    // analytic cell masses for half-space cells, for side-by-side reading
    json analytic = json::array();
    bool all_halfspace = true;
    for (const PartitionCell& cell : spec.partition) {
      if (const auto* hs = std::get_if<HalfSpaceCell>(&cell)) {
        const double mass = halfspace_mass(target, hs->normal, hs->offset);
        analytic.push_back(hs->complement ? 1.0 - mass : mass);
      } else {
        all_halfspace = false;
      }
    }
    if (all_halfspace) j["analytic"] = analytic;
    records.push_back(std::move(j));
  }
  if (spec.kde_fisher) {
    records.push_back(report_to_json(empirical_fisher_kde(batch, target)));
  }
  return records;
}

json run_analysis(const AnalysisSpec& spec, const ExperimentConfig& cfg) {
  json j{{"type", spec.type}};
  if (spec.type == "flipped-posterior") {
    const FlippedPosteriorPair pair = flipped_posterior_example(spec.ell);
    j["ell"] = spec.ell;
    j["fisher_divergence"] = pair.fisher_divergence;
    j["kl_divergence"] = pair.kl_divergence;
    j["posterior"] = mixture_to_json(pair.posterior);
    j["flipped"] = mixture_to_json(pair.flipped);
  } else if (spec.type == "lsi-segment") {
    const auto [flat, tilted] = segment_instance(spec.ell);
    PiecewiseAffine f;
    f.pieces = {PiecewiseAffine::Piece{{1.0, 0.0}, 0.0}};
    j["ell"] = spec.ell;
    j["flat_ratio"] = lsi_ratio(flat, f);
    j["tilted_ratio"] = lsi_ratio(tilted, f);
    j["instance"] = curve_measure_to_json(flat);
    j["tilted_instance"] = curve_measure_to_json(tilted);
  } else if (spec.type == "lsi-ushape") {
    const UShapeInstance inst = u_shape_instance(spec.ell);
    j["ell"] = spec.ell;
    j["tilted_ratio"] = inst.ratio;
    j["untilted_ratio"] = lsi_ratio(inst.untilted, inst.test_function);
    j["instance"] = curve_measure_to_json(inst.untilted);
    j["tilted_instance"] = curve_measure_to_json(inst.tilted);
  } else if (spec.type == "subgaussian-check") {
    if (!cfg.prior || !cfg.measurement)
      throw ConfigError("subgaussian-check analysis needs prior and measurement");
    const SubgaussianReport rep = subgaussian_posterior_check(*cfg.prior, *cfg.measurement);
    j["mean_sq_norm"] = rep.mean_sq_norm;
    j["second_moment"] = rep.second_moment;
    j["bound_mean_sq"] = rep.bound_mean_sq;
    j["bound_second_moment"] = rep.bound_second_moment;
    j["m_proxy"] = rep.m_proxy;
    j["curvature"] = rep.curvature;
    j["mean_bound_holds"] = rep.mean_bound_holds;
    j["second_moment_bound_holds"] = rep.second_moment_bound_holds;
  } else {
    throw ConfigError("unknown analysis type '" + spec.type + "'");
  }
  return j;
}

void append_curve_rows(std::ofstream& out, double target_time, const json& records) {
  for (const auto& rec : records) {
    const std::string kind = rec.at("kind").get<std::string>();
    if (kind == "mode-weights") {
      const auto& values = rec.at("values");
      const auto& errs = rec.at("std_errors");
      for (std::size_t i = 0; i < values.size(); ++i) {
        out << format_double(target_time) << ",mode-weight-" << i << ","
            << format_double(values.at(i).get<double>()) << ","
            << format_double(errs.at(i).get<double>()) << '\n';
      }
      continue;
    }
    out << format_double(target_time) << ',' << kind << ','
        << format_double(rec.at("value").get<double>()) << ',';
    if (rec.contains("mc_std_err"))
      out << format_double(rec.at("mc_std_err").get<double>());
    out << '\n';
  }
}

}  // namespace

void ExperimentConfig::validate() const {
  if (name.empty()) throw ConfigError("experiment: name must not be empty");
  if (!sampler && analyses.empty())
    throw ConfigError("experiment: nothing to do (no sampler section, no analyses)");
  if (sampler) {
    if (!prior || !measurement)
      throw ConfigError("experiment: sampler runs need prior and measurement");
    if (prior->dim() != measurement->dim())
      throw ConfigError("experiment: prior and measurement dimensions disagree");
    sampler->validate();
    const bool density_kinds = wants(diagnostics, "KL") || wants(diagnostics, "TV") ||
                               wants(diagnostics, "W2") || diagnostics.kde_fisher;
    if (density_kinds && !(sampler->resolved_stop_time() > 0.0))
      throw ConfigError(
          "experiment: density diagnostics need stop_time > 0; the divergence "
          "bounds blow up at t = 0");
    if (diagnostics.bins < 2) throw ConfigError("experiment: needs at least 2 bins");
    if (diagnostics.range) {
      const auto& [lo, hi] = *diagnostics.range;
      if (lo.size() != prior->dim() || hi.size() != prior->dim())
        throw ConfigError("experiment: diagnostics range dimension mismatch");
      for (std::size_t i = 0; i < lo.size(); ++i)
        if (!(lo[i] < hi[i]))
          throw ConfigError("experiment: diagnostics range must be non-empty");
    }
  }
  for (const AnalysisSpec& a : analyses)
    if (a.type != "flipped-posterior" && a.type != "lsi-segment" &&
        a.type != "lsi-ushape" && a.type != "subgaussian-check")
      throw ConfigError("experiment: unknown analysis type '" + a.type + "'");
}

json experiment_config_to_json(const ExperimentConfig& cfg) {
  json j{{"name", cfg.name}};
  if (cfg.prior) j["prior"] = mixture_to_json(*cfg.prior);
  if (cfg.measurement) j["measurement"] = potential_to_json(*cfg.measurement);
  if (cfg.sampler) j["sampler"] = sampler_config_to_json(*cfg.sampler);
  json diag{{"bins", cfg.diagnostics.bins}, {"divergences", cfg.diagnostics.divergences}};
  if (!cfg.diagnostics.partition.empty()) {
    json cells = json::array();
    for (const auto& cell : cfg.diagnostics.partition)
      cells.push_back(partition_cell_to_json(cell));
    diag["partition"] = std::move(cells);
  }
  if (cfg.diagnostics.kde_fisher) diag["kde_fisher"] = true;
  if (cfg.diagnostics.range)
    diag["range"] = {{"lo", cfg.diagnostics.range->first},
                     {"hi", cfg.diagnostics.range->second}};
  j["diagnostics"] = std::move(diag);
  if (!cfg.analyses.empty()) {
    json arr = json::array();
    for (const auto& a : cfg.analyses) arr.push_back({{"type", a.type}, {"ell", a.ell}});
    j["analyses"] = std::move(arr);
  }
  return j;
}

ExperimentConfig experiment_config_from_json(const json& j) {
  try {
    ExperimentConfig cfg;
    cfg.name = j.value("name", std::string("experiment"));
    cfg.output_dir = j.value("output_dir", std::string("runs"));
    const auto resolve = [](const json& node) {
      if (node.is_object() && node.contains("file"))
        return load_json_file(node.at("file").get<std::string>());
      return node;
    };
    if (j.contains("prior")) cfg.prior = mixture_from_json(resolve(j.at("prior")));
    if (j.contains("measurement"))
      cfg.measurement = potential_from_json(resolve(j.at("measurement")));
    if (j.contains("sampler"))
      cfg.sampler = sampler_config_from_json(j.at("sampler"));
    if (j.contains("diagnostics")) {
      const json& d = j.at("diagnostics");
      cfg.diagnostics.bins = d.value("bins", std::size_t{200});
      if (d.contains("divergences"))
        cfg.diagnostics.divergences = d.at("divergences").get<std::vector<std::string>>();
      if (d.contains("partition"))
        for (const auto& cell : d.at("partition"))
          cfg.diagnostics.partition.push_back(partition_cell_from_json(cell));
      cfg.diagnostics.kde_fisher = d.value("kde_fisher", false);
      if (d.contains("range")) {
        cfg.diagnostics.range = std::make_pair(
            d.at("range").at("lo").get<Vec>(), d.at("range").at("hi").get<Vec>());
      }
    }
    if (j.contains("analyses")) {
      for (const auto& a : j.at("analyses")) {
        AnalysisSpec spec;
        spec.type = a.at("type").get<std::string>();
        spec.ell = a.value("ell", 3.0);
        cfg.analyses.push_back(spec);
      }
    }
    cfg.validate();
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config: malformed JSON: ") + e.what());
  }
}

ExperimentResult run_experiment(ExperimentConfig cfg, const RunOverrides& overrides) {
  const char* env_root = std::getenv("ALMC_OUTPUT_ROOT");
  if (overrides.out)
    cfg.output_dir = *overrides.out;
  else if (env_root != nullptr)
    cfg.output_dir = env_root;
  if (cfg.sampler) {
    if (overrides.seed) cfg.sampler->seed = *overrides.seed;
    if (overrides.chains) cfg.sampler->chains = *overrides.chains;
    if (overrides.kappa) cfg.sampler->rate = *overrides.kappa;
    if (overrides.delta) cfg.sampler->step_size = *overrides.delta;
  }
  cfg.validate();

  // the hashed config covers everything that shapes the numbers; output
  // location and environment stay outside so identical runs produce
  // byte-identical bundles wherever they land
  const json config_json = experiment_config_to_json(cfg);
  const std::string hash = config_hash(config_json);

  const fs::path dir = fs::path(cfg.output_dir) / cfg.name;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string());

  json manifest{{"name", cfg.name},
                {"version", kVersion},
                {"config_hash", hash},
                {"config", config_json},
                {"environment",
                 {{"output_root_env", env_root ? json(env_root) : json(nullptr)}}},
                {"checkpoints", json::array()},
                {"analyses", json::array()},
                {"timings_file", "timings.json"}};
  const auto flush = [&]() { write_json_file(dir / "manifest.json", manifest); };
  flush();

  json timings = json::object();
  const double t_start = now_seconds();

  if (cfg.sampler) {
    try {
      const AlgorithmResult result = run_algorithm(*cfg.prior, *cfg.measurement,
                                                   *cfg.sampler);
      manifest["phases"] = {{"warm_iterations", result.stats.warm_iterations},
                            {"anneal_iterations", result.stats.anneal_iterations}};
      timings["warm_seconds"] = result.stats.warm_seconds;
      timings["anneal_seconds"] = result.stats.anneal_seconds;

      std::ofstream curve(dir / "divergences.csv");
      curve << "# config_hash=" << hash << '\n';
      curve << "target_time,kind,value,std_err\n";

      const auto emit = [&](const SampleBatch& batch, const std::string& file) {
        write_batch_csv(dir / file, batch, hash);
        const double t_div = now_seconds();
        json records = batch_divergences(batch, *cfg.prior, *cfg.measurement,
                                         cfg.diagnostics);
        timings["diagnostics_seconds"] =
            timings.value("diagnostics_seconds", 0.0) + (now_seconds() - t_div);
        append_curve_rows(curve, batch.target_time, records);
        return json{{"target_time", batch.target_time},
                    {"file", file},
                    {"samples", batch.size()},
                    {"divergences", std::move(records)}};
      };

      for (std::size_t i = 0; i < result.checkpoints.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "checkpoint_%02zu.csv", i);
        manifest["checkpoints"].push_back(emit(result.checkpoints[i], name));
        flush();
      }
      manifest["final"] = emit(result.final, "final.csv");
      curve.close();
      manifest["divergence_curve"] = "divergences.csv";
      flush();
    } catch (const BlowupError& e) {
      manifest["error"] = {{"kind", "numerical-blowup"},
                           {"chain", e.chain()},
                           {"iteration", e.iteration()},
                           {"message", e.what()}};
      flush();
      write_json_file(dir / "error.json", manifest["error"]);
      throw;
    }
  }

  for (const AnalysisSpec& spec : cfg.analyses) {
    manifest["analyses"].push_back(run_analysis(spec, cfg));
    flush();
  }

  timings["total_seconds"] = now_seconds() - t_start;
  write_json_file(dir / "timings.json", timings);
  return {dir, manifest};
}

int run_suite(const json& suite, const RunOverrides& overrides) {
  json runs;
  try {
    runs = suite.at("runs");
  } catch (const json::exception&) {
    throw ConfigError("suite: missing 'runs' list");
  }
  if (!runs.is_array() || runs.empty())
    throw ConfigError("suite: 'runs' must be a non-empty list");

  const std::string root = overrides.out
                               ? *overrides.out
                               : suite.value("output_root", std::string("runs"));

  int failures = 0;
  std::vector<json> summaries;
  for (const auto& entry : runs) {
    json config_node = entry;
    if (entry.is_object() && entry.contains("file"))
      config_node = load_json_file(entry.at("file").get<std::string>());
    json row;
    try {
      ExperimentConfig cfg = experiment_config_from_json(config_node);
      RunOverrides member = overrides;
      member.out = root;
      const ExperimentResult result = run_experiment(std::move(cfg), member);
      row["name"] = result.manifest.at("name");
      row["status"] = "ok";
      if (result.manifest.contains("config") &&
          result.manifest["config"].contains("sampler"))
        row["kappa"] = result.manifest["config"]["sampler"]["rate"];
      if (result.manifest.contains("final")) {
        for (const auto& rec : result.manifest["final"]["divergences"]) {
          const std::string kind = rec.at("kind").get<std::string>();
          if (kind == "KL") row["final_kl"] = rec.at("value");
          if (kind == "TV") row["final_tv"] = rec.at("value");
        }
      }
    } catch (const std::exception& e) {
      ++failures;
      row["name"] = config_node.is_object() ? config_node.value("name", "?") : "?";
      std::string status = std::string("failed: ") + e.what();
      std::replace(status.begin(), status.end(), ',', ';');
      row["status"] = status;
    }
    summaries.push_back(std::move(row));
  }

  std::error_code ec;
  fs::create_directories(root, ec);
  std::ofstream summary(fs::path(root) / "summary.csv");
  summary << "name,status,kappa,final_kl,final_tv\n";
  for (const auto& row : summaries) {
    summary << row.value("name", std::string("?")) << ','
            << row.value("status", std::string("?")) << ',';
    if (row.contains("kappa")) summary << format_double(row["kappa"].get<double>());
    summary << ',';
    if (row.contains("final_kl")) summary << format_double(row["final_kl"].get<double>());
    summary << ',';
    if (row.contains("final_tv")) summary << format_double(row["final_tv"].get<double>());
    summary << '\n';
  }
  return failures;
}

bool verify_manifest(const std::filesystem::path& manifest_path, std::string* message) {
  const json manifest = load_json_file(manifest_path);
  const fs::path dir = manifest_path.parent_path();
  const std::string recorded = manifest.at("config_hash").get<std::string>();
  const std::string recomputed = config_hash(manifest.at("config"));
  if (recorded != recomputed) {
    if (message) *message = "config hash mismatch: " + recorded + " vs " + recomputed;
    return false;
  }
  const auto check_file = [&](const json& node) {
    const std::string file = node.at("file").get<std::string>();
    const SampleBatch batch = read_batch_csv(dir / file);
    if (batch.config_hash != recorded) {
      if (message)
        *message = file + " carries hash " + batch.config_hash + ", expected " + recorded;
      return false;
    }
    return true;
  };
  if (manifest.contains("checkpoints"))
    for (const auto& cp : manifest.at("checkpoints"))
      if (!check_file(cp)) return false;
  if (manifest.contains("final") && !check_file(manifest.at("final"))) return false;
  if (manifest.contains("divergence_curve")) {
    const std::string file = manifest.at("divergence_curve").get<std::string>();
    std::ifstream in(dir / file);
    std::string line;
    std::getline(in, line);
    const std::string expected = "# config_hash=" + recorded;
    if (line != expected) {
      if (message) *message = file + " does not carry the expected config hash";
      return false;
    }
  }
  if (message) *message = "ok: " + recorded;
  return true;
}

namespace {

json two_mode_preset(const std::string& name, double likelihood_center,
                     std::uint64_t seed, std::size_t chains) {
  // prior N(-3,1)/2 + N(3,1)/2; R(x) = (x - center)^2 / 9, i.e. noise_var 4.5
  json prior{{"dim", 1},
             {"components",
              {{{"weight", 0.5}, {"mean", {-3.0}}, {"cov", {{1.0}}}},
               {{"weight", 0.5}, {"mean", {3.0}}, {"cov", {{1.0}}}}}}};
  json measurement{{"A", {{1.0}}}, {"y", {likelihood_center}}, {"noise_var", 4.5}};
  json sampler{{"step_size", 1e-3},
               {"rate", 64.0},
               {"warm_up_iters", 3000},
               {"warm_start_time", 2.0},
               {"chains", chains},
               {"seed", seed},
               {"checkpoint_times", {0.25, 0.5, 1.0}}};
  json partition = {{{"type", "halfspace"}, {"normal", {1.0}}, {"offset", 0.0}},
                    {{"type", "halfspace"},
                     {"normal", {1.0}},
                     {"offset", 0.0},
                     {"complement", true}}};
  return json{{"name", name},
              {"prior", prior},
              {"measurement", measurement},
              {"sampler", sampler},
              {"diagnostics",
               {{"bins", 200},
                {"divergences", {"TV", "KL", "W2"}},
                {"partition", partition}}}};
}

}  // namespace

std::vector<std::string> preset_names() {
  return {"gaussian-identity", "appendixF-l3", "two-mode-tracking", "appendixF-pair",
          "lsi-instances", "kappa-sweep"};
}

bool is_suite_preset(const std::string& name) { return name == "kappa-sweep"; }

json preset_config(const std::string& name) {
  if (name == "gaussian-identity") {
    json prior{{"dim", 1},
               {"components", {{{"weight", 1.0}, {"mean", {0.0}}, {"cov", {{1.0}}}}}}};
    json measurement{{"A", {{0.0}}}, {"y", {0.0}}, {"noise_var", 1.0}};
    json sampler{{"step_size", 5e-3},
                 {"rate", 1.0},
                 {"warm_up_iters", 1000},
                 {"warm_start_time", 1.0},
                 {"chains", 20000},
                 {"seed", 271828},
                 {"checkpoint_times", json::array()}};
    return json{{"name", "gaussian-identity"},
                {"prior", prior},
                {"measurement", measurement},
                {"sampler", sampler},
                {"diagnostics", {{"bins", 200}, {"divergences", {"TV", "KL", "W2"}}}}};
  }
  if (name == "appendixF-l3") {
    json cfg = two_mode_preset("appendixF-l3", -3.0, 31415, 20000);
    cfg["analyses"] = {{{"type", "flipped-posterior"}, {"ell", 3.0}}};
    return cfg;
  }
  if (name == "two-mode-tracking")
    return two_mode_preset("two-mode-tracking", 3.0, 42, 100000);
  if (name == "appendixF-pair") {
    return json{{"name", "appendixF-pair"},
                {"analyses",
                 {{{"type", "flipped-posterior"}, {"ell", 3.0}},
                  {{"type", "flipped-posterior"}, {"ell", 4.0}}}}};
  }
  if (name == "lsi-instances") {
    return json{{"name", "lsi-instances"},
                {"analyses",
                 {{{"type", "lsi-segment"}, {"ell", 2.0}},
                  {{"type", "lsi-segment"}, {"ell", 3.0}},
                  {{"type", "lsi-ushape"}, {"ell", 3.0}}}}};
  }
  if (name == "kappa-sweep") {
    json runs = json::array();
    for (double kappa : {1.0, 4.0, 16.0, 64.0}) {
      json member = two_mode_preset(
          "two-mode-kappa-" + std::to_string(static_cast<int>(kappa)), 3.0, 7,
          20000);
      member["sampler"]["rate"] = kappa;
      member["sampler"]["stop_time"] = 0.3;  // common target across the sweep
      member["sampler"]["checkpoint_times"] = {0.5, 1.0};
      runs.push_back(std::move(member));
    }
    return json{{"name", "kappa-sweep"}, {"output_root", "runs/kappa-sweep"},
                {"runs", std::move(runs)}};
  }
  throw ConfigError("unknown preset '" + name + "'");
}

}  // namespace almc
