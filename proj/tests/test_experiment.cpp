#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "almc/errors.hpp"
#include "almc/experiment.hpp"

using namespace almc;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& leaf) {
  const fs::path dir = fs::temp_directory_path() / "almc_exp_tests" / leaf;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

json small_gaussian_config(const std::string& name) {
  json cfg = preset_config("gaussian-identity");
  cfg["name"] = name;
  cfg["sampler"]["chains"] = 4000;
  cfg["sampler"]["warm_up_iters"] = 400;
  return cfg;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ALMC_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

}  // namespace

TEST_SUITE("experiment") {

TEST_CASE("gaussian identity run produces a coherent bundle") {
  const fs::path out = scratch_dir("identity");
  RunOverrides overrides;
  overrides.out = out.string();
  const auto result = run_experiment(
      experiment_config_from_json(small_gaussian_config("identity-test")), overrides);

  CHECK(fs::exists(result.directory / "manifest.json"));
  CHECK(fs::exists(result.directory / "final.csv"));
  CHECK(fs::exists(result.directory / "divergences.csv"));
  CHECK(fs::exists(result.directory / "timings.json"));

  const json manifest = load_json_file(result.directory / "manifest.json");
  CHECK(manifest.at("version").get<std::string>() == kVersion);
  double tv = -1.0;
  for (const auto& rec : manifest.at("final").at("divergences"))
    if (rec.at("kind") == "TV") tv = rec.at("value").get<double>();
  CHECK(tv >= 0.0);
  CHECK(tv < 0.05);

  std::string message;
  CHECK(verify_manifest(result.directory / "manifest.json", &message));

  SUBCASE("a tampered manifest hash fails verification") {
    json bad = manifest;
    bad["config_hash"] = "0000000000000000";
    write_json_file(result.directory / "manifest.json", bad);
    CHECK_FALSE(verify_manifest(result.directory / "manifest.json", &message));
  }
}

TEST_CASE("identical configs give byte-identical bundles in different directories") {
  const fs::path out_a = scratch_dir("det_a");
  const fs::path out_b = scratch_dir("det_b");
  const json cfg = small_gaussian_config("det-test");
  RunOverrides oa, ob;
  oa.out = out_a.string();
  ob.out = out_b.string();
  const auto ra = run_experiment(experiment_config_from_json(cfg), oa);
  const auto rb = run_experiment(experiment_config_from_json(cfg), ob);

  for (const char* file : {"manifest.json", "final.csv", "divergences.csv"}) {
    std::ifstream fa(ra.directory / file, std::ios::binary);
    std::ifstream fb(rb.directory / file, std::ios::binary);
    const std::string ca((std::istreambuf_iterator<char>(fa)),
                         std::istreambuf_iterator<char>());
    const std::string cb((std::istreambuf_iterator<char>(fb)),
                         std::istreambuf_iterator<char>());
    CHECK(ca == cb);
    CHECK_FALSE(ca.empty());
  }
}

TEST_CASE("override flags reach the sampler config") {
  const fs::path out = scratch_dir("override");
  RunOverrides overrides;
  overrides.out = out.string();
  overrides.seed = 777;
  overrides.chains = 512;
  overrides.kappa = 2.0;
  const auto result = run_experiment(
      experiment_config_from_json(small_gaussian_config("override-test")), overrides);
  const json cfg = result.manifest.at("config");
  CHECK(cfg.at("sampler").at("seed").get<std::uint64_t>() == 777);
  CHECK(cfg.at("sampler").at("chains").get<std::size_t>() == 512);
  CHECK(cfg.at("sampler").at("rate").get<double>() == 2.0);
}

TEST_CASE("analyses-only experiments write their records") {
  const fs::path out = scratch_dir("analyses");
  RunOverrides overrides;
  overrides.out = out.string();
  const auto result = run_experiment(
      experiment_config_from_json(preset_config("appendixF-pair")), overrides);
  const auto& analyses = result.manifest.at("analyses");
  REQUIRE(analyses.size() == 2);
  CHECK(analyses[0].at("type") == "flipped-posterior");
  CHECK(analyses[0].at("fisher_divergence").get<double>() <
        analyses[0].at("kl_divergence").get<double>());
}

TEST_CASE("config validation failures") {
  json cfg = small_gaussian_config("invalid");
  cfg["sampler"]["step_size"] = -5e-3;
  CHECK_THROWS_AS(experiment_config_from_json(cfg), ConfigError);

  json no_work{{"name", "empty"}};
  CHECK_THROWS_AS(experiment_config_from_json(no_work), ConfigError);

  // density diagnostics at tau = 0 are refused: the bounds diverge at t = 0
  json zero_tau = small_gaussian_config("zero-tau");
  zero_tau["sampler"]["stop_time"] = 0.0;
  CHECK_THROWS_AS(experiment_config_from_json(zero_tau), ConfigError);
}

TEST_CASE("suite runs keep going past failures and summarize") {
  const fs::path out = scratch_dir("suite");
  json good = small_gaussian_config("suite-good");
  json bad = small_gaussian_config("suite-bad");
  bad["sampler"]["warm_step_size"] = 1e9;  // guaranteed blowup
  const json suite{{"name", "mini"}, {"runs", {good, bad}}};
  RunOverrides overrides;
  overrides.out = out.string();
  const int failures = run_suite(suite, overrides);
  CHECK(failures == 1);
  CHECK(fs::exists(out / "suite-good" / "manifest.json"));
  CHECK(fs::exists(out / "summary.csv"));

  std::ifstream summary(out / "summary.csv");
  std::string text((std::istreambuf_iterator<char>(summary)),
                   std::istreambuf_iterator<char>());
  CHECK(text.find("suite-good,ok") != std::string::npos);
  CHECK(text.find("suite-bad,failed") != std::string::npos);

  SUBCASE("empty suites are config errors") {
    const json empty{{"name", "none"}, {"runs", json::array()}};
    CHECK_THROWS_AS(run_suite(empty, overrides), ConfigError);
  }
}

TEST_CASE("the output-root environment variable is honored and recorded") {
  const fs::path out = scratch_dir("envroot");
  setenv("ALMC_OUTPUT_ROOT", out.c_str(), 1);
  const auto result =
      run_experiment(experiment_config_from_json(small_gaussian_config("env-test")));
  unsetenv("ALMC_OUTPUT_ROOT");
  CHECK(result.directory == out / "env-test");
  CHECK(result.manifest.at("environment").at("output_root_env").get<std::string>() ==
        out.string());
  // an explicit --out wins over the environment
  setenv("ALMC_OUTPUT_ROOT", "/definitely/not/used", 1);
  RunOverrides overrides;
  overrides.out = (out / "explicit").string();
  const auto result2 =
      run_experiment(experiment_config_from_json(small_gaussian_config("env-test")), overrides);
  unsetenv("ALMC_OUTPUT_ROOT");
  CHECK(result2.directory == out / "explicit" / "env-test");
}

TEST_CASE("an explicit diagnostics range overrides the default histogram") {
  const fs::path out = scratch_dir("range");
  json cfg = small_gaussian_config("range-test");
  cfg["diagnostics"]["range"] = {{"lo", {-4.0}}, {"hi", {4.0}}};
  RunOverrides overrides;
  overrides.out = out.string();
  const auto result = run_experiment(experiment_config_from_json(cfg), overrides);
  bool found = false;
  for (const auto& rec : result.manifest.at("final").at("divergences")) {
    if (rec.at("kind") != "TV") continue;
    found = true;
    CHECK(rec.at("spec").get<std::string>().find("range=[-4,4]") != std::string::npos);
  }
  CHECK(found);

  json bad = cfg;
  bad["diagnostics"]["range"] = {{"lo", {4.0}}, {"hi", {-4.0}}};
  CHECK_THROWS_AS(experiment_config_from_json(bad), ConfigError);
}

TEST_CASE("lsi analyses export the instance geometry") {
  const fs::path out = scratch_dir("lsi");
  json cfg{{"name", "lsi-export"},
           {"analyses", {{{"type", "lsi-segment"}, {"ell", 1.0}}}}};
  RunOverrides overrides;
  overrides.out = out.string();
  const auto result = run_experiment(experiment_config_from_json(cfg), overrides);
  const auto& rec = result.manifest.at("analyses").at(0);
  CHECK(rec.at("instance").at("segments").size() == 1);
  CHECK(rec.at("tilted_instance").contains("tilt"));
  CHECK(rec.at("flat_ratio").get<double>() > rec.at("tilted_ratio").get<double>());
}

TEST_CASE("scaled-down kappa sweep emits a monotone summary") {
  const fs::path out = scratch_dir("sweep");
  RunOverrides overrides;
  overrides.out = out.string();
  overrides.chains = 2000;
  const int failures = run_suite(preset_config("kappa-sweep"), overrides);
  CHECK(failures == 0);

  std::ifstream summary(out / "summary.csv");
  REQUIRE(summary.good());
  std::string line;
  std::getline(summary, line);  // header
  std::vector<std::pair<double, double>> rows;  // (kappa, kl)
  while (std::getline(summary, line)) {
    std::stringstream row(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) fields.push_back(field);
    REQUIRE(fields.size() >= 4);
    CHECK(fields[1] == "ok");
    rows.emplace_back(std::stod(fields[2]), std::stod(fields[3]));
  }
  REQUIRE(rows.size() == 4);
  std::sort(rows.begin(), rows.end());
  // generous noise allowance at this chain count; the true gaps are large
  for (std::size_t i = 0; i + 1 < rows.size(); ++i)
    CHECK(rows[i + 1].second <= rows[i].second + 0.05);
}

TEST_CASE("presets are listed and well formed") {
  const auto names = preset_names();
  CHECK(names.size() >= 5);
  for (const auto& name : names) {
    const json cfg = preset_config(name);
    if (is_suite_preset(name)) {
      CHECK(cfg.contains("runs"));
    } else {
      CHECK_NOTHROW(experiment_config_from_json(cfg));
    }
  }
  CHECK_THROWS_AS(preset_config("no-such-preset"), ConfigError);
}

TEST_CASE("cli exit codes") {
  const fs::path out = scratch_dir("cli");

  SUBCASE("malformed config exits 2") {
    const fs::path bad = out / "bad.json";
    {
      std::ofstream f(bad);
      f << "{\"name\": \"broken\", \"sampler\": {\"step_size\": -1}}";
    }
    CHECK(run_cli("run " + bad.string()) == 2);
  }
  SUBCASE("missing config exits 2") {
    CHECK(run_cli("run /nonexistent/nowhere.json") == 2);
  }
  SUBCASE("numerical blowup exits 3 and records the failing iterate") {
    const fs::path boom = out / "boom.json";
    json cfg = small_gaussian_config("boom");
    cfg["sampler"]["chains"] = 8;
    cfg["sampler"]["warm_step_size"] = 1e9;
    {
      std::ofstream f(boom);
      f << cfg.dump();
    }
    CHECK(run_cli("run " + boom.string() + " --out " + (out / "boomrun").string()) == 3);
    const json manifest = load_json_file(out / "boomrun" / "boom" / "manifest.json");
    CHECK(manifest.at("error").at("kind") == "numerical-blowup");
    CHECK(manifest.at("error").contains("iteration"));
    CHECK(fs::exists(out / "boomrun" / "boom" / "error.json"));
  }
  SUBCASE("preset tooling works end to end") {
    CHECK(run_cli("preset list") == 0);
    CHECK(run_cli("preset show appendixF-l3") == 0);
    CHECK(run_cli("preset show nope") == 2);
  }
  SUBCASE("empty suite exits 2") {
    const fs::path empty = out / "empty_suite.json";
    {
      std::ofstream f(empty);
      f << R"({"name": "none", "runs": []})";
    }
    CHECK(run_cli("suite " + empty.string()) == 2);
  }
  SUBCASE("unwritable output root exits 4") {
    const fs::path cfg_path = out / "fs.json";
    {
      std::ofstream f(cfg_path);
      f << small_gaussian_config("fs-test").dump();
    }
    CHECK(run_cli("run " + cfg_path.string() + " --out /proc/almc_forbidden") == 4);
  }
  SUBCASE("run by preset name honors overrides and verify passes") {
    const std::string run_out = (out / "preset_run").string();
    CHECK(run_cli("run gaussian-identity --chains 2000 --out " + run_out) == 0);
    CHECK(run_cli("verify " + run_out + "/gaussian-identity/manifest.json") == 0);
  }
}

}  // TEST_SUITE
