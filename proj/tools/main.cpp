#include <algorithm>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "almc/errors.hpp"
#include "almc/experiment.hpp"

namespace {

using almc::json;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitBlowup = 3;
constexpr int kExitFilesystem = 4;

/// Loads a config by path, or by builtin preset name.
json resolve_config(const std::string& arg) {
  if (std::filesystem::exists(arg)) return almc::load_json_file(arg);
  const auto names = almc::preset_names();
  if (std::find(names.begin(), names.end(), arg) != names.end())
    return almc::preset_config(arg);
  throw almc::ConfigError("no such file or preset: " + arg);
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const almc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const almc::BlowupError& e) {
    std::cerr << "numerical blowup: " << e.what() << '\n';
    return kExitBlowup;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "filesystem error: " << e.what() << '\n';
    return kExitFilesystem;
  } catch (const std::runtime_error& e) {
    std::cerr << "filesystem error: " << e.what() << '\n';
    return kExitFilesystem;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Annealed Langevin Monte Carlo posterior sampling experiments"};
  app.require_subcommand(1);

  std::string config_arg;
  almc::RunOverrides overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> chains;
  std::optional<double> kappa;
  std::optional<double> delta;

  const auto add_override_flags = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Override the sampler seed");
    cmd->add_option("--out", out, "Output root directory");
    cmd->add_option("--chains", chains, "Override the chain count");
    cmd->add_option("--kappa", kappa, "Override the annealing rate");
    cmd->add_option("--delta", delta, "Override the annealing step size");
  };

  CLI::App* run = app.add_subcommand("run", "Run one experiment config or preset");
  run->add_option("config", config_arg, "Config JSON path or preset name")->required();
  add_override_flags(run);

  CLI::App* suite = app.add_subcommand("suite", "Run a suite of configs");
  suite->add_option("suite", config_arg, "Suite JSON path or preset name")->required();
  add_override_flags(suite);

  CLI::App* verify = app.add_subcommand("verify", "Re-hash a run's report bundle");
  verify->add_option("manifest", config_arg, "Path to manifest.json")->required();

  CLI::App* preset = app.add_subcommand("preset", "List or show builtin presets");
  std::string preset_action;
  std::string preset_name;
  preset->add_option("action", preset_action, "list | show")->required();
  preset->add_option("name", preset_name, "Preset name (for show)");

  CLI11_PARSE(app, argc, argv);

  overrides.seed = seed;
  overrides.out = out;
  overrides.chains = chains;
  overrides.kappa = kappa;
  overrides.delta = delta;

  if (run->parsed()) {
    return guarded([&] {
      const json config = resolve_config(config_arg);
      const auto result = almc::run_experiment(
          almc::experiment_config_from_json(config), overrides);
      std::cout << "wrote " << (result.directory / "manifest.json").string() << '\n';
      return kExitOk;
    });
  }

  if (suite->parsed()) {
    return guarded([&] {
      const json suite_json = resolve_config(config_arg);
      if (!suite_json.contains("runs"))
        throw almc::ConfigError("suite: expected a suite config with a 'runs' list");
      const int failures = almc::run_suite(suite_json, overrides);
      if (failures > 0) {
        std::cerr << failures << " suite member(s) failed\n";
        return kExitError;
      }
      return kExitOk;
    });
  }

  if (verify->parsed()) {
    return guarded([&] {
      std::string message;
      const bool ok = almc::verify_manifest(config_arg, &message);
      std::cout << message << '\n';
      return ok ? kExitOk : kExitError;
    });
  }

  if (preset->parsed()) {
    return guarded([&] {
      if (preset_action == "list") {
        for (const auto& name : almc::preset_names()) {
          std::cout << name << (almc::is_suite_preset(name) ? " (suite)" : "") << '\n';
        }
        return kExitOk;
      }
      if (preset_action == "show") {
        if (preset_name.empty())
          throw almc::ConfigError("preset show: missing preset name");
        std::cout << almc::preset_config(preset_name).dump(2) << '\n';
        return kExitOk;
      }
      throw almc::ConfigError("preset: unknown action '" + preset_action + "'");
    });
  }

  return kExitError;
}
