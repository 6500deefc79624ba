// Command-line front end: run, pilot, compare, spectrum.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "assmc/harness.hpp"

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out_dir;
  bool strict_resample_move = false;
};

assmc::RunConfig load_with_overrides(const std::string& path, const Overrides& o) {
  assmc::RunConfig c = assmc::load_config(path);
  if (o.seed) c.seed = *o.seed;
  if (o.threads) c.threads = *o.threads;
  if (o.out_dir) c.out_dir = *o.out_dir;
  if (o.strict_resample_move) c.strict_resample_move = true;
  return c;
}

int fail(const std::string& kind, const std::string& message, const std::string& field = {}) {
  assmc::Json err;
  err["status"] = "error";
  err["kind"] = kind;
  if (!field.empty()) err["field"] = field;
  err["message"] = message;
  std::cerr << err.dump() << '\n';
  return kind == "config" ? 2 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active-subspace Monte Carlo samplers"};
  app.require_subcommand(1);
  Overrides o;
  std::string config_path;
  std::vector<std::string> result_files;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", o.seed, "Override the config seed");
    sub->add_option("--threads", o.threads, "Worker threads (0: ASSMC_THREADS, then all cores)")
        ->check(CLI::NonNegativeNumber);
    sub->add_option("--out-dir", o.out_dir, "Output directory");
    sub->add_flag("--strict-resample-move", o.strict_resample_move,
                  "Per-particle multinomial ancestor draws, resampling every stage");
  };

  auto* run = app.add_subcommand("run", "Run repeats of a configured experiment");
  run->add_option("config", config_path, "Run config (JSON)")->required();
  add_common(run);

  auto* pilot = app.add_subcommand("pilot", "Run the adaptive pilot and write schedule.json");
  pilot->add_option("config", config_path, "Run config (JSON)")->required();
  add_common(pilot);

  auto* compare = app.add_subcommand("compare", "Tabulate result.json files as CSV");
  compare->add_option("results", result_files, "result.json files")->required();

  auto* spectrum = app.add_subcommand("spectrum", "Active-subspace spectrum from prior draws");
  spectrum->add_option("config", config_path, "Run config (JSON)")->required();
  add_common(spectrum);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    return fail("usage", e.what());
  }

  try {
    if (*run) {
      const auto config = load_with_overrides(config_path, o);
      const auto result = assmc::run_experiment(config);
      assmc::write_run_outputs(result, config.out_dir);
      std::cout << "wrote " << (std::filesystem::path(config.out_dir) / "result.json").string()
                << " (mean RMSE " << result.mean_rmse << ", " << result.failed
                << " failed repeats)\n";
      return result.failed == static_cast<int>(result.repeats.size()) ? 1 : 0;
    }
    if (*pilot) {
      auto config = load_with_overrides(config_path, o);
      if (config.schedule.kind != assmc::ScheduleConfig::Kind::kPilot) {
        config.schedule.kind = assmc::ScheduleConfig::Kind::kPilot;
      }
      const auto schedule = assmc::build_schedule(config);
      assmc::Json out;
      out["type"] = "fixed";
      out["temperatures"] = schedule.temperatures();
      std::filesystem::create_directories(config.out_dir);
      const auto path = std::filesystem::path(config.out_dir) / "schedule.json";
      std::ofstream(path) << out.dump(2) << '\n';
      std::cout << "wrote " << path.string() << " (" << schedule.num_stages() << " stages)\n";
      return 0;
    }
    if (*compare) {
      std::vector<std::filesystem::path> files(result_files.begin(), result_files.end());
      std::cout << assmc::compare_results(files);
      return 0;
    }
    if (*spectrum) {
      const auto config = load_with_overrides(config_path, o);
      const auto basis = assmc::spectrum_only(config);
      std::cout << "active dimension " << basis.active_dim() << "; wrote "
                << (std::filesystem::path(config.out_dir) / "spectrum.csv").string() << '\n';
      return 0;
    }
  } catch (const assmc::ConfigError& e) {
    return fail("config", e.what(), e.field());
  } catch (const std::exception& e) {
    return fail("runtime", e.what());
  }
  return 0;
}
