#pragma once

// Experiment runner behind the CLI: JSON run configs, seeded repeats,
// RMSE aggregation and result/trace files.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "assmc/asmh.hpp"
#include "assmc/sampler.hpp"

namespace assmc {

using Json = nlohmann::ordered_json;

/// Config problem tied to a field path (e.g. "schedule.temperatures") or to
/// a line of the config text.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error("config error at " + field + ": " + message), field_(std::move(field)) {}
  [[nodiscard]] const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct ModelConfig {
  std::string name = "plane";  // plane | banana | gauss-cauchy
  Index dim = 25;
  int observations = 100;
  std::uint64_t data_seed = 1;
  double prior_variance = 5000.0;
  Index curved_dims = 3;    // banana
  double curvature = 0.001; // banana
  std::vector<double> sigma{10.0, 50.0};   // gauss-cauchy
  std::vector<double> gamma{1e12, 0.1};    // gauss-cauchy
};

struct ScheduleConfig {
  enum class Kind { kFixed, kLinear, kPilot, kDataBlocks };
  Kind kind = Kind::kLinear;
  std::vector<double> temperatures;  // fixed
  int stages = 25;                   // linear
  int blocks = 10;                   // data blocks
  PilotOptions pilot{};              // pilot
};

struct RunConfig {
  ModelConfig model;
  std::string algorithm = "as-smc";  // smc | as-smc | adaptive-as-smc | as-smc2 | as-mh
  int n_active = 200;
  int n_inactive = 10;
  int moves_per_stage = 1;
  ScheduleConfig schedule;
  GapRule gap_rule{};
  InactiveFamily inactive_proposal = InactiveFamily::kPrior;
  double student_dof = 5.0;
  bool adapt_active_proposal = true;
  ResamplePolicy resample{};
  bool strict_resample_move = false;
  bool freeze_basis = false;
  int asmh_iterations = 10000;
  int asmh_burn_in = 1000;
  std::optional<long long> cost_match_particles;
  std::uint64_t seed = 1;
  int repeats = 10;
  int threads = 0;
  std::optional<std::vector<double>> truth;
  std::string out_dir = "out";
};

[[nodiscard]] RunConfig parse_config(const std::string& text);
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);
[[nodiscard]] Json config_to_json(const RunConfig& config);

[[nodiscard]] TargetModel build_model(const RunConfig& config, const Tempering& tempering);
/// Tempering for the config; a pilot schedule is run once from the seed.
[[nodiscard]] Tempering build_schedule(const RunConfig& config);
[[nodiscard]] SamplerOptions sampler_options(const RunConfig& config, int stages);

/// N_a giving the same likelihood budget as a standard SMC run with
/// `budget_particles` particles over `stages` stages, one move per stage.
[[nodiscard]] int cost_matched_active_particles(const std::string& algorithm,
                                                long long budget_particles, int n_inactive,
                                                int stages);

struct RepeatResult {
  int repeat = 0;
  bool ok = false;
  std::string error;
  Vector posterior_mean;
  Vector posterior_mean_all;
  double log_evidence = 0.0;
  std::vector<double> log_evidence_trace;
  std::vector<Spectrum<double>> spectra;
  long long likelihood_evaluations = 0;
  double parameter_rmse = 0.0;  // sqrt(mean_j (estimate_j - truth_j)^2)
  double acceptance_rate = 0.0;
  double wall_seconds = 0.0;
  std::optional<AsmhChain> chain;
};

struct RunResult {
  RunConfig config;
  int n_active = 0;
  Tempering schedule;
  Vector truth;
  std::vector<RepeatResult> repeats;
  Vector rmse_per_parameter;
  double mean_rmse = 0.0;
  int failed = 0;
};

/// RMSE per parameter over repeats: sqrt(mean_r (estimate_rj - truth_j)^2).
[[nodiscard]] Vector rmse_per_parameter(const std::vector<Vector>& estimates, const Vector& truth);

/// Runs one repeat of the configured algorithm.
[[nodiscard]] RepeatResult run_repeat(const RunConfig& config, const TargetModel& model,
                                      int n_active, int repeat, int threads);

[[nodiscard]] RunResult run_experiment(const RunConfig& config);

/// Deterministic summary; wall times are excluded.
[[nodiscard]] Json result_to_json(const RunResult& result);

/// Writes result.json, timing.json, logz.csv, spectra.csv and, for AS-MH,
/// one chain_<repeat>.csv per repeat.
void write_run_outputs(const RunResult& result, const std::filesystem::path& dir);

/// Spectrum of the prior-sample active subspace estimate; writes
/// spectrum.csv and returns the chosen basis.
[[nodiscard]] Basis spectrum_only(const RunConfig& config);

/// CSV comparison of result.json files sharing the same model and truth.
[[nodiscard]] std::string compare_results(const std::vector<std::filesystem::path>& files);

}  // namespace assmc
