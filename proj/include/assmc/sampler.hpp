#pragma once

// Options and results shared by the SMC samplers.

#include <optional>
#include <string>
#include <vector>

#include "assmc/proposals.hpp"
#include "assmc/smc_core.hpp"
#include "assmc/subspace.hpp"

namespace assmc {

struct SamplerOptions {
  int n_active = 200;   // N_a, or N for the standard sampler
  int n_inactive = 10;  // N_i
  int moves_per_stage = 1;
  ResamplePolicy resample{};
  /// Ancestors drawn per particle by multinomial sampling inside the move,
  /// as the algorithm listings write it, instead of one stratified pass.
  bool per_particle_ancestors = false;
  InactiveFamily inactive_family = InactiveFamily::kPrior;
  double student_dof = 5.0;
  bool adapt_active_proposal = true;
  GapRule gap_rule{};
  /// Fixed basis; when absent it is estimated from the initial prior draws.
  std::optional<Basis> basis;
  /// Run stages 1..stop_stage only; -1 runs every stage.
  int stop_stage = -1;
  int threads = 1;
  /// Adaptive AS-SMC only: skip basis re-estimation and reprojection.
  bool freeze_basis = false;
};

struct StageDiagnostics {
  int stage = 0;
  double ess = 0.0;
  bool resampled = false;
  double acceptance_rate = 0.0;
  Index active_dim = 0;
  int dead_particles = 0;     // particles whose inner weights all vanished
  double mean_inner_ess = 0;  // AS-SMC^2 only
};

struct ReprojectionDiagnostics {
  int stage = 0;
  double max_abs_weight_change = 0.0;
  double ess_before = 0.0;
  double ess_after = 0.0;
  double max_reconstruction_error = 0.0;
  Index active_dim_before = 0;
  Index active_dim_after = 0;
};

struct SamplerResult {
  std::string algorithm;
  Vector posterior_mean;      // one inactive point per active particle
  Vector posterior_mean_all;  // every inactive point, inner-weighted
  double log_evidence = 0.0;
  std::vector<double> log_evidence_trace;  // entry t is log Z_t
  std::vector<StageDiagnostics> stages;
  std::vector<Spectrum<double>> spectra;   // initial estimate, then one per stage when adaptive
  std::vector<ReprojectionDiagnostics> reprojections;
  long long likelihood_evaluations = 0;
  Basis basis;              // final basis
  Matrix samples;           // d x N, one theta per particle
  Vector weights;           // normalised outer weights
};

/// Clamps the requested stop stage to [0, T].
[[nodiscard]] inline int final_stage(const SamplerOptions& options, int num_stages) {
  if (options.stop_stage < 0) return num_stages;
  if (options.stop_stage > num_stages) throw Error("stop_stage exceeds the number of stages");
  return options.stop_stage;
}

/// log(exp(num) / exp(den)) with an impossible numerator mapping to -inf.
[[nodiscard]] inline double log_ratio(double num, double den) {
  if (num == -std::numeric_limits<double>::infinity()) return num;
  return num - den;
}

}  // namespace assmc
