#pragma once

// AS-SMC^2: each active particle carries an inner SMC over the inactive
// variables whose running evidence estimates the marginal likelihood of a;
// active particles are moved by particle marginal MH.

#include <vector>

#include "assmc/sampler.hpp"

namespace assmc {

struct InnerSmcState {
  Matrix points;       // d_i x N_i
  Matrix paths;        // (T + 1) x N_i
  Vector log_prior_i;  // log p_i(i^n | a)
  Vector log_w;        // normalised log weights w_s
  std::vector<double> stage_log_sums;       // log sum_n w~_s^n for s = 1..stage
  std::vector<std::vector<int>> ancestors;  // one entry per resampling event
  double log_evidence = 0.0;
  int stage = 0;
  double last_ess = 0.0;  // inner ESS right after the latest reweight

  [[nodiscard]] int num_points() const { return static_cast<int>(log_w.size()); }
  [[nodiscard]] bool dead() const {
    return log_evidence == -std::numeric_limits<double>::infinity();
  }
};

/// Draws the stage-0 inner population from p_i(. | a) with uniform weights.
/// A carried point, if given, occupies index 0.
[[nodiscard]] InnerSmcState inner_smc_init(const Vector& a, const Vector* carried,
                                           const Basis& basis, const ProjectedPrior& projected,
                                           const TargetModel& model, int n_inactive,
                                           Engine& rng);

/// Advances the inner weights to stage `stage.stage + 1` and returns
/// log sum_n w~_s^n, which is also added to the running evidence.
double inner_smc_reweight(InnerSmcState& state);

/// Resamples when the inner ESS falls below the policy fraction, then one
/// independence MH sweep per `moves` targeting stage s = state.stage. A null
/// proposal means p_i(. | a). Returns the number of accepted moves.
int inner_smc_resample_move(InnerSmcState& state, const Vector& a, const Basis& basis,
                            const ProjectedPrior& projected, const InactiveProposal* q_i,
                            const TargetModel& model, const ResamplePolicy& policy, int moves,
                            Engine& rng);

/// Full inner SMC for fixed a up to stage t, stopping after the stage-t
/// reweight. proposals[s] (s < t) is the move proposal of stage s; entries
/// may be null.
[[nodiscard]] InnerSmcState inner_smc(const Vector& a, const Basis& basis,
                                      const ProjectedPrior& projected, const TargetModel& model,
                                      int t, int n_inactive,
                                      const std::vector<ProposalPtr>& proposals,
                                      const ResamplePolicy& policy, int moves,
                                      const RngStream& stream);

struct Smc2Particle {
  Vector a;
  InnerSmcState inner;
  double log_weight = 0.0;
};

/// Outer weight update: advances the stored inner SMC by one reweight and
/// multiplies the outer weight by that stage's sum of inner weights.
double assmc2_reweight(Smc2Particle& particle);

/// Pooled moments of every inner population, weighted by outer times inner
/// weights. Returns null (the prior conditional) for the prior family,
/// N_i = 1 or degenerate moments.
[[nodiscard]] ProposalPtr adapt_inner_proposal(const std::vector<Smc2Particle>& particles,
                                               const Vector& outer_weights,
                                               InactiveFamily family, double dof = 5.0);

/// PMMH move at stage t: propose a*, run a fresh inner SMC to stage t and
/// accept on the ratio of evidence estimates. Rejection leaves the particle
/// untouched.
bool aspmmh_move(Smc2Particle& particle, int t, const RandomWalk& q_a, const Basis& basis,
                 const ProjectedPrior& projected, const TargetModel& model, int n_inactive,
                 const std::vector<ProposalPtr>& proposals, const ResamplePolicy& inner_policy,
                 int inner_moves, Engine& move_rng, const RngStream& inner_stream);

struct Smc2Result : SamplerResult {
  std::vector<Smc2Particle> particles;
};

[[nodiscard]] Smc2Result run_assmc2(const SamplerOptions& options, const TargetModel& model,
                                    const RngStream& stream);

/// Likelihood evaluations of one AS-SMC^2 run with one move per stage,
/// excluding inner moves lost to early population death.
[[nodiscard]] long long assmc2_expected_evaluations(int n_active, int n_inactive, int stages);

}  // namespace assmc
