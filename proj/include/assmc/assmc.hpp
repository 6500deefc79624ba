#pragma once

// Fixed-subspace AS-SMC: tempered SMC on the extended target over an active
// point and a cloud of N_i inactive points, moved by AS-MH.

#include <functional>
#include <vector>

#include "assmc/asmh.hpp"
#include "assmc/sampler.hpp"

namespace assmc {

struct ActiveParticle : AsmhState {
  double log_weight = 0.0;  // outer log weight
  ProposalPtr proposal;     // q_i under which the cloud is weighted
};

/// Fills a cloud at `a` for stage t: the carried point (if any) goes to
/// `carried_index` with its cached path, the rest are drawn from q_i.
[[nodiscard]] AsmhState build_cloud(const Vector& a, const Vector* carried,
                                    const LogLikPath* carried_path, int carried_index,
                                    int n_points, const Basis& basis,
                                    const ProjectedPrior& projected, const InactiveProposal& q_i,
                                    const TargetModel& model, int t, Engine& rng);

struct ReweightOutcome {
  double log_increment = 0.0;
  bool dead = false;  // every inner weight at stage t is zero
};

/// Stage t-1 -> t weight update, switching the cloud's proposal to q_curr.
/// The proposal-density products are skipped when q_curr is the particle's
/// current proposal, since they cancel.
ReweightOutcome assmc_reweight(ActiveParticle& particle, int t, const ProposalPtr& q_curr);

/// Normalised kappa weights w_{t-1} l_t over the cloud, zero at u.
[[nodiscard]] Vector inactive_adaptation_weights(const ActiveParticle& particle, int t);

/// Per-particle q_{t,i} fitted to the kappa-weighted points, or `fallback`
/// (the prior conditional) for the prior family or degenerate moments.
[[nodiscard]] ProposalPtr adapt_inactive_proposal(const ActiveParticle& particle, int t,
                                                  InactiveFamily family,
                                                  const ProposalPtr& fallback,
                                                  double dof = 5.0);

/// 2.38^2 / d_a times the weighted covariance of the active points,
/// regularised by 1e-10 trace I; identity when the points coincide.
[[nodiscard]] Matrix adapt_active_proposal(const std::vector<ActiveParticle>& particles,
                                           const Vector& weights);

/// One or more AS-MH steps at stage t using the particle's own q_i.
/// Returns the number of accepted steps.
int assmc_move(ActiveParticle& particle, int t, const RandomWalk& q_a,
               const ProjectedPrior& projected, const Basis& basis, const TargetModel& model,
               int moves, AsmhStreams& streams);

enum class EstimatorMode { kSinglePoint, kAllPoints };

/// Posterior expectation of g from a weighted population: either the
/// selected inactive point of each particle, or every point weighted by its
/// normalised inner weight.
[[nodiscard]] Vector estimate_expectation(const std::vector<ActiveParticle>& particles,
                                          const Basis& basis,
                                          const std::function<Vector(const Vector&)>& g,
                                          EstimatorMode mode);

struct AsSmcResult : SamplerResult {
  std::vector<ActiveParticle> particles;
};

/// AS-SMC with the subspace estimated once from the N_a initial prior draws
/// (reused as the initial population) unless options.basis is set.
[[nodiscard]] AsSmcResult run_assmc(const SamplerOptions& options, const TargetModel& model,
                                    const RngStream& stream);

}  // namespace assmc
