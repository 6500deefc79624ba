#pragma once

// AS-SMC with the subspace re-estimated at every stage. Particles are carried
// into each new basis by a conditional-IS reprojection with unit weight;
// transitions to and from an empty inactive block collapse to plain SMC.

#include "assmc/assmc.hpp"

namespace assmc {

/// Subspace from the doubly weighted gradients of log l_{1:t} at every
/// inactive point of the stage-(t-1) population. A split with no inactive
/// directions is returned as the identity basis.
[[nodiscard]] Basis reestimate_basis(const std::vector<ActiveParticle>& particles,
                                     const Basis& basis, const TargetModel& model, int t,
                                     const GapRule& rule);

struct ReprojectOutcome {
  double reconstruction_error = 0.0;  // max |theta_new - theta_old| at the carried point
};

/// Moves a particle from `old_basis` to `new_basis`: the selected point is
/// transformed exactly, the other N_i - 1 points are redrawn from kappa at the
/// new active point, and inner weights are recomputed at stage t-1 under
/// kappa. The outer weight is not touched. `n_inactive` is the cloud size
/// used when the new basis has inactive directions; otherwise one empty point.
ReprojectOutcome reproject(ActiveParticle& particle, const Basis& old_basis,
                           const Basis& new_basis, const ProjectedPrior& new_projected,
                           const ProposalPtr& kappa, const TargetModel& model, int t,
                           int n_inactive, Engine& rng);

enum class InactiveTransition { kNone, kToZero, kFromZero, kZeroZero };

[[nodiscard]] InactiveTransition classify_transition(const Basis& old_basis,
                                                     const Basis& new_basis);

/// Reprojection specialised to the transitions where one side has no
/// inactive variables; behaves exactly as reproject.
ReprojectOutcome handle_no_inactive(ActiveParticle& particle, InactiveTransition direction,
                                    const Basis& old_basis, const Basis& new_basis,
                                    const ProjectedPrior& new_projected, const ProposalPtr& kappa,
                                    const TargetModel& model, int t, int n_inactive,
                                    Engine& rng);

/// Weight update after reprojection: numerator at (l_{1:t}, q_curr),
/// denominator at (l_{1:t-1}, kappa), with kappa the particle's proposal.
inline ReweightOutcome adaptive_reweight(ActiveParticle& particle, int t,
                                         const ProposalPtr& q_curr) {
  return assmc_reweight(particle, t, q_curr);
}

[[nodiscard]] AsSmcResult run_adaptive_assmc(const SamplerOptions& options,
                                             const TargetModel& model, const RngStream& stream);

}  // namespace assmc
