#pragma once

// Pseudo-marginal Metropolis-Hastings on the active variables. The marginal
// likelihood of a is replaced by an importance-sampling average over a cloud
// of inactive points drawn from q_i.

#include <iosfwd>
#include <optional>
#include <vector>

#include "assmc/model.hpp"
#include "assmc/proposals.hpp"
#include "assmc/smc_core.hpp"

namespace assmc {

/// An active point with its cloud of inactive points. Stage log-likelihood
/// paths are cached per point so that later stages cost no evaluations.
struct AsmhState {
  Vector a;
  Matrix inactive;    // d_i x N_i
  Matrix paths;       // (T + 1) x N_i, column n is the LogLikPath of point n
  Vector log_prior_i; // log p_i(i^n | a)
  Vector log_q_i;     // log q_i(i^n | a) under the proposal that owns the cloud
  Vector log_w;       // inner log unnormalised weights at the current stage
  int u = 0;
  double log_estimate = 0.0;  // log of the mean of exp(log_w)

  [[nodiscard]] int num_points() const { return static_cast<int>(log_w.size()); }
  [[nodiscard]] Vector point(Index n) const { return inactive.col(n); }
  [[nodiscard]] Vector theta(const Basis& basis, Index n) const {
    return basis.reconstruct(a, inactive.col(n));
  }
};

/// log of the mean of exp(values).
[[nodiscard]] double log_mean_exp(const Vector& values);

/// log p_i + log l_{1:t} - log q_i. With q_i = p_i the densities are skipped
/// so the weight is exactly the stage log-likelihood.
[[nodiscard]] inline double inner_log_weight(double log_prior, double log_lik, double log_q,
                                             bool prior_proposal) {
  if (prior_proposal) return log_lik;
  return log_prior + log_lik - log_q;
}

/// Recomputes log_w and log_estimate at stage t from the cached paths.
void refresh_inner_weights(AsmhState& state, int t, bool prior_proposal);

/// Draws N_i inactive points from q_i(. | a) and forms the IS estimate of
/// the stage-t marginal likelihood of a. With d_i = 0 the cloud is a single
/// empty point and the estimate is log l_{1:t}(A a).
[[nodiscard]] AsmhState is_marginal_likelihood(const Vector& a, const Basis& basis,
                                               const ProjectedPrior& projected,
                                               const InactiveProposal& q_i,
                                               const TargetModel& model, int t, int n_inactive,
                                               Engine& rng);

/// log acceptance ratio of a symmetric-proposal pseudo-marginal move.
/// Returns -inf if the proposal is impossible and +inf if the current state
/// is; throws when finite inputs give a NaN.
[[nodiscard]] double asmh_log_acceptance(double log_pa_new, double log_est_new, double log_pa_old,
                                         double log_est_old);

struct AsmhStreams {
  Engine move;    // random-walk increment, then the accept uniform
  Engine inner;   // fresh inactive points
  Engine select;  // u draws
};

/// One AS-MH step at stage t. On acceptance the whole cloud is replaced and
/// u redrawn; on rejection everything is kept, including the stored weights.
bool asmh_step(AsmhState& state, const RandomWalk& q_a, const InactiveProposal& q_i,
               const ProjectedPrior& projected, const Basis& basis, const TargetModel& model,
               int t, AsmhStreams& streams);

struct AsmhOptions {
  int iterations = 1000;
  int n_inactive = 10;
  int stage = -1;  // target stage; -1 means the full likelihood
  std::optional<Matrix> q_a_covariance;  // default 2.38^2 / d_a times the prior covariance of a
};

struct AsmhChain {
  Matrix a;       // d_a x (iterations + 1)
  Matrix theta;   // d x (iterations + 1), A a + I i^u
  Vector log_estimate;
  std::vector<bool> accepted;  // per iteration, excludes the initial state
  double acceptance_rate = 0.0;
};

[[nodiscard]] AsmhChain run_asmh(const AsmhOptions& options, const TargetModel& model,
                                 const Basis& basis, const RngStream& stream);

/// Columns: iteration, a_1..a_da, theta_1..theta_d, log_estimate, accepted.
void write_chain_csv(std::ostream& os, const AsmhChain& chain);

}  // namespace assmc
