#include "assmc/asmh.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace assmc {

double log_mean_exp(const Vector& values) {
  return log_sum_exp(values) - std::log(static_cast<double>(values.size()));
}

void refresh_inner_weights(AsmhState& state, int t, bool prior_proposal) {
  const Index n = state.paths.cols();
  state.log_w.resize(n);
  for (Index k = 0; k < n; ++k) {
    state.log_w(k) =
        inner_log_weight(state.log_prior_i(k), state.paths(t, k), state.log_q_i(k), prior_proposal);
  }
  state.log_estimate = log_mean_exp(state.log_w);
}

AsmhState is_marginal_likelihood(const Vector& a, const Basis& basis,
                                 const ProjectedPrior& projected, const InactiveProposal& q_i,
                                 const TargetModel& model, int t, int n_inactive, Engine& rng) {
  if (n_inactive < 1) throw Error("is_marginal_likelihood: need at least one inactive point");
  const Index di = basis.inactive_dim();
  const int n = di == 0 ? 1 : n_inactive;
  AsmhState s;
  s.a = a;
  s.inactive.resize(di, n);
  s.paths.resize(model.num_stages() + 1, n);
  s.log_prior_i.resize(n);
  s.log_q_i.resize(n);
  const bool prior = q_i.is_prior();
  for (int k = 0; k < n; ++k) {
    const Vector i = q_i.sample(a, rng);
    s.inactive.col(k) = i;
    s.log_prior_i(k) = projected.log_conditional(i, a);
    s.log_q_i(k) = prior ? s.log_prior_i(k) : q_i.log_density(i, a);
    if (!std::isfinite(s.log_q_i(k))) {
      throw Error("is_marginal_likelihood: proposal density is zero at a drawn point");
    }
    s.paths.col(k) = model.stage_log_likelihoods(basis.reconstruct(a, i));
  }
  refresh_inner_weights(s, t, prior);
  return s;
}

double asmh_log_acceptance(double log_pa_new, double log_est_new, double log_pa_old,
                           double log_est_old) {
  const double num = log_pa_new + log_est_new;
  const double den = log_pa_old + log_est_old;
  if (num == -std::numeric_limits<double>::infinity()) return num;
  if (den == -std::numeric_limits<double>::infinity()) return std::numeric_limits<double>::infinity();
  const double out = num - den;
  if (std::isnan(out)) throw Error("AS-MH: acceptance ratio is not a number");
  return out;
}

bool asmh_step(AsmhState& state, const RandomWalk& q_a, const InactiveProposal& q_i,
               const ProjectedPrior& projected, const Basis& basis, const TargetModel& model,
               int t, AsmhStreams& streams) {
  const Vector a_new = q_a.propose(state.a, streams.move);
  AsmhState proposal = is_marginal_likelihood(a_new, basis, projected, q_i, model, t,
                                              state.num_points(), streams.inner);
  const double log_alpha =
      asmh_log_acceptance(projected.log_marginal(a_new), proposal.log_estimate,
                          projected.log_marginal(state.a), state.log_estimate);
  if (std::log(uniform01(streams.move)) < log_alpha) {
    proposal.u = multinomial_draw(normalise_log_weights(proposal.log_w), streams.select);
    state = std::move(proposal);
    return true;
  }
  return false;
}

AsmhChain run_asmh(const AsmhOptions& options, const TargetModel& model, const Basis& basis,
                   const RngStream& stream) {
  if (options.iterations < 0) throw Error("run_asmh: negative iteration count");
  const int t = options.stage < 0 ? model.num_stages() : options.stage;
  const auto projected = std::make_shared<const ProjectedPrior>(model.prior(), basis);
  const ProposalPtr q_i = InactiveProposal::prior(projected);
  const Index da = basis.active_dim();
  const Matrix cov = options.q_a_covariance.value_or(
      (2.38 * 2.38 / static_cast<double>(da)) * projected->marginal().covariance());
  const RandomWalk q_a(cov);

  Engine init = stream.derive(Purpose::kInit).engine();
  const Vector theta0 = model.sample_prior(init);
  AsmhState state = is_marginal_likelihood(basis.to_active(theta0), basis, *projected, *q_i,
                                           model, t, options.n_inactive, init);
  state.u = multinomial_draw(normalise_log_weights(state.log_w), init);

  AsmhChain chain;
  const int iters = options.iterations;
  chain.a.resize(da, iters + 1);
  chain.theta.resize(basis.dim(), iters + 1);
  chain.log_estimate.resize(iters + 1);
  chain.accepted.reserve(static_cast<std::size_t>(iters));
  auto record = [&](int k) {
    chain.a.col(k) = state.a;
    chain.theta.col(k) = state.theta(basis, state.u);
    chain.log_estimate(k) = state.log_estimate;
  };
  record(0);
  int accepted = 0;
  for (int k = 1; k <= iters; ++k) {
    const RngStream step = stream.derive(static_cast<std::uint64_t>(k));
    AsmhStreams streams{step.derive(Purpose::kMove).engine(), step.derive(Purpose::kInner).engine(),
                        step.derive(Purpose::kSelect).engine()};
    const bool ok = asmh_step(state, q_a, *q_i, *projected, basis, model, t, streams);
    chain.accepted.push_back(ok);
    accepted += ok ? 1 : 0;
    record(k);
  }
  chain.acceptance_rate = iters > 0 ? static_cast<double>(accepted) / iters : 0.0;
  return chain;
}

void write_chain_csv(std::ostream& os, const AsmhChain& chain) {
  os << "iteration";
  for (Index j = 0; j < chain.a.rows(); ++j) os << ",a_" << (j + 1);
  for (Index j = 0; j < chain.theta.rows(); ++j) os << ",theta_" << (j + 1);
  os << ",log_estimate,accepted\n";
  os.precision(17);
  for (Index k = 0; k < chain.a.cols(); ++k) {
    os << k;
    for (Index j = 0; j < chain.a.rows(); ++j) os << ',' << chain.a(j, k);
    for (Index j = 0; j < chain.theta.rows(); ++j) os << ',' << chain.theta(j, k);
    os << ',' << chain.log_estimate(k) << ',';
    os << (k == 0 ? 1 : (chain.accepted[static_cast<std::size_t>(k - 1)] ? 1 : 0)) << '\n';
  }
}

}  // namespace assmc
