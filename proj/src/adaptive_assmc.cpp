#include "assmc/adaptive_assmc.hpp"

#include <cmath>

namespace assmc {

Basis reestimate_basis(const std::vector<ActiveParticle>& particles, const Basis& basis,
                       const TargetModel& model, int t, const GapRule& rule) {
  if (particles.empty()) throw Error("reestimate_basis: empty population");
  Vector log_outer(static_cast<Index>(particles.size()));
  for (std::size_t m = 0; m < particles.size(); ++m) log_outer(static_cast<Index>(m)) = particles[m].log_weight;
  const Vector outer = normalise_log_weights(log_outer);

  std::vector<GradientSample<double>> samples;
  double total = 0.0;
  for (std::size_t m = 0; m < particles.size(); ++m) {
    const auto& p = particles[m];
    const double wm = outer(static_cast<Index>(m));
    if (wm == 0.0 || log_sum_exp(p.log_w) == -std::numeric_limits<double>::infinity()) continue;
    const Vector inner = normalise_log_weights(p.log_w);
    for (Index n = 0; n < inner.size(); ++n) {
      const double w = wm * inner(n);
      if (w == 0.0) continue;
      GradientSample<double> s;
      s.point = p.theta(basis, n);
      s.gradient = model.score(s.point, t);
      s.weight = w;
      total += w;
      samples.push_back(std::move(s));
    }
  }
  if (samples.empty()) throw Error("reestimate_basis: no weighted points");
  for (auto& s : samples) s.weight /= total;
  const Spectrum<double> spectrum = eigendecompose(estimate_as_matrix(samples));
  Basis out = split_basis(spectrum, rule);
  if (out.inactive_dim() == 0) return Basis::identity(out.dim(), spectrum);
  return out;
}

InactiveTransition classify_transition(const Basis& old_basis, const Basis& new_basis) {
  const bool old_zero = old_basis.inactive_dim() == 0;
  const bool new_zero = new_basis.inactive_dim() == 0;
  if (old_zero && new_zero) return InactiveTransition::kZeroZero;
  if (new_zero) return InactiveTransition::kToZero;
  if (old_zero) return InactiveTransition::kFromZero;
  return InactiveTransition::kNone;
}

ReprojectOutcome reproject(ActiveParticle& p, const Basis& old_basis, const Basis& new_basis,
                           const ProjectedPrior& new_projected, const ProposalPtr& kappa,
                           const TargetModel& model, int t, int n_inactive, Engine& rng) {
  if (t < 1) throw Error("reproject: stage must be at least 1");
  const Vector theta = p.theta(old_basis, p.u);
  const LogLikPath carried_path = p.paths.col(p.u);
  const Vector a_new = new_basis.to_active(theta);
  const Vector i_new = new_basis.to_inactive(theta);
  const int n_new = new_basis.inactive_dim() == 0 ? 1 : n_inactive;
  const int carried_index = n_new == p.num_points() ? p.u : 0;
  AsmhState cloud = build_cloud(a_new, &i_new, &carried_path, carried_index, n_new, new_basis,
                                new_projected, *kappa, model, t - 1, rng);
  static_cast<AsmhState&>(p) = std::move(cloud);
  p.proposal = kappa;
  ReprojectOutcome out;
  out.reconstruction_error = (p.theta(new_basis, p.u) - theta).cwiseAbs().maxCoeff();
  return out;
}

ReprojectOutcome handle_no_inactive(ActiveParticle& p, InactiveTransition direction,
                                    const Basis& old_basis, const Basis& new_basis,
                                    const ProjectedPrior& new_projected, const ProposalPtr& kappa,
                                    const TargetModel& model, int t, int n_inactive,
                                    Engine& rng) {
  if (classify_transition(old_basis, new_basis) != direction) {
    throw Error("handle_no_inactive: bases do not match the requested transition");
  }
  if (direction == InactiveTransition::kNone) {
    throw Error("handle_no_inactive: both bases have inactive variables");
  }
  return reproject(p, old_basis, new_basis, new_projected, kappa, model, t, n_inactive, rng);
}

}  // namespace assmc
