#include "assmc/assmc.hpp"

#include <cmath>
#include <limits>

namespace assmc {

AsmhState build_cloud(const Vector& a, const Vector* carried, const LogLikPath* carried_path,
                      int carried_index, int n_points, const Basis& basis,
                      const ProjectedPrior& projected, const InactiveProposal& q_i,
                      const TargetModel& model, int t, Engine& rng) {
  if (n_points < 1) throw Error("build_cloud: need at least one point");
  if (carried && (carried_index < 0 || carried_index >= n_points)) {
    throw Error("build_cloud: carried index out of range");
  }
  const Index di = basis.inactive_dim();
  const bool prior = q_i.is_prior();
  AsmhState s;
  s.a = a;
  s.inactive.resize(di, n_points);
  s.paths.resize(model.num_stages() + 1, n_points);
  s.log_prior_i.resize(n_points);
  s.log_q_i.resize(n_points);
  for (int k = 0; k < n_points; ++k) {
    const bool is_carried = carried && k == carried_index;
    const Vector i = is_carried ? *carried : q_i.sample(a, rng);
    s.inactive.col(k) = i;
    s.log_prior_i(k) = projected.log_conditional(i, a);
    s.log_q_i(k) = prior ? s.log_prior_i(k) : q_i.log_density(i, a);
    if (!is_carried && !std::isfinite(s.log_q_i(k))) {
      throw Error("build_cloud: proposal density is zero at a drawn point");
    }
    if (is_carried && carried_path) {
      s.paths.col(k) = *carried_path;
    } else {
      s.paths.col(k) = model.stage_log_likelihoods(basis.reconstruct(a, i));
    }
  }
  s.u = carried ? carried_index : 0;
  refresh_inner_weights(s, t, prior);
  return s;
}

ReweightOutcome assmc_reweight(ActiveParticle& p, int t, const ProposalPtr& q_curr) {
  if (!p.proposal || !q_curr) throw Error("assmc_reweight: missing proposal");
  const Index n = p.paths.cols();
  const bool same = q_curr == p.proposal;
  const bool old_prior = p.proposal->is_prior();
  const bool new_prior = q_curr->is_prior();
  Vector lw_prev(n);
  Vector lw_curr(n);
  Vector new_lq = p.log_q_i;
  for (Index k = 0; k < n; ++k) {
    lw_prev(k) = inner_log_weight(p.log_prior_i(k), p.paths(t - 1, k), p.log_q_i(k), old_prior);
    if (!same) {
      new_lq(k) = new_prior ? p.log_prior_i(k) : q_curr->log_density(p.inactive.col(k), p.a);
    }
    lw_curr(k) = inner_log_weight(p.log_prior_i(k), p.paths(t, k), new_lq(k), new_prior);
  }
  double num = log_sum_exp(lw_curr);
  double den = log_sum_exp(lw_prev);
  if (!same) {
    num += new_lq.sum();
    den += p.log_q_i.sum();
  }
  ReweightOutcome out;
  out.dead = num == -std::numeric_limits<double>::infinity();
  out.log_increment = log_ratio(num, den);
  p.log_weight += out.log_increment;
  p.log_q_i = std::move(new_lq);
  p.log_w = std::move(lw_curr);
  p.log_estimate = log_mean_exp(p.log_w);
  p.proposal = q_curr;
  return out;
}

Vector inactive_adaptation_weights(const ActiveParticle& p, int t) {
  const Index n = p.paths.cols();
  const bool prior = p.proposal->is_prior();
  Vector log_kappa(n);
  for (Index k = 0; k < n; ++k) {
    if (k == p.u) {
      log_kappa(k) = -std::numeric_limits<double>::infinity();
      continue;
    }
    const double lw = inner_log_weight(p.log_prior_i(k), p.paths(t - 1, k), p.log_q_i(k), prior);
    log_kappa(k) = lw + log_ratio(p.paths(t, k), p.paths(t - 1, k));
    if (std::isnan(log_kappa(k))) log_kappa(k) = -std::numeric_limits<double>::infinity();
  }
  const double total = log_sum_exp(log_kappa);
  if (!std::isfinite(total)) return Vector::Zero(n);
  return (log_kappa.array() - total).exp().matrix();
}

ProposalPtr adapt_inactive_proposal(const ActiveParticle& p, int t, InactiveFamily family,
                                    const ProposalPtr& fallback, double dof) {
  if (family == InactiveFamily::kPrior || p.inactive.rows() == 0) return fallback;
  const Vector kappa = inactive_adaptation_weights(p, t);
  if (!(kappa.sum() > 0.0)) return fallback;
  return fitted_proposal(family, weighted_moments(p.inactive, kappa), fallback, dof);
}

Matrix adapt_active_proposal(const std::vector<ActiveParticle>& particles, const Vector& weights) {
  if (particles.empty()) throw Error("adapt_active_proposal: empty population");
  const Index da = particles.front().a.size();
  Matrix points(da, static_cast<Index>(particles.size()));
  for (std::size_t m = 0; m < particles.size(); ++m) points.col(static_cast<Index>(m)) = particles[m].a;
  return scaled_empirical_covariance(points, weights, 2.38 * 2.38 / static_cast<double>(da));
}

int assmc_move(ActiveParticle& p, int t, const RandomWalk& q_a, const ProjectedPrior& projected,
               const Basis& basis, const TargetModel& model, int moves, AsmhStreams& streams) {
  int accepted = 0;
  for (int k = 0; k < moves; ++k) {
    if (asmh_step(p, q_a, *p.proposal, projected, basis, model, t, streams)) ++accepted;
  }
  return accepted;
}

Vector estimate_expectation(const std::vector<ActiveParticle>& particles, const Basis& basis,
                            const std::function<Vector(const Vector&)>& g, EstimatorMode mode) {
  if (particles.empty()) throw Error("estimate_expectation: empty population");
  Vector log_w(static_cast<Index>(particles.size()));
  for (std::size_t m = 0; m < particles.size(); ++m) log_w(static_cast<Index>(m)) = particles[m].log_weight;
  const Vector w = normalise_log_weights(log_w);
  Vector out;
  for (std::size_t m = 0; m < particles.size(); ++m) {
    const auto& p = particles[m];
    const double wm = w(static_cast<Index>(m));
    if (wm == 0.0) continue;
    Vector contrib;
    if (mode == EstimatorMode::kSinglePoint) {
      contrib = g(p.theta(basis, p.u));
    } else {
      const Vector inner = normalise_log_weights(p.log_w);
      for (Index n = 0; n < inner.size(); ++n) {
        if (inner(n) == 0.0) continue;
        const Vector v = inner(n) * g(p.theta(basis, n));
        if (contrib.size() == 0) {
          contrib = v;
        } else {
          contrib += v;
        }
      }
    }
    if (out.size() == 0) {
      out = wm * contrib;
    } else {
      out += wm * contrib;
    }
  }
  return out;
}

}  // namespace assmc
