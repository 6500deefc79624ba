#include "assmc/assmc2.hpp"

#include <cmath>
#include <numeric>

#include "assmc/asmh.hpp"

namespace assmc {
namespace {

RngStream particle_stream(const RngStream& stream, int t, std::size_t m) {
  return stream.derive({static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(m)});
}

Vector outer_log_weights(const std::vector<Smc2Particle>& particles) {
  Vector out(static_cast<Index>(particles.size()));
  for (std::size_t m = 0; m < particles.size(); ++m) out(static_cast<Index>(m)) = particles[m].log_weight;
  return out;
}

}  // namespace

InnerSmcState inner_smc_init(const Vector& a, const Vector* carried, const Basis& basis,
                             const ProjectedPrior& projected, const TargetModel& model,
                             int n_inactive, Engine& rng) {
  if (n_inactive < 1) throw Error("inner SMC: need at least one inactive point");
  const Index di = basis.inactive_dim();
  const int n = di == 0 ? 1 : n_inactive;
  InnerSmcState s;
  s.points.resize(di, n);
  s.paths.resize(model.num_stages() + 1, n);
  s.log_prior_i.resize(n);
  for (int k = 0; k < n; ++k) {
    const Vector i = (carried && k == 0) ? *carried : projected.sample_conditional(a, rng);
    s.points.col(k) = i;
    s.log_prior_i(k) = projected.log_conditional(i, a);
    s.paths.col(k) = model.stage_log_likelihoods(basis.reconstruct(a, i));
  }
  s.log_w = Vector::Constant(n, -std::log(static_cast<double>(n)));
  s.last_ess = n;
  return s;
}

double inner_smc_reweight(InnerSmcState& s) {
  const int next = s.stage + 1;
  if (next >= s.paths.rows()) throw Error("inner SMC: no stage left to reweight to");
  s.stage = next;
  if (s.dead()) {
    s.stage_log_sums.push_back(s.log_evidence);
    return s.log_evidence;
  }
  Vector lw(s.log_w.size());
  for (Index k = 0; k < lw.size(); ++k) {
    lw(k) = s.log_w(k) + log_ratio(s.paths(next, k), s.paths(next - 1, k));
    if (std::isnan(lw(k))) lw(k) = -std::numeric_limits<double>::infinity();
  }
  const double log_sum = log_sum_exp(lw);
  s.stage_log_sums.push_back(log_sum);
  s.log_evidence += log_sum;
  if (log_sum == -std::numeric_limits<double>::infinity()) {
    s.log_evidence = log_sum;
    s.log_w = lw;
    s.last_ess = 0.0;
    return log_sum;
  }
  s.log_w = (lw.array() - log_sum).matrix();
  s.last_ess = 1.0 / s.log_w.array().exp().matrix().squaredNorm();
  return log_sum;
}

int inner_smc_resample_move(InnerSmcState& s, const Vector& a, const Basis& basis,
                            const ProjectedPrior& projected, const InactiveProposal* q_i,
                            const TargetModel& model, const ResamplePolicy& policy, int moves,
                            Engine& rng) {
  if (s.dead()) return 0;
  const int n = s.num_points();
  const int stage = s.stage;
  const Vector w = s.log_w.array().exp().matrix();
  if (policy.should_resample(1.0 / w.squaredNorm(), n)) {
    const std::vector<int> anc = resample(w, n, policy.scheme, rng);
    Matrix points(s.points.rows(), n);
    Matrix paths(s.paths.rows(), n);
    Vector lp(n);
    for (int k = 0; k < n; ++k) {
      points.col(k) = s.points.col(anc[static_cast<std::size_t>(k)]);
      paths.col(k) = s.paths.col(anc[static_cast<std::size_t>(k)]);
      lp(k) = s.log_prior_i(anc[static_cast<std::size_t>(k)]);
    }
    s.points = std::move(points);
    s.paths = std::move(paths);
    s.log_prior_i = std::move(lp);
    s.log_w = Vector::Constant(n, -std::log(static_cast<double>(n)));
    s.ancestors.push_back(anc);
  }
  if (s.points.rows() == 0) return 0;
  const bool prior = q_i == nullptr || q_i->is_prior();
  int accepted = 0;
  for (int sweep = 0; sweep < moves; ++sweep) {
    for (int k = 0; k < n; ++k) {
      const Vector i_new = prior ? projected.sample_conditional(a, rng) : q_i->sample(a, rng);
      const LogLikPath path = model.stage_log_likelihoods(basis.reconstruct(a, i_new));
      const double lp_new = projected.log_conditional(i_new, a);
      double log_alpha = 0.0;
      if (prior) {
        log_alpha = log_ratio(path(stage), s.paths(stage, k));
      } else {
        const Vector i_old = s.points.col(k);
        log_alpha = log_ratio(path(stage) + lp_new + q_i->log_density(i_old, a),
                              s.paths(stage, k) + s.log_prior_i(k) + q_i->log_density(i_new, a));
      }
      if (std::isnan(log_alpha)) log_alpha = std::numeric_limits<double>::infinity();
      if (std::log(uniform01(rng)) < log_alpha) {
        s.points.col(k) = i_new;
        s.paths.col(k) = path;
        s.log_prior_i(k) = lp_new;
        ++accepted;
      }
    }
  }
  return accepted;
}

InnerSmcState inner_smc(const Vector& a, const Basis& basis, const ProjectedPrior& projected,
                        const TargetModel& model, int t, int n_inactive,
                        const std::vector<ProposalPtr>& proposals, const ResamplePolicy& policy,
                        int moves, const RngStream& stream) {
  if (t < 1 || t > model.num_stages()) throw Error("inner SMC: stage out of range");
  Engine init = stream.derive(Purpose::kInit).engine();
  InnerSmcState s = inner_smc_init(a, nullptr, basis, projected, model, n_inactive, init);
  for (int stage = 1; stage <= t; ++stage) {
    inner_smc_reweight(s);
    if (stage == t) break;
    Engine rng = stream.derive(static_cast<std::uint64_t>(stage)).derive(Purpose::kMove).engine();
    const auto idx = static_cast<std::size_t>(stage);
    const InactiveProposal* q = idx < proposals.size() ? proposals[idx].get() : nullptr;
    inner_smc_resample_move(s, a, basis, projected, q, model, policy, moves, rng);
  }
  return s;
}

double assmc2_reweight(Smc2Particle& p) {
  const double incr = inner_smc_reweight(p.inner);
  p.log_weight += incr;
  return incr;
}

ProposalPtr adapt_inner_proposal(const std::vector<Smc2Particle>& particles,
                                 const Vector& outer_weights, InactiveFamily family, double dof) {
  if (family == InactiveFamily::kPrior || particles.empty()) return nullptr;
  const Index di = particles.front().inner.points.rows();
  const int ni = particles.front().inner.num_points();
  if (di == 0 || ni < 2) return nullptr;
  Matrix points(di, static_cast<Index>(particles.size()) * ni);
  Vector weights = Vector::Zero(points.cols());
  Index col = 0;
  for (std::size_t m = 0; m < particles.size(); ++m) {
    const auto& s = particles[m].inner;
    const double wm = outer_weights(static_cast<Index>(m));
    for (int k = 0; k < s.num_points(); ++k, ++col) {
      points.col(col) = s.points.col(k);
      if (wm > 0.0 && !s.dead()) weights(col) = wm * std::exp(s.log_w(k));
    }
  }
  return fitted_proposal(family, weighted_moments(points, weights), nullptr, dof);
}

bool aspmmh_move(Smc2Particle& p, int t, const RandomWalk& q_a, const Basis& basis,
                 const ProjectedPrior& projected, const TargetModel& model, int n_inactive,
                 const std::vector<ProposalPtr>& proposals, const ResamplePolicy& inner_policy,
                 int inner_moves, Engine& move_rng, const RngStream& inner_stream) {
  const Vector a_new = q_a.propose(p.a, move_rng);
  InnerSmcState fresh = inner_smc(a_new, basis, projected, model, t, n_inactive, proposals,
                                  inner_policy, inner_moves, inner_stream);
  const double log_alpha =
      asmh_log_acceptance(projected.log_marginal(a_new), fresh.log_evidence,
                          projected.log_marginal(p.a), p.inner.log_evidence);
  if (std::log(uniform01(move_rng)) < log_alpha) {
    p.a = a_new;
    p.inner = std::move(fresh);
    return true;
  }
  return false;
}

Smc2Result run_assmc2(const SamplerOptions& o, const TargetModel& base_model,
                      const RngStream& stream) {
  if (o.n_active < 1) throw Error("sampler: n_active must be positive");
  if (o.n_inactive < 1) throw Error("sampler: n_inactive must be positive");
  if (o.moves_per_stage < 0) throw Error("sampler: moves_per_stage must be nonnegative");
  const TargetModel model = base_model.with_tempering(base_model.tempering());
  const int T = final_stage(o, model.num_stages());
  const int na = o.n_active;
  const Index d = model.dim();
  const int threads = resolve_threads(o.threads);
  const ResamplePolicy inner_policy{o.resample.scheme, ResampleTrigger::kEss, 0.5};
  constexpr int kInnerMoves = 1;

  Smc2Result result;
  result.algorithm = "as-smc2";

  std::vector<Vector> theta0(static_cast<std::size_t>(na));
  parallel_for(theta0.size(), threads, [&](std::size_t m) {
    Engine rng = particle_stream(stream, 0, m).derive(Purpose::kInit).engine();
    theta0[m] = model.sample_prior(rng);
  });
  Basis basis;
  if (o.basis) {
    basis = *o.basis;
    if (basis.dim() != d) throw Error("sampler: basis dimension does not match the model");
  } else {
    std::vector<GradientSample<double>> samples(theta0.size());
    parallel_for(theta0.size(), threads, [&](std::size_t m) {
      samples[m].point = theta0[m];
      samples[m].gradient = model.full_score(theta0[m]);
      samples[m].weight = 1.0 / static_cast<double>(na);
    });
    basis = split_basis(eigendecompose(estimate_as_matrix(samples)), o.gap_rule);
  }
  if (basis.inactive_dim() == 0) basis = Basis::identity(d, basis.spectrum);
  if (basis.spectrum.dim() > 0) result.spectra.push_back(basis.spectrum);
  const ProjectedPrior projected(model.prior(), basis);

  std::vector<Smc2Particle> particles(static_cast<std::size_t>(na));
  parallel_for(particles.size(), threads, [&](std::size_t m) {
    Engine rng = particle_stream(stream, 0, m).derive(Purpose::kInner).engine();
    particles[m].a = basis.to_active(theta0[m]);
    const Vector i = basis.to_inactive(theta0[m]);
    particles[m].inner =
        inner_smc_init(particles[m].a, &i, basis, projected, model, o.n_inactive, rng);
  });

  std::vector<ProposalPtr> proposals(static_cast<std::size_t>(T) + 1);
  EvidenceAccumulator evidence;
  for (int t = 1; t <= T; ++t) {
    StageDiagnostics diag;
    diag.stage = t;
    diag.active_dim = basis.active_dim();

    const Vector prev_log_w = outer_log_weights(particles);
    Vector incr(static_cast<Index>(particles.size()));
    parallel_for(particles.size(), threads, [&](std::size_t m) {
      incr(static_cast<Index>(m)) = assmc2_reweight(particles[m]);
    });
    evidence.add_stage(prev_log_w, incr);
    double inner_ess = 0.0;
    for (const auto& p : particles) {
      inner_ess += p.inner.last_ess;
      if (p.inner.dead()) ++diag.dead_particles;
    }
    diag.mean_inner_ess = inner_ess / na;

    const Vector weights = normalise_log_weights(outer_log_weights(particles));
    diag.ess = 1.0 / weights.squaredNorm();
    proposals[static_cast<std::size_t>(t)] =
        adapt_inner_proposal(particles, weights, o.inactive_family, o.student_dof);
    const InactiveProposal* q_t = proposals[static_cast<std::size_t>(t)].get();
    parallel_for(particles.size(), threads, [&](std::size_t m) {
      Engine rng = particle_stream(stream, t, m).derive(Purpose::kInner).engine();
      inner_smc_resample_move(particles[m].inner, particles[m].a, basis, projected, q_t, model,
                              inner_policy, kInnerMoves, rng);
    });

    const Index da = basis.active_dim();
    Matrix a_points(da, na);
    for (std::size_t m = 0; m < particles.size(); ++m) a_points.col(static_cast<Index>(m)) = particles[m].a;
    const Matrix cov = o.adapt_active_proposal
                           ? scaled_empirical_covariance(a_points, weights,
                                                         2.38 * 2.38 / static_cast<double>(da))
                           : Matrix((2.38 * 2.38 / static_cast<double>(da)) *
                                    projected.marginal().covariance());
    const RandomWalk q_a(cov);

    if (o.per_particle_ancestors || o.resample.should_resample(diag.ess, na)) {
      std::vector<int> anc(particles.size());
      if (o.per_particle_ancestors) {
        for (std::size_t m = 0; m < particles.size(); ++m) {
          Engine rng = particle_stream(stream, t, m).derive(Purpose::kResample).engine();
          anc[m] = multinomial_draw(weights, rng);
        }
      } else {
        Engine rng = stream.derive(static_cast<std::uint64_t>(t)).derive(Purpose::kResample).engine();
        anc = resample(weights, na, o.resample.scheme, rng);
      }
      std::vector<Smc2Particle> next(particles.size());
      for (std::size_t m = 0; m < next.size(); ++m) {
        next[m] = particles[static_cast<std::size_t>(anc[m])];
        next[m].log_weight = 0.0;
      }
      particles = std::move(next);
      diag.resampled = true;
    }

    std::vector<int> accepted(particles.size(), 0);
    parallel_for(particles.size(), threads, [&](std::size_t m) {
      const RngStream ps = particle_stream(stream, t, m);
      Engine move_rng = ps.derive(Purpose::kMove).engine();
      for (int k = 0; k < o.moves_per_stage; ++k) {
        const RngStream inner_stream = ps.derive(Purpose::kMove).derive(static_cast<std::uint64_t>(k));
        if (aspmmh_move(particles[m], t, q_a, basis, projected, model, o.n_inactive, proposals,
                        inner_policy, kInnerMoves, move_rng, inner_stream)) {
          ++accepted[m];
        }
      }
    });
    long long total_accepted = 0;
    for (int v : accepted) total_accepted += v;
    const long long attempts = static_cast<long long>(o.moves_per_stage) * na;
    diag.acceptance_rate = attempts > 0 ? static_cast<double>(total_accepted) / attempts : 0.0;
    result.stages.push_back(diag);
  }

  const Vector weights = normalise_log_weights(outer_log_weights(particles));
  result.weights = weights;
  result.samples.resize(d, na);
  Matrix all_points(d, na);
  for (std::size_t m = 0; m < particles.size(); ++m) {
    const auto& s = particles[m].inner;
    const Vector& a = particles[m].a;
    Vector acc = Vector::Zero(d);
    int u = 0;
    if (!s.dead()) {
      const Vector w = s.log_w.array().exp().matrix();
      for (int k = 0; k < s.num_points(); ++k) {
        if (w(k) != 0.0) acc += w(k) * basis.reconstruct(a, s.points.col(k));
      }
      Engine rng = particle_stream(stream, T + 1, m).derive(Purpose::kSelect).engine();
      u = multinomial_draw(w, rng);
    }
    result.samples.col(static_cast<Index>(m)) = basis.reconstruct(a, s.points.col(u));
    all_points.col(static_cast<Index>(m)) = acc;
  }
  result.posterior_mean = result.samples * weights;
  result.posterior_mean_all = all_points * weights;
  result.log_evidence = evidence.log_evidence();
  result.log_evidence_trace = evidence.trace();
  result.likelihood_evaluations = model.evaluations();
  result.basis = basis;
  result.particles = std::move(particles);
  return result;
}

long long assmc2_expected_evaluations(int n_active, int n_inactive, int stages) {
  const long long per = static_cast<long long>(n_active) * n_inactive;
  const long long t = stages;
  return per * (1 + t + t * (t + 1) / 2);
}

}  // namespace assmc
