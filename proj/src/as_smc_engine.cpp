#include <cmath>
#include <memory>

#include "assmc/adaptive_assmc.hpp"
#include "assmc/assmc.hpp"

namespace assmc {
namespace {

RngStream particle_stream(const RngStream& stream, int t, std::size_t m) {
  return stream.derive({static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(m)});
}

void validate(const SamplerOptions& o) {
  if (o.n_active < 1) throw Error("sampler: n_active must be positive");
  if (o.n_inactive < 1) throw Error("sampler: n_inactive must be positive");
  if (o.moves_per_stage < 0) throw Error("sampler: moves_per_stage must be nonnegative");
}

Vector outer_log_weights(const std::vector<ActiveParticle>& particles) {
  Vector out(static_cast<Index>(particles.size()));
  for (std::size_t m = 0; m < particles.size(); ++m) out(static_cast<Index>(m)) = particles[m].log_weight;
  return out;
}

std::vector<int> draw_ancestors(const SamplerOptions& o, const Vector& weights,
                                const RngStream& stream, int t) {
  const int n = static_cast<int>(weights.size());
  if (o.per_particle_ancestors) {
    std::vector<int> anc(static_cast<std::size_t>(n));
    for (int m = 0; m < n; ++m) {
      Engine rng = particle_stream(stream, t, static_cast<std::size_t>(m)).derive(Purpose::kResample).engine();
      anc[static_cast<std::size_t>(m)] = multinomial_draw(weights, rng);
    }
    return anc;
  }
  Engine rng = stream.derive(static_cast<std::uint64_t>(t)).derive(Purpose::kResample).engine();
  return resample(weights, n, o.resample.scheme, rng);
}

AsSmcResult run_as_smc_engine(const SamplerOptions& o, const TargetModel& base_model,
                              const RngStream& stream, bool adaptive) {
  validate(o);
  const TargetModel model = base_model.with_tempering(base_model.tempering());
  const int T = final_stage(o, model.num_stages());
  const int na = o.n_active;
  const Index d = model.dim();
  const int threads = resolve_threads(o.threads);

  AsSmcResult result;
  result.algorithm = adaptive ? "adaptive-as-smc" : "as-smc";

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

  auto projected = std::make_shared<const ProjectedPrior>(model.prior(), basis);
  ProposalPtr prior_q = InactiveProposal::prior(projected);
  const int n_points = basis.inactive_dim() == 0 ? 1 : o.n_inactive;

  std::vector<ActiveParticle> particles(static_cast<std::size_t>(na));
  parallel_for(particles.size(), threads, [&](std::size_t m) {
    Engine rng = particle_stream(stream, 0, m).derive(Purpose::kInner).engine();
    const Vector a = basis.to_active(theta0[m]);
    const Vector i = basis.to_inactive(theta0[m]);
    static_cast<AsmhState&>(particles[m]) =
        build_cloud(a, &i, nullptr, 0, n_points, basis, *projected, *prior_q, model, 0, rng);
    particles[m].log_weight = 0.0;
    particles[m].proposal = prior_q;
  });

  EvidenceAccumulator evidence;
  for (int t = 1; t <= T; ++t) {
    StageDiagnostics diag;
    diag.stage = t;

    if (adaptive && !o.freeze_basis) {
      Basis next = reestimate_basis(particles, basis, model, t, o.gap_rule);
      align_signs(next, basis);
      result.spectra.push_back(next.spectrum);
      auto next_projected = std::make_shared<const ProjectedPrior>(model.prior(), next);
      ProposalPtr kappa = InactiveProposal::prior(next_projected);

      ReprojectionDiagnostics rd;
      rd.stage = t;
      rd.active_dim_before = basis.active_dim();
      rd.active_dim_after = next.active_dim();
      const Vector before = outer_log_weights(particles);
      rd.ess_before = ess(before);
      std::vector<double> errors(particles.size(), 0.0);
      parallel_for(particles.size(), threads, [&](std::size_t m) {
        Engine rng = particle_stream(stream, t, m).derive(Purpose::kReproject).engine();
        errors[m] = reproject(particles[m], basis, next, *next_projected, kappa, model, t,
                              o.n_inactive, rng)
                        .reconstruction_error;
      });
      const Vector after = outer_log_weights(particles);
      rd.ess_after = ess(after);
      for (Index m = 0; m < after.size(); ++m) {
        const double diff = after(m) == before(m) ? 0.0 : std::abs(after(m) - before(m));
        rd.max_abs_weight_change = std::max(rd.max_abs_weight_change, std::isnan(diff) ? INFINITY : diff);
      }
      for (double e : errors) rd.max_reconstruction_error = std::max(rd.max_reconstruction_error, e);
      result.reprojections.push_back(rd);

      basis = std::move(next);
      projected = std::move(next_projected);
      prior_q = std::move(kappa);
    }
    diag.active_dim = basis.active_dim();

    std::vector<ProposalPtr> q_curr(particles.size(), prior_q);
    if (o.inactive_family != InactiveFamily::kPrior) {
      parallel_for(particles.size(), threads, [&](std::size_t m) {
        q_curr[m] = adapt_inactive_proposal(particles[m], t, o.inactive_family, prior_q, o.student_dof);
      });
    }

    const Vector prev_log_w = outer_log_weights(particles);
    Vector incr(static_cast<Index>(particles.size()));
    std::vector<int> dead(particles.size(), 0);
    std::vector<Engine> select(particles.size());
    parallel_for(particles.size(), threads, [&](std::size_t m) {
      const ReweightOutcome r = assmc_reweight(particles[m], t, q_curr[m]);
      incr(static_cast<Index>(m)) = r.log_increment;
      dead[m] = r.dead ? 1 : 0;
      select[m] = particle_stream(stream, t, m).derive(Purpose::kSelect).engine();
      if (!r.dead) {
        particles[m].u = multinomial_draw(normalise_log_weights(particles[m].log_w), select[m]);
      }
    });
    evidence.add_stage(prev_log_w, incr);
    for (int v : dead) diag.dead_particles += v;

    const Vector weights = normalise_log_weights(outer_log_weights(particles));
    diag.ess = 1.0 / weights.squaredNorm();
    const Index da = basis.active_dim();
    const Matrix cov = o.adapt_active_proposal
                           ? adapt_active_proposal(particles, weights)
                           : Matrix((2.38 * 2.38 / static_cast<double>(da)) *
                                    projected->marginal().covariance());
    const RandomWalk q_a(cov);

    if (o.per_particle_ancestors || o.resample.should_resample(diag.ess, na)) {
      const std::vector<int> anc = draw_ancestors(o, weights, stream, t);
      std::vector<ActiveParticle> next(particles.size());
      std::vector<Engine> next_select(particles.size());
      for (std::size_t m = 0; m < next.size(); ++m) {
        next[m] = particles[static_cast<std::size_t>(anc[m])];
        next[m].log_weight = 0.0;
        next_select[m] = select[m];
      }
      particles = std::move(next);
      select = std::move(next_select);
      diag.resampled = true;
    }

    std::vector<int> accepted(particles.size(), 0);
    parallel_for(particles.size(), threads, [&](std::size_t m) {
      const RngStream ps = particle_stream(stream, t, m);
      AsmhStreams streams{ps.derive(Purpose::kMove).engine(), ps.derive(Purpose::kInner).engine(),
                          select[m]};
      accepted[m] = assmc_move(particles[m], t, q_a, *projected, basis, model, o.moves_per_stage,
                               streams);
    });
    long long total_accepted = 0;
    for (int v : accepted) total_accepted += v;
    const long long proposals = static_cast<long long>(o.moves_per_stage) * na;
    diag.acceptance_rate = proposals > 0 ? static_cast<double>(total_accepted) / proposals : 0.0;
    result.stages.push_back(diag);
  }

  const Vector weights = normalise_log_weights(outer_log_weights(particles));
  result.weights = weights;
  result.samples.resize(d, na);
  Matrix all_points(d, na);
  for (std::size_t m = 0; m < particles.size(); ++m) {
    const auto& p = particles[m];
    result.samples.col(static_cast<Index>(m)) = p.theta(basis, p.u);
    all_points.col(static_cast<Index>(m)) = result.samples.col(static_cast<Index>(m));
    if (weights(static_cast<Index>(m)) == 0.0) continue;
    const Vector inner = normalise_log_weights(p.log_w);
    Vector acc = Vector::Zero(d);
    for (Index n = 0; n < inner.size(); ++n) {
      if (inner(n) != 0.0) acc += inner(n) * p.theta(basis, n);
    }
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

}  // namespace

AsSmcResult run_assmc(const SamplerOptions& options, const TargetModel& model,
                      const RngStream& stream) {
  return run_as_smc_engine(options, model, stream, false);
}

AsSmcResult run_adaptive_assmc(const SamplerOptions& options, const TargetModel& model,
                               const RngStream& stream) {
  return run_as_smc_engine(options, model, stream, true);
}

}  // namespace assmc
