#include "assmc/baseline_smc.hpp"

#include <cmath>

#include "assmc/asmh.hpp"

namespace assmc {
namespace {

RngStream particle_stream(const RngStream& stream, int t, std::size_t m) {
  return stream.derive({static_cast<std::uint64_t>(t), static_cast<std::uint64_t>(m)});
}

Vector log_weights_of(const std::vector<ThetaParticle>& particles) {
  Vector out(static_cast<Index>(particles.size()));
  for (std::size_t m = 0; m < particles.size(); ++m) out(static_cast<Index>(m)) = particles[m].log_weight;
  return out;
}

}  // namespace

StandardSmcResult run_standard_smc(const SamplerOptions& o, const TargetModel& base_model,
                                   const RngStream& stream) {
  if (o.n_active < 1) throw Error("sampler: n_active must be positive");
  if (o.moves_per_stage < 0) throw Error("sampler: moves_per_stage must be nonnegative");
  const TargetModel model = base_model.with_tempering(base_model.tempering());
  const int T = final_stage(o, model.num_stages());
  const int n = o.n_active;
  const Index d = model.dim();
  const int threads = resolve_threads(o.threads);

  StandardSmcResult result;
  result.algorithm = "smc";

  std::vector<ThetaParticle> particles(static_cast<std::size_t>(n));
  parallel_for(particles.size(), threads, [&](std::size_t m) {
    Engine rng = particle_stream(stream, 0, m).derive(Purpose::kInit).engine();
    particles[m].theta = model.sample_prior(rng);
    particles[m].path = model.stage_log_likelihoods(particles[m].theta);
    particles[m].log_weight = 0.0;
  });

  EvidenceAccumulator evidence;
  for (int t = 1; t <= T; ++t) {
    StageDiagnostics diag;
    diag.stage = t;
    diag.active_dim = d;

    const Vector prev_log_w = log_weights_of(particles);
    Vector incr(static_cast<Index>(particles.size()));
    for (std::size_t m = 0; m < particles.size(); ++m) {
      auto& p = particles[m];
      incr(static_cast<Index>(m)) = log_ratio(p.path(t), p.path(t - 1));
      p.log_weight += incr(static_cast<Index>(m));
      if (p.path(t) == -std::numeric_limits<double>::infinity()) ++diag.dead_particles;
    }
    evidence.add_stage(prev_log_w, incr);

    const Vector weights = normalise_log_weights(log_weights_of(particles));
    diag.ess = 1.0 / weights.squaredNorm();
    Matrix points(d, n);
    for (std::size_t m = 0; m < particles.size(); ++m) points.col(static_cast<Index>(m)) = particles[m].theta;
    const Matrix cov = o.adapt_active_proposal
                           ? scaled_empirical_covariance(points, weights,
                                                         2.38 * 2.38 / static_cast<double>(d))
                           : Matrix((2.38 * 2.38 / static_cast<double>(d)) * model.prior().covariance());
    const RandomWalk q(cov);

    if (o.per_particle_ancestors || o.resample.should_resample(diag.ess, n)) {
      std::vector<int> anc(particles.size());
      if (o.per_particle_ancestors) {
        for (std::size_t m = 0; m < particles.size(); ++m) {
          Engine rng = particle_stream(stream, t, m).derive(Purpose::kResample).engine();
          anc[m] = multinomial_draw(weights, rng);
        }
      } else {
        Engine rng = stream.derive(static_cast<std::uint64_t>(t)).derive(Purpose::kResample).engine();
        anc = resample(weights, n, o.resample.scheme, rng);
      }
      std::vector<ThetaParticle> next(particles.size());
      for (std::size_t m = 0; m < next.size(); ++m) {
        next[m] = particles[static_cast<std::size_t>(anc[m])];
        next[m].log_weight = 0.0;
      }
      particles = std::move(next);
      diag.resampled = true;
    }

    std::vector<int> accepted(particles.size(), 0);
    parallel_for(particles.size(), threads, [&](std::size_t m) {
      Engine rng = particle_stream(stream, t, m).derive(Purpose::kMove).engine();
      auto& p = particles[m];
      for (int k = 0; k < o.moves_per_stage; ++k) {
        const Vector proposal = q.propose(p.theta, rng);
        LogLikPath path = model.stage_log_likelihoods(proposal);
        const double log_alpha = asmh_log_acceptance(model.log_prior(proposal), path(t),
                                                     model.log_prior(p.theta), p.path(t));
        if (std::log(uniform01(rng)) < log_alpha) {
          p.theta = proposal;
          p.path = std::move(path);
          ++accepted[m];
        }
      }
    });
    long long total_accepted = 0;
    for (int v : accepted) total_accepted += v;
    const long long proposals = static_cast<long long>(o.moves_per_stage) * n;
    diag.acceptance_rate = proposals > 0 ? static_cast<double>(total_accepted) / proposals : 0.0;
    result.stages.push_back(diag);
  }

  const Vector weights = normalise_log_weights(log_weights_of(particles));
  result.weights = weights;
  result.samples.resize(d, n);
  for (std::size_t m = 0; m < particles.size(); ++m) result.samples.col(static_cast<Index>(m)) = particles[m].theta;
  result.posterior_mean = result.samples * weights;
  result.posterior_mean_all = result.posterior_mean;
  result.log_evidence = evidence.log_evidence();
  result.log_evidence_trace = evidence.trace();
  result.likelihood_evaluations = model.evaluations();
  result.basis = Basis::identity(d);
  result.particles = std::move(particles);
  return result;
}

}  // namespace assmc
