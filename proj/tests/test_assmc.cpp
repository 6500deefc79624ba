#include <gtest/gtest.h>

#include "assmc/assmc.hpp"
#include "assmc/baseline_smc.hpp"
#include "test_util.hpp"

using namespace assmc;
namespace tu = assmc::testing;

namespace {

struct Fixture {
  std::shared_ptr<const Likelihood> lik;
  TargetModel model;
  Basis basis;
  std::shared_ptr<const ProjectedPrior> projected;
  ProposalPtr prior_q;

  Fixture(std::shared_ptr<const Likelihood> l, Basis b, Tempering tempering, double prior_var = 100.0)
      : lik(std::move(l)),
        model(tu::target(lik, std::move(tempering), prior_var)),
        basis(std::move(b)),
        projected(std::make_shared<const ProjectedPrior>(model.prior(), basis)),
        prior_q(InactiveProposal::prior(projected)) {}

  ActiveParticle particle(const Vector& a, int n, int t, std::uint64_t seed) const {
    Engine rng(seed);
    ActiveParticle p;
    static_cast<AsmhState&>(p) =
        build_cloud(a, nullptr, nullptr, 0, n, basis, *projected, *prior_q, model, t, rng);
    p.proposal = prior_q;
    return p;
  }
};

Fixture banana_fixture(int stages = 4) {
  auto lik = std::make_shared<BananaModel>(3, 2, 0.3, standard_normal_data(6, 3));
  return Fixture(lik, tu::plane_basis(3), tu::linear(stages), 1.0);
}

SamplerOptions small_options(int na = 40, int ni = 5) {
  SamplerOptions o;
  o.n_active = na;
  o.n_inactive = ni;
  return o;
}

}  // namespace

TEST(BuildCloud, CarriedPointKeepsIndexAndPath) {
  auto f = banana_fixture();
  Engine rng(1);
  const Vector a = Vector::Constant(1, 0.2);
  const Vector carried = Eigen::Vector2d(0.5, -0.5);
  LogLikPath path = LogLikPath::Constant(f.model.num_stages() + 1, -1.0);
  path(0) = 0.0;
  const AsmhState s = build_cloud(a, &carried, &path, 3, 6, f.basis, *f.projected, *f.prior_q, f.model, 2, rng);
  EXPECT_EQ(s.u, 3);
  EXPECT_EQ(Vector(s.inactive.col(3)), carried);
  EXPECT_EQ(Vector(s.paths.col(3)), path);
  EXPECT_EQ(s.log_w(3), -1.0);
  EXPECT_EQ(f.model.evaluations(), 5);
}

TEST(Reweight, NullStageLeavesWeightUnchanged) {
  auto f = banana_fixture();
  ActiveParticle p = f.particle(Vector::Constant(1, 0.3), 4, 1, 2);
  p.paths.row(2) = p.paths.row(1);
  p.log_weight = -0.7;
  const auto r = assmc_reweight(p, 2, f.prior_q);
  EXPECT_EQ(r.log_increment, 0.0);
  EXPECT_EQ(p.log_weight, -0.7);
}

TEST(Reweight, SameProposalCancels) {
  auto f = banana_fixture();
  ActiveParticle p = f.particle(Vector::Constant(1, -0.4), 5, 2, 3);
  Vector prev(5);
  Vector curr(5);
  for (Index n = 0; n < 5; ++n) {
    prev(n) = p.paths(2, n);
    curr(n) = p.paths(3, n);
  }
  const auto r = assmc_reweight(p, 3, f.prior_q);
  EXPECT_NEAR(r.log_increment, log_sum_exp(curr) - log_sum_exp(prev), 1e-13);
}

TEST(Reweight, ExactPlaneSubspaceIncrementIsRidgeLikelihood) {
  Fixture f(tu::plane(3, 10), tu::plane_basis(3), Tempering::annealed({0.0, 0.2, 0.45, 1.0}));
  const Vector a = Vector::Constant(1, 0.11);
  const double ll = f.lik->log_likelihood(f.basis.active * a);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ActiveParticle p = f.particle(a, 6, 1, seed);
    const auto r = assmc_reweight(p, 2, f.prior_q);
    EXPECT_NEAR(r.log_increment, 0.25 * ll, 1e-9 * std::abs(ll));
  }
}

TEST(Reweight, ProposalSwitchMatchesBruteForce) {
  auto f = banana_fixture();
  ActiveParticle p = f.particle(Vector::Constant(1, 0.1), 4, 1, 4);
  const auto q = InactiveProposal::gaussian(Eigen::Vector2d(0.2, -0.1), 3.0 * Matrix::Identity(2, 2));
  double num_prod = 0.0;
  double den_prod = 0.0;
  Vector num(4);
  Vector den(4);
  for (Index n = 0; n < 4; ++n) {
    const Vector i = p.point(n);
    const double lq = q->log_density(i, p.a);
    num_prod += lq;
    den_prod += p.log_prior_i(n);
    num(n) = p.log_prior_i(n) + p.paths(2, n) - lq;
    den(n) = p.paths(1, n);
  }
  const double expected = (log_sum_exp(num) + num_prod) - (log_sum_exp(den) + den_prod);
  const auto r = assmc_reweight(p, 2, q);
  EXPECT_NEAR(r.log_increment, expected, 1e-10);
  EXPECT_EQ(p.proposal, q);
}

TEST(Reweight, IndependentOfSelectedPoint) {
  auto f = banana_fixture();
  ActiveParticle p = f.particle(Vector::Constant(1, 0.1), 5, 1, 5);
  ActiveParticle q = p;
  q.u = 4;
  EXPECT_EQ(assmc_reweight(p, 2, f.prior_q).log_increment, assmc_reweight(q, 2, f.prior_q).log_increment);
}

TEST(Expectation, ConstantFunctionIsOne) {
  auto f = banana_fixture();
  std::vector<ActiveParticle> ps;
  for (int m = 0; m < 6; ++m) {
    ps.push_back(f.particle(Vector::Constant(1, 0.1 * m), 4, 2, 10 + m));
    ps.back().log_weight = -0.3 * m;
  }
  auto one = [](const Vector&) { return Vector::Ones(1); };
  EXPECT_NEAR(estimate_expectation(ps, f.basis, one, EstimatorMode::kSinglePoint)(0), 1.0, 1e-14);
  EXPECT_NEAR(estimate_expectation(ps, f.basis, one, EstimatorMode::kAllPoints)(0), 1.0, 1e-14);
}

TEST(Expectation, ModesCoincideWithoutInactive) {
  Fixture f(tu::plane(2, 4), Basis::identity(2), tu::linear(2));
  std::vector<ActiveParticle> ps;
  for (int m = 0; m < 5; ++m) {
    ps.push_back(f.particle(Vector::Constant(2, 0.2 * m), 1, 1, 20 + m));
    ps.back().log_weight = 0.1 * m;
  }
  auto id = [](const Vector& x) { return x; };
  EXPECT_EQ(estimate_expectation(ps, f.basis, id, EstimatorMode::kSinglePoint),
            estimate_expectation(ps, f.basis, id, EstimatorMode::kAllPoints));
}

TEST(ActiveProposal, TwoPointExample) {
  Fixture f(tu::plane(1, 2), Basis::identity(1), tu::linear(1));
  std::vector<ActiveParticle> ps{f.particle(Vector::Constant(1, -1.0), 1, 0, 1),
                                 f.particle(Vector::Constant(1, 1.0), 1, 0, 2)};
  EXPECT_NEAR(adapt_active_proposal(ps, Eigen::Vector2d(0.5, 0.5))(0, 0), 5.6644, 1e-8);
}

TEST(ActiveProposal, IdenticalPointsFallBack) {
  Fixture f(tu::plane(2, 2), Basis::identity(2), tu::linear(1));
  std::vector<ActiveParticle> ps(3, f.particle(Eigen::Vector2d(1, 1), 1, 0, 1));
  EXPECT_TRUE(adapt_active_proposal(ps, Vector::Constant(3, 1.0 / 3)).isApprox(Matrix::Identity(2, 2)));
}

TEST(ActiveProposal, WeightedCloudMatchesBruteForce) {
  Fixture f(tu::plane(2, 2), Basis::identity(2), tu::linear(1));
  Engine rng(3);
  std::vector<ActiveParticle> ps;
  for (int m = 0; m < 12; ++m) ps.push_back(f.particle(standard_normal(2, rng), 1, 0, m));
  const Vector w = normalise_log_weights(standard_normal(12, rng));
  Vector mean = Vector::Zero(2);
  for (int m = 0; m < 12; ++m) mean += w(m) * ps[static_cast<std::size_t>(m)].a;
  Matrix cov = Matrix::Zero(2, 2);
  for (int m = 0; m < 12; ++m) {
    const Vector c = ps[static_cast<std::size_t>(m)].a - mean;
    cov += w(m) * c * c.transpose();
  }
  const Matrix expected = 2.38 * 2.38 / 2.0 * cov;
  EXPECT_LT((adapt_active_proposal(ps, w) - expected).cwiseAbs().maxCoeff(), 1e-12 + 1e-10 * expected.trace());
}

TEST(InactiveProposal, FlatStageGivesPreviousWeights) {
  auto f = banana_fixture();
  ActiveParticle p = f.particle(Vector::Constant(1, 0.2), 5, 1, 8);
  p.paths.row(2) = p.paths.row(1);
  p.u = 1;
  const Vector kappa = inactive_adaptation_weights(p, 2);
  Vector prev(5);
  for (Index n = 0; n < 5; ++n) prev(n) = n == 1 ? -std::numeric_limits<double>::infinity() : p.paths(1, n);
  prev = normalise_log_weights(prev);
  EXPECT_LT((kappa - prev).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(InactiveProposal, TwoSurvivorsFallBackInTwoDimensions) {
  auto f = banana_fixture();
  ActiveParticle p = f.particle(Vector::Constant(1, 0.2), 3, 1, 9);
  p.u = 0;
  p.paths(2, 2) = -std::numeric_limits<double>::infinity();
  // Only point 1 keeps weight once u is excluded, so moments are degenerate.
  EXPECT_EQ(adapt_inactive_proposal(p, 2, InactiveFamily::kGaussian, f.prior_q), f.prior_q);
  ActiveParticle r = f.particle(Vector::Constant(1, 0.2), 3, 1, 9);
  r.u = 2;
  EXPECT_EQ(adapt_inactive_proposal(r, 2, InactiveFamily::kGaussian, f.prior_q), f.prior_q);
}

TEST(InactiveProposal, MatchesBruteForce) {
  auto f = banana_fixture();
  ActiveParticle p = f.particle(Vector::Constant(1, -0.2), 8, 1, 10);
  p.u = 3;
  const ProposalPtr q = adapt_inactive_proposal(p, 2, InactiveFamily::kGaussian, f.prior_q);
  Vector w(8);
  for (Index n = 0; n < 8; ++n) w(n) = n == 3 ? -std::numeric_limits<double>::infinity() : p.paths(2, n);
  w = normalise_log_weights(w);
  Vector mean = Vector::Zero(2);
  for (Index n = 0; n < 8; ++n) mean += w(n) * p.point(n);
  Matrix cov = Matrix::Zero(2, 2);
  for (Index n = 0; n < 8; ++n) cov += w(n) * (p.point(n) - mean) * (p.point(n) - mean).transpose();
  ASSERT_FALSE(q->is_prior());
  EXPECT_LT((q->mean(p.a) - mean).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((q->covariance() - cov).cwiseAbs().maxCoeff(), 1e-12);
  const ProposalPtr t = adapt_inactive_proposal(p, 2, InactiveFamily::kStudentT, f.prior_q, 5.0);
  EXPECT_EQ(t->family(), InactiveFamily::kStudentT);
  EXPECT_LT((t->covariance() - cov).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(RunAssmc, StageZeroIsPriorSample) {
  auto f = banana_fixture();
  SamplerOptions o = small_options();
  o.stop_stage = 0;
  const auto r = run_assmc(o, f.model, RngStream(1));
  EXPECT_EQ(r.log_evidence, 0.0);
  EXPECT_TRUE(r.stages.empty());
  EXPECT_NEAR(r.weights.sum(), 1.0, 1e-14);
  EXPECT_LT((r.weights.array() - 1.0 / o.n_active).abs().maxCoeff(), 1e-15);
}

TEST(RunAssmc, SeededDeterminismAndThreadInvariance) {
  auto f = banana_fixture();
  SamplerOptions o = small_options();
  const auto a = run_assmc(o, f.model, RngStream(7));
  const auto b = run_assmc(o, f.model, RngStream(7));
  o.threads = 3;
  const auto c = run_assmc(o, f.model, RngStream(7));
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.log_evidence, b.log_evidence);
  EXPECT_EQ(a.samples, c.samples);
  EXPECT_EQ(a.log_evidence_trace, c.log_evidence_trace);
  EXPECT_EQ(a.likelihood_evaluations, c.likelihood_evaluations);
}

TEST(RunAssmc, EvaluationCountWithOneMovePerStage) {
  auto f = banana_fixture(4);
  SamplerOptions o = small_options(30, 6);
  const auto r = run_assmc(o, f.model, RngStream(2));
  EXPECT_EQ(r.likelihood_evaluations, 30LL * 6 * (1 + 4));
}

TEST(RunAssmc, NoInactiveEqualsStandardSmc) {
  auto lik = tu::plane(3, 8);
  const TargetModel model = tu::target(lik, tu::linear(5));
  for (bool per_particle : {false, true}) {
    SamplerOptions o = small_options(50, 7);
    o.basis = Basis::identity(3);
    o.per_particle_ancestors = per_particle;
    const auto as = run_assmc(o, model, RngStream(11));
    const auto std_smc = run_standard_smc(o, model, RngStream(11));
    EXPECT_EQ(as.samples, std_smc.samples);
    EXPECT_EQ(as.weights, std_smc.weights);
    EXPECT_EQ(as.log_evidence_trace, std_smc.log_evidence_trace);
    EXPECT_EQ(as.posterior_mean, std_smc.posterior_mean);
  }
}

TEST(RunAssmc, GaussianAndStudentProposalsRun) {
  auto f = banana_fixture();
  for (auto family : {InactiveFamily::kGaussian, InactiveFamily::kStudentT}) {
    SamplerOptions o = small_options();
    o.inactive_family = family;
    const auto r = run_assmc(o, f.model, RngStream(3));
    EXPECT_TRUE(std::isfinite(r.log_evidence));
    EXPECT_TRUE(r.posterior_mean.allFinite());
  }
}

TEST(StandardSmc, FlatLikelihoodKeepsPrior) {
  const TargetModel model = tu::target(std::make_shared<tu::FlatLikelihood>(2), tu::linear(3), 4.0);
  SamplerOptions o = small_options(2000, 1);
  const auto r = run_standard_smc(o, model, RngStream(1));
  EXPECT_EQ(r.log_evidence, 0.0);
  for (Index j = 0; j < 2; ++j) EXPECT_NEAR(r.posterior_mean(j), 0.0, 3.0 * std::sqrt(4.0 / 2000) * 3.0);
}

TEST(StandardSmc, SeededDeterminism) {
  const TargetModel model = tu::target(tu::plane(3, 5), tu::linear(4));
  SamplerOptions o = small_options(60, 1);
  const auto a = run_standard_smc(o, model, RngStream(9));
  const auto b = run_standard_smc(o, model, RngStream(9));
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.log_evidence, b.log_evidence);
  EXPECT_EQ(a.likelihood_evaluations, 60LL * (1 + 4));
}
