#include <gtest/gtest.h>

#include "assmc/asmh.hpp"
#include "assmc/assmc2.hpp"
#include "assmc/baseline_smc.hpp"
#include "test_util.hpp"

using namespace assmc;
namespace tu = assmc::testing;

namespace {

TargetModel banana_model(int stages) {
  return tu::target(std::make_shared<BananaModel>(3, 2, 0.3, standard_normal_data(6, 3)), tu::linear(stages), 1.0);
}

const ResamplePolicy kInnerPolicy{ResampleScheme::kStratified, ResampleTrigger::kEss, 0.5};

}  // namespace

TEST(InnerSmc, FirstStageIsImportanceSampling) {
  const TargetModel model = banana_model(4);
  const Basis basis = tu::plane_basis(3);
  const ProjectedPrior projected(model.prior(), basis);
  const Vector a = Vector::Constant(1, 0.3);
  const auto s = inner_smc(a, basis, projected, model, 1, 8, {}, kInnerPolicy, 1, RngStream(2));
  Vector row(8);
  for (Index k = 0; k < 8; ++k) row(k) = s.paths(1, k);
  EXPECT_NEAR(s.log_evidence, log_mean_exp(row), 1e-12);
  EXPECT_EQ(s.stage, 1);
  EXPECT_EQ(model.evaluations(), 8);
}

TEST(InnerSmc, EvidenceIsSumOfStageTerms) {
  const TargetModel model = banana_model(6);
  const Basis basis = tu::plane_basis(3);
  const ProjectedPrior projected(model.prior(), basis);
  const auto s = inner_smc(Vector::Constant(1, -0.2), basis, projected, model, 5, 6, {}, kInnerPolicy, 1,
                           RngStream(3));
  double total = 0.0;
  for (double v : s.stage_log_sums) total += v;
  EXPECT_EQ(s.stage_log_sums.size(), 5u);
  EXPECT_NEAR(s.log_evidence, total, 1e-12);
  EXPECT_NEAR(s.log_w.array().exp().sum(), 1.0, 1e-12);
}

TEST(InnerSmc, ExactSubspaceGivesExactEvidence) {
  const TargetModel model = tu::target(tu::plane(4, 10), tu::linear(5));
  const Basis basis = tu::plane_basis(4);
  const ProjectedPrior projected(model.prior(), basis);
  const Vector a = Vector::Constant(1, 0.07);
  const double ll = model.likelihood().log_likelihood(basis.active * a);
  for (int t = 1; t <= 5; ++t) {
    const auto s = inner_smc(a, basis, projected, model, t, 5, {}, kInnerPolicy, 1, RngStream(t));
    EXPECT_NEAR(s.log_evidence, 0.2 * t * ll, 1e-9 * std::abs(ll));
  }
}

TEST(InnerSmc, FlatLikelihoodHasUnitEvidence) {
  const TargetModel model = tu::target(std::make_shared<tu::FlatLikelihood>(3), tu::linear(4));
  const Basis basis = tu::plane_basis(3);
  const ProjectedPrior projected(model.prior(), basis);
  const auto s = inner_smc(Vector::Constant(1, 1.0), basis, projected, model, 4, 7, {}, kInnerPolicy, 1,
                           RngStream(4));
  EXPECT_NEAR(s.log_evidence, 0.0, 1e-14);
}

TEST(InnerSmc, RejectsBadStage) {
  const TargetModel model = banana_model(3);
  const Basis basis = tu::plane_basis(3);
  const ProjectedPrior projected(model.prior(), basis);
  EXPECT_THROW((void)inner_smc(Vector::Zero(1), basis, projected, model, 0, 4, {}, kInnerPolicy, 1, RngStream(1)),
               Error);
  EXPECT_THROW((void)inner_smc(Vector::Zero(1), basis, projected, model, 4, 4, {}, kInnerPolicy, 1, RngStream(1)),
               Error);
}

TEST(Pmmh, RejectionLeavesParticleUntouched) {
  const TargetModel model = banana_model(4);
  const Basis basis = tu::plane_basis(3);
  const ProjectedPrior projected(model.prior(), basis);
  Engine init(5);
  Smc2Particle p;
  p.a = Vector::Constant(1, 0.1);
  p.inner = inner_smc_init(p.a, nullptr, basis, projected, model, 5, init);
  (void)inner_smc_reweight(p.inner);
  (void)inner_smc_reweight(p.inner);
  p.log_weight = -0.4;
  const RandomWalk q_a(Matrix::Constant(1, 1, 25.0));
  int rejected = 0;
  for (std::uint64_t seed = 0; seed < 40 && rejected < 5; ++seed) {
    Smc2Particle copy = p;
    Engine rng(seed);
    if (!aspmmh_move(copy, 2, q_a, basis, projected, model, 5, {}, kInnerPolicy, 1, rng, RngStream(seed))) {
      ++rejected;
      EXPECT_EQ(copy.a, p.a);
      EXPECT_EQ(copy.inner.points, p.inner.points);
      EXPECT_EQ(copy.inner.log_w, p.inner.log_w);
      EXPECT_EQ(copy.inner.log_evidence, p.inner.log_evidence);
      EXPECT_EQ(copy.log_weight, p.log_weight);
    } else {
      EXPECT_EQ(copy.inner.stage, 2);
      EXPECT_EQ(copy.log_weight, p.log_weight);
    }
  }
  EXPECT_GT(rejected, 0);
}

TEST(PooledProposal, MatchesBruteForce) {
  const TargetModel model = banana_model(4);
  const Basis basis = tu::plane_basis(3);
  const ProjectedPrior projected(model.prior(), basis);
  Engine rng(6);
  std::vector<Smc2Particle> ps(4);
  for (auto& p : ps) {
    p.a = standard_normal(1, rng);
    p.inner = inner_smc_init(p.a, nullptr, basis, projected, model, 3, rng);
    p.inner.log_w = normalise_log_weights(standard_normal(3, rng));
  }
  const Vector outer = normalise_log_weights(standard_normal(4, rng));
  const ProposalPtr q = adapt_inner_proposal(ps, outer, InactiveFamily::kGaussian);
  ASSERT_TRUE(q);
  Vector mean = Vector::Zero(2);
  double total = 0.0;
  for (std::size_t m = 0; m < 4; ++m) {
    for (Index k = 0; k < 3; ++k) {
      const double w = outer(static_cast<Index>(m)) * std::exp(ps[m].inner.log_w(k));
      mean += w * ps[m].inner.points.col(k);
      total += w;
    }
  }
  mean /= total;
  Matrix cov = Matrix::Zero(2, 2);
  for (std::size_t m = 0; m < 4; ++m) {
    for (Index k = 0; k < 3; ++k) {
      const double w = outer(static_cast<Index>(m)) * std::exp(ps[m].inner.log_w(k)) / total;
      const Vector c = ps[m].inner.points.col(k) - mean;
      cov += w * c * c.transpose();
    }
  }
  EXPECT_LT((q->mean(ps[0].a) - mean).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((q->covariance() - cov).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_FALSE(adapt_inner_proposal(ps, outer, InactiveFamily::kPrior));
}

TEST(PooledProposal, SinglePointFallsBackToPrior) {
  const TargetModel model = banana_model(4);
  const Basis basis = tu::plane_basis(3);
  const ProjectedPrior projected(model.prior(), basis);
  Engine rng(7);
  std::vector<Smc2Particle> ps(3);
  for (auto& p : ps) {
    p.a = standard_normal(1, rng);
    p.inner = inner_smc_init(p.a, nullptr, basis, projected, model, 1, rng);
  }
  EXPECT_FALSE(adapt_inner_proposal(ps, Vector::Constant(3, 1.0 / 3), InactiveFamily::kGaussian));
}

TEST(RunAssmc2, FlatLikelihoodHasUnitEvidence) {
  const TargetModel model = tu::target(std::make_shared<tu::FlatLikelihood>(3), tu::linear(3));
  SamplerOptions o;
  o.n_active = 20;
  o.n_inactive = 4;
  o.basis = tu::plane_basis(3);
  const auto r = run_assmc2(o, model, RngStream(1));
  EXPECT_NEAR(r.log_evidence, 0.0, 1e-14);
}

TEST(RunAssmc2, NoInactiveEqualsStandardSmc) {
  const TargetModel model = tu::target(tu::plane(3, 8), tu::linear(5));
  SamplerOptions o;
  o.n_active = 50;
  o.n_inactive = 6;
  o.basis = Basis::identity(3);
  const auto a = run_assmc2(o, model, RngStream(11));
  const auto b = run_standard_smc(o, model, RngStream(11));
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.log_evidence_trace, b.log_evidence_trace);
}

TEST(RunAssmc2, SeededDeterminismAndThreadInvariance) {
  const TargetModel model = banana_model(3);
  SamplerOptions o;
  o.n_active = 25;
  o.n_inactive = 4;
  o.inactive_family = InactiveFamily::kGaussian;
  const auto a = run_assmc2(o, model, RngStream(5));
  o.threads = 3;
  const auto b = run_assmc2(o, model, RngStream(5));
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.log_evidence_trace, b.log_evidence_trace);
  EXPECT_EQ(a.posterior_mean_all, b.posterior_mean_all);
}

TEST(RunAssmc2, EvaluationCountMatchesFormula) {
  EXPECT_EQ(assmc2_expected_evaluations(1, 1, 1), 3);
  EXPECT_EQ(assmc2_expected_evaluations(2, 3, 4), 6LL * (1 + 4 + 10));
  const TargetModel model = tu::target(tu::plane(4, 10), tu::linear(4));
  SamplerOptions o;
  o.n_active = 20;
  o.n_inactive = 5;
  o.basis = tu::plane_basis(4);
  const auto r = run_assmc2(o, model, RngStream(9));
  EXPECT_EQ(r.likelihood_evaluations, assmc2_expected_evaluations(20, 5, 4));
}
