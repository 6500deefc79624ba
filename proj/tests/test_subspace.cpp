#include <gtest/gtest.h>

#include <sstream>

#include "assmc/subspace.hpp"
#include "test_util.hpp"

using namespace assmc;
using assmc::testing::random_orthonormal;

namespace {

GradientSample<double> sample(Vector g, double w) {
  return {Vector::Zero(g.size()), std::move(g), w};
}

}  // namespace

TEST(EstimateAsMatrix, SingleSampleIsOuterProduct) {
  std::vector<GradientSample<double>> s{sample(Eigen::Vector2d(1, 2), 1.0)};
  const Matrix c = estimate_as_matrix(s);
  Matrix expected(2, 2);
  expected << 1, 2, 2, 4;
  EXPECT_TRUE(c.isApprox(expected, 1e-15));
}

TEST(EstimateAsMatrix, OrthogonalGradientsGiveHalfIdentity) {
  std::vector<GradientSample<double>> s{sample(Vector::Unit(2, 0), 0.5),
                                        sample(Vector::Unit(2, 1), 0.5)};
  EXPECT_TRUE(estimate_as_matrix(s).isApprox(0.5 * Matrix::Identity(2, 2), 1e-15));
}

TEST(EstimateAsMatrix, PlaneScoresAreRankOneAlongOnes) {
  auto lik = assmc::testing::plane(3, 10);
  Engine rng(7);
  std::vector<GradientSample<double>> s;
  for (int m = 0; m < 50; ++m) {
    const Vector theta = 30.0 * standard_normal(3, rng);
    s.push_back({theta, lik->score(theta), 1.0 / 50});
  }
  const auto spec = eigendecompose(estimate_as_matrix(s));
  EXPECT_LT(spec.eigenvalues(1), 1e-10 * spec.eigenvalues(0));
  EXPECT_NEAR(std::abs(spec.eigenvectors.col(0).dot(Vector::Ones(3) / std::sqrt(3.0))), 1.0, 1e-12);
}

TEST(EstimateAsMatrix, IsPsdAndHonoursRank) {
  Engine rng(11);
  const Index d = 6;
  const Index k = 2;
  const Matrix span = random_orthonormal(d, rng).leftCols(k);
  std::vector<GradientSample<double>> s;
  double total = 0.0;
  for (int m = 0; m < 40; ++m) {
    s.push_back(sample(span * standard_normal(k, rng), uniform01(rng)));
    total += s.back().weight;
  }
  for (auto& x : s) x.weight /= total;
  const Matrix c = estimate_as_matrix(s);
  const auto spec = eigendecompose(c);
  EXPECT_GE(spec.eigenvalues.minCoeff(), -1e-10 * c.trace());
  int small = 0;
  for (Index j = 0; j < d; ++j) small += spec.eigenvalues(j) <= 1e-10 * spec.eigenvalues(0);
  EXPECT_EQ(small, d - k);
}

TEST(EstimateAsMatrix, RejectsBadInput) {
  std::vector<GradientSample<double>> empty;
  EXPECT_THROW((void)estimate_as_matrix(empty), Error);
  std::vector<GradientSample<double>> negative{sample(Vector::Ones(2), -1.0)};
  EXPECT_THROW((void)estimate_as_matrix(negative), Error);
}

TEST(Eigendecompose, Diagonal) {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 1;
  m(1, 1) = 4;
  const auto spec = eigendecompose(m);
  EXPECT_DOUBLE_EQ(spec.eigenvalues(0), 4.0);
  EXPECT_DOUBLE_EQ(spec.eigenvalues(1), 1.0);
  EXPECT_NEAR(std::abs(spec.eigenvectors(1, 0)), 1.0, 1e-15);
  EXPECT_NEAR(std::abs(spec.eigenvectors(0, 1)), 1.0, 1e-15);
}

TEST(Eigendecompose, IdentityHasUnitSpectrum) {
  const auto spec = eigendecompose(Matrix(Matrix::Identity(3, 3)));
  EXPECT_TRUE(spec.eigenvalues.isApprox(Vector::Ones(3)));
  EXPECT_LT((spec.eigenvectors.transpose() * spec.eigenvectors - Matrix::Identity(3, 3)).norm(), 1e-14);
}

TEST(Eigendecompose, RankOneTwoByTwo) {
  Matrix m(2, 2);
  m << 1, 2, 2, 4;
  const auto spec = eigendecompose(m);
  EXPECT_NEAR(spec.eigenvalues(0), 5.0, 1e-13);
  EXPECT_NEAR(spec.eigenvalues(1), 0.0, 1e-13);
  EXPECT_NEAR(std::abs(spec.eigenvectors.col(0).dot(Eigen::Vector2d(1, 2) / std::sqrt(5.0))), 1.0, 1e-13);
}

TEST(Eigendecompose, MatchesEigenSelfAdjointSolver) {
  Engine rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Index d = 2 + trial % 9;
    Matrix g(d, d);
    for (Index j = 0; j < d; ++j) g.col(j) = standard_normal(d, rng);
    const Matrix m = g * g.transpose();
    const auto spec = eigendecompose(m);
    Eigen::SelfAdjointEigenSolver<Matrix> ref(m);
    const Vector ref_desc = ref.eigenvalues().reverse();
    EXPECT_LT((spec.eigenvalues - ref_desc).cwiseAbs().maxCoeff(), 1e-10 * ref_desc(0));
    EXPECT_LT((m * spec.eigenvectors - spec.eigenvectors * spec.eigenvalues.asDiagonal()).norm(),
              1e-10 * m.norm());
  }
}

TEST(Eigendecompose, IsDeterministic) {
  Engine rng(5);
  Matrix g(5, 5);
  for (Index j = 0; j < 5; ++j) g.col(j) = standard_normal(5, rng);
  const Matrix m = g * g.transpose();
  const auto a = eigendecompose(m);
  const auto b = eigendecompose(m);
  EXPECT_EQ(a.eigenvalues, b.eigenvalues);
  EXPECT_EQ(a.eigenvectors, b.eigenvectors);
}

TEST(Eigendecompose, RejectsAsymmetric) {
  Matrix m(2, 2);
  m << 1, 2, 0, 1;
  EXPECT_THROW((void)eigendecompose(m), Error);
}

TEST(SplitBasis, LargestGapPicksTwo) {
  Spectrum<double> s{Eigen::Vector3d(5, 4.9, 1e-8), Matrix::Identity(3, 3)};
  const auto b = split_basis(s, GapRule::largest_gap());
  EXPECT_EQ(b.active_dim(), 2);
  EXPECT_EQ(b.inactive_dim(), 1);
}

TEST(SplitBasis, FlatSpectrumKeepsEverythingActive) {
  Spectrum<double> s{Vector::Ones(4), Matrix::Identity(4, 4)};
  const auto b = split_basis(s, GapRule::largest_gap());
  EXPECT_EQ(b.active_dim(), 4);
  EXPECT_EQ(b.inactive_dim(), 0);
}

TEST(SplitBasis, ExplainedVarianceAndFixed) {
  Spectrum<double> s{(Vector(4) << 6, 3, 0.9, 0.1).finished(), Matrix::Identity(4, 4)};
  EXPECT_EQ(split_basis(s, GapRule::explained_variance(0.9)).active_dim(), 2);
  EXPECT_EQ(split_basis(s, GapRule::explained_variance(0.95)).active_dim(), 3);
  EXPECT_EQ(split_basis(s, GapRule::fixed(3)).active_dim(), 3);
  EXPECT_THROW((void)split_basis(s, GapRule::fixed(5)), Error);
}

TEST(SplitBasis, TieBreaksTowardSmallerActiveDim) {
  Spectrum<double> s{(Vector(4) << 8, 4, 2, 1).finished(), Matrix::Identity(4, 4)};
  EXPECT_EQ(split_basis(s, GapRule::largest_gap()).active_dim(), 1);
}

TEST(SplitBasis, PlaneTwentyFiveIsOneDimensional) {
  auto lik = assmc::testing::plane(25, 100);
  const Gaussian prior = toy_prior(25);
  Engine rng(2);
  std::vector<GradientSample<double>> s;
  for (int m = 0; m < 200; ++m) {
    const Vector theta = prior.sample(rng);
    s.push_back({theta, lik->score(theta), 1.0 / 200});
  }
  EXPECT_EQ(split_basis(eigendecompose(estimate_as_matrix(s)), GapRule::largest_gap()).active_dim(), 1);
}

TEST(BasisProperties, OrthonormalityAndRoundTrip) {
  Engine rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const Index d = 2 + trial % 7;
    const Matrix q = random_orthonormal(d, rng);
    Spectrum<double> s{Vector::LinSpaced(d, static_cast<double>(d), 1.0), q};
    const auto b = split_basis(s, GapRule::fixed(1 + trial % d));
    EXPECT_LT(orthonormality_error(b), 1e-10);
    const Matrix proj = b.active * b.active.transpose() + b.inactive * b.inactive.transpose();
    EXPECT_LT((proj - Matrix::Identity(d, d)).cwiseAbs().maxCoeff(), 1e-10);
    const Vector theta = 10.0 * standard_normal(d, rng);
    EXPECT_LT((b.reconstruct(b.to_active(theta), b.to_inactive(theta)) - theta).cwiseAbs().maxCoeff(),
              1e-10 * (1 + theta.norm()));
  }
}

TEST(BasisProperties, IdentityBasisKeepsTheta) {
  const Basis b = Basis::identity(3);
  const Vector theta = Eigen::Vector3d(1, -2, 3);
  EXPECT_EQ(b.to_active(theta), theta);
  EXPECT_EQ(b.inactive_dim(), 0);
  EXPECT_EQ(b.reconstruct(theta, Vector()), theta);
}

TEST(BasisProperties, AlignSignsFlipsToMatchPrevious) {
  Basis prev = Basis::identity(2);
  Basis next = prev;
  next.active.col(1) *= -1.0;
  align_signs(next, prev);
  EXPECT_EQ(next.active, prev.active);
}

TEST(SpectrumCsv, WritesOneRowPerEigenvalue) {
  Spectrum<double> s{Eigen::Vector2d(2, 1), Matrix::Identity(2, 2)};
  std::ostringstream os;
  write_spectrum_csv(os, s);
  EXPECT_EQ(os.str(), "index,eigenvalue\n1,2\n2,1\n");
}
