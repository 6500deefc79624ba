#include "assmc/proposals.hpp"

#include <Eigen/Eigenvalues>

namespace assmc {

ProposalPtr InactiveProposal::prior(std::shared_ptr<const ProjectedPrior> projected) {
  if (!projected) throw Error("InactiveProposal: missing projected prior");
  auto out = std::make_shared<InactiveProposal>();
  out->family_ = InactiveFamily::kPrior;
  out->projected_ = std::move(projected);
  return out;
}

ProposalPtr InactiveProposal::gaussian(Vector mean, const Matrix& covariance) {
  auto out = std::make_shared<InactiveProposal>();
  out->family_ = InactiveFamily::kGaussian;
  out->gaussian_ = Gaussian::full(std::move(mean), covariance);
  return out;
}

ProposalPtr InactiveProposal::student_t(Vector mean, const Matrix& scale, double dof) {
  auto out = std::make_shared<InactiveProposal>();
  out->family_ = InactiveFamily::kStudentT;
  out->student_ = StudentT(std::move(mean), scale, dof);
  return out;
}

Index InactiveProposal::dim() const {
  switch (family_) {
    case InactiveFamily::kPrior:
      return projected_->inactive_dim();
    case InactiveFamily::kGaussian:
      return gaussian_.dim();
    case InactiveFamily::kStudentT:
      return student_.dim();
  }
  return 0;
}

double InactiveProposal::log_density(const Vector& i, const Vector& a) const {
  switch (family_) {
    case InactiveFamily::kPrior:
      return projected_->log_conditional(i, a);
    case InactiveFamily::kGaussian:
      return gaussian_.log_density(i);
    case InactiveFamily::kStudentT:
      return student_.log_density(i);
  }
  return 0.0;
}

Vector InactiveProposal::sample(const Vector& a, Engine& rng) const {
  switch (family_) {
    case InactiveFamily::kPrior:
      return projected_->sample_conditional(a, rng);
    case InactiveFamily::kGaussian:
      return gaussian_.sample(rng);
    case InactiveFamily::kStudentT:
      return student_.sample(rng);
  }
  return {};
}

Vector InactiveProposal::mean(const Vector& a) const {
  switch (family_) {
    case InactiveFamily::kPrior:
      return projected_->conditional_mean(a);
    case InactiveFamily::kGaussian:
      return gaussian_.mean();
    case InactiveFamily::kStudentT:
      return student_.location();
  }
  return {};
}

Matrix InactiveProposal::covariance() const {
  switch (family_) {
    case InactiveFamily::kPrior:
      return projected_->conditional().covariance();
    case InactiveFamily::kGaussian:
      return gaussian_.covariance();
    case InactiveFamily::kStudentT:
      return student_.scale();
  }
  return {};
}

std::optional<WeightedMoments> weighted_moments(const Matrix& points, const Vector& weights) {
  if (points.cols() != weights.size()) throw Error("weighted_moments: size mismatch");
  const Index d = points.rows();
  if (d == 0) return std::nullopt;
  int positive = 0;
  double total = 0.0;
  for (Index n = 0; n < weights.size(); ++n) {
    if (weights(n) < 0.0 || !std::isfinite(weights(n))) {
      throw Error("weighted_moments: weights must be finite and nonnegative");
    }
    if (weights(n) > 0.0) ++positive;
    total += weights(n);
  }
  if (positive < 2) return std::nullopt;
  const Vector w = weights / total;
  WeightedMoments out;
  out.mean = points * w;
  out.covariance = Matrix::Zero(d, d);
  for (Index n = 0; n < points.cols(); ++n) {
    if (w(n) == 0.0) continue;
    const Vector diff = points.col(n) - out.mean;
    out.covariance.noalias() += w(n) * diff * diff.transpose();
  }
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(out.covariance, Eigen::EigenvaluesOnly);
  const double top = eig.eigenvalues().maxCoeff();
  const double bottom = eig.eigenvalues().minCoeff();
  if (!(top > 0.0) || !std::isfinite(top) || !(bottom > 1e-10 * top)) return std::nullopt;
  return out;
}

ProposalPtr fitted_proposal(InactiveFamily family, const std::optional<WeightedMoments>& moments,
                            const ProposalPtr& fallback, double dof) {
  if (family == InactiveFamily::kPrior || !moments) return fallback;
  if (family == InactiveFamily::kGaussian) {
    return InactiveProposal::gaussian(moments->mean, moments->covariance);
  }
  return InactiveProposal::student_t(moments->mean, moments->covariance, dof);
}

}  // namespace assmc
