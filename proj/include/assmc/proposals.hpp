#pragma once

// Proposals for the inactive variables: the prior conditional p_i(. | a), or
// a Gaussian / Student-t fitted to weighted inactive points.

#include <memory>
#include <optional>

#include "assmc/gaussian.hpp"
#include "assmc/model.hpp"

namespace assmc {

enum class InactiveFamily { kPrior, kGaussian, kStudentT };

class InactiveProposal;
using ProposalPtr = std::shared_ptr<const InactiveProposal>;

class InactiveProposal {
 public:
  static ProposalPtr prior(std::shared_ptr<const ProjectedPrior> projected);
  static ProposalPtr gaussian(Vector mean, const Matrix& covariance);
  static ProposalPtr student_t(Vector mean, const Matrix& scale, double dof = 5.0);

  [[nodiscard]] InactiveFamily family() const { return family_; }
  [[nodiscard]] bool is_prior() const { return family_ == InactiveFamily::kPrior; }
  [[nodiscard]] Index dim() const;

  [[nodiscard]] double log_density(const Vector& i, const Vector& a) const;
  [[nodiscard]] Vector sample(const Vector& a, Engine& rng) const;

  /// Fitted location; for the prior family the conditional mean at a.
  [[nodiscard]] Vector mean(const Vector& a) const;
  /// Covariance, or the scale matrix for the Student-t family.
  [[nodiscard]] Matrix covariance() const;

 private:
  InactiveFamily family_ = InactiveFamily::kPrior;
  std::shared_ptr<const ProjectedPrior> projected_;
  Gaussian gaussian_;
  StudentT student_;
};

struct WeightedMoments {
  Vector mean;
  Matrix covariance;
};

/// Weighted mean and covariance of the columns of `points` under weights
/// that need not be normalised. Empty when fewer than two points carry weight
/// or the covariance is numerically singular.
[[nodiscard]] std::optional<WeightedMoments> weighted_moments(const Matrix& points,
                                                              const Vector& weights);

/// Builds a fitted proposal of `family` from moments, or returns `fallback`
/// when the moments are missing.
[[nodiscard]] ProposalPtr fitted_proposal(InactiveFamily family,
                                          const std::optional<WeightedMoments>& moments,
                                          const ProposalPtr& fallback, double dof = 5.0);

}  // namespace assmc
