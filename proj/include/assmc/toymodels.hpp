#pragma once

// Concrete test models: the plane (linear ridge), banana (curved ridge) and
// Gaussian-Cauchy toy, with analytic scores and conjugate oracles.

#include <memory>
#include <utility>
#include <vector>

#include "assmc/model.hpp"

namespace assmc {

inline constexpr double kToyPriorVariance = 5000.0;

/// y_k ~ N(sum_j theta_j, 1).
class PlaneModel final : public Likelihood {
 public:
  PlaneModel(Index d, std::vector<double> data, double prior_var = kToyPriorVariance);

  /// d = 25 with 100 observations from N(0, 1) drawn from `data_seed`.
  static PlaneModel defaults(std::uint64_t data_seed);

  [[nodiscard]] Index dim() const override { return d_; }
  [[nodiscard]] std::size_t num_terms() const override { return data_.size(); }
  [[nodiscard]] double log_terms(const Vector& theta, std::size_t begin,
                                 std::size_t end) const override;
  [[nodiscard]] Vector score_terms(const Vector& theta, std::size_t begin,
                                   std::size_t end) const override;
  [[nodiscard]] std::string name() const override { return "plane"; }

  [[nodiscard]] const std::vector<double>& data() const { return data_; }
  [[nodiscard]] double prior_var() const { return prior_var_; }

 private:
  Index d_;
  std::vector<double> data_;
  double prior_var_;
};

/// y_k ~ N(sum_j theta_j + b sum_{j<k} theta_j^2, 1); the squared coordinates
/// are the first k.
class BananaModel final : public Likelihood {
 public:
  BananaModel(Index d, Index k, double b, std::vector<double> data,
              double prior_var = kToyPriorVariance);

  /// d = 25, k = 3, b = 0.001 with 100 observations from N(0, 1).
  static BananaModel defaults(std::uint64_t data_seed);

  [[nodiscard]] Index dim() const override { return d_; }
  [[nodiscard]] std::size_t num_terms() const override { return data_.size(); }
  [[nodiscard]] double log_terms(const Vector& theta, std::size_t begin,
                                 std::size_t end) const override;
  [[nodiscard]] Vector score_terms(const Vector& theta, std::size_t begin,
                                   std::size_t end) const override;
  [[nodiscard]] std::string name() const override { return "banana"; }

  [[nodiscard]] Index curved_dims() const { return k_; }
  [[nodiscard]] double curvature() const { return b_; }
  [[nodiscard]] const std::vector<double>& data() const { return data_; }
  [[nodiscard]] double prior_var() const { return prior_var_; }

 private:
  Index d_;
  Index k_;
  double b_;
  std::vector<double> data_;
  double prior_var_;
};

/// Unnormalised, separable likelihood
///   l(theta) = prod_j exp(-(theta_j / sigma_j)^2) / (1 + (theta_j / gamma_j)^2).
/// Each dimension is one likelihood term.
class GaussCauchyModel final : public Likelihood {
 public:
  GaussCauchyModel(Vector sigma, Vector gamma, double prior_var = kToyPriorVariance);

  /// d = 2, sigma = (10, 50), gamma = (1e12, 0.1).
  static GaussCauchyModel defaults();

  [[nodiscard]] Index dim() const override { return sigma_.size(); }
  [[nodiscard]] std::size_t num_terms() const override {
    return static_cast<std::size_t>(sigma_.size());
  }
  [[nodiscard]] double log_terms(const Vector& theta, std::size_t begin,
                                 std::size_t end) const override;
  [[nodiscard]] Vector score_terms(const Vector& theta, std::size_t begin,
                                   std::size_t end) const override;
  [[nodiscard]] std::string name() const override { return "gauss-cauchy"; }

  /// Per-dimension log factor f_j(theta_j).
  [[nodiscard]] double log_factor(Index j, double x) const;

  [[nodiscard]] const Vector& sigma() const { return sigma_; }
  [[nodiscard]] const Vector& gamma() const { return gamma_; }
  [[nodiscard]] double prior_var() const { return prior_var_; }

 private:
  Vector sigma_;
  Vector gamma_;
  double prior_var_;
};

/// Gauss-Cauchy score, componentwise -2 x (1/sigma^2 + 1/(x^2 + gamma^2)).
Vector gausscauchy_score(const Vector& theta, const Vector& sigma, const Vector& gamma);

/// Synthetic observations y_k ~ N(0, 1).
std::vector<double> standard_normal_data(std::size_t n, std::uint64_t seed);

/// Exact log marginal likelihood of the plane model under the prior
/// N(0, prior_var I).
double plane_log_evidence(const PlaneModel& model);

struct GaussianMoments {
  Vector mean;
  Matrix covariance;
};

/// Exact Gaussian posterior of the plane model.
GaussianMoments plane_posterior_moments(const PlaneModel& model);

/// Isotropic N(0, prior_var I) prior of the toy models.
Gaussian toy_prior(Index d, double prior_var = kToyPriorVariance);

}  // namespace assmc
