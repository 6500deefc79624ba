#pragma once

#include <cmath>
#include <numbers>

#include "assmc/rng.hpp"
#include "assmc/types.hpp"

namespace assmc {

inline Vector standard_normal(Index n, Engine& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector z(n);
  for (Index k = 0; k < n; ++k) z(k) = normal(rng);
  return z;
}

/// Multivariate normal with an isotropic fast path. The mean can be
/// overridden per call, which is how affine conditionals reuse one factor.
class Gaussian {
 public:
  Gaussian() = default;

  static Gaussian isotropic(Vector mean, double variance) {
    if (!(variance > 0.0)) throw Error("Gaussian: variance must be positive");
    Gaussian g;
    g.isotropic_ = true;
    g.variance_ = variance;
    g.mean_ = std::move(mean);
    const auto d = static_cast<double>(g.mean_.size());
    g.log_norm_ = -0.5 * d * std::log(2.0 * std::numbers::pi * variance);
    return g;
  }

  static Gaussian full(Vector mean, const Matrix& covariance) {
    if (covariance.rows() != mean.size() || covariance.cols() != mean.size()) {
      throw Error("Gaussian: covariance shape does not match mean");
    }
    Gaussian g;
    g.isotropic_ = false;
    g.mean_ = std::move(mean);
    Eigen::LLT<Matrix> llt(0.5 * (covariance + covariance.transpose()));
    if (llt.info() != Eigen::Success) throw Error("Gaussian: covariance is not positive definite");
    g.chol_ = llt.matrixL();
    const auto d = static_cast<double>(g.mean_.size());
    double log_det_half = 0.0;
    for (Index k = 0; k < g.chol_.rows(); ++k) {
      if (!(g.chol_(k, k) > 0.0)) throw Error("Gaussian: covariance is not positive definite");
      log_det_half += std::log(g.chol_(k, k));
    }
    g.log_norm_ = -0.5 * d * std::log(2.0 * std::numbers::pi) - log_det_half;
    return g;
  }

  [[nodiscard]] Index dim() const { return mean_.size(); }
  [[nodiscard]] bool is_isotropic() const { return isotropic_; }
  [[nodiscard]] double variance() const { return variance_; }
  [[nodiscard]] const Vector& mean() const { return mean_; }
  [[nodiscard]] Matrix covariance() const {
    if (isotropic_) return variance_ * Matrix::Identity(dim(), dim());
    return chol_ * chol_.transpose();
  }
  /// Lower Cholesky factor of the covariance.
  [[nodiscard]] Matrix cholesky() const {
    if (isotropic_) return std::sqrt(variance_) * Matrix::Identity(dim(), dim());
    return chol_;
  }

  [[nodiscard]] double log_density(const Vector& x) const { return log_density(x, mean_); }
  [[nodiscard]] double log_density(const Vector& x, const Vector& mean) const {
    if (isotropic_) return -0.5 * (x - mean).squaredNorm() / variance_ + log_norm_;
    const Vector z = chol_.triangularView<Eigen::Lower>().solve(x - mean);
    return -0.5 * z.squaredNorm() + log_norm_;
  }

  [[nodiscard]] Vector sample(Engine& rng) const { return sample(mean_, rng); }
  [[nodiscard]] Vector sample(const Vector& mean, Engine& rng) const {
    const Vector z = standard_normal(dim(), rng);
    if (isotropic_) return mean + std::sqrt(variance_) * z;
    return mean + chol_.triangularView<Eigen::Lower>() * z;
  }

 private:
  Vector mean_;
  Matrix chol_;
  double variance_ = 1.0;
  double log_norm_ = 0.0;
  bool isotropic_ = true;
};

/// Multivariate Student-t with location, scale matrix and dof.
class StudentT {
 public:
  StudentT() = default;
  StudentT(Vector location, const Matrix& scale, double dof) : dof_(dof) {
    if (!(dof > 0.0)) throw Error("StudentT: degrees of freedom must be positive");
    base_ = Gaussian::full(std::move(location), scale);
    const auto d = static_cast<double>(base_.dim());
    const Matrix l = base_.cholesky();
    double log_det_half = 0.0;
    for (Index k = 0; k < l.rows(); ++k) log_det_half += std::log(l(k, k));
    log_norm_ = std::lgamma(0.5 * (dof + d)) - std::lgamma(0.5 * dof) -
                0.5 * d * std::log(dof * std::numbers::pi) - log_det_half;
    chol_ = l;
  }

  [[nodiscard]] Index dim() const { return base_.dim(); }
  [[nodiscard]] double dof() const { return dof_; }
  [[nodiscard]] const Vector& location() const { return base_.mean(); }
  [[nodiscard]] Matrix scale() const { return chol_ * chol_.transpose(); }

  [[nodiscard]] double log_density(const Vector& x) const {
    const auto d = static_cast<double>(dim());
    const Vector z = chol_.triangularView<Eigen::Lower>().solve(x - location());
    return log_norm_ - 0.5 * (dof_ + d) * std::log1p(z.squaredNorm() / dof_);
  }

  [[nodiscard]] Vector sample(Engine& rng) const {
    const Vector z = standard_normal(dim(), rng);
    const double chi2 = std::chi_squared_distribution<double>(dof_)(rng);
    return location() + std::sqrt(dof_ / chi2) * Vector(chol_.triangularView<Eigen::Lower>() * z);
  }

 private:
  Gaussian base_;
  Matrix chol_;
  double dof_ = 5.0;
  double log_norm_ = 0.0;
};

}  // namespace assmc
