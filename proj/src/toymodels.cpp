#include "assmc/toymodels.hpp"

#include <cmath>
#include <numbers>

#include "assmc/rng.hpp"

namespace assmc {
namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;

void check_range(std::size_t begin, std::size_t end, std::size_t n) {
  if (begin > end || end > n) throw Error("likelihood: term range out of bounds");
}

void check_theta(const Vector& theta, Index d) {
  if (theta.size() != d) {
    throw Error("likelihood: expected dimension " + std::to_string(d) + ", got " +
                std::to_string(theta.size()));
  }
}

}  // namespace

std::vector<double> standard_normal_data(std::size_t n, std::uint64_t seed) {
  Engine rng = RngStream(seed).derive(Purpose::kData).engine();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out(n);
  for (auto& y : out) y = normal(rng);
  return out;
}

Gaussian toy_prior(Index d, double prior_var) { return Gaussian::isotropic(Vector::Zero(d), prior_var); }

PlaneModel::PlaneModel(Index d, std::vector<double> data, double prior_var)
    : d_(d), data_(std::move(data)), prior_var_(prior_var) {
  if (d < 1) throw Error("plane: dimension must be positive");
}

PlaneModel PlaneModel::defaults(std::uint64_t data_seed) {
  return PlaneModel(25, standard_normal_data(100, data_seed));
}

double PlaneModel::log_terms(const Vector& theta, std::size_t begin, std::size_t end) const {
  check_theta(theta, d_);
  check_range(begin, end, data_.size());
  const double mu = theta.sum();
  double acc = 0.0;
  for (std::size_t k = begin; k < end; ++k) {
    const double r = data_[k] - mu;
    acc -= 0.5 * r * r + kHalfLog2Pi;
  }
  return acc;
}

Vector PlaneModel::score_terms(const Vector& theta, std::size_t begin, std::size_t end) const {
  check_theta(theta, d_);
  check_range(begin, end, data_.size());
  const double mu = theta.sum();
  double r_sum = 0.0;
  for (std::size_t k = begin; k < end; ++k) r_sum += data_[k] - mu;
  return Vector::Constant(d_, r_sum);
}

BananaModel::BananaModel(Index d, Index k, double b, std::vector<double> data, double prior_var)
    : d_(d), k_(k), b_(b), data_(std::move(data)), prior_var_(prior_var) {
  if (d < 1) throw Error("banana: dimension must be positive");
  if (k < 1 || k > d) throw Error("banana: curved dimension count must lie in [1, d]");
}

BananaModel BananaModel::defaults(std::uint64_t data_seed) {
  return BananaModel(25, 3, 0.001, standard_normal_data(100, data_seed));
}

double BananaModel::log_terms(const Vector& theta, std::size_t begin, std::size_t end) const {
  check_theta(theta, d_);
  check_range(begin, end, data_.size());
  const double mu = theta.sum() + b_ * theta.head(k_).squaredNorm();
  double acc = 0.0;
  for (std::size_t k = begin; k < end; ++k) {
    const double r = data_[k] - mu;
    acc -= 0.5 * r * r + kHalfLog2Pi;
  }
  return acc;
}

Vector BananaModel::score_terms(const Vector& theta, std::size_t begin, std::size_t end) const {
  check_theta(theta, d_);
  check_range(begin, end, data_.size());
  const double mu = theta.sum() + b_ * theta.head(k_).squaredNorm();
  double r_sum = 0.0;
  for (std::size_t k = begin; k < end; ++k) r_sum += data_[k] - mu;
  Vector grad = Vector::Constant(d_, r_sum);
  for (Index j = 0; j < k_; ++j) grad(j) = r_sum * (1.0 + 2.0 * b_ * theta(j));
  return grad;
}

GaussCauchyModel::GaussCauchyModel(Vector sigma, Vector gamma, double prior_var)
    : sigma_(std::move(sigma)), gamma_(std::move(gamma)), prior_var_(prior_var) {
  if (sigma_.size() != gamma_.size() || sigma_.size() < 1) {
    throw Error("gauss-cauchy: sigma and gamma must be nonempty and of equal length");
  }
  if ((sigma_.array() <= 0.0).any() || (gamma_.array() <= 0.0).any()) {
    throw Error("gauss-cauchy: sigma and gamma must be positive");
  }
}

GaussCauchyModel GaussCauchyModel::defaults() {
  return GaussCauchyModel(Eigen::Vector2d(10.0, 50.0), Eigen::Vector2d(1e12, 0.1));
}

double GaussCauchyModel::log_factor(Index j, double x) const {
  const double zs = x / sigma_(j);
  const double zg = x / gamma_(j);
  return -zs * zs - std::log1p(zg * zg);
}

double GaussCauchyModel::log_terms(const Vector& theta, std::size_t begin, std::size_t end) const {
  check_theta(theta, dim());
  check_range(begin, end, num_terms());
  double acc = 0.0;
  for (std::size_t j = begin; j < end; ++j) {
    acc += log_factor(static_cast<Index>(j), theta(static_cast<Index>(j)));
  }
  return acc;
}

Vector GaussCauchyModel::score_terms(const Vector& theta, std::size_t begin,
                                     std::size_t end) const {
  check_theta(theta, dim());
  check_range(begin, end, num_terms());
  const Vector full = gausscauchy_score(theta, sigma_, gamma_);
  Vector out = Vector::Zero(dim());
  for (std::size_t j = begin; j < end; ++j) out(static_cast<Index>(j)) = full(static_cast<Index>(j));
  return out;
}

Vector gausscauchy_score(const Vector& theta, const Vector& sigma, const Vector& gamma) {
  Vector g(theta.size());
  for (Index j = 0; j < theta.size(); ++j) {
    const double x = theta(j);
    g(j) = -2.0 * x * (1.0 / (sigma(j) * sigma(j)) + 1.0 / (x * x + gamma(j) * gamma(j)));
  }
  return g;
}

double plane_log_evidence(const PlaneModel& model) {
  const auto& y = model.data();
  const auto n = static_cast<double>(y.size());
  const double c = static_cast<double>(model.dim()) * model.prior_var();
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double v : y) {
    sum += v;
    sum_sq += v * v;
  }
  // N(0, I + c J): det = 1 + n c, inverse = I - c/(1 + n c) J.
  const double quad = sum_sq - c * sum * sum / (1.0 + n * c);
  return -n * kHalfLog2Pi - 0.5 * std::log1p(n * c) - 0.5 * quad;
}

GaussianMoments plane_posterior_moments(const PlaneModel& model) {
  const auto& y = model.data();
  const Index d = model.dim();
  const double v = model.prior_var();
  const double c = static_cast<double>(d) * v;
  const auto n = static_cast<double>(y.size());
  double sum = 0.0;
  for (double value : y) sum += value;
  // s = 1^T theta has prior N(0, c); conditioning gives N(m_s, v_s).
  const double v_s = c / (1.0 + n * c);
  const double m_s = v_s * sum;
  const auto dd = static_cast<double>(d);
  const Matrix ones = Matrix::Ones(d, d);
  GaussianMoments out;
  out.mean = Vector::Constant(d, m_s / dd);
  out.covariance = v * (Matrix::Identity(d, d) - ones / dd) + (v_s / (dd * dd)) * ones;
  return out;
}

}  // namespace assmc
