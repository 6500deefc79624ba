#include "assmc/model.hpp"

#include <cmath>
#include <limits>

namespace assmc {

Tempering Tempering::annealed(std::vector<double> temperatures) {
  if (temperatures.size() < 2) throw Error("tempering: need at least two temperatures");
  if (temperatures.front() != 0.0) throw Error("tempering: first temperature must be 0");
  if (temperatures.back() != 1.0) throw Error("tempering: last temperature must be 1");
  for (std::size_t k = 1; k < temperatures.size(); ++k) {
    if (!(temperatures[k] > temperatures[k - 1])) {
      throw Error("tempering: temperatures must be strictly increasing (index " +
                  std::to_string(k) + ")");
    }
  }
  Tempering out;
  out.kind_ = Kind::kAnnealed;
  out.stages_ = static_cast<int>(temperatures.size()) - 1;
  out.temperatures_ = std::move(temperatures);
  return out;
}

Tempering Tempering::data_blocks(std::size_t num_terms, std::size_t num_blocks) {
  if (num_blocks < 1) throw Error("tempering: need at least one data block");
  if (num_blocks > num_terms) {
    throw Error("tempering: " + std::to_string(num_blocks) + " blocks for only " +
                std::to_string(num_terms) + " likelihood terms");
  }
  Tempering out;
  out.kind_ = Kind::kDataBlocks;
  out.stages_ = static_cast<int>(num_blocks);
  out.temperatures_.clear();
  out.bounds_.resize(num_blocks + 1);
  for (std::size_t t = 0; t <= num_blocks; ++t) out.bounds_[t] = (t * num_terms) / num_blocks;
  return out;
}

double Tempering::temperature(int t) const {
  if (t < 0 || t > stages_) throw Error("tempering: stage out of range");
  if (kind_ == Kind::kAnnealed) return temperatures_[static_cast<std::size_t>(t)];
  return static_cast<double>(bounds_[static_cast<std::size_t>(t)]) /
         static_cast<double>(bounds_.back());
}

TargetModel::TargetModel(std::shared_ptr<const Likelihood> likelihood, Gaussian prior,
                         Tempering tempering)
    : likelihood_(std::move(likelihood)),
      prior_(std::move(prior)),
      tempering_(std::move(tempering)),
      counter_(std::make_shared<std::atomic<long long>>(0)) {
  if (!likelihood_) throw Error("TargetModel: missing likelihood");
  if (likelihood_->dim() != prior_.dim()) {
    throw Error("TargetModel: likelihood dimension " + std::to_string(likelihood_->dim()) +
                " does not match prior dimension " + std::to_string(prior_.dim()));
  }
  if (tempering_.kind() == Tempering::Kind::kDataBlocks &&
      tempering_.block_bounds().back() != likelihood_->num_terms()) {
    throw Error("TargetModel: data blocks do not cover the likelihood terms");
  }
}

TargetModel TargetModel::with_tempering(Tempering tempering) const {
  return TargetModel(likelihood_, prior_, std::move(tempering));
}

void TargetModel::check_stage(int t) const {
  if (t < 0 || t > num_stages()) {
    throw Error("stage " + std::to_string(t) + " outside [0, " + std::to_string(num_stages()) +
                "]");
  }
}

LogLikPath TargetModel::stage_log_likelihoods(const Vector& theta) const {
  counter_->fetch_add(1, std::memory_order_relaxed);
  const int T = num_stages();
  LogLikPath path(T + 1);
  path(0) = 0.0;
  if (tempering_.kind() == Tempering::Kind::kAnnealed) {
    const double full = likelihood_->log_likelihood(theta);
    const auto& eta = tempering_.temperatures();
    for (int t = 1; t < T; ++t) path(t) = eta[static_cast<std::size_t>(t)] * full;
    path(T) = full;
  } else {
    const auto& b = tempering_.block_bounds();
    for (int t = 1; t <= T; ++t) {
      path(t) = path(t - 1) + likelihood_->log_terms(theta, b[static_cast<std::size_t>(t - 1)],
                                                     b[static_cast<std::size_t>(t)]);
    }
  }
  return path;
}

double TargetModel::log_l(const Vector& theta, int t) const {
  check_stage(t);
  if (t == 0) return 0.0;
  counter_->fetch_add(1, std::memory_order_relaxed);
  if (tempering_.kind() == Tempering::Kind::kAnnealed) {
    const double full = likelihood_->log_likelihood(theta);
    return t == num_stages() ? full : tempering_.temperatures()[static_cast<std::size_t>(t)] * full;
  }
  return likelihood_->log_terms(theta, 0, tempering_.block_bounds()[static_cast<std::size_t>(t)]);
}

Vector TargetModel::score(const Vector& theta, int t) const {
  check_stage(t);
  if (t == 0) return Vector::Zero(dim());
  if (tempering_.kind() == Tempering::Kind::kAnnealed) {
    const Vector full = likelihood_->score(theta);
    return t == num_stages() ? full
                             : Vector(tempering_.temperatures()[static_cast<std::size_t>(t)] * full);
  }
  return likelihood_->score_terms(theta, 0, tempering_.block_bounds()[static_cast<std::size_t>(t)]);
}

ProjectedPrior::ProjectedPrior(const Gaussian& prior, const Basis& basis) {
  const Index d = prior.dim();
  if (basis.dim() != d) {
    throw Error("ProjectedPrior: basis dimension " + std::to_string(basis.dim()) +
                " does not match prior dimension " + std::to_string(d));
  }
  const Index da = basis.active_dim();
  const Index di = basis.inactive_dim();
  if (prior.is_isotropic()) {
    marginal_ = Gaussian::isotropic(basis.active.transpose() * prior.mean(), prior.variance());
    if (di > 0) {
      conditional_ =
          Gaussian::isotropic(basis.inactive.transpose() * prior.mean(), prior.variance());
    } else {
      conditional_ = Gaussian::isotropic(Vector(0), prior.variance());
    }
    gain_ = Matrix::Zero(di, da);
    constant_conditional_ = true;
    return;
  }
  Matrix full(d, d);
  full << basis.active, basis.inactive;
  const Vector m = full.transpose() * prior.mean();
  const Matrix s = full.transpose() * prior.covariance() * full;
  const Matrix s_aa = s.topLeftCorner(da, da);
  marginal_ = Gaussian::full(m.head(da), s_aa);
  if (di == 0) {
    conditional_ = Gaussian::isotropic(Vector(0), 1.0);
    gain_ = Matrix::Zero(0, da);
    constant_conditional_ = true;
    return;
  }
  const Matrix s_ia = s.bottomLeftCorner(di, da);
  const Eigen::LLT<Matrix> llt(s_aa);
  gain_ = llt.solve(s_ia.transpose()).transpose();
  const Matrix cond_cov = s.bottomRightCorner(di, di) - gain_ * s_ia.transpose();
  conditional_ = Gaussian::full(m.tail(di), cond_cov);
  constant_conditional_ = gain_.cwiseAbs().maxCoeff() == 0.0;
}

Vector ProjectedPrior::conditional_mean(const Vector& a) const {
  if (constant_conditional_) return conditional_.mean();
  return conditional_.mean() + gain_ * (a - marginal_.mean());
}

double ProjectedPrior::log_conditional(const Vector& i, const Vector& a) const {
  if (constant_conditional_) return conditional_.log_density(i);
  return conditional_.log_density(i, conditional_mean(a));
}

Vector ProjectedPrior::sample_conditional(const Vector& a, Engine& rng) const {
  if (constant_conditional_) return conditional_.sample(rng);
  return conditional_.sample(conditional_mean(a), rng);
}

}  // namespace assmc
