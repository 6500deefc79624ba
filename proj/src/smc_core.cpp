#include "assmc/smc_core.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <string>

namespace assmc {

double log_sum_exp(std::span<const double> values) {
  double top = -std::numeric_limits<double>::infinity();
  for (double v : values) top = std::max(top, v);
  if (!std::isfinite(top)) return top;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - top);
  return top + std::log(acc);
}

Vector normalise_log_weights(const Vector& log_weights) {
  const double lse = log_sum_exp(log_weights);
  if (!std::isfinite(lse)) {
    throw Error(lse == -std::numeric_limits<double>::infinity()
                    ? "population death: every log weight is -inf"
                    : "non-finite log weights");
  }
  return (log_weights.array() - lse).exp().matrix();
}

double ess(const Vector& log_weights) {
  const Vector w = normalise_log_weights(log_weights);
  return 1.0 / w.squaredNorm();
}

double conditional_ess_fraction(const Vector& prev_weights, const Vector& log_increments) {
  const double top = log_increments.maxCoeff();
  if (!std::isfinite(top)) return 0.0;
  const Vector inc = (log_increments.array() - top).exp().matrix();
  const double num = prev_weights.dot(inc);
  const double den = prev_weights.dot(inc.cwiseProduct(inc));
  if (!(den > 0.0)) return 0.0;
  return num * num / den;
}

namespace {

Vector cumulative(const Vector& weights) {
  Vector cum(weights.size());
  double acc = 0.0;
  for (Index j = 0; j < weights.size(); ++j) {
    acc += weights(j);
    cum(j) = acc;
  }
  return cum;
}

Index last_positive(const Vector& weights) {
  for (Index j = weights.size() - 1; j >= 0; --j)
    if (weights(j) > 0.0) return j;
  throw Error("resampling: all weights are zero");
}

}  // namespace

std::vector<int> stratified_resample(const Vector& weights, int n, Engine& rng) {
  const Vector cum = cumulative(weights);
  const Index last = last_positive(weights);
  std::vector<int> out(static_cast<std::size_t>(n));
  Index j = 0;
  for (int k = 0; k < n; ++k) {
    const double u = (static_cast<double>(k) + uniform01(rng)) / static_cast<double>(n);
    while (j < last && cum(j) <= u) ++j;
    out[static_cast<std::size_t>(k)] = static_cast<int>(j);
  }
  return out;
}

int multinomial_draw(const Vector& weights, Engine& rng) {
  const Vector cum = cumulative(weights);
  const Index last = last_positive(weights);
  const double u = uniform01(rng) * cum(weights.size() - 1);
  Index j = 0;
  while (j < last && cum(j) <= u) ++j;
  return static_cast<int>(j);
}

std::vector<int> multinomial_resample(const Vector& weights, int n, Engine& rng) {
  std::vector<int> out(static_cast<std::size_t>(n));
  for (auto& idx : out) idx = multinomial_draw(weights, rng);
  return out;
}

std::vector<int> resample(const Vector& weights, int n, ResampleScheme scheme, Engine& rng) {
  return scheme == ResampleScheme::kStratified ? stratified_resample(weights, n, rng)
                                               : multinomial_resample(weights, n, rng);
}

double EvidenceAccumulator::add_stage(const Vector& prev_log_weights,
                                      const Vector& log_increments) {
  const double inc = log_sum_exp(Vector(prev_log_weights + log_increments)) -
                     log_sum_exp(prev_log_weights);
  log_z_ += inc;
  trace_.push_back(log_z_);
  return inc;
}

std::vector<double> log_evidence_accumulate(std::span<const double> stage_increments) {
  std::vector<double> out;
  out.reserve(stage_increments.size() + 1);
  out.push_back(0.0);
  double acc = 0.0;
  for (double v : stage_increments) {
    acc += v;
    out.push_back(acc);
  }
  return out;
}

Matrix scaled_empirical_covariance(const Matrix& points, const Vector& weights, double scale) {
  const Index d = points.rows();
  if (points.cols() != weights.size()) throw Error("covariance: points/weights size mismatch");
  const Vector mean = points * weights;
  Matrix cov = Matrix::Zero(d, d);
  for (Index m = 0; m < points.cols(); ++m) {
    if (weights(m) == 0.0) continue;
    const Vector diff = points.col(m) - mean;
    cov.noalias() += weights(m) * diff * diff.transpose();
  }
  cov *= scale;
  const double trace = cov.trace();
  if (!(trace > 0.0) || !std::isfinite(trace)) return Matrix::Identity(d, d);
  cov.diagonal().array() += 1e-10 * trace;
  return cov;
}

RandomWalk::RandomWalk(const Matrix& covariance) {
  if (covariance.rows() == 0) {
    chol_ = Matrix(0, 0);
    return;
  }
  Eigen::LLT<Matrix> llt(0.5 * (covariance + covariance.transpose()));
  if (llt.info() != Eigen::Success) throw Error("random walk: covariance is not positive definite");
  chol_ = llt.matrixL();
}

Vector RandomWalk::propose(const Vector& x, Engine& rng) const {
  const Vector z = standard_normal(dim(), rng);
  return x + chol_.triangularView<Eigen::Lower>() * z;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("ASSMC_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

namespace {

Vector tempered_increment(const Vector& log_lik, double delta) {
  Vector out(log_lik.size());
  for (Index m = 0; m < log_lik.size(); ++m) {
    out(m) = delta == 0.0 ? 0.0 : delta * log_lik(m);
  }
  return out;
}

}  // namespace

Tempering pilot_adaptive_schedule(const TargetModel& model, const PilotOptions& options,
                                  const RngStream& stream) {
  if (!(options.target_ess_fraction > 0.0 && options.target_ess_fraction < 1.0)) {
    throw Error("pilot: target ESS fraction must lie in (0, 1)");
  }
  if (options.particles < 2) throw Error("pilot: need at least two particles");
  const int n = options.particles;
  const Index d = model.dim();
  const auto& lik = model.likelihood();
  const RngStream base = stream.derive(Purpose::kPilot);

  Matrix theta(d, n);
  Vector log_lik(n);
  parallel_for(static_cast<std::size_t>(n), options.threads, [&](std::size_t m) {
    Engine rng = base.derive({0, m}).derive(Purpose::kInit).engine();
    theta.col(static_cast<Index>(m)) = model.sample_prior(rng);
    log_lik(static_cast<Index>(m)) = lik.log_likelihood(theta.col(static_cast<Index>(m)));
  });
  Vector weights = Vector::Constant(n, 1.0 / n);

  std::vector<double> temps{0.0};
  double eta = 0.0;
  for (int stage = 1; eta < 1.0; ++stage) {
    if (stage > options.max_stages) throw Error("pilot: exceeded the maximum number of stages");
    auto cess = [&](double next) {
      return conditional_ess_fraction(weights, tempered_increment(log_lik, next - eta));
    };
    double next = 1.0;
    if (cess(1.0) < options.target_ess_fraction) {
      double lo = eta;
      double hi = 1.0;
      for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (cess(mid) >= options.target_ess_fraction) {
          lo = mid;
        } else {
          hi = mid;
        }
      }
      next = lo > eta ? lo : hi;
      if (!(next > eta) || !(next <= 1.0)) next = 1.0;
    }
    const Vector log_w = weights.array().log().matrix() + tempered_increment(log_lik, next - eta);
    eta = next;
    temps.push_back(eta);
    if (eta >= 1.0) break;

    weights = normalise_log_weights(log_w);
    const RandomWalk walk(scaled_empirical_covariance(theta, weights,
                                                      2.38 * 2.38 / static_cast<double>(d)));
    Engine res_rng = base.derive(static_cast<std::uint64_t>(stage)).derive(Purpose::kResample).engine();
    const std::vector<int> anc = stratified_resample(weights, n, res_rng);
    Matrix next_theta(d, n);
    Vector next_lik(n);
    parallel_for(static_cast<std::size_t>(n), options.threads, [&](std::size_t m) {
      Engine rng = base.derive({static_cast<std::uint64_t>(stage), m}).derive(Purpose::kMove).engine();
      Vector x = theta.col(anc[m]);
      double ll = log_lik(anc[m]);
      double lp = model.log_prior(x);
      for (int k = 0; k < options.moves_per_stage; ++k) {
        const Vector prop = walk.propose(x, rng);
        const double ll_prop = lik.log_likelihood(prop);
        const double lp_prop = model.log_prior(prop);
        const double log_alpha = (lp_prop + eta * ll_prop) - (lp + eta * ll);
        if (std::log(uniform01(rng)) < log_alpha) {
          x = prop;
          ll = ll_prop;
          lp = lp_prop;
        }
      }
      next_theta.col(static_cast<Index>(m)) = x;
      next_lik(static_cast<Index>(m)) = ll;
    });
    theta = std::move(next_theta);
    log_lik = std::move(next_lik);
    weights = Vector::Constant(n, 1.0 / n);
  }
  return Tempering::annealed(std::move(temps));
}

}  // namespace assmc
