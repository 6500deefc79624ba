#pragma once

// Shared SMC machinery: log-space weight handling, ESS, resampling,
// evidence accumulation, random-walk adaptation, the adaptive-tempering pilot
// and a deterministic parallel-for over particles.

#include <cstdint>
#include <exception>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

#include "assmc/gaussian.hpp"
#include "assmc/model.hpp"
#include "assmc/rng.hpp"
#include "assmc/types.hpp"

namespace assmc {

[[nodiscard]] double log_sum_exp(std::span<const double> values);
[[nodiscard]] inline double log_sum_exp(const Vector& values) {
  return log_sum_exp(std::span<const double>(values.data(), static_cast<std::size_t>(values.size())));
}

/// Natural-scale weights summing to one. Throws if every weight is -inf.
[[nodiscard]] Vector normalise_log_weights(const Vector& log_weights);

/// (sum w)^2 / sum w^2 computed from log weights. Throws on population death.
[[nodiscard]] double ess(const Vector& log_weights);

/// Conditional ESS fraction of incremental log weights under normalised
/// previous weights; lies in (0, 1].
[[nodiscard]] double conditional_ess_fraction(const Vector& prev_weights,
                                              const Vector& log_increments);

[[nodiscard]] std::vector<int> stratified_resample(const Vector& weights, int n, Engine& rng);
[[nodiscard]] std::vector<int> multinomial_resample(const Vector& weights, int n, Engine& rng);
[[nodiscard]] int multinomial_draw(const Vector& weights, Engine& rng);

enum class ResampleScheme { kStratified, kMultinomial };
enum class ResampleTrigger { kEss, kAlways };

struct ResamplePolicy {
  ResampleScheme scheme = ResampleScheme::kStratified;
  ResampleTrigger trigger = ResampleTrigger::kEss;
  double ess_fraction = 0.5;

  [[nodiscard]] bool should_resample(double ess_value, Index n) const {
    return trigger == ResampleTrigger::kAlways ||
           ess_value < ess_fraction * static_cast<double>(n);
  }
};

[[nodiscard]] std::vector<int> resample(const Vector& weights, int n, ResampleScheme scheme,
                                        Engine& rng);

/// Running log Z_t = sum_s log sum_m W_{s-1}^m incr_s^m.
class EvidenceAccumulator {
 public:
  /// `prev_log_weights` need not be normalised. Returns the stage increment.
  double add_stage(const Vector& prev_log_weights, const Vector& log_increments);

  [[nodiscard]] double log_evidence() const { return log_z_; }
  [[nodiscard]] const std::vector<double>& trace() const { return trace_; }

 private:
  double log_z_ = 0.0;
  std::vector<double> trace_{0.0};
};

/// Cumulative sums of per-stage log mean incremental weights.
[[nodiscard]] std::vector<double> log_evidence_accumulate(std::span<const double> stage_increments);

/// scale * weighted empirical covariance of the columns of `points`, plus
/// 1e-10 * trace * I. Falls back to the identity when the spread is zero.
[[nodiscard]] Matrix scaled_empirical_covariance(const Matrix& points, const Vector& weights,
                                                 double scale);

/// Symmetric Gaussian random-walk proposal.
class RandomWalk {
 public:
  RandomWalk() = default;
  explicit RandomWalk(const Matrix& covariance);

  [[nodiscard]] Index dim() const { return chol_.rows(); }
  [[nodiscard]] Matrix covariance() const { return chol_ * chol_.transpose(); }
  [[nodiscard]] Vector propose(const Vector& x, Engine& rng) const;

 private:
  Matrix chol_;
};

/// Resolves a requested thread count: 0 means the ASSMC_THREADS environment
/// variable, then hardware concurrency.
[[nodiscard]] int resolve_threads(int requested);

/// Runs f(i) for i in [0, n) over `threads` workers with static chunking.
/// Results must not depend on scheduling; the first exception is rethrown.
template <class F>
void parallel_for(std::size_t n, int threads, F&& f) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::exception_ptr error;
  std::mutex error_mutex;
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t begin = n * w / workers;
      const std::size_t end = n * (w + 1) / workers;
      pool.emplace_back([&, begin, end] {
        try {
          for (std::size_t i = begin; i < end; ++i) f(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      });
    }
  }
  if (error) std::rethrow_exception(error);
}

struct PilotOptions {
  int particles = 1000;
  double target_ess_fraction = 0.5;
  int moves_per_stage = 2;
  int max_stages = 10000;
  int threads = 1;
};

/// Adaptive-tempering pilot: a standard SMC run whose next temperature is
/// found by bisection so that the conditional ESS equals the target fraction.
/// Only the annealing path of `model`'s likelihood is used.
[[nodiscard]] Tempering pilot_adaptive_schedule(const TargetModel& model, const PilotOptions& options,
                                                const RngStream& stream);

}  // namespace assmc
