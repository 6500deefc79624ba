#pragma once

// Target-model abstraction consumed by every sampler: a Gaussian prior with
// exact projected conditionals, a factorised likelihood, and a tempering
// sequence that turns it into stage likelihoods l_{1:t}.

#include <atomic>
#include <memory>
#include <string>
#include <vector>

#include "assmc/gaussian.hpp"
#include "assmc/subspace.hpp"
#include "assmc/types.hpp"

namespace assmc {

/// Likelihood built from `num_terms()` independent factors. Implementations
/// must be pure so they can be called concurrently.
class Likelihood {
 public:
  virtual ~Likelihood() = default;

  [[nodiscard]] virtual Index dim() const = 0;
  [[nodiscard]] virtual std::size_t num_terms() const = 0;
  /// Sum of log factors in [begin, end).
  [[nodiscard]] virtual double log_terms(const Vector& theta, std::size_t begin,
                                         std::size_t end) const = 0;
  /// Gradient of log_terms.
  [[nodiscard]] virtual Vector score_terms(const Vector& theta, std::size_t begin,
                                           std::size_t end) const = 0;
  [[nodiscard]] virtual std::string name() const = 0;

  [[nodiscard]] double log_likelihood(const Vector& theta) const {
    return log_terms(theta, 0, num_terms());
  }
  [[nodiscard]] Vector score(const Vector& theta) const {
    return score_terms(theta, 0, num_terms());
  }
};

/// Either annealing l^{eta_t} with 0 = eta_0 < ... < eta_T = 1, or data
/// tempering over consecutive blocks of likelihood factors.
class Tempering {
 public:
  enum class Kind { kAnnealed, kDataBlocks };

  static Tempering annealed(std::vector<double> temperatures);
  static Tempering data_blocks(std::size_t num_terms, std::size_t num_blocks);
  /// Single step straight to the full likelihood.
  static Tempering one_step() { return annealed({0.0, 1.0}); }

  [[nodiscard]] Kind kind() const { return kind_; }
  [[nodiscard]] int num_stages() const { return stages_; }
  [[nodiscard]] const std::vector<double>& temperatures() const { return temperatures_; }
  [[nodiscard]] const std::vector<std::size_t>& block_bounds() const { return bounds_; }
  [[nodiscard]] double temperature(int t) const;

 private:
  Kind kind_ = Kind::kAnnealed;
  int stages_ = 1;
  std::vector<double> temperatures_{0.0, 1.0};
  std::vector<std::size_t> bounds_;
};

/// Cumulative stage log-likelihoods (log l_{1:0}, ..., log l_{1:T}) at one
/// point. Index t gives log l_{1:t}; entry 0 is always 0.
using LogLikPath = Vector;

class TargetModel {
 public:
  TargetModel(std::shared_ptr<const Likelihood> likelihood, Gaussian prior, Tempering tempering);

  [[nodiscard]] Index dim() const { return prior_.dim(); }
  [[nodiscard]] int num_stages() const { return tempering_.num_stages(); }
  [[nodiscard]] const Gaussian& prior() const { return prior_; }
  [[nodiscard]] const Likelihood& likelihood() const { return *likelihood_; }
  [[nodiscard]] const Tempering& tempering() const { return tempering_; }
  [[nodiscard]] std::shared_ptr<const Likelihood> likelihood_ptr() const { return likelihood_; }

  /// Same likelihood and prior with a different tempering and a fresh counter.
  [[nodiscard]] TargetModel with_tempering(Tempering tempering) const;

  [[nodiscard]] double log_prior(const Vector& theta) const { return prior_.log_density(theta); }
  [[nodiscard]] Vector sample_prior(Engine& rng) const { return prior_.sample(rng); }

  /// One likelihood evaluation producing every stage value at theta.
  [[nodiscard]] LogLikPath stage_log_likelihoods(const Vector& theta) const;
  /// log l_{1:t}(theta); counts one evaluation unless t = 0.
  [[nodiscard]] double log_l(const Vector& theta, int t) const;
  /// Gradient of log l_{1:t}.
  [[nodiscard]] Vector score(const Vector& theta, int t) const;
  /// Gradient of the full log likelihood.
  [[nodiscard]] Vector full_score(const Vector& theta) const { return score(theta, num_stages()); }

  [[nodiscard]] long long evaluations() const { return counter_->load(); }
  void reset_evaluations() const { counter_->store(0); }

 private:
  void check_stage(int t) const;

  std::shared_ptr<const Likelihood> likelihood_;
  Gaussian prior_;
  Tempering tempering_;
  std::shared_ptr<std::atomic<long long>> counter_;
};

/// Prior re-expressed in the (a, i) coordinates of a basis:
/// p(A a + I i) = p_a(a) p_i(i | a), with p_i an affine-mean Gaussian.
class ProjectedPrior {
 public:
  ProjectedPrior(const Gaussian& prior, const Basis& basis);

  [[nodiscard]] Index active_dim() const { return marginal_.dim(); }
  [[nodiscard]] Index inactive_dim() const { return conditional_.dim(); }
  [[nodiscard]] const Gaussian& marginal() const { return marginal_; }
  /// Conditional law of i given a = marginal mean; shift with conditional_mean().
  [[nodiscard]] const Gaussian& conditional() const { return conditional_; }
  [[nodiscard]] const Matrix& gain() const { return gain_; }

  [[nodiscard]] double log_marginal(const Vector& a) const { return marginal_.log_density(a); }
  [[nodiscard]] Vector conditional_mean(const Vector& a) const;
  [[nodiscard]] double log_conditional(const Vector& i, const Vector& a) const;
  [[nodiscard]] Vector sample_conditional(const Vector& a, Engine& rng) const;
  [[nodiscard]] Vector sample_marginal(Engine& rng) const { return marginal_.sample(rng); }

 private:
  Gaussian marginal_;
  Gaussian conditional_;
  Matrix gain_;  // i-mean = conditional_.mean() + gain_ (a - marginal_.mean())
  bool constant_conditional_ = true;
};

}  // namespace assmc
