#pragma once

// Active subspace estimation: weighted gradient outer products, a cyclic
// Jacobi eigensolver and spectral-gap splitting into orthonormal bases.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "assmc/types.hpp"

namespace assmc {

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct GradientSample {
  VectorX<Scalar> point;
  VectorX<Scalar> gradient;
  Scalar weight{1};
};

/// Eigenvalues sorted descending with eigenvectors as matching columns.
template <typename Scalar>
struct Spectrum {
  VectorX<Scalar> eigenvalues;
  MatrixX<Scalar> eigenvectors;

  [[nodiscard]] Index dim() const { return eigenvalues.size(); }
};

/// Orthonormal split of R^d into active columns A and inactive columns I,
/// so that theta = A a + I i.
template <typename Scalar>
struct SubspaceBasis {
  MatrixX<Scalar> active;
  MatrixX<Scalar> inactive;
  Spectrum<Scalar> spectrum;

  [[nodiscard]] Index dim() const { return active.rows(); }
  [[nodiscard]] Index active_dim() const { return active.cols(); }
  [[nodiscard]] Index inactive_dim() const { return inactive.cols(); }

  [[nodiscard]] VectorX<Scalar> to_active(const VectorX<Scalar>& theta) const {
    return active.transpose() * theta;
  }
  [[nodiscard]] VectorX<Scalar> to_inactive(const VectorX<Scalar>& theta) const {
    return inactive.transpose() * theta;
  }
  [[nodiscard]] VectorX<Scalar> reconstruct(const VectorX<Scalar>& a,
                                            const VectorX<Scalar>& i) const {
    if (inactive.cols() == 0) return active * a;
    return active * a + inactive * i;
  }

  /// Full-space basis with A = identity, used whenever nothing is inactive so
  /// that a coincides with theta.
  static SubspaceBasis identity(Index d, Spectrum<Scalar> spectrum = {}) {
    SubspaceBasis out;
    out.active = MatrixX<Scalar>::Identity(d, d);
    out.inactive = MatrixX<Scalar>(d, 0);
    out.spectrum = std::move(spectrum);
    return out;
  }
};

using Basis = SubspaceBasis<double>;

struct GapRule {
  enum class Kind { kLargestGap, kExplainedVariance, kFixed };
  Kind kind = Kind::kLargestGap;
  double fraction = 0.9;   // explained-variance target
  Index fixed_dim = 1;     // fixed d_a
  double min_ratio = 2.0;  // largest gap must reach this ratio to split

  static GapRule largest_gap(double min_ratio = 2.0) {
    GapRule r;
    r.min_ratio = min_ratio;
    return r;
  }
  static GapRule explained_variance(double fraction) {
    GapRule r;
    r.kind = Kind::kExplainedVariance;
    r.fraction = fraction;
    return r;
  }
  static GapRule fixed(Index d_a) {
    GapRule r;
    r.kind = Kind::kFixed;
    r.fixed_dim = d_a;
    return r;
  }
};

/// Weighted gradient outer product sum_m w_m g_m g_m^T. Weights must already
/// be normalised.
template <typename Scalar>
MatrixX<Scalar> estimate_as_matrix(std::span<const GradientSample<Scalar>> samples) {
  if (samples.empty()) throw Error("estimate_as_matrix: empty sample list");
  const Index d = samples.front().gradient.size();
  Scalar total{0};
  for (std::size_t m = 0; m < samples.size(); ++m) {
    const auto& s = samples[m];
    if (s.gradient.size() != d || (s.point.size() != 0 && s.point.size() != d)) {
      throw Error("estimate_as_matrix: dimension mismatch at sample " + std::to_string(m));
    }
    if (!s.gradient.allFinite()) {
      throw Error("estimate_as_matrix: non-finite gradient at sample " + std::to_string(m));
    }
    if (!(s.weight >= Scalar{0})) {
      throw Error("estimate_as_matrix: negative weight at sample " + std::to_string(m));
    }
    total += s.weight;
  }
  if (std::abs(total - Scalar{1}) > Scalar(1e-8)) {
    throw Error("estimate_as_matrix: weights sum to " + std::to_string(double(total)) +
                ", expected 1");
  }
  MatrixX<Scalar> out = MatrixX<Scalar>::Zero(d, d);
  for (const auto& s : samples) {
    if (s.weight == Scalar{0}) continue;
    out.template selfadjointView<Eigen::Lower>().rankUpdate(s.gradient, s.weight);
  }
  out.template triangularView<Eigen::StrictlyUpper>() = out.transpose();
  return out;
}

template <typename Scalar>
MatrixX<Scalar> estimate_as_matrix(const std::vector<GradientSample<Scalar>>& samples) {
  return estimate_as_matrix(std::span<const GradientSample<Scalar>>(samples));
}

namespace detail {

template <typename Scalar>
Scalar off_diagonal_norm(const MatrixX<Scalar>& m) {
  Scalar sum{0};
  for (Index j = 0; j < m.cols(); ++j)
    for (Index i = 0; i < m.rows(); ++i)
      if (i != j) sum += m(i, j) * m(i, j);
  return std::sqrt(sum);
}

}  // namespace detail

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Eigenvalues are
/// returned descending (stable, ties keep index order); each eigenvector is
/// signed so that its first non-negligible entry is positive.
template <typename Scalar>
Spectrum<Scalar> eigendecompose(const MatrixX<Scalar>& input) {
  if (input.rows() != input.cols()) throw Error("eigendecompose: matrix is not square");
  const Index d = input.rows();
  const Scalar scale = std::max(Scalar{1}, input.cwiseAbs().maxCoeff());
  if (((input - input.transpose()).cwiseAbs().maxCoeff()) > Scalar(1e-10) * scale) {
    throw Error("eigendecompose: matrix is not symmetric");
  }
  if (!input.allFinite()) throw Error("eigendecompose: non-finite entries");

  MatrixX<Scalar> m = (input + input.transpose()) / Scalar{2};
  MatrixX<Scalar> v = MatrixX<Scalar>::Identity(d, d);
  const Scalar norm = m.norm();
  const Scalar tol = Scalar(1e-12) * norm;

  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    if (detail::off_diagonal_norm(m) <= tol) break;
    for (Index p = 0; p < d - 1; ++p) {
      for (Index q = p + 1; q < d; ++q) {
        const Scalar apq = m(p, q);
        if (apq == Scalar{0}) continue;
        const Scalar theta = (m(q, q) - m(p, p)) / (Scalar{2} * apq);
        const Scalar t = (theta >= Scalar{0} ? Scalar{1} : Scalar{-1}) /
                         (std::abs(theta) + std::sqrt(theta * theta + Scalar{1}));
        const Scalar c = Scalar{1} / std::sqrt(t * t + Scalar{1});
        const Scalar s = t * c;
        for (Index k = 0; k < d; ++k) {
          const Scalar mkp = m(k, p);
          const Scalar mkq = m(k, q);
          m(k, p) = c * mkp - s * mkq;
          m(k, q) = s * mkp + c * mkq;
        }
        for (Index k = 0; k < d; ++k) {
          const Scalar mpk = m(p, k);
          const Scalar mqk = m(q, k);
          m(p, k) = c * mpk - s * mqk;
          m(q, k) = s * mpk + c * mqk;
        }
        m(p, q) = Scalar{0};
        m(q, p) = Scalar{0};
        for (Index k = 0; k < d; ++k) {
          const Scalar vkp = v(k, p);
          const Scalar vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return m(a, a) > m(b, b); });

  Spectrum<Scalar> out;
  out.eigenvalues.resize(d);
  out.eigenvectors.resize(d, d);
  for (Index j = 0; j < d; ++j) {
    const Index src = order[static_cast<std::size_t>(j)];
    out.eigenvalues(j) = m(src, src);
    VectorX<Scalar> col = v.col(src);
    for (Index k = 0; k < d; ++k) {
      if (std::abs(col(k)) > Scalar(1e-12)) {
        if (col(k) < Scalar{0}) col = -col;
        break;
      }
    }
    out.eigenvectors.col(j) = col;
  }
  return out;
}

/// Fraction of the (clamped nonnegative) spectrum explained by each
/// eigenvalue.
template <typename Scalar>
VectorX<Scalar> explained_fractions(const Spectrum<Scalar>& spectrum) {
  VectorX<Scalar> clamped = spectrum.eigenvalues.cwiseMax(Scalar{0});
  const Scalar total = clamped.sum();
  if (total <= Scalar{0}) return VectorX<Scalar>::Zero(clamped.size());
  return clamped / total;
}

/// Number of active directions chosen by the rule. Always at least one.
template <typename Scalar>
Index choose_active_dim(const Spectrum<Scalar>& spectrum, const GapRule& rule) {
  const Index d = spectrum.dim();
  if (d < 1) throw Error("split_basis: empty spectrum");
  switch (rule.kind) {
    case GapRule::Kind::kFixed:
      if (rule.fixed_dim < 1 || rule.fixed_dim > d) {
        throw Error("split_basis: fixed active dimension " + std::to_string(rule.fixed_dim) +
                    " outside [1, " + std::to_string(d) + "]");
      }
      return rule.fixed_dim;
    case GapRule::Kind::kExplainedVariance: {
      const VectorX<Scalar> frac = explained_fractions(spectrum);
      if (frac.sum() <= Scalar{0}) return d;
      Scalar cumulative{0};
      for (Index j = 0; j < d; ++j) {
        cumulative += frac(j);
        if (cumulative >= Scalar(rule.fraction) - Scalar(1e-15)) return j + 1;
      }
      return d;
    }
    case GapRule::Kind::kLargestGap: {
      // Eigenvalues below a relative floor are roundoff from a rank-deficient
      // matrix and are treated as exact zeros.
      constexpr Scalar kRelativeFloor = Scalar(1e-12);
      constexpr Scalar kGuard = Scalar(1e-300);
      VectorX<Scalar> lam = spectrum.eigenvalues.cwiseMax(Scalar{0});
      const Scalar top = lam(0);
      for (Index j = 0; j < d; ++j)
        if (lam(j) <= kRelativeFloor * top) lam(j) = Scalar{0};
      Index best = d;
      Scalar best_ratio{0};
      for (Index j = 0; j + 1 < d; ++j) {
        const Scalar ratio = lam(j) / (lam(j + 1) + kGuard);
        if (ratio > best_ratio) {
          best_ratio = ratio;
          best = j + 1;
        }
      }
      if (best_ratio < Scalar(rule.min_ratio)) return d;
      return best;
    }
  }
  return d;
}

template <typename Scalar>
SubspaceBasis<Scalar> split_basis(const Spectrum<Scalar>& spectrum, const GapRule& rule) {
  const Index d = spectrum.dim();
  const Index d_a = choose_active_dim(spectrum, rule);
  SubspaceBasis<Scalar> out;
  out.active = spectrum.eigenvectors.leftCols(d_a);
  out.inactive = spectrum.eigenvectors.rightCols(d - d_a);
  out.spectrum = spectrum;
  return out;
}

/// Flips column signs of `basis` to maximise the diagonal of A^T A_prev (and
/// likewise for the inactive block) when the shapes agree.
template <typename Scalar>
void align_signs(SubspaceBasis<Scalar>& basis, const SubspaceBasis<Scalar>& previous) {
  auto align = [](MatrixX<Scalar>& cols, const MatrixX<Scalar>& ref) {
    if (cols.rows() != ref.rows()) return;
    const Index n = std::min(cols.cols(), ref.cols());
    for (Index j = 0; j < n; ++j)
      if (cols.col(j).dot(ref.col(j)) < Scalar{0}) cols.col(j) = -cols.col(j);
  };
  align(basis.active, previous.active);
  align(basis.inactive, previous.inactive);
}

/// Max deviation of [A I]^T [A I] from identity.
template <typename Scalar>
Scalar orthonormality_error(const SubspaceBasis<Scalar>& basis) {
  MatrixX<Scalar> full(basis.dim(), basis.dim());
  full << basis.active, basis.inactive;
  const MatrixX<Scalar> gram = full.transpose() * full;
  return (gram - MatrixX<Scalar>::Identity(basis.dim(), basis.dim())).cwiseAbs().maxCoeff();
}

/// Spectrum export: columns (index, eigenvalue), 1-based index.
template <typename Scalar>
void write_spectrum_csv(std::ostream& os, const Spectrum<Scalar>& spectrum) {
  os << "index,eigenvalue\n";
  os.precision(17);
  for (Index j = 0; j < spectrum.dim(); ++j) os << (j + 1) << ',' << spectrum.eigenvalues(j) << '\n';
}

}  // namespace assmc
