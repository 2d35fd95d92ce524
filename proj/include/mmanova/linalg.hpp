#pragma once

// Dense symmetric matrix primitives: a symmetric matrix type, Cholesky,
// cyclic Jacobi eigen-decomposition, pseudo-determinant and PD tests.
// Storage and general products go through Eigen; the factorizations used by
// the samplers are implemented here so their tolerances are explicit.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "mmanova/error.hpp"

namespace mmanova {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Pivot tolerance for PD checks, applied after scaling by trace/d.
inline constexpr double kPdTolerance = 1e-10;
/// Relative eigenvalue cutoff for pseudo-determinants.
inline constexpr double kRankTolerance = 1e-9;

/// Square symmetric matrix. Construction from a general matrix averages it
/// with its transpose, so (i, j) and (j, i) are always bitwise equal.
class SymMatrix {
 public:
  SymMatrix() = default;

  explicit SymMatrix(Index dim) : m_(Matrix::Zero(dim, dim)) {}

  explicit SymMatrix(const Matrix& a) {
    if (a.rows() != a.cols()) {
      throw Error(Errc::invalid_dims, "SymMatrix requires a square matrix, got " +
                                          std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
    }
    m_ = a;
    symmetrize();
  }

  static SymMatrix zero(Index dim) { return SymMatrix(dim); }

  static SymMatrix identity(Index dim) { return SymMatrix(Matrix::Identity(dim, dim)); }

  static SymMatrix diagonal(const Vector& diag) {
    return SymMatrix(Matrix(diag.asDiagonal()));
  }

  /// Symmetric outer-product sum rowsᵀ·rows of an n×d matrix.
  static SymMatrix gram(const Matrix& rows) { return SymMatrix(Matrix(rows.transpose() * rows)); }

  Index dim() const { return m_.rows(); }

  double operator()(Index i, Index j) const { return m_(i, j); }

  void set(Index i, Index j, double value) {
    m_(i, j) = value;
    m_(j, i) = value;
  }

  const Matrix& matrix() const { return m_; }

  double trace() const { return m_.trace(); }

  /// Grand sum 1ᵀA1.
  double sum() const { return m_.sum(); }

  SymMatrix& operator+=(const SymMatrix& other) {
    m_ += other.m_;
    return *this;
  }

  SymMatrix& operator-=(const SymMatrix& other) {
    m_ -= other.m_;
    return *this;
  }

  SymMatrix& operator*=(double s) {
    m_ *= s;
    return *this;
  }

  friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
  friend SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
  friend SymMatrix operator*(SymMatrix a, double s) { return a *= s; }
  friend SymMatrix operator*(double s, SymMatrix a) { return a *= s; }

 private:
  void symmetrize() {
    for (Index i = 0; i < m_.rows(); ++i) {
      for (Index j = i + 1; j < m_.cols(); ++j) {
        const double v = 0.5 * (m_(i, j) + m_(j, i));
        m_(i, j) = v;
        m_(j, i) = v;
      }
    }
  }

  Matrix m_;
};

struct EigenDecomposition {
  Vector values;   // descending
  Matrix vectors;  // column k pairs with values[k]
};

namespace detail {

inline double pivot_scale(const SymMatrix& a) {
  return a.dim() == 0 ? 0.0 : a.trace() / static_cast<double>(a.dim());
}

}  // namespace detail

/// Lower Cholesky factor, or nullopt when some pivot falls at or below
/// tol·(trace/d). With tol == 0 only non-positive pivots fail.
inline std::optional<Matrix> try_cholesky(const SymMatrix& a, double tol = kPdTolerance) {
  const Index d = a.dim();
  const double scale = detail::pivot_scale(a);
  if (d == 0 || !(scale > 0.0)) return std::nullopt;
  const double floor = tol * scale;
  Matrix l = Matrix::Zero(d, d);
  for (Index j = 0; j < d; ++j) {
    double pivot = a(j, j);
    for (Index k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
    if (!(pivot > floor) || !(pivot > 0.0)) return std::nullopt;
    const double root = std::sqrt(pivot);
    l(j, j) = root;
    for (Index i = j + 1; i < d; ++i) {
      double s = a(i, j);
      for (Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / root;
    }
  }
  return l;
}

inline Matrix cholesky_lower(const SymMatrix& a, double tol = kPdTolerance) {
  auto l = try_cholesky(a, tol);
  if (!l) throw Error(Errc::not_positive_definite, "matrix is not positive definite");
  return *std::move(l);
}

inline bool is_pd(const SymMatrix& a, double tol = kPdTolerance) {
  return try_cholesky(a, tol).has_value();
}

/// Cyclic Jacobi eigen-decomposition. Stops when the off-diagonal Frobenius
/// norm drops below tol·‖A‖_F.
inline EigenDecomposition sym_eigen(const SymMatrix& input, double tol = 1e-12,
                                    int max_sweeps = 100) {
  const Index n = input.dim();
  Matrix a = input.matrix();
  Matrix v = Matrix::Identity(n, n);
  const double norm = a.norm();

  auto off_norm = [&] {
    double s = 0.0;
    for (Index p = 0; p < n; ++p)
      for (Index q = p + 1; q < n; ++q) s += 2.0 * a(p, q) * a(p, q);
    return std::sqrt(s);
  };

  bool converged = norm == 0.0;
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    if (off_norm() <= tol * norm) {
      converged = true;
      break;
    }
    for (Index p = 0; p < n; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        for (Index k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (!converged && off_norm() > tol * norm) {
    throw Error(Errc::non_convergence, "Jacobi eigen-solver did not converge");
  }

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index x, Index y) { return a(x, x) > a(y, y); });
  EigenDecomposition out{Vector(n), Matrix(n, n)};
  for (Index k = 0; k < n; ++k) {
    out.values(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    out.vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  return out;
}

/// Product of the eigenvalues exceeding rank_tol·λ_max.
inline double pseudo_det(const SymMatrix& a, double rank_tol = kRankTolerance) {
  const auto eig = sym_eigen(a);
  if (eig.values.size() == 0 || !(eig.values(0) > 0.0)) {
    throw Error(Errc::all_zero, "pseudo-determinant of a matrix with no positive eigenvalue");
  }
  const double cutoff = rank_tol * eig.values(0);
  double prod = 1.0;
  for (Index k = 0; k < eig.values.size(); ++k) {
    if (eig.values(k) > cutoff) prod *= eig.values(k);
  }
  return prod;
}

/// Nearest PSD matrix in Frobenius norm: negative eigenvalues clipped at zero.
inline SymMatrix clip_to_psd(const SymMatrix& a) {
  const auto eig = sym_eigen(a);
  const Vector clipped = eig.values.cwiseMax(0.0);
  return SymMatrix(Matrix(eig.vectors * clipped.asDiagonal() * eig.vectors.transpose()));
}

/// Some F with F·Fᵀ = a: the Cholesky factor when a is PD, otherwise the
/// symmetric square root with negative eigenvalues clipped.
inline Matrix covariance_factor(const SymMatrix& a) {
  if (auto l = try_cholesky(a)) return *std::move(l);
  const auto eig = sym_eigen(a);
  const Vector roots = eig.values.cwiseMax(0.0).cwiseSqrt();
  return eig.vectors * roots.asDiagonal();
}

inline SymMatrix inverse(const SymMatrix& a) {
  const Matrix l = cholesky_lower(a, 0.0);
  const Matrix linv =
      l.triangularView<Eigen::Lower>().solve(Matrix::Identity(a.dim(), a.dim()));
  return SymMatrix(Matrix(linv.transpose() * linv));
}

/// Orthogonal projector I − Cᵀ(CCᵀ)⁻¹C onto the null space of C's rows.
inline SymMatrix constraint_projector(const Matrix& c) {
  const Index n = c.cols();
  if (c.rows() == 0) return SymMatrix::identity(n);
  const Matrix cct = c * c.transpose();
  const Matrix solved = cct.ldlt().solve(c);
  return SymMatrix(Matrix(Matrix::Identity(n, n) - c.transpose() * solved));
}

}  // namespace mmanova
