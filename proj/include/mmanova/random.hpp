#pragma once

#include <cstdint>
#include <random>

#include "mmanova/linalg.hpp"

namespace mmanova {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Combines two identifiers into one stream id.
inline constexpr std::uint64_t stream_key(std::uint64_t major, std::uint64_t minor) {
  return splitmix64(splitmix64(major) ^ (minor * 0xd1b54a32d192ed03ULL + 0x8cb92ba72f3d8dd7ULL));
}

/// Independent random stream addressed by (seed, stream id). The same pair
/// always yields the same sequence, so per-draw streams give results that do
/// not depend on scheduling.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream)
      : seed_(seed), stream_(stream), engine_(splitmix64(seed ^ splitmix64(stream + 1))) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  double normal() { return normal_(engine_); }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  double chi_square(double dof) { return std::chi_squared_distribution<double>(dof)(engine_); }

  Vector standard_normal(Index size) {
    Vector z(size);
    for (Index i = 0; i < size; ++i) z(i) = normal();
    return z;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Draw from W⁻¹(psi, dof): a Bartlett-factored Wishart W(psi⁻¹, dof), inverted
/// through its triangular factor so the result is symmetric PD by construction.
inline SymMatrix sample_inv_wishart(const SymMatrix& psi, double dof, RngStream& rng) {
  const Index d = psi.dim();
  if (!(dof > static_cast<double>(d) - 1.0)) {
    throw Error(Errc::invalid_dof, "inverse-Wishart requires dof > d - 1 (dof = " +
                                       std::to_string(dof) + ", d = " + std::to_string(d) + ")");
  }
  const Matrix m = cholesky_lower(psi);
  Matrix bartlett = Matrix::Zero(d, d);
  for (Index i = 0; i < d; ++i) {
    bartlett(i, i) = std::sqrt(rng.chi_square(dof - static_cast<double>(i)));
    for (Index j = 0; j < i; ++j) bartlett(i, j) = rng.normal();
  }
  // psi⁻¹ = m⁻ᵀm⁻¹, so W = m⁻ᵀ A Aᵀ m⁻¹ and W⁻¹ = (m A⁻ᵀ)(m A⁻ᵀ)ᵀ.
  const Matrix a_inv =
      bartlett.triangularView<Eigen::Lower>().solve(Matrix::Identity(d, d));
  const Matrix t = m * a_inv.transpose();
  return SymMatrix(Matrix(t * t.transpose()));
}

/// Draw from W(sigma, dof) via the Bartlett decomposition.
inline SymMatrix sample_wishart(const SymMatrix& sigma, double dof, RngStream& rng) {
  const Index d = sigma.dim();
  if (!(dof > static_cast<double>(d) - 1.0)) {
    throw Error(Errc::invalid_dof, "Wishart requires dof > d - 1");
  }
  const Matrix l = cholesky_lower(sigma);
  Matrix bartlett = Matrix::Zero(d, d);
  for (Index i = 0; i < d; ++i) {
    bartlett(i, i) = std::sqrt(rng.chi_square(dof - static_cast<double>(i)));
    for (Index j = 0; j < i; ++j) bartlett(i, j) = rng.normal();
  }
  const Matrix t = l * bartlett;
  return SymMatrix(Matrix(t * t.transpose()));
}

inline Vector sample_mvn(const Vector& mean, const SymMatrix& cov, RngStream& rng) {
  if (mean.size() != cov.dim()) {
    throw Error(Errc::invalid_dims, "mean and covariance dimensions disagree");
  }
  return mean + cholesky_lower(cov) * rng.standard_normal(mean.size());
}

/// Like sample_mvn but accepts singular PSD covariances.
inline Vector sample_mvn_psd(const Vector& mean, const SymMatrix& cov, RngStream& rng) {
  if (mean.size() != cov.dim()) {
    throw Error(Errc::invalid_dims, "mean and covariance dimensions disagree");
  }
  return mean + covariance_factor(cov) * rng.standard_normal(mean.size());
}

}  // namespace mmanova
