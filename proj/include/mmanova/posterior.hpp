#pragma once

// Direct sampler for the factored posterior. Each draw takes one error
// covariance, then every batch independently given it: a covariance, the
// levels, and the finite-population covariance of those levels.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mmanova/estimation.hpp"
#include "mmanova/parallel.hpp"
#include "mmanova/random.hpp"

namespace mmanova {

struct SamplerConfig {
  std::size_t draws = 1000;
  std::uint64_t seed = 1;
  std::size_t rejection_cap = 1000;
  TruncationFallback fallback = TruncationFallback::truncate;
  std::size_t threads = 1;
};

inline SamplerConfig sampler_config(const ModelConfig& config, std::size_t threads = 1) {
  return SamplerConfig{config.draws, config.seed, config.rejection_cap, config.fallback, threads};
}

/// Stream id of draw r for slot 0 (error) or batch b (slot b + 1).
inline std::uint64_t draw_stream(std::size_t r, std::size_t slot) { return stream_key(r, slot); }

inline SymMatrix sample_error_cov(const SymMatrix& residual_scatter, long residual_count, const SymMatrix& psi,
                                  double kappa, RngStream& rng) {
  const double dof = kappa + static_cast<double>(residual_count);
  const auto d = static_cast<double>(residual_scatter.dim());
  if (!(dof > d - 1.0)) {
    throw Error(Errc::insufficient_dof, "error posterior needs kappa + n - sum(n_b) > d - 1 (got " +
                                            std::to_string(dof) + ")");
  }
  return sample_inv_wishart(psi + residual_scatter, dof, rng);
}

inline SymMatrix sample_error_cov(const ScatterSet& scatter, const SymMatrix& psi, double kappa, RngStream& rng) {
  return sample_error_cov(scatter.residual, scatter.residual_count, psi, kappa, rng);
}

struct CovarianceDraw {
  SymMatrix sigma;
  std::size_t rejections = 0;
  bool truncated = false;
};

/// Σ_b = U − k·Σ_ε with U ~ W⁻¹(Ψ_b + B_b, κ_b + ν_b), redrawn until PD.
/// `rejection_cap` bounds the total number of attempts; after that the last
/// difference is clipped to PSD, or RejectionExhausted is thrown.
inline CovarianceDraw sample_batch_cov(const SymMatrix& batch_scatter, const SymMatrix& psi, double kappa,
                                       const SymMatrix& sigma_eps, double factor, std::size_t nu,
                                       const SamplerConfig& config, RngStream& rng) {
  const double dof = kappa + static_cast<double>(nu);
  const auto d = static_cast<double>(batch_scatter.dim());
  if (!(dof > d - 1.0)) {
    throw Error(Errc::insufficient_dof, "batch covariance posterior needs kappa + nu > d - 1");
  }
  const SymMatrix scale = psi + batch_scatter;
  const SymMatrix shift = factor * sigma_eps;
  const std::size_t attempts = std::max<std::size_t>(1, config.rejection_cap);
  CovarianceDraw out;
  for (std::size_t a = 0; a < attempts; ++a) {
    out.sigma = sample_inv_wishart(scale, dof, rng) - shift;
    if (is_pd(out.sigma)) return out;
    ++out.rejections;
  }
  if (config.fallback == TruncationFallback::fail) {
    throw Error(Errc::rejection_exhausted,
                "no positive definite draw in " + std::to_string(attempts) + " attempts");
  }
  out.sigma = clip_to_psd(out.sigma);
  out.truncated = true;
  return out;
}

/// Levels in the rotated basis. Flat rows follow N(β̂_j, kΣ_ε). Free rows
/// combine that likelihood with N(β_0, Σ_b); with U = Σ_b + kΣ_ε the
/// conditional is N(Σ_b U⁻¹ β̂_j + kΣ_ε U⁻¹ β_0, kΣ_ε − kΣ_ε U⁻¹ kΣ_ε), which
/// stays well defined when a truncated Σ_b is singular. Without `sigma_b`
/// every row uses the flat rule.
inline Matrix sample_batch_levels(const Matrix& estimates, const ConstraintGeometry& geometry, const Vector& beta0,
                                  const SymMatrix& sigma_eps, const std::optional<SymMatrix>& sigma_b, double factor,
                                  RngStream& rng) {
  const Index d = estimates.cols();
  const Matrix& rot = geometry.rotation;
  const Matrix rotated = rot.transpose() * estimates;
  const SymMatrix noise = factor * sigma_eps;
  const Matrix noise_factor = covariance_factor(noise);
  const Index flat = sigma_b ? static_cast<Index>(geometry.flat) : rotated.rows();

  Matrix draws(rotated.rows(), d);
  for (Index j = 0; j < flat; ++j) {
    draws.row(j) = (rotated.row(j).transpose() + noise_factor * rng.standard_normal(d)).transpose();
  }
  if (flat < rotated.rows()) {
    const SymMatrix total = *sigma_b + noise;
    const SymMatrix total_inv = inverse(total);
    const Matrix gain = sigma_b->matrix() * total_inv.matrix();
    const Vector prior_pull = noise.matrix() * total_inv.matrix() * beta0;
    const SymMatrix cond(Matrix(noise.matrix() - noise.matrix() * total_inv.matrix() * noise.matrix()));
    const Matrix cond_factor = covariance_factor(cond);
    for (Index j = flat; j < rotated.rows(); ++j) {
      const Vector mean = gain * rotated.row(j).transpose() + prior_pull;
      draws.row(j) = (mean + cond_factor * rng.standard_normal(d)).transpose();
    }
  }
  return rot * draws;
}

/// v_b = 1 / (n_rep · Σ x²), the scale of Σ_ε in a slope estimate's covariance.
inline double slope_variance_factor(const std::vector<double>& x, std::size_t n_rep) {
  double ss = 0.0;
  for (double v : x) ss += v * v;
  if (!(ss > 0.0) || n_rep == 0) throw Error(Errc::degenerate_basis, "slope covariate has zero sum of squares");
  return 1.0 / (static_cast<double>(n_rep) * ss);
}

struct SlopeDraw {
  std::optional<CovarianceDraw> covariance;
  Matrix levels;
};

/// Slope batch: the same covariance and level laws with k = v_b. The
/// covariance is skipped when κ + ν ≤ d − 1.
inline SlopeDraw sample_slope_batch(const Matrix& slopes, const std::vector<double>& x, std::size_t n_rep,
                                    const ConstraintGeometry& geometry, const SymMatrix& psi, double kappa,
                                    const Vector& beta0, const SymMatrix& sigma_eps, const SamplerConfig& config,
                                    RngStream& rng) {
  const double factor = slope_variance_factor(x, n_rep);
  SlopeDraw out;
  const double dof = kappa + static_cast<double>(geometry.free);
  if (geometry.free > 0 && dof > static_cast<double>(slopes.cols()) - 1.0) {
    const SymMatrix scatter = batch_scatter(slopes, geometry, beta0);
    out.covariance = sample_batch_cov(scatter, psi, kappa, sigma_eps, factor, geometry.free, config, rng);
  }
  std::optional<SymMatrix> sigma_b;
  if (out.covariance) sigma_b = out.covariance->sigma;
  out.levels = sample_batch_levels(slopes, geometry, beta0, sigma_eps, sigma_b, factor, rng);
  return out;
}

/// S_b = (1/ν) βᵀ P β with P the constraint projector.
inline SymMatrix finite_pop_cov(const Matrix& levels, const ConstraintGeometry& geometry) {
  if (geometry.free == 0) throw Error(Errc::zero_dof, "finite-population covariance needs nu >= 1");
  if (levels.rows() != geometry.projector.dim()) {
    throw Error(Errc::invalid_dims, "levels do not match the constraint dimension");
  }
  const Matrix projected = geometry.projector.matrix() * levels;
  // βᵀPβ = (Pβ)ᵀ(Pβ) since P is idempotent; the Gram form stays PSD.
  return SymMatrix::gram(projected) * (1.0 / static_cast<double>(geometry.free));
}

inline SymMatrix finite_pop_cov(const Matrix& levels, const Matrix& constraint) {
  return finite_pop_cov(levels, constraint_geometry(constraint));
}

struct BatchDraws {
  std::string name;
  bool has_covariance = false;  // Σ_b sampled (κ + ν > d − 1)
  bool has_finite = false;      // ν ≥ 1
  double posterior_dof = 0.0;
  double variance_factor = 0.0;
  SymMatrix projector;
  std::vector<SymMatrix> sigma;    // per draw, when has_covariance
  std::vector<Matrix> levels;      // per draw, raw (flat directions included)
  std::vector<SymMatrix> finite;   // per draw, when has_finite
  std::vector<std::size_t> rejections;
  std::vector<unsigned char> truncated;

  /// Levels with their flat-direction component removed.
  Matrix projected_levels(std::size_t r) const { return projector.matrix() * levels[r]; }

  std::size_t total_rejections() const {
    std::size_t s = 0;
    for (auto v : rejections) s += v;
    return s;
  }
  std::size_t total_truncations() const {
    std::size_t s = 0;
    for (auto v : truncated) s += v;
    return s;
  }
};

struct PosteriorDraws {
  std::size_t draws = 0;
  std::vector<SymMatrix> error;
  std::vector<BatchDraws> batches;

  const BatchDraws& batch(const std::string& name) const {
    for (const auto& b : batches)
      if (b.name == name) return b;
    throw Error(Errc::invalid_argument, "no batch named '" + name + "'");
  }

  /// Posterior mean of a batch's raw levels.
  Matrix mean_levels(std::size_t b) const {
    Matrix m = Matrix::Zero(batches[b].levels.front().rows(), batches[b].levels.front().cols());
    for (const auto& l : batches[b].levels) m += l;
    return m / static_cast<double>(draws);
  }
};

inline PosteriorDraws run_posterior(const ModelSpec& model, const Fit& fit, const SamplerConfig& config) {
  if (config.draws == 0) throw Error(Errc::invalid_argument, "draws must be >= 1");
  const std::size_t R = config.draws;
  const std::size_t B = model.batches.size();
  const double error_dof = model.error_kappa + static_cast<double>(fit.scatter.residual_count);
  if (!(error_dof > static_cast<double>(model.d) - 1.0)) {
    throw Error(Errc::insufficient_dof, "error posterior needs kappa + n - sum(n_b) > d - 1 (got " +
                                            std::to_string(error_dof) + ")");
  }

  PosteriorDraws out;
  out.draws = R;
  out.error.resize(R);
  out.batches.resize(B);
  for (std::size_t b = 0; b < B; ++b) {
    const auto& spec = model.batches[b];
    auto& bd = out.batches[b];
    bd.name = spec.name;
    bd.has_covariance = spec.covariance_proper;
    bd.has_finite = spec.dof() >= 1;
    bd.posterior_dof = spec.posterior_dof();
    bd.variance_factor = spec.variance_factor();
    bd.projector = spec.geometry.projector;
    bd.levels.resize(R);
    if (bd.has_covariance) bd.sigma.resize(R);
    if (bd.has_finite) bd.finite.resize(R);
    bd.rejections.assign(R, 0);
    bd.truncated.assign(R, 0);
  }

  parallel_for(R, config.threads, [&](std::size_t r) {
    RngStream error_rng(config.seed, draw_stream(r, 0));
    const SymMatrix sigma_eps = sample_error_cov(fit.scatter, model.error_psi, model.error_kappa, error_rng);
    out.error[r] = sigma_eps;
    for (std::size_t b = 0; b < B; ++b) {
      const auto& spec = model.batches[b];
      auto& bd = out.batches[b];
      RngStream rng(config.seed, draw_stream(r, b + 1));
      try {
        std::optional<SymMatrix> sigma_b;
        if (bd.has_covariance) {
          auto cov = sample_batch_cov(fit.scatter.batch[b], spec.prior_psi, spec.prior_kappa, sigma_eps,
                                      spec.variance_factor(), spec.dof(), config, rng);
          bd.rejections[r] = cov.rejections;
          bd.truncated[r] = cov.truncated ? 1 : 0;
          sigma_b = cov.sigma;
          bd.sigma[r] = std::move(cov.sigma);
        }
        bd.levels[r] = sample_batch_levels(fit.estimates.levels[b], spec.geometry, spec.prior_beta0, sigma_eps,
                                           sigma_b, spec.variance_factor(), rng);
        if (bd.has_finite) bd.finite[r] = finite_pop_cov(bd.levels[r], spec.geometry);
      } catch (const Error& e) {
        throw Error(e.code(), "batch '" + spec.name + "', draw " + std::to_string(r) + ": " + e.what());
      }
    }
  });
  return out;
}

inline PosteriorDraws run_posterior(const ModelSpec& model, const Dataset& data, const SamplerConfig& config) {
  return run_posterior(model, fit_model(data, model), config);
}

}  // namespace mmanova
