#pragma once

// Univariate multilevel ANOVA: method-of-moments variance components and the
// inverse-chi-square simulation of superpopulation variances, levels and
// finite-population variances.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "mmanova/estimation.hpp"
#include "mmanova/parallel.hpp"
#include "mmanova/random.hpp"

namespace mmanova {

struct UnivariateBatch {
  std::string name;
  std::size_t model_index = 0;  // position in ModelSpec::batches
  std::size_t factor_count = 0;
  std::size_t nu = 0;
  double weight = 0.0;          // per-level Σx², n/n_b for constant batches
  ConstraintGeometry geometry;
  Vector estimates;             // projected level estimates
  double v_hat = 0.0;           // (1/ν) Σ β̂²
  double v_est = 0.0;           // estimation share
  double sigma2_raw = 0.0;      // v_hat − v_est, may be negative
  double sigma2 = 0.0;          // max(0, sigma2_raw)
  std::vector<std::size_t> includes;  // I(b) as indices into VarianceDecomposition::batches
};

struct VarianceDecomposition {
  std::vector<UnivariateBatch> batches;  // batches with ν ≥ 1, model order
  double sigma2_eps = 0.0;
  double error_dof = 0.0;
  /// Resolution order: more factors first.
  std::vector<std::size_t> order;
};

inline double finite_variance(const Vector& levels, const ConstraintGeometry& geometry) {
  if (geometry.free == 0) throw Error(Errc::zero_dof, "finite variance needs nu >= 1");
  // The projector is PSD, so a negative value can only be rounding.
  return std::max(0.0, levels.dot(geometry.projector.matrix() * levels)) / static_cast<double>(geometry.free);
}

inline double finite_variance(const Vector& levels, const Matrix& constraint) {
  return finite_variance(levels, constraint_geometry(constraint));
}

namespace detail {

inline bool strictly_contains(const std::vector<std::string>& outer, const std::vector<std::string>& inner) {
  if (outer.size() <= inner.size()) return false;
  for (const auto& f : inner)
    if (std::find(outer.begin(), outer.end(), f) == outer.end()) return false;
  return true;
}

}  // namespace detail

inline VarianceDecomposition fit_univariate(const Dataset& data, const ModelSpec& model) {
  if (model.d != 1) throw Error(Errc::invalid_dims, "univariate decomposition needs d = 1");
  const Fit fit = fit_model(data, model);

  VarianceDecomposition out;
  double rank = 0.0;
  for (std::size_t b = 0; b < model.batches.size(); ++b) {
    const auto& spec = model.batches[b];
    if (spec.fully_flat()) {
      rank += static_cast<double>(spec.levels);
      continue;
    }
    rank += static_cast<double>(spec.dof());
    UnivariateBatch ub;
    ub.name = spec.name;
    ub.model_index = b;
    ub.factor_count = spec.factors.size();
    ub.nu = spec.dof();
    ub.weight = spec.weight;
    ub.geometry = spec.geometry;
    ub.estimates = fit.estimates.levels[b].col(0);
    ub.v_hat = ub.estimates.squaredNorm() / static_cast<double>(ub.nu);
    out.batches.push_back(std::move(ub));
  }
  out.error_dof = static_cast<double>(model.n) - rank;
  if (!(out.error_dof > 0.0)) throw Error(Errc::insufficient_dof, "no residual degrees of freedom");
  out.sigma2_eps = fit.scatter.residual(0, 0) / out.error_dof;

  for (std::size_t i = 0; i < out.batches.size(); ++i) {
    const auto& bi = model.batches[out.batches[i].model_index];
    for (std::size_t k = 0; k < out.batches.size(); ++k) {
      const auto& bk = model.batches[out.batches[k].model_index];
      if (bk.covariate == bi.covariate && detail::strictly_contains(bk.factors, bi.factors)) {
        out.batches[i].includes.push_back(k);
      }
    }
  }
  out.order.resize(out.batches.size());
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  std::stable_sort(out.order.begin(), out.order.end(), [&](std::size_t a, std::size_t b) {
    return out.batches[a].factor_count > out.batches[b].factor_count;
  });

  // Contributions from containing batches use their truncated estimates, so
  // the share never drops below the error term.
  for (std::size_t i : out.order) {
    auto& ub = out.batches[i];
    ub.v_est = out.sigma2_eps / ub.weight;
    for (std::size_t k : ub.includes) ub.v_est += out.batches[k].weight / ub.weight * out.batches[k].sigma2;
    ub.sigma2_raw = ub.v_hat - ub.v_est;
    ub.sigma2 = std::max(0.0, ub.sigma2_raw);
  }
  return out;
}

struct UnivariateBatchDraws {
  std::string name;
  std::vector<double> sigma2;
  std::vector<Vector> levels;
  std::vector<double> finite;
  std::size_t truncations = 0;
};

struct UnivariateDraws {
  std::vector<double> sigma2_eps;
  std::vector<UnivariateBatchDraws> batches;
};

/// Per draw: raw variances V_b ~ ν V̂_b / χ²_ν and σ²_ε likewise; σ²_b =
/// max(0, V_b − V_b:estimation) resolved in containment order; levels from
/// their conditional law given σ²_b and the estimation variance; s²_b.
inline UnivariateDraws simulate_univariate(const VarianceDecomposition& dec, std::size_t draws, std::uint64_t seed,
                                           std::size_t threads = 1) {
  if (draws == 0) throw Error(Errc::invalid_argument, "draws must be >= 1");
  const std::size_t B = dec.batches.size();
  UnivariateDraws out;
  out.sigma2_eps.resize(draws);
  out.batches.resize(B);
  for (std::size_t b = 0; b < B; ++b) {
    out.batches[b].name = dec.batches[b].name;
    out.batches[b].sigma2.resize(draws);
    out.batches[b].levels.resize(draws);
    out.batches[b].finite.resize(draws);
  }
  std::vector<unsigned char> truncated(draws * B, 0);

  parallel_for(draws, threads, [&](std::size_t r) {
    RngStream error_rng(seed, stream_key(r, 0));
    const double sigma2_eps = dec.error_dof * dec.sigma2_eps / error_rng.chi_square(dec.error_dof);
    out.sigma2_eps[r] = sigma2_eps;

    std::vector<RngStream> rngs;
    rngs.reserve(B);
    std::vector<double> raw(B), sigma2(B), v_est(B);
    for (std::size_t b = 0; b < B; ++b) {
      rngs.emplace_back(seed, stream_key(r, b + 1));
      const auto& ub = dec.batches[b];
      const double nu = static_cast<double>(ub.nu);
      raw[b] = ub.v_hat > 0.0 ? nu * ub.v_hat / rngs[b].chi_square(nu) : 0.0;
    }
    for (std::size_t b : dec.order) {
      const auto& ub = dec.batches[b];
      v_est[b] = sigma2_eps / ub.weight;
      for (std::size_t k : ub.includes) v_est[b] += dec.batches[k].weight / ub.weight * sigma2[k];
      sigma2[b] = std::max(0.0, raw[b] - v_est[b]);
      truncated[r * B + b] = raw[b] - v_est[b] <= 0.0 ? 1 : 0;
    }
    for (std::size_t b = 0; b < B; ++b) {
      const auto& ub = dec.batches[b];
      auto& bd = out.batches[b];
      const Matrix& rot = ub.geometry.rotation;
      const Vector rotated = rot.transpose() * ub.estimates;
      Vector level = rotated;
      const double total = sigma2[b] + v_est[b];
      const double shrink = total > 0.0 ? sigma2[b] / total : 0.0;
      const double sd = total > 0.0 ? std::sqrt(sigma2[b] * v_est[b] / total) : 0.0;
      for (Index j = static_cast<Index>(ub.geometry.flat); j < rotated.size(); ++j) {
        level(j) = shrink * rotated(j) + sd * rngs[b].normal();
      }
      bd.sigma2[r] = sigma2[b];
      bd.levels[r] = rot * level;
      bd.finite[r] = finite_variance(bd.levels[r], ub.geometry);
    }
  });
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t r = 0; r < draws; ++r) out.batches[b].truncations += truncated[r * B + b];
  return out;
}

}  // namespace mmanova
