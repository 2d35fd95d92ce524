#pragma once

// Least-squares decomposition of a balanced dataset into batch level
// estimates, fitted values, residuals and the scatter matrices that drive the
// posterior.

#include <cmath>
#include <vector>

#include "mmanova/model.hpp"

namespace mmanova {

struct BatchEstimates {
  std::vector<Matrix> levels;  // per batch, n_b × d
  std::vector<double> variance_factor;
};

struct ScatterSet {
  SymMatrix residual;
  std::vector<SymMatrix> batch;
  long residual_count = 0;
};

struct FitResult {
  Matrix fitted;
  Matrix residuals;
};

/// Per-level regression of the response on the batch covariate (1 for
/// constant batches), then projection onto the constraint-free directions.
/// Fully flat batches keep the raw coefficient.
inline BatchEstimates least_squares_decompose(const Dataset& data, const ModelSpec& model) {
  BatchEstimates est;
  const Index d = static_cast<Index>(model.d);
  for (const auto& b : model.batches) {
    Matrix raw = Matrix::Zero(static_cast<Index>(b.levels), d);
    for (std::size_t i = 0; i < model.n; ++i) {
      raw.row(static_cast<Index>(b.level_map[i])) += b.x(i) * data.responses.row(static_cast<Index>(i));
    }
    raw /= b.weight;
    if (b.fully_flat()) {
      est.levels.push_back(std::move(raw));
    } else {
      est.levels.push_back(b.geometry.projector.matrix() * raw);
    }
    est.variance_factor.push_back(b.variance_factor());
  }
  return est;
}

inline Matrix fitted_values(const ModelSpec& model, const BatchEstimates& est) {
  Matrix fitted = Matrix::Zero(static_cast<Index>(model.n), static_cast<Index>(model.d));
  for (std::size_t b = 0; b < model.batches.size(); ++b) {
    const auto& spec = model.batches[b];
    for (std::size_t i = 0; i < model.n; ++i) {
      fitted.row(static_cast<Index>(i)) += spec.x(i) * est.levels[b].row(static_cast<Index>(spec.level_map[i]));
    }
  }
  return fitted;
}

/// Fitted values and residuals. Each (fitted, residual) pair is nudged within
/// rounding so that fitted + residual reproduces the response bitwise; this is
/// possible whenever |y| >= min(|fitted|, |residual|).
inline FitResult fitted_and_residuals(const Dataset& data, const ModelSpec& model, const BatchEstimates& est) {
  FitResult out{fitted_values(model, est), Matrix()};
  out.residuals = data.responses - out.fitted;
  for (Index i = 0; i < out.fitted.rows(); ++i) {
    for (Index k = 0; k < out.fitted.cols(); ++k) {
      const double y = data.responses(i, k);
      double& f = out.fitted(i, k);
      double& r = out.residuals(i, k);
      if (f + r == y) continue;
      if (std::abs(y) >= std::abs(f)) {
        f = y - r;  // exact: Fast2Sum(y, -f) recovers y - r without error
      } else if (std::abs(y) >= std::abs(r)) {
        f = y - r;
        r = y - f;  // exact for the same reason
      }
    }
  }
  return out;
}

inline SymMatrix residual_scatter(const Matrix& residuals) { return SymMatrix::gram(residuals); }

/// Scatter of the estimates over the constraint-free rotated coordinates,
/// centred at the prior mean.
inline SymMatrix batch_scatter(const Matrix& levels, const ConstraintGeometry& geometry, const Vector& beta0) {
  const Index d = levels.cols();
  if (geometry.free == 0) return SymMatrix::zero(d);
  const Matrix rotated = geometry.rotation.rightCols(static_cast<Index>(geometry.free)).transpose() * levels;
  const Matrix centred = rotated.rowwise() - beta0.transpose();
  return SymMatrix::gram(centred);
}

inline ScatterSet compute_scatter(const ModelSpec& model, const BatchEstimates& est, const Matrix& residuals) {
  ScatterSet s;
  s.residual = residual_scatter(residuals);
  for (std::size_t b = 0; b < model.batches.size(); ++b) {
    const auto& spec = model.batches[b];
    s.batch.push_back(batch_scatter(est.levels[b], spec.geometry, spec.prior_beta0));
  }
  s.residual_count = model.residual_count();
  return s;
}

/// Everything the posterior needs from the data.
struct Fit {
  BatchEstimates estimates;
  FitResult fit;
  ScatterSet scatter;
};

inline Fit fit_model(const Dataset& data, const ModelSpec& model) {
  Fit out;
  out.estimates = least_squares_decompose(data, model);
  out.fit = fitted_and_residuals(data, model, out.estimates);
  out.scatter = compute_scatter(model, out.estimates, out.fit.residuals);
  return out;
}

}  // namespace mmanova
