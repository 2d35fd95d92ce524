#pragma once

// Scalar covariance criteria and their summaries: quantile intervals,
// exceedance probabilities and the pivot-based frequentist intervals used as a
// reference in simulation studies.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "mmanova/posterior.hpp"

namespace mmanova {

enum class Criterion { determinant, total_variance, total_marginal_variance };

inline constexpr std::array<Criterion, 3> kAllCriteria{Criterion::determinant, Criterion::total_variance,
                                                       Criterion::total_marginal_variance};

inline std::string_view to_string(Criterion c) {
  switch (c) {
    case Criterion::determinant: return "determinant";
    case Criterion::total_variance: return "total_variance";
    case Criterion::total_marginal_variance: return "total_marginal_variance";
  }
  return "?";
}

enum class ParameterKind { superpopulation, finite, error };

inline std::string_view to_string(ParameterKind p) {
  switch (p) {
    case ParameterKind::superpopulation: return "superpopulation";
    case ParameterKind::finite: return "finite";
    case ParameterKind::error: return "error";
  }
  return "?";
}

/// Determinant as the product of squared Cholesky pivots (0 when a pivot is
/// not positive), grand sum, or trace.
inline double criterion_value(const SymMatrix& sigma, Criterion kind) {
  switch (kind) {
    case Criterion::determinant: {
      const auto l = try_cholesky(sigma, 0.0);
      if (!l) return 0.0;
      double det = 1.0;
      for (Index i = 0; i < l->rows(); ++i) det *= (*l)(i, i) * (*l)(i, i);
      return det;
    }
    case Criterion::total_variance: return std::max(0.0, sigma.sum());
    case Criterion::total_marginal_variance: return sigma.trace();
  }
  return 0.0;
}

inline std::vector<double> criterion_draws(const std::vector<SymMatrix>& draws, Criterion kind) {
  std::vector<double> out;
  out.reserve(draws.size());
  for (const auto& s : draws) out.push_back(criterion_value(s, kind));
  return out;
}

/// Type-7 quantile (linear interpolation between order statistics) of sorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw Error(Errc::empty, "quantile of an empty sequence");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(Errc::invalid_argument, "quantile probability outside [0, 1]");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

struct IntervalSummary {
  std::string batch;
  ParameterKind parameter = ParameterKind::superpopulation;
  Criterion criterion = Criterion::determinant;
  std::vector<double> probs;
  std::vector<double> values;

  /// Value at probability p, which must be one of `probs`.
  double at(double p) const {
    for (std::size_t i = 0; i < probs.size(); ++i)
      if (std::abs(probs[i] - p) < 1e-12) return values[i];
    throw Error(Errc::invalid_argument, "probability not summarized");
  }
};

inline std::vector<double> summarize_intervals(std::vector<double> draws, const std::vector<double>& probs) {
  if (draws.empty()) throw Error(Errc::empty, "cannot summarize an empty draw sequence");
  std::sort(draws.begin(), draws.end());
  std::vector<double> out;
  out.reserve(probs.size());
  for (double p : probs) out.push_back(quantile_sorted(draws, p));
  // Interpolation rounding can break ties the wrong way by one ulp.
  for (std::size_t i = 1; i < out.size(); ++i) out[i] = std::max(out[i], out[i - 1]);
  return out;
}

/// Fraction of paired draws with a > b.
inline double exceedance_prob(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw Error(Errc::length_mismatch, "exceedance needs paired draws (" + std::to_string(a.size()) + " vs " +
                                           std::to_string(b.size()) + ")");
  }
  if (a.empty()) throw Error(Errc::empty, "exceedance of empty draw sequences");
  std::size_t count = 0;
  for (std::size_t i = 0; i < a.size(); ++i) count += a[i] > b[i] ? 1 : 0;
  return static_cast<double>(count) / static_cast<double>(a.size());
}

/// One summarized covariance parameter of a posterior.
struct ParameterSeries {
  std::string batch;
  ParameterKind parameter;
  const std::vector<SymMatrix>* draws;
};

/// Every reportable covariance series in model order: each batch's Σ_b then
/// S_b when available, then the error covariance.
inline std::vector<ParameterSeries> parameter_series(const PosteriorDraws& post) {
  std::vector<ParameterSeries> out;
  for (const auto& b : post.batches) {
    if (b.has_covariance) out.push_back({b.name, ParameterKind::superpopulation, &b.sigma});
    if (b.has_finite) out.push_back({b.name, ParameterKind::finite, &b.finite});
  }
  out.push_back({"error", ParameterKind::error, &post.error});
  return out;
}

inline std::vector<IntervalSummary> summarize_posterior(const PosteriorDraws& post, const std::vector<double>& probs) {
  std::vector<IntervalSummary> out;
  for (const auto& series : parameter_series(post)) {
    for (auto c : kAllCriteria) {
      out.push_back({series.batch, series.parameter, c, probs, summarize_intervals(criterion_draws(*series.draws, c), probs)});
    }
  }
  return out;
}

struct ExceedanceTable {
  Criterion criterion;
  std::vector<std::string> labels;  // "batch/parameter"
  std::vector<std::vector<double>> prob;  // prob[i][j] = P(g_i > g_j | Y)
};

inline std::vector<ExceedanceTable> exceedance_tables(const PosteriorDraws& post) {
  const auto series = parameter_series(post);
  std::vector<ExceedanceTable> out;
  for (auto c : kAllCriteria) {
    ExceedanceTable t{c, {}, {}};
    std::vector<std::vector<double>> values;
    for (const auto& s : series) {
      t.labels.push_back(s.batch + "/" + std::string(to_string(s.parameter)));
      values.push_back(criterion_draws(*s.draws, c));
    }
    t.prob.assign(series.size(), std::vector<double>(series.size(), 0.0));
    for (std::size_t i = 0; i < series.size(); ++i)
      for (std::size_t j = 0; j < series.size(); ++j) t.prob[i][j] = exceedance_prob(values[i], values[j]);
    out.push_back(std::move(t));
  }
  return out;
}

// Frequentist reference intervals for a scatter U ~ W(Σ, n − 1).

inline constexpr std::size_t kPivotDraws = 100000;
inline constexpr std::uint64_t kPivotSeed = 0x5eed'c0de'd00d'f00dULL;

/// Sorted Monte Carlo draws of log Π_{i=1..d} χ²_{n−1−d+i}, cached per (n, d).
inline const std::vector<double>& log_det_pivot_draws(std::size_t n, std::size_t d) {
  static std::mutex mutex;
  static std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto [it, inserted] = cache.try_emplace({n, d});
  if (inserted) {
    RngStream rng(kPivotSeed, stream_key(n, d));
    auto& v = it->second;
    v.resize(kPivotDraws);
    for (auto& x : v) {
      double s = 0.0;
      for (std::size_t i = 1; i <= d; ++i) s += std::log(rng.chi_square(static_cast<double>(n - 1 - d + i)));
      x = s;
    }
    std::sort(v.begin(), v.end());
  }
  return it->second;
}

inline std::pair<double, double> freq_reference_interval(const SymMatrix& u, std::size_t n, Criterion kind,
                                                         double level = 0.95) {
  const std::size_t d = static_cast<std::size_t>(u.dim());
  if (n < d + 1) {
    throw Error(Errc::insufficient_n, "reference interval needs n - 1 >= d (n = " + std::to_string(n) + ")");
  }
  if (!(level > 0.0 && level < 1.0)) throw Error(Errc::invalid_argument, "level must lie in (0, 1)");
  const double lo_p = 0.5 * (1.0 - level);
  const double hi_p = 1.0 - lo_p;
  const double dof = static_cast<double>(n - 1);
  switch (kind) {
    case Criterion::determinant: {
      const double det = criterion_value(u, Criterion::determinant);
      if (d == 1) {
        boost::math::chi_squared chi(dof);
        return {det / boost::math::quantile(chi, hi_p), det / boost::math::quantile(chi, lo_p)};
      }
      const auto& pivot = log_det_pivot_draws(n, d);
      return {det / std::exp(quantile_sorted(pivot, hi_p)), det / std::exp(quantile_sorted(pivot, lo_p))};
    }
    case Criterion::total_variance: {
      boost::math::chi_squared chi(dof);
      const double total = u.sum();
      return {total / boost::math::quantile(chi, hi_p), total / boost::math::quantile(chi, lo_p)};
    }
    case Criterion::total_marginal_variance: {
      // tr(U)/(n−1) has mean tr(Σ) and variance 2 tr(Σ²)/(n−1); plug in Σ̂ = U/(n−1).
      const Matrix sigma_hat = u.matrix() / dof;
      const double centre = sigma_hat.trace();
      const double sd = std::sqrt(2.0 * (sigma_hat * sigma_hat).trace() / dof);
      const double z = boost::math::quantile(boost::math::normal(), hi_p);
      return {std::max(0.0, centre - z * sd), centre + z * sd};
    }
  }
  return {0.0, 0.0};
}

}  // namespace mmanova
