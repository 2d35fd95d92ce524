#pragma once

// One-way simulation scenarios with known covariances and the coverage study
// that compares posterior intervals to the truth across replicates.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mmanova/criteria.hpp"
#include "mmanova/model.hpp"

namespace mmanova {

enum class ScenarioCase { greater = 1, less = 2, comparable = 3 };

inline ScenarioCase scenario_case(int id) {
  if (id < 1 || id > 3) throw Error(Errc::invalid_argument, "scenario case must be 1, 2 or 3");
  return static_cast<ScenarioCase>(id);
}

/// Marginal standard deviations of the group effects per case. Case 1 puts
/// the group variability above the unit error variances, case 2 below, case 3
/// level with them.
inline Vector default_scales(ScenarioCase c) {
  switch (c) {
    case ScenarioCase::greater: return Vector{{std::sqrt(2.0), std::sqrt(2.0), std::sqrt(3.0)}};
    case ScenarioCase::less: return Vector::Constant(3, 0.4);
    case ScenarioCase::comparable: return Vector::Ones(3);
  }
  return Vector::Ones(3);
}

inline SymMatrix group_correlation() {
  Matrix r = Matrix::Identity(3, 3);
  r(0, 1) = r(1, 0) = 0.3;
  r(0, 2) = r(2, 0) = 0.1;
  r(1, 2) = r(2, 1) = 0.5;
  return SymMatrix(r);
}

inline SymMatrix ar1_correlation(Index d, double rho) {
  Matrix r(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) r(i, j) = std::pow(rho, static_cast<double>(std::abs(i - j)));
  return SymMatrix(r);
}

struct Scenario {
  ScenarioCase kind = ScenarioCase::comparable;
  std::size_t n_alpha = 0;
  std::size_t n_eps = 0;
  Vector scales;
  SymMatrix sigma_alpha;
  SymMatrix sigma_eps;
  Vector mu;
  std::uint64_t seed = 0;
  Matrix alpha;  // realized group effects, n_alpha × 3
};

inline constexpr const char* kGroupFactor = "group";

/// Y_ij = μ + α_i + ε_ij with α_i ~ N(0, diag(s) R_α diag(s)), ε_ij ~ N(0, R_ε),
/// R_ε AR(1) with ρ = 0.2, μ = 0. Rows are ordered group-major.
inline std::pair<Scenario, Dataset> generate_scenario(ScenarioCase kind, std::size_t n_alpha, std::size_t n_eps,
                                                      std::uint64_t seed, std::optional<Vector> scales = std::nullopt) {
  if (n_alpha < 2 || n_eps < 2) {
    throw Error(Errc::invalid_sizes, "scenario needs n_alpha >= 2 and n_eps >= 2");
  }
  Scenario sc;
  sc.kind = kind;
  sc.n_alpha = n_alpha;
  sc.n_eps = n_eps;
  sc.scales = scales.value_or(default_scales(kind));
  if (sc.scales.size() != 3) throw Error(Errc::invalid_sizes, "scenario scales must have length 3");
  sc.sigma_alpha = SymMatrix(Matrix(sc.scales.asDiagonal() * group_correlation().matrix() * sc.scales.asDiagonal()));
  sc.sigma_eps = ar1_correlation(3, 0.2);
  sc.mu = Vector::Zero(3);
  sc.seed = seed;

  RngStream rng(seed, 0);
  const Matrix la = cholesky_lower(sc.sigma_alpha);
  const Matrix le = cholesky_lower(sc.sigma_eps);
  sc.alpha.resize(static_cast<Index>(n_alpha), 3);
  for (std::size_t i = 0; i < n_alpha; ++i) sc.alpha.row(static_cast<Index>(i)) = (la * rng.standard_normal(3)).transpose();

  Dataset data;
  const std::size_t n = n_alpha * n_eps;
  data.responses.resize(static_cast<Index>(n), 3);
  data.response_names = {"y1", "y2", "y3"};
  FactorColumn group;
  for (std::size_t i = 0; i < n_alpha; ++i) group.labels.push_back("g" + std::to_string(i + 1));
  for (std::size_t i = 0; i < n_alpha; ++i) {
    for (std::size_t j = 0; j < n_eps; ++j) {
      const Vector y = sc.mu + sc.alpha.row(static_cast<Index>(i)).transpose() + le * rng.standard_normal(3);
      data.responses.row(static_cast<Index>(i * n_eps + j)) = y.transpose();
      group.index.push_back(i);
    }
  }
  data.factors[kGroupFactor] = std::move(group);
  return {std::move(sc), std::move(data)};
}

/// Intercept plus one main effect on `group`, noninformative priors.
inline ModelConfig one_way_config(std::size_t draws, std::uint64_t seed) {
  ModelConfig config;
  config.responses = {"y1", "y2", "y3"};
  config.batches.push_back(BatchConfig{"mu", BatchKind::intercept, {}, std::nullopt, CovariateTransform::none, {}});
  config.batches.push_back(
      BatchConfig{"alpha", BatchKind::main, {kGroupFactor}, std::nullopt, CovariateTransform::none, {}});
  config.draws = draws;
  config.seed = seed;
  return config;
}

struct CoverageCell {
  std::size_t n_alpha = 0;
  ParameterKind parameter = ParameterKind::superpopulation;
  Criterion criterion = Criterion::determinant;
  double coverage = 0.0;
  double mean_width = 0.0;
  double median_width = 0.0;
  std::size_t replicates = 0;
};

struct CoverageReport {
  ScenarioCase kind = ScenarioCase::comparable;
  std::size_t n_eps = 0;
  std::size_t replicates = 0;
  std::size_t draws = 0;
  double level = 0.95;
  std::uint64_t seed = 0;
  std::vector<CoverageCell> cells;      // posterior intervals
  std::vector<CoverageCell> reference;  // frequentist intervals from directly observed group effects

  const CoverageCell& cell(std::size_t n_alpha, ParameterKind p, Criterion c) const {
    for (const auto& x : cells)
      if (x.n_alpha == n_alpha && x.parameter == p && x.criterion == c) return x;
    throw Error(Errc::invalid_argument, "no such coverage cell");
  }
};

struct CoverageOptions {
  ScenarioCase kind = ScenarioCase::comparable;
  std::vector<std::size_t> n_alpha{5, 20, 50};
  std::size_t n_eps = 15;
  std::size_t replicates = 100;
  std::size_t draws = 1000;
  double level = 0.95;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::optional<Vector> scales;
};

namespace detail {

struct ReplicateOutcome {
  // [parameter][criterion]
  std::array<std::array<unsigned char, 3>, 3> covered{};
  std::array<std::array<double, 3>, 3> width{};
  std::array<unsigned char, 3> ref_covered{};
  std::array<double, 3> ref_width{};
};

inline ReplicateOutcome run_replicate(const CoverageOptions& opt, std::size_t n_alpha, std::size_t s) {
  const std::uint64_t key = stream_key(n_alpha, s);
  auto [sc, data] = generate_scenario(opt.kind, n_alpha, opt.n_eps, splitmix64(opt.seed ^ key), opt.scales);
  const ModelSpec model = build_model(one_way_config(opt.draws, splitmix64(opt.seed + key)), data);
  SamplerConfig sampler;
  sampler.draws = opt.draws;
  sampler.seed = splitmix64(opt.seed + key);
  const PosteriorDraws post = run_posterior(model, data, sampler);
  const auto& alpha = post.batch("alpha");

  const ConstraintGeometry& geom = model.batches[*model.find("alpha")].geometry;
  const SymMatrix finite_truth = finite_pop_cov(sc.alpha, geom);
  const std::array<const std::vector<SymMatrix>*, 3> series{&alpha.sigma, &alpha.finite, &post.error};
  const std::array<const SymMatrix*, 3> truth{&sc.sigma_alpha, &finite_truth, &sc.sigma_eps};
  const std::vector<double> probs{0.5 * (1.0 - opt.level), 0.5 * (1.0 + opt.level)};

  ReplicateOutcome out;
  for (std::size_t p = 0; p < 3; ++p) {
    for (std::size_t c = 0; c < 3; ++c) {
      const auto q = summarize_intervals(criterion_draws(*series[p], kAllCriteria[c]), probs);
      const double t = criterion_value(*truth[p], kAllCriteria[c]);
      out.covered[p][c] = (q[0] <= t && t <= q[1]) ? 1 : 0;
      out.width[p][c] = q[1] - q[0];
    }
  }
  // Reference: group effects treated as directly observed, U ~ W(Σ_α, n_α − 1).
  const Matrix centred = sc.alpha.rowwise() - sc.alpha.colwise().mean();
  const SymMatrix u = SymMatrix::gram(centred);
  for (std::size_t c = 0; c < 3; ++c) {
    const auto [lo, hi] = freq_reference_interval(u, n_alpha, kAllCriteria[c], opt.level);
    const double t = criterion_value(sc.sigma_alpha, kAllCriteria[c]);
    out.ref_covered[c] = (lo <= t && t <= hi) ? 1 : 0;
    out.ref_width[c] = hi - lo;
  }
  return out;
}

inline CoverageCell make_cell(std::size_t n_alpha, ParameterKind p, Criterion c, const std::vector<unsigned char>& hit,
                              std::vector<double> widths) {
  CoverageCell cell;
  cell.n_alpha = n_alpha;
  cell.parameter = p;
  cell.criterion = c;
  cell.replicates = hit.size();
  double hits = 0.0;
  for (auto h : hit) hits += h;
  cell.coverage = hits / static_cast<double>(hit.size());
  double sum = 0.0;
  for (double w : widths) sum += w;
  cell.mean_width = sum / static_cast<double>(widths.size());
  std::sort(widths.begin(), widths.end());
  cell.median_width = quantile_sorted(widths, 0.5);
  return cell;
}

}  // namespace detail

inline CoverageReport coverage_experiment(const CoverageOptions& opt) {
  if (opt.replicates == 0) throw Error(Errc::invalid_argument, "coverage needs at least one replicate");
  if (opt.n_alpha.empty()) throw Error(Errc::invalid_argument, "coverage needs an n_alpha grid");
  CoverageReport report;
  report.kind = opt.kind;
  report.n_eps = opt.n_eps;
  report.replicates = opt.replicates;
  report.draws = opt.draws;
  report.level = opt.level;
  report.seed = opt.seed;

  constexpr std::array<ParameterKind, 3> params{ParameterKind::superpopulation, ParameterKind::finite,
                                                ParameterKind::error};
  for (std::size_t na : opt.n_alpha) {
    std::vector<detail::ReplicateOutcome> outcomes(opt.replicates);
    parallel_for(opt.replicates, opt.threads, [&](std::size_t s) { outcomes[s] = detail::run_replicate(opt, na, s); });
    for (std::size_t p = 0; p < 3; ++p) {
      for (std::size_t c = 0; c < 3; ++c) {
        std::vector<unsigned char> hit;
        std::vector<double> widths;
        for (const auto& o : outcomes) {
          hit.push_back(o.covered[p][c]);
          widths.push_back(o.width[p][c]);
        }
        report.cells.push_back(detail::make_cell(na, params[p], kAllCriteria[c], hit, std::move(widths)));
      }
    }
    for (std::size_t c = 0; c < 3; ++c) {
      std::vector<unsigned char> hit;
      std::vector<double> widths;
      for (const auto& o : outcomes) {
        hit.push_back(o.ref_covered[c]);
        widths.push_back(o.ref_width[c]);
      }
      report.reference.push_back(
          detail::make_cell(na, ParameterKind::superpopulation, kAllCriteria[c], hit, std::move(widths)));
    }
  }
  return report;
}

}  // namespace mmanova
