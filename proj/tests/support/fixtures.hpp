#pragma once

// Small synthetic datasets and configurations shared by the test suites.

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "mmanova/model.hpp"

namespace fixtures {

using namespace mmanova;

inline FactorColumn factor(std::size_t levels, const std::string& prefix, const std::vector<std::size_t>& index) {
  FactorColumn f;
  for (std::size_t l = 0; l < levels; ++l) f.labels.push_back(prefix + std::to_string(l + 1));
  f.index = index;
  return f;
}

inline BatchConfig intercept(const std::string& name = "mu") {
  return BatchConfig{name, BatchKind::intercept, {}, std::nullopt, CovariateTransform::none, {}};
}

inline BatchConfig main_effect(const std::string& name, const std::string& f) {
  return BatchConfig{name, BatchKind::main, {f}, std::nullopt, CovariateTransform::none, {}};
}

inline BatchConfig interaction(const std::string& name, std::vector<std::string> factors) {
  return BatchConfig{name, BatchKind::interaction, std::move(factors), std::nullopt, CovariateTransform::none, {}};
}

inline BatchConfig slope(const std::string& name, std::vector<std::string> factors, const std::string& cov,
                         CovariateTransform t = CovariateTransform::none) {
  return BatchConfig{name, BatchKind::slope, std::move(factors), cov, t, {}};
}

inline std::vector<std::string> response_names(std::size_t d) {
  std::vector<std::string> r;
  for (std::size_t k = 0; k < d; ++k) r.push_back("y" + std::to_string(k + 1));
  return r;
}

/// One-way layout, group-major rows, responses N(offset + effect_i, 1) with
/// effects N(0, effect_sd²).
inline Dataset one_way_data(std::size_t n_alpha, std::size_t n_eps, std::size_t d, std::uint64_t seed,
                            double effect_sd = 1.0, double offset = 0.0) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> z;
  Dataset data;
  data.response_names = response_names(d);
  data.responses.resize(static_cast<Index>(n_alpha * n_eps), static_cast<Index>(d));
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < n_alpha; ++i) {
    Vector effect(static_cast<Index>(d));
    for (Index k = 0; k < effect.size(); ++k) effect(k) = effect_sd * z(g);
    for (std::size_t j = 0; j < n_eps; ++j) {
      for (Index k = 0; k < effect.size(); ++k) {
        data.responses(static_cast<Index>(i * n_eps + j), k) = offset + effect(k) + z(g);
      }
      idx.push_back(i);
    }
  }
  data.factors["a"] = factor(n_alpha, "a", idx);
  return data;
}

inline ModelConfig one_way_config(std::size_t d, std::size_t draws = 200, std::uint64_t seed = 1) {
  ModelConfig c;
  c.responses = response_names(d);
  c.batches = {intercept(), main_effect("alpha", "a")};
  c.draws = draws;
  c.seed = seed;
  return c;
}

/// Two-way crossed layout with replication; rows in shuffled order so the
/// level maps are exercised. Responses carry random main, interaction and
/// noise terms around `offset`.
inline Dataset two_way_data(std::size_t na, std::size_t nb, std::size_t rep, std::size_t d, std::uint64_t seed,
                            double offset = 0.0) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> z;
  const std::size_t n = na * nb * rep;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), g);
  Matrix ea(static_cast<Index>(na), static_cast<Index>(d)), eb(static_cast<Index>(nb), static_cast<Index>(d)),
      eg(static_cast<Index>(na * nb), static_cast<Index>(d));
  for (auto* m : {&ea, &eb, &eg})
    for (Index i = 0; i < m->rows(); ++i)
      for (Index k = 0; k < m->cols(); ++k) (*m)(i, k) = z(g);

  Dataset data;
  data.response_names = response_names(d);
  data.responses.resize(static_cast<Index>(n), static_cast<Index>(d));
  std::vector<std::size_t> ia(n), ib(n);
  for (std::size_t row = 0; row < n; ++row) {
    const std::size_t cell = order[row] / rep;
    ia[row] = cell / nb;
    ib[row] = cell % nb;
    for (Index k = 0; k < static_cast<Index>(d); ++k) {
      data.responses(static_cast<Index>(row), k) = offset + ea(static_cast<Index>(ia[row]), k) +
                                                   eb(static_cast<Index>(ib[row]), k) +
                                                   eg(static_cast<Index>(cell), k) + z(g);
    }
  }
  // Relabel so first appearance order matches level numbering.
  auto relabel = [](std::vector<std::size_t>& idx, std::size_t levels) {
    std::vector<std::size_t> map(levels, levels);
    std::size_t next = 0;
    for (auto& v : idx) {
      if (map[v] == levels) map[v] = next++;
      v = map[v];
    }
  };
  relabel(ia, na);
  relabel(ib, nb);
  data.factors["a"] = factor(na, "a", ia);
  data.factors["b"] = factor(nb, "b", ib);
  return data;
}

inline ModelConfig two_way_config(std::size_t d, bool with_interaction = true) {
  ModelConfig c;
  c.responses = response_names(d);
  c.batches = {intercept(), main_effect("alpha", "a"), main_effect("beta", "b")};
  if (with_interaction) c.batches.push_back(interaction("gamma", {"a", "b"}));
  return c;
}

/// Ensemble layout: 13 models × 3 scenarios × 9 decades, one observation per
/// cell, d = 2, with linear and quadratic decade trends.
inline Dataset ensemble_data(std::uint64_t seed, std::size_t n_model = 13, std::size_t n_scen = 3,
                             std::size_t n_time = 9) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> z;
  Dataset data;
  data.response_names = {"temperature", "precipitation"};
  const std::size_t n = n_model * n_scen * n_time;
  data.responses.resize(static_cast<Index>(n), 2);
  std::vector<std::size_t> im, is;
  std::vector<double> t, t2;
  Matrix slope_m(static_cast<Index>(n_model), 2), level_m(static_cast<Index>(n_model), 2);
  for (Index i = 0; i < slope_m.rows(); ++i)
    for (Index k = 0; k < 2; ++k) {
      slope_m(i, k) = 0.3 * z(g);
      level_m(i, k) = z(g);
    }
  std::size_t row = 0;
  for (std::size_t m = 0; m < n_model; ++m) {
    for (std::size_t s = 0; s < n_scen; ++s) {
      for (std::size_t tt = 1; tt <= n_time; ++tt) {
        const double x = static_cast<double>(tt);
        for (Index k = 0; k < 2; ++k) {
          data.responses(static_cast<Index>(row), k) = 10.0 + level_m(static_cast<Index>(m), k) +
                                                        0.5 * static_cast<double>(s) +
                                                        (0.2 + slope_m(static_cast<Index>(m), k)) * x +
                                                        0.01 * x * x + 0.3 * z(g);
        }
        im.push_back(m);
        is.push_back(s);
        t.push_back(x);
        t2.push_back(x * x);
        ++row;
      }
    }
  }
  data.factors["model"] = factor(n_model, "m", im);
  data.factors["scenario"] = factor(n_scen, "s", is);
  data.covariates["decade"] = t;
  data.covariates["decade_sq"] = t2;
  return data;
}

inline ModelConfig ensemble_config(std::size_t draws = 200, std::uint64_t seed = 1) {
  ModelConfig c;
  c.responses = {"temperature", "precipitation"};
  c.batches = {intercept("mu0"),
               main_effect("alpha0", "model"),
               main_effect("beta0", "scenario"),
               interaction("gamma", {"model", "scenario"}),
               slope("mu1", {}, "decade", CovariateTransform::center),
               slope("alpha1", {"model"}, "decade"),
               slope("beta1", {"scenario"}, "decade"),
               slope("mu2", {}, "decade_sq", CovariateTransform::orthogonalize)};
  c.draws = draws;
  c.seed = seed;
  return c;
}

}  // namespace fixtures
