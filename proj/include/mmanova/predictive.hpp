#pragma once

// Posterior predictive draws at design points and linear contrasts of them,
// with each batch contributing either an observed level, a novel level drawn
// from its superpopulation, or its posterior mean.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "mmanova/posterior.hpp"

namespace mmanova {

struct ObservedLevel {
  std::size_t index = 0;  // 0-based level within the batch
};
struct NovelLevel {};
struct PosteriorMeanLevel {
  std::size_t index = 0;
};
using LevelChoice = std::variant<ObservedLevel, NovelLevel, PosteriorMeanLevel>;

/// How fully flat batches (grand mean, global slopes) enter when the
/// scenario does not name them.
enum class GlobalMeanHandling { point_estimate, full_draws };

struct PredictiveScenario {
  /// Choices for named batches. Unnamed batches with a covariance get a
  /// novel level; unnamed fully flat batches follow `global_mean`.
  std::map<std::string, LevelChoice> levels;
  GlobalMeanHandling global_mean = GlobalMeanHandling::point_estimate;
  bool include_error = true;
};

/// Raw covariate values identifying one design point.
using DesignPoint = std::map<std::string, double>;

struct ContrastSpec {
  std::vector<std::pair<DesignPoint, double>> points;  // (design point, weight)
  std::map<std::string, bool> include;                 // per batch, default true
};

inline constexpr std::uint64_t kPredictiveStream = 0x7072'6564'6963'7476ULL;

namespace detail {

/// Transformed covariate value of a batch at a design point. Uses an
/// observation whose raw covariates all match the point; off the observed grid
/// only untransformed or centred covariates can be evaluated.
inline double covariate_at(const ModelSpec& model, const BatchSpec& b, const DesignPoint& point) {
  if (!b.covariate) return 1.0;
  const auto& name = *b.covariate;
  auto it = point.find(name);
  if (it == point.end()) throw Error(Errc::invalid_argument, "design point lacks covariate '" + name + "'");
  const auto& col = model.covariates.at(name);
  for (std::size_t i = 0; i < model.n; ++i) {
    bool match = true;
    for (const auto& [cov, value] : point) {
      auto c = model.covariates.find(cov);
      if (c == model.covariates.end()) continue;
      if (std::abs(c->second.raw[i] - value) > 1e-9 * std::max(1.0, std::abs(value))) {
        match = false;
        break;
      }
    }
    if (match) return col.transformed[i];
  }
  // Off the grid the transform must be a constant shift (identity or centring).
  const double shift = col.raw[0] - col.transformed[0];
  for (std::size_t i = 1; i < model.n; ++i) {
    if (std::abs((col.raw[i] - col.transformed[i]) - shift) > 1e-9 * std::max(1.0, std::abs(shift))) {
      throw Error(Errc::invalid_argument, "design point is not on the observed grid of covariate '" + name + "'");
    }
  }
  return it->second - shift;
}

}  // namespace detail

/// R×d draws of Σ_t w_t Ỹ_t. Batch b contributes (Σ_t w_t x_b(t))·level; the
/// error adds N(0, Σ_t w_t² Σ_ε) when included.
inline Matrix predictive_contrast(const ModelSpec& model, const PosteriorDraws& post, const PredictiveScenario& scenario,
                                  const ContrastSpec& contrast, std::uint64_t seed, std::size_t threads = 1) {
  const std::size_t R = post.draws;
  const Index d = static_cast<Index>(model.d);
  if (post.batches.size() != model.batches.size()) {
    throw Error(Errc::invalid_argument, "posterior draws do not belong to this model");
  }
  for (const auto& [name, choice] : scenario.levels) {
    if (!model.find(name)) throw Error(Errc::invalid_argument, "scenario names unknown batch '" + name + "'");
  }
  for (const auto& [name, flag] : contrast.include) {
    if (!model.find(name)) throw Error(Errc::invalid_argument, "contrast names unknown batch '" + name + "'");
  }

  enum class Mode { skip, observed, novel, mean };
  struct Plan {
    Mode mode = Mode::skip;
    std::size_t index = 0;
    double weight = 0.0;
    Vector mean_level;
  };
  std::vector<Plan> plans(model.batches.size());
  double error_weight_sq = 0.0;
  for (const auto& [point, w] : contrast.points) {
    if (!std::isfinite(w)) throw Error(Errc::invalid_argument, "contrast weights must be finite");
    error_weight_sq += w * w;
  }

  for (std::size_t b = 0; b < model.batches.size(); ++b) {
    const auto& spec = model.batches[b];
    auto& plan = plans[b];
    auto inc = contrast.include.find(spec.name);
    if (inc != contrast.include.end() && !inc->second) continue;
    for (const auto& [point, w] : contrast.points) plan.weight += w * detail::covariate_at(model, spec, point);

    auto check_index = [&](std::size_t index) {
      if (index >= spec.levels) {
        throw Error(Errc::invalid_argument, "batch '" + spec.name + "' has no level " + std::to_string(index + 1));
      }
      return index;
    };
    auto choice = scenario.levels.find(spec.name);
    if (choice == scenario.levels.end()) {
      if (spec.fully_flat()) {
        plan.mode = scenario.global_mean == GlobalMeanHandling::point_estimate ? Mode::mean : Mode::observed;
      } else {
        plan.mode = Mode::novel;
      }
    } else if (auto* o = std::get_if<ObservedLevel>(&choice->second)) {
      plan.mode = Mode::observed;
      plan.index = check_index(o->index);
    } else if (auto* m = std::get_if<PosteriorMeanLevel>(&choice->second)) {
      plan.mode = Mode::mean;
      plan.index = check_index(m->index);
    } else {
      plan.mode = Mode::novel;
    }
    if (plan.mode == Mode::novel && !post.batches[b].has_covariance) {
      throw Error(Errc::missing_covariance,
                  "batch '" + spec.name + "' has no sampled covariance, so a novel level cannot be drawn");
    }
    if (plan.mode == Mode::mean) plan.mean_level = post.mean_levels(b).row(static_cast<Index>(plan.index)).transpose();
  }

  Matrix out = Matrix::Zero(static_cast<Index>(R), d);
  parallel_for(R, threads, [&](std::size_t r) {
    RngStream rng(seed, stream_key(r, kPredictiveStream));
    Vector y = Vector::Zero(d);
    for (std::size_t b = 0; b < model.batches.size(); ++b) {
      const auto& plan = plans[b];
      const auto& bd = post.batches[b];
      switch (plan.mode) {
        case Mode::skip: break;
        case Mode::observed: y += plan.weight * bd.levels[r].row(static_cast<Index>(plan.index)).transpose(); break;
        case Mode::mean: y += plan.weight * plan.mean_level; break;
        case Mode::novel: {
          const Vector level = sample_mvn_psd(model.batches[b].prior_beta0, bd.sigma[r], rng);
          y += plan.weight * level;
          break;
        }
      }
    }
    if (scenario.include_error && error_weight_sq > 0.0) {
      y += sample_mvn(Vector::Zero(d), error_weight_sq * post.error[r], rng);
    }
    out.row(static_cast<Index>(r)) = y.transpose();
  });
  return out;
}

/// Predictive draws of a single observation at `point`.
inline Matrix predictive_draws(const ModelSpec& model, const PosteriorDraws& post, const PredictiveScenario& scenario,
                               const DesignPoint& point, std::uint64_t seed, std::size_t threads = 1) {
  ContrastSpec single;
  single.points.emplace_back(point, 1.0);
  return predictive_contrast(model, post, scenario, single, seed, threads);
}

}  // namespace mmanova
