#include <catch2/catch_amalgamated.hpp>

#include <boost/math/distributions/students_t.hpp>

#include "mmanova/predictive.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace mmanova;
using Catch::Approx;

namespace {

Matrix sample_cov(const Matrix& x) {
  const Matrix c = x.rowwise() - x.colwise().mean();
  return c.transpose() * c / static_cast<double>(x.rows() - 1);
}

struct TwoWay {
  Dataset data = fixtures::two_way_data(6, 4, 2, 2, 77);
  ModelSpec model = build_model(fixtures::two_way_config(2), data);
  PosteriorDraws post;
  TwoWay() {
    SamplerConfig sc;
    sc.draws = 4000;
    sc.seed = 8;
    post = run_posterior(model, data, sc);
  }
};

const TwoWay& two_way() {
  static const TwoWay fixture;
  return fixture;
}

}  // namespace

TEST_CASE("all-observed scenario reproduces the fitted-value posterior", "[predictive]") {
  const auto& f = two_way();
  PredictiveScenario s;
  s.levels = {{"alpha", ObservedLevel{2}}, {"beta", ObservedLevel{1}}, {"gamma", ObservedLevel{2 * 4 + 1}}};
  s.global_mean = GlobalMeanHandling::full_draws;
  s.include_error = false;
  const Matrix draws = predictive_draws(f.model, f.post, s, {}, 1);
  for (std::size_t r = 0; r < f.post.draws; ++r) {
    Vector expected = f.post.batches[0].levels[r].row(0).transpose() + f.post.batches[1].levels[r].row(2).transpose() +
                      f.post.batches[2].levels[r].row(1).transpose() + f.post.batches[3].levels[r].row(9).transpose();
    CHECK((draws.row(static_cast<Index>(r)).transpose() - expected).cwiseAbs().maxCoeff() <= 1e-12);
  }

  PredictiveScenario novel = s;
  novel.levels = {};
  const Matrix nd = predictive_draws(f.model, f.post, novel, {}, 1);
  const Matrix co = sample_cov(draws), cn = sample_cov(nd);
  for (Index k = 0; k < 2; ++k) CHECK(cn(k, k) > co(k, k));
  // Difference PSD within Monte Carlo error (relative to the novel spread).
  const double min_eig = sym_eigen(SymMatrix(Matrix(cn - co))).values.minCoeff();
  CHECK(min_eig >= -3.0 * cn.trace() * std::sqrt(2.0 / static_cast<double>(f.post.draws)));
}

TEST_CASE("novel levels never reduce predictive variance", "[predictive]") {
  const auto& f = two_way();
  const std::vector<std::string> names{"alpha", "beta", "gamma"};
  PredictiveScenario base;
  base.levels = {{"alpha", ObservedLevel{0}}, {"beta", ObservedLevel{0}}, {"gamma", ObservedLevel{0}}};
  const Matrix b = predictive_draws(f.model, f.post, base, {}, 3);
  const double R = static_cast<double>(f.post.draws);
  for (const auto& name : names) {
    PredictiveScenario s = base;
    s.levels[name] = NovelLevel{};
    const Matrix d = predictive_draws(f.model, f.post, s, {}, 3);
    for (Index k = 0; k < 2; ++k) {
      const double vb = sample_cov(b)(k, k), vd = sample_cov(d)(k, k);
      // Variance of a sample variance is about 2σ⁴/(R−1).
      CHECK(vd >= vb - 3.0 * std::sqrt(2.0 / (R - 1.0)) * (vb + vd));
    }
  }
}

TEST_CASE("point estimates give a deterministic plug-in", "[predictive]") {
  const auto& f = two_way();
  PredictiveScenario s;
  s.levels = {{"alpha", PosteriorMeanLevel{1}}, {"beta", PosteriorMeanLevel{3}}, {"gamma", PosteriorMeanLevel{7}}};
  s.include_error = false;
  const Matrix draws = predictive_draws(f.model, f.post, s, {}, 1);
  const Vector plug = f.post.mean_levels(0).row(0).transpose() + f.post.mean_levels(1).row(1).transpose() +
                      f.post.mean_levels(2).row(3).transpose() + f.post.mean_levels(3).row(7).transpose();
  for (Index r = 0; r < draws.rows(); ++r) CHECK((draws.row(r).transpose() - plug).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("intercept-only predictive matches the Student t oracle", "[predictive]") {
  Dataset data = fixtures::one_way_data(1, 25, 1, 91);
  data.factors.clear();
  data.responses *= 0.2;
  ModelConfig c;
  c.responses = {"y1"};
  c.batches = {fixtures::intercept()};
  const ModelSpec m = build_model(c, data);
  SamplerConfig sc;
  sc.draws = 40000;
  sc.seed = 12;
  const auto post = run_posterior(m, data, sc);
  PredictiveScenario s;
  s.global_mean = GlobalMeanHandling::full_draws;
  const Matrix draws = predictive_draws(m, post, s, {}, 4);
  std::vector<double> y(draws.data(), draws.data() + draws.rows());
  const double n = 25.0;
  const double ybar = data.responses.mean();
  const double dof = static_cast<double>(m.residual_count());
  const double sse = (data.responses.array() - ybar).square().sum();
  const double scale = std::sqrt(sse / dof * (1.0 + 1.0 / n));
  boost::math::students_t t(dof);
  for (double p : {0.025, 0.25, 0.5, 0.75, 0.975}) {
    CHECK(oracle::quantile(y, p) == Approx(ybar + scale * boost::math::quantile(t, p)).margin(0.01));
  }
}

TEST_CASE("decade contrasts", "[predictive]") {
  const Dataset data = fixtures::ensemble_data(5);
  const ModelSpec m = build_model(fixtures::ensemble_config(300), data);
  const auto post = run_posterior(m, data, sampler_config(fixtures::ensemble_config(300)));
  ContrastSpec diff;
  diff.points = {{{{"decade", 9.0}, {"decade_sq", 81.0}}, 1.0}, {{{"decade", 1.0}, {"decade_sq", 1.0}}, -1.0}};

  SECTION("slope weight is the covariate difference") {
    ContrastSpec only = diff;
    for (const auto& b : m.batches) only.include[b.name] = b.name == "mu1";
    PredictiveScenario s;
    s.global_mean = GlobalMeanHandling::full_draws;
    s.include_error = false;
    const Matrix draws = predictive_contrast(m, post, s, only, 2);
    const auto mu1 = *m.find("mu1");
    for (std::size_t r = 0; r < post.draws; ++r) {
      CHECK((draws.row(static_cast<Index>(r)) - 8.0 * post.batches[mu1].levels[r].row(0)).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
  SECTION("constant batches cancel under a difference") {
    ContrastSpec only = diff;
    for (const auto& b : m.batches) only.include[b.name] = !b.covariate.has_value();
    PredictiveScenario s;
    s.levels["alpha0"] = ObservedLevel{3};
    s.levels["beta0"] = NovelLevel{};
    s.include_error = false;
    const Matrix draws = predictive_contrast(m, post, s, only, 2);
    CHECK(draws.cwiseAbs().maxCoeff() <= 1e-12);
  }
  SECTION("zero weights give exact zeros") {
    ContrastSpec zero = diff;
    for (auto& [point, w] : zero.points) w = 0.0;
    PredictiveScenario s;
    s.levels["alpha0"] = ObservedLevel{0};
    s.levels["alpha1"] = ObservedLevel{0};
    const Matrix draws = predictive_contrast(m, post, s, zero, 2);
    CHECK(draws.cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("thread count does not change the draws") {
    PredictiveScenario s;
    CHECK(predictive_contrast(m, post, s, diff, 6, 1) == predictive_contrast(m, post, s, diff, 6, 3));
  }
}

TEST_CASE("predictive error conditions", "[predictive]") {
  const Dataset data = fixtures::one_way_data(2, 4, 3, 5);
  const ModelSpec m = build_model(fixtures::one_way_config(3), data);
  SamplerConfig sc;
  sc.draws = 10;
  const auto post = run_posterior(m, data, sc);
  REQUIRE_FALSE(post.batch("alpha").has_covariance);
  try {
    predictive_draws(m, post, PredictiveScenario{}, {}, 1);
    FAIL("expected MissingCovariance");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::missing_covariance);
  }
  PredictiveScenario observed;
  observed.levels["alpha"] = ObservedLevel{1};
  CHECK_NOTHROW(predictive_draws(m, post, observed, {}, 1));
  observed.levels["alpha"] = ObservedLevel{2};
  CHECK_THROWS_AS(predictive_draws(m, post, observed, {}, 1), Error);
  PredictiveScenario unknown;
  unknown.levels["nope"] = NovelLevel{};
  CHECK_THROWS_AS(predictive_draws(m, post, unknown, {}, 1), Error);
}
