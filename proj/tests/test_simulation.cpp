#include <catch2/catch_amalgamated.hpp>

#include "mmanova/simulation.hpp"
#include "support/oracles.hpp"

using namespace mmanova;
using Catch::Approx;

TEST_CASE("scenario sizes and truth", "[simulation]") {
  {
    const auto [sc, data] = generate_scenario(ScenarioCase::greater, 5, 3, 1);
    CHECK(data.size() == 15);
    CHECK(data.dim() == 3);
    CHECK(sc.alpha.rows() == 5);
  }
  const auto [sc, data] = generate_scenario(ScenarioCase::greater, 8, 5, 7);
  CHECK(data.size() == 40);
  CHECK(data.factors.at(kGroupFactor).levels() == 8);
  CHECK(criterion_value(sc.sigma_alpha, Criterion::determinant) == Approx(8.16).margin(1e-12));
  CHECK(criterion_value(sc.sigma_eps, Criterion::determinant) == Approx(0.9216).margin(1e-12));
  for (Index k = 0; k < 3; ++k) CHECK(sc.sigma_eps(k, k) == 1.0);
  CHECK(sc.mu.isZero());

  const auto again = generate_scenario(ScenarioCase::greater, 8, 5, 7);
  CHECK(again.second.responses == data.responses);
  CHECK(generate_scenario(ScenarioCase::greater, 8, 5, 8).second.responses != data.responses);

  const auto less = generate_scenario(ScenarioCase::less, 3, 3, 1).first;
  CHECK(less.sigma_alpha(0, 0) == Approx(0.16));
  const auto comparable = generate_scenario(ScenarioCase::comparable, 3, 3, 1).first;
  CHECK(comparable.sigma_alpha.matrix() == group_correlation().matrix());

  CHECK_THROWS_AS(generate_scenario(ScenarioCase::greater, 1, 5, 1), Error);
  CHECK_THROWS_AS(generate_scenario(ScenarioCase::greater, 5, 1, 1), Error);
  CHECK_THROWS_AS(scenario_case(4), Error);
}

TEST_CASE("scenario draws follow the stated covariances", "[simulation]") {
  const auto [sc, data] = generate_scenario(ScenarioCase::comparable, 4000, 2, 3);
  const Matrix a = sc.alpha.rowwise() - sc.alpha.colwise().mean();
  const Matrix cov = a.transpose() * a / static_cast<double>(a.rows() - 1);
  CHECK((cov - sc.sigma_alpha.matrix()).cwiseAbs().maxCoeff() < 0.1);
  // Within-group differences carry 2Σ_ε.
  Matrix diff(4000, 3);
  for (Index i = 0; i < 4000; ++i) diff.row(i) = data.responses.row(2 * i) - data.responses.row(2 * i + 1);
  const Matrix ecov = diff.transpose() * diff / 4000.0 / 2.0;
  CHECK((ecov - sc.sigma_eps.matrix()).cwiseAbs().maxCoeff() < 0.1);
}

TEST_CASE("coverage report structure", "[simulation]") {
  CoverageOptions opt;
  opt.kind = ScenarioCase::comparable;
  opt.n_alpha = {5, 10};
  opt.n_eps = 4;
  opt.replicates = 1;
  opt.draws = 200;
  const auto report = coverage_experiment(opt);
  CHECK(report.cells.size() == 18);
  CHECK(report.reference.size() == 6);
  for (const auto& c : report.cells) {
    CHECK((c.coverage == 0.0 || c.coverage == 1.0));
    CHECK(c.mean_width > 0.0);
    CHECK(c.replicates == 1);
  }
  CHECK_NOTHROW(report.cell(10, ParameterKind::finite, Criterion::total_variance));
  CHECK_THROWS_AS(report.cell(7, ParameterKind::finite, Criterion::total_variance), Error);

  opt.replicates = 0;
  CHECK_THROWS_AS(coverage_experiment(opt), Error);
}

TEST_CASE("coverage is reproducible and thread independent", "[simulation]") {
  CoverageOptions opt;
  opt.n_alpha = {6};
  opt.n_eps = 5;
  opt.replicates = 8;
  opt.draws = 200;
  opt.seed = 4;
  const auto a = coverage_experiment(opt);
  opt.threads = 3;
  const auto b = coverage_experiment(opt);
  REQUIRE(a.cells.size() == b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    CHECK(a.cells[i].coverage == b.cells[i].coverage);
    CHECK(a.cells[i].mean_width == b.cells[i].mean_width);
  }
}

TEST_CASE("finite-population truth uses the realized levels", "[simulation]") {
  const auto [sc, data] = generate_scenario(ScenarioCase::greater, 6, 3, 11);
  const ModelSpec m = build_model(one_way_config(10, 1), data);
  const auto& geom = m.batches[*m.find("alpha")].geometry;
  const Matrix centred = sc.alpha.rowwise() - sc.alpha.colwise().mean();
  const Matrix expected = centred.transpose() * centred / 5.0;
  CHECK((finite_pop_cov(sc.alpha, geom).matrix() - expected).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((expected - sc.sigma_alpha.matrix()).cwiseAbs().maxCoeff() > 1e-6);
}
