#include <catch2/catch_amalgamated.hpp>

#include <boost/math/distributions/chi_squared.hpp>

#include "mmanova/criteria.hpp"
#include "mmanova/simulation.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace mmanova;
using Catch::Approx;

TEST_CASE("criterion values on known matrices", "[criteria]") {
  const SymMatrix id = SymMatrix::identity(3);
  CHECK(criterion_value(id, Criterion::determinant) == Approx(1.0));
  CHECK(criterion_value(id, Criterion::total_variance) == Approx(3.0));
  CHECK(criterion_value(id, Criterion::total_marginal_variance) == Approx(3.0));

  const SymMatrix ar = ar1_correlation(3, 0.2);
  CHECK(oracle::cofactor_det(ar.matrix()) == Approx(0.9216).margin(1e-12));
  CHECK(criterion_value(ar, Criterion::determinant) == Approx(0.9216).margin(1e-12));
  CHECK(criterion_value(ar, Criterion::total_variance) == Approx(3.88).margin(1e-12));
  CHECK(criterion_value(ar, Criterion::total_marginal_variance) == Approx(3.0).margin(1e-12));

  const Vector s = default_scales(ScenarioCase::greater);
  const Matrix sigma_alpha = s.asDiagonal() * group_correlation().matrix() * s.asDiagonal();
  const double det_r = oracle::cofactor_det(group_correlation().matrix());
  CHECK(oracle::cofactor_det(sigma_alpha) == Approx(12.0 * det_r));
  CHECK(criterion_value(SymMatrix(sigma_alpha), Criterion::determinant) == Approx(8.16).margin(1e-12));

  Matrix singular(2, 2);
  singular << 1.0, 1.0, 1.0, 1.0;
  CHECK(criterion_value(SymMatrix(singular), Criterion::determinant) == 0.0);
}

TEST_CASE("criterion properties on random matrices", "[criteria]") {
  std::mt19937_64 g(101);
  for (int rep = 0; rep < 200; ++rep) {
    const Index d = 1 + rep % 6;
    const SymMatrix a(oracle::random_spd(d, g));
    const double det = criterion_value(a, Criterion::determinant);
    CHECK(det == Approx(pseudo_det(a)).epsilon(1e-10));
    for (double c : {0.5, 2.0}) {
      const SymMatrix ca = c * a;
      CHECK(criterion_value(ca, Criterion::determinant) == Approx(std::pow(c, static_cast<double>(d)) * det).epsilon(1e-10));
      CHECK(criterion_value(ca, Criterion::total_variance) ==
            Approx(c * criterion_value(a, Criterion::total_variance)).epsilon(1e-12).margin(1e-12));
      CHECK(criterion_value(ca, Criterion::total_marginal_variance) ==
            Approx(c * criterion_value(a, Criterion::total_marginal_variance)).epsilon(1e-12));
    }
    for (auto c : kAllCriteria) CHECK(criterion_value(a, c) >= 0.0);
  }
}

TEST_CASE("type-7 interval summaries", "[criteria]") {
  const std::vector<double> probs{0.025, 0.25, 0.5, 0.75, 0.975};
  for (double v : summarize_intervals(std::vector<double>(50, 2.5), probs)) CHECK(v == 2.5);
  std::vector<double> seq;
  for (int i = 100; i >= 1; --i) seq.push_back(i);
  CHECK(summarize_intervals(seq, {0.5})[0] == 50.5);
  CHECK(summarize_intervals(seq, {0.0, 1.0}) == std::vector<double>{1.0, 100.0});

  std::mt19937_64 g(7);
  std::uniform_real_distribution<double> u;
  std::vector<double> x(100000);
  for (auto& v : x) v = u(g);
  const auto q = summarize_intervals(x, probs);
  for (std::size_t i = 0; i < probs.size(); ++i) CHECK(std::abs(q[i] - probs[i]) < 0.01);
  for (std::size_t i = 1; i < q.size(); ++i) CHECK(q[i] >= q[i - 1]);

  try {
    summarize_intervals({}, probs);
    FAIL("expected Empty");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::empty);
  }
}

TEST_CASE("exceedance probabilities", "[criteria]") {
  const std::vector<double> a{1, 2, 3, 4};
  CHECK(exceedance_prob(a, a) == 0.0);
  std::vector<double> b = a;
  for (auto& v : b) v += 1.0;
  CHECK(exceedance_prob(b, a) == 1.0);

  std::mt19937_64 g(11);
  std::uniform_real_distribution<double> u;
  const std::size_t R = 20000;
  std::vector<double> x(R), y(R);
  for (std::size_t i = 0; i < R; ++i) {
    x[i] = u(g);
    y[i] = u(g);
  }
  const double p = exceedance_prob(x, y);
  CHECK(std::abs(p - 0.5) <= 3.0 / (2.0 * std::sqrt(static_cast<double>(R))));
  CHECK(p + exceedance_prob(y, x) == Approx(1.0));
  std::vector<double> tied = x;
  tied[0] = y[0];
  CHECK(exceedance_prob(tied, y) + exceedance_prob(y, tied) <= 1.0);

  try {
    exceedance_prob(a, {1.0});
    FAIL("expected LengthMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::length_mismatch);
  }
}

TEST_CASE("posterior summaries cover every reported parameter", "[criteria]") {
  const Dataset data = fixtures::two_way_data(4, 3, 2, 2, 5);
  const ModelSpec m = build_model(fixtures::two_way_config(2), data);
  SamplerConfig sc;
  sc.draws = 100;
  const auto post = run_posterior(m, data, sc);
  const auto series = parameter_series(post);
  // mu has no covariance or finite variance; alpha, beta, gamma have both.
  REQUIRE(series.size() == 7);
  CHECK(series.back().batch == "error");
  const auto summary = summarize_posterior(post, {0.025, 0.5, 0.975});
  CHECK(summary.size() == 21);
  for (const auto& s : summary) {
    CHECK(s.values.size() == 3);
    CHECK(s.values[0] <= s.values[1]);
    CHECK(s.values[1] <= s.values[2]);
    CHECK(s.at(0.5) == s.values[1]);
  }
  const auto tables = exceedance_tables(post);
  REQUIRE(tables.size() == 3);
  for (const auto& t : tables) {
    for (std::size_t i = 0; i < t.labels.size(); ++i) {
      CHECK(t.prob[i][i] == 0.0);
      for (std::size_t j = 0; j < t.labels.size(); ++j) CHECK(t.prob[i][j] + t.prob[j][i] <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("frequentist reference intervals", "[criteria]") {
  SECTION("d = 1 determinant equals the chi-square variance interval") {
    const SymMatrix u = SymMatrix::diagonal(Vector::Constant(1, 17.0));
    boost::math::chi_squared chi(9.0);
    const auto [lo, hi] = freq_reference_interval(u, 10, Criterion::determinant, 0.95);
    CHECK(lo == Approx(17.0 / boost::math::quantile(chi, 0.975)).epsilon(1e-14));
    CHECK(hi == Approx(17.0 / boost::math::quantile(chi, 0.025)).epsilon(1e-14));
  }
  SECTION("total variance inverts the scalar chi-square pivot") {
    const SymMatrix u(ar1_correlation(3, 0.4).matrix() * 20.0);
    boost::math::chi_squared chi(19.0);
    const auto [lo, hi] = freq_reference_interval(u, 20, Criterion::total_variance, 0.9);
    CHECK(lo == Approx(u.sum() / boost::math::quantile(chi, 0.95)));
    CHECK(hi == Approx(u.sum() / boost::math::quantile(chi, 0.05)));
  }
  SECTION("insufficient sample size") {
    try {
      freq_reference_interval(SymMatrix::identity(3), 3, Criterion::determinant);
      FAIL("expected InsufficientN");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::insufficient_n);
    }
  }
  SECTION("pivot draws are cached and deterministic") {
    const auto& a = log_det_pivot_draws(30, 3);
    const auto& b = log_det_pivot_draws(30, 3);
    CHECK(&a == &b);
    CHECK(a.size() == kPivotDraws);
    CHECK(std::is_sorted(a.begin(), a.end()));
  }
  SECTION("coverage of the determinant and total-variance intervals") {
    const Index d = 3;
    const std::size_t n = 30;
    const Matrix sigma = Vector{{1.0, 2.0, 0.5}}.asDiagonal() * ar1_correlation(3, 0.5).matrix() *
                         Vector{{1.0, 2.0, 0.5}}.asDiagonal();
    const Matrix l = sigma.llt().matrixL();
    const double true_det = oracle::cofactor_det(sigma), true_total = sigma.sum();
    std::mt19937_64 g(2024);
    std::normal_distribution<double> z;
    int det_hits = 0, total_hits = 0;
    const int datasets = 2000;
    for (int k = 0; k < datasets; ++k) {
      Matrix x(static_cast<Index>(n), d);
      for (Index i = 0; i < x.rows(); ++i)
        for (Index j = 0; j < d; ++j) x(i, j) = z(g);
      x = x * l.transpose();
      const Matrix centred = x.rowwise() - x.colwise().mean();
      const SymMatrix u = SymMatrix::gram(centred);
      const auto dl = freq_reference_interval(u, n, Criterion::determinant);
      const auto tl = freq_reference_interval(u, n, Criterion::total_variance);
      det_hits += dl.first <= true_det && true_det <= dl.second;
      total_hits += tl.first <= true_total && true_total <= tl.second;
    }
    CHECK(std::abs(det_hits / static_cast<double>(datasets) - 0.95) <= 0.015);
    CHECK(std::abs(total_hits / static_cast<double>(datasets) - 0.95) <= 0.015);
  }
}
