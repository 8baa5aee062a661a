#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <set>
#include <vector>

#include "sfda/errors.hpp"
#include "sfda/inference.hpp"
#include "sfda/numeric.hpp"

using namespace sfda;

namespace {

// Small two-group fixture: n subjects per group, three observations each,
// smooth trajectories plus noise, optionally shifted in group 2.
GroupSample make_group(int group, int n_subjects, std::uint64_t seed,
                       double shift = 0.0) {
  RngStream stream = RngStream::substream(seed, StreamTag::General,
                                          static_cast<std::uint64_t>(group));
  std::vector<Observation> rows;
  for (int i = 0; i < n_subjects; ++i) {
    const double level = 0.4 * stream.normal();
    for (int j = 0; j < 3; ++j) {
      const double t = stream.uniform();
      const double y = shift + level + std::sin(3.0 * t) + 0.2 * stream.normal();
      rows.push_back({group, "s" + std::to_string(i), t, y});
    }
  }
  return GroupSample::from_observations(rows);
}

bool reports_identical(const TestReport& a, const TestReport& b) {
  return a.grid.points == b.grid.points && a.diff_estimate == b.diff_estimate &&
         a.band_lower == b.band_lower && a.band_upper == b.band_upper &&
         a.kappa_sq == b.kappa_sq && a.critical_value == b.critical_value &&
         a.p_value == b.p_value && a.reject == b.reject &&
         a.lambda1 == b.lambda1 && a.lambda2 == b.lambda2;
}

} // namespace

TEST_SUITE_BEGIN("inference");

TEST_CASE("multiplier weights have two-point support and unit moments") {
  RngStream stream(1);
  const double low = 1.0 - std::pow(2.0, -0.5);
  const double high = 1.0 + std::pow(2.0, 0.5);

  const Eigen::VectorXd small = draw_multiplier_weights(1000, stream);
  std::set<double> support(small.data(), small.data() + small.size());
  REQUIRE(support.size() == 2);
  CHECK(*support.begin() == doctest::Approx(low).epsilon(1e-12));
  CHECK(*support.rbegin() == doctest::Approx(high).epsilon(1e-12));
  CHECK((small.array() > 0.0).all());

  const int n = 1000000;
  const Eigen::VectorXd draws = draw_multiplier_weights(n, stream);
  const double mean = draws.mean();
  const double var = (draws.array() - mean).square().sum() / (n - 1);
  CHECK(mean == doctest::Approx(1.0).epsilon(0.005));
  CHECK(var == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("literal-weight variant reproduces the printed support") {
  RngStream stream(2);
  const Eigen::VectorXd draws = draw_multiplier_weights(2000, stream, true);
  std::set<double> support(draws.data(), draws.data() + draws.size());
  REQUIRE(support.size() == 2);
  CHECK(*support.begin() == doctest::Approx(1.0 + std::pow(2.0, -0.5)).epsilon(1e-12));
  CHECK(*support.rbegin() == doctest::Approx(1.0 + std::pow(2.0, 0.5)).epsilon(1e-12));
  // The printed distribution does not center at one.
  CHECK(draws.mean() > 1.8);
}

TEST_CASE("normal quantile reference values") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-6));
  CHECK(normal_quantile(0.84) == doctest::Approx(0.994458).epsilon(1e-6));
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(normal_quantile(0.025) == doctest::Approx(-1.959964).epsilon(1e-6));
  CHECK_THROWS_AS(normal_quantile(0.0), ValidationError);
  CHECK_THROWS_AS(normal_quantile(1.0), ValidationError);
}

TEST_CASE("pointwise band quantile arithmetic") {
  Eigen::VectorXd diff(1), sigma(1), lower, upper;
  diff << 0.3;
  sigma << 0.1;
  pointwise_band(diff, sigma, 0.05, lower, upper);
  CHECK(lower[0] == doctest::Approx(0.10400).epsilon(1e-3));
  CHECK(upper[0] == doctest::Approx(0.49600).epsilon(1e-3));

  diff << 0.0;
  sigma << 1.0;
  pointwise_band(diff, sigma, 0.32, lower, upper);
  CHECK(lower[0] == doctest::Approx(-0.9945).epsilon(1e-3));
  CHECK(upper[0] == doctest::Approx(0.9945).epsilon(1e-3));

  CHECK_THROWS_AS(pointwise_band(diff, sigma, 0.0, lower, upper), ValidationError);
  CHECK_THROWS_AS(pointwise_band(diff, sigma, 1.0, lower, upper), ValidationError);
}

TEST_CASE("band symmetry and monotone width") {
  RngStream stream(3);
  Eigen::VectorXd diff(25), sigma(25);
  for (int i = 0; i < 25; ++i) {
    diff[i] = stream.normal();
    sigma[i] = 0.1 + stream.uniform();
  }
  Eigen::VectorXd lo01, hi01, lo05, hi05, lo10, hi10;
  pointwise_band(diff, sigma, 0.01, lo01, hi01);
  pointwise_band(diff, sigma, 0.05, lo05, hi05);
  pointwise_band(diff, sigma, 0.10, lo10, hi10);
  for (int i = 0; i < 25; ++i) {
    CHECK(hi05[i] - diff[i] == diff[i] - lo05[i]);
    CHECK(hi01[i] - lo01[i] > hi05[i] - lo05[i]);
    CHECK(hi05[i] - lo05[i] > hi10[i] - lo10[i]);
  }
}

TEST_CASE("order-statistic critical value and bootstrap p-value") {
  Eigen::VectorXd kappa_b(4);
  kappa_b << 1.0, 2.0, 3.0, 4.0;
  CHECK(bootstrap_critical_value(kappa_b, 0.25) == 3.0);
  CHECK(bootstrap_p_value(kappa_b, 3.5) == doctest::Approx(0.4).epsilon(1e-15));

  Eigen::VectorXd big(300);
  for (int i = 0; i < 300; ++i) big[i] = i + 1.0;
  // ceil(0.95 * 300) must be 285 despite floating rounding of the product.
  CHECK(bootstrap_critical_value(big, 0.05) == 285.0);
}

TEST_CASE("global test degenerate and constant fixtures") {
  const EvalGrid grid = make_grid(21);
  BootstrapEnsemble ensemble;
  ensemble.B = 24;
  ensemble.delta_curves = Eigen::MatrixXd::Zero(24, 21);
  ensemble.sigma_hat = Eigen::VectorXd::Constant(21, 0.5);
  ensemble.kappa_b = Eigen::VectorXd::LinSpaced(24, 0.1, 2.4);

  TestReport report;
  SUBCASE("zero difference never rejects") {
    global_test(Eigen::VectorXd::Zero(21), ensemble, grid, 0.05, report);
    CHECK(report.kappa_sq == 0.0);
    CHECK_FALSE(report.reject);
    CHECK(report.p_value > 0.0);
  }
  SUBCASE("constant ratio integrates exactly") {
    const Eigen::VectorXd diff = Eigen::VectorXd::Constant(21, 0.35);
    global_test(diff, ensemble, grid, 0.05, report);
    CHECK(report.kappa_sq == doctest::Approx(0.49).epsilon(1e-12));
  }
  SUBCASE("too few replicates") {
    ensemble.B = 19;
    CHECK_THROWS_AS(
        global_test(Eigen::VectorXd::Zero(21), ensemble, grid, 0.05, report),
        ValidationError);
  }
}

TEST_CASE("weighted difference curve fixtures") {
  const GroupSample sample1 = make_group(1, 5, 11);
  const GroupSample sample2 = make_group(2, 5, 11);
  const EvalGrid grid = make_grid(31);
  const SplineOrder order(2);
  const double lambda1 = 0.01, lambda2 = 0.02;

  const SplineFit fit1 = fit_penalized(sample1, lambda1, order);
  const SplineFit fit2 = fit_penalized(sample2, lambda2, order);
  const Eigen::VectorXd base_diff =
      evaluate_on_grid(fit1, grid.points) - evaluate_on_grid(fit2, grid.points);

  SUBCASE("unit weights reproduce the base fit") {
    const Eigen::VectorXd ones1 = Eigen::VectorXd::Ones(sample1.subjects());
    const Eigen::VectorXd ones2 = Eigen::VectorXd::Ones(sample2.subjects());
    const Eigen::VectorXd delta = weighted_diff_curve(
        sample1, sample2, lambda1, lambda2, order, grid, base_diff, ones1, ones2);
    CHECK(delta.cwiseAbs().maxCoeff() < 1e-10);
  }

  SUBCASE("uniform weights equal the lambda-rescaled fit difference") {
    const double u = 2.5;
    const Eigen::VectorXd w1 = Eigen::VectorXd::Constant(sample1.subjects(), u);
    const Eigen::VectorXd w2 = Eigen::VectorXd::Constant(sample2.subjects(), u);
    const Eigen::VectorXd delta = weighted_diff_curve(
        sample1, sample2, lambda1, lambda2, order, grid, base_diff, w1, w2);
    const SplineFit rescaled1 = fit_penalized(sample1, lambda1 / u, order);
    const SplineFit rescaled2 = fit_penalized(sample2, lambda2 / u, order);
    const Eigen::VectorXd expected = evaluate_on_grid(rescaled1, grid.points) -
                                     evaluate_on_grid(rescaled2, grid.points) -
                                     base_diff;
    CHECK((delta - expected).cwiseAbs().maxCoeff() < 1e-8);
  }

  SUBCASE("replicates are deterministic in the substream key") {
    auto run_replicate = [&](int b) {
      RngStream s1 = RngStream::substream(42, StreamTag::BootstrapWeights,
                                          static_cast<std::uint64_t>(b), 1);
      RngStream s2 = RngStream::substream(42, StreamTag::BootstrapWeights,
                                          static_cast<std::uint64_t>(b), 2);
      return bootstrap_replicate(sample1, sample2, lambda1, lambda2, order, grid,
                                 base_diff, s1, s2);
    };
    const Eigen::VectorXd first = run_replicate(0);
    const Eigen::VectorXd again = run_replicate(0);
    CHECK(first == again);
    const Eigen::VectorXd other = run_replicate(1);
    CHECK(first != other);
  }
}

TEST_CASE("two_sample_test rejects invalid configurations") {
  const GroupSample sample1 = make_group(1, 5, 21);
  const GroupSample sample2 = make_group(2, 5, 21);
  TestConfig config;
  config.B = 40;
  config.seed = 5;
  SUBCASE("alpha") {
    config.alpha = 0.0;
    CHECK_THROWS_AS(two_sample_test(sample1, sample2, config), ValidationError);
  }
  SUBCASE("replicates") {
    config.B = 19;
    CHECK_THROWS_AS(two_sample_test(sample1, sample2, config), ValidationError);
  }
  SUBCASE("grid") {
    config.grid_size = 10;
    CHECK_THROWS_AS(two_sample_test(sample1, sample2, config), ValidationError);
  }
}

TEST_CASE("identical samples give a null report") {
  const GroupSample sample = make_group(1, 8, 33);
  TestConfig config;
  config.B = 60;
  config.seed = 9;
  const TestReport report = two_sample_test(sample, sample, config);
  CHECK(report.diff_estimate.cwiseAbs().maxCoeff() == 0.0);
  CHECK(report.kappa_sq == 0.0);
  CHECK_FALSE(report.reject);
  CHECK(report.p_value > 0.5);
  CHECK(report.lambda1 == report.lambda2);
}

TEST_CASE("degenerate all-zero data stays finite and accepts") {
  std::vector<Observation> rows1, rows2;
  RngStream stream(4);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 3; ++j) {
      rows1.push_back({1, "a" + std::to_string(i), stream.uniform(), 0.0});
      rows2.push_back({2, "b" + std::to_string(i), stream.uniform(), 0.0});
    }
  }
  TestConfig config;
  config.B = 25;
  const TestReport report =
      two_sample_test(GroupSample::from_observations(rows1),
                      GroupSample::from_observations(rows2), config);
  CHECK(report.kappa_sq == 0.0);
  CHECK_FALSE(report.reject);
  CHECK((report.band_upper - report.band_lower).cwiseAbs().maxCoeff() < 1e-300);
}

TEST_CASE("report invariants on a generic run") {
  const GroupSample sample1 = make_group(1, 10, 55);
  const GroupSample sample2 = make_group(2, 10, 55, 0.8);
  TestConfig config;
  config.B = 80;
  config.grid_size = 41;
  config.seed = 17;
  BootstrapEnsemble ensemble;
  const TestReport report = two_sample_test(sample1, sample2, config, ensemble);

  CHECK((report.band_lower.array() <= report.diff_estimate.array()).all());
  CHECK((report.diff_estimate.array() <= report.band_upper.array()).all());
  CHECK((ensemble.kappa_b.array() >= 0.0).all());
  CHECK(report.kappa_sq >= 0.0);
  CHECK(report.p_value > 0.0);
  CHECK(report.p_value <= 1.0);
  CHECK(report.reject == (std::sqrt(report.kappa_sq) > report.critical_value));
  if (report.reject) {
    CHECK(report.p_value <= report.alpha + 1.0 / (config.B + 1.0));
  }
  CHECK((ensemble.sigma_hat.array() > 0.0).all());

  // The ensemble rows reproduce the public replicate path.
  const Eigen::VectorXd base_diff = report.diff_estimate;
  for (int b : {0, 7, 79}) {
    RngStream s1 = RngStream::substream(config.seed, StreamTag::BootstrapWeights,
                                        static_cast<std::uint64_t>(b), 1);
    RngStream s2 = RngStream::substream(config.seed, StreamTag::BootstrapWeights,
                                        static_cast<std::uint64_t>(b), 2);
    const Eigen::VectorXd replicate =
        bootstrap_replicate(sample1, sample2, report.lambda1, report.lambda2,
                            config.order, report.grid, base_diff, s1, s2);
    CHECK((replicate - ensemble.delta_curves.row(b).transpose())
              .cwiseAbs()
              .maxCoeff() < 1e-10);
  }
}

TEST_CASE("fixed seeds reproduce reports across thread counts") {
  const GroupSample sample1 = make_group(1, 8, 70);
  const GroupSample sample2 = make_group(2, 8, 70, 0.3);
  TestConfig config;
  config.B = 50;
  config.seed = 1234;

  const TestReport base = two_sample_test(sample1, sample2, config);
  const TestReport repeat = two_sample_test(sample1, sample2, config);
  CHECK(reports_identical(base, repeat));

  setenv("SFDA_THREADS", "1", 1);
  const TestReport serial = two_sample_test(sample1, sample2, config);
  setenv("SFDA_THREADS", "3", 1);
  const TestReport threaded = two_sample_test(sample1, sample2, config);
  unsetenv("SFDA_THREADS");
  CHECK(reports_identical(base, serial));
  CHECK(reports_identical(base, threaded));

  config.seed = 4321;
  const TestReport other_seed = two_sample_test(sample1, sample2, config);
  CHECK_FALSE(reports_identical(base, other_seed));
}

TEST_SUITE_END();
