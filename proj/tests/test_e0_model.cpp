#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "popproj/distributions.hpp"
#include "popproj/e0_model.hpp"
#include "popproj/inputs.hpp"
#include "test_util.hpp"

using namespace popproj;
using namespace popproj::e0;

namespace {

const DoubleLogisticParams kTheta{{10, 20, 5, 15}, 3.0, 0.6};

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("gain oracle grid") {
  const std::vector<std::pair<double, double>> expected{{30, 2.640929908687871},
                                                        {45, 1.3665024116776217},
                                                        {60, 0.6136173941970329},
                                                        {72.5, 0.6003327970085888},
                                                        {85, 0.6000073990550416}};
  for (const auto& [l, g] : expected) CHECK(std::abs(e0_gain(l, kTheta) - g) < 1e-12);
}

TEST_CASE("gain saturates at z and reduces to one logistic when k equals z") {
  CHECK(std::abs(e0_gain(400.0, kTheta) - kTheta.z) < 1e-6);
  auto flat = kTheta;
  flat.z = flat.k;
  for (double l = 20; l < 100; l += 7.5) {
    const double single = flat.k * logistic(4.4 * (l - 10 - 0.5 * 20) / 20);
    CHECK(e0_gain(l, flat) == doctest::Approx(single).epsilon(1e-14));
  }
}

TEST_CASE("error scale decreases smoothly and stays positive") {
  const ErrorScale w;
  CHECK(w.sd(50) > w.sd(80));
  for (double l = 15; l <= 110; l += 0.25) {
    CHECK(w.sd(l) > 0.0);
    CHECK(std::abs(w.sd(l + 1e-6) - w.sd(l)) < 1e-4);
  }
}

TEST_CASE("late gain above 1.15 is outside the prior") {
  E0World world;
  world.mean = {10, 20, 5, 15, 3, 0.6};
  world.sd = {2, 2, 2, 2, 1, 0.3};
  const E0Config cfg;
  auto theta = kTheta;
  theta.z = 1.2;
  CHECK(country_logprior(theta, world, cfg) == kNegInf);
}

TEST_CASE("one transition on the curve") {
  E0Series s;
  s.country_id = "a";
  s.period_start_years = {1990, 1995};
  s.female = {60.0, 60.0 + e0_gain(60.0, kTheta)};
  s.male = {56.0, 56.5};
  E0World world;
  world.mean = {12, 18, 6, 14, 2.5, 0.5};
  world.sd = {3, 3, 3, 3, 1, 0.2};
  const E0Config cfg;
  double oracle = -0.5 * std::log(2 * M_PI) - std::log(cfg.error.sd(60.0));
  const auto v = as_array(kTheta);
  for (std::size_t i = 0; i < kThetaSize; ++i) {
    oracle += truncated_normal_logpdf(v[i], world.mean[i], world.sd[i], cfg.bounds.lower[i],
                                      cfg.bounds.upper[i]);
    oracle += -std::log(cfg.bounds.upper[i] - cfg.bounds.lower[i]) -
              std::log(cfg.bounds.spread_upper[i]);
  }
  const std::vector<E0Series> data{s};
  const std::vector<DoubleLogisticParams> params{kTheta};
  CHECK(e0_hier_loglik(data, params, world, cfg) == doctest::Approx(oracle).epsilon(1e-12));

  // Changing the spread of z moves only the z prior term.
  auto wider = world;
  wider.sd[5] *= 2.0;
  const double delta = e0_hier_loglik(data, params, wider, cfg) -
                       e0_hier_loglik(data, params, world, cfg);
  const double z_delta =
      truncated_normal_logpdf(kTheta.z, world.mean[5], wider.sd[5], 0.0, kMaxLateGain) -
      truncated_normal_logpdf(kTheta.z, world.mean[5], world.sd[5], 0.0, kMaxLateGain);
  CHECK(delta == doctest::Approx(z_delta).epsilon(1e-10));
}

TEST_CASE("gap clamps at zero and at the cap") {
  const GapParams g;
  CHECK(clamp_gap(-1.0, g) == 0.0);
  CHECK(clamp_gap(20.0, g) == 18.0);
  CHECK(clamp_gap(5.5, g) == 5.5);
}

TEST_CASE("gap regime switches at M") {
  GapParams g;
  g.gamma1 = 0.95;
  g.beta = {0.5, -0.01, 0.9, 0.01, -0.02};
  CHECK(gap_mean(4.0, 90.0, 50.0, g) == doctest::Approx(3.8).epsilon(1e-15));
  const double below = 0.5 - 0.01 * 50 + 0.9 * 4 + 0.01 * 86.0 - 0.02 * 11.0;
  CHECK(gap_mean(4.0, 86.0, 50.0, g) == doctest::Approx(below).epsilon(1e-14));
}

TEST_CASE("gap MLE matches the frozen optimizer result") {
  const auto series = io::read_e0(testutil::fixtures() / "gap_e0.csv");
  const auto fit = fit_gap_mle(series);
  CHECK(fit.converged);
  CHECK(fit.transitions_below == 92);
  CHECK(fit.transitions_above == 16);
  CHECK(fit.params.scale2 == 0.0665);
  CHECK(fit.params.dof == 2.0);
  const std::array<double, 6> expected{0.7281328175499964,   -0.006684177060364731,
                                       0.8651028437007722,   0.005593745941083396,
                                       -0.024506170524450477, 0.9559593080826976};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(fit.params.beta[i] == doctest::Approx(expected[i]).epsilon(1e-6));
  }
  CHECK(fit.params.gamma1 == doctest::Approx(expected[5]).epsilon(1e-6));

  auto shuffled = series;
  std::mt19937_64 rng(4);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto again = fit_gap_mle(shuffled);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(std::abs(again.params.beta[i] - fit.params.beta[i]) < 1e-10);
  }
  CHECK(std::abs(again.params.gamma1 - fit.params.gamma1) < 1e-10);
}

TEST_CASE("gap MLE recovers a nearly noiseless generator") {
  GapParams truth;
  truth.beta = {0.8, -0.01, 0.9, 0.005, -0.02};
  truth.gamma1 = 0.95;
  std::vector<E0Series> data;
  for (int c = 0; c < 16; ++c) {
    E0Series s;
    s.country_id = "g" + std::to_string(c);
    const double initial = 40.0 + 3.0 * c;
    double level = initial;
    double gap = 2.0 + 0.4 * (c % 7);
    const double step = 1.2 + 0.15 * (c % 5);
    for (int t = 0; t < 12 && level <= 99.0; ++t) {
      s.period_start_years.push_back(1950 + 5 * t);
      s.female.push_back(level);
      s.male.push_back(level - gap);
      const double wiggle = 1e-4 * std::sin(1.7 * c + 2.3 * t);
      gap = gap_mean(gap, level, initial, truth) + wiggle;
      level += step;
    }
    data.push_back(s);
  }
  const auto fit = fit_gap_mle(data);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(std::abs(fit.params.beta[i] - truth.beta[i]) <= 0.01 * std::abs(truth.beta[i]));
  }
  CHECK(std::abs(fit.params.gamma1 - truth.gamma1) <= 0.01 * truth.gamma1);
}

TEST_CASE("gap MLE needs enough transitions") {
  E0Series s;
  s.country_id = "short";
  s.period_start_years = {1950, 1955, 1960};
  s.female = {50, 52, 54};
  s.male = {47, 49, 51};
  const std::vector<E0Series> data{s};
  CHECK_THROWS_AS(fit_gap_mle(data), InvalidInput);
}

TEST_CASE("noiseless saturated path gains z per period") {
  GapParams gap;
  gap.beta = {0, 0, 1, 0, 0};
  gap.gamma1 = 1.0;
  E0SimulationConfig cfg;
  cfg.error_scale = 0.0;
  cfg.gap_error_scale = 0.0;
  Rng rng = make_rng(1);
  const auto path = simulate_e0_trajectory(90.0, 5.0, 50.0, kTheta, gap, 4, rng, cfg);
  double prev = 90.0;
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(path.female[t] - prev == doctest::Approx(e0_gain(prev, kTheta)).epsilon(1e-12));
    CHECK(path.female[t] - prev == doctest::Approx(kTheta.z).epsilon(1e-4));
    CHECK(path.female[t] - path.male[t] == doctest::Approx(5.0));
    prev = path.female[t];
  }
}

TEST_CASE("one simulated step is one gain plus one gap transition") {
  GapParams gap;
  gap.beta = {0.6, -0.005, 0.88, 0.006, -0.03};
  const E0SimulationConfig cfg;
  Rng a = make_rng(21);
  Rng b = make_rng(21);
  const auto path = simulate_e0_trajectory(62.0, 5.0, 48.0, kTheta, gap, 1, a, cfg);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double female = 62.0 + e0_gain(62.0, kTheta) + cfg.model.error.sd(62.0) * normal(b);
  const double next_gap = project_gap(5.0, 62.0, 48.0, gap, b);
  CHECK(path.female[0] == doctest::Approx(female).epsilon(1e-14));
  CHECK(path.male[0] == doctest::Approx(female - next_gap).epsilon(1e-14));
}

TEST_CASE("simulated gaps stay within the clamp") {
  GapParams gap;
  gap.beta = {0.8, -0.01, 0.9, 0.005, -0.02};
  gap.gamma1 = 1.1;
  const E0SimulationConfig cfg;
  Rng rng = make_rng(8);
  for (int i = 0; i < 10000; ++i) {
    const auto path = simulate_e0_trajectory(70.0, 6.0, 45.0, kTheta, gap, 6, rng, cfg);
    for (std::size_t t = 0; t < path.female.size(); ++t) {
      const double g = path.female[t] - path.male[t];
      REQUIRE(g >= -1e-9);
      REQUIRE(g <= 18.0 + 1e-9);
    }
  }
}
