#include <random>

#include "doctest.h"
#include "popproj/demography.hpp"
#include "test_util.hpp"

using namespace popproj;

namespace {

VitalSchedule schedule3(std::vector<double> b, std::vector<double> s, std::vector<double> m = {}) {
  VitalSchedule v;
  v.births_surviving = std::move(b);
  v.survival = std::move(s);
  v.net_migration = m.empty() ? std::vector<double>(v.survival.size(), 0.0) : std::move(m);
  return v;
}

VitalSchedule random_schedule(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  VitalSchedule v = VitalSchedule::zeros(n);
  for (std::size_t i = 0; i < n; ++i) {
    v.survival[i] = u(rng);
    v.births_surviving[i] = (i >= 1 && i + 1 < n) ? 0.6 * u(rng) : 0.0;
    v.net_migration[i] = 5.0 * (u(rng) - 0.3);
  }
  return v;
}

}  // namespace

TEST_CASE("leslie matrix places births on the top row and survival below") {
  const auto v = schedule3({0, 1, 0}, {0.9, 0.8, 0.5});
  const Eigen::MatrixXd p = build_leslie_matrix(v);
  Eigen::MatrixXd expected(3, 3);
  expected << 0, 1, 0, 0.9, 0, 0, 0, 0.8, 0.5;
  CHECK(p == expected);
}

TEST_CASE("zero fertility and full survival shifts cohorts up") {
  const auto v = schedule3({0, 0, 0, 0}, {1, 1, 1, 1});
  const Eigen::MatrixXd p = build_leslie_matrix(v);
  Eigen::MatrixXd expected(4, 4);
  expected << 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 1;
  CHECK(p == expected);
  const std::vector<double> n{4, 3, 2, 1};
  CHECK(advance_cohorts(n, v) == std::vector<double>{0, 4, 3, 3});
}

TEST_CASE("hand-computed three-group step") {
  const auto v = schedule3({0, 0.5, 0}, {0.9, 0.8, 0.5}, {10, 0, 0});
  const std::vector<double> n{100, 100, 100};
  const auto scalar = advance_cohorts(n, v);
  const auto matrix = advance_cohorts_leslie(n, v);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(scalar[i] == doctest::Approx(std::vector<double>{60, 90, 130}[i]).epsilon(1e-14));
    CHECK(matrix[i] == doctest::Approx(scalar[i]).epsilon(1e-14));
  }
}

TEST_CASE("matrix and identity routes agree on random instances") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1000.0);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 3 + rep % 8;
    const auto v = random_schedule(n, rng);
    std::vector<double> counts(n);
    for (auto& c : counts) c = u(rng);
    const auto a = advance_cohorts(counts, v);
    const auto b = advance_cohorts_leslie(counts, v);
    for (std::size_t i = 0; i < n; ++i) CHECK(testutil::rel_close(a[i], b[i], 1e-12));
  }
}

TEST_CASE("schedule validation rejects survival above one") {
  auto v = schedule3({0, 0.5, 0}, {0.9, 1.2, 0.5});
  CHECK_THROWS_AS(v.validate(), InvalidInput);
  v = schedule3({0, -0.1, 0}, {0.9, 0.8, 0.5});
  CHECK_THROWS_AS(v.validate(), InvalidInput);
}

TEST_CASE("horizon of one equals a single period and two periods compose") {
  std::mt19937_64 rng(5);
  const std::size_t n = 6;
  std::vector<PeriodSchedules> schedules;
  for (int t = 0; t < 2; ++t) {
    auto f = random_schedule(n, rng);
    auto m = random_schedule(n, rng);
    m.birth_survival = 0.97;
    f.birth_survival = 0.98;
    schedules.push_back({f, m});
  }
  const AgePyramid base({500, 400, 300, 200, 100, 50}, {510, 390, 280, 190, 90, 30}, "2010");
  const auto one = project_one_period(base, schedules[0].female, schedules[0].male, 1.05);
  const auto h1 = project_horizon(base, std::span(schedules).first(1), 1, 1.05);
  REQUIRE(h1.pyramids.size() == 2);
  CHECK(h1.pyramids[1].female().size() == n);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(h1.pyramids[1].female()[i] == one.pyramid.female()[i]);
    CHECK(h1.pyramids[1].male()[i] == one.pyramid.male()[i]);
  }
  const auto two = project_one_period(one.pyramid, schedules[1].female, schedules[1].male, 1.05);
  const auto h2 = project_horizon(base, schedules, 2, 1.05);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(h2.pyramids[2].female()[i] == two.pyramid.female()[i]);
    CHECK(h2.pyramids[2].male()[i] == two.pyramid.male()[i]);
  }
}

TEST_CASE("male births follow female births through the sex ratio") {
  VitalSchedule f = schedule3({0, 0.5, 0}, {0.9, 0.8, 0.5});
  VitalSchedule m = schedule3({0, 0, 0}, {0.9, 0.8, 0.5});
  f.birth_survival = 0.98;
  m.birth_survival = 0.96;
  const AgePyramid base({100, 100, 100}, {100, 100, 100});
  const auto r = project_one_period(base, f, m, 1.05);
  CHECK(r.pyramid.female()[0] == doctest::Approx(50.0));
  CHECK(r.pyramid.male()[0] == doctest::Approx(50.0 * 1.05 * 0.96 / 0.98));
}

TEST_CASE("emigration beyond the cohort is clamped and counted") {
  VitalSchedule f = schedule3({0, 0, 0}, {0.9, 0.8, 0.5}, {0, -500, 0});
  VitalSchedule m = schedule3({0, 0, 0}, {0.9, 0.8, 0.5});
  const AgePyramid base({100, 100, 100}, {100, 100, 100});
  const auto r = project_one_period(base, f, m, 1.05);
  CHECK(r.pyramid.female()[1] == 0.0);
  CHECK(r.clamped_cells == 1);
}

TEST_CASE("support ratio of a uniform pyramid") {
  const AgePyramid p(std::vector<double>(20, 1.0), std::vector<double>(20, 1.0));
  CHECK(potential_support_ratio(p) == doctest::Approx(9.0 / 7.0).epsilon(1e-15));
  std::vector<double> young(20, 0.0);
  young[0] = young[3] = 5.0;
  CHECK_THROWS_AS(potential_support_ratio(AgePyramid(young, young)), UndefinedQuantity);
}

TEST_CASE("support ratio matches direct summation") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  std::vector<double> f(21), m(21);
  for (std::size_t i = 0; i < 21; ++i) {
    f[i] = u(rng);
    m[i] = u(rng);
  }
  double work = 0.0, old = 0.0;
  for (std::size_t i = 4; i <= 12; ++i) work += f[i] + m[i];
  for (std::size_t i = 13; i < 21; ++i) old += f[i] + m[i];
  const AgePyramid p(f, m);
  CHECK(potential_support_ratio(p) == doctest::Approx(work / old).epsilon(1e-13));
  double total = 0.0;
  for (std::size_t i = 0; i < 21; ++i) total += f[i] + m[i];
  CHECK(total_population(p) == doctest::Approx(total).epsilon(1e-14));
}

TEST_CASE("median age interpolates inside the containing group") {
  std::vector<double> f(5, 0.0), m(5, 0.0);
  f[2] = 10.0;
  m[2] = 30.0;
  CHECK(median_age(AgePyramid(f, m)) == doctest::Approx(12.5));

  // Expanding each group into single years gives the same answer.
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(1.0, 10.0);
  std::vector<double> rf(12), rm(12);
  for (std::size_t i = 0; i < 12; ++i) {
    rf[i] = u(rng);
    rm[i] = u(rng);
  }
  const double med = median_age(AgePyramid(rf, rm));
  CHECK(med > 0.0);
  CHECK(med < 60.0);
  double half = 0.0;
  for (std::size_t i = 0; i < 12; ++i) half += rf[i] + rm[i];
  half /= 2.0;
  double acc = 0.0, brute = 0.0;
  for (int year = 0; year < 60; ++year) {
    const double per_year = (rf[year / 5] + rm[year / 5]) / 5.0;
    if (acc + per_year >= half) {
      brute = year + (half - acc) / per_year;
      break;
    }
    acc += per_year;
  }
  CHECK(med == doctest::Approx(brute).epsilon(1e-12));
}

TEST_CASE("spectral radius of a small matrix") {
  Eigen::MatrixXd p(4, 4);
  p << 0, .4, .3, 0, .95, 0, 0, 0, 0, .9, 0, 0, 0, 0, .8, .3;
  CHECK(spectral_radius(p) == doctest::Approx(0.8300669880986895).epsilon(1e-12));
}

TEST_CASE("pyramid rejects negative or mismatched counts") {
  CHECK_THROWS_AS(AgePyramid({1, -1, 1}, {1, 1, 1}), InvalidInput);
  CHECK_THROWS_AS(AgePyramid({1, 1, 1}, {1, 1}), InvalidInput);
  CHECK_THROWS_AS(AgePyramid({1, 1}, {1, 1}), InvalidInput);
}
