#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "popproj/distributions.hpp"
#include "popproj/inputs.hpp"
#include "popproj/life_table.hpp"
#include "popproj/trajectory.hpp"
#include "test_util.hpp"

using namespace popproj;
using namespace popproj::traj;

namespace {

const std::pair<lt::StandardLifeTable, lt::StandardLifeTable>& tables() {
  static const auto t = io::read_life_tables(testutil::data() / "standard_life_table.csv");
  return t;
}

FertilityAgePattern pattern() {
  return FertilityAgePattern{15, 5, {0.05, 0.2, 0.27, 0.23, 0.15, 0.08, 0.02}};
}

ProjectionInputs inputs(std::size_t n, int horizon) {
  std::vector<double> f(21), m(21);
  for (std::size_t x = 0; x < 21; ++x) {
    f[x] = 1000.0 * std::exp(-0.12 * static_cast<double>(x));
    m[x] = 1.02 * f[x];
  }
  ProjectionInputs in{AgePyramid(f, m, "2010"),
                      2010,
                      {},
                      {},
                      {},
                      {},
                      pattern(),
                      std::nullopt,
                      0,
                      tables().first,
                      tables().second,
                      kDefaultSexRatioAtBirth};
  Rng rng = make_rng(31);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> tfr, ef, em;
    for (int t = 0; t < horizon; ++t) {
      tfr.push_back(2.4 - 0.1 * t + 0.2 * normal(rng));
      ef.push_back(72.0 + 1.2 * t + 0.5 * normal(rng));
      em.push_back(ef.back() - 4.5);
    }
    in.tfr.push_back(tfr);
    in.e0_female.push_back(ef);
    in.e0_male.push_back(em);
  }
  return in;
}

}  // namespace

TEST_CASE("uniform pattern gives equal rates") {
  const FertilityAgePattern uniform{15, 5, std::vector<double>(7, 1.0 / 7.0)};
  const auto asfr = tfr_to_asfr(2.1, uniform);
  REQUIRE(asfr.size() == 7);
  for (double a : asfr) CHECK(a == doctest::Approx(0.06).epsilon(1e-14));
  for (double f : {0.3, 1.0, 2.1, 4.7, 8.2}) {
    const auto r = tfr_to_asfr(f, pattern());
    CHECK(std::abs(5.0 * std::accumulate(r.begin(), r.end(), 0.0) - f) < 1e-12);
  }
  const auto r = tfr_to_asfr(3.0, pattern());
  CHECK(r[2] == doctest::Approx(3.0 * 0.27 / 5.0).epsilon(1e-15));
  CHECK(r[6] == doctest::Approx(3.0 * 0.02 / 5.0).epsilon(1e-15));
}

TEST_CASE("pattern validation and interpolation") {
  FertilityAgePattern bad{15, 5, {0.5, 0.4}};
  CHECK_THROWS_AS(bad.validate(), InvalidInput);
  const FertilityAgePattern uniform{15, 5, std::vector<double>(7, 1.0 / 7.0)};
  const auto half = interpolate_pattern(pattern(), uniform, 1, 2);
  CHECK(half.proportions[0] == doctest::Approx(0.5 * (0.05 + 1.0 / 7.0)));
  const auto done = interpolate_pattern(pattern(), uniform, 5, 2);
  CHECK(done.proportions == uniform.proportions);
}

TEST_CASE("standard table oracle values") {
  const auto& [female, male] = tables();
  const auto f0 = lt::brass_life_table(female, 0.0);
  const auto m0 = lt::brass_life_table(male, 0.0);
  CHECK(f0.e0 == doctest::Approx(75.92365707222618).epsilon(1e-12));
  CHECK(m0.e0 == doctest::Approx(70.11960379844429).epsilon(1e-12));
  const auto sf = lt::survival_from_life_table(f0, 0.0);
  const auto sm = lt::survival_from_life_table(m0, 0.0);
  CHECK(sf.survival.front() == doctest::Approx(0.9884262129807565).epsilon(1e-12));
  CHECK(sf.survival.back() == doctest::Approx(0.16794965508900564).epsilon(1e-12));
  CHECK(sf.birth_survival == doctest::Approx(0.9896559899499999).epsilon(1e-12));
  CHECK(sm.survival.front() == doctest::Approx(0.9841880814644078).epsilon(1e-12));
  CHECK(sm.survival.back() == doctest::Approx(0.08930198314586327).epsilon(1e-12));
  CHECK(sm.birth_survival == doctest::Approx(0.9868330693).epsilon(1e-12));
  CHECK(lt::brass_life_table(female, -0.5).e0 == doctest::Approx(83.72606871284196).epsilon(1e-12));
  CHECK(lt::brass_life_table(female, 0.7).e0 == doctest::Approx(60.66467373972756).epsilon(1e-12));
}

TEST_CASE("inverting the standard's own e0 returns alpha zero") {
  const auto& female = tables().first;
  const double own = lt::brass_life_table(female, 0.0).e0;
  const auto fit = lt::e0_to_survival(own, female);
  CHECK(std::abs(fit.alpha) < 1e-12);
}

TEST_CASE("e0 inversion hits every target and survival rises with it") {
  for (const auto* table : {&tables().first, &tables().second}) {
    std::vector<double> previous;
    for (double target = 25.0; target <= 95.0 + 1e-9; target += 2.5) {
      const auto fit = lt::e0_to_survival(target, *table, 0.05);
      const auto check = lt::brass_life_table(*table, fit.alpha);
      CHECK(std::abs(check.e0 - target) <= 0.05);
      CHECK(std::abs(fit.e0 - target) <= 0.05);
      for (double s : fit.survival) {
        CHECK(s >= 0.0);
        CHECK(s <= 1.0);
      }
      if (!previous.empty()) {
        for (std::size_t x = 0; x < previous.size(); ++x) CHECK(fit.survival[x] >= previous[x]);
      }
      previous = fit.survival;
    }
  }
}

TEST_CASE("unreachable e0 names the span") {
  const auto span = lt::achievable_e0(tables().first);
  CHECK(span.lowest < 25.0);
  CHECK(span.highest > 95.0);
  try {
    lt::e0_to_survival(span.highest + 5.0, tables().first);
    FAIL("expected an error");
  } catch (const InvalidInput& e) {
    CHECK(std::string(e.what()).find("span") != std::string::npos);
  }
}

TEST_CASE("single trajectory equals the deterministic projection") {
  const auto in = inputs(1, 5);
  const auto out = run_probabilistic_projection(in);
  const auto direct = project_paths(in, in.tfr[0], in.e0_female[0], in.e0_male[0]);
  const auto& total = out.indicators.at("total_population").values[0];
  const auto& psr = out.indicators.at("psr").values[0];
  REQUIRE(total.size() == direct.pyramids.size());
  for (std::size_t t = 0; t < total.size(); ++t) {
    CHECK(total[t] == total_population(direct.pyramids[t]));
    CHECK(psr[t] == potential_support_ratio(direct.pyramids[t]));
  }
  CHECK(out.indicators.at("tfr").period_labels.front() == "2010-2015");
  CHECK(out.indicators.at("total_population").period_labels.back() == "2035");
}

TEST_CASE("doubling migration moves only the population indicators") {
  auto in = inputs(3, 3);
  for (int t = 0; t < 3; ++t) {
    PeriodMigration m{std::vector<double>(21, 0.0), std::vector<double>(21, 0.0)};
    for (std::size_t x = 4; x < 8; ++x) {
      m.female[x] = 12.0;
      m.male[x] = 15.0;
    }
    in.migration.push_back(m);
  }
  const auto base = run_probabilistic_projection(in);
  auto doubled = in;
  for (auto& m : doubled.migration) {
    for (auto& v : m.female) v *= 2.0;
    for (auto& v : m.male) v *= 2.0;
  }
  const auto twice = run_probabilistic_projection(doubled);
  for (const char* same : {"tfr", "e0_female", "e0_male"}) {
    CHECK(base.indicators.at(same) == twice.indicators.at(same));
  }
  CHECK(base.indicators.at("total_population") != twice.indicators.at("total_population"));

  // compose trajectory 1 by hand from the period schedules
  std::vector<PeriodSchedules> schedules;
  for (std::size_t t = 0; t < 3; ++t) {
    ScheduleInputs s;
    s.tfr = doubled.tfr[0][t];
    s.e0_female = doubled.e0_female[0][t];
    s.e0_male = doubled.e0_male[0][t];
    const auto pat = pattern();
    s.pattern = &pat;
    s.standard_female = &tables().first;
    s.standard_male = &tables().second;
    s.migration = &doubled.migration[t];
    schedules.push_back(build_period_schedules(s));
  }
  auto pyramid = doubled.base;
  for (std::size_t t = 0; t < 3; ++t) {
    pyramid = project_one_period(pyramid, schedules[t].female, schedules[t].male).pyramid;
    CHECK(twice.indicators.at("total_population").values[0][t + 1] ==
          doctest::Approx(total_population(pyramid)).epsilon(1e-13));
    CHECK(twice.indicators.at("median_age").values[0][t + 1] ==
          doctest::Approx(median_age(pyramid)).epsilon(1e-13));
  }
}

TEST_CASE("mismatched trajectory counts are rejected") {
  auto in = inputs(3, 2);
  in.e0_male.pop_back();
  CHECK_THROWS_AS(run_probabilistic_projection(in), InvalidInput);
  in = inputs(1, 2);
  in.tfr[0][1] = std::nan("");
  CHECK_THROWS_AS(run_probabilistic_projection(in), InvalidInput);
}

TEST_CASE("births use the averaged rates of the mother's group") {
  const auto pat = pattern();
  ScheduleInputs s;
  s.tfr = 2.0;
  s.e0_female = 70.0;
  s.e0_male = 66.0;
  s.pattern = &pat;
  s.standard_female = &tables().first;
  s.standard_male = &tables().second;
  const auto sched = build_period_schedules(s);
  const auto fit = lt::e0_to_survival(70.0, tables().first);
  const auto asfr = tfr_to_asfr(2.0, pat);
  const double share = 1.0 / (1.0 + kDefaultSexRatioAtBirth);
  // group 4 is ages 20-24, pattern index 1
  const double expected =
      share * fit.birth_survival * 2.5 * (asfr[1] + fit.survival[4] * asfr[2]);
  CHECK(sched.female.births_surviving[4] == doctest::Approx(expected).epsilon(1e-14));
  // group 2 (10-14) only picks up rates from the next group
  CHECK(sched.female.births_surviving[2] ==
        doctest::Approx(share * fit.birth_survival * 2.5 * fit.survival[2] * asfr[0]).epsilon(1e-14));
  CHECK(sched.female.births_surviving[0] == 0.0);
  CHECK(sched.female.births_surviving[12] == 0.0);
}

TEST_CASE("quantile oracle and the interpolation rule") {
  const std::vector<double> x{3.2, -1, 0.5, 7.7, 2.2, 2.2, 9.1};
  const std::vector<std::pair<double, double>> expected{
      {0.025, -0.775}, {0.1, -0.1}, {0.5, 2.2}, {0.9, 8.26}, {0.975, 8.89}};
  for (const auto& [p, q] : expected) CHECK(empirical_quantile(x, p) == doctest::Approx(q).epsilon(1e-12));
  CHECK_THROWS_AS(empirical_quantile(x, 1.0), InvalidInput);
}

TEST_CASE("quantile summaries of constant and random sets") {
  TrajectorySet flat{"c", {"a", "b"}, std::vector<std::vector<double>>(9, {4.5, -1.0})};
  const auto q = quantile_summary(flat);
  for (const auto& row : q.values) {
    for (double v : row) CHECK((v == 4.5 || v == -1.0));
  }
  CHECK(q.values[0] == std::vector<double>(5, 4.5));

  Rng rng = make_rng(77);
  std::normal_distribution<double> normal(0.0, 3.0);
  TrajectorySet set{"r", {"1", "2", "3", "4"}, {}};
  for (int i = 0; i < 53; ++i) {
    set.values.push_back({normal(rng), normal(rng), normal(rng), normal(rng)});
  }
  const auto table = quantile_summary(set);
  for (std::size_t t = 0; t < 4; ++t) {
    std::vector<double> col;
    for (const auto& row : set.values) col.push_back(row[t]);
    std::sort(col.begin(), col.end());
    for (std::size_t j = 0; j < kDefaultProbs.size(); ++j) {
      const double h = 52.0 * kDefaultProbs[j];
      const auto lo = static_cast<std::size_t>(h);
      const double oracle = col[lo] + (h - lo) * (col[std::min<std::size_t>(lo + 1, 52)] - col[lo]);
      CHECK(table.values[t][j] == doctest::Approx(oracle).epsilon(1e-13));
      if (j > 0) CHECK(table.values[t][j - 1] <= table.values[t][j]);
    }
  }
}

TEST_CASE("trajectory and quantile files round-trip") {
  const auto out = run_probabilistic_projection(inputs(4, 3));
  std::vector<TrajectorySet> sets;
  std::vector<QuantileTable> quantiles;
  for (const auto& [name, set] : out.indicators) {
    sets.push_back(set);
    quantiles.push_back(quantile_summary(set));
  }
  std::stringstream a;
  write_trajectories(a, sets);
  CHECK(read_trajectories(a) == sets);
  std::stringstream b;
  write_quantiles(b, quantiles);
  const std::string text = b.str();
  CHECK(text.rfind("indicator,period,p0.025,p0.1,p0.5,p0.9,p0.975\n", 0) == 0);
  CHECK(read_quantiles(b) == quantiles);
}
