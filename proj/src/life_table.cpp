#include "popproj/life_table.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "popproj/demography.hpp"

namespace popproj::lt {

namespace {

constexpr double kAlphaLow = -8.0;
constexpr double kAlphaHigh = 8.0;
constexpr double kMinOpenRate = 1e-6;

}  // namespace

void StandardLifeTable::validate() const {
  if (lx.size() < 3) throw InvalidInput("standard life table needs at least 3 age groups");
  if (lx[0] != 1.0) throw InvalidInput(fmt::format("standard life table l(0) must be 1, got {}", lx[0]));
  for (std::size_t x = 1; x < lx.size(); ++x) {
    if (!(lx[x] > 0.0) || !(lx[x] <= lx[x - 1])) {
      throw InvalidInput(fmt::format(
          "standard life table l(x) must be positive and non-increasing (group {})", x));
    }
    if (!(lx[x] < 1.0)) {
      throw InvalidInput(fmt::format("standard life table l({}) must be below 1", x * age_width));
    }
  }
  if (age_width <= 0) throw InvalidInput("life table age width must be positive");
}

LifeTable life_table_from_lx(std::vector<double> lx, int age_width) {
  const std::size_t n = lx.size();
  const double k = age_width;
  LifeTable t;
  t.person_years.assign(n, 0.0);
  for (std::size_t x = 0; x + 1 < n; ++x) t.person_years[x] = 0.5 * k * (lx[x] + lx[x + 1]);
  const double closed = t.person_years[n - 2];
  const double rate = closed > 0.0 ? std::max((lx[n - 2] - lx[n - 1]) / closed, kMinOpenRate)
                                   : kMinOpenRate;
  t.person_years[n - 1] = lx[n - 1] / rate;
  t.person_years_above.assign(n, 0.0);
  double above = 0.0;
  for (std::size_t x = n; x-- > 0;) {
    above += t.person_years[x];
    t.person_years_above[x] = above;
  }
  t.e0 = t.person_years_above[0] / lx[0];
  t.lx = std::move(lx);
  return t;
}

LifeTable brass_life_table(const StandardLifeTable& standard, double alpha) {
  std::vector<double> lx(standard.lx.size());
  lx[0] = 1.0;
  for (std::size_t x = 1; x < lx.size(); ++x) {
    const double ls = standard.lx[x];
    const double logit = 0.5 * std::log((1.0 - ls) / ls);
    lx[x] = 1.0 / (1.0 + std::exp(2.0 * (alpha + logit)));
  }
  return life_table_from_lx(std::move(lx), standard.age_width);
}

SurvivalFit survival_from_life_table(const LifeTable& table, double alpha, int age_width) {
  const std::size_t n = table.lx.size();
  SurvivalFit fit;
  fit.alpha = alpha;
  fit.e0 = table.e0;
  fit.survival.assign(n, 0.0);
  const auto& big_l = table.person_years;
  const auto& big_t = table.person_years_above;
  for (std::size_t x = 0; x + 2 < n; ++x) {
    fit.survival[x] = big_l[x] > 0.0 ? std::min(1.0, big_l[x + 1] / big_l[x]) : 0.0;
  }
  const double top = big_t[n - 2] > 0.0 ? std::min(1.0, big_t[n - 1] / big_t[n - 2]) : 0.0;
  fit.survival[n - 2] = top;
  fit.survival[n - 1] = top;
  fit.birth_survival = std::min(1.0, big_l[0] / (age_width * table.lx[0]));
  return fit;
}

E0Span achievable_e0(const StandardLifeTable& standard) {
  return {brass_life_table(standard, kAlphaHigh).e0, brass_life_table(standard, kAlphaLow).e0};
}

SurvivalFit e0_to_survival(double e0_target, const StandardLifeTable& standard,
                           double tolerance) {
  standard.validate();
  if (!(tolerance > 0.0 && tolerance <= 0.05)) {
    throw InvalidInput("e0 inversion tolerance must lie in (0, 0.05]");
  }
  const auto span = achievable_e0(standard);
  if (!(e0_target >= span.lowest && e0_target <= span.highest)) {
    throw InvalidInput(fmt::format(
        "life expectancy {:.3f} is outside the span [{:.3f}, {:.3f}] reachable from the standard "
        "table",
        e0_target, span.lowest, span.highest));
  }
  // e0 decreases in alpha
  double lo = kAlphaLow;
  double hi = kAlphaHigh;
  double alpha = 0.0;
  LifeTable table = brass_life_table(standard, alpha);
  for (int it = 0; it < 200 && std::abs(table.e0 - e0_target) > tolerance; ++it) {
    if (table.e0 > e0_target) {
      lo = alpha;
    } else {
      hi = alpha;
    }
    alpha = 0.5 * (lo + hi);
    table = brass_life_table(standard, alpha);
  }
  return survival_from_life_table(table, alpha, standard.age_width);
}

}  // namespace popproj::lt
