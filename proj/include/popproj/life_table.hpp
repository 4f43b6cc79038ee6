#pragma once

#include <vector>

namespace popproj::lt {

/// Survivorship l(x) at the start of each age group for one sex; l(0) = 1,
/// non-increasing, strictly positive. The last group is open-ended.
struct StandardLifeTable {
  std::vector<double> lx;
  int age_width = 5;

  void validate() const;
};

struct LifeTable {
  std::vector<double> lx;
  std::vector<double> person_years;  // L(x), open group last
  std::vector<double> person_years_above;  // T(x)
  double e0 = 0.0;
};

/// Life table columns from survivorship. Closed groups use the trapezoid
/// rule; the open group takes the last closed group's death rate.
LifeTable life_table_from_lx(std::vector<double> lx, int age_width = 5);

/// Brass relational logit with slope 1: logit l(x) = alpha + logit l_s(x),
/// where logit(l) = 0.5 ln((1 - l) / l).
LifeTable brass_life_table(const StandardLifeTable& standard, double alpha);

struct SurvivalFit {
  double alpha = 0.0;
  double e0 = 0.0;
  /// Cohort survival ratios S_x; the last two share T(open)/T(open - 1).
  std::vector<double> survival;
  /// Fraction of the period's births alive at its end: L(0) / (k l(0)).
  double birth_survival = 1.0;
};

SurvivalFit survival_from_life_table(const LifeTable& table, double alpha, int age_width = 5);

/// Finds the Brass level alpha whose life table has e0 within `tolerance`
/// of the target (bisection; tolerance must be <= 0.05). Throws
/// InvalidInput naming the achievable span when the target is outside it.
SurvivalFit e0_to_survival(double e0_target, const StandardLifeTable& standard,
                           double tolerance = 1e-4);

/// Range of e0 reachable with alpha in the search bracket.
struct E0Span {
  double lowest;
  double highest;
};
E0Span achievable_e0(const StandardLifeTable& standard);

}  // namespace popproj::lt
