#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "popproj/demography.hpp"
#include "popproj/life_table.hpp"

namespace popproj::traj {

/// Simulated paths of one scalar indicator, trajectory x period.
struct TrajectorySet {
  std::string indicator;
  std::vector<std::string> period_labels;
  std::vector<std::vector<double>> values;

  std::size_t trajectories() const { return values.size(); }
  std::size_t periods() const { return period_labels.size(); }
  void validate() const;

  bool operator==(const TrajectorySet&) const = default;
};

/// Shares of total fertility over consecutive reproductive age groups.
struct FertilityAgePattern {
  int first_age = 15;
  int age_width = kDefaultAgeWidth;
  std::vector<double> proportions;

  void validate() const;
  /// First age-group index covered by the pattern.
  std::size_t first_group() const { return static_cast<std::size_t>(first_age / age_width); }
};

/// ASFR_x = f * proportion_x / k over the pattern's groups.
std::vector<double> tfr_to_asfr(double tfr, const FertilityAgePattern& pattern);

/// Pattern moved linearly toward `ultimate`, reaching it after
/// `convergence_periods` periods.
FertilityAgePattern interpolate_pattern(const FertilityAgePattern& start,
                                        const FertilityAgePattern& ultimate, int period,
                                        int convergence_periods);

struct PeriodMigration {
  std::vector<double> female;
  std::vector<double> male;
};

struct ScheduleInputs {
  double tfr = 0.0;
  double e0_female = 0.0;
  double e0_male = 0.0;
  const FertilityAgePattern* pattern = nullptr;
  const lt::StandardLifeTable* standard_female = nullptr;
  const lt::StandardLifeTable* standard_male = nullptr;
  const PeriodMigration* migration = nullptr;  // null: none
  std::size_t age_groups = kDefaultAgeGroups;
  double sex_ratio_at_birth = kDefaultSexRatioAtBirth;
};

/// Builds both sexes' vital schedules for one period. Surviving female
/// births per woman of group x:
///   B_x = s_b / (1 + SRB) * (k / 2) * (F_x + S_x F_{x+1})
/// with s_b the female birth survival L(0) / (k l(0)).
PeriodSchedules build_period_schedules(const ScheduleInputs& in);

struct ProjectionInputs {
  AgePyramid base;
  int base_year = 2010;
  std::vector<std::vector<double>> tfr;        // trajectory x period
  std::vector<std::vector<double>> e0_female;  // trajectory x period
  std::vector<std::vector<double>> e0_male;    // trajectory x period
  std::vector<PeriodMigration> migration;      // per period; empty = none
  FertilityAgePattern pattern;
  std::optional<FertilityAgePattern> ultimate_pattern;
  int pattern_convergence_periods = 0;
  lt::StandardLifeTable standard_female;
  lt::StandardLifeTable standard_male;
  double sex_ratio_at_birth = kDefaultSexRatioAtBirth;
};

/// One deterministic projection from one set of TFR and e0 paths.
ProjectionResult project_paths(const ProjectionInputs& in, std::span<const double> tfr,
                               std::span<const double> e0_female,
                               std::span<const double> e0_male);

struct ProjectionOutput {
  /// Keyed by indicator: tfr, e0_female, e0_male (one column per period),
  /// total_population, psr, median_age (base plus one column per period).
  std::map<std::string, TrajectorySet> indicators;
  std::size_t clamped_cells = 0;
};

/// Projects every trajectory index i from tfr[i], e0_female[i], e0_male[i].
ProjectionOutput run_probabilistic_projection(const ProjectionInputs& in);

/// Labels "2010", "2015", ... for points and "2010-2015", ... for periods.
std::vector<std::string> point_labels(int base_year, int periods, int width = kDefaultAgeWidth);
std::vector<std::string> interval_labels(int base_year, int periods,
                                         int width = kDefaultAgeWidth);

inline const std::vector<double> kDefaultProbs{0.025, 0.1, 0.5, 0.9, 0.975};

struct QuantileTable {
  std::string indicator;
  std::vector<double> probs;
  std::vector<std::string> period_labels;
  std::vector<std::vector<double>> values;  // period x prob

  bool operator==(const QuantileTable&) const = default;
};

/// Empirical quantile, linear between order statistics:
/// h = (n - 1) p, q = x[floor h] + (h - floor h)(x[floor h + 1] - x[floor h]).
double empirical_quantile(std::vector<double> sample, double p);

QuantileTable quantile_summary(const TrajectorySet& set,
                               const std::vector<double>& probs = kDefaultProbs);

// CSV: indicator,trajectory_id,period,value
void write_trajectories(std::ostream& out, std::span<const TrajectorySet> sets);
std::vector<TrajectorySet> read_trajectories(std::istream& in, const std::string& source = "");

// CSV: indicator,period,p0.025,p0.1,p0.5,p0.9,p0.975
void write_quantiles(std::ostream& out, std::span<const QuantileTable> tables);
std::vector<QuantileTable> read_quantiles(std::istream& in, const std::string& source = "");

}  // namespace popproj::traj
