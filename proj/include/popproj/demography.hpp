#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace popproj {

/// Thrown when an input violates a documented invariant or precondition.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a quantity is mathematically undefined for its input
/// (e.g. a ratio with an empty denominator).
class UndefinedQuantity : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline constexpr int kDefaultAgeWidth = 5;
inline constexpr std::size_t kDefaultAgeGroups = 21;  // 0-4, ..., 95-99, 100+
inline constexpr double kDefaultSexRatioAtBirth = 1.05;

enum class Sex { kFemale, kMale };

/// Population counts by sex and age group at one time point. The last group
/// is open-ended.
class AgePyramid {
 public:
  AgePyramid(std::vector<double> female, std::vector<double> male,
             std::string period_label = {}, int age_width = kDefaultAgeWidth);

  std::size_t num_groups() const { return female_.size(); }
  int age_width() const { return age_width_; }
  const std::string& period_label() const { return period_label_; }
  std::span<const double> female() const { return female_; }
  std::span<const double> male() const { return male_; }
  std::span<const double> counts(Sex sex) const {
    return sex == Sex::kFemale ? female() : male();
  }
  int group_start_age(std::size_t group) const {
    return static_cast<int>(group) * age_width_;
  }

  bool operator==(const AgePyramid&) const = default;

 private:
  std::vector<double> female_;
  std::vector<double> male_;
  std::string period_label_;
  int age_width_;
};

/// One period's vital rates for one sex: the ingredients of a Leslie matrix.
///
/// `births_surviving` holds B_x, the surviving female births per woman of
/// group x over the period (zero outside the reproductive ages, and unused in
/// male schedules). `birth_survival` is the fraction of births alive at the
/// end of the period; only its female/male ratio enters the male births.
struct VitalSchedule {
  std::vector<double> births_surviving;
  std::vector<double> survival;
  std::vector<double> net_migration;
  double birth_survival = 1.0;

  std::size_t size() const { return survival.size(); }

  /// Throws InvalidInput when any invariant fails.
  void validate() const;

  static VitalSchedule zeros(std::size_t n);
};

struct ProjectionResult {
  std::vector<AgePyramid> pyramids;
  std::vector<std::string> period_labels;
  /// Cells clamped to zero because net emigration exceeded the cohort
  /// by more than the relative tolerance.
  std::size_t clamped_cells = 0;
};

/// Period schedules for both sexes.
struct PeriodSchedules {
  VitalSchedule female;
  VitalSchedule male;
};

Eigen::MatrixXd build_leslie_matrix(const VitalSchedule& schedule);

/// Scalar accounting identities for one sex: surviving births into the
/// first group, survival up one group, the open group retaining its own
/// survivors, migration added at the end of the period. No clamping.
std::vector<double> advance_cohorts(std::span<const double> counts,
                                    const VitalSchedule& schedule);

/// Matrix route of advance_cohorts: P n + m.
std::vector<double> advance_cohorts_leslie(std::span<const double> counts,
                                           const VitalSchedule& schedule);

struct OnePeriodResult {
  AgePyramid pyramid;
  std::size_t clamped_cells = 0;
};

/// Two-sex projection, female dominant. Male births are female births scaled
/// by the sex ratio at birth and by the male/female birth-survival ratio.
/// Negative counts are clamped to zero; those beyond 1e-6 of the cohort
/// are counted and logged.
OnePeriodResult project_one_period(const AgePyramid& pyramid,
                                   const VitalSchedule& female,
                                   const VitalSchedule& male,
                                   double sex_ratio_at_birth = kDefaultSexRatioAtBirth,
                                   std::string next_label = {});

ProjectionResult project_horizon(const AgePyramid& base,
                                 std::span<const PeriodSchedules> schedules,
                                 int horizon,
                                 double sex_ratio_at_birth = kDefaultSexRatioAtBirth,
                                 std::span<const std::string> labels = {});

double total_population(const AgePyramid& pyramid);

/// Persons aged 20-64 per person aged 65+, both sexes.
double potential_support_ratio(const AgePyramid& pyramid);

/// Median age with linear interpolation inside the containing group.
double median_age(const AgePyramid& pyramid);

/// Largest eigenvalue modulus of a square matrix.
double spectral_radius(const Eigen::MatrixXd& matrix);

}  // namespace popproj
