#include "popproj/demography.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "popproj/log.hpp"

namespace popproj {

namespace {

constexpr double kClampTolerance = 1e-6;

void check_counts(std::span<const double> counts, const char* what) {
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (!std::isfinite(counts[i]) || counts[i] < 0.0) {
      throw InvalidInput(fmt::format("{} count at group {} is {}, expected a finite value >= 0",
                                     what, i, counts[i]));
    }
  }
}

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

}  // namespace

AgePyramid::AgePyramid(std::vector<double> female, std::vector<double> male,
                       std::string period_label, int age_width)
    : female_(std::move(female)),
      male_(std::move(male)),
      period_label_(std::move(period_label)),
      age_width_(age_width) {
  if (female_.size() != male_.size()) {
    throw InvalidInput(fmt::format("female and male pyramids differ in size ({} vs {})",
                                   female_.size(), male_.size()));
  }
  if (female_.size() < 3) {
    throw InvalidInput(fmt::format("age pyramid needs at least 3 groups, got {}", female_.size()));
  }
  if (age_width_ <= 0) {
    throw InvalidInput("age group width must be positive");
  }
  check_counts(female_, "female");
  check_counts(male_, "male");
}

void VitalSchedule::validate() const {
  const std::size_t n = survival.size();
  if (births_surviving.size() != n || net_migration.size() != n) {
    throw InvalidInput(fmt::format(
        "vital schedule arrays differ in length (B={}, S={}, m={})",
        births_surviving.size(), n, net_migration.size()));
  }
  if (n < 3) {
    throw InvalidInput("vital schedule needs at least 3 age groups");
  }
  for (std::size_t x = 0; x < n; ++x) {
    if (!(survival[x] >= 0.0 && survival[x] <= 1.0)) {
      throw InvalidInput(fmt::format("survival ratio at group {} is {}, outside [0, 1]", x,
                                     survival[x]));
    }
    if (!(births_surviving[x] >= 0.0) || !std::isfinite(births_surviving[x])) {
      throw InvalidInput(fmt::format("births ratio at group {} is {}, expected >= 0", x,
                                     births_surviving[x]));
    }
    if (!std::isfinite(net_migration[x])) {
      throw InvalidInput(fmt::format("net migration at group {} is not finite", x));
    }
  }
  if (!(birth_survival >= 0.0 && birth_survival <= 1.0)) {
    throw InvalidInput(fmt::format("birth survival {} outside [0, 1]", birth_survival));
  }
}

VitalSchedule VitalSchedule::zeros(std::size_t n) {
  return VitalSchedule{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0),
                       std::vector<double>(n, 0.0), 1.0};
}

Eigen::MatrixXd build_leslie_matrix(const VitalSchedule& schedule) {
  schedule.validate();
  const auto n = static_cast<Eigen::Index>(schedule.size());
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index x = 0; x < n; ++x) {
    p(0, x) = schedule.births_surviving[x];
  }
  for (Eigen::Index x = 0; x + 1 < n; ++x) {
    p(x + 1, x) += schedule.survival[x];
  }
  // open-ended group keeps its survivors
  p(n - 1, n - 1) += schedule.survival[n - 1];
  return p;
}

std::vector<double> advance_cohorts(std::span<const double> counts,
                                    const VitalSchedule& schedule) {
  schedule.validate();
  const std::size_t n = schedule.size();
  if (counts.size() != n) {
    throw InvalidInput(fmt::format("pyramid has {} groups but schedule has {}", counts.size(), n));
  }
  std::vector<double> next(n, 0.0);
  double births = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    births += schedule.births_surviving[x] * counts[x];
  }
  next[0] = births;
  for (std::size_t x = 0; x + 2 < n; ++x) {
    next[x + 1] = schedule.survival[x] * counts[x];
  }
  next[n - 1] += schedule.survival[n - 2] * counts[n - 2] + schedule.survival[n - 1] * counts[n - 1];
  for (std::size_t x = 0; x < n; ++x) {
    next[x] += schedule.net_migration[x];
  }
  return next;
}

std::vector<double> advance_cohorts_leslie(std::span<const double> counts,
                                           const VitalSchedule& schedule) {
  const Eigen::MatrixXd p = build_leslie_matrix(schedule);
  if (counts.size() != schedule.size()) {
    throw InvalidInput(fmt::format("pyramid has {} groups but schedule has {}", counts.size(),
                                   schedule.size()));
  }
  const Eigen::Map<const Eigen::VectorXd> n(counts.data(), static_cast<Eigen::Index>(counts.size()));
  const Eigen::Map<const Eigen::VectorXd> m(schedule.net_migration.data(),
                                            static_cast<Eigen::Index>(schedule.size()));
  const Eigen::VectorXd next = p * n + m;
  return {next.data(), next.data() + next.size()};
}

namespace {

std::size_t clamp_negative(std::vector<double>& next, std::span<const double> previous,
                           const char* sex, const std::string& label) {
  std::size_t flagged = 0;
  for (std::size_t x = 0; x < next.size(); ++x) {
    if (next[x] >= 0.0) continue;
    const double scale = std::max({previous[x], x > 0 ? previous[x - 1] : 0.0, 1.0});
    if (-next[x] > kClampTolerance * scale) {
      ++flagged;
      logger().warn("{} group {} in period {} went negative ({:.6g}); net emigration exceeds "
                    "the cohort, clamped to 0",
                    sex, x, label, next[x]);
    }
    next[x] = 0.0;
  }
  return flagged;
}

}  // namespace

OnePeriodResult project_one_period(const AgePyramid& pyramid, const VitalSchedule& female,
                                   const VitalSchedule& male, double sex_ratio_at_birth,
                                   std::string next_label) {
  if (!(sex_ratio_at_birth > 0.0) || !std::isfinite(sex_ratio_at_birth)) {
    throw InvalidInput(fmt::format("sex ratio at birth must be positive, got {}", sex_ratio_at_birth));
  }
  female.validate();
  male.validate();
  const std::size_t n = pyramid.num_groups();
  if (female.size() != n || male.size() != n) {
    throw InvalidInput(fmt::format("pyramid has {} groups but schedules have {} (female) and {} (male)",
                                   n, female.size(), male.size()));
  }

  std::vector<double> next_female = advance_cohorts(pyramid.female(), female);

  double female_births = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    female_births += female.births_surviving[x] * pyramid.female()[x];
  }
  const double survival_ratio =
      female.birth_survival > 0.0 ? male.birth_survival / female.birth_survival : 0.0;

  VitalSchedule male_no_births = male;
  std::fill(male_no_births.births_surviving.begin(), male_no_births.births_surviving.end(), 0.0);
  std::vector<double> next_male = advance_cohorts(pyramid.male(), male_no_births);
  next_male[0] += female_births * sex_ratio_at_birth * survival_ratio;

  std::size_t clamped = clamp_negative(next_female, pyramid.female(), "female", next_label);
  clamped += clamp_negative(next_male, pyramid.male(), "male", next_label);

  return {AgePyramid(std::move(next_female), std::move(next_male), std::move(next_label),
                     pyramid.age_width()),
          clamped};
}

ProjectionResult project_horizon(const AgePyramid& base, std::span<const PeriodSchedules> schedules,
                                 int horizon, double sex_ratio_at_birth,
                                 std::span<const std::string> labels) {
  if (horizon <= 0) {
    throw InvalidInput(fmt::format("projection horizon must be positive, got {}", horizon));
  }
  const auto steps = static_cast<std::size_t>(horizon);
  if (schedules.size() < steps) {
    throw InvalidInput(fmt::format("horizon {} needs {} period schedules, got {}", horizon, steps,
                                   schedules.size()));
  }
  if (!labels.empty() && labels.size() < steps + 1) {
    throw InvalidInput("period labels must cover the base and every projected period");
  }
  ProjectionResult result;
  result.pyramids.reserve(steps + 1);
  result.pyramids.push_back(base);
  result.period_labels.push_back(labels.empty() ? base.period_label() : labels[0]);
  for (std::size_t t = 0; t < steps; ++t) {
    std::string label = labels.empty() ? std::to_string(t + 1) : labels[t + 1];
    auto step = project_one_period(result.pyramids.back(), schedules[t].female, schedules[t].male,
                                   sex_ratio_at_birth, label);
    result.clamped_cells += step.clamped_cells;
    result.pyramids.push_back(std::move(step.pyramid));
    result.period_labels.push_back(std::move(label));
  }
  return result;
}

double total_population(const AgePyramid& pyramid) {
  return sum(pyramid.female()) + sum(pyramid.male());
}

double potential_support_ratio(const AgePyramid& pyramid) {
  if (20 % pyramid.age_width() != 0 || 65 % pyramid.age_width() != 0) {
    throw InvalidInput("age groups do not split at 20 and 65");
  }
  double working = 0.0;
  double old = 0.0;
  for (std::size_t x = 0; x < pyramid.num_groups(); ++x) {
    const int start = pyramid.group_start_age(x);
    const double both = pyramid.female()[x] + pyramid.male()[x];
    if (start >= 65) {
      old += both;
    } else if (start >= 20) {
      working += both;
    }
  }
  if (!(old > 0.0)) {
    throw UndefinedQuantity("potential support ratio undefined: no population aged 65+");
  }
  return working / old;
}

double median_age(const AgePyramid& pyramid) {
  const double total = total_population(pyramid);
  if (!(total > 0.0)) {
    throw UndefinedQuantity("median age undefined for an empty pyramid");
  }
  const double half = 0.5 * total;
  double below = 0.0;
  for (std::size_t x = 0; x < pyramid.num_groups(); ++x) {
    const double here = pyramid.female()[x] + pyramid.male()[x];
    if (here > 0.0 && below + here >= half) {
      return pyramid.group_start_age(x) + pyramid.age_width() * (half - below) / here;
    }
    below += here;
  }
  return pyramid.group_start_age(pyramid.num_groups() - 1);
}

double spectral_radius(const Eigen::MatrixXd& matrix) {
  const Eigen::EigenSolver<Eigen::MatrixXd> solver(matrix, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace popproj
