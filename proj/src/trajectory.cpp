#include "popproj/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <fmt/format.h>

#include "popproj/chain_store.hpp"
#include "popproj/csv.hpp"

namespace popproj::traj {

void TrajectorySet::validate() const {
  if (values.empty()) throw InvalidInput(fmt::format("{}: no trajectories", indicator));
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].size() != period_labels.size()) {
      throw InvalidInput(fmt::format("{}: trajectory {} has {} values for {} periods", indicator,
                                     i + 1, values[i].size(), period_labels.size()));
    }
    for (double v : values[i]) {
      if (!std::isfinite(v)) {
        throw InvalidInput(fmt::format("{}: trajectory {} has a non-finite value", indicator,
                                       i + 1));
      }
    }
  }
}

void FertilityAgePattern::validate() const {
  if (proportions.empty()) throw InvalidInput("fertility age pattern is empty");
  if (age_width <= 0 || first_age < 0 || first_age % age_width != 0) {
    throw InvalidInput("fertility pattern must start on an age-group boundary");
  }
  double total = 0.0;
  for (double p : proportions) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw InvalidInput("fertility pattern proportions must be non-negative");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidInput(fmt::format("fertility pattern proportions sum to {}, expected 1", total));
  }
}

std::vector<double> tfr_to_asfr(double tfr, const FertilityAgePattern& pattern) {
  pattern.validate();
  if (!(tfr >= 0.0) || !std::isfinite(tfr)) {
    throw InvalidInput(fmt::format("TFR must be finite and non-negative, got {}", tfr));
  }
  std::vector<double> asfr;
  asfr.reserve(pattern.proportions.size());
  for (double p : pattern.proportions) asfr.push_back(tfr * p / pattern.age_width);
  return asfr;
}

FertilityAgePattern interpolate_pattern(const FertilityAgePattern& start,
                                        const FertilityAgePattern& ultimate, int period,
                                        int convergence_periods) {
  if (start.first_age != ultimate.first_age || start.age_width != ultimate.age_width ||
      start.proportions.size() != ultimate.proportions.size()) {
    throw InvalidInput("starting and ultimate fertility patterns cover different ages");
  }
  const double w = convergence_periods <= 0
                       ? 1.0
                       : std::min(1.0, static_cast<double>(period) / convergence_periods);
  if (w >= 1.0) return ultimate;
  FertilityAgePattern out = start;
  for (std::size_t i = 0; i < out.proportions.size(); ++i) {
    out.proportions[i] = (1.0 - w) * start.proportions[i] + w * ultimate.proportions[i];
  }
  const double total = std::accumulate(out.proportions.begin(), out.proportions.end(), 0.0);
  for (double& p : out.proportions) p /= total;
  return out;
}

PeriodSchedules build_period_schedules(const ScheduleInputs& in) {
  if (!in.pattern || !in.standard_female || !in.standard_male) {
    throw InvalidInput("schedule inputs need a fertility pattern and both standard tables");
  }
  const std::size_t n = in.age_groups;
  if (in.standard_female->lx.size() != n || in.standard_male->lx.size() != n) {
    throw InvalidInput(fmt::format("standard life tables must have {} age groups", n));
  }
  const int k = in.pattern->age_width;
  const auto female = lt::e0_to_survival(in.e0_female, *in.standard_female);
  const auto male = lt::e0_to_survival(in.e0_male, *in.standard_male);

  std::vector<double> fert(n, 0.0);
  const auto asfr = tfr_to_asfr(in.tfr, *in.pattern);
  const std::size_t first = in.pattern->first_group();
  if (first + asfr.size() > n) {
    throw InvalidInput("fertility pattern extends beyond the last age group");
  }
  std::copy(asfr.begin(), asfr.end(), fert.begin() + static_cast<std::ptrdiff_t>(first));

  PeriodSchedules out{VitalSchedule::zeros(n), VitalSchedule::zeros(n)};
  out.female.survival = female.survival;
  out.male.survival = male.survival;
  out.female.birth_survival = female.birth_survival;
  out.male.birth_survival = male.birth_survival;
  const double female_share = 1.0 / (1.0 + in.sex_ratio_at_birth);
  for (std::size_t x = 0; x < n; ++x) {
    const double next = x + 1 < n ? fert[x + 1] : 0.0;
    out.female.births_surviving[x] =
        female_share * female.birth_survival * 0.5 * k * (fert[x] + female.survival[x] * next);
  }
  if (in.migration) {
    if (in.migration->female.size() != n || in.migration->male.size() != n) {
      throw InvalidInput(fmt::format("migration must have {} age groups per sex", n));
    }
    out.female.net_migration = in.migration->female;
    out.male.net_migration = in.migration->male;
  }
  return out;
}

std::vector<std::string> point_labels(int base_year, int periods, int width) {
  std::vector<std::string> labels;
  for (int t = 0; t <= periods; ++t) labels.push_back(std::to_string(base_year + width * t));
  return labels;
}

std::vector<std::string> interval_labels(int base_year, int periods, int width) {
  std::vector<std::string> labels;
  for (int t = 0; t < periods; ++t) {
    labels.push_back(fmt::format("{}-{}", base_year + width * t, base_year + width * (t + 1)));
  }
  return labels;
}

ProjectionResult project_paths(const ProjectionInputs& in, std::span<const double> tfr,
                               std::span<const double> e0_female,
                               std::span<const double> e0_male) {
  const std::size_t horizon = tfr.size();
  if (horizon == 0 || e0_female.size() != horizon || e0_male.size() != horizon) {
    throw InvalidInput(fmt::format("TFR and e0 paths must share a positive length ({}, {}, {})",
                                   tfr.size(), e0_female.size(), e0_male.size()));
  }
  if (!in.migration.empty() && in.migration.size() < horizon) {
    throw InvalidInput(fmt::format("migration covers {} periods, projection needs {}",
                                   in.migration.size(), horizon));
  }
  std::vector<PeriodSchedules> schedules;
  schedules.reserve(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    for (double v : {tfr[t], e0_female[t], e0_male[t]}) {
      if (!std::isfinite(v)) throw InvalidInput("projection inputs contain a non-finite value");
    }
    FertilityAgePattern pattern =
        in.ultimate_pattern ? interpolate_pattern(in.pattern, *in.ultimate_pattern,
                                                  static_cast<int>(t) + 1,
                                                  in.pattern_convergence_periods)
                            : in.pattern;
    ScheduleInputs s;
    s.tfr = tfr[t];
    s.e0_female = e0_female[t];
    s.e0_male = e0_male[t];
    s.pattern = &pattern;
    s.standard_female = &in.standard_female;
    s.standard_male = &in.standard_male;
    s.migration = in.migration.empty() ? nullptr : &in.migration[t];
    s.age_groups = in.base.num_groups();
    s.sex_ratio_at_birth = in.sex_ratio_at_birth;
    schedules.push_back(build_period_schedules(s));
  }
  const auto labels =
      point_labels(in.base_year, static_cast<int>(horizon), in.base.age_width());
  return project_horizon(in.base, schedules, static_cast<int>(horizon), in.sex_ratio_at_birth,
                         labels);
}

ProjectionOutput run_probabilistic_projection(const ProjectionInputs& in) {
  const std::size_t n = in.tfr.size();
  if (n == 0) throw InvalidInput("no trajectories to project");
  if (in.e0_female.size() != n || in.e0_male.size() != n) {
    throw InvalidInput(fmt::format(
        "trajectory counts differ: {} TFR, {} female e0, {} male e0", n, in.e0_female.size(),
        in.e0_male.size()));
  }
  const std::size_t horizon = in.tfr[0].size();
  const auto points = point_labels(in.base_year, static_cast<int>(horizon), in.base.age_width());
  const auto periods =
      interval_labels(in.base_year, static_cast<int>(horizon), in.base.age_width());

  ProjectionOutput out;
  auto make = [&](const std::string& name, const std::vector<std::string>& labels) {
    TrajectorySet set;
    set.indicator = name;
    set.period_labels = labels;
    set.values.reserve(n);
    out.indicators.emplace(name, std::move(set));
  };
  make("tfr", periods);
  make("e0_female", periods);
  make("e0_male", periods);
  make("total_population", points);
  make("psr", points);
  make("median_age", points);

  for (std::size_t i = 0; i < n; ++i) {
    if (in.tfr[i].size() != horizon || in.e0_female[i].size() != horizon ||
        in.e0_male[i].size() != horizon) {
      throw InvalidInput(fmt::format("trajectory {} has a different horizon", i + 1));
    }
    const auto result = project_paths(in, in.tfr[i], in.e0_female[i], in.e0_male[i]);
    out.clamped_cells += result.clamped_cells;
    std::vector<double> total, psr, median;
    for (const auto& p : result.pyramids) {
      total.push_back(total_population(p));
      psr.push_back(potential_support_ratio(p));
      median.push_back(median_age(p));
    }
    out.indicators["tfr"].values.push_back(in.tfr[i]);
    out.indicators["e0_female"].values.push_back(in.e0_female[i]);
    out.indicators["e0_male"].values.push_back(in.e0_male[i]);
    out.indicators["total_population"].values.push_back(std::move(total));
    out.indicators["psr"].values.push_back(std::move(psr));
    out.indicators["median_age"].values.push_back(std::move(median));
  }
  return out;
}

double empirical_quantile(std::vector<double> sample, double p) {
  if (sample.empty()) throw InvalidInput("quantile of an empty sample");
  if (!(p > 0.0 && p < 1.0)) throw InvalidInput(fmt::format("probability {} outside (0, 1)", p));
  std::sort(sample.begin(), sample.end());
  const double h = static_cast<double>(sample.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sample.size()) return sample.back();
  return sample[lo] + (h - static_cast<double>(lo)) * (sample[lo + 1] - sample[lo]);
}

QuantileTable quantile_summary(const TrajectorySet& set, const std::vector<double>& probs) {
  set.validate();
  for (double p : probs) {
    if (!(p > 0.0 && p < 1.0)) throw InvalidInput(fmt::format("probability {} outside (0, 1)", p));
  }
  QuantileTable table;
  table.indicator = set.indicator;
  table.probs = probs;
  table.period_labels = set.period_labels;
  std::vector<double> column(set.trajectories());
  for (std::size_t t = 0; t < set.periods(); ++t) {
    for (std::size_t i = 0; i < set.trajectories(); ++i) column[i] = set.values[i][t];
    std::vector<double> row;
    for (double p : probs) row.push_back(empirical_quantile(column, p));
    table.values.push_back(std::move(row));
  }
  return table;
}

void write_trajectories(std::ostream& out, std::span<const TrajectorySet> sets) {
  out << "indicator,trajectory_id,period,value\n";
  for (const auto& set : sets) {
    for (std::size_t i = 0; i < set.trajectories(); ++i) {
      for (std::size_t t = 0; t < set.periods(); ++t) {
        out << csv::escape(set.indicator) << ',' << i + 1 << ',' << csv::escape(set.period_labels[t])
            << ',' << mcmc::format_double(set.values[i][t]) << '\n';
      }
    }
  }
}

std::vector<TrajectorySet> read_trajectories(std::istream& in, const std::string& source) {
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const auto table = csv::parse(buffer.str(), source);
  const auto c_ind = table.column("indicator");
  const auto c_id = table.column("trajectory_id");
  const auto c_period = table.column("period");
  const auto c_value = table.column("value");
  std::vector<TrajectorySet> sets;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& name = table.text(r, c_ind);
    auto it = std::find_if(sets.begin(), sets.end(),
                           [&](const TrajectorySet& s) { return s.indicator == name; });
    if (it == sets.end()) {
      sets.push_back(TrajectorySet{name, {}, {}});
      it = sets.end() - 1;
    }
    const long id = table.integer(r, c_id);
    if (id < 1) throw csv::ParseError(source, table.line_numbers[r], "trajectory_id", "must be >= 1");
    const auto index = static_cast<std::size_t>(id - 1);
    const auto& label = table.text(r, c_period);
    auto pos = std::find(it->period_labels.begin(), it->period_labels.end(), label);
    if (pos == it->period_labels.end()) {
      if (index != 0) {
        throw csv::ParseError(source, table.line_numbers[r], "period",
                              "period first seen outside trajectory 1");
      }
      it->period_labels.push_back(label);
      pos = it->period_labels.end() - 1;
    }
    const auto t = static_cast<std::size_t>(pos - it->period_labels.begin());
    if (it->values.size() <= index) it->values.resize(index + 1);
    auto& row = it->values[index];
    if (row.size() != t) {
      throw csv::ParseError(source, table.line_numbers[r], "period", "rows out of order");
    }
    row.push_back(table.number(r, c_value));
  }
  for (const auto& s : sets) s.validate();
  return sets;
}

void write_quantiles(std::ostream& out, std::span<const QuantileTable> tables) {
  if (tables.empty()) return;
  const auto& probs = tables[0].probs;
  out << "indicator,period";
  for (double p : probs) out << ",p" << fmt::format("{}", p);
  out << '\n';
  for (const auto& table : tables) {
    if (table.probs != probs) throw InvalidInput("quantile tables use different probabilities");
    for (std::size_t t = 0; t < table.period_labels.size(); ++t) {
      out << csv::escape(table.indicator) << ',' << csv::escape(table.period_labels[t]);
      for (double v : table.values[t]) out << ',' << mcmc::format_double(v);
      out << '\n';
    }
  }
}

std::vector<QuantileTable> read_quantiles(std::istream& in, const std::string& source) {
  std::ostringstream buffer;
  buffer << in.rdbuf();
  const auto table = csv::parse(buffer.str(), source);
  const auto c_ind = table.column("indicator");
  const auto c_period = table.column("period");
  std::vector<double> probs;
  std::vector<std::size_t> prob_columns;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const auto& h = table.header[c];
    if (h.size() > 1 && h[0] == 'p' && c != c_period) {
      probs.push_back(std::stod(h.substr(1)));
      prob_columns.push_back(c);
    }
  }
  std::vector<QuantileTable> tables;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& name = table.text(r, c_ind);
    if (tables.empty() || tables.back().indicator != name) {
      tables.push_back(QuantileTable{name, probs, {}, {}});
    }
    tables.back().period_labels.push_back(table.text(r, c_period));
    std::vector<double> row;
    for (auto c : prob_columns) row.push_back(table.number(r, c));
    tables.back().values.push_back(std::move(row));
  }
  return tables;
}

}  // namespace popproj::traj
