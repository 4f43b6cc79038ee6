#include "popproj/inputs.hpp"

#include <algorithm>
#include <cctype>
#include <ostream>
#include <set>
#include <tuple>

#include <fmt/format.h>

#include "popproj/chain_store.hpp"
#include "popproj/csv.hpp"

namespace popproj::io {

namespace {

constexpr int kGrid = 5;

struct Cursor {
  const csv::Table& table;
  std::size_t row;

  [[noreturn]] void fail(const std::string& column, const std::string& message) const {
    throw csv::ParseError(table.source, table.line_numbers[row], column, message);
  }
  std::size_t line() const { return table.line_numbers[row]; }
};

int grid_year(const Cursor& c, std::size_t column, const std::string& name) {
  const long v = c.table.integer(c.row, column);
  if (v % kGrid != 0) {
    c.fail(name, fmt::format("{} is not on the 5-year grid", v));
  }
  return static_cast<int>(v);
}

int age_start(const Cursor& c, std::size_t column) {
  const long v = c.table.integer(c.row, column);
  if (v < 0 || v % kGrid != 0) {
    c.fail("age_group_start", fmt::format("{} is not a 5-year age-group start", v));
  }
  return static_cast<int>(v);
}

Sex parse_sex(const Cursor& c, std::size_t column) {
  std::string s = c.table.text(c.row, column);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (s == "female" || s == "f") return Sex::kFemale;
  if (s == "male" || s == "m") return Sex::kMale;
  c.fail("sex", fmt::format("'{}' is not female or male", c.table.text(c.row, column)));
}

const char* sex_name(Sex s) { return s == Sex::kFemale ? "female" : "male"; }

template <typename Key>
void check_unique(std::map<Key, std::size_t>& seen, const Key& key, const Cursor& c,
                  const std::string& column, const std::string& what) {
  const auto [it, inserted] = seen.emplace(key, c.line());
  if (!inserted) c.fail(column, fmt::format("duplicate {}, first given on row {}", what, it->second));
}

void check_contiguous(const std::vector<int>& years, const std::vector<std::size_t>& lines,
                      const csv::Table& table, const std::string& country) {
  for (std::size_t i = 1; i < years.size(); ++i) {
    if (years[i] != years[i - 1] + kGrid) {
      throw csv::ParseError(table.source, lines[i], "period_start",
                            fmt::format("{}: period {} does not follow {}; series must be "
                                        "contiguous",
                                        country, years[i], years[i - 1]));
    }
  }
}

// Age-indexed counts of both sexes for one (country, period), checked for a
// contiguous grid from age 0.
struct AgeCounts {
  std::map<int, double> female;
  std::map<int, double> male;
  std::size_t first_line = 0;

  std::pair<std::vector<double>, std::vector<double>> vectors(const csv::Table& table,
                                                              const std::string& what) const {
    std::vector<double> f, m;
    int expected = 0;
    for (const auto& [age, v] : female) {
      if (age != expected) {
        throw csv::ParseError(table.source, first_line, "age_group_start",
                              fmt::format("{}: female age groups skip age {}", what, expected));
      }
      f.push_back(v);
      expected += kGrid;
    }
    expected = 0;
    for (const auto& [age, v] : male) {
      if (age != expected) {
        throw csv::ParseError(table.source, first_line, "age_group_start",
                              fmt::format("{}: male age groups skip age {}", what, expected));
      }
      m.push_back(v);
      expected += kGrid;
    }
    if (f.size() != m.size()) {
      throw csv::ParseError(table.source, first_line, "age_group_start",
                            fmt::format("{}: {} female but {} male age groups", what, f.size(),
                                        m.size()));
    }
    return {f, m};
  }
};

std::map<std::string, std::map<int, AgeCounts>> read_age_counts(const csv::Table& table,
                                                                 bool allow_negative) {
  table.require_columns({"country_id", "period_start", "sex", "age_group_start", "count"});
  const auto c_id = table.column("country_id");
  const auto c_period = table.column("period_start");
  const auto c_sex = table.column("sex");
  const auto c_age = table.column("age_group_start");
  const auto c_count = table.column("count");
  std::map<std::tuple<std::string, int, int, int>, std::size_t> seen;
  std::map<std::string, std::map<int, AgeCounts>> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const Cursor c{table, r};
    const auto& id = table.text(r, c_id);
    if (id.empty()) c.fail("country_id", "empty country id");
    const int period = grid_year(c, c_period, "period_start");
    const Sex sex = parse_sex(c, c_sex);
    const int age = age_start(c, c_age);
    const double count = table.number(r, c_count);
    if (!allow_negative && count < 0.0) c.fail("count", fmt::format("negative count {}", count));
    check_unique(seen, std::make_tuple(id, period, static_cast<int>(sex), age), c, "sex",
                 "(country_id, period_start, sex, age_group_start) key");
    auto& cell = out[id][period];
    if (cell.first_line == 0) cell.first_line = c.line();
    (sex == Sex::kFemale ? cell.female : cell.male)[age] = count;
  }
  return out;
}

}  // namespace

std::vector<tfr::TfrSeries> read_tfr(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  table.require_columns({"country_id", "period_start", "tfr"});
  const auto c_id = table.column("country_id");
  const auto c_period = table.column("period_start");
  const auto c_tfr = table.column("tfr");
  std::map<std::pair<std::string, int>, std::size_t> seen;
  std::map<std::string, std::map<int, std::pair<double, std::size_t>>> by_country;
  std::vector<std::string> order;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const Cursor c{table, r};
    const auto& id = table.text(r, c_id);
    if (id.empty()) c.fail("country_id", "empty country id");
    const int period = grid_year(c, c_period, "period_start");
    const double value = table.number(r, c_tfr);
    if (!(value > 0.0)) c.fail("tfr", fmt::format("TFR must be positive, got {}", value));
    check_unique(seen, std::make_pair(id, period), c, "period_start",
                 "(country_id, period_start) key");
    if (!by_country.count(id)) order.push_back(id);
    by_country[id][period] = {value, c.line()};
  }
  std::vector<tfr::TfrSeries> out;
  for (const auto& id : order) {
    tfr::TfrSeries s;
    s.country_id = id;
    std::vector<std::size_t> lines;
    for (const auto& [year, v] : by_country[id]) {
      s.period_start_years.push_back(year);
      s.values.push_back(v.first);
      lines.push_back(v.second);
    }
    check_contiguous(s.period_start_years, lines, table, id);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<e0::E0Series> read_e0(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  table.require_columns({"country_id", "period_start", "sex", "e0"});
  const auto c_id = table.column("country_id");
  const auto c_period = table.column("period_start");
  const auto c_sex = table.column("sex");
  const auto c_e0 = table.column("e0");
  std::map<std::tuple<std::string, int, int>, std::size_t> seen;
  struct Cell {
    double female = -1.0;
    double male = -1.0;
    std::size_t line = 0;
  };
  std::map<std::string, std::map<int, Cell>> by_country;
  std::vector<std::string> order;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const Cursor c{table, r};
    const auto& id = table.text(r, c_id);
    if (id.empty()) c.fail("country_id", "empty country id");
    const int period = grid_year(c, c_period, "period_start");
    const Sex sex = parse_sex(c, c_sex);
    const double value = table.number(r, c_e0);
    if (!(value >= 15.0 && value <= 100.0)) {
      c.fail("e0", fmt::format("life expectancy {} outside [15, 100]", value));
    }
    check_unique(seen, std::make_tuple(id, period, static_cast<int>(sex)), c, "period_start",
                 "(country_id, period_start, sex) key");
    if (!by_country.count(id)) order.push_back(id);
    auto& cell = by_country[id][period];
    if (cell.line == 0) cell.line = c.line();
    (sex == Sex::kFemale ? cell.female : cell.male) = value;
  }
  std::vector<e0::E0Series> out;
  for (const auto& id : order) {
    e0::E0Series s;
    s.country_id = id;
    std::vector<std::size_t> lines;
    for (const auto& [year, cell] : by_country[id]) {
      if (cell.female < 0.0 || cell.male < 0.0) {
        throw csv::ParseError(table.source, cell.line, "sex",
                              fmt::format("{} {}: both sexes are required", id, year));
      }
      s.period_start_years.push_back(year);
      s.female.push_back(cell.female);
      s.male.push_back(cell.male);
      lines.push_back(cell.line);
    }
    check_contiguous(s.period_start_years, lines, table, id);
    out.push_back(std::move(s));
  }
  return out;
}

std::map<std::string, BasePopulation> read_population(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto counts = read_age_counts(table, false);
  std::map<std::string, BasePopulation> out;
  for (const auto& [id, periods] : counts) {
    if (periods.size() != 1) {
      const auto& second = std::next(periods.begin())->second;
      throw csv::ParseError(table.source, second.first_line, "period_start",
                            fmt::format("{}: population holds one base period per country", id));
    }
    const auto& [year, cell] = *periods.begin();
    auto [f, m] = cell.vectors(table, fmt::format("{} {}", id, year));
    if (f.size() < 3) {
      throw csv::ParseError(table.source, cell.first_line, "age_group_start",
                            fmt::format("{}: at least 3 age groups are required", id));
    }
    out.emplace(id, BasePopulation{year, AgePyramid(std::move(f), std::move(m),
                                                    std::to_string(year))});
  }
  return out;
}

std::map<std::string, MigrationSeries> read_migration(const std::filesystem::path& path) {
  const auto table = csv::read(path);
  const auto counts = read_age_counts(table, true);
  std::map<std::string, MigrationSeries> out;
  for (const auto& [id, periods] : counts) {
    MigrationSeries series;
    series.first_period_start = periods.begin()->first;
    std::vector<int> years;
    std::vector<std::size_t> lines;
    for (const auto& [year, cell] : periods) {
      auto [f, m] = cell.vectors(table, fmt::format("{} {}", id, year));
      series.periods.push_back({std::move(f), std::move(m)});
      years.push_back(year);
      lines.push_back(cell.first_line);
    }
    check_contiguous(years, lines, table, id);
    out.emplace(id, std::move(series));
  }
  return out;
}

std::map<std::string, traj::FertilityAgePattern> read_fertility_patterns(
    const std::filesystem::path& path) {
  const auto table = csv::read(path);
  table.require_columns({"country_id", "age_group_start", "proportion"});
  const auto c_id = table.column("country_id");
  const auto c_age = table.column("age_group_start");
  const auto c_p = table.column("proportion");
  std::map<std::pair<std::string, int>, std::size_t> seen;
  std::map<std::string, std::map<int, double>> by_country;
  std::map<std::string, std::size_t> first_line;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const Cursor c{table, r};
    const auto& id = table.text(r, c_id);
    if (id.empty()) c.fail("country_id", "empty country id");
    const int age = age_start(c, c_age);
    const double p = table.number(r, c_p);
    if (p < 0.0) c.fail("proportion", fmt::format("negative proportion {}", p));
    check_unique(seen, std::make_pair(id, age), c, "age_group_start",
                 "(country_id, age_group_start) key");
    by_country[id][age] = p;
    first_line.emplace(id, c.line());
  }
  std::map<std::string, traj::FertilityAgePattern> out;
  for (const auto& [id, ages] : by_country) {
    traj::FertilityAgePattern pattern;
    pattern.first_age = ages.begin()->first;
    int expected = pattern.first_age;
    for (const auto& [age, p] : ages) {
      if (age != expected) {
        throw csv::ParseError(table.source, first_line[id], "age_group_start",
                              fmt::format("{}: fertility ages skip {}", id, expected));
      }
      pattern.proportions.push_back(p);
      expected += kGrid;
    }
    try {
      pattern.validate();
    } catch (const InvalidInput& e) {
      throw csv::ParseError(table.source, first_line[id], "proportion",
                            fmt::format("{}: {}", id, e.what()));
    }
    out.emplace(id, std::move(pattern));
  }
  return out;
}

std::pair<lt::StandardLifeTable, lt::StandardLifeTable> read_life_tables(
    const std::filesystem::path& path) {
  const auto table = csv::read(path);
  table.require_columns({"sex", "age_group_start", "lx"});
  const auto c_sex = table.column("sex");
  const auto c_age = table.column("age_group_start");
  const auto c_lx = table.column("lx");
  std::map<std::pair<int, int>, std::size_t> seen;
  std::map<int, double> female, male;
  std::size_t line = 0;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const Cursor c{table, r};
    const Sex sex = parse_sex(c, c_sex);
    const int age = age_start(c, c_age);
    const double lx = table.number(r, c_lx);
    check_unique(seen, std::make_pair(static_cast<int>(sex), age), c, "age_group_start",
                 "(sex, age_group_start) key");
    (sex == Sex::kFemale ? female : male)[age] = lx;
    if (line == 0) line = c.line();
  }
  auto build = [&](const std::map<int, double>& ages, Sex sex) {
    lt::StandardLifeTable t;
    int expected = 0;
    for (const auto& [age, lx] : ages) {
      if (age != expected) {
        throw csv::ParseError(table.source, line, "age_group_start",
                              fmt::format("{} life table skips age {}", sex_name(sex), expected));
      }
      t.lx.push_back(lx);
      expected += kGrid;
    }
    try {
      t.validate();
    } catch (const InvalidInput& e) {
      throw csv::ParseError(table.source, line, "lx", fmt::format("{}: {}", sex_name(sex), e.what()));
    }
    return t;
  };
  return {build(female, Sex::kFemale), build(male, Sex::kMale)};
}

InputTables parse_inputs(const cfg::FileConfig& files) {
  InputTables in;
  if (!files.tfr.empty()) in.tfr = read_tfr(files.tfr);
  if (!files.e0.empty()) in.e0 = read_e0(files.e0);
  if (!files.population.empty()) in.population = read_population(files.population);
  if (!files.migration.empty()) in.migration = read_migration(files.migration);
  if (!files.fertility_pattern.empty()) in.patterns = read_fertility_patterns(files.fertility_pattern);
  if (!files.ultimate_fertility_pattern.empty()) {
    in.ultimate_patterns = read_fertility_patterns(files.ultimate_fertility_pattern);
  }
  if (!files.life_table.empty()) {
    auto [f, m] = read_life_tables(files.life_table);
    in.standard_female = std::move(f);
    in.standard_male = std::move(m);
  }

  std::set<std::string> tfr_ids, e0_ids;
  for (const auto& s : in.tfr) tfr_ids.insert(s.country_id);
  for (const auto& s : in.e0) e0_ids.insert(s.country_id);
  for (const auto& [id, pop] : in.population) {
    if (!files.tfr.empty() && !tfr_ids.count(id)) {
      throw InvalidInput(fmt::format("{}: country {} has a population but no TFR series",
                                     files.population, id));
    }
    if (!files.e0.empty() && !e0_ids.count(id)) {
      throw InvalidInput(fmt::format("{}: country {} has a population but no e0 series",
                                     files.population, id));
    }
    if (!files.fertility_pattern.empty() && !in.patterns.count(id)) {
      throw InvalidInput(fmt::format("{}: country {} has a population but no fertility pattern",
                                     files.population, id));
    }
    if (in.standard_female && in.standard_female->lx.size() != pop.pyramid.num_groups()) {
      throw InvalidInput(fmt::format("{}: {} age groups, but the standard life table has {}",
                                     id, pop.pyramid.num_groups(),
                                     in.standard_female->lx.size()));
    }
    if (auto m = in.migration.find(id); m != in.migration.end()) {
      if (m->second.first_period_start != pop.base_year) {
        throw InvalidInput(fmt::format("{}: migration starts in {}, base year is {}", id,
                                       m->second.first_period_start, pop.base_year));
      }
      if (m->second.periods.front().female.size() != pop.pyramid.num_groups()) {
        throw InvalidInput(fmt::format("{}: migration and population age groups differ", id));
      }
    } else if (!files.migration.empty()) {
      in.warnings.push_back(fmt::format("{}: no migration rows, assuming zero net migration", id));
    }
  }
  for (const auto& [id, m] : in.migration) {
    if (!in.population.empty() && !in.population.count(id)) {
      in.warnings.push_back(fmt::format("{}: migration given for a country without a population",
                                        id));
    }
  }
  return in;
}

void write_tfr(std::ostream& out, const std::vector<tfr::TfrSeries>& series) {
  out << "country_id,period_start,tfr\n";
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      out << csv::escape(s.country_id) << ',' << s.period_start_years[i] << ','
          << mcmc::format_double(s.values[i]) << '\n';
    }
  }
}

void write_e0(std::ostream& out, const std::vector<e0::E0Series>& series) {
  out << "country_id,period_start,sex,e0\n";
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      out << csv::escape(s.country_id) << ',' << s.period_start_years[i] << ",female,"
          << mcmc::format_double(s.female[i]) << '\n';
      out << csv::escape(s.country_id) << ',' << s.period_start_years[i] << ",male,"
          << mcmc::format_double(s.male[i]) << '\n';
    }
  }
}

}  // namespace popproj::io
