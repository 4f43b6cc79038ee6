#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "popproj/config.hpp"
#include "popproj/demography.hpp"
#include "popproj/e0_model.hpp"
#include "popproj/life_table.hpp"
#include "popproj/tfr_model.hpp"
#include "popproj/trajectory.hpp"

namespace popproj::io {

struct BasePopulation {
  int base_year = 0;
  AgePyramid pyramid;
};

struct MigrationSeries {
  int first_period_start = 0;
  std::vector<traj::PeriodMigration> periods;
};

struct InputTables {
  std::vector<tfr::TfrSeries> tfr;
  std::vector<e0::E0Series> e0;
  std::map<std::string, BasePopulation> population;
  std::map<std::string, MigrationSeries> migration;
  std::map<std::string, traj::FertilityAgePattern> patterns;
  std::map<std::string, traj::FertilityAgePattern> ultimate_patterns;
  std::optional<lt::StandardLifeTable> standard_female;
  std::optional<lt::StandardLifeTable> standard_male;
  std::vector<std::string> warnings;
};

// Each reader throws csv::ParseError with file, row and column.

/// country_id,period_start,tfr
std::vector<tfr::TfrSeries> read_tfr(const std::filesystem::path& path);
/// country_id,period_start,sex,e0
std::vector<e0::E0Series> read_e0(const std::filesystem::path& path);
/// country_id,period_start,sex,age_group_start,count (one period per country)
std::map<std::string, BasePopulation> read_population(const std::filesystem::path& path);
/// Same columns as population; one or more contiguous periods per country.
std::map<std::string, MigrationSeries> read_migration(const std::filesystem::path& path);
/// country_id,age_group_start,proportion
std::map<std::string, traj::FertilityAgePattern> read_fertility_patterns(
    const std::filesystem::path& path);
/// sex,age_group_start,lx
std::pair<lt::StandardLifeTable, lt::StandardLifeTable> read_life_tables(
    const std::filesystem::path& path);

/// Reads every configured file (empty paths are skipped) and checks that
/// countries in the population table appear in the other configured tables.
InputTables parse_inputs(const cfg::FileConfig& files);

void write_tfr(std::ostream& out, const std::vector<tfr::TfrSeries>& series);
void write_e0(std::ostream& out, const std::vector<e0::E0Series>& series);

}  // namespace popproj::io
