#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "popproj/demography.hpp"
#include "popproj/e0_model.hpp"
#include "popproj/tfr_model.hpp"

namespace popproj::cfg {

/// Invalid configuration; `path` is the dotted field path ("mcmc.thin").
class ConfigError : public InvalidInput {
 public:
  ConfigError(std::string path, const std::string& message);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

inline const std::vector<std::string> kModels{"tfr-phase2", "tfr-phase3-fixed", "tfr-phase3-hier",
                                              "e0", "gap"};

struct McmcConfig {
  int chains = 3;
  long iterations = 60000;
  long burn_in = 10000;
  long thin = 10;
  double adapt_rate = 0.01;
  double target_acceptance = 0.3;
  long revalidate_every = 1000;
  double rhat_threshold = 1.1;

  bool operator==(const McmcConfig&) const = default;
};

struct SimulationConfig {
  std::size_t n_trajectories = 2000;
  int horizon = 18;
  std::uint64_t seed = 1;
  /// "sample": one trajectory per posterior draw. "median": a single
  /// trajectory from the pointwise medians of the sampled TFR and e0 paths.
  std::string mode = "sample";
  double tfr_floor = 0.5;
  bool allow_phase3_switch = true;
  double sex_ratio_at_birth = kDefaultSexRatioAtBirth;
  int pattern_convergence_periods = 0;

  bool operator==(const SimulationConfig&) const = default;
};

struct FileConfig {
  std::string tfr;
  std::string e0;
  std::string population;
  std::string migration;
  std::string fertility_pattern;
  std::string ultimate_fertility_pattern;
  std::string life_table;
  std::string phase2_chains;
  std::string phase3_chains;
  std::string e0_chains;
  std::string chains;  // read by diagnose

  bool operator==(const FileConfig&) const = default;
};

struct TfrConfig {
  tfr::PhaseRule rule;
  tfr::Phase2Config phase2;
  double phase3_mu = tfr::kReplacementTfr;
  tfr::Phase3Bounds phase3_bounds;

  bool operator==(const TfrConfig&) const;
};

struct E0ModelConfig {
  e0::E0Config model;
  e0::GapParams gap;
  /// When set, the projection uses these gap coefficients instead of
  /// fitting them to the e0 input.
  std::optional<std::array<double, e0::kGapBetaSize>> gap_beta;

  bool operator==(const E0ModelConfig&) const;
};

struct ValidateConfig {
  /// "holdout": refit on real data before `holdout_year`.
  /// "self-consistency": simulate data from the model, then refit.
  std::string mode = "holdout";
  int holdout_year = 0;
  int replications = 50;
  int countries = 21;
  int fit_periods = 4;
  int holdout_periods = 4;
  int start_year = 1990;
  /// Generator for self-consistency; replaced by the MLE when a TFR file is
  /// configured.
  double generator_rho = 0.89;
  double generator_sigma = 0.10;
  double initial_low = 1.3;
  double initial_high = 1.9;

  bool operator==(const ValidateConfig&) const = default;
};

struct RunConfig {
  std::string model = "tfr-phase3-fixed";
  McmcConfig mcmc;
  SimulationConfig simulation;
  FileConfig files;
  TfrConfig tfr;
  E0ModelConfig e0;
  ValidateConfig validate;

  bool operator==(const RunConfig&) const = default;
};

/// Pretty JSON with every field, defaults included.
std::string serialize(const RunConfig& config);

/// Reads JSON; absent fields keep their defaults. Unknown fields, wrong
/// types and out-of-range values throw ConfigError.
RunConfig parse(const std::string& text);

RunConfig load(const std::filesystem::path& path);

/// Numeric range checks; throws ConfigError naming the field.
void check_ranges(const RunConfig& config);

/// Relative file paths are taken relative to `base`.
void resolve_paths(RunConfig& config, const std::filesystem::path& base);

/// Throws ConfigError when a listed file is missing.
void require_files(const RunConfig& config, const std::vector<std::string>& fields);

/// FNV-1a 64 over the bytes, as 16 hex digits.
std::string fnv1a_hex(const std::string& bytes);

/// Hash of the whole serialized config.
std::string config_hash(const RunConfig& config);

/// Hash of what determines a model's posterior: model name, MCMC settings
/// and that model's constants. Stored in chain metadata.
std::string model_hash(const RunConfig& config, const std::string& model);

}  // namespace popproj::cfg
