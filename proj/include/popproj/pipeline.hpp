#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "popproj/config.hpp"
#include "popproj/forecast.hpp"
#include "popproj/inputs.hpp"
#include "popproj/mcmc.hpp"

namespace popproj::pipeline {

/// Target density of an MCMC model: tfr-phase2, tfr-phase3-hier or e0.
std::unique_ptr<mcmc::TargetDensity> make_target(const cfg::RunConfig& config,
                                                 const std::string& model,
                                                 const std::vector<tfr::TfrSeries>& tfr,
                                                 const std::vector<e0::E0Series>& e0);

bool is_mcmc_model(const std::string& model);

mcmc::SamplerSettings sampler_settings(const cfg::RunConfig& config, int chain_id);

/// Runs config.mcmc.chains chains in sequence. With `dir` set, each chain
/// is streamed to dir/chain_<id>.csv as it runs.
std::vector<mcmc::ChainStore> run_chains(const mcmc::TargetDensity& target,
                                         const cfg::RunConfig& config,
                                         const std::filesystem::path* dir = nullptr);

std::vector<tfr::TfrSeries> classified(std::vector<tfr::TfrSeries> series,
                                       const tfr::PhaseRule& rule);

tfr::TfrSimulationConfig tfr_simulation(const cfg::RunConfig& config, int first_period_start);
e0::E0SimulationConfig e0_simulation(const cfg::RunConfig& config);

/// Gap coefficients from the config when given, else fitted to `series`.
e0::GapParams gap_params(const cfg::RunConfig& config, const std::vector<e0::E0Series>& series);

// ---------------------------------------------------------------------------
// Calibration

struct Coverage {
  std::size_t inside80 = 0;
  std::size_t inside95 = 0;
  std::size_t total = 0;

  double rate80() const;
  double rate95() const;
  void add(const Coverage& other);
};

struct CalibrationReport {
  std::string model;
  std::string mode;
  std::size_t replications = 1;
  Coverage overall;
  std::map<std::string, Coverage> per_country;
  std::vector<std::string> warnings;

  std::string to_text() const;
  /// country,observations,coverage80,coverage95 with an "all" row last.
  std::string to_csv() const;
};

/// Coverage of the central 80% and 95% intervals of `paths` (trajectory x
/// period) for the observations `truth`.
Coverage interval_coverage(const std::vector<std::vector<double>>& paths,
                           const std::vector<double>& truth);

/// Refits on observations before validate.holdout_year and scores the
/// projections of the later observations.
CalibrationReport validate_holdout(const cfg::RunConfig& config, const io::InputTables& inputs);

/// Simulates Phase III data from the model, refits on the first
/// fit_periods periods and scores the next holdout_periods, repeated
/// validate.replications times.
CalibrationReport validate_self_consistency(const cfg::RunConfig& config,
                                            const std::vector<tfr::TfrSeries>& data);

}  // namespace popproj::pipeline
