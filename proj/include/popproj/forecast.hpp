#pragma once

#include <optional>
#include <string>
#include <vector>

#include "popproj/chain_store.hpp"
#include "popproj/e0_model.hpp"
#include "popproj/mcmc.hpp"
#include "popproj/tfr_model.hpp"

namespace popproj::forecast {

/// Everything needed to draw TFR parameters for any country. Countries
/// missing from the chains get parameters drawn from the world
/// distribution of the same posterior draw.
struct TfrPosterior {
  std::vector<mcmc::ChainStore> phase2;  // tfr-phase2 chains; may be empty
  std::vector<mcmc::ChainStore> phase3;  // tfr-phase3-hier chains; may be empty
  /// Used when `phase3` is empty: rho and sigma drawn from the asymptotic
  /// normal around the estimate, mu fixed.
  std::optional<tfr::Phase3Mle> phase3_mle;
};

struct E0Posterior {
  std::vector<mcmc::ChainStore> chains;  // e0 chains
  e0::GapParams gap;
};

/// Ids of the stored draws behind one trajectory; -1 when unused.
struct Provenance {
  long phase2 = -1;
  long phase3 = -1;
  long e0 = -1;
};

struct TfrPaths {
  std::vector<std::vector<double>> values;  // trajectory x period
  std::vector<Provenance> provenance;
};

struct E0Paths {
  std::vector<std::vector<double>> female;
  std::vector<std::vector<double>> male;
  std::vector<long> provenance;
};

/// Picks n stored draws: a permutation prefix when the pool is large
/// enough, resampling with replacement otherwise.
std::vector<mcmc::PosteriorSample> pick_draws(const std::vector<mcmc::ChainStore>& stores,
                                              std::size_t n, Rng& rng);

/// Country parameters from one stored draw, or from its world
/// distribution when the country was not part of the fit.
tfr::PhaseIIParams phase2_params(const std::vector<std::string>& columns,
                                 const std::vector<double>& row, const std::string& country,
                                 const tfr::Phase2Config& config, Rng& rng);
tfr::TfrDraw phase3_params(const std::vector<std::string>& columns,
                           const std::vector<double>& row, const std::string& country, Rng& rng);
e0::DoubleLogisticParams e0_params(const std::vector<std::string>& columns,
                                   const std::vector<double>& row, const std::string& country,
                                   const e0::E0Config& config, Rng& rng);
tfr::TfrDraw phase3_from_mle(const tfr::Phase3Mle& mle, Rng& rng);

/// n TFR trajectories for one classified series.
TfrPaths sample_tfr_paths(const tfr::TfrSeries& series, const TfrPosterior& posterior,
                          std::size_t n, int horizon, Rng& rng,
                          const tfr::TfrSimulationConfig& config);

/// n female and male e0 trajectories for one series.
E0Paths sample_e0_paths(const e0::E0Series& series, const E0Posterior& posterior,
                        std::size_t n, int horizon, Rng& rng,
                        const e0::E0SimulationConfig& config);

}  // namespace popproj::forecast
