#pragma once

#include <span>
#include <string>
#include <vector>

#include "popproj/e0_model.hpp"
#include "popproj/mcmc.hpp"
#include "popproj/tfr_model.hpp"

namespace popproj {

inline constexpr const char* kWorldBlock = "world";

/// Phase II double-logistic model. One block per country with Phase II
/// transitions (nabla1..nabla4, d) followed by the world block
/// (mean_* and sd_* for each component).
class Phase2Target : public mcmc::TargetDensity {
 public:
  Phase2Target(std::vector<tfr::TfrSeries> series, tfr::Phase2Config config);

  std::string name() const override { return "tfr-phase2"; }
  std::vector<mcmc::ParameterBlock> initial_blocks() const override;
  double log_density(std::span<const mcmc::ParameterBlock> blocks) const override;
  double block_log_density(std::span<const mcmc::ParameterBlock> blocks,
                           std::size_t b) const override;

  const std::vector<tfr::TfrSeries>& series() const { return series_; }

  static tfr::PhaseIIParams country_params(const mcmc::ParameterBlock& block);
  static tfr::PhaseIIWorld world_params(const mcmc::ParameterBlock& block);

 private:
  std::vector<tfr::TfrSeries> series_;
  tfr::Phase2Config config_;
};

/// Hierarchical Phase III AR(1): per-country (mu, rho) blocks and a world
/// block (mu_mean, mu_sd, rho_mean, rho_sd, sigma_eps).
class Phase3HierTarget : public mcmc::TargetDensity {
 public:
  explicit Phase3HierTarget(std::vector<tfr::TfrSeries> series, tfr::Phase3Bounds bounds = {});

  std::string name() const override { return "tfr-phase3-hier"; }
  std::vector<mcmc::ParameterBlock> initial_blocks() const override;
  double log_density(std::span<const mcmc::ParameterBlock> blocks) const override;
  double block_log_density(std::span<const mcmc::ParameterBlock> blocks,
                           std::size_t b) const override;

  const std::vector<tfr::TfrSeries>& series() const { return series_; }

  static tfr::Phase3Country country_params(const mcmc::ParameterBlock& block);
  static tfr::Phase3World world_params(const mcmc::ParameterBlock& block);

 private:
  std::vector<tfr::TfrSeries> series_;
  tfr::Phase3Bounds bounds_;
};

/// Female life expectancy double-logistic model: per-country theta blocks
/// (delta1..delta4, k, z) and a world block of means and spreads.
class E0Target : public mcmc::TargetDensity {
 public:
  E0Target(std::vector<e0::E0Series> series, e0::E0Config config);

  std::string name() const override { return "e0"; }
  std::vector<mcmc::ParameterBlock> initial_blocks() const override;
  double log_density(std::span<const mcmc::ParameterBlock> blocks) const override;
  double block_log_density(std::span<const mcmc::ParameterBlock> blocks,
                           std::size_t b) const override;

  const std::vector<e0::E0Series>& series() const { return series_; }

  static e0::DoubleLogisticParams country_params(const mcmc::ParameterBlock& block);
  static e0::E0World world_params(const mcmc::ParameterBlock& block);

 private:
  std::vector<e0::E0Series> series_;
  e0::E0Config config_;
};

/// Reads named scalars out of one stored draw.
class DrawView {
 public:
  DrawView(const std::vector<std::string>& columns, std::span<const double> row)
      : columns_(&columns), row_(row) {}

  bool has(const std::string& column) const;
  double at(const std::string& column) const;

  tfr::PhaseIIParams phase2(const std::string& country) const;
  tfr::PhaseIIWorld phase2_world() const;
  tfr::Phase3Country phase3(const std::string& country) const;
  tfr::Phase3World phase3_world() const;
  e0::DoubleLogisticParams e0(const std::string& country) const;
  e0::E0World e0_world() const;

 private:
  const std::vector<std::string>* columns_;
  std::span<const double> row_;
};

}  // namespace popproj
