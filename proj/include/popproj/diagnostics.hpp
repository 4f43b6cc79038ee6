#pragma once

#include <span>
#include <string>
#include <vector>

#include "popproj/chain_store.hpp"

namespace popproj::mcmc {

inline constexpr double kRhatThreshold = 1.1;

/// Potential scale reduction of equal-length chains of one scalar:
/// sqrt((W + B/n) / W) with W the mean within-chain variance (divisor n)
/// and B/n the variance of the chain means. Identical chains give exactly 1;
/// a constant scalar gives 1.
double potential_scale_reduction(std::span<const std::vector<double>> chains);

/// Multi-chain effective sample size using Geyer's initial monotone
/// positive sequence on the combined autocorrelations.
double effective_sample_size(std::span<const std::vector<double>> chains);

struct ScalarDiagnostic {
  std::string name;
  double rhat = 1.0;
  double ess = 0.0;
  bool flagged = false;
};

struct DiagnosticsReport {
  std::vector<ScalarDiagnostic> scalars;
  std::size_t chains = 0;
  std::size_t draws_per_chain = 0;
  double threshold = kRhatThreshold;
  /// Only one chain: R-hat comes from its two halves and is a weaker check.
  bool single_chain = false;
  bool any_flagged = false;

  std::string to_text() const;
};

/// Per-scalar R-hat and ESS over chains of the same model and length.
DiagnosticsReport diagnostics(std::span<const ChainStore> chains,
                              double threshold = kRhatThreshold);

}  // namespace popproj::mcmc
