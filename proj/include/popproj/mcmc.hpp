#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "popproj/chain_store.hpp"
#include "popproj/distributions.hpp"

namespace popproj::mcmc {

struct Interval {
  double lo = kNegInf;
  double hi = kInf;

  bool contains(double x) const { return x >= lo && x <= hi; }
};

enum class UpdateGroup { kCountry, kWorld };

/// A named group of coordinates updated together (country) or one at a
/// time (world). Values stay inside `support`.
struct ParameterBlock {
  std::string name;
  std::vector<std::string> coordinates;
  std::vector<double> values;
  std::vector<Interval> support;
  /// Initial random-walk sd per coordinate.
  std::vector<double> proposal_scale;
  UpdateGroup group = UpdateGroup::kCountry;

  bool within_support() const;
  /// Column name of coordinate i: "<block>.<coordinate>".
  std::string column(std::size_t i) const { return name + "." + coordinates[i]; }
};

/// Log density of a blocked parameter vector, up to an additive constant.
class TargetDensity {
 public:
  virtual ~TargetDensity() = default;

  virtual std::string name() const = 0;
  virtual std::vector<ParameterBlock> initial_blocks() const = 0;
  virtual double log_density(std::span<const ParameterBlock> blocks) const = 0;

  /// Sum of every term that involves block `b`. The difference of this
  /// quantity before and after a move of block `b` must equal the difference
  /// of log_density. The default evaluates the whole density.
  virtual double block_log_density(std::span<const ParameterBlock> blocks, std::size_t b) const {
    (void)b;
    return log_density(blocks);
  }
};

struct ChainState {
  long iteration = 0;
  std::vector<ParameterBlock> blocks;
  double log_density = 0.0;
  /// One stream per block, so block updates are reproducible in any order.
  std::vector<Rng> rngs;
};

/// Starts a chain at the target's initial blocks. Throws InvalidInput when
/// the initial density is not finite.
ChainState initialize_chain(const TargetDensity& target, std::uint64_t seed, int chain_id);

struct StepResult {
  bool accepted = false;
  bool nan_target = false;
};

/// One Metropolis move of block `block`: a Gaussian random walk on all its
/// coordinates (or only `coordinate` when given) reflected into the support,
/// accepted with probability min(1, exp(delta log density)). A rejected move
/// leaves the state untouched; NaN densities count as -inf.
StepResult mh_step(ChainState& state, std::size_t block, const TargetDensity& target,
                   std::span<const double> proposal_scale, Rng& rng,
                   std::optional<std::size_t> coordinate = std::nullopt);

struct SamplerSettings {
  long iterations = 60000;
  long burn_in = 10000;
  long thin = 10;
  std::uint64_t seed = 1;
  int chain_id = 1;
  double adapt_rate = 0.01;
  double target_acceptance = 0.3;
  long revalidate_every = 1000;

  void validate() const;
};

struct ChainRun {
  ChainStore store;
  ChainState final_state;
  /// Acceptance rate after burn-in per block (world blocks: averaged over
  /// coordinates).
  std::vector<double> acceptance;
  /// Proposal sds in force after burn-in, per block and coordinate.
  std::vector<std::vector<double>> frozen_scales;
  long nan_evaluations = 0;
};

/// Runs one chain: each iteration sweeps every country block jointly, then
/// every world coordinate. Proposal scales adapt during burn-in only. Kept
/// draws are appended to `writer` when one is given.
ChainRun run_chain(const TargetDensity& target, const SamplerSettings& settings,
                   const ChainMetadata& metadata, ChainWriter* writer = nullptr);

/// Re-evaluates the target and compares with the cached value. Throws
/// std::logic_error when they disagree beyond 1e-8 relative.
void revalidate(const ChainState& state, const TargetDensity& target);

// ---------------------------------------------------------------------------

struct PosteriorSample {
  std::size_t chain = 0;   // index into the stores passed in
  std::size_t row = 0;     // row within that chain
  std::size_t provenance = 0;  // global index over pooled draws
  std::vector<double> values;
};

inline constexpr std::size_t kDefaultTrajectories = 2000;

/// Resamples pooled stored draws. With replacement disabled `n` may not
/// exceed the pool, and n == pool size gives a permutation.
std::vector<PosteriorSample> posterior_predictive_draws(std::span<const ChainStore> stores,
                                                        std::size_t n, Rng& rng,
                                                        bool with_replacement = true);

}  // namespace popproj::mcmc
