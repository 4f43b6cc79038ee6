#include "popproj/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "popproj/demography.hpp"
#include "popproj/log.hpp"

namespace popproj::mcmc {

bool ParameterBlock::within_support() const {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!support[i].contains(values[i])) return false;
  }
  return true;
}

ChainState initialize_chain(const TargetDensity& target, std::uint64_t seed, int chain_id) {
  ChainState state;
  state.blocks = target.initial_blocks();
  for (const auto& block : state.blocks) {
    const std::size_t n = block.values.size();
    if (block.coordinates.size() != n || block.support.size() != n ||
        block.proposal_scale.size() != n) {
      throw InvalidInput(fmt::format("block '{}' has inconsistent coordinate arrays", block.name));
    }
    if (!block.within_support()) {
      throw InvalidInput(fmt::format("block '{}' starts outside its support", block.name));
    }
  }
  state.log_density = target.log_density(state.blocks);
  if (!std::isfinite(state.log_density)) {
    throw InvalidInput(fmt::format("{}: initial log density is not finite ({})", target.name(),
                                   state.log_density));
  }
  state.rngs.reserve(state.blocks.size());
  for (std::size_t b = 0; b < state.blocks.size(); ++b) {
    state.rngs.push_back(make_rng(seed, static_cast<std::uint64_t>(chain_id), b));
  }
  return state;
}

StepResult mh_step(ChainState& state, std::size_t block, const TargetDensity& target,
                   std::span<const double> proposal_scale, Rng& rng,
                   std::optional<std::size_t> coordinate) {
  auto& blk = state.blocks.at(block);
  const std::size_t n = blk.values.size();
  if (proposal_scale.size() != n) {
    throw InvalidInput(fmt::format("block '{}' needs {} proposal scales, got {}", blk.name, n,
                                   proposal_scale.size()));
  }
  const std::size_t first = coordinate ? *coordinate : 0;
  const std::size_t last = coordinate ? *coordinate + 1 : n;
  for (std::size_t i = first; i < last; ++i) {
    if (!(proposal_scale[i] > 0.0) || !std::isfinite(proposal_scale[i])) {
      throw InvalidInput(fmt::format("proposal scale for {} must be positive, got {}",
                                     blk.column(i), proposal_scale[i]));
    }
  }

  const double old_local = target.block_log_density(state.blocks, block);
  const std::vector<double> saved = blk.values;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = first; i < last; ++i) {
    const double proposed = blk.values[i] + proposal_scale[i] * normal(rng);
    blk.values[i] = reflect_into(proposed, blk.support[i].lo, blk.support[i].hi);
  }
  StepResult result;
  double new_local = target.block_log_density(state.blocks, block);
  if (std::isnan(new_local)) {
    result.nan_target = true;
    new_local = kNegInf;
  }
  const double delta = new_local - old_local;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  if (new_local != kNegInf && (delta >= 0.0 || std::log(u) < delta)) {
    state.log_density += delta;
    result.accepted = true;
  } else {
    blk.values = saved;
  }
  return result;
}

void SamplerSettings::validate() const {
  if (!(burn_in >= 0 && iterations > burn_in)) {
    throw InvalidInput(fmt::format("need iterations > burn_in >= 0 (got {} and {})", iterations,
                                   burn_in));
  }
  if (thin < 1) throw InvalidInput(fmt::format("thin must be >= 1, got {}", thin));
  if (!(adapt_rate >= 0.0)) throw InvalidInput("adaptation rate must be >= 0");
  if (!(target_acceptance > 0.0 && target_acceptance < 1.0)) {
    throw InvalidInput("target acceptance must lie in (0, 1)");
  }
}

void revalidate(const ChainState& state, const TargetDensity& target) {
  const double fresh = target.log_density(state.blocks);
  const double tolerance = 1e-8 * std::max(1.0, std::abs(fresh));
  if (!(std::abs(fresh - state.log_density) <= tolerance)) {
    throw std::logic_error(fmt::format(
        "{}: cached log density {} disagrees with fresh evaluation {} at iteration {}",
        target.name(), state.log_density, fresh, state.iteration));
  }
}

ChainRun run_chain(const TargetDensity& target, const SamplerSettings& settings,
                   const ChainMetadata& metadata, ChainWriter* writer) {
  settings.validate();
  ChainRun run;
  ChainState state = initialize_chain(target, settings.seed, settings.chain_id);

  std::vector<std::vector<double>> scales;
  std::vector<std::string> columns;
  for (const auto& block : state.blocks) {
    scales.push_back(block.proposal_scale);
    for (std::size_t i = 0; i < block.values.size(); ++i) columns.push_back(block.column(i));
  }

  run.store.metadata = metadata;
  run.store.metadata.seed = settings.seed;
  run.store.metadata.chain_id = settings.chain_id;
  run.store.metadata.iterations = settings.iterations;
  run.store.metadata.burn_in = settings.burn_in;
  run.store.metadata.thin = settings.thin;
  run.store.metadata.complete = false;
  run.store.columns = columns;

  const std::size_t n_blocks = state.blocks.size();
  std::vector<long> accepted(n_blocks, 0);
  std::vector<long> attempted(n_blocks, 0);
  std::vector<double> row;
  row.reserve(columns.size());

  auto adapt = [&](double& scale, bool hit) {
    scale *= std::exp(settings.adapt_rate * ((hit ? 1.0 : 0.0) - settings.target_acceptance));
  };

  for (long iter = 1; iter <= settings.iterations; ++iter) {
    const bool adapting = iter <= settings.burn_in;
    for (std::size_t b = 0; b < n_blocks; ++b) {
      if (state.blocks[b].group != UpdateGroup::kCountry) continue;
      const auto step = mh_step(state, b, target, scales[b], state.rngs[b]);
      run.nan_evaluations += step.nan_target ? 1 : 0;
      if (adapting) {
        for (double& s : scales[b]) adapt(s, step.accepted);
      } else {
        ++attempted[b];
        accepted[b] += step.accepted ? 1 : 0;
      }
    }
    for (std::size_t b = 0; b < n_blocks; ++b) {
      if (state.blocks[b].group != UpdateGroup::kWorld) continue;
      for (std::size_t i = 0; i < state.blocks[b].values.size(); ++i) {
        const auto step = mh_step(state, b, target, scales[b], state.rngs[b], i);
        run.nan_evaluations += step.nan_target ? 1 : 0;
        if (adapting) {
          adapt(scales[b][i], step.accepted);
        } else {
          ++attempted[b];
          accepted[b] += step.accepted ? 1 : 0;
        }
      }
    }
    state.iteration = iter;
    if (settings.revalidate_every > 0 && iter % settings.revalidate_every == 0) {
      revalidate(state, target);
    }
    if (!adapting && (iter - settings.burn_in) % settings.thin == 0) {
      row.clear();
      for (const auto& block : state.blocks) {
        row.insert(row.end(), block.values.begin(), block.values.end());
      }
      if (writer) writer->append(row);
      run.store.draws.push_back(row);
    }
  }
  revalidate(state, target);
  if (run.nan_evaluations > 0) {
    logger().warn("{} chain {}: {} proposals evaluated to NaN and were rejected", target.name(),
                  settings.chain_id, run.nan_evaluations);
  }
  if (writer) writer->finish();
  run.store.metadata.draws = run.store.draws.size();
  run.store.metadata.complete = true;
  run.acceptance.resize(n_blocks);
  for (std::size_t b = 0; b < n_blocks; ++b) {
    run.acceptance[b] =
        attempted[b] > 0 ? static_cast<double>(accepted[b]) / static_cast<double>(attempted[b]) : 0.0;
  }
  run.frozen_scales = std::move(scales);
  run.final_state = std::move(state);
  return run;
}

std::vector<PosteriorSample> posterior_predictive_draws(std::span<const ChainStore> stores,
                                                        std::size_t n, Rng& rng,
                                                        bool with_replacement) {
  std::vector<std::pair<std::size_t, std::size_t>> pool;
  for (std::size_t c = 0; c < stores.size(); ++c) {
    if (c > 0 && stores[c].columns != stores[0].columns) {
      throw InvalidInput("chains passed for resampling have different columns");
    }
    for (std::size_t r = 0; r < stores[c].draws.size(); ++r) pool.emplace_back(c, r);
  }
  if (pool.empty()) throw InvalidInput("cannot resample from an empty chain store");
  std::vector<std::size_t> picks;
  picks.reserve(n);
  if (with_replacement) {
    std::uniform_int_distribution<std::size_t> index(0, pool.size() - 1);
    for (std::size_t i = 0; i < n; ++i) picks.push_back(index(rng));
  } else {
    if (n > pool.size()) {
      throw InvalidInput(fmt::format("cannot draw {} samples without replacement from {}", n,
                                     pool.size()));
    }
    picks.resize(pool.size());
    std::iota(picks.begin(), picks.end(), std::size_t{0});
    std::shuffle(picks.begin(), picks.end(), rng);
    picks.resize(n);
  }
  std::vector<PosteriorSample> out;
  out.reserve(n);
  for (std::size_t pick : picks) {
    const auto [c, r] = pool[pick];
    out.push_back(PosteriorSample{c, r, pick, stores[c].draws[r]});
  }
  return out;
}

}  // namespace popproj::mcmc
