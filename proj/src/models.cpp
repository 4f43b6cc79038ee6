#include "popproj/models.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <fmt/format.h>

#include "popproj/demography.hpp"

namespace popproj {

namespace {

constexpr std::array<const char*, 5> kPhase2Names{"nabla1", "nabla2", "nabla3", "nabla4", "d"};
constexpr std::array<const char*, 5> kPhase3WorldNames{"mu_mean", "mu_sd", "rho_mean", "rho_sd",
                                                       "sigma_eps"};
constexpr std::array<const char*, e0::kThetaSize> kE0Names{"delta1", "delta2", "delta3",
                                                           "delta4", "k",      "z"};

template <std::size_t N>
std::vector<std::string> names(const std::array<const char*, N>& raw) {
  return {raw.begin(), raw.end()};
}

template <std::size_t N>
std::vector<std::string> world_names(const std::array<const char*, N>& raw) {
  std::vector<std::string> out;
  for (const char* n : raw) out.push_back(fmt::format("mean_{}", n));
  for (const char* n : raw) out.push_back(fmt::format("sd_{}", n));
  return out;
}

void check_layout(std::span<const mcmc::ParameterBlock> blocks, std::size_t countries) {
  if (blocks.size() != countries + 1) {
    throw InvalidInput(fmt::format("expected {} blocks, got {}", countries + 1, blocks.size()));
  }
}

}  // namespace

// ---------------------------------------------------------------------------

Phase2Target::Phase2Target(std::vector<tfr::TfrSeries> series, tfr::Phase2Config config)
    : config_(std::move(config)) {
  config_.error.validate();
  for (auto& s : series) {
    if (s.phases.empty()) s = tfr::classify_phases(std::move(s));
    if (tfr::phase2_transition_count(s) > 0) series_.push_back(std::move(s));
  }
  if (series_.empty()) throw InvalidInput("no country has Phase II transitions to fit");
}

std::vector<mcmc::ParameterBlock> Phase2Target::initial_blocks() const {
  const auto& b = config_.bounds;
  std::vector<mcmc::ParameterBlock> blocks;
  std::array<double, 5> sums{};
  for (const auto& s : series_) {
    const double peak = *std::max_element(s.values.begin(), s.values.end());
    std::array<double, 5> v{1.0, std::clamp(peak - 3.0, 0.2, b.max_total_width - 3.5), 1.0, 1.0,
                            0.8};
    for (std::size_t i = 0; i < 5; ++i) {
      v[i] = std::clamp(v[i], b.lower[i], b.upper[i]);
      sums[i] += v[i];
    }
    mcmc::ParameterBlock block;
    block.name = s.country_id;
    block.coordinates = names(kPhase2Names);
    block.values.assign(v.begin(), v.end());
    for (std::size_t i = 0; i < 5; ++i) block.support.push_back({b.lower[i], b.upper[i]});
    block.proposal_scale = {0.1, 0.1, 0.1, 0.1, 0.05};
    block.group = mcmc::UpdateGroup::kCountry;
    blocks.push_back(std::move(block));
  }
  mcmc::ParameterBlock world;
  world.name = kWorldBlock;
  world.coordinates = world_names(kPhase2Names);
  world.group = mcmc::UpdateGroup::kWorld;
  for (std::size_t i = 0; i < 5; ++i) {
    world.values.push_back(sums[i] / static_cast<double>(series_.size()));
    world.support.push_back({b.lower[i], b.upper[i]});
    world.proposal_scale.push_back(0.1);
  }
  for (std::size_t i = 0; i < 5; ++i) {
    world.values.push_back(std::min(1.0, 0.5 * b.spread_upper[i]));
    world.support.push_back({0.0, b.spread_upper[i]});
    world.proposal_scale.push_back(0.1);
  }
  blocks.push_back(std::move(world));
  return blocks;
}

tfr::PhaseIIParams Phase2Target::country_params(const mcmc::ParameterBlock& block) {
  return tfr::from_array({block.values[0], block.values[1], block.values[2], block.values[3],
                          block.values[4]});
}

tfr::PhaseIIWorld Phase2Target::world_params(const mcmc::ParameterBlock& block) {
  tfr::PhaseIIWorld w;
  for (std::size_t i = 0; i < 5; ++i) {
    w.mean[i] = block.values[i];
    w.sd[i] = block.values[5 + i];
  }
  return w;
}

double Phase2Target::log_density(std::span<const mcmc::ParameterBlock> blocks) const {
  check_layout(blocks, series_.size());
  std::vector<tfr::PhaseIIParams> params;
  params.reserve(series_.size());
  for (std::size_t c = 0; c < series_.size(); ++c) params.push_back(country_params(blocks[c]));
  return tfr::phase2_loglik(series_, params, world_params(blocks.back()), config_);
}

double Phase2Target::block_log_density(std::span<const mcmc::ParameterBlock> blocks,
                                       std::size_t b) const {
  const auto world = world_params(blocks.back());
  if (b < series_.size()) {
    const auto params = country_params(blocks[b]);
    const double prior = tfr::phase2_country_logprior(params, world, config_);
    if (prior == kNegInf) return kNegInf;
    return prior + tfr::phase2_transition_loglik(series_[b], params, config_);
  }
  double total = tfr::phase2_world_logprior(world, config_);
  if (total == kNegInf) return kNegInf;
  for (std::size_t c = 0; c < series_.size(); ++c) {
    total += tfr::phase2_country_logprior(country_params(blocks[c]), world, config_);
  }
  return total;
}

// ---------------------------------------------------------------------------

Phase3HierTarget::Phase3HierTarget(std::vector<tfr::TfrSeries> series, tfr::Phase3Bounds bounds)
    : bounds_(bounds) {
  for (auto& s : series) {
    if (s.phases.empty()) s = tfr::classify_phases(std::move(s));
    if (tfr::phase3_transition_count(s) > 0) series_.push_back(std::move(s));
  }
  if (series_.empty()) throw InvalidInput("no country has Phase III transitions to fit");
}

std::vector<mcmc::ParameterBlock> Phase3HierTarget::initial_blocks() const {
  std::vector<mcmc::ParameterBlock> blocks;
  for (const auto& s : series_) {
    mcmc::ParameterBlock block;
    block.name = s.country_id;
    block.coordinates = {"mu", "rho"};
    block.values = {std::min(2.0, bounds_.mu_mean_upper), 0.8};
    block.support = {{0.0, kInf}, {0.0, 1.0}};
    block.proposal_scale = {0.1, 0.1};
    block.group = mcmc::UpdateGroup::kCountry;
    blocks.push_back(std::move(block));
  }
  mcmc::ParameterBlock world;
  world.name = kWorldBlock;
  world.coordinates = names(kPhase3WorldNames);
  world.values = {std::min(2.0, bounds_.mu_mean_upper), 0.5 * bounds_.mu_sd_upper, 0.8,
                  0.5 * bounds_.rho_sd_upper, 0.2 * bounds_.sigma_eps_upper};
  world.support = {{0.0, bounds_.mu_mean_upper},
                   {0.0, bounds_.mu_sd_upper},
                   {0.0, 1.0},
                   {0.0, bounds_.rho_sd_upper},
                   {0.0, bounds_.sigma_eps_upper}};
  world.proposal_scale = {0.05, 0.03, 0.05, 0.03, 0.02};
  world.group = mcmc::UpdateGroup::kWorld;
  blocks.push_back(std::move(world));
  return blocks;
}

tfr::Phase3Country Phase3HierTarget::country_params(const mcmc::ParameterBlock& block) {
  return {block.values[0], block.values[1]};
}

tfr::Phase3World Phase3HierTarget::world_params(const mcmc::ParameterBlock& block) {
  return {block.values[0], block.values[1], block.values[2], block.values[3], block.values[4]};
}

double Phase3HierTarget::log_density(std::span<const mcmc::ParameterBlock> blocks) const {
  check_layout(blocks, series_.size());
  std::vector<tfr::Phase3Country> countries;
  for (std::size_t c = 0; c < series_.size(); ++c) countries.push_back(country_params(blocks[c]));
  return tfr::phase3_hier_loglik(series_, countries, world_params(blocks.back()), bounds_);
}

double Phase3HierTarget::block_log_density(std::span<const mcmc::ParameterBlock> blocks,
                                           std::size_t b) const {
  const auto world = world_params(blocks.back());
  if (b < series_.size()) {
    const auto country = country_params(blocks[b]);
    const double prior = tfr::phase3_country_logprior(country, world);
    if (prior == kNegInf) return kNegInf;
    return prior + tfr::phase3_ar_loglik(series_[b], country.mu, country.rho, world.sigma_eps);
  }
  // sigma_eps enters every likelihood term, so the world block owns them all
  return log_density(blocks);
}

// ---------------------------------------------------------------------------

E0Target::E0Target(std::vector<e0::E0Series> series, e0::E0Config config)
    : config_(std::move(config)) {
  config_.error.validate();
  for (auto& s : series) {
    s.validate();
    if (s.size() >= 2) series_.push_back(std::move(s));
  }
  if (series_.empty()) throw InvalidInput("no country has life expectancy transitions to fit");
}

std::vector<mcmc::ParameterBlock> E0Target::initial_blocks() const {
  const auto& b = config_.bounds;
  const std::array<double, e0::kThetaSize> start{15.0, 40.0, 5.0, 15.0, 3.0, 0.6};
  const std::array<double, e0::kThetaSize> world_sd{5.0, 5.0, 5.0, 5.0, 1.0, 0.2};
  const std::array<double, e0::kThetaSize> step{1.0, 1.0, 1.0, 1.0, 0.2, 0.05};
  std::vector<mcmc::ParameterBlock> blocks;
  for (const auto& s : series_) {
    mcmc::ParameterBlock block;
    block.name = s.country_id;
    block.coordinates = names(kE0Names);
    for (std::size_t i = 0; i < e0::kThetaSize; ++i) {
      block.values.push_back(std::clamp(start[i], b.lower[i], b.upper[i]));
      block.support.push_back({b.lower[i], b.upper[i]});
      block.proposal_scale.push_back(step[i]);
    }
    block.group = mcmc::UpdateGroup::kCountry;
    blocks.push_back(std::move(block));
  }
  mcmc::ParameterBlock world;
  world.name = kWorldBlock;
  world.coordinates = world_names(kE0Names);
  world.group = mcmc::UpdateGroup::kWorld;
  for (std::size_t i = 0; i < e0::kThetaSize; ++i) {
    world.values.push_back(std::clamp(start[i], b.lower[i], b.upper[i]));
    world.support.push_back({b.lower[i], b.upper[i]});
    world.proposal_scale.push_back(step[i]);
  }
  for (std::size_t i = 0; i < e0::kThetaSize; ++i) {
    world.values.push_back(std::min(world_sd[i], 0.5 * b.spread_upper[i]));
    world.support.push_back({0.0, b.spread_upper[i]});
    world.proposal_scale.push_back(0.5 * step[i]);
  }
  blocks.push_back(std::move(world));
  return blocks;
}

e0::DoubleLogisticParams E0Target::country_params(const mcmc::ParameterBlock& block) {
  std::array<double, e0::kThetaSize> v{};
  std::copy_n(block.values.begin(), e0::kThetaSize, v.begin());
  return e0::from_array(v);
}

e0::E0World E0Target::world_params(const mcmc::ParameterBlock& block) {
  e0::E0World w;
  for (std::size_t i = 0; i < e0::kThetaSize; ++i) {
    w.mean[i] = block.values[i];
    w.sd[i] = block.values[e0::kThetaSize + i];
  }
  return w;
}

double E0Target::log_density(std::span<const mcmc::ParameterBlock> blocks) const {
  check_layout(blocks, series_.size());
  std::vector<e0::DoubleLogisticParams> params;
  for (std::size_t c = 0; c < series_.size(); ++c) params.push_back(country_params(blocks[c]));
  return e0::e0_hier_loglik(series_, params, world_params(blocks.back()), config_);
}

double E0Target::block_log_density(std::span<const mcmc::ParameterBlock> blocks,
                                   std::size_t b) const {
  const auto world = world_params(blocks.back());
  if (b < series_.size()) {
    const auto params = country_params(blocks[b]);
    const double prior = e0::country_logprior(params, world, config_);
    if (prior == kNegInf) return kNegInf;
    return prior + e0::female_transition_loglik(series_[b], params, config_);
  }
  double total = e0::world_logprior(world, config_);
  if (total == kNegInf) return kNegInf;
  for (std::size_t c = 0; c < series_.size(); ++c) {
    total += e0::country_logprior(country_params(blocks[c]), world, config_);
  }
  return total;
}

// ---------------------------------------------------------------------------

bool DrawView::has(const std::string& column) const {
  return std::find(columns_->begin(), columns_->end(), column) != columns_->end();
}

double DrawView::at(const std::string& column) const {
  const auto it = std::find(columns_->begin(), columns_->end(), column);
  if (it == columns_->end()) {
    throw InvalidInput(fmt::format("posterior draw has no column '{}'", column));
  }
  return row_[static_cast<std::size_t>(it - columns_->begin())];
}

tfr::PhaseIIParams DrawView::phase2(const std::string& country) const {
  std::array<double, 5> v{};
  for (std::size_t i = 0; i < 5; ++i) v[i] = at(fmt::format("{}.{}", country, kPhase2Names[i]));
  return tfr::from_array(v);
}

tfr::PhaseIIWorld DrawView::phase2_world() const {
  tfr::PhaseIIWorld w;
  for (std::size_t i = 0; i < 5; ++i) {
    w.mean[i] = at(fmt::format("{}.mean_{}", kWorldBlock, kPhase2Names[i]));
    w.sd[i] = at(fmt::format("{}.sd_{}", kWorldBlock, kPhase2Names[i]));
  }
  return w;
}

tfr::Phase3Country DrawView::phase3(const std::string& country) const {
  return {at(country + ".mu"), at(country + ".rho")};
}

tfr::Phase3World DrawView::phase3_world() const {
  std::array<double, 5> v{};
  for (std::size_t i = 0; i < 5; ++i) {
    v[i] = at(fmt::format("{}.{}", kWorldBlock, kPhase3WorldNames[i]));
  }
  return {v[0], v[1], v[2], v[3], v[4]};
}

e0::DoubleLogisticParams DrawView::e0(const std::string& country) const {
  std::array<double, e0::kThetaSize> v{};
  for (std::size_t i = 0; i < e0::kThetaSize; ++i) {
    v[i] = at(fmt::format("{}.{}", country, kE0Names[i]));
  }
  return e0::from_array(v);
}

e0::E0World DrawView::e0_world() const {
  e0::E0World w;
  for (std::size_t i = 0; i < e0::kThetaSize; ++i) {
    w.mean[i] = at(fmt::format("{}.mean_{}", kWorldBlock, kE0Names[i]));
    w.sd[i] = at(fmt::format("{}.sd_{}", kWorldBlock, kE0Names[i]));
  }
  return w;
}

}  // namespace popproj
