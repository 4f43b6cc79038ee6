#include "popproj/forecast.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "popproj/demography.hpp"
#include "popproj/models.hpp"

namespace popproj::forecast {

namespace {

constexpr int kMaxWorldAttempts = 10000;
constexpr double kRhoCeiling = 1.0 - 1e-9;

std::size_t pooled_size(const std::vector<mcmc::ChainStore>& stores) {
  std::size_t n = 0;
  for (const auto& s : stores) n += s.draws.size();
  return n;
}

}  // namespace

std::vector<mcmc::PosteriorSample> pick_draws(const std::vector<mcmc::ChainStore>& stores,
                                              std::size_t n, Rng& rng) {
  const bool replace = n > pooled_size(stores);
  return mcmc::posterior_predictive_draws(stores, n, rng, replace);
}

tfr::PhaseIIParams phase2_params(const std::vector<std::string>& columns,
                                 const std::vector<double>& row, const std::string& country,
                                 const tfr::Phase2Config& config, Rng& rng) {
  const DrawView view(columns, row);
  if (view.has(country + ".d")) return view.phase2(country);
  const auto world = view.phase2_world();
  const auto& b = config.bounds;
  for (int attempt = 0; attempt < kMaxWorldAttempts; ++attempt) {
    std::array<double, 5> v{};
    for (std::size_t i = 0; i < 5; ++i) {
      v[i] = sample_truncated_normal(rng, world.mean[i], world.sd[i], b.lower[i], b.upper[i]);
    }
    auto p = tfr::from_array(v);
    if (p.total_width() <= b.max_total_width) return p;
  }
  throw InvalidInput(fmt::format(
      "{}: could not draw Phase II parameters within the total width bound", country));
}

tfr::TfrDraw phase3_params(const std::vector<std::string>& columns,
                           const std::vector<double>& row, const std::string& country, Rng& rng) {
  const DrawView view(columns, row);
  const auto world = view.phase3_world();
  tfr::TfrDraw draw;
  draw.phase3_sigma = world.sigma_eps;
  if (view.has(country + ".mu")) {
    const auto c = view.phase3(country);
    draw.phase3_mu = c.mu;
    draw.phase3_rho = c.rho;
  } else {
    draw.phase3_mu = sample_truncated_normal(rng, world.mu_mean, world.mu_sd, 0.0, kInf);
    draw.phase3_rho = sample_truncated_normal(rng, world.rho_mean, world.rho_sd, 0.0, 1.0);
  }
  return draw;
}

e0::DoubleLogisticParams e0_params(const std::vector<std::string>& columns,
                                   const std::vector<double>& row, const std::string& country,
                                   const e0::E0Config& config, Rng& rng) {
  const DrawView view(columns, row);
  if (view.has(country + ".z")) return view.e0(country);
  const auto world = view.e0_world();
  std::array<double, e0::kThetaSize> v{};
  for (std::size_t i = 0; i < e0::kThetaSize; ++i) {
    v[i] = sample_truncated_normal(rng, world.mean[i], world.sd[i], config.bounds.lower[i],
                                   config.bounds.upper[i]);
  }
  return e0::from_array(v);
}

tfr::TfrDraw phase3_from_mle(const tfr::Phase3Mle& mle, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  tfr::TfrDraw draw;
  draw.phase3_mu = mle.mu;
  draw.phase3_rho = reflect_into(mle.rho + mle.se_rho * normal(rng), 0.0, kRhoCeiling);
  draw.phase3_sigma = std::abs(mle.sigma + mle.se_sigma * normal(rng));
  if (!(draw.phase3_sigma > 0.0)) draw.phase3_sigma = mle.sigma;
  return draw;
}

TfrPaths sample_tfr_paths(const tfr::TfrSeries& series, const TfrPosterior& posterior,
                          std::size_t n, int horizon, Rng& rng,
                          const tfr::TfrSimulationConfig& config) {
  if (series.phases.size() != series.size() || series.size() == 0) {
    throw InvalidInput(fmt::format("{}: TFR series must be classified before simulation",
                                   series.country_id));
  }
  const tfr::Phase current = series.phases.back() == tfr::Phase::kIII ? tfr::Phase::kIII
                                                                       : tfr::Phase::kII;
  const bool needs_phase2 = current == tfr::Phase::kII;
  const bool needs_phase3 = current == tfr::Phase::kIII || config.allow_phase3_switch;
  if (needs_phase2 && posterior.phase2.empty()) {
    throw InvalidInput(fmt::format("{}: in Phase II but no tfr-phase2 chains were given",
                                   series.country_id));
  }
  if (needs_phase3 && posterior.phase3.empty() && !posterior.phase3_mle) {
    throw InvalidInput(fmt::format("{}: no Phase III chains or estimate available",
                                   series.country_id));
  }

  std::vector<mcmc::PosteriorSample> p2, p3;
  if (needs_phase2) p2 = pick_draws(posterior.phase2, n, rng);
  if (needs_phase3 && !posterior.phase3.empty()) p3 = pick_draws(posterior.phase3, n, rng);

  TfrPaths out;
  out.values.reserve(n);
  out.provenance.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    tfr::TfrDraw draw;
    if (needs_phase3) {
      if (!p3.empty()) {
        const auto& s = p3[i];
        draw = phase3_params(posterior.phase3[s.chain].columns, s.values, series.country_id, rng);
        out.provenance[i].phase3 = static_cast<long>(s.provenance);
      } else {
        draw = phase3_from_mle(*posterior.phase3_mle, rng);
      }
    }
    if (needs_phase2) {
      const auto& s = p2[i];
      draw.phase2 = phase2_params(posterior.phase2[s.chain].columns, s.values, series.country_id,
                                  config.phase2, rng);
      draw.has_phase2 = true;
      out.provenance[i].phase2 = static_cast<long>(s.provenance);
    }
    out.values.push_back(
        tfr::simulate_tfr_trajectory(series.values, current, draw, horizon, rng, config));
  }
  return out;
}

E0Paths sample_e0_paths(const e0::E0Series& series, const E0Posterior& posterior,
                        std::size_t n, int horizon, Rng& rng,
                        const e0::E0SimulationConfig& config) {
  if (series.size() == 0) throw InvalidInput(fmt::format("{}: empty e0 series", series.country_id));
  if (posterior.chains.empty()) {
    throw InvalidInput(fmt::format("{}: no e0 chains were given", series.country_id));
  }
  const auto picks = pick_draws(posterior.chains, n, rng);
  const double female = series.female.back();
  const double gap = series.female.back() - series.male.back();
  const double initial = e0::initial_female_level(series);
  E0Paths out;
  for (const auto& s : picks) {
    const auto theta =
        e0_params(posterior.chains[s.chain].columns, s.values, series.country_id, config.model, rng);
    auto path = e0::simulate_e0_trajectory(female, gap, initial, theta, posterior.gap, horizon,
                                           rng, config);
    out.female.push_back(std::move(path.female));
    out.male.push_back(std::move(path.male));
    out.provenance.push_back(static_cast<long>(s.provenance));
  }
  return out;
}

}  // namespace popproj::forecast
