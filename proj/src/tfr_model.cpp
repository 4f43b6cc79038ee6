#include "popproj/tfr_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "popproj/demography.hpp"

namespace popproj::tfr {

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double log_uniform(double x, double lo, double hi) {
  if (!(x >= lo && x <= hi) || !(hi > lo)) return kNegInf;
  return -std::log(hi - lo);
}

// open-below uniform for spreads, which must stay strictly positive
double log_uniform_spread(double x, double hi) {
  if (!(x > 0.0 && x <= hi)) return kNegInf;
  return -std::log(hi);
}

}  // namespace

void TfrSeries::validate() const {
  if (values.size() != period_start_years.size()) {
    throw InvalidInput(fmt::format("{}: {} TFR values but {} periods", country_id, values.size(),
                                   period_start_years.size()));
  }
  if (!phases.empty() && phases.size() != values.size()) {
    throw InvalidInput(fmt::format("{}: phase annotations do not match the series", country_id));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!(values[i] > 0.0) || !std::isfinite(values[i])) {
      throw InvalidInput(fmt::format("{}: TFR at {} is {}, expected a finite value > 0",
                                     country_id, period_start_years[i], values[i]));
    }
    if (i > 0 && period_start_years[i] != period_start_years[i - 1] + 5) {
      throw InvalidInput(fmt::format("{}: periods {} and {} are not consecutive 5-year periods",
                                     country_id, period_start_years[i - 1],
                                     period_start_years[i]));
    }
  }
  for (std::size_t i = 1; i < phases.size(); ++i) {
    if (static_cast<int>(phases[i]) < static_cast<int>(phases[i - 1])) {
      throw InvalidInput(fmt::format("{}: phase annotations are not monotone", country_id));
    }
  }
}

TfrSeries classify_phases(TfrSeries series, const PhaseRule& rule) {
  series.phases.clear();
  series.validate();
  const auto& f = series.values;
  const std::size_t n = f.size();
  series.phases.assign(n, Phase::kI);
  if (n < 3) return series;

  std::size_t start3 = n;
  for (std::size_t i = 2; i < n; ++i) {
    const bool rising = f[i - 2] < f[i - 1] && f[i - 1] < f[i];
    const bool low = f[i - 2] < rule.phase3_ceiling && f[i - 1] < rule.phase3_ceiling &&
                     f[i] < rule.phase3_ceiling;
    if (rising && low) {
      start3 = i;
      break;
    }
  }

  const auto window_end = f.begin() + static_cast<std::ptrdiff_t>(start3);
  const auto peak = static_cast<std::size_t>(std::max_element(f.begin(), window_end) - f.begin());
  std::size_t start2 = n;
  if (start3 < n) {
    start2 = peak;
  } else {
    for (std::size_t j = peak + 1; j < n; ++j) {
      if (f[j] <= f[peak] - rule.phase2_min_decline) {
        start2 = peak;
        break;
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= start3) {
      series.phases[i] = Phase::kIII;
    } else if (i >= start2) {
      series.phases[i] = Phase::kII;
    }
  }
  return series;
}

std::size_t phase3_start(const TfrSeries& series) {
  const auto it = std::find(series.phases.begin(), series.phases.end(), Phase::kIII);
  return static_cast<std::size_t>(it - series.phases.begin());
}

double phase2_decrement(double f, const PhaseIIParams& params, MidpointConvention convention) {
  if (!std::isfinite(f)) {
    throw InvalidInput(fmt::format("TFR level must be finite, got {}", f));
  }
  const auto& w = params.widths;
  const double upper_width = std::max(w[0], kWidthFloor);
  const double lower_width = std::max(w[2], kWidthFloor);
  const double upper_sum = w[1] + w[2] + w[3];
  const double upper_mid = convention == MidpointConvention::kAsPrinted ? upper_sum - 0.5 * w[0]
                                                                         : upper_sum + 0.5 * w[0];
  const double lower_mid = w[3] + 0.5 * w[2];
  const double d = params.max_decline;
  return -d * logistic(kLogisticSlope * (f - upper_mid) / upper_width) +
         d * logistic(kLogisticSlope * (f - lower_mid) / lower_width);
}

double Phase2ErrorModel::sd(double f, int period_start_year) const {
  double s;
  if (f <= f_low || f >= f_high) {
    s = sigma_floor;
  } else if (f <= f_peak) {
    s = sigma_floor + (sigma_max - sigma_floor) * (f - f_low) / (f_peak - f_low);
  } else {
    s = sigma_max - (sigma_max - sigma_floor) * (f - f_peak) / (f_high - f_peak);
  }
  if (period_start_year < early_cutoff_year) s *= early_factor;
  return s;
}

void Phase2ErrorModel::validate() const {
  if (!(sigma_floor > 0.0) || !(sigma_max >= sigma_floor)) {
    throw InvalidInput("Phase II error model needs 0 < sigma_floor <= sigma_max");
  }
  if (!(f_low < f_peak && f_peak < f_high)) {
    throw InvalidInput("Phase II error model needs f_low < f_peak < f_high");
  }
  if (!(early_factor > 0.0)) {
    throw InvalidInput("Phase II early-period factor must be positive");
  }
}

std::array<double, 5> as_array(const PhaseIIParams& p) {
  return {p.widths[0], p.widths[1], p.widths[2], p.widths[3], p.max_decline};
}

PhaseIIParams from_array(const std::array<double, 5>& v) {
  return PhaseIIParams{{v[0], v[1], v[2], v[3]}, v[4]};
}

std::size_t phase2_transition_count(const TfrSeries& series) {
  std::size_t count = 0;
  for (std::size_t t = 0; t + 1 < series.phases.size(); ++t) {
    if (series.phases[t] == Phase::kII && series.phases[t + 1] == Phase::kII) ++count;
  }
  return count;
}

double phase2_transition_loglik(const TfrSeries& series, const PhaseIIParams& params,
                                const Phase2Config& config) {
  double total = 0.0;
  for (std::size_t t = 0; t + 1 < series.phases.size(); ++t) {
    if (series.phases[t] != Phase::kII || series.phases[t + 1] != Phase::kII) continue;
    const double f = series.values[t];
    const double residual =
        series.values[t + 1] - f + phase2_decrement(f, params, config.convention);
    total += normal_logpdf(residual, 0.0, config.error.sd(f, series.period_start_years[t]));
  }
  return std::isnan(total) ? kNegInf : total;
}

double phase2_country_logprior(const PhaseIIParams& params, const PhaseIIWorld& world,
                               const Phase2Config& config) {
  const auto v = as_array(params);
  const auto& b = config.bounds;
  if (params.total_width() > b.max_total_width) return kNegInf;
  double total = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    total += truncated_normal_logpdf(v[i], world.mean[i], world.sd[i], b.lower[i], b.upper[i]);
    if (total == kNegInf) return kNegInf;
  }
  return total;
}

double phase2_world_logprior(const PhaseIIWorld& world, const Phase2Config& config) {
  const auto& b = config.bounds;
  double total = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    total += log_uniform(world.mean[i], b.lower[i], b.upper[i]);
    total += log_uniform_spread(world.sd[i], b.spread_upper[i]);
  }
  return total;
}

double phase2_loglik(std::span<const TfrSeries> series, std::span<const PhaseIIParams> params,
                     const PhaseIIWorld& world, const Phase2Config& config) {
  if (series.size() != params.size()) {
    throw InvalidInput(fmt::format("{} series but {} parameter vectors", series.size(),
                                   params.size()));
  }
  double total = phase2_world_logprior(world, config);
  if (total == kNegInf) return kNegInf;
  for (std::size_t c = 0; c < series.size(); ++c) {
    total += phase2_country_logprior(params[c], world, config);
    if (total == kNegInf) return kNegInf;
    total += phase2_transition_loglik(series[c], params[c], config);
  }
  return std::isfinite(total) ? total : kNegInf;
}

std::size_t phase3_transition_count(const TfrSeries& series) {
  std::size_t count = 0;
  for (std::size_t t = 0; t + 1 < series.phases.size(); ++t) {
    if (series.phases[t] == Phase::kIII && series.phases[t + 1] == Phase::kIII) ++count;
  }
  return count;
}

double phase3_ar_loglik(const TfrSeries& series, double mu, double rho, double sigma) {
  if (!(sigma > 0.0)) return kNegInf;
  double total = 0.0;
  for (std::size_t t = 0; t + 1 < series.phases.size(); ++t) {
    if (series.phases[t] != Phase::kIII || series.phases[t + 1] != Phase::kIII) continue;
    const double mean = mu + rho * (series.values[t] - mu);
    total += normal_logpdf(series.values[t + 1], mean, sigma);
  }
  return std::isnan(total) ? kNegInf : total;
}

Phase3Mle phase3_mle(std::span<const TfrSeries> series, double mu) {
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  std::size_t n = 0;
  for (const auto& s : series) {
    for (std::size_t t = 0; t + 1 < s.phases.size(); ++t) {
      if (s.phases[t] != Phase::kIII || s.phases[t + 1] != Phase::kIII) continue;
      const double x = s.values[t] - mu;
      const double y = s.values[t + 1] - mu;
      sxx += x * x;
      sxy += x * y;
      syy += y * y;
      ++n;
    }
  }
  if (n < 2) {
    throw InvalidInput(fmt::format(
        "Phase III estimation needs at least 2 transitions, found {}", n));
  }
  Phase3Mle mle;
  mle.mu = mu;
  mle.transitions = n;
  constexpr double kRhoUpper = 1.0 - 1e-9;
  if (sxx > 0.0) {
    const double slope = sxy / sxx;
    mle.rho = std::clamp(slope, 0.0, kRhoUpper);
    mle.rho_at_boundary = slope <= 0.0 || slope >= kRhoUpper;
  } else {
    mle.rho = 0.0;
    mle.rho_identified = false;
  }
  const double ssr =
      std::max(0.0, syy - 2.0 * mle.rho * sxy + mle.rho * mle.rho * sxx);
  mle.sigma = std::sqrt(ssr / static_cast<double>(n));
  mle.sigma_at_boundary = mle.sigma <= 1e-12;
  mle.se_rho = sxx > 0.0 ? mle.sigma / std::sqrt(sxx) : kInf;
  mle.se_sigma = mle.sigma / std::sqrt(2.0 * static_cast<double>(n));
  if (!mle.sigma_at_boundary) {
    double ll = 0.0;
    for (const auto& s : series) ll += phase3_ar_loglik(s, mu, mle.rho, mle.sigma);
    mle.loglik = ll;
  } else {
    mle.loglik = kInf;
  }
  return mle;
}

double phase3_country_logprior(const Phase3Country& country, const Phase3World& world) {
  return truncated_normal_logpdf(country.mu, world.mu_mean, world.mu_sd, 0.0, kInf) +
         truncated_normal_logpdf(country.rho, world.rho_mean, world.rho_sd, 0.0, 1.0);
}

double phase3_world_logprior(const Phase3World& world, const Phase3Bounds& bounds) {
  return log_uniform(world.mu_mean, 0.0, bounds.mu_mean_upper) +
         log_uniform_spread(world.mu_sd, bounds.mu_sd_upper) +
         log_uniform(world.rho_mean, 0.0, 1.0) +
         log_uniform_spread(world.rho_sd, bounds.rho_sd_upper) +
         log_uniform_spread(world.sigma_eps, bounds.sigma_eps_upper);
}

double phase3_hier_loglik(std::span<const TfrSeries> series,
                          std::span<const Phase3Country> countries, const Phase3World& world,
                          const Phase3Bounds& bounds) {
  if (series.size() != countries.size()) {
    throw InvalidInput(fmt::format("{} series but {} country parameter pairs", series.size(),
                                   countries.size()));
  }
  double total = phase3_world_logprior(world, bounds);
  if (total == kNegInf) return kNegInf;
  for (std::size_t c = 0; c < series.size(); ++c) {
    total += phase3_country_logprior(countries[c], world);
    if (total == kNegInf) return kNegInf;
    total += phase3_ar_loglik(series[c], countries[c].mu, countries[c].rho, world.sigma_eps);
  }
  return std::isfinite(total) ? total : kNegInf;
}

std::vector<double> simulate_tfr_trajectory(std::span<const double> history, Phase phase,
                                            const TfrDraw& draw, int horizon, Rng& rng,
                                            const TfrSimulationConfig& config) {
  if (history.empty()) {
    throw InvalidInput("TFR simulation needs at least the current value");
  }
  if (horizon <= 0) return {};
  if (phase != Phase::kIII && !draw.has_phase2) {
    throw InvalidInput("Phase II simulation requested without Phase II parameters");
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto& rule = config.rule;
  std::vector<double> path(history.begin(), history.end());
  const std::size_t observed = path.size();
  bool in_phase3 = phase == Phase::kIII;
  for (int t = 0; t < horizon; ++t) {
    const double f = path.back();
    double next;
    if (in_phase3) {
      const double noise = config.error_scale * draw.phase3_sigma * normal(rng);
      next = draw.phase3_mu + draw.phase3_rho * (f - draw.phase3_mu) + noise;
    } else {
      const int year = config.first_period_start_year + 5 * t;
      const double sd = config.phase2.error.sd(f, year);
      const double noise = config.error_scale * sd * normal(rng);
      next = f - phase2_decrement(f, draw.phase2, config.phase2.convention) + noise;
    }
    next = std::max(next, config.tfr_floor);
    path.push_back(next);
    if (!in_phase3 && config.allow_phase3_switch && path.size() >= 3) {
      const std::size_t k = path.size() - 1;
      const bool rising = path[k - 2] < path[k - 1] && path[k - 1] < path[k];
      const bool low = path[k - 2] < rule.phase3_ceiling && path[k - 1] < rule.phase3_ceiling &&
                       path[k] < rule.phase3_ceiling;
      if (rising && low) in_phase3 = true;
    }
  }
  return {path.begin() + static_cast<std::ptrdiff_t>(observed), path.end()};
}

std::span<const UnDeclinePattern> un_decline_patterns() {
  static const std::array<UnDeclinePattern, 3> patterns{{
      {"slow", PhaseIIParams{{1.0, 2.0, 1.0, 1.5}, 0.4}},
      {"medium", PhaseIIParams{{1.0, 2.0, 1.0, 1.5}, 0.6}},
      {"fast", PhaseIIParams{{1.0, 2.0, 1.0, 1.5}, 0.8}},
  }};
  return patterns;
}

UnScenario un_deterministic_tfr(double current, const UnDeclinePattern& pattern, int horizon) {
  if (!(current > 0.0) || !std::isfinite(current)) {
    throw InvalidInput(fmt::format("TFR must be positive, got {}", current));
  }
  UnScenario out;
  if (horizon <= 0) return out;
  const auto steps = static_cast<std::size_t>(horizon);
  out.medium.reserve(steps);
  if (current < kUnUltimateTfr) {
    for (std::size_t t = 1; t <= steps; ++t) {
      out.medium.push_back(
          std::min(kUnUltimateTfr, current + static_cast<double>(t) * kUnRecoveryStep));
    }
  } else {
    double f = current;
    for (std::size_t t = 0; t < steps; ++t) {
      if (f > kUnUltimateTfr) {
        f = std::max(kUnUltimateTfr, f - phase2_decrement(f, pattern.params));
      }
      out.medium.push_back(f);
    }
  }
  out.low.reserve(steps);
  out.high.reserve(steps);
  for (double f : out.medium) {
    out.low.push_back(f - kUnVariantOffset);
    out.high.push_back(f + kUnVariantOffset);
  }
  return out;
}

}  // namespace popproj::tfr
