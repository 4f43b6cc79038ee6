#include "popproj/e0_model.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "popproj/demography.hpp"

namespace popproj::e0 {

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double log_uniform(double x, double lo, double hi) {
  if (!(x >= lo && x <= hi) || !(hi > lo)) return kNegInf;
  return -std::log(hi - lo);
}

}  // namespace

void E0Series::validate() const {
  if (female.size() != male.size() || female.size() != period_start_years.size()) {
    throw InvalidInput(fmt::format("{}: female, male and period arrays differ in length",
                                   country_id));
  }
  for (std::size_t i = 0; i < female.size(); ++i) {
    for (double v : {female[i], male[i]}) {
      if (!(v >= 15.0 && v <= 100.0)) {
        throw InvalidInput(fmt::format("{}: life expectancy {} at {} outside [15, 100]",
                                       country_id, v, period_start_years[i]));
      }
    }
    if (i > 0 && period_start_years[i] != period_start_years[i - 1] + 5) {
      throw InvalidInput(fmt::format("{}: periods {} and {} are not consecutive 5-year periods",
                                     country_id, period_start_years[i - 1],
                                     period_start_years[i]));
    }
  }
}

std::array<double, kThetaSize> as_array(const DoubleLogisticParams& p) {
  return {p.spans[0], p.spans[1], p.spans[2], p.spans[3], p.k, p.z};
}

DoubleLogisticParams from_array(const std::array<double, kThetaSize>& v) {
  return DoubleLogisticParams{{v[0], v[1], v[2], v[3]}, v[4], v[5]};
}

double e0_gain(double level, const DoubleLogisticParams& params, const GainShape& shape) {
  if (!std::isfinite(level)) {
    throw InvalidInput(fmt::format("life expectancy must be finite, got {}", level));
  }
  const auto& s = params.spans;
  const double early_width = std::max(s[1], kSpanFloor);
  const double late_width = std::max(s[3], kSpanFloor);
  const double early =
      params.k * logistic(shape.a1 * (level - s[0] - shape.a2 * s[1]) / early_width);
  const double late = (params.z - params.k) *
                      logistic(shape.a1 * (level - s[0] - s[1] - s[2] - shape.a2 * s[3]) /
                               late_width);
  return early + late;
}

double ErrorScale::sd(double level) const {
  return lo + (hi - lo) / (1.0 + std::exp((level - mid) / scale));
}

void ErrorScale::validate() const {
  if (!(lo > 0.0) || !(hi >= lo) || !(scale > 0.0)) {
    throw InvalidInput("life expectancy error scale needs 0 < lo <= hi and scale > 0");
  }
}

double female_transition_loglik(const E0Series& series, const DoubleLogisticParams& params,
                                const E0Config& config) {
  double total = 0.0;
  for (std::size_t t = 0; t + 1 < series.female.size(); ++t) {
    const double l = series.female[t];
    const double residual = series.female[t + 1] - l - e0_gain(l, params, config.shape);
    total += normal_logpdf(residual, 0.0, config.error.sd(l));
  }
  return std::isnan(total) ? kNegInf : total;
}

double country_logprior(const DoubleLogisticParams& params, const E0World& world,
                        const E0Config& config) {
  const auto v = as_array(params);
  const auto& b = config.bounds;
  double total = 0.0;
  for (std::size_t i = 0; i < kThetaSize; ++i) {
    total += truncated_normal_logpdf(v[i], world.mean[i], world.sd[i], b.lower[i], b.upper[i]);
    if (total == kNegInf) return kNegInf;
  }
  return total;
}

double world_logprior(const E0World& world, const E0Config& config) {
  const auto& b = config.bounds;
  double total = 0.0;
  for (std::size_t i = 0; i < kThetaSize; ++i) {
    total += log_uniform(world.mean[i], b.lower[i], b.upper[i]);
    if (!(world.sd[i] > 0.0 && world.sd[i] <= b.spread_upper[i])) return kNegInf;
    total -= std::log(b.spread_upper[i]);
  }
  return total;
}

double e0_hier_loglik(std::span<const E0Series> series,
                      std::span<const DoubleLogisticParams> params, const E0World& world,
                      const E0Config& config) {
  if (series.size() != params.size()) {
    throw InvalidInput(fmt::format("{} series but {} parameter vectors", series.size(),
                                   params.size()));
  }
  double total = world_logprior(world, config);
  if (total == kNegInf) return kNegInf;
  for (std::size_t c = 0; c < series.size(); ++c) {
    total += country_logprior(params[c], world, config);
    if (total == kNegInf) return kNegInf;
    total += female_transition_loglik(series[c], params[c], config);
  }
  return std::isfinite(total) ? total : kNegInf;
}

// ---------------------------------------------------------------------------

void GapParams::validate() const {
  if (!(cap > 0.0)) throw InvalidInput("gap cap must be positive");
  if (!(dof > 0.0)) throw InvalidInput("gap t degrees of freedom must be positive");
  if (!(scale2 > 0.0)) throw InvalidInput("gap t squared scale must be positive");
}

double gap_mean(double gap, double female_level, double female_initial, const GapParams& params) {
  if (female_level > params.regime_level) {
    return params.gamma1 * gap;
  }
  const auto& b = params.beta;
  return b[0] + b[1] * female_initial + b[2] * gap + b[3] * female_level +
         b[4] * std::max(female_level - 75.0, 0.0);
}

double clamp_gap(double raw, const GapParams& params) {
  return std::min(std::max(raw, 0.0), params.cap);
}

double project_gap(double gap, double female_level, double female_initial,
                   const GapParams& params, Rng& rng) {
  const double error = sample_student_t(rng, 0.0, params.scale2, params.dof);
  return clamp_gap(gap_mean(gap, female_level, female_initial, params) + error, params);
}

double initial_female_level(const E0Series& series) {
  if (series.female.empty()) {
    throw InvalidInput(fmt::format("{}: empty life expectancy series", series.country_id));
  }
  return series.female.front();
}

namespace {

struct Design {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
};

// Fits a t regression with fixed scale and dof. Returns the final gradient
// norm; coefficients are updated in place.
struct TFitOutcome {
  double gradient_norm = 0.0;
  int iterations = 0;
  double loglik = 0.0;
  bool converged = false;
};

double t_loglik(const Design& d, const Eigen::VectorXd& coef, double scale2, double dof) {
  const Eigen::VectorXd r = d.y - d.x * coef;
  double total = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) total += student_t_logpdf(r[i], 0.0, scale2, dof);
  return total;
}

TFitOutcome fit_t_regression(const Design& d, Eigen::VectorXd& coef, double scale2, double dof,
                             double tolerance, int max_iterations) {
  const double c = dof * scale2;
  TFitOutcome out;
  if (d.x.rows() == 0) {
    out.converged = true;
    return out;
  }
  coef = d.x.completeOrthogonalDecomposition().solve(d.y);
  double ll = t_loglik(d, coef, scale2, dof);
  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::VectorXd r = d.y - d.x * coef;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(coef.size());
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(coef.size(), coef.size());
    Eigen::VectorXd weights(r.size());
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      const double denom = c + r[i] * r[i];
      grad += (dof + 1.0) * r[i] / denom * d.x.row(i).transpose();
      hess -= (dof + 1.0) * (c - r[i] * r[i]) / (denom * denom) *
              d.x.row(i).transpose() * d.x.row(i);
      weights[i] = (dof + 1.0) / denom;
    }
    out.gradient_norm = grad.norm();
    out.iterations = it;
    if (out.gradient_norm < tolerance) {
      out.converged = true;
      break;
    }

    Eigen::VectorXd step;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(-hess);
    const bool newton_ok = ldlt.info() == Eigen::Success && ldlt.isPositive() &&
                           ldlt.vectorD().minCoeff() > 1e-12 * ldlt.vectorD().maxCoeff();
    if (newton_ok) {
      step = ldlt.solve(grad);
      // Newton decrement: the remaining gain in log-likelihood is below
      // what roundoff lets us resolve
      if (grad.dot(step) < tolerance * tolerance) {
        out.converged = true;
        break;
      }
    } else {
      // IRLS (EM) step: weighted least squares with the current weights
      const Eigen::MatrixXd xw = d.x.array().colwise() * weights.array().sqrt();
      const Eigen::VectorXd yw = d.y.array() * weights.array().sqrt();
      step = xw.completeOrthogonalDecomposition().solve(yw) - coef;
    }
    double t = 1.0;
    bool improved = false;
    for (int half = 0; half < 60; ++half, t *= 0.5) {
      const Eigen::VectorXd trial = coef + t * step;
      const double trial_ll = t_loglik(d, trial, scale2, dof);
      if (trial_ll >= ll) {
        coef = trial;
        ll = trial_ll;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  out.loglik = ll;
  return out;
}

}  // namespace

GapFit fit_gap_mle(std::span<const E0Series> series, const GapParams& fixed,
                   double gradient_tolerance, int max_iterations) {
  fixed.validate();
  std::vector<std::array<double, 6>> below;  // 5 covariates + response
  std::vector<std::array<double, 2>> above;
  GapFit fit;
  for (const auto& s : series) {
    s.validate();
    if (s.size() < 2) continue;
    const double initial = initial_female_level(s);
    if (s.period_start_years.front() > 1950) fit.initial_level_substituted.push_back(s.country_id);
    for (std::size_t t = 0; t + 1 < s.size(); ++t) {
      const double gap = s.female[t] - s.male[t];
      const double next_gap = s.female[t + 1] - s.male[t + 1];
      const double l = s.female[t];
      if (l > fixed.regime_level) {
        above.push_back({gap, next_gap});
      } else {
        below.push_back({1.0, initial, gap, l, std::max(l - 75.0, 0.0), next_gap});
      }
    }
  }
  const std::size_t total = below.size() + above.size();
  if (total < 30) {
    throw InvalidInput(fmt::format("gap model needs at least 30 transitions, found {}", total));
  }
  fit.transitions_below = below.size();
  fit.transitions_above = above.size();
  fit.params = fixed;

  Design low{Eigen::MatrixXd(static_cast<Eigen::Index>(below.size()), 5),
             Eigen::VectorXd(static_cast<Eigen::Index>(below.size()))};
  for (std::size_t i = 0; i < below.size(); ++i) {
    for (int j = 0; j < 5; ++j) low.x(static_cast<Eigen::Index>(i), j) = below[i][j];
    low.y[static_cast<Eigen::Index>(i)] = below[i][5];
  }
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(5);
  const auto low_fit = fit_t_regression(low, beta, fixed.scale2, fixed.dof, gradient_tolerance,
                                        max_iterations);
  for (int j = 0; j < 5; ++j) fit.params.beta[static_cast<std::size_t>(j)] = beta[j];

  double grad2 = low_fit.gradient_norm * low_fit.gradient_norm;
  bool converged = low_fit.converged;
  fit.iterations = low_fit.iterations;
  fit.loglik = low_fit.loglik;
  if (!above.empty()) {
    Design high{Eigen::MatrixXd(static_cast<Eigen::Index>(above.size()), 1),
                Eigen::VectorXd(static_cast<Eigen::Index>(above.size()))};
    for (std::size_t i = 0; i < above.size(); ++i) {
      high.x(static_cast<Eigen::Index>(i), 0) = above[i][0];
      high.y[static_cast<Eigen::Index>(i)] = above[i][1];
    }
    Eigen::VectorXd gamma = Eigen::VectorXd::Zero(1);
    const auto high_fit = fit_t_regression(high, gamma, fixed.scale2, fixed.dof,
                                           gradient_tolerance, max_iterations);
    fit.params.gamma1 = gamma[0];
    fit.gamma_estimated = true;
    converged = converged && high_fit.converged;
    grad2 += high_fit.gradient_norm * high_fit.gradient_norm;
    fit.iterations = std::max(fit.iterations, high_fit.iterations);
    fit.loglik += high_fit.loglik;
  }
  fit.gradient_norm = std::sqrt(grad2);
  fit.converged = converged;
  return fit;
}

E0Path simulate_e0_trajectory(double female_current, double gap_current, double female_initial,
                              const DoubleLogisticParams& draw, const GapParams& gap, int horizon,
                              Rng& rng, const E0SimulationConfig& config) {
  E0Path path;
  if (horizon <= 0) return path;
  const auto steps = static_cast<std::size_t>(horizon);
  path.female.reserve(steps);
  path.male.reserve(steps);
  std::normal_distribution<double> normal(0.0, 1.0);
  double level = female_current;
  double g = clamp_gap(gap_current, gap);
  for (std::size_t t = 0; t < steps; ++t) {
    const double noise = config.error_scale * config.model.error.sd(level) * normal(rng);
    const double next_level = level + e0_gain(level, draw, config.model.shape) + noise;
    const double gap_noise =
        config.gap_error_scale * sample_student_t(rng, 0.0, gap.scale2, gap.dof);
    const double next_gap = clamp_gap(gap_mean(g, level, female_initial, gap) + gap_noise, gap);
    path.female.push_back(next_level);
    path.male.push_back(next_level - next_gap);
    level = next_level;
    g = next_gap;
  }
  return path;
}

}  // namespace popproj::e0
