#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "popproj/distributions.hpp"

namespace popproj::e0 {

/// Female and male life expectancy at birth for one country, aligned on a
/// contiguous 5-year grid.
struct E0Series {
  std::string country_id;
  std::vector<double> female;
  std::vector<double> male;
  std::vector<int> period_start_years;

  std::size_t size() const { return female.size(); }
  void validate() const;
};

/// theta^c: four level spans, early asymptotic gain k and late gain z.
struct DoubleLogisticParams {
  std::array<double, 4> spans{};
  double k = 0.0;
  double z = 0.0;

  double total_span() const { return spans[0] + spans[1] + spans[2] + spans[3]; }
};

inline constexpr std::size_t kThetaSize = 6;
inline constexpr double kSpanFloor = 1e-6;
inline constexpr double kMaxLateGain = 1.15;

std::array<double, kThetaSize> as_array(const DoubleLogisticParams& p);
DoubleLogisticParams from_array(const std::array<double, kThetaSize>& v);

struct GainShape {
  double a1 = 4.4;
  double a2 = 0.5;
};

/// Five-year gain g(l | theta). Defined for any finite l; the model uses
/// l in [15, 110].
double e0_gain(double level, const DoubleLogisticParams& params, const GainShape& shape = {});

/// omega(l) = lo + (hi - lo) / (1 + exp((l - mid) / scale)).
struct ErrorScale {
  double hi = 1.0;
  double lo = 0.2;
  double mid = 65.0;
  double scale = 5.0;

  double sd(double level) const;
  void validate() const;
};

struct E0Bounds {
  std::array<double, kThetaSize> lower{0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
  std::array<double, kThetaSize> upper{100.0, 100.0, 100.0, 100.0, 10.0, kMaxLateGain};
  std::array<double, kThetaSize> spread_upper{50.0, 50.0, 50.0, 50.0, 5.0, 2.0};
};

struct E0Config {
  GainShape shape;
  ErrorScale error;
  E0Bounds bounds;
};

/// World means and spreads of the six country parameters.
struct E0World {
  std::array<double, kThetaSize> mean{};
  std::array<double, kThetaSize> sd{};
};

double female_transition_loglik(const E0Series& series, const DoubleLogisticParams& params,
                                const E0Config& config);
double country_logprior(const DoubleLogisticParams& params, const E0World& world,
                        const E0Config& config);
double world_logprior(const E0World& world, const E0Config& config);

/// Gaussian increment likelihood + truncated-normal country terms +
/// bounded-uniform hyperpriors. -inf outside the support.
double e0_hier_loglik(std::span<const E0Series> series,
                      std::span<const DoubleLogisticParams> params, const E0World& world,
                      const E0Config& config);

// ---------------------------------------------------------------------------
// Female-male gap

inline constexpr std::size_t kGapBetaSize = 5;

struct GapParams {
  std::array<double, kGapBetaSize> beta{};
  double gamma1 = 1.0;
  double scale2 = 0.0665;  // squared scale of the t errors
  double dof = 2.0;
  double regime_level = 86.2;  // M
  double cap = 18.0;

  void validate() const;
};

/// Mean of G* given the current state (error excluded).
double gap_mean(double gap, double female_level, double female_initial, const GapParams& params);

/// G_{t+1} = min{(mean + error)_+, cap}.
double clamp_gap(double raw, const GapParams& params);

/// One stochastic gap transition.
double project_gap(double gap, double female_level, double female_initial,
                   const GapParams& params, Rng& rng);

struct GapFit {
  GapParams params;
  std::size_t transitions_below = 0;
  std::size_t transitions_above = 0;
  bool gamma_estimated = false;
  bool converged = false;
  double gradient_norm = 0.0;
  int iterations = 0;
  double loglik = 0.0;
  /// Countries whose series starts after 1950, so the earliest observed
  /// female e0 stood in for the 1950-1955 level.
  std::vector<std::string> initial_level_substituted;
};

/// Earliest observed female e0, used as the 1950-1955 covariate.
double initial_female_level(const E0Series& series);

/// Maximum likelihood for beta and gamma1 with the t scale and dof held at
/// `fixed`'s values. Newton steps with IRLS fallback and backtracking,
/// started from least squares, until the gradient norm is below 1e-8.
GapFit fit_gap_mle(std::span<const E0Series> series, const GapParams& fixed = {},
                   double gradient_tolerance = 1e-8, int max_iterations = 500);

// ---------------------------------------------------------------------------
// Simulation

struct E0Path {
  std::vector<double> female;
  std::vector<double> male;
};

struct E0SimulationConfig {
  E0Config model;
  /// Scale on the female increment error (0 gives the deterministic path).
  double error_scale = 1.0;
  /// Scale on the gap t errors.
  double gap_error_scale = 1.0;
};

E0Path simulate_e0_trajectory(double female_current, double gap_current, double female_initial,
                              const DoubleLogisticParams& draw, const GapParams& gap, int horizon,
                              Rng& rng, const E0SimulationConfig& config);

}  // namespace popproj::e0
