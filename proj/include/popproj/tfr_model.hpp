#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "popproj/distributions.hpp"

namespace popproj::tfr {

inline constexpr double kReplacementTfr = 2.1;

enum class Phase { kI = 1, kII = 2, kIII = 3 };

/// Observed TFR for one country on a contiguous 5-year grid.
struct TfrSeries {
  std::string country_id;
  std::vector<double> values;
  std::vector<int> period_start_years;
  std::vector<Phase> phases;  // empty until classified

  std::size_t size() const { return values.size(); }
  void validate() const;
};

struct PhaseRule {
  /// Phase II starts at the maximum once a decline of this size follows it.
  double phase2_min_decline = 0.5;
  /// Phase III needs two consecutive increases with every value below this.
  double phase3_ceiling = 2.0;
};

/// Annotates phases. Idempotent; short or degenerate series stay in their
/// initial phase.
TfrSeries classify_phases(TfrSeries series, const PhaseRule& rule = {});

/// Index of the first Phase III observation, or size() when there is none.
std::size_t phase3_start(const TfrSeries& series);

// ---------------------------------------------------------------------------
// Phase II: double-logistic decline

/// Where the first logistic is centred. The printed model uses
/// (nabla2 + nabla3 + nabla4) - 0.5 nabla1; the cumulative reading uses
/// (nabla2 + nabla3 + nabla4) + 0.5 nabla1, which keeps the two midpoints
/// ordered for every admissible parameter vector.
enum class MidpointConvention { kAsPrinted, kCumulative };

struct PhaseIIParams {
  std::array<double, 4> widths{};  // nabla_1..nabla_4
  double max_decline = 0.0;        // d

  double total_width() const { return widths[0] + widths[1] + widths[2] + widths[3]; }
};

inline constexpr double kLogisticSlope = 4.394449154672439;  // 2 ln 9
inline constexpr double kWidthFloor = 1e-6;

/// Five-year decrement r(f | delta). Defined for any finite f; the model
/// only evaluates it at f > 0.
double phase2_decrement(double f, const PhaseIIParams& params,
                        MidpointConvention convention = MidpointConvention::kAsPrinted);

/// Piecewise-linear tent for the Phase II error sd, inflated before a cutoff
/// year.
struct Phase2ErrorModel {
  double sigma_max = 0.3;
  double f_peak = 4.0;
  double sigma_floor = 0.05;
  double f_low = 1.0;
  double f_high = 8.5;
  double early_factor = 1.5;
  int early_cutoff_year = 1975;

  double sd(double f, int period_start_year) const;
  void validate() const;
};

/// Support of the country parameters and of the world hyperparameters.
struct PhaseIIBounds {
  std::array<double, 5> lower{0.05, 0.0, 0.05, 0.0, 0.125};
  std::array<double, 5> upper{10.0, 10.0, 10.0, 10.0, 5.0};
  std::array<double, 5> spread_upper{5.0, 5.0, 5.0, 5.0, 2.5};
  double max_total_width = 10.0;
};

struct Phase2Config {
  Phase2ErrorModel error;
  PhaseIIBounds bounds;
  MidpointConvention convention = MidpointConvention::kAsPrinted;
};

/// World distribution h(., phi): independent truncated normals per
/// component (nabla_1..4, d).
struct PhaseIIWorld {
  std::array<double, 5> mean{};
  std::array<double, 5> sd{};
};

std::array<double, 5> as_array(const PhaseIIParams& p);
PhaseIIParams from_array(const std::array<double, 5>& v);

/// Gaussian log likelihood of the Phase II -> Phase II transitions.
double phase2_transition_loglik(const TfrSeries& series, const PhaseIIParams& params,
                                const Phase2Config& config);
double phase2_country_logprior(const PhaseIIParams& params, const PhaseIIWorld& world,
                               const Phase2Config& config);
double phase2_world_logprior(const PhaseIIWorld& world, const Phase2Config& config);

/// Full log posterior (up to a constant): likelihood + country priors +
/// hyperpriors. -inf outside the support.
double phase2_loglik(std::span<const TfrSeries> series, std::span<const PhaseIIParams> params,
                     const PhaseIIWorld& world, const Phase2Config& config);

/// Number of Phase II -> Phase II transitions in a series.
std::size_t phase2_transition_count(const TfrSeries& series);

// ---------------------------------------------------------------------------
// Phase III: AR(1) recovery

/// Gaussian AR(1) log likelihood of the Phase III transitions around `mu`.
double phase3_ar_loglik(const TfrSeries& series, double mu, double rho, double sigma);
std::size_t phase3_transition_count(const TfrSeries& series);

struct Phase3Mle {
  double mu = kReplacementTfr;
  double rho = 0.0;
  double sigma = 0.0;
  double se_rho = 0.0;
  double se_sigma = 0.0;
  std::size_t transitions = 0;
  double loglik = 0.0;
  bool rho_identified = true;
  bool rho_at_boundary = false;
  bool sigma_at_boundary = false;
};

/// Conditional Gaussian MLE with mu fixed. The profile likelihood is
/// quadratic in rho, so the estimate is the least-squares slope projected
/// onto [0, 1). Standard errors are the usual asymptotic ones.
Phase3Mle phase3_mle(std::span<const TfrSeries> series, double mu = kReplacementTfr);

struct Phase3Country {
  double mu = kReplacementTfr;
  double rho = 0.0;
};

struct Phase3World {
  double mu_mean = 2.0;
  double mu_sd = 0.1;
  double rho_mean = 0.8;
  double rho_sd = 0.1;
  double sigma_eps = 0.1;
};

struct Phase3Bounds {
  double mu_mean_upper = kReplacementTfr;
  double mu_sd_upper = 0.318;
  double rho_sd_upper = 0.289;
  double sigma_eps_upper = 0.5;
};

double phase3_country_logprior(const Phase3Country& country, const Phase3World& world);
double phase3_world_logprior(const Phase3World& world, const Phase3Bounds& bounds = {});

/// AR(1) likelihood + truncated-normal country densities + uniform
/// hyperpriors. -inf outside the prior support.
double phase3_hier_loglik(std::span<const TfrSeries> series,
                          std::span<const Phase3Country> countries, const Phase3World& world,
                          const Phase3Bounds& bounds = {});

// ---------------------------------------------------------------------------
// Simulation

/// Parameters driving one trajectory: a joint posterior draw.
struct TfrDraw {
  PhaseIIParams phase2;
  bool has_phase2 = false;
  double phase3_mu = kReplacementTfr;
  double phase3_rho = 0.89;
  double phase3_sigma = 0.10;
};

struct TfrSimulationConfig {
  Phase2Config phase2;
  PhaseRule rule;
  double tfr_floor = 0.5;
  int first_period_start_year = 2010;
  /// When false, a Phase II path never switches to Phase III.
  bool allow_phase3_switch = true;
  /// Scale on all stochastic errors (0 gives the deterministic path).
  double error_scale = 1.0;
};

/// Simulates `horizon` future values after `history` (observed values,
/// the last one current). Phase II follows the decrement model until the
/// Phase III rule fires on the combined path; Phase III follows the AR(1).
std::vector<double> simulate_tfr_trajectory(std::span<const double> history, Phase phase,
                                            const TfrDraw& draw, int horizon, Rng& rng,
                                            const TfrSimulationConfig& config);

// ---------------------------------------------------------------------------
// Deterministic UN-style baseline

inline constexpr double kUnUltimateTfr = 1.85;
inline constexpr double kUnRecoveryStep = 0.05;
inline constexpr double kUnVariantOffset = 0.5;

struct UnScenario {
  std::vector<double> medium;
  std::vector<double> low;
  std::vector<double> high;
};

/// Deterministic decline pattern: the double-logistic decrement with fixed
/// parameters.
struct UnDeclinePattern {
  std::string name;
  PhaseIIParams params;
};

/// Three illustrative decline presets (slow, medium, fast).
std::span<const UnDeclinePattern> un_decline_patterns();

/// Above 1.85 the pattern's decrement applies, stopping at 1.85; below
/// 1.85 the TFR rises by 0.05 per period until it reaches 1.85, then stays.
/// Low/high variants are the medium path -/+ half a child.
UnScenario un_deterministic_tfr(double current, const UnDeclinePattern& pattern, int horizon);

}  // namespace popproj::tfr
