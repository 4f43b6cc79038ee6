#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace popproj {

using Rng = std::mt19937_64;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Independent stream derived from a base seed and up to three stream ids.
Rng make_rng(std::uint64_t seed, std::uint64_t stream_a = 0, std::uint64_t stream_b = 0,
             std::uint64_t stream_c = 0);

double normal_cdf(double x);
double normal_logpdf(double x, double mean, double sd);

/// log(Phi(b) - Phi(a)) for a < b, accurate in either tail.
double log_normal_mass(double a, double b);

/// Log density of N(mean, sd^2) truncated to [lo, hi], including the
/// normalizing constant. -inf outside [lo, hi] or when sd <= 0.
double truncated_normal_logpdf(double x, double mean, double sd, double lo, double hi);

double sample_truncated_normal(Rng& rng, double mean, double sd, double lo, double hi);

/// Log density of a location-scale Student t with `scale2` the squared scale.
double student_t_logpdf(double x, double location, double scale2, double dof);

double sample_student_t(Rng& rng, double location, double scale2, double dof);

/// Folds x back into [lo, hi] by repeated reflection at the bounds.
double reflect_into(double x, double lo, double hi);

}  // namespace popproj
