#include "popproj/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

namespace popproj {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

// upper tail Phi(-x) for any x
double upper_tail(double x) { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

}  // namespace

Rng make_rng(std::uint64_t seed, std::uint64_t stream_a, std::uint64_t stream_b,
             std::uint64_t stream_c) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_a), static_cast<std::uint32_t>(stream_a >> 32),
                    static_cast<std::uint32_t>(stream_b), static_cast<std::uint32_t>(stream_b >> 32),
                    static_cast<std::uint32_t>(stream_c), static_cast<std::uint32_t>(stream_c >> 32)};
  return Rng(seq);
}

double normal_cdf(double x) { return upper_tail(-x); }

double normal_logpdf(double x, double mean, double sd) {
  if (!(sd > 0.0)) return kNegInf;
  const double z = (x - mean) / sd;
  return -kLogSqrt2Pi - std::log(sd) - 0.5 * z * z;
}

double log_normal_mass(double a, double b) {
  if (!(a < b)) return kNegInf;
  double mass;
  if (a > 0.0) {
    mass = upper_tail(a) - upper_tail(b);
  } else if (b < 0.0) {
    mass = upper_tail(-b) - upper_tail(-a);
  } else {
    mass = 1.0 - upper_tail(-a) - upper_tail(b);
  }
  if (mass > 0.0) return std::log(mass);
  // both bounds deep in one tail: Mills-ratio approximation of the nearer bound
  const double edge = a > 0.0 ? a : -b;
  return -0.5 * edge * edge - std::log(edge) - kLogSqrt2Pi;
}

double truncated_normal_logpdf(double x, double mean, double sd, double lo, double hi) {
  if (!(sd > 0.0) || x < lo || x > hi || std::isnan(x)) return kNegInf;
  return normal_logpdf(x, mean, sd) - log_normal_mass((lo - mean) / sd, (hi - mean) / sd);
}

double sample_truncated_normal(Rng& rng, double mean, double sd, double lo, double hi) {
  const double a = (lo - mean) / sd;
  const double b = (hi - mean) / sd;
  const double mass = std::exp(log_normal_mass(a, b));
  if (mass > 0.2) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (;;) {
      const double z = normal(rng);
      if (z >= a && z <= b) return mean + sd * z;
    }
  }
  // inverse cdf, worked in the tail that keeps precision
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  double z;
  if (a > 0.0) {
    const double qa = upper_tail(a);
    const double qb = upper_tail(b);
    const double q = qa - u * (qa - qb);
    z = std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * q);
  } else {
    const double pa = normal_cdf(a);
    const double pb = normal_cdf(b);
    const double p = pa + u * (pb - pa);
    z = -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
  }
  return std::clamp(mean + sd * z, lo, hi);
}

double student_t_logpdf(double x, double location, double scale2, double dof) {
  if (!(scale2 > 0.0) || !(dof > 0.0)) return kNegInf;
  const double r2 = (x - location) * (x - location) / scale2;
  return std::lgamma(0.5 * (dof + 1.0)) - std::lgamma(0.5 * dof) -
         0.5 * std::log(dof * std::numbers::pi * scale2) -
         0.5 * (dof + 1.0) * std::log1p(r2 / dof);
}

double sample_student_t(Rng& rng, double location, double scale2, double dof) {
  std::student_t_distribution<double> t(dof);
  return location + std::sqrt(scale2) * t(rng);
}

double reflect_into(double x, double lo, double hi) {
  if (std::isnan(x)) return x;
  const bool lo_finite = std::isfinite(lo);
  const bool hi_finite = std::isfinite(hi);
  if (lo_finite && hi_finite) {
    const double width = hi - lo;
    if (width <= 0.0) return lo;
    // fold onto a period of 2*width
    double y = std::fmod(x - lo, 2.0 * width);
    if (y < 0.0) y += 2.0 * width;
    return y <= width ? lo + y : hi - (y - width);
  }
  if (lo_finite && x < lo) return 2.0 * lo - x;
  if (hi_finite && x > hi) return 2.0 * hi - x;
  return x;
}

}  // namespace popproj
