#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace iqbart::num {

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

/// A real number stored as sign and log-magnitude.
struct SignedLog {
  double log_abs = kNegInf;
  int sign = 0;  // -1, 0 or +1
};

inline double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

double log_sum_exp(std::span<const double> terms);

/// Sum of signed terms carried in log space. The result keeps a sign.
SignedLog signed_log_sum_exp(std::span<const SignedLog> terms);

/// exp(x^2) erfc(x).
double erfcx(double x);

/// Mills ratio Q(t) / phi(t) of the standard normal.
double mills_ratio(double t);

double normal_cdf(double z);
double normal_quantile(double p);

/// log of the integral over [lo, hi] of exp(a + b c - h c^2), h > 0.
/// Either bound may be infinite. Stable for modes far outside the interval.
double log_gaussian_piece(double a, double b, double h, double lo, double hi);

/// Linear-interpolation ("type 7") quantile of nondecreasing data.
double empirical_quantile(std::span<const double> sorted, double tau);

/// Sorts a copy and evaluates empirical_quantile at each tau.
std::vector<double> empirical_quantiles(std::vector<double> values, std::span<const double> taus);

/// Deterministic pairwise summation; fixed reduction order.
double pairwise_sum(std::span<const double> values);

}  // namespace iqbart::num
