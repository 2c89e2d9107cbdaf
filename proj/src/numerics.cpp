#include "iqbart/numerics.hpp"

#include <algorithm>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

#include "iqbart/error.hpp"

namespace iqbart::num {

double log_sum_exp(std::span<const double> terms) {
  double hi = kNegInf;
  for (double t : terms) hi = std::max(hi, t);
  if (hi == kNegInf) return kNegInf;
  if (hi == kInf) return kInf;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - hi);
  return hi + std::log(acc);
}

SignedLog signed_log_sum_exp(std::span<const SignedLog> terms) {
  double hi = kNegInf;
  for (const auto& t : terms)
    if (t.sign != 0) hi = std::max(hi, t.log_abs);
  if (hi == kNegInf) return {};
  double pos = 0.0;
  double neg = 0.0;
  for (const auto& t : terms) {
    if (t.sign > 0) pos += std::exp(t.log_abs - hi);
    else if (t.sign < 0) neg += std::exp(t.log_abs - hi);
  }
  const double diff = pos - neg;
  if (diff == 0.0) return {};
  return {hi + std::log(std::abs(diff)), diff > 0.0 ? 1 : -1};
}

double erfcx(double x) {
  if (x < 0.0) return 2.0 * std::exp(x * x) - erfcx(-x);
  if (x < 26.0) return std::exp(x * x) * std::erfc(x);
  const double r = 1.0 / (x * x);
  const double series = 1.0 - r * (0.5 - r * (0.75 - r * (1.875 - r * 6.5625)));
  return series / (x * std::sqrt(std::numbers::pi));
}

double mills_ratio(double t) {
  return std::sqrt(std::numbers::pi / 2.0) * erfcx(t / std::numbers::sqrt2);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw InputError("normal_quantile: p outside (0,1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double log_gaussian_piece(double a, double b, double h, double lo, double hi) {
  if (!(hi > lo)) return kNegInf;
  const double s = 1.0 / std::sqrt(2.0 * h);
  const double mode = b / (2.0 * h);
  const auto f = [&](double c) { return std::isinf(c) ? kNegInf : a + c * (b - h * c); };
  const double z_lo = std::isinf(lo) ? lo : (lo - mode) / s;
  const double z_hi = std::isinf(hi) ? hi : (hi - mode) / s;

  if (z_hi <= 0.0) {
    // Entire interval left of the mode: anchor at hi.
    const double f_hi = f(hi);
    double bracket = mills_ratio(-z_hi);
    if (!std::isinf(lo)) bracket -= std::exp(f(lo) - f_hi) * mills_ratio(-z_lo);
    return std::log(s) + f_hi + std::log(bracket);
  }
  if (z_lo >= 0.0) {
    const double f_lo = f(lo);
    double bracket = mills_ratio(z_lo);
    if (!std::isinf(hi)) bracket -= std::exp(f(hi) - f_lo) * mills_ratio(z_hi);
    return std::log(s) + f_lo + std::log(bracket);
  }
  // Interval straddles the mode; erf terms have opposite signs, no cancellation.
  const double peak = a + b * b / (4.0 * h);
  const double mass = 0.5 * (std::erf(z_hi / std::numbers::sqrt2) - std::erf(z_lo / std::numbers::sqrt2));
  return peak + std::log(s) + kLogSqrt2Pi + std::log(mass);
}

double empirical_quantile(std::span<const double> sorted, double tau) {
  if (sorted.empty()) throw InputError("empirical_quantile: empty input");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * tau;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

std::vector<double> empirical_quantiles(std::vector<double> values, std::span<const double> taus) {
  std::sort(values.begin(), values.end());
  std::vector<double> out;
  out.reserve(taus.size());
  for (double t : taus) out.push_back(empirical_quantile(values, t));
  return out;
}

double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 16) {
    double acc = 0.0;
    for (double v : values) acc += v;
    return acc;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

}  // namespace iqbart::num
