#include "iqbart/ald.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "iqbart/error.hpp"

namespace iqbart {

QuantileLevel::QuantileLevel(double tau) : tau_(tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw InputError("quantile level must lie in (0,1), got " + std::to_string(tau));
}

ALDParams::ALDParams(double mu_, double lambda_, QuantileLevel tau_) : mu(mu_), lambda(lambda_), tau(tau_) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw InputError("ALD scale must be positive");
}

double ald_log_density(double y, const ALDParams& p) {
  const double t = p.tau.value();
  return std::log(t * (1.0 - t) / p.lambda) - check_loss(y - p.mu, t) / p.lambda;
}

double sample_quantile(std::span<const double> y, QuantileLevel tau) {
  if (y.empty()) throw InputError("sample_quantile: empty input");
  std::vector<double> s(y.begin(), y.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  // The risk has slope k - n tau just right of the k-th order statistic, so the
  // minimizer is the first k (1-based) with k >= n tau. Ties k == n tau make the
  // whole interval optimal; the left end is returned.
  auto k = static_cast<std::size_t>(std::ceil(n * tau.value() - 1e-12));
  k = std::clamp<std::size_t>(k, 1, s.size());
  return s[k - 1];
}

namespace {

// Mean of the density proportional to exp(-c t) on [0, len].
double truncated_exp_mean(double c, double len) {
  const double x = c * len;
  if (std::abs(x) < 1e-3) return len * (0.5 - x / 12.0 + x * x * x / 720.0);
  return 1.0 / c - len / std::expm1(x);
}

// log of the integral of exp(-c t) over [a, b].
double log_exp_integral(double c, double a, double b) {
  const double len = b - a;
  if (c == 0.0) return std::log(len);
  const double ac = std::abs(c);
  return -c * (c > 0.0 ? a : b) + std::log(-std::expm1(-ac * len) / ac);
}

num::SignedLog to_signed_log(double v) {
  if (v == 0.0) return {};
  return {std::log(std::abs(v)), v > 0.0 ? 1 : -1};
}

}  // namespace

void PosteriorMeanWorkspace::build(std::span<const double> y, double tau, double lambda) {
  if (y.empty()) throw InputError("posterior_mean_quantile: empty input");
  if (!(lambda > 0.0)) throw InputError("posterior_mean_quantile: lambda must be positive");
  const std::size_t n = y.size();
  sorted_y.assign(y.begin(), y.end());
  std::sort(sorted_y.begin(), sorted_y.end());
  center = 0.5 * (sorted_y.front() + sorted_y.back());
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = sorted_y[i] - center;

  const double inv_lambda = 1.0 / lambda;
  const double nt = static_cast<double>(n) * tau;
  double weighted_total = 0.0;
  for (double v : z) weighted_total += tau * v;

  log_w.assign(n + 1, 0.0);
  c.assign(n + 1, 0.0);
  psi.assign(n + 1, {});
  log_phi.assign(n + 1, num::kNegInf);

  double prefix = 0.0;
  for (std::size_t k = 0; k <= n; ++k) {
    if (k > 0) prefix += z[k - 1];
    const double slope = static_cast<double>(k) - nt;
    const bool flat = std::abs(slope) < 1e-12;
    c[k] = flat ? 0.0 : slope * inv_lambda;
    log_w[k] = inv_lambda * (prefix - weighted_total);

    double lphi = num::kNegInf;
    double mean = 0.0;
    if (k == 0) {
      // c_0 < 0: integrand exp(|c| mu) on (-inf, z_1].
      lphi = -c[0] * z[0] - std::log(-c[0]);
      mean = z[0] + 1.0 / c[0];
    } else if (k == n) {
      lphi = -c[n] * z[n - 1] - std::log(c[n]);
      mean = z[n - 1] + 1.0 / c[n];
    } else {
      const double a = z[k - 1];
      const double b = z[k];
      if (b > a) {
        lphi = log_exp_integral(c[k], a, b);
        mean = a + (c[k] == 0.0 ? 0.5 * (b - a) : truncated_exp_mean(c[k], b - a));
      }
    }
    log_phi[k] = lphi;
    if (lphi != num::kNegInf) {
      const auto m = to_signed_log(mean);
      psi[k] = {lphi + m.log_abs, m.sign};
    }
  }
}

double PosteriorMeanWorkspace::mean() const {
  const std::size_t terms = log_w.size();
  std::vector<double> den(terms);
  std::vector<num::SignedLog> num_terms(terms);
  for (std::size_t k = 0; k < terms; ++k) {
    den[k] = log_w[k] + log_phi[k];
    num_terms[k] = {log_w[k] + psi[k].log_abs, psi[k].sign};
  }
  const double log_den = num::log_sum_exp(den);
  const auto numer = num::signed_log_sum_exp(num_terms);
  if (!std::isfinite(log_den)) throw NumericError("posterior_mean_quantile: normalizer not finite");
  const double offset = numer.sign == 0 ? 0.0 : numer.sign * std::exp(numer.log_abs - log_den);
  return center + offset;
}

double posterior_mean_quantile(std::span<const double> y, QuantileLevel tau, double lambda) {
  if (y.empty()) throw InputError("posterior_mean_quantile: empty input");
  if (!(lambda > 0.0)) throw InputError("posterior_mean_quantile: lambda must be positive");
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  if (*lo == *hi) {
    // Every interval between order statistics is empty; the posterior is a
    // two-sided exponential around the common value.
    const double n = static_cast<double>(y.size());
    return *lo + lambda / (n * (1.0 - tau.value())) - lambda / (n * tau.value());
  }
  PosteriorMeanWorkspace ws;
  ws.build(y, tau.value(), lambda);
  return ws.mean();
}

}  // namespace iqbart
