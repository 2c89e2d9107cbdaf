#include "iqbart/dgp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include <boost/math/distributions/skew_normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>

#include "iqbart/error.hpp"
#include "iqbart/numerics.hpp"

namespace iqbart {

namespace {

constexpr double kPi = std::numbers::pi;

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

double t_cdf(double z, double nu) { return boost::math::cdf(boost::math::students_t_distribution<double>(nu), z); }

constexpr double kMixtureSd2 = 0.027;  // variance 0.3^3 as printed

double mixture_weight(double x) { return std::exp(-10.0 * (x - 0.8) * (x - 0.8)); }

struct Bivariate1 {
  double w, mean, sd, rate;
};

Bivariate1 bivariate_first(double x1, double x2) {
  return {logistic(2.0 * x1 - 1.0), x1 + x2, 0.2 + 0.3 * x2, 2.0 + 3.0 * x1};
}

void check_x(const DGPSpec& spec, std::span<const double> x) {
  const bool ok = spec.kind == DGPKind::BivariateExample ? (x.size() == 2 || x.size() == 3) : x.size() == 1;
  if (!ok) throw InputError(spec.name() + ": conditioning vector has wrong length " + std::to_string(x.size()));
  for (double v : x)
    if (!std::isfinite(v)) throw NonFiniteError(spec.name() + ": non-finite conditioning value");
}

double lstar_mean(const LSTARParams& p, double z) { return p.rho1 * z + p.rho2 * logistic(p.gamma * (z - p.c)) * z; }

std::uint64_t hash_point(std::span<const double> x) {
  std::uint64_t h = 1469598103934665603ULL;
  for (double v : x) {
    h ^= std::bit_cast<std::uint64_t>(v);
    h *= 1099511628211ULL;
  }
  return h;
}

double bisect_quantile(const DGPSpec& spec, std::span<const double> x, double tau, double lo_hint) {
  const auto f = [&](double y) { return conditional_cdf(spec, x, y) - tau; };
  double lo = std::isfinite(lo_hint) ? lo_hint : -1.0;
  double hi = lo + 2.0;
  double step = 2.0;
  while (f(lo) > 0.0) {
    hi = lo;
    lo -= step;
    step *= 2.0;
    if (step > 1e300) throw NumericError("oracle bracket search failed");
  }
  step = 2.0;
  while (f(hi) < 0.0) {
    lo = hi;
    hi += step;
    step *= 2.0;
    if (step > 1e300) throw NumericError("oracle bracket search failed");
  }
  if (f(lo) == 0.0) return lo;
  std::uintmax_t iters = 300;
  const auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-10 * std::max(1.0, std::abs(a)); };
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, tol, iters);
  return 0.5 * (a + b);
}

}  // namespace

double mixture_f0(double x) {
  const double e = std::exp(15.0 * (x - 0.5));
  return std::isinf(e) ? 5.0 - 4.0 * x : 5.0 * e / (1.0 + e) - 4.0 * x;
}

DifficultComponents difficult_conditional_components(double x) {
  DifficultComponents c{};
  const std::array<double, 3> logits{5.0 - 20.0 * std::abs(x - 0.2), 5.0 - 20.0 * std::abs(x - 0.55),
                                     5.0 - 20.0 * std::abs(x - 0.85)};
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t k = 0; k < 3; ++k) total += c.weights[k] = std::exp(logits[k] - top);
  for (auto& w : c.weights) w /= total;

  const double base = 1.0 + std::sin(0.8 * kPi * x);
  c.alpha1 = 20.0 * logistic(15.0 * (x - 0.25));
  c.sigma1 = 0.1 + 3.0 * logistic(10.0 * (x - 0.15));
  c.xi1 = base - c.sigma1 * c.alpha1 / std::sqrt(1.0 + c.alpha1 * c.alpha1) * std::sqrt(2.0 / kPi);

  c.center2 = base;
  c.gap = 6.0 * logistic(15.0 * (x - 0.4));
  c.sigma2 = 0.1 + 0.2 * logistic(10.0 * (x - 0.3));

  c.a_b = std::max(0.05, 0.2 + 0.3 * std::sin(2.5 * kPi * (x - 0.6)));
  c.b_b = std::max(0.05, 0.2 + 0.3 * std::cos(2.5 * kPi * (x - 0.6)));
  c.sigma_b = std::max(0.5, 2.0 + 2.0 * std::sin(2.0 * kPi * (x - 0.6)));
  const double target = base - 3.0 * logistic(10.0 * (x - 0.7));
  c.mu_t = target + 3.0 + 2.0 * std::sin(3.0 * kPi * (x - 0.6));
  c.sigma_t = 0.3 + 0.2 * logistic(15.0 * (x - 0.8));
  // Mean of the 0.85 / 0.15 mixture equals `target`.
  const double w = DifficultComponents::beta_weight;
  c.lambda_b = (target - (1.0 - w) * c.mu_t) / (w * c.sigma_b) - c.a_b / (c.a_b + c.b_b);
  return c;
}

DGPSpec DGPSpec::parse(const std::string& name) {
  if (name == "difficult") return difficult();
  if (name == "lstar") return lstar_default();
  if (name == "mixture") return mixture();
  if (name == "bivariate") return bivariate();
  throw InputError("unknown DGP '" + name + "' (expected difficult, lstar, mixture or bivariate)");
}

std::string DGPSpec::name() const {
  switch (kind) {
    case DGPKind::DifficultConditional: return "difficult";
    case DGPKind::LSTAR: return "lstar";
    case DGPKind::CovDepMixture: return "mixture";
    case DGPKind::BivariateExample: return "bivariate";
  }
  return "unknown";
}

void DGPSpec::validate() const {
  if (kind != DGPKind::LSTAR) return;
  const auto& p = lstar;
  for (double v : {p.rho1, p.rho2, p.gamma, p.c, p.sigma, p.nu})
    if (!std::isfinite(v)) throw InputError("lstar: parameters must be finite");
  if (!(p.sigma > 0.0)) throw InputError("lstar: sigma must be positive");
  if (!(p.nu > 0.0)) throw InputError("lstar: nu must be positive");
}

double sample_conditional(const DGPSpec& spec, std::span<const double> x, Rng& rng) {
  check_x(spec, x);
  switch (spec.kind) {
    case DGPKind::DifficultConditional: {
      const auto c = difficult_conditional_components(x[0]);
      const double u = rng.uniform();
      if (u < c.weights[0]) {
        const double delta = c.alpha1 / std::sqrt(1.0 + c.alpha1 * c.alpha1);
        const double z = delta * std::abs(rng.normal()) + std::sqrt(1.0 - delta * delta) * rng.normal();
        return c.xi1 + c.sigma1 * z;
      }
      if (u < c.weights[0] + c.weights[1]) {
        const double center = rng.uniform() < 0.5 ? c.center2 + c.gap : c.center2 - c.gap;
        return center + c.sigma2 * rng.student_t(DifficultComponents::nu2);
      }
      if (rng.uniform() < DifficultComponents::beta_weight) return c.sigma_b * (rng.beta(c.a_b, c.b_b) + c.lambda_b);
      return c.mu_t + c.sigma_t * rng.student_t(DifficultComponents::nu_t);
    }
    case DGPKind::LSTAR: {
      const auto& p = spec.lstar;
      return lstar_mean(p, x[0]) + p.sigma * rng.student_t(p.nu);
    }
    case DGPKind::CovDepMixture: {
      const double f0 = mixture_f0(x[0]);
      if (rng.uniform() < mixture_weight(x[0])) return f0 + rng.normal(2.0 * x[0] - 0.6, std::sqrt(kMixtureSd2));
      return f0 + rng.log_gamma(x[0] * x[0] + 0.5);
    }
    case DGPKind::BivariateExample: {
      if (x.size() == 3) return rng.normal(0.5 * x[2] + x[0] * x[1], 0.1 + 0.2 * x[0]);
      const auto b = bivariate_first(x[0], x[1]);
      if (rng.uniform() < b.w) return rng.exponential(b.rate);
      return rng.normal(b.mean, b.sd);
    }
  }
  return 0.0;
}

double conditional_cdf(const DGPSpec& spec, std::span<const double> x, double y) {
  check_x(spec, x);
  if (std::isnan(y)) throw NonFiniteError("conditional_cdf: NaN response");
  if (y == num::kInf) return 1.0;
  if (y == num::kNegInf) return 0.0;
  switch (spec.kind) {
    case DGPKind::DifficultConditional: {
      const auto c = difficult_conditional_components(x[0]);
      const double p1 = boost::math::cdf(boost::math::skew_normal_distribution<double>(c.xi1, c.sigma1, c.alpha1), y);
      const double p2 = 0.5 * (t_cdf((y - c.center2 - c.gap) / c.sigma2, DifficultComponents::nu2) +
                               t_cdf((y - c.center2 + c.gap) / c.sigma2, DifficultComponents::nu2));
      const double b = std::clamp(y / c.sigma_b - c.lambda_b, 0.0, 1.0);
      const double pb = b <= 0.0 ? 0.0 : b >= 1.0 ? 1.0 : boost::math::ibeta(c.a_b, c.b_b, b);
      const double pt = t_cdf((y - c.mu_t) / c.sigma_t, DifficultComponents::nu_t);
      const double w = DifficultComponents::beta_weight;
      return c.weights[0] * p1 + c.weights[1] * p2 + c.weights[2] * (w * pb + (1.0 - w) * pt);
    }
    case DGPKind::LSTAR: {
      const auto& p = spec.lstar;
      return t_cdf((y - lstar_mean(p, x[0])) / p.sigma, p.nu);
    }
    case DGPKind::CovDepMixture: {
      const double e = y - mixture_f0(x[0]);
      const double w = mixture_weight(x[0]);
      const double pg = num::normal_cdf((e - (2.0 * x[0] - 0.6)) / std::sqrt(kMixtureSd2));
      const double g = std::exp(e);
      const double pl = g == 0.0 ? 0.0 : std::isinf(g) ? 1.0 : boost::math::gamma_p(x[0] * x[0] + 0.5, g);
      return w * pg + (1.0 - w) * pl;
    }
    case DGPKind::BivariateExample: {
      if (x.size() == 3) return num::normal_cdf((y - 0.5 * x[2] - x[0] * x[1]) / (0.1 + 0.2 * x[0]));
      const auto b = bivariate_first(x[0], x[1]);
      const double pe = y <= 0.0 ? 0.0 : -std::expm1(-b.rate * y);
      return b.w * pe + (1.0 - b.w) * num::normal_cdf((y - b.mean) / b.sd);
    }
  }
  return 0.0;
}

Dataset sample_joint(const DGPSpec& spec, std::size_t n, Rng& rng) {
  spec.validate();
  if (n == 0) throw InputError("sample_joint: n must be positive");
  Dataset out;
  out.x = Matrix(n, spec.x_dim());
  out.y = Matrix(n, spec.y_dim());
  switch (spec.kind) {
    case DGPKind::LSTAR: {
      double z = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        const double prev = z;
        z = sample_conditional(spec, {&prev, 1}, rng);
        out.x(t, 0) = prev;
        out.y(t, 0) = z;
      }
      out.x_names = {"z_lag1"};
      out.y_names = {"z"};
      break;
    }
    case DGPKind::BivariateExample: {
      for (std::size_t i = 0; i < n; ++i) {
        const double x1 = rng.uniform(), x2 = rng.uniform();
        const double y1 = sample_conditional(spec, std::array{x1, x2}, rng);
        const double y2 = sample_conditional(spec, std::array{x1, x2, y1}, rng);
        out.x(i, 0) = x1;
        out.x(i, 1) = x2;
        out.y(i, 0) = y1;
        out.y(i, 1) = y2;
      }
      out.x_names = {"x1", "x2"};
      out.y_names = {"y1", "y2"};
      break;
    }
    default: {
      for (std::size_t i = 0; i < n; ++i) {
        const double x = rng.uniform();
        out.x(i, 0) = x;
        out.y(i, 0) = sample_conditional(spec, {&x, 1}, rng);
      }
      out.x_names = {"x"};
      out.y_names = {"y"};
    }
  }
  return out;
}

Matrix sample_covariates(const DGPSpec& spec, std::size_t n, Rng& rng) {
  spec.validate();
  Matrix out(n, spec.x_dim());
  if (spec.kind == DGPKind::LSTAR) {
    double z = 0.0;
    for (int t = 0; t < 1000; ++t) z = sample_conditional(spec, {&z, 1}, rng);
    for (std::size_t i = 0; i < n; ++i) {
      out(i, 0) = z;
      z = sample_conditional(spec, {&z, 1}, rng);
    }
    return out;
  }
  for (auto& v : out.data) v = rng.uniform();
  return out;
}

OracleQuantile OracleQuantile::default_for(const DGPSpec& spec) {
  OracleQuantile o;
  o.method = spec.kind == DGPKind::LSTAR ? OracleMethod::Analytic : OracleMethod::CdfBisection;
  return o;
}

void OracleQuantile::validate() const {
  if (method == OracleMethod::MonteCarlo && n_oracle < 100000)
    throw InputError("Monte Carlo oracle needs at least 1e5 draws");
}

double true_conditional_quantile(const DGPSpec& spec, std::span<const double> x, QuantileLevel tau,
                                 const OracleQuantile& oracle) {
  const double t = tau;
  return true_quantile_curve(spec, x, {&t, 1}, oracle).front();
}

std::vector<double> true_quantile_curve(const DGPSpec& spec, std::span<const double> x, std::span<const double> taus,
                                        const OracleQuantile& oracle) {
  spec.validate();
  oracle.validate();
  check_x(spec, x);
  for (double t : taus) QuantileLevel{t};
  std::vector<double> out(taus.size());
  switch (oracle.method) {
    case OracleMethod::Analytic: {
      if (spec.kind != DGPKind::LSTAR) throw InputError(spec.name() + ": no analytic quantile; use cdf bisection");
      const auto& p = spec.lstar;
      const boost::math::students_t_distribution<double> t(p.nu);
      for (std::size_t i = 0; i < taus.size(); ++i)
        out[i] = lstar_mean(p, x[0]) + p.sigma * boost::math::quantile(t, taus[i]);
      return out;
    }
    case OracleMethod::CdfBisection: {
      double hint = num::kNaN;
      for (std::size_t i = 0; i < taus.size(); ++i) {
        const bool ascending = i > 0 && taus[i] >= taus[i - 1];
        out[i] = bisect_quantile(spec, x, taus[i], ascending ? hint : num::kNaN);
        hint = out[i];
      }
      return out;
    }
    case OracleMethod::MonteCarlo: {
      Rng rng = Rng(oracle.seed).derive(hash_point(x));
      std::vector<double> pool(oracle.n_oracle);
      for (auto& v : pool) v = sample_conditional(spec, x, rng);
      std::sort(pool.begin(), pool.end());
      for (std::size_t i = 0; i < taus.size(); ++i) out[i] = num::empirical_quantile(pool, taus[i]);
      return out;
    }
  }
  return out;
}

}  // namespace iqbart
