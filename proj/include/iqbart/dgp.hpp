#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "iqbart/ald.hpp"
#include "iqbart/data.hpp"
#include "iqbart/rng.hpp"

namespace iqbart {

enum class DGPKind { DifficultConditional, LSTAR, CovDepMixture, BivariateExample };

struct LSTARParams {
  double rho1 = 0.0;
  double rho2 = 0.9;
  double gamma = 5.0;
  double c = 0.0;
  double sigma = 1.0;
  double nu = 3.0;
};

struct DGPSpec {
  DGPKind kind = DGPKind::CovDepMixture;
  LSTARParams lstar;

  static DGPSpec difficult() { return {DGPKind::DifficultConditional, {}}; }
  static DGPSpec lstar_default() { return {DGPKind::LSTAR, {}}; }
  static DGPSpec mixture() { return {DGPKind::CovDepMixture, {}}; }
  static DGPSpec bivariate() { return {DGPKind::BivariateExample, {}}; }
  /// Accepts difficult, lstar, mixture, bivariate.
  static DGPSpec parse(const std::string& name);

  std::string name() const;
  std::size_t x_dim() const { return kind == DGPKind::BivariateExample ? 2 : 1; }
  std::size_t y_dim() const { return kind == DGPKind::BivariateExample ? 2 : 1; }
  void validate() const;
};

/// n draws from the joint law. LSTAR emits (Z_{t-1}, Z_t) for t = 1..n of a
/// path started at Z_0 = 0.
Dataset sample_joint(const DGPSpec& spec, std::size_t n, Rng& rng);

/// n covariate points from the covariate law; for LSTAR, a path after 1000
/// burn-in steps.
Matrix sample_covariates(const DGPSpec& spec, std::size_t n, Rng& rng);

/// The conditioning vector for the bivariate example is (x1, x2) for the
/// first response and (x1, x2, y1) for the second; the other DGPs take one
/// covariate.
double sample_conditional(const DGPSpec& spec, std::span<const double> x, Rng& rng);
double conditional_cdf(const DGPSpec& spec, std::span<const double> x, double y);

enum class OracleMethod { Analytic, CdfBisection, MonteCarlo };

struct OracleQuantile {
  OracleMethod method = OracleMethod::CdfBisection;
  std::size_t n_oracle = 1000000;
  std::uint64_t seed = 0;

  /// Analytic for LSTAR, CDF bisection otherwise.
  static OracleQuantile default_for(const DGPSpec& spec);
  void validate() const;
};

double true_conditional_quantile(const DGPSpec& spec, std::span<const double> x, QuantileLevel tau,
                                 const OracleQuantile& oracle);

/// Oracle quantiles at an ascending tau grid; Monte Carlo shares one pool.
std::vector<double> true_quantile_curve(const DGPSpec& spec, std::span<const double> x, std::span<const double> taus,
                                        const OracleQuantile& oracle);

struct DifficultComponents {
  std::array<double, 3> weights;
  // skew normal
  double alpha1, sigma1, xi1;
  // two-t mixture
  double center2, gap, sigma2;
  static constexpr double nu2 = 1.2;
  // scaled Beta / t mixture
  double a_b, b_b, sigma_b, lambda_b, mu_t, sigma_t;
  static constexpr double nu_t = 1.5;
  static constexpr double beta_weight = 0.85;
};

DifficultComponents difficult_conditional_components(double x);

/// f0(x) = 5 e^{15(x-0.5)} / (1 + e^{15(x-0.5)}) - 4x.
double mixture_f0(double x);

}  // namespace iqbart
