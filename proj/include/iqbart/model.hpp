#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "iqbart/ald.hpp"
#include "iqbart/data.hpp"
#include "iqbart/rng.hpp"
#include "iqbart/sampler.hpp"

namespace iqbart {

struct QuantileModel {
  PosteriorDraws draws;
  std::size_t d = 0;
  std::pair<double, double> y_range{0.0, 0.0};
  AugmentationScheme scheme;
  std::vector<std::string> x_names;
  std::string y_name = "y";

  std::size_t num_draws() const { return draws.forests.size(); }
  /// Throws InputError when the model has no draws or inconsistent shapes.
  void validate() const;
};

/// Augments (x, y) with the scheme and runs the sampler. The augmentation
/// stream is derived from cfg.seed, so the whole fit is a function of cfg.
QuantileModel fit_quantile_model(const Matrix& x, std::span<const double> y, const AugmentationScheme& scheme,
                                 const SamplerConfig& cfg, const SweepCallback& progress = {});

/// Mean over posterior draws of the forest at (x, tau).
double plug_in_quantile(const QuantileModel& model, std::span<const double> x, QuantileLevel tau);

/// plug_in_quantile at every tau of an ascending grid, computed by projecting
/// each tree onto the tau axis at this x (no per-tau tree walks).
std::vector<double> plug_in_curve(const QuantileModel& model, std::span<const double> x, std::span<const double> taus);

/// Forest value of every draw at (x, tau).
std::vector<double> draw_values(const QuantileModel& model, std::span<const double> x, QuantileLevel tau);

/// Empirical tau-quantile of n_mc pooled inverse-transform draws.
double predictive_quantile(const QuantileModel& model, std::span<const double> x, QuantileLevel tau, std::size_t n_mc,
                           Rng& rng);

/// As predictive_quantile for a list of levels, sharing one pool.
std::vector<double> predictive_quantiles(const QuantileModel& model, std::span<const double> x,
                                         std::span<const double> taus, std::size_t n_mc, Rng& rng);

/// The n_mc -> infinity limit of predictive_quantiles. At fixed x every draw is
/// a step function of tau, so the predictive law is a finite mixture of atoms
/// weighted by step lengths; returns its left-continuous inverse at each level.
std::vector<double> predictive_quantiles_exact(const QuantileModel& model, std::span<const double> x,
                                               std::span<const double> taus);

/// n draws: a uniformly chosen posterior forest evaluated at (x, u), u ~ U(0,1).
std::vector<double> sample_predictive(const QuantileModel& model, std::span<const double> x, std::size_t n, Rng& rng);

struct CredibleInterval {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.0;
};

/// Equal-tailed band of the draw values at (x, tau), type-7 quantiles.
CredibleInterval credible_interval(const QuantileModel& model, std::span<const double> x, QuantileLevel tau,
                                   double level);

/// Component j models response ordering[j] given (x, earlier responses in
/// the ordering), so its covariate dimension is d + j.
struct MultivariateQuantileModel {
  std::vector<QuantileModel> components;
  std::vector<std::size_t> ordering;

  std::size_t k() const { return components.size(); }
  std::size_t d() const { return components.empty() ? 0 : components.front().d; }
};

/// Empty ordering means column order. Component j uses seed cfg.seed + j.
MultivariateQuantileModel fit_multivariate(const Matrix& x, const Matrix& y, std::vector<std::size_t> ordering,
                                           const AugmentationScheme& scheme, const SamplerConfig& cfg,
                                           const SweepCallback& progress = {});

/// n x k samples, columns in the original response order.
Matrix sample_multivariate(const MultivariateQuantileModel& model, std::span<const double> x, std::size_t n, Rng& rng);

}  // namespace iqbart
