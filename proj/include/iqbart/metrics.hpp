#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "iqbart/data.hpp"
#include "iqbart/dgp.hpp"
#include "iqbart/rng.hpp"

namespace iqbart {

/// Shared evaluation grid: ascending quantile levels and covariate points.
struct QuantileGrid {
  std::vector<double> taus;
  Matrix xs;

  /// gq iid U(0,1) levels (sorted) and gx draws from the DGP covariate law.
  static QuantileGrid draw(const DGPSpec& spec, std::size_t gq, std::size_t gx, Rng& rng);
  void validate() const;
};

enum class WassersteinOrder { One, Infinity };

/// Mean (p = 1) or maximum (p = infinity) of |true - est| over the levels.
double wasserstein_mc(const std::function<double(double)>& true_q, const std::function<double(double)>& est_q,
                      std::span<const double> taus, WassersteinOrder p);

/// Same on pre-evaluated curves.
double wasserstein(std::span<const double> true_values, std::span<const double> est_values, WassersteinOrder p);

struct MetricReport {
  double avg_w1 = 0.0;
  double sup_w1 = 0.0;
  double avg_winf = 0.0;
  double sup_winf = 0.0;
  std::vector<double> w1;    // per covariate point
  std::vector<double> winf;  // per covariate point
};

/// A quantile curve at covariate x over an ascending level grid.
using CurveFn = std::function<std::vector<double>(std::span<const double> x, std::span<const double> taus)>;

MetricReport report(const CurveFn& true_curve, const CurveFn& est_curve, const QuantileGrid& grid);

/// Averages and suprema of per-point values.
MetricReport summarize(std::vector<double> w1, std::vector<double> winf);

/// (2 / K) sum_k rho_{tau_k}(y - q(tau_k)) with tau_k = (k - 0.5) / K.
double crps(const std::function<double(double)>& quantile_fn, double y, std::size_t n_scores = 100);

struct IntervalForecast {
  double lower = 0.0;
  double upper = 0.0;
  double alpha = 0.1;

  void validate() const;
};

double interval_score(double y, const IntervalForecast& f);

/// Interval score over the mean absolute first difference of the history.
double msis(std::span<const double> history, double y_future, const IntervalForecast& f);

/// Number of strict local maxima of the Gaussian KDE with bandwidth h on a
/// 2048-point grid spanning [min - 3h, max + 3h].
std::size_t kde_mode_count(std::span<const double> samples, double h);

/// Smallest bandwidth giving a unimodal KDE, by bisection to relative 1e-3.
double kde_critical_bandwidth(std::span<const double> samples);

void to_json(nlohmann::json& j, const MetricReport& r);

}  // namespace iqbart
