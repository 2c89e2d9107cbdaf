#include "iqbart/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "iqbart/ald.hpp"
#include "iqbart/error.hpp"
#include "iqbart/numerics.hpp"

namespace iqbart {

namespace {

constexpr std::size_t kKdeGrid = 2048;
// exp(-x^2/2) underflows to zero beyond this many bandwidths, so a window of
// this half-width gives the same sums as the full kernel.
constexpr double kKernelReach = 39.0;

}  // namespace

QuantileGrid QuantileGrid::draw(const DGPSpec& spec, std::size_t gq, std::size_t gx, Rng& rng) {
  if (gq == 0 || gx == 0) throw InputError("quantile grid sizes must be positive");
  QuantileGrid g;
  g.taus.resize(gq);
  for (auto& t : g.taus) t = rng.uniform();
  std::sort(g.taus.begin(), g.taus.end());
  g.xs = sample_covariates(spec, gx, rng);
  return g;
}

void QuantileGrid::validate() const {
  if (taus.empty() || xs.rows == 0) throw InputError("quantile grid is empty");
  for (double t : taus) QuantileLevel{t};
  if (!std::is_sorted(taus.begin(), taus.end())) throw InputError("quantile grid levels must be ascending");
}

double wasserstein(std::span<const double> true_values, std::span<const double> est_values, WassersteinOrder p) {
  if (true_values.empty()) throw InputError("wasserstein: empty grid");
  if (true_values.size() != est_values.size()) throw InputError("wasserstein: curve lengths differ");
  std::vector<double> gaps(true_values.size());
  for (std::size_t i = 0; i < gaps.size(); ++i) gaps[i] = std::abs(true_values[i] - est_values[i]);
  if (p == WassersteinOrder::Infinity) return *std::max_element(gaps.begin(), gaps.end());
  return num::pairwise_sum(gaps) / static_cast<double>(gaps.size());
}

double wasserstein_mc(const std::function<double(double)>& true_q, const std::function<double(double)>& est_q,
                      std::span<const double> taus, WassersteinOrder p) {
  if (taus.empty()) throw InputError("wasserstein: empty grid");
  std::vector<double> a(taus.size()), b(taus.size());
  for (std::size_t i = 0; i < taus.size(); ++i) {
    a[i] = true_q(taus[i]);
    b[i] = est_q(taus[i]);
  }
  return wasserstein(a, b, p);
}

MetricReport report(const CurveFn& true_curve, const CurveFn& est_curve, const QuantileGrid& grid) {
  grid.validate();
  MetricReport r;
  const std::size_t m = grid.xs.rows;
  r.w1.resize(m);
  r.winf.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto x = grid.xs.row(i);
    const auto t = true_curve(x, grid.taus);
    const auto e = est_curve(x, grid.taus);
    r.w1[i] = wasserstein(t, e, WassersteinOrder::One);
    r.winf[i] = wasserstein(t, e, WassersteinOrder::Infinity);
  }
  return summarize(std::move(r.w1), std::move(r.winf));
}

MetricReport summarize(std::vector<double> w1, std::vector<double> winf) {
  if (w1.empty() || w1.size() != winf.size()) throw InputError("metric report: need matching nonempty vectors");
  MetricReport r;
  const auto m = static_cast<double>(w1.size());
  r.avg_w1 = num::pairwise_sum(w1) / m;
  r.avg_winf = num::pairwise_sum(winf) / m;
  r.sup_w1 = *std::max_element(w1.begin(), w1.end());
  r.sup_winf = *std::max_element(winf.begin(), winf.end());
  r.w1 = std::move(w1);
  r.winf = std::move(winf);
  return r;
}

double crps(const std::function<double(double)>& quantile_fn, double y, std::size_t n_scores) {
  if (n_scores == 0) throw InputError("crps: n_scores must be positive");
  const auto k = static_cast<double>(n_scores);
  std::vector<double> scores(n_scores);
  for (std::size_t i = 0; i < n_scores; ++i) {
    const double tau = (static_cast<double>(i) + 0.5) / k;
    scores[i] = check_loss(y - quantile_fn(tau), tau);
  }
  return 2.0 * num::pairwise_sum(scores) / k;
}

void IntervalForecast::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("interval forecast: alpha must lie in (0, 1)");
  if (!(lower <= upper)) throw InputError("interval forecast: lower exceeds upper");
}

double interval_score(double y, const IntervalForecast& f) {
  f.validate();
  double s = f.upper - f.lower;
  if (y < f.lower) s += 2.0 / f.alpha * (f.lower - y);
  if (y > f.upper) s += 2.0 / f.alpha * (y - f.upper);
  return s;
}

double msis(std::span<const double> history, double y_future, const IntervalForecast& f) {
  if (history.size() < 2) throw InputError("msis: history needs at least 2 values");
  double total = 0.0;
  for (std::size_t t = 1; t < history.size(); ++t) total += std::abs(history[t] - history[t - 1]);
  const double scale = total / static_cast<double>(history.size() - 1);
  if (!(scale > 0.0)) throw InputError("msis: constant history gives a zero scale");
  return interval_score(y_future, f) / scale;
}

std::size_t kde_mode_count(std::span<const double> samples, double h) {
  if (samples.empty() || !(h > 0.0)) throw InputError("kde: need samples and a positive bandwidth");
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double lo = s.front() - 3.0 * h, hi = s.back() + 3.0 * h;
  const double step = (hi - lo) / static_cast<double>(kKdeGrid - 1);
  std::vector<double> density(kKdeGrid);
  std::size_t first = 0, last = 0;
  for (std::size_t g = 0; g < kKdeGrid; ++g) {
    const double at = lo + step * static_cast<double>(g);
    while (first < s.size() && s[first] < at - kKernelReach * h) ++first;
    while (last < s.size() && s[last] <= at + kKernelReach * h) ++last;
    double acc = 0.0;
    for (std::size_t i = first; i < last; ++i) {
      const double z = (at - s[i]) / h;
      acc += std::exp(-0.5 * z * z);
    }
    density[g] = acc;
  }
  // Count + to - transitions in the signs of the nonzero first differences.
  std::size_t modes = 0;
  int prev = 0;
  for (std::size_t g = 1; g < kKdeGrid; ++g) {
    const double d = density[g] - density[g - 1];
    const int sign = d > 0.0 ? 1 : d < 0.0 ? -1 : 0;
    if (sign == 0) continue;
    if (prev > 0 && sign < 0) ++modes;
    prev = sign;
  }
  if (prev > 0) ++modes;  // still rising at the right edge
  return modes;
}

double kde_critical_bandwidth(std::span<const double> samples) {
  if (samples.size() < 10) throw InputError("kde_critical_bandwidth: need at least 10 samples");
  for (double v : samples)
    if (!std::isfinite(v)) throw NonFiniteError("kde_critical_bandwidth: non-finite sample");
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  const double range = *mx - *mn;
  if (!(range > 0.0)) throw InputError("kde_critical_bandwidth: samples have no spread");

  double hi = range;
  while (kde_mode_count(samples, hi) > 1) hi *= 2.0;
  double lo = hi;
  const double floor = 1e-9 * range;
  do {
    lo *= 0.5;
  } while (lo > floor && kde_mode_count(samples, lo) <= 1);
  if (lo <= floor) return lo;
  while (hi - lo > 1e-3 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (kde_mode_count(samples, mid) <= 1) hi = mid;
    else lo = mid;
  }
  return hi;
}

void to_json(nlohmann::json& j, const MetricReport& r) {
  j = nlohmann::json{{"avg_w1", r.avg_w1},     {"sup_w1", r.sup_w1}, {"avg_winf", r.avg_winf},
                     {"sup_winf", r.sup_winf}, {"w1", r.w1},         {"winf", r.winf}};
}

}  // namespace iqbart
