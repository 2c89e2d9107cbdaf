#include "iqbart/model.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "iqbart/error.hpp"
#include "iqbart/numerics.hpp"

namespace iqbart {

namespace {

void check_dim(const QuantileModel& model, std::span<const double> x) {
  if (x.size() != model.d)
    throw InputError("query has " + std::to_string(x.size()) + " covariates, model expects " +
                     std::to_string(model.d));
}

std::vector<double> augmented(std::span<const double> x, double tau) {
  std::vector<double> z(x.begin(), x.end());
  z.push_back(tau);
  return z;
}

struct StepItem {
  int node;
  std::size_t lo, hi;
};

// Adds each reachable leaf value on its grid index range; at x fixed, a tau
// split sends the lower part of the current range left.
void project_tree(const Tree& tree, std::span<const double> x, std::size_t dim, std::span<const double> taus,
                  std::vector<double>& diff, std::vector<StepItem>& stack) {
  const auto& nodes = tree.nodes();
  stack.assign(1, {0, 0, taus.size()});
  while (!stack.empty()) {
    const StepItem it = stack.back();
    stack.pop_back();
    const Node& nd = nodes[static_cast<std::size_t>(it.node)];
    if (nd.is_leaf()) {
      diff[it.lo] += nd.value;
      diff[it.hi] -= nd.value;
      continue;
    }
    const auto f = static_cast<std::size_t>(nd.feature);
    if (f != dim) {
      stack.push_back({x[f] <= nd.threshold ? nd.left : nd.right, it.lo, it.hi});
      continue;
    }
    const auto split = static_cast<std::size_t>(std::upper_bound(taus.begin(), taus.end(), nd.threshold) - taus.begin());
    const std::size_t mid = std::clamp(split, it.lo, it.hi);
    if (it.lo < mid) stack.push_back({nd.left, it.lo, mid});
    if (mid < it.hi) stack.push_back({nd.right, mid, it.hi});
  }
}

// Thresholds of tau splits reachable from x.
void tau_breaks(const Tree& tree, std::span<const double> x, std::size_t dim, std::vector<double>& out,
                std::vector<int>& stack) {
  const auto& nodes = tree.nodes();
  stack.assign(1, 0);
  while (!stack.empty()) {
    const Node& nd = nodes[static_cast<std::size_t>(stack.back())];
    stack.pop_back();
    if (nd.is_leaf()) continue;
    const auto f = static_cast<std::size_t>(nd.feature);
    if (f != dim) {
      stack.push_back(x[f] <= nd.threshold ? nd.left : nd.right);
      continue;
    }
    if (nd.threshold > 0.0 && nd.threshold < 1.0) out.push_back(nd.threshold);
    stack.push_back(nd.left);
    stack.push_back(nd.right);
  }
}

std::vector<double> predictive_pool(const QuantileModel& model, std::span<const double> x, std::size_t n, Rng& rng) {
  check_dim(model, x);
  model.validate();
  std::vector<double> z = augmented(x, 0.5);
  std::vector<double> out(n);
  for (auto& v : out) {
    const auto& forest = model.draws.forests[rng.below(model.num_draws())];
    z.back() = rng.uniform();
    v = forest.eval(z);
  }
  return out;
}

}  // namespace

void QuantileModel::validate() const {
  if (draws.forests.empty()) throw InputError("model has no posterior draws");
  for (const auto& f : draws.forests)
    if (f.trees.empty()) throw InputError("model contains an empty forest");
}

QuantileModel fit_quantile_model(const Matrix& x, std::span<const double> y, const AugmentationScheme& scheme,
                                 const SamplerConfig& cfg, const SweepCallback& progress) {
  if (y.empty()) throw InputError("fit: empty data");
  Rng aug_rng = Rng(cfg.seed).derive(0xa0a0a0a0ULL);
  const AugmentedDataset data = augment(x, y, scheme, aug_rng);
  QuantileModel model;
  model.draws = run_sampler(data, cfg, progress);
  model.d = x.cols;
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
  model.y_range = {*lo, *hi};
  model.scheme = scheme;
  for (std::size_t j = 0; j < x.cols; ++j) model.x_names.push_back("x" + std::to_string(j + 1));
  return model;
}

double plug_in_quantile(const QuantileModel& model, std::span<const double> x, QuantileLevel tau) {
  const auto values = draw_values(model, x, tau);
  return num::pairwise_sum(values) / static_cast<double>(values.size());
}

std::vector<double> plug_in_curve(const QuantileModel& model, std::span<const double> x,
                                  std::span<const double> taus) {
  check_dim(model, x);
  model.validate();
  if (!std::is_sorted(taus.begin(), taus.end())) throw InputError("plug_in_curve: tau grid must be ascending");
  for (double t : taus) QuantileLevel{t};
  std::vector<double> diff(taus.size() + 1, 0.0);
  std::vector<StepItem> stack;
  double offsets = 0.0;
  for (const auto& forest : model.draws.forests) {
    offsets += forest.offset;
    for (const auto& tree : forest.trees) project_tree(tree, x, model.d, taus, diff, stack);
  }
  const auto m = static_cast<double>(model.num_draws());
  std::vector<double> out(taus.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    acc += diff[i];
    out[i] = (offsets + acc) / m;
  }
  return out;
}

std::vector<double> draw_values(const QuantileModel& model, std::span<const double> x, QuantileLevel tau) {
  check_dim(model, x);
  model.validate();
  const std::vector<double> z = augmented(x, tau);
  std::vector<double> out;
  out.reserve(model.num_draws());
  for (const auto& forest : model.draws.forests) out.push_back(forest.eval(z));
  return out;
}

double predictive_quantile(const QuantileModel& model, std::span<const double> x, QuantileLevel tau, std::size_t n_mc,
                           Rng& rng) {
  const double t = tau;
  return predictive_quantiles(model, x, {&t, 1}, n_mc, rng).front();
}

std::vector<double> predictive_quantiles(const QuantileModel& model, std::span<const double> x,
                                         std::span<const double> taus, std::size_t n_mc, Rng& rng) {
  if (n_mc == 0) throw InputError("predictive_quantile: n_mc must be positive");
  for (double t : taus) QuantileLevel{t};
  auto pool = predictive_pool(model, x, n_mc, rng);
  std::sort(pool.begin(), pool.end());
  std::vector<double> out;
  out.reserve(taus.size());
  for (double t : taus) out.push_back(num::empirical_quantile(pool, t));
  return out;
}

std::vector<double> predictive_quantiles_exact(const QuantileModel& model, std::span<const double> x,
                                               std::span<const double> taus) {
  check_dim(model, x);
  model.validate();
  for (double t : taus) QuantileLevel{t};
  const auto m = static_cast<double>(model.num_draws());
  std::vector<std::pair<double, double>> atoms;  // (value, probability)
  std::vector<double> breaks, mids, diff;
  std::vector<int> node_stack;
  std::vector<StepItem> step_stack;
  for (const auto& forest : model.draws.forests) {
    breaks.assign({0.0, 1.0});
    for (const auto& tree : forest.trees) tau_breaks(tree, x, model.d, breaks, node_stack);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    mids.resize(breaks.size() - 1);
    for (std::size_t j = 0; j + 1 < breaks.size(); ++j) mids[j] = 0.5 * (breaks[j] + breaks[j + 1]);
    diff.assign(mids.size() + 1, 0.0);
    for (const auto& tree : forest.trees) project_tree(tree, x, model.d, mids, diff, step_stack);
    double acc = forest.offset;
    for (std::size_t j = 0; j < mids.size(); ++j) {
      acc += diff[j];
      atoms.emplace_back(acc, (breaks[j + 1] - breaks[j]) / m);
    }
  }
  std::sort(atoms.begin(), atoms.end());
  std::vector<double> cum(atoms.size());
  double c = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) cum[i] = c += atoms[i].second;
  std::vector<double> out;
  out.reserve(taus.size());
  for (double t : taus) {
    // smallest atom whose cumulative mass reaches t, guarding against the
    // total falling a few ulps short of 1
    const auto it = std::lower_bound(cum.begin(), cum.end(), t * c);
    out.push_back(atoms[std::min<std::size_t>(it - cum.begin(), atoms.size() - 1)].first);
  }
  return out;
}

std::vector<double> sample_predictive(const QuantileModel& model, std::span<const double> x, std::size_t n, Rng& rng) {
  if (n == 0) throw InputError("sample_predictive: n must be positive");
  return predictive_pool(model, x, n, rng);
}

CredibleInterval credible_interval(const QuantileModel& model, std::span<const double> x, QuantileLevel tau,
                                   double level) {
  if (!(level > 0.0 && level < 1.0)) throw InputError("credible level must lie in (0, 1)");
  if (model.num_draws() < 2) throw InputError("credible interval needs at least 2 draws");
  auto values = draw_values(model, x, tau);
  std::sort(values.begin(), values.end());
  const double a = 0.5 * (1.0 - level);
  return {num::empirical_quantile(values, a), num::empirical_quantile(values, 1.0 - a), level};
}

MultivariateQuantileModel fit_multivariate(const Matrix& x, const Matrix& y, std::vector<std::size_t> ordering,
                                           const AugmentationScheme& scheme, const SamplerConfig& cfg,
                                           const SweepCallback& progress) {
  const std::size_t k = y.cols;
  if (k < 2) throw InputError("fit_multivariate: need at least 2 response columns");
  if (y.rows != x.rows) throw InputError("fit_multivariate: x and y row counts differ");
  if (ordering.empty()) {
    ordering.resize(k);
    std::iota(ordering.begin(), ordering.end(), std::size_t{0});
  }
  {
    auto sorted = ordering;
    std::sort(sorted.begin(), sorted.end());
    bool ok = sorted.size() == k;
    for (std::size_t j = 0; ok && j < k; ++j) ok = sorted[j] == j;
    if (!ok) throw InputError("fit_multivariate: ordering must permute 0..k-1");
  }

  MultivariateQuantileModel out;
  out.ordering = ordering;
  Matrix cov = x;
  for (std::size_t j = 0; j < k; ++j) {
    const auto target = y.column(ordering[j]);
    SamplerConfig c = cfg;
    c.seed = cfg.seed + j;
    QuantileModel comp = fit_quantile_model(cov, target, scheme, c, progress);
    comp.y_name = "y" + std::to_string(ordering[j] + 1);
    for (std::size_t i = 0; i < j; ++i) comp.x_names[x.cols + i] = "y" + std::to_string(ordering[i] + 1);
    out.components.push_back(std::move(comp));
    if (j + 1 == k) break;
    Matrix next(cov.rows, cov.cols + 1);
    for (std::size_t r = 0; r < cov.rows; ++r) {
      std::copy_n(cov.row(r).begin(), cov.cols, next.row(r).begin());
      next(r, cov.cols) = target[r];
    }
    cov = std::move(next);
  }
  return out;
}

Matrix sample_multivariate(const MultivariateQuantileModel& model, std::span<const double> x, std::size_t n, Rng& rng) {
  const std::size_t k = model.k();
  if (k == 0) throw InputError("sample_multivariate: empty model");
  if (x.size() != model.d()) throw InputError("sample_multivariate: covariate dimension mismatch");
  for (const auto& c : model.components) c.validate();
  Matrix out(n, k);
  std::vector<double> z;
  for (std::size_t i = 0; i < n; ++i) {
    z.assign(x.begin(), x.end());
    for (std::size_t j = 0; j < k; ++j) {
      const auto& comp = model.components[j];
      const auto& forest = comp.draws.forests[rng.below(comp.num_draws())];
      z.push_back(rng.uniform());
      const double v = forest.eval(z);
      z.back() = v;  // the drawn level is replaced by the realized response
      out(i, model.ordering[j]) = v;
    }
  }
  return out;
}

}  // namespace iqbart
