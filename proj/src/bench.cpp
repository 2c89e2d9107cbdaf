#include "iqbart/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <thread>

#include <nlohmann/json.hpp>

#include "iqbart/error.hpp"
#include "iqbart/model.hpp"
#include "iqbart/numerics.hpp"

namespace iqbart {

namespace {

constexpr std::uint64_t kGridKey = 0x67726964;
constexpr std::uint64_t kFitKey = 0x66697400;
constexpr std::uint64_t kMcKey = 0x6d630000;

const char* const kMetrics[] = {"avg_w1", "sup_w1", "avg_winf", "sup_winf"};

double metric_value(const MetricReport& r, const std::string& metric) {
  if (metric == "avg_w1") return r.avg_w1;
  if (metric == "sup_w1") return r.sup_w1;
  if (metric == "avg_winf") return r.avg_winf;
  if (metric == "sup_winf") return r.sup_winf;
  throw InputError("unknown metric '" + metric + "'");
}

MetricReport score(const std::vector<std::vector<double>>& truth, const std::vector<std::vector<double>>& est) {
  std::vector<double> w1(truth.size()), winf(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    w1[i] = wasserstein(truth[i], est[i], WassersteinOrder::One);
    winf[i] = wasserstein(truth[i], est[i], WassersteinOrder::Infinity);
  }
  return summarize(std::move(w1), std::move(winf));
}

std::vector<BenchCell> run_replicate(const BenchSpec& spec, int rep, const BenchProgress& say) {
  std::vector<BenchCell> cells;
  const Rng base(spec.seed ^ static_cast<std::uint64_t>(rep));
  Rng grid_rng = base.derive(kGridKey);
  const QuantileGrid grid = QuantileGrid::draw(spec.dgp, spec.grid_taus, spec.grid_xs, grid_rng);
  const OracleQuantile oracle = OracleQuantile::default_for(spec.dgp);

  std::vector<std::vector<double>> truth(grid.xs.rows);
  for (std::size_t i = 0; i < grid.xs.rows; ++i)
    truth[i] = true_quantile_curve(spec.dgp, grid.xs.row(i), grid.taus, oracle);

  const bool want_baseline = std::find(spec.estimators.begin(), spec.estimators.end(),
                                       Estimator::BaselineUnconditional) != spec.estimators.end();
  for (std::size_t n : spec.n_values) {
    Rng data_rng = base.derive(n);
    const Dataset data = sample_joint(spec.dgp, n, data_rng);
    const std::vector<double> y = data.y.column(0);

    if (want_baseline) {
      const std::vector<double> q = num::empirical_quantiles(y, grid.taus);
      BenchCell c;
      c.n = n;
      c.replicate = rep;
      c.estimator = Estimator::BaselineUnconditional;
      c.report = score(truth, std::vector<std::vector<double>>(truth.size(), q));
      cells.push_back(std::move(c));
    }

    for (int r : spec.rs) {
      for (std::size_t li = 0; li < spec.learning_rates.size(); ++li) {
        const double lr = spec.learning_rates[li];
        SamplerConfig cfg = spec.sampler;
        cfg.learning_rate = lr;
        const std::uint64_t key = (static_cast<std::uint64_t>(n) << 24) ^ (static_cast<std::uint64_t>(r) << 8) ^ li;
        cfg.seed = base.derive(kFitKey ^ key).next_u64();
        if (say)
          say("replicate " + std::to_string(rep) + ": fitting n=" + std::to_string(n) + " r=" + std::to_string(r) +
              " lr=" + format_double(lr));
        const auto start = std::chrono::steady_clock::now();
        const QuantileModel model =
            fit_quantile_model(data.x, y, AugmentationScheme{spec.augmentation, r}, cfg);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        for (Estimator e : spec.estimators) {
          if (e == Estimator::BaselineUnconditional) continue;
          std::vector<std::vector<double>> est(grid.xs.rows);
          if (e == Estimator::PlugIn) {
            for (std::size_t i = 0; i < grid.xs.rows; ++i)
              est[i] = rearrange_nondecreasing(plug_in_curve(model, grid.xs.row(i), grid.taus));
          } else {
            Rng mc = base.derive(kMcKey ^ key);
            for (std::size_t i = 0; i < grid.xs.rows; ++i)
              est[i] = predictive_quantiles(model, grid.xs.row(i), grid.taus, spec.n_mc, mc);
          }
          BenchCell c;
          c.n = n;
          c.r = r;
          c.learning_rate = lr;
          c.replicate = rep;
          c.estimator = e;
          c.report = score(truth, est);
          c.fit_seconds = seconds;
          cells.push_back(std::move(c));
        }
      }
    }
  }
  return cells;
}

}  // namespace

std::string estimator_name(Estimator e) {
  switch (e) {
    case Estimator::PlugIn: return "plug_in";
    case Estimator::Predictive: return "predictive";
    case Estimator::BaselineUnconditional: return "baseline_unconditional";
  }
  return "?";
}

Estimator parse_estimator(const std::string& name) {
  if (name == "plug_in" || name == "plugin") return Estimator::PlugIn;
  if (name == "predictive") return Estimator::Predictive;
  if (name == "baseline_unconditional" || name == "baseline") return Estimator::BaselineUnconditional;
  throw InputError("unknown estimator '" + name + "' (plug_in, predictive, baseline_unconditional)");
}

BenchSpec BenchSpec::desk(const DGPSpec& dgp) {
  BenchSpec s;
  s.dgp = dgp;
  s.sampler.prior.num_trees = 200;
  s.sampler.burn_in = 500;
  s.sampler.draws = 500;
  s.sampler.num_particles = 10;
  s.rs = {5};
  return s;
}

BenchSpec BenchSpec::paper_scale(const DGPSpec& dgp) {
  BenchSpec s;
  s.dgp = dgp;
  s.sampler.prior.num_trees = 1000;
  s.sampler.burn_in = 1000;
  s.sampler.draws = 1000;
  s.sampler.num_particles = 20;
  s.rs = {10};
  return s;
}

void BenchSpec::validate() const {
  dgp.validate();
  if (dgp.y_dim() != 1) throw InputError("bench: only univariate-response DGPs are supported");
  if (n_values.empty() || rs.empty() || learning_rates.empty() || estimators.empty())
    throw InputError("bench: n, r, learning rate and estimator lists must be nonempty");
  for (std::size_t n : n_values)
    if (n < 2) throw InputError("bench: n must be at least 2");
  for (int r : rs) AugmentationScheme{augmentation, r}.validate();
  for (double lr : learning_rates)
    if (!(lr > 0.0) || !std::isfinite(lr)) throw InputError("bench: learning rates must be positive");
  if (replicates < 1) throw InputError("bench: replicates must be at least 1");
  if (grid_taus == 0 || grid_xs == 0) throw InputError("bench: grid sizes must be positive");
  if (n_mc < 1) throw InputError("bench: n_mc must be positive");
  SamplerConfig probe = sampler;
  probe.learning_rate = learning_rates.front();
  probe.validate();
}

nlohmann::json BenchSpec::to_json() const {
  std::vector<std::string> est;
  for (Estimator e : estimators) est.push_back(estimator_name(e));
  // threads is omitted: results do not depend on it.
  return {{"dgp", dgp.name()},
          {"n", n_values},
          {"replicates", replicates},
          {"estimators", est},
          {"learning_rates", learning_rates},
          {"r", rs},
          {"augmentation", scheme_json(AugmentationScheme{augmentation, rs.front()})["kind"]},
          {"sampler", sampler_config_json(sampler)},
          {"grid_taus", grid_taus},
          {"grid_xs", grid_xs},
          {"n_mc", n_mc},
          {"seed", seed}};
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("IQBART_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::string cell_label(const BenchCell& cell, const BenchSpec& spec) {
  (void)spec;
  if (cell.estimator == Estimator::BaselineUnconditional)
    return "baseline n=" + std::to_string(cell.n);
  const std::string name = cell.estimator == Estimator::PlugIn ? "iqbart-plugin" : "iqbart-predictive";
  return name + " n=" + std::to_string(cell.n) + " r=" + std::to_string(cell.r) +
         " lr=" + format_double(cell.learning_rate);
}

BenchResult run_bench(const BenchSpec& spec, const BenchProgress& progress) {
  spec.validate();
  const int reps = spec.replicates;
  const int workers = std::min(resolve_threads(spec.threads), reps);

  std::mutex say_mutex;
  BenchProgress say;
  if (progress)
    say = [&](const std::string& m) {
      std::lock_guard<std::mutex> lock(say_mutex);
      progress(m);
    };

  std::vector<std::vector<BenchCell>> slots(static_cast<std::size_t>(reps));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(reps));
  std::atomic<int> next{0};
  auto work = [&] {
    for (int rep = next++; rep < reps; rep = next++) {
      try {
        slots[static_cast<std::size_t>(rep)] = run_replicate(spec, rep, say);
      } catch (...) {
        errors[static_cast<std::size_t>(rep)] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  BenchResult result;
  result.meta.seed = spec.seed;
  result.meta.config_hash = config_hash(spec.to_json());
  for (const auto& s : slots) result.cells.insert(result.cells.end(), s.begin(), s.end());

  // Every replicate yields cells in the same order, so position k lines up.
  const std::size_t per = slots.front().size();
  for (std::size_t k = 0; k < per; ++k) {
    const std::string label = cell_label(slots.front()[k], spec);
    for (const char* metric : kMetrics) {
      std::vector<double> v;
      for (const auto& s : slots) v.push_back(metric_value(s[k].report, metric));
      const double m = num::pairwise_sum(v) / static_cast<double>(v.size());
      double ci = 0.0;
      if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - m) * (x - m);
        const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
        ci = 1.96 * sd / std::sqrt(static_cast<double>(v.size()));
      }
      result.table.push_back({label, metric, m, ci});
    }
  }
  return result;
}

void write_bench_csv(std::ostream& out, const BenchResult& result) {
  write_meta(out, result.meta);
  out << "model,metric,mean,ci95\n";
  for (const auto& row : result.table)
    out << row.model << ',' << row.metric << ',' << format_double(row.mean) << ',' << format_double(row.ci95) << '\n';
}

void write_bench_text(std::ostream& out, const BenchResult& result) {
  std::size_t width = 5;
  for (const auto& row : result.table) width = std::max(width, row.model.size());
  const auto flags = out.flags();
  out << std::left << std::setw(static_cast<int>(width) + 2) << "model" << std::setw(10) << "metric" << std::right
      << std::setw(12) << "mean" << std::setw(12) << "ci95" << '\n';
  out << std::fixed << std::setprecision(4);
  for (const auto& row : result.table)
    out << std::left << std::setw(static_cast<int>(width) + 2) << row.model << std::setw(10) << row.metric
        << std::right << std::setw(12) << row.mean << std::setw(12) << row.ci95 << '\n';
  out.flags(flags);
}

double mean_metric(const BenchResult& result, const std::function<bool(const BenchCell&)>& filter,
                   const std::string& metric) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& c : result.cells) {
    if (!filter(c)) continue;
    total += metric_value(c.report, metric);
    ++count;
  }
  if (count == 0) throw InputError("mean_metric: no cells match");
  return total / static_cast<double>(count);
}

}  // namespace iqbart
