#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "iqbart/bench.hpp"
#include "iqbart/dgp.hpp"
#include "iqbart/error.hpp"
#include "iqbart/io.hpp"
#include "iqbart/metrics.hpp"
#include "iqbart/model.hpp"

using namespace iqbart;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kInput = 2, kNumeric = 3, kMissingColumn = 4, kNonFinite = 5 };

// Sampler and augmentation flags; unset values keep the command's defaults.
struct SamplerFlags {
  std::optional<int> trees, burn_in, draws, particles, max_depth, r;
  std::optional<double> alpha, beta, leaf_scale, learning_rate;
  std::optional<std::string> augmentation;

  void add(CLI::App* app) {
    app->add_option("--trees", trees, "Number of trees");
    app->add_option("--burn-in", burn_in, "Burn-in sweeps");
    app->add_option("--draws", draws, "Recorded sweeps");
    app->add_option("--particles", particles, "Particles per conditional SMC update");
    app->add_option("--max-depth", max_depth, "Maximum tree depth (negative: unbounded)");
    app->add_option("--alpha", alpha, "Tree prior base");
    app->add_option("--beta", beta, "Tree prior power");
    app->add_option("--leaf-scale", leaf_scale, "Leaf prior sd (<= 0: from the response range)");
    app->add_option("--learning-rate", learning_rate, "Gibbs posterior learning rate");
    app->add_option("--augmentation", augmentation, "single | simultaneous | fully_augmented")
        ->check(CLI::IsMember({"single", "simultaneous", "fully_augmented"}));
    app->add_option("-r,--repetitions", r, "Quantile levels drawn per row");
  }

  void apply(SamplerConfig& cfg) const {
    if (trees) cfg.prior.num_trees = *trees;
    if (burn_in) cfg.burn_in = *burn_in;
    if (draws) cfg.draws = *draws;
    if (particles) cfg.num_particles = *particles;
    if (max_depth) cfg.max_depth = *max_depth;
    if (alpha) cfg.prior.alpha = *alpha;
    if (beta) cfg.prior.beta = *beta;
    if (leaf_scale) cfg.prior.leaf_scale = *leaf_scale;
    if (learning_rate) cfg.learning_rate = *learning_rate;
  }

  AugmentationScheme scheme(AugmentationScheme s) const {
    if (augmentation) s = scheme_from_json({{"kind", *augmentation}, {"r", s.r}});
    if (r) s.r = *r;
    if (s.kind == AugmentationKind::Single) s.r = 1;
    s.validate();
    return s;
  }
};

struct Output {
  std::string path;
  std::ofstream file;

  std::ostream& stream() {
    if (path.empty() || path == "-") return std::cout;
    if (!file.is_open()) {
      file.open(path, std::ios::binary);
      if (!file) throw InputError("cannot write '" + path + "'");
    }
    return file;
  }
};

SweepCallback sweep_progress(bool quiet, const std::string& prefix) {
  if (quiet) return {};
  return [prefix](int sweep, int total) {
    const int step = std::max(1, total / 10);
    if (sweep % step == 0 || sweep == total) std::cerr << prefix << "sweep " << sweep << "/" << total << "\n";
  };
}

// Levels of the grid: explicit list, else n evenly spaced midpoints.
std::vector<double> tau_grid(const std::vector<double>& taus, int n_taus) {
  std::vector<double> out = taus;
  if (out.empty()) {
    if (n_taus < 1) throw InputError("need --taus or a positive --n-taus");
    for (int k = 0; k < n_taus; ++k) out.push_back((k + 0.5) / n_taus);
  }
  for (double t : out) QuantileLevel{t};
  std::sort(out.begin(), out.end());
  return out;
}

// Binomial coefficient for undifferencing.
double choose(std::size_t n, std::size_t k) {
  double c = 1.0;
  for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return c;
}

struct TimeSeries {
  std::size_t lag = 0;
  std::size_t diff = 0;
  std::string column;
  bool enabled() const { return lag > 0; }
};

// Covariate matrix for query rows: columns by the model's names, or the last
// `lag` differenced values of the series for a one-step-ahead forecast. The
// returned offset converts a differenced forecast back to levels.
struct Query {
  Matrix x;
  std::vector<double> level_offset;
};

Query build_query(const CsvTable& table, const std::vector<std::string>& x_names, const TimeSeries& ts) {
  Query q;
  if (!ts.enabled()) {
    q.x = Matrix(table.data.rows, x_names.size());
    for (std::size_t j = 0; j < x_names.size(); ++j) {
      const std::size_t c = table.column_index(x_names[j]);
      for (std::size_t i = 0; i < table.data.rows; ++i) q.x(i, j) = table.data(i, c);
    }
    q.level_offset.assign(table.data.rows, 0.0);
    return q;
  }
  const std::vector<double> z = table.data.column(table.column_index(ts.column));
  std::vector<double> d = z;
  for (std::size_t k = 0; k < ts.diff; ++k) {
    if (d.size() < 2) throw InputError("series too short for the differencing order");
    std::vector<double> next(d.size() - 1);
    for (std::size_t t = 1; t < d.size(); ++t) next[t - 1] = d[t] - d[t - 1];
    d = std::move(next);
  }
  if (d.size() < ts.lag) throw InputError("series too short for the lag order");
  q.x = Matrix(1, ts.lag);
  for (std::size_t l = 0; l < ts.lag; ++l) q.x(0, l) = d[d.size() - 1 - l];
  // z_{t+1} = (Delta^k z)_{t+1} - sum_{j=1..k} (-1)^j C(k, j) z_{t+1-j}
  double offset = 0.0;
  for (std::size_t j = 1; j <= ts.diff; ++j)
    offset -= ((j % 2) ? -1.0 : 1.0) * choose(ts.diff, j) * z[z.size() - j];
  q.level_offset = {offset};
  return q;
}

TimeSeries time_series_of(const json& model) {
  TimeSeries ts;
  if (model.contains("time_series")) {
    ts.lag = model["time_series"].at("lag").get<std::size_t>();
    ts.diff = model["time_series"].at("diff").get<std::size_t>();
    ts.column = model["time_series"].at("column").get<std::string>();
  }
  return ts;
}

ArtifactMeta meta_for(std::uint64_t seed, const json& config) {
  ArtifactMeta m;
  m.seed = seed;
  m.config_hash = config_hash(config);
  return m;
}

// ---- fit ----

struct FitArgs {
  std::string data, out;
  std::vector<std::string> y_cols, x_cols;
  std::vector<std::size_t> ordering;
  std::size_t lag = 0, diff = 0;
  std::uint64_t seed = 0;
  bool quiet = false;
  SamplerFlags flags;
};

int cmd_fit(const FitArgs& a) {
  if (a.y_cols.empty()) throw InputError("fit: --y is required");
  SamplerConfig cfg;
  a.flags.apply(cfg);
  cfg.seed = a.seed;
  const AugmentationScheme scheme = a.flags.scheme(AugmentationScheme{});
  const CsvTable table = read_csv(a.data);

  json j;
  if (a.lag > 0) {
    if (a.y_cols.size() != 1) throw InputError("fit: time-series mode takes one --y column");
    const std::vector<double> z = table.data.column(table.column_index(a.y_cols.front()));
    Dataset ds = make_lagged(z, a.lag, a.diff);
    QuantileModel m = fit_quantile_model(ds.x, ds.y.column(0), scheme, cfg, sweep_progress(a.quiet, ""));
    m.x_names = ds.x_names;
    m.y_name = a.y_cols.front();
    j = model_json(m);
    j["time_series"] = {{"lag", a.lag}, {"diff", a.diff}, {"column", a.y_cols.front()}};
    std::cout << "draws " << m.num_draws() << "\n";
    const auto& ll = m.draws.log_likelihood;
    std::cout << "mean_log_likelihood " << format_double(num::pairwise_sum(ll) / static_cast<double>(ll.size()))
              << "\n";
  } else {
    const Dataset ds = select_columns(table, a.y_cols, a.x_cols);
    if (a.y_cols.size() == 1) {
      QuantileModel m = fit_quantile_model(ds.x, ds.y.column(0), scheme, cfg, sweep_progress(a.quiet, ""));
      m.x_names = ds.x_names;
      m.y_name = ds.y_names.front();
      j = model_json(m);
      const auto& ll = m.draws.log_likelihood;
      std::cout << "draws " << m.num_draws() << "\n";
      std::cout << "mean_log_likelihood " << format_double(num::pairwise_sum(ll) / static_cast<double>(ll.size()))
                << "\n";
    } else {
      MultivariateQuantileModel mm =
          fit_multivariate(ds.x, ds.y, a.ordering, scheme, cfg, sweep_progress(a.quiet, ""));
      for (std::size_t k = 0; k < mm.k(); ++k) {
        auto& comp = mm.components[k];
        comp.x_names = ds.x_names;
        for (std::size_t p = 0; p < k; ++p) comp.x_names.push_back(ds.y_names[mm.ordering[p]]);
        comp.y_name = ds.y_names[mm.ordering[k]];
      }
      j = multivariate_model_json(mm);
      j["y_names"] = ds.y_names;
      for (std::size_t k = 0; k < mm.k(); ++k) {
        const auto& ll = mm.components[k].draws.log_likelihood;
        std::cout << "component " << mm.components[k].y_name << " draws " << mm.components[k].num_draws()
                  << " mean_log_likelihood "
                  << format_double(num::pairwise_sum(ll) / static_cast<double>(ll.size())) << "\n";
      }
    }
  }
  write_json_file(a.out, j);
  return kOk;
}

// ---- predict ----

struct PredictArgs {
  std::string model, data, out;
  std::vector<double> taus;
  int n_taus = 9;
  std::string estimator = "plug_in";
  double level = 0.9;
  std::size_t n_mc = 10000;
  std::uint64_t seed = 0;
};

int cmd_predict(const PredictArgs& a) {
  const json mj = read_json_file(a.model);
  if (mj.value("kind", "") == "multivariate") throw InputError("predict: multivariate models support 'sample' only");
  const QuantileModel model = model_from_json(mj);
  const TimeSeries ts = time_series_of(mj);
  const std::vector<double> taus = tau_grid(a.taus, a.n_taus);
  if (!(a.level > 0.0 && a.level < 1.0)) throw InputError("predict: --level must lie in (0, 1)");
  const bool plug = a.estimator == "plug_in" || a.estimator == "both";
  const bool pred = a.estimator == "predictive" || a.estimator == "both";

  const Query q = build_query(read_csv(a.data), model.x_names, ts);
  if (q.x.cols != model.d) throw InputError("predict: query dimension does not match the model");

  std::vector<std::string> header = model.x_names;
  header.insert(header.end(), {"tau", "estimate", "lower", "upper"});
  if (plug && pred) header.push_back("predictive");
  std::vector<std::vector<double>> rows;
  Rng rng(a.seed);
  for (std::size_t i = 0; i < q.x.rows; ++i) {
    const auto x = q.x.row(i);
    const double off = q.level_offset[i];
    std::vector<double> est, lo(taus.size()), hi(taus.size()), pq;
    if (plug) est = rearrange_nondecreasing(plug_in_curve(model, x, taus));
    if (pred)
      pq = a.n_mc == 0 ? predictive_quantiles_exact(model, x, taus) : predictive_quantiles(model, x, taus, a.n_mc, rng);
    if (!plug) est = pq;
    for (std::size_t t = 0; t < taus.size(); ++t) {
      const CredibleInterval ci = credible_interval(model, x, QuantileLevel{taus[t]}, a.level);
      lo[t] = ci.lower;
      hi[t] = ci.upper;
    }
    lo = rearrange_nondecreasing(std::move(lo));
    hi = rearrange_nondecreasing(std::move(hi));
    for (std::size_t t = 0; t < taus.size(); ++t) {
      if (t > 0 && est[t] < est[t - 1]) throw NumericError("predict: emitted quantiles are not nondecreasing");
      std::vector<double> row(x.begin(), x.end());
      row.insert(row.end(), {taus[t], est[t] + off, lo[t] + off, hi[t] + off});
      if (plug && pred) row.push_back(pq[t] + off);
      rows.push_back(std::move(row));
    }
  }
  const json cfg{{"command", "predict"}, {"model", mj.at("meta").at("config_hash")}, {"taus", taus},
                 {"estimator", a.estimator}, {"level", a.level}, {"n_mc", a.n_mc}};
  Output out{a.out, {}};
  write_csv(out.stream(), header, rows, meta_for(a.seed, cfg));
  return kOk;
}

// ---- sample ----

struct SampleArgs {
  std::string model, data, out;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
};

int cmd_sample(const SampleArgs& a) {
  const json mj = read_json_file(a.model);
  const CsvTable table = read_csv(a.data);
  Rng rng(a.seed);
  std::vector<std::string> header{"row"};
  std::vector<std::vector<double>> rows;
  if (mj.value("kind", "") == "multivariate") {
    const MultivariateQuantileModel mm = multivariate_model_from_json(mj);
    const auto& names = mm.components.front().x_names;
    const Query q = build_query(table, std::vector<std::string>(names.begin(), names.begin() + mm.d()), {});
    header.insert(header.end(), names.begin(), names.begin() + mm.d());
    const auto y_names = mj.at("y_names").get<std::vector<std::string>>();
    header.insert(header.end(), y_names.begin(), y_names.end());
    for (std::size_t i = 0; i < q.x.rows; ++i) {
      const Matrix s = sample_multivariate(mm, q.x.row(i), a.n, rng);
      for (std::size_t k = 0; k < s.rows; ++k) {
        std::vector<double> row{static_cast<double>(i)};
        row.insert(row.end(), q.x.row(i).begin(), q.x.row(i).end());
        row.insert(row.end(), s.row(k).begin(), s.row(k).end());
        rows.push_back(std::move(row));
      }
    }
  } else {
    const QuantileModel model = model_from_json(mj);
    const Query q = build_query(table, model.x_names, time_series_of(mj));
    if (q.x.cols != model.d) throw InputError("sample: query dimension does not match the model");
    header.insert(header.end(), model.x_names.begin(), model.x_names.end());
    header.push_back(model.y_name);
    for (std::size_t i = 0; i < q.x.rows; ++i) {
      for (double v : sample_predictive(model, q.x.row(i), a.n, rng)) {
        std::vector<double> row{static_cast<double>(i)};
        row.insert(row.end(), q.x.row(i).begin(), q.x.row(i).end());
        row.push_back(v + q.level_offset[i]);
        rows.push_back(std::move(row));
      }
    }
  }
  const json cfg{{"command", "sample"}, {"model", mj.at("meta").at("config_hash")}, {"n", a.n}};
  Output out{a.out, {}};
  write_csv(out.stream(), header, rows, meta_for(a.seed, cfg));
  return kOk;
}

// ---- simulate ----

struct SimulateArgs {
  std::string dgp = "mixture", out, oracle_out;
  std::size_t n = 1000;
  std::vector<double> taus;
  int n_taus = 9;
  std::size_t grid_xs = 20;
  std::uint64_t seed = 0;
};

int cmd_simulate(const SimulateArgs& a) {
  const DGPSpec spec = DGPSpec::parse(a.dgp);
  Rng rng(a.seed);
  Rng data_rng = rng.derive(1);
  const Dataset ds = sample_joint(spec, a.n, data_rng);
  std::vector<std::string> header = ds.x_names;
  header.insert(header.end(), ds.y_names.begin(), ds.y_names.end());
  std::vector<std::vector<double>> rows(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    rows[i].assign(ds.x.row(i).begin(), ds.x.row(i).end());
    rows[i].insert(rows[i].end(), ds.y.row(i).begin(), ds.y.row(i).end());
  }
  const json cfg{{"command", "simulate"}, {"dgp", spec.name()}, {"n", a.n}};
  Output out{a.out, {}};
  write_csv(out.stream(), header, rows, meta_for(a.seed, cfg));

  if (!a.oracle_out.empty()) {
    // Oracle quantiles of the first response given the covariates.
    const std::vector<double> taus = tau_grid(a.taus, a.n_taus);
    Rng grid_rng = rng.derive(2);
    const Matrix xs = sample_covariates(spec, a.grid_xs, grid_rng);
    const OracleQuantile oracle = OracleQuantile::default_for(spec);
    std::vector<std::string> oh = ds.x_names;
    oh.insert(oh.end(), {"tau", "quantile"});
    std::vector<std::vector<double>> orows;
    for (std::size_t i = 0; i < xs.rows; ++i) {
      const auto q = true_quantile_curve(spec, xs.row(i), taus, oracle);
      for (std::size_t t = 0; t < taus.size(); ++t) {
        std::vector<double> row(xs.row(i).begin(), xs.row(i).end());
        row.insert(row.end(), {taus[t], q[t]});
        orows.push_back(std::move(row));
      }
    }
    json ocfg = cfg;
    ocfg["taus"] = taus;
    ocfg["grid_xs"] = a.grid_xs;
    Output oout{a.oracle_out, {}};
    write_csv(oout.stream(), oh, orows, meta_for(a.seed, ocfg));
  }
  return kOk;
}

// ---- evaluate ----

struct EvaluateArgs {
  std::string model, data, out, dgp;
  double alpha = 0.1;
  std::size_t n_scores = 100;
  std::size_t grid_taus = 1000, grid_xs = 1000;
  std::uint64_t seed = 0;
};

int cmd_evaluate(const EvaluateArgs& a) {
  const json mj = read_json_file(a.model);
  if (mj.value("kind", "") == "multivariate") throw InputError("evaluate: multivariate models are not supported");
  const QuantileModel model = model_from_json(mj);
  const TimeSeries ts = time_series_of(mj);
  std::vector<std::pair<std::string, double>> metrics;

  if (!a.data.empty()) {
    // Held-out scores on rows of a CSV holding the response.
    const CsvTable table = read_csv(a.data);
    Matrix x;
    std::vector<double> y;
    std::vector<double> offset;
    std::vector<double> history;  // levels preceding each target, for MSIS
    std::vector<std::size_t> hist_end;
    if (ts.enabled()) {
      const std::vector<double> z = table.data.column(table.column_index(ts.column));
      const Dataset ds = make_lagged(z, ts.lag, ts.diff);
      x = ds.x;
      y = ds.y.column(0);
      const std::size_t skip = z.size() - y.size();
      offset.resize(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) {
        const std::size_t t = skip + i;
        double off = 0.0;
        for (std::size_t j = 1; j <= ts.diff; ++j) off -= ((j % 2) ? -1.0 : 1.0) * choose(ts.diff, j) * z[t - j];
        offset[i] = off;
        y[i] += off;
        hist_end.push_back(t);
      }
      history = z;
    } else {
      x = build_query(table, model.x_names, {}).x;
      y = table.data.column(table.column_index(model.y_name));
      offset.assign(y.size(), 0.0);
    }
    std::vector<double> crps_v, is_v, msis_v, cover;
    std::vector<double> mids(a.n_scores);
    for (std::size_t k = 0; k < a.n_scores; ++k) mids[k] = (static_cast<double>(k) + 0.5) / a.n_scores;
    const std::vector<double> band{a.alpha / 2.0, 1.0 - a.alpha / 2.0};
    for (std::size_t i = 0; i < y.size(); ++i) {
      const auto curve = rearrange_nondecreasing(plug_in_curve(model, x.row(i), mids));
      std::size_t k = 0;
      crps_v.push_back(crps([&](double) { return curve[k++] + offset[i]; }, y[i], a.n_scores));
      const auto iv = rearrange_nondecreasing(plug_in_curve(model, x.row(i), band));
      const IntervalForecast f{iv[0] + offset[i], iv[1] + offset[i], a.alpha};
      is_v.push_back(interval_score(y[i], f));
      cover.push_back(y[i] >= f.lower && y[i] <= f.upper ? 1.0 : 0.0);
      if (ts.enabled() && hist_end[i] >= 2) {
        const std::span<const double> h(history.data(), hist_end[i]);
        try {
          msis_v.push_back(msis(h, y[i], f));
        } catch (const InputError&) {
        }
      }
    }
    auto mean = [](const std::vector<double>& v) { return num::pairwise_sum(v) / static_cast<double>(v.size()); };
    metrics.emplace_back("rows", static_cast<double>(y.size()));
    metrics.emplace_back("crps", mean(crps_v));
    metrics.emplace_back("interval_score", mean(is_v));
    metrics.emplace_back("coverage", mean(cover));
    if (!msis_v.empty()) metrics.emplace_back("msis", mean(msis_v));
  }

  if (!a.dgp.empty()) {
    // Wasserstein errors against the oracle on a fresh grid.
    const DGPSpec spec = DGPSpec::parse(a.dgp);
    if (spec.x_dim() != model.d || spec.y_dim() != 1) throw InputError("evaluate: DGP and model dimensions differ");
    Rng grid_rng = Rng(a.seed).derive(3);
    const QuantileGrid grid = QuantileGrid::draw(spec, a.grid_taus, a.grid_xs, grid_rng);
    const OracleQuantile oracle = OracleQuantile::default_for(spec);
    const MetricReport r = report(
        [&](std::span<const double> x, std::span<const double> t) { return true_quantile_curve(spec, x, t, oracle); },
        [&](std::span<const double> x, std::span<const double> t) {
          return rearrange_nondecreasing(plug_in_curve(model, x, t));
        },
        grid);
    metrics.emplace_back("avg_w1", r.avg_w1);
    metrics.emplace_back("sup_w1", r.sup_w1);
    metrics.emplace_back("avg_winf", r.avg_winf);
    metrics.emplace_back("sup_winf", r.sup_winf);
  }
  if (metrics.empty()) throw InputError("evaluate: give --data and/or --dgp");

  const json cfg{{"command", "evaluate"}, {"model", mj.at("meta").at("config_hash")}, {"alpha", a.alpha},
                 {"n_scores", a.n_scores}, {"dgp", a.dgp}, {"grid_taus", a.grid_taus}, {"grid_xs", a.grid_xs}};
  Output out{a.out, {}};
  auto& os = out.stream();
  write_meta(os, meta_for(a.seed, cfg));
  os << "metric,value\n";
  for (const auto& [k, v] : metrics) os << k << ',' << format_double(v) << '\n';
  return kOk;
}

// ---- bench ----

struct BenchArgs {
  std::string dgp = "mixture", out, text_out;
  std::vector<std::size_t> n_values;
  std::optional<int> replicates;
  std::vector<std::string> estimators;
  std::vector<double> learning_rates;
  std::vector<int> rs;
  std::optional<std::size_t> grid_taus, grid_xs, n_mc;
  std::uint64_t seed = 0;
  int threads = 0;
  bool paper_scale = false;
  bool quiet = false;
  SamplerFlags flags;
};

int cmd_bench(const BenchArgs& a) {
  const DGPSpec dgp = DGPSpec::parse(a.dgp);
  BenchSpec spec = a.paper_scale ? BenchSpec::paper_scale(dgp) : BenchSpec::desk(dgp);
  a.flags.apply(spec.sampler);
  if (a.flags.augmentation) spec.augmentation = a.flags.scheme(AugmentationScheme{}).kind;
  if (a.flags.r) spec.rs = {*a.flags.r};
  if (!a.rs.empty()) spec.rs = a.rs;
  if (a.flags.learning_rate) spec.learning_rates = {*a.flags.learning_rate};
  if (!a.learning_rates.empty()) spec.learning_rates = a.learning_rates;
  if (!a.n_values.empty()) spec.n_values = a.n_values;
  if (a.replicates) spec.replicates = *a.replicates;
  if (!a.estimators.empty()) {
    spec.estimators.clear();
    for (const auto& e : a.estimators) spec.estimators.push_back(parse_estimator(e));
  }
  if (a.grid_taus) spec.grid_taus = *a.grid_taus;
  if (a.grid_xs) spec.grid_xs = *a.grid_xs;
  if (a.n_mc) spec.n_mc = *a.n_mc;
  spec.seed = a.seed;
  spec.threads = a.threads;

  BenchProgress progress;
  if (!a.quiet) progress = [](const std::string& m) { std::cerr << m << "\n"; };
  const BenchResult result = run_bench(spec, progress);
  Output out{a.out, {}};
  write_bench_csv(out.stream(), result);
  if (!a.text_out.empty()) {
    Output t{a.text_out, {}};
    write_bench_text(t.stream(), result);
  } else if (!a.out.empty() && a.out != "-") {
    write_bench_text(std::cout, result);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Implicit quantile BART: fit, predict, sample, simulate, evaluate, bench"};
  app.require_subcommand(1);
  app.set_version_flag("--version", code_version());

  FitArgs fit;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a quantile model to a CSV");
  fit_cmd->add_option("--data", fit.data, "Input CSV")->required();
  fit_cmd->add_option("--y", fit.y_cols, "Response column(s); several fit the multivariate model")->delimiter(',');
  fit_cmd->add_option("--x", fit.x_cols, "Covariate columns (default: all others)")->delimiter(',');
  fit_cmd->add_option("--ordering", fit.ordering, "Response ordering for the multivariate model")->delimiter(',');
  fit_cmd->add_option("--lag", fit.lag, "Time-series mode: regress on this many lags of --y");
  fit_cmd->add_option("--diff", fit.diff, "Time-series mode: differencing order");
  fit_cmd->add_option("-o,--out", fit.out, "Model JSON path")->required();
  fit_cmd->add_option("--seed", fit.seed, "Seed")->required();
  fit_cmd->add_flag("-q,--quiet", fit.quiet, "No progress output");
  fit.flags.add(fit_cmd);

  PredictArgs pred;
  auto* pred_cmd = app.add_subcommand("predict", "Quantile estimates and credible bands per query row");
  pred_cmd->add_option("--model", pred.model, "Model JSON")->required();
  pred_cmd->add_option("--data", pred.data, "Query CSV (a series CSV for time-series models)")->required();
  pred_cmd->add_option("--taus", pred.taus, "Quantile levels")->delimiter(',');
  pred_cmd->add_option("--n-taus", pred.n_taus, "Evenly spaced levels when --taus is absent");
  pred_cmd->add_option("--estimator", pred.estimator, "plug_in | predictive | both")
      ->check(CLI::IsMember({"plug_in", "predictive", "both"}));
  pred_cmd->add_option("--level", pred.level, "Credible level of the band");
  pred_cmd->add_option("--n-mc", pred.n_mc, "Pool size for the predictive estimator; 0 evaluates it exactly");
  pred_cmd->add_option("--seed", pred.seed, "Seed");
  pred_cmd->add_option("-o,--out", pred.out, "Output CSV (default stdout)");

  SampleArgs samp;
  auto* samp_cmd = app.add_subcommand("sample", "Posterior predictive samples per query row");
  samp_cmd->add_option("--model", samp.model, "Model JSON")->required();
  samp_cmd->add_option("--data", samp.data, "Query CSV")->required();
  samp_cmd->add_option("-n", samp.n, "Samples per row");
  samp_cmd->add_option("--seed", samp.seed, "Seed");
  samp_cmd->add_option("-o,--out", samp.out, "Output CSV (default stdout)");

  SimulateArgs sim;
  auto* sim_cmd = app.add_subcommand("simulate", "Draw data from a synthetic DGP");
  sim_cmd->add_option("--dgp", sim.dgp, "difficult | lstar | mixture | bivariate");
  sim_cmd->add_option("-n", sim.n, "Rows");
  sim_cmd->add_option("--seed", sim.seed, "Seed");
  sim_cmd->add_option("-o,--out", sim.out, "Output CSV (default stdout)");
  sim_cmd->add_option("--oracle-out", sim.oracle_out, "Also write oracle quantiles on a (x, tau) grid");
  sim_cmd->add_option("--taus", sim.taus, "Oracle grid levels")->delimiter(',');
  sim_cmd->add_option("--n-taus", sim.n_taus, "Evenly spaced oracle levels when --taus is absent");
  sim_cmd->add_option("--grid-xs", sim.grid_xs, "Oracle grid covariate points");

  EvaluateArgs ev;
  auto* ev_cmd = app.add_subcommand("evaluate", "Score a model on held-out data and/or against a DGP oracle");
  ev_cmd->add_option("--model", ev.model, "Model JSON")->required();
  ev_cmd->add_option("--data", ev.data, "Held-out CSV with the response (a series CSV for time-series models)");
  ev_cmd->add_option("--dgp", ev.dgp, "Score Wasserstein errors against this DGP's oracle");
  ev_cmd->add_option("--alpha", ev.alpha, "Interval miscoverage level");
  ev_cmd->add_option("--n-scores", ev.n_scores, "Quantile scores averaged for the CRPS");
  ev_cmd->add_option("--grid-taus", ev.grid_taus, "Oracle grid levels");
  ev_cmd->add_option("--grid-xs", ev.grid_xs, "Oracle grid covariate points");
  ev_cmd->add_option("--seed", ev.seed, "Seed");
  ev_cmd->add_option("-o,--out", ev.out, "Output CSV (default stdout)");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Synthetic benchmark sweeps against oracle quantiles");
  bench_cmd->add_option("--dgp", bench.dgp, "difficult | lstar | mixture");
  bench_cmd->add_option("-n,--n", bench.n_values, "Training sizes")->delimiter(',');
  bench_cmd->add_option("--replicates", bench.replicates, "Replicates per configuration");
  bench_cmd->add_option("--estimators", bench.estimators, "plug_in, predictive, baseline_unconditional")
      ->delimiter(',');
  bench_cmd->add_option("--learning-rates", bench.learning_rates, "Learning-rate sweep")->delimiter(',');
  bench_cmd->add_option("--rs", bench.rs, "Repetition sweep")->delimiter(',');
  bench_cmd->add_option("--grid-taus", bench.grid_taus, "Levels in the evaluation grid");
  bench_cmd->add_option("--grid-xs", bench.grid_xs, "Covariate points in the evaluation grid");
  bench_cmd->add_option("--n-mc", bench.n_mc, "Pool size for the predictive estimator");
  bench_cmd->add_option("--seed", bench.seed, "Seed");
  bench_cmd->add_option("--threads", bench.threads, "Worker threads (default: IQBART_THREADS or all cores)");
  bench_cmd->add_flag("--paper-scale", bench.paper_scale, "1000 trees, 1000 + 1000 sweeps, r = 10");
  bench_cmd->add_option("-o,--out", bench.out, "CSV table (default stdout)");
  bench_cmd->add_option("--text-out", bench.text_out, "Pretty table path");
  bench_cmd->add_flag("-q,--quiet", bench.quiet, "No progress output");
  bench.flags.add(bench_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInput;
  }

  try {
    if (*fit_cmd) return cmd_fit(fit);
    if (*pred_cmd) return cmd_predict(pred);
    if (*samp_cmd) return cmd_sample(samp);
    if (*sim_cmd) return cmd_simulate(sim);
    if (*ev_cmd) return cmd_evaluate(ev);
    if (*bench_cmd) return cmd_bench(bench);
  } catch (const MissingColumnError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kMissingColumn;
  } catch (const NonFiniteError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNonFinite;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInput;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  }
  return kOk;
}
