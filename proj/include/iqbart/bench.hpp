#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "iqbart/dgp.hpp"
#include "iqbart/io.hpp"
#include "iqbart/metrics.hpp"
#include "iqbart/sampler.hpp"

namespace iqbart {

enum class Estimator { PlugIn, Predictive, BaselineUnconditional };

std::string estimator_name(Estimator e);
Estimator parse_estimator(const std::string& name);

struct BenchSpec {
  DGPSpec dgp;
  std::vector<std::size_t> n_values{1000};
  int replicates = 3;
  std::vector<Estimator> estimators{Estimator::PlugIn, Estimator::Predictive};
  std::vector<double> learning_rates{1.0};
  std::vector<int> rs{5};
  AugmentationKind augmentation = AugmentationKind::FullyAugmented;
  SamplerConfig sampler;  // learning_rate and seed are overridden per cell
  std::size_t grid_taus = 1000;
  std::size_t grid_xs = 1000;
  std::size_t n_mc = 10000;
  std::uint64_t seed = 0;
  int threads = 0;  // <= 0: IQBART_THREADS, else hardware concurrency

  /// 200 trees, 500 + 500 sweeps, r = 5, 10 particles.
  static BenchSpec desk(const DGPSpec& dgp);
  /// 1000 trees, 1000 + 1000 sweeps, r = 10, 20 particles.
  static BenchSpec paper_scale(const DGPSpec& dgp);
  void validate() const;
  nlohmann::json to_json() const;
};

/// One fitted configuration of one replicate, scored by every estimator.
struct BenchCell {
  std::size_t n = 0;
  int r = 0;
  double learning_rate = 0.0;
  int replicate = 0;
  Estimator estimator = Estimator::PlugIn;
  MetricReport report;
  double fit_seconds = 0.0;  // wall clock; not part of any table
};

/// Table row in the fixed column order (model, metric, mean, ci95), with
/// ci95 = 1.96 standard errors over replicates.
struct BenchRow {
  std::string model;
  std::string metric;
  double mean = 0.0;
  double ci95 = 0.0;
};

struct BenchResult {
  std::vector<BenchCell> cells;
  std::vector<BenchRow> table;
  ArtifactMeta meta;
};

using BenchProgress = std::function<void(const std::string& message)>;

/// Threads used for replicate tasks.
int resolve_threads(int requested);

BenchResult run_bench(const BenchSpec& spec, const BenchProgress& progress = {});

/// Label used in the model column.
std::string cell_label(const BenchCell& cell, const BenchSpec& spec);

void write_bench_csv(std::ostream& out, const BenchResult& result);
void write_bench_text(std::ostream& out, const BenchResult& result);

/// Mean of the cells matching the filter on the given metric.
double mean_metric(const BenchResult& result, const std::function<bool(const BenchCell&)>& filter,
                   const std::string& metric);

}  // namespace iqbart
