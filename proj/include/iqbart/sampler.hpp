#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "iqbart/data.hpp"
#include "iqbart/forest.hpp"
#include "iqbart/rng.hpp"

namespace iqbart {

enum class AugmentationKind { Single, Simultaneous, FullyAugmented };

struct AugmentationScheme {
  AugmentationKind kind = AugmentationKind::FullyAugmented;
  int r = 10;

  static AugmentationScheme single() { return {AugmentationKind::Single, 1}; }
  static AugmentationScheme simultaneous(int r) { return {AugmentationKind::Simultaneous, r}; }
  static AugmentationScheme fully_augmented(int r) { return {AugmentationKind::FullyAugmented, r}; }
  void validate() const;
};

/// Rows (x, y, tau). Features are stored with tau appended as the last column.
struct AugmentedDataset {
  std::size_t dim = 0;  // covariate dimension d
  Matrix features;      // n*r rows, d + 1 columns
  std::vector<double> y;
  std::vector<std::size_t> origin;

  std::size_t size() const { return y.size(); }
  double tau(std::size_t i) const { return features(i, dim); }
  std::span<const double> row(std::size_t i) const { return features.row(i); }
};

AugmentedDataset augment(const Matrix& x, std::span<const double> y, const AugmentationScheme& scheme, Rng& rng);

struct SamplerConfig {
  TreePriorConfig prior;
  double learning_rate = 1.0;
  int burn_in = 1000;
  int draws = 1000;
  int num_particles = 20;
  std::uint64_t seed = 0;
  /// Maximum tree depth; 0 restricts trees to a single leaf. Negative: unbounded.
  int max_depth = -1;

  void validate() const;
};

struct PosteriorDraws {
  std::vector<Forest> forests;
  SamplerConfig config;
  std::vector<std::pair<double, double>> feature_ranges;  // d + 1 entries, tau last
  std::vector<double> log_likelihood;                     // per recorded draw
  double leaf_scale = 0.0;                                // resolved value used
};

/// -eta * sum over rows of rho_tau(y - forest(x, tau)).
double log_gen_likelihood(const Forest& forest, const AugmentedDataset& data, double learning_rate);

using SweepCallback = std::function<void(int sweep, int total)>;

/// Backfitting particle Gibbs over the trees of the forest.
PosteriorDraws run_sampler(const AugmentedDataset& data, const SamplerConfig& cfg, const SweepCallback& progress = {});

}  // namespace iqbart
