#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "iqbart/ald.hpp"

namespace iqbart {

/// Internal nodes route a point left when its feature value is <= threshold.
/// Features are 0-based over the augmented vector (x_0 .. x_{d-1}, tau), so
/// tau is feature d.
struct Node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
};

class Tree {
 public:
  Tree() : nodes_(1) {}
  explicit Tree(double leaf_value) : nodes_(1) { nodes_[0].value = leaf_value; }
  explicit Tree(std::vector<Node> nodes);

  const std::vector<Node>& nodes() const { return nodes_; }
  std::vector<Node>& nodes() { return nodes_; }

  /// Index of the leaf reached by the augmented point z (length >= max feature + 1).
  int leaf_index(std::span<const double> z) const;
  double eval(std::span<const double> z) const { return nodes_[leaf_index(z)].value; }

  std::size_t num_leaves() const;
  int depth() const;
  /// Depth of every node, root = 0.
  std::vector<int> node_depths() const;
  /// Throws InputError when the node graph is not a proper binary tree.
  void validate() const;

 private:
  std::vector<Node> nodes_;
};

struct Forest {
  double offset = 0.0;
  std::vector<Tree> trees;

  double eval(std::span<const double> z) const;
};

struct TreePriorConfig {
  double alpha = 0.95;
  double beta = 2.0;
  int num_trees = 1000;
  double leaf_scale = 0.0;  // <= 0: derive from the response range

  double split_probability(int depth) const;
  void validate() const;
};

/// Default leaf standard deviation: range(y) / (2 k sqrt(T)) with k = 2.
double default_leaf_scale(double y_range, int num_trees);

/// Pool of augmented points defining which split values are available at
/// each node: a feature can split a node when the pool points falling in the
/// node take at least two distinct values on it, and the candidate thresholds
/// are those distinct values except the largest.
struct SplitPool {
  std::size_t num_features = 0;
  std::vector<double> points;  // row-major, num_features per row

  std::size_t size() const { return num_features ? points.size() / num_features : 0; }
  std::span<const double> row(std::size_t i) const { return {points.data() + i * num_features, num_features}; }
};

/// log probability of the tree shape and split rules under the growth prior.
double log_tree_structure_prior(const Tree& tree, const TreePriorConfig& cfg, const SplitPool& pool);

/// Structure prior plus iid N(0, leaf_scale^2) densities of the leaf values.
double log_tree_prior(const Tree& tree, const TreePriorConfig& cfg, const SplitPool& pool);

/// Evaluation with an explicit covariate vector and quantile level.
double tree_eval(const Tree& tree, std::span<const double> x, QuantileLevel tau, std::size_t dim);
double forest_eval(const Forest& forest, std::span<const double> x, QuantileLevel tau, std::size_t dim);

/// Nondecreasing rearrangement of a quantile curve on a sorted grid.
std::vector<double> rearrange_nondecreasing(std::vector<double> values);

void to_json(nlohmann::json& j, const Tree& t);
void from_json(const nlohmann::json& j, Tree& t);
void to_json(nlohmann::json& j, const Forest& f);
void from_json(const nlohmann::json& j, Forest& f);

}  // namespace iqbart
