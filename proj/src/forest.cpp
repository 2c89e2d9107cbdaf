#include "iqbart/forest.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "iqbart/error.hpp"

namespace iqbart {

Tree::Tree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) nodes_.resize(1);
  validate();
}

int Tree::leaf_index(std::span<const double> z) const {
  int i = 0;
  while (!nodes_[i].is_leaf()) {
    const Node& nd = nodes_[i];
    i = z[nd.feature] <= nd.threshold ? nd.left : nd.right;
  }
  return i;
}

std::size_t Tree::num_leaves() const {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.is_leaf(); }));
}

std::vector<int> Tree::node_depths() const {
  std::vector<int> depth(nodes_.size(), 0);
  // Children always follow their parent in storage order.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].is_leaf()) continue;
    depth[nodes_[i].left] = depth[i] + 1;
    depth[nodes_[i].right] = depth[i] + 1;
  }
  return depth;
}

int Tree::depth() const {
  const auto d = node_depths();
  return *std::max_element(d.begin(), d.end());
}

void Tree::validate() const {
  const int n = static_cast<int>(nodes_.size());
  std::vector<int> parents(nodes_.size(), 0);
  for (int i = 0; i < n; ++i) {
    const Node& nd = nodes_[i];
    if (nd.is_leaf()) {
      if (!std::isfinite(nd.value)) throw InputError("tree: non-finite leaf value");
      continue;
    }
    if (nd.left <= i || nd.right <= i || nd.left >= n || nd.right >= n || nd.left == nd.right)
      throw InputError("tree: invalid child index at node " + std::to_string(i));
    ++parents[nd.left];
    ++parents[nd.right];
  }
  if (parents[0] != 0) throw InputError("tree: root has a parent");
  for (int i = 1; i < n; ++i)
    if (parents[i] != 1) throw InputError("tree: node " + std::to_string(i) + " is not reached exactly once");
}

double Forest::eval(std::span<const double> z) const {
  double acc = offset;
  for (const auto& t : trees) acc += t.eval(z);
  return acc;
}

double TreePriorConfig::split_probability(int depth) const { return alpha * std::pow(1.0 + depth, -beta); }

void TreePriorConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("tree prior: alpha must lie in (0,1)");
  if (!(beta >= 0.0)) throw InputError("tree prior: beta must be nonnegative");
  if (num_trees < 1) throw InputError("tree prior: num_trees must be positive");
}

double default_leaf_scale(double y_range, int num_trees) {
  if (!(y_range > 0.0)) y_range = 1.0;
  return y_range / (2.0 * 2.0 * std::sqrt(static_cast<double>(num_trees)));
}

namespace {

double structure_rec(const Tree& tree, int node, int depth, const std::vector<std::size_t>& members,
                     const TreePriorConfig& cfg, const SplitPool& pool) {
  const Node& nd = tree.nodes()[node];
  std::vector<std::set<double>> distinct(pool.num_features);
  std::size_t splittable = 0;
  for (std::size_t f = 0; f < pool.num_features; ++f) {
    for (auto i : members) distinct[f].insert(pool.row(i)[f]);
    if (distinct[f].size() >= 2) ++splittable;
  }
  const double p = splittable ? cfg.split_probability(depth) : 0.0;
  if (nd.is_leaf()) return std::log1p(-p);
  if (static_cast<std::size_t>(nd.feature) >= pool.num_features) return num::kNegInf;
  const auto& vals = distinct[nd.feature];
  if (vals.size() < 2 || !vals.contains(nd.threshold) || nd.threshold == *vals.rbegin()) return num::kNegInf;

  double lp = std::log(p) - std::log(static_cast<double>(splittable)) - std::log(static_cast<double>(vals.size() - 1));
  std::vector<std::size_t> left, right;
  for (auto i : members) (pool.row(i)[nd.feature] <= nd.threshold ? left : right).push_back(i);
  lp += structure_rec(tree, nd.left, depth + 1, left, cfg, pool);
  lp += structure_rec(tree, nd.right, depth + 1, right, cfg, pool);
  return lp;
}

}  // namespace

double log_tree_structure_prior(const Tree& tree, const TreePriorConfig& cfg, const SplitPool& pool) {
  std::vector<std::size_t> all(pool.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return structure_rec(tree, 0, 0, all, cfg, pool);
}

double log_tree_prior(const Tree& tree, const TreePriorConfig& cfg, const SplitPool& pool) {
  if (!(cfg.leaf_scale > 0.0)) throw InputError("log_tree_prior: leaf_scale must be positive");
  double lp = log_tree_structure_prior(tree, cfg, pool);
  for (const auto& nd : tree.nodes()) {
    if (!nd.is_leaf()) continue;
    const double z = nd.value / cfg.leaf_scale;
    lp += -0.5 * z * z - std::log(cfg.leaf_scale) - num::kLogSqrt2Pi;
  }
  return lp;
}

namespace {

std::vector<double> augmented_point(std::span<const double> x, QuantileLevel tau, std::size_t dim) {
  if (x.size() != dim)
    throw InputError("covariate dimension mismatch: expected " + std::to_string(dim) + ", got " + std::to_string(x.size()));
  std::vector<double> z(x.begin(), x.end());
  z.push_back(tau.value());
  return z;
}

void check_features(const Tree& tree, std::size_t dim) {
  for (const auto& nd : tree.nodes())
    if (!nd.is_leaf() && static_cast<std::size_t>(nd.feature) > dim)
      throw InputError("tree splits on feature " + std::to_string(nd.feature) + " beyond dimension " + std::to_string(dim));
}

}  // namespace

double tree_eval(const Tree& tree, std::span<const double> x, QuantileLevel tau, std::size_t dim) {
  check_features(tree, dim);
  return tree.eval(augmented_point(x, tau, dim));
}

double forest_eval(const Forest& forest, std::span<const double> x, QuantileLevel tau, std::size_t dim) {
  for (const auto& t : forest.trees) check_features(t, dim);
  return forest.eval(augmented_point(x, tau, dim));
}

std::vector<double> rearrange_nondecreasing(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return values;
}

void to_json(nlohmann::json& j, const Tree& t) {
  auto nodes = nlohmann::json::array();
  for (const auto& nd : t.nodes()) {
    if (nd.is_leaf())
      nodes.push_back({{"leaf", nd.value}});
    else
      nodes.push_back({{"feature", nd.feature}, {"threshold", nd.threshold}, {"left", nd.left}, {"right", nd.right}});
  }
  j = nodes;
}

void from_json(const nlohmann::json& j, Tree& t) {
  std::vector<Node> nodes;
  nodes.reserve(j.size());
  for (const auto& e : j) {
    Node nd;
    if (e.contains("leaf")) {
      nd.value = e.at("leaf").get<double>();
    } else {
      nd.feature = e.at("feature").get<int>();
      nd.threshold = e.at("threshold").get<double>();
      nd.left = e.at("left").get<int>();
      nd.right = e.at("right").get<int>();
    }
    nodes.push_back(nd);
  }
  t = Tree(std::move(nodes));
}

void to_json(nlohmann::json& j, const Forest& f) { j = {{"offset", f.offset}, {"trees", f.trees}}; }

void from_json(const nlohmann::json& j, Forest& f) {
  f.offset = j.at("offset").get<double>();
  f.trees = j.at("trees").get<std::vector<Tree>>();
}

}  // namespace iqbart
