#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <nlohmann/json.hpp>

#include "iqbart/error.hpp"
#include "iqbart/forest.hpp"
#include "iqbart/rng.hpp"
#include "oracles.hpp"

using namespace iqbart;

namespace {

// Random proper tree over `features` features with thresholds in (0, 1).
Tree random_tree(Rng& rng, int features, int max_depth) {
  std::vector<Node> nodes(1);
  std::vector<int> depth{0};
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (depth[i] < max_depth && rng.uniform() < 0.6) {
      Node& nd = nodes[i];
      nd.feature = static_cast<int>(rng.below(static_cast<std::uint64_t>(features)));
      nd.threshold = rng.uniform();
      nd.left = static_cast<int>(nodes.size());
      nd.right = nd.left + 1;
      const int dd = depth[i] + 1;
      nodes.emplace_back();
      nodes.emplace_back();
      depth.push_back(dd);
      depth.push_back(dd);
    } else {
      nodes[i].value = rng.normal();
    }
  }
  return Tree(nodes);
}

Tree split(int feature, double threshold, Tree left, Tree right) {
  std::vector<Node> nodes(1);
  nodes[0].feature = feature;
  nodes[0].threshold = threshold;
  auto append = [&](const Tree& t) {
    const int base = static_cast<int>(nodes.size());
    for (Node nd : t.nodes()) {
      if (!nd.is_leaf()) {
        nd.left += base;
        nd.right += base;
      }
      nodes.push_back(nd);
    }
    return base;
  };
  nodes[0].left = append(left);
  nodes[0].right = append(right);
  return Tree(nodes);
}

}  // namespace

TEST_SUITE("forest") {
  TEST_CASE("constant and depth-one trees") {
    const Tree c(4.5);
    const std::vector<double> x{0.2};
    CHECK(tree_eval(c, x, QuantileLevel{0.1}, 1) == 4.5);
    CHECK(tree_eval(c, x, QuantileLevel{0.99}, 1) == 4.5);
    const Tree t = split(1, 0.5, Tree(-1.0), Tree(1.0));  // feature 1 = tau when d = 1
    CHECK(tree_eval(t, x, QuantileLevel{0.3}, 1) == -1.0);
    CHECK(tree_eval(t, x, QuantileLevel{0.9}, 1) == 1.0);
    CHECK(tree_eval(t, x, QuantileLevel{0.5}, 1) == -1.0);  // <= goes left
    CHECK_THROWS_AS(tree_eval(t, std::vector<double>{}, QuantileLevel{0.5}, 1), InputError);
  }

  TEST_CASE("tree evaluation matches a recursive walker") {
    Rng rng(2);
    for (int k = 0; k < 20; ++k) {
      const Tree t = random_tree(rng, 3, 6);
      for (int i = 0; i < 1000; ++i) {
        const std::vector<double> z{rng.uniform(), rng.uniform(), rng.uniform()};
        CHECK(t.eval(z) == oracle::walk(t, z));
      }
    }
  }

  TEST_CASE("partition: exactly one leaf is reached") {
    Rng rng(4);
    const Tree t = random_tree(rng, 2, 5);
    std::vector<int> leaves;
    for (std::size_t i = 0; i < t.nodes().size(); ++i)
      if (t.nodes()[i].is_leaf()) leaves.push_back(static_cast<int>(i));
    for (int i = 0; i < 500; ++i) {
      const std::vector<double> z{rng.uniform(), rng.uniform()};
      int hits = 0;
      // indicator of each leaf region: the path from the root must lead there
      for (int leaf : leaves) {
        int node = 0;
        while (!t.nodes()[static_cast<std::size_t>(node)].is_leaf()) {
          const auto& nd = t.nodes()[static_cast<std::size_t>(node)];
          node = z[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
        }
        hits += node == leaf;
      }
      CHECK(hits == 1);
    }
  }

  TEST_CASE("forest evaluation sums trees") {
    Forest f;
    f.trees = {Tree(1.0), Tree(2.0), Tree(3.0)};
    const std::vector<double> x{0.7};
    CHECK(forest_eval(f, x, QuantileLevel{0.4}, 1) == 6.0);

    Rng rng(6);
    Forest one;
    one.trees = {random_tree(rng, 2, 4)};
    for (int i = 0; i < 50; ++i) {
      const std::vector<double> xx{rng.uniform()};
      const double tau = rng.uniform();
      CHECK(forest_eval(one, xx, QuantileLevel{tau}, 1) == tree_eval(one.trees[0], xx, QuantileLevel{tau}, 1));
    }

    Forest ten;
    for (int k = 0; k < 10; ++k) ten.trees.push_back(random_tree(rng, 2, 4));
    for (int i = 0; i < 100; ++i) {
      const std::vector<double> xx{rng.uniform()};
      const double tau = rng.uniform();
      double sum = 0.0;
      for (const auto& t : ten.trees) sum += tree_eval(t, xx, QuantileLevel{tau}, 1);
      CHECK(forest_eval(ten, xx, QuantileLevel{tau}, 1) == doctest::Approx(sum).epsilon(1e-14));
    }
  }

  TEST_CASE("forest evaluation is linear in leaf values") {
    Rng rng(7);
    Forest f;
    for (int k = 0; k < 5; ++k) f.trees.push_back(random_tree(rng, 2, 4));
    Forest g = f;
    for (auto& t : g.trees)
      for (auto& nd : t.nodes())
        if (nd.is_leaf()) nd.value *= -2.5;
    for (int i = 0; i < 100; ++i) {
      const std::vector<double> z{rng.uniform(), rng.uniform()};
      CHECK(g.eval(z) == doctest::Approx(-2.5 * f.eval(z)).epsilon(1e-13));
    }
  }

  TEST_CASE("structure prior values") {
    const TreePriorConfig cfg{0.95, 2.0, 1, 1.0};
    SplitPool pool;
    pool.num_features = 2;
    for (double a : {0.0, 0.5, 1.0})
      for (double b : {0.1, 0.6, 0.9}) pool.points.insert(pool.points.end(), {a, b});
    CHECK(std::exp(log_tree_structure_prior(Tree(0.0), cfg, pool)) == doctest::Approx(0.05));
    CHECK(cfg.split_probability(1) == doctest::Approx(0.2375));
    // root split on feature 0 at 0.5: 0.95 * (1/2 features) * (1/2 thresholds) * leaf terms
    const Tree t = split(0, 0.5, Tree(0.0), Tree(0.0));
    // left child holds a = 0, 0.5 (splittable on both features); right holds a = 1 only (tau splittable)
    const double want = 0.95 * 0.5 * 0.5 * (1 - 0.2375) * (1 - 0.2375);
    CHECK(std::exp(log_tree_structure_prior(t, cfg, pool)) == doctest::Approx(want));
  }

  TEST_CASE("prior normalizes over an enumerable tree space") {
    // Two features with two values each: one threshold per feature, and a
    // feature cannot split again below a split on itself.
    SplitPool pool;
    pool.num_features = 2;
    for (double a : {0.0, 1.0})
      for (double b : {0.2, 0.7}) pool.points.insert(pool.points.end(), {a, b});
    for (double alpha : {0.95, 0.5, 0.2})
      for (double beta : {2.0, 0.0, 1.0}) {
        const TreePriorConfig cfg{alpha, beta, 1, 1.0};
        const double th[2] = {0.0, 0.2};
        double total = std::exp(log_tree_structure_prior(Tree(0.0), cfg, pool));
        for (int f = 0; f < 2; ++f) {
          const int g = 1 - f;
          const Tree leaf(0.0);
          const Tree sub = split(g, th[g], leaf, leaf);
          for (int l = 0; l < 2; ++l)
            for (int r = 0; r < 2; ++r) {
              const Tree t = split(f, th[f], l ? sub : leaf, r ? sub : leaf);
              total += std::exp(log_tree_structure_prior(t, cfg, pool));
            }
        }
        CHECK(std::abs(total - 1.0) < 1e-10);
      }
  }

  TEST_CASE("full prior adds the leaf densities") {
    const TreePriorConfig cfg{0.95, 2.0, 1, 2.0};
    SplitPool pool;
    pool.num_features = 1;
    pool.points = {0.0, 1.0};
    const Tree t(1.5);
    const double gauss = -0.5 * std::log(2 * M_PI * 4.0) - 1.5 * 1.5 / 8.0;
    CHECK(log_tree_prior(t, cfg, pool) == doctest::Approx(log_tree_structure_prior(t, cfg, pool) + gauss));
  }

  TEST_CASE("rearrangement") {
    CHECK(rearrange_nondecreasing({1, 3, 2}) == std::vector<double>{1, 2, 3});
    const std::vector<double> mono{-1, 0, 0, 2};
    CHECK(rearrange_nondecreasing(mono) == mono);
    Rng rng(9);
    for (int rep = 0; rep < 30; ++rep) {
      std::vector<double> v(6);
      for (auto& x : v) x = rng.normal();
      const auto out = rearrange_nondecreasing(v);
      CHECK(std::is_sorted(out.begin(), out.end()));
      CHECK(std::is_permutation(out.begin(), out.end(), v.begin()));
      CHECK(rearrange_nondecreasing(out) == out);
      // sorting never moves the curve further from a nondecreasing target
      for (int k = 0; k < 20; ++k) {
        std::vector<double> g(v.size());
        for (auto& x : g) x = rng.normal(0, 2);
        std::sort(g.begin(), g.end());
        double before = 0.0, after = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
          before += (v[i] - g[i]) * (v[i] - g[i]);
          after += (out[i] - g[i]) * (out[i] - g[i]);
        }
        CHECK(after <= before + 1e-12);
      }
    }
  }

  TEST_CASE("tree validation and json round trip") {
    std::vector<Node> bad(2);
    bad[0].feature = 0;
    bad[0].left = 1;
    bad[0].right = 5;
    CHECK_THROWS_AS(Tree(bad).validate(), InputError);

    Rng rng(12);
    Forest f;
    f.offset = 0.1 + 1e-17;
    for (int k = 0; k < 4; ++k) f.trees.push_back(random_tree(rng, 3, 5));
    const nlohmann::json j = f;
    const Forest g = nlohmann::json::parse(j.dump()).get<Forest>();
    CHECK(g.offset == f.offset);
    for (std::size_t k = 0; k < f.trees.size(); ++k) {
      REQUIRE(g.trees[k].nodes().size() == f.trees[k].nodes().size());
      for (std::size_t i = 0; i < f.trees[k].nodes().size(); ++i) {
        CHECK(g.trees[k].nodes()[i].threshold == f.trees[k].nodes()[i].threshold);
        CHECK(g.trees[k].nodes()[i].value == f.trees[k].nodes()[i].value);
      }
    }
  }

  TEST_CASE("default leaf scale") {
    CHECK(default_leaf_scale(8.0, 16) == doctest::Approx(0.5));
  }
}
