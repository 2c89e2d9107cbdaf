#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "iqbart/error.hpp"
#include "iqbart/sampler.hpp"
#include "oracles.hpp"

using namespace iqbart;

namespace {

Matrix column(const std::vector<double>& v) {
  Matrix m(v.size(), 1);
  m.data = v;
  return m;
}

SamplerConfig small_config(int trees, int burn_in, int draws, std::uint64_t seed) {
  SamplerConfig cfg;
  cfg.prior.num_trees = trees;
  cfg.burn_in = burn_in;
  cfg.draws = draws;
  cfg.num_particles = 10;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_SUITE("sampler") {
  TEST_CASE("augmentation schemes") {
    const Matrix x = column({0.1, 0.2, 0.3});
    const std::vector<double> y{1, 2, 3};
    Rng rng(1);
    const auto single = augment(x, y, AugmentationScheme::single(), rng);
    CHECK(single.size() == 3);
    std::set<double> t1;
    for (std::size_t i = 0; i < 3; ++i) t1.insert(single.tau(i));
    CHECK(t1.size() == 3);

    const auto sim = augment(x, y, AugmentationScheme::simultaneous(2), rng);
    CHECK(sim.size() == 6);
    std::multiset<double> t2;
    for (std::size_t i = 0; i < 6; ++i) t2.insert(sim.tau(i));
    CHECK(std::set<double>(t2.begin(), t2.end()).size() == 2);
    for (double t : t2) CHECK(t2.count(t) == 3);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(sim.y[i] == y[sim.origin[i]]);
      CHECK(sim.features(i, 0) == x(sim.origin[i], 0));
    }

    const auto full = augment(x, y, AugmentationScheme::fully_augmented(4), rng);
    CHECK(full.size() == 12);
    CHECK_THROWS_AS(augment(x, y, AugmentationScheme{AugmentationKind::FullyAugmented, 0}, rng), InputError);
    CHECK_THROWS_AS(augment(x, std::vector<double>{1, 2}, AugmentationScheme::single(), rng), InputError);
  }

  TEST_CASE("augmented levels are uniform") {
    const std::size_t n = 10000;
    const Matrix x(n, 1, 0.0);
    const std::vector<double> y(n, 0.0);
    Rng rng(2);
    const auto aug = augment(x, y, AugmentationScheme::fully_augmented(10), rng);
    std::vector<double> t(aug.size());
    for (std::size_t i = 0; i < aug.size(); ++i) {
      t[i] = aug.tau(i);
      REQUIRE(t[i] > 0.0);
      REQUIRE(t[i] < 1.0);
    }
    CHECK(oracle::ks_uniform(t) < 0.01);
  }

  TEST_CASE("generalized likelihood") {
    Rng rng(3);
    const Matrix x = column({0.1, 0.5, 0.9, 0.4});
    const std::vector<double> y{1.0, -2.0, 0.5, 3.0};
    const auto aug = augment(x, y, AugmentationScheme::fully_augmented(2), rng);
    Forest zero;
    zero.trees = {Tree(0.0), Tree(0.0)};
    double want = 0.0;
    for (std::size_t i = 0; i < aug.size(); ++i) want += check_loss(aug.y[i], aug.tau(i));
    CHECK(log_gen_likelihood(zero, aug, 0.7) == doctest::Approx(-0.7 * want).epsilon(1e-14));

    // a forest reproducing every row: split x on each observed value
    std::vector<Node> nodes;
    std::vector<double> xs{0.1, 0.4, 0.5, 0.9}, ys{1.0, 3.0, -2.0, 0.5};
    for (std::size_t k = 0; k < 3; ++k) {
      Node split;
      split.feature = 0;
      split.threshold = xs[k];
      split.left = static_cast<int>(2 * k + 1);
      split.right = static_cast<int>(2 * k + 2);
      nodes.push_back(split);
      Node leaf;
      leaf.value = ys[k];
      nodes.push_back(leaf);
    }
    Node last;
    last.value = ys[3];
    nodes.push_back(last);
    Forest exact;
    exact.trees = {Tree(nodes)};
    CHECK(log_gen_likelihood(exact, aug, 1.0) == 0.0);

    Forest rnd;
    rnd.offset = 0.3;
    rnd.trees = {Tree(nodes), Tree(-0.2)};
    double naive = 0.0;
    for (std::size_t i = 0; i < aug.size(); ++i) {
      const double mu = rnd.offset + rnd.trees[0].eval(aug.row(i)) + rnd.trees[1].eval(aug.row(i));
      naive += check_loss(aug.y[i] - mu, aug.tau(i));
    }
    CHECK(std::abs(log_gen_likelihood(rnd, aug, 2.0) + 2.0 * naive) < 1e-10);
  }

  TEST_CASE("constant response") {
    const std::size_t n = 60;
    Rng rng(4);
    Matrix x(n, 1);
    for (auto& v : x.data) v = rng.uniform();
    std::vector<std::vector<double>> probes(20);
    for (auto& z : probes) z = {rng.uniform(), rng.uniform()};
    // A leaf holding m rows of mean level t has posterior mean shifted by
    // 1/(eta m (1 - t)) - 1/(eta m t) around the constant: negative at low tau,
    // positive at high tau, and independent of the constant itself.
    std::vector<double> reference;
    for (double c : {0.0, 3.0, -250.0}) {
      const std::vector<double> y(n, c);
      Rng arng(5);
      const auto aug = augment(x, y, AugmentationScheme::fully_augmented(3), arng);
      const auto draws = run_sampler(aug, small_config(10, 100, 100, 6));
      for (std::size_t p = 0; p < probes.size(); ++p) {
        const auto& z = probes[p];
        double m = 0.0;
        for (const auto& f : draws.forests) m += f.eval(z);
        const double dev = m / static_cast<double>(draws.forests.size()) - c;
        if (c == 0.0) reference.push_back(dev);
        else CHECK(std::abs(dev - reference[p]) <= 1e-9 * std::abs(c));
        CHECK(std::abs(dev) <= 0.15);
        if (z[1] >= 0.3 && z[1] <= 0.7) CHECK(std::abs(dev) <= 0.05);
        if (z[1] < 0.3) CHECK(dev < 0.0);
        if (z[1] > 0.7) CHECK(dev > 0.0);
      }
    }
  }

  TEST_CASE("single-leaf forest reduces to the pooled posterior mean") {
    Rng rng(7);
    const std::size_t n = 40;
    Matrix x(n, 1);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x(i, 0) = rng.uniform();
      y[i] = rng.normal(1.0, 2.0);
    }
    Rng arng(8);
    const auto aug = augment(x, y, AugmentationScheme::single(), arng);
    SamplerConfig cfg = small_config(1, 10, 4000, 9);
    cfg.max_depth = 0;
    cfg.prior.leaf_scale = 1e6;
    cfg.learning_rate = 1.5;
    const auto draws = run_sampler(aug, cfg);
    std::vector<double> v;
    for (const auto& f : draws.forests) {
      REQUIRE(f.trees.size() == 1);
      REQUIRE(f.trees[0].nodes().size() == 1);
      v.push_back(f.eval(aug.row(0)));
    }
    double m = 0.0, s2 = 0.0;
    for (double a : v) m += a;
    m /= static_cast<double>(v.size());
    for (double a : v) s2 += (a - m) * (a - m);
    const double se = std::sqrt(s2 / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
    std::vector<double> taus(aug.size());
    for (std::size_t i = 0; i < aug.size(); ++i) taus[i] = aug.tau(i);
    const double want = oracle::posterior_mean(aug.y, taus, 1.0 / cfg.learning_rate);
    CHECK(std::abs(m - want) < 3.0 * se);
  }

  TEST_CASE("tiny learning rate recovers the prior") {
    Rng rng(10);
    const std::size_t n = 30;
    Matrix x(n, 1);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x(i, 0) = rng.uniform();
      y[i] = 5.0 * x(i, 0) + rng.normal();
    }
    Rng arng(11);
    const auto aug = augment(x, y, AugmentationScheme::fully_augmented(2), arng);
    SamplerConfig cfg = small_config(20, 50, 400, 12);
    cfg.learning_rate = 1e-9;
    cfg.prior.leaf_scale = 0.5;
    const auto draws = run_sampler(aug, cfg);
    // one leaf value per tree per draw; trees are refreshed every sweep
    std::vector<double> sq;
    for (std::size_t d = 0; d < draws.forests.size(); d += 4)
      for (const auto& t : draws.forests[d].trees)
        for (const auto& nd : t.nodes())
          if (nd.is_leaf()) sq.push_back(nd.value * nd.value);
    double m = 0.0, s2 = 0.0;
    for (double v : sq) m += v;
    m /= static_cast<double>(sq.size());
    for (double v : sq) s2 += (v - m) * (v - m);
    const double se = std::sqrt(s2 / static_cast<double>(sq.size() - 1) / static_cast<double>(sq.size()));
    CHECK(std::abs(m - 0.25) < 3.0 * se + 1e-3);
  }

  TEST_CASE("draw shapes, finiteness and determinism") {
    Rng rng(13);
    const std::size_t n = 80;
    Matrix x(n, 2);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x(i, 0) = rng.uniform();
      x(i, 1) = rng.uniform();
      y[i] = std::sin(6 * x(i, 0)) + rng.normal(0, 0.3);
    }
    Rng arng(14);
    const auto aug = augment(x, y, AugmentationScheme::fully_augmented(3), arng);
    const Matrix before = aug.features;
    const auto cfg = small_config(15, 20, 30, 15);
    const auto a = run_sampler(aug, cfg);
    const auto b = run_sampler(aug, cfg);
    CHECK(aug.features.data == before.data);
    REQUIRE(a.forests.size() == 30);
    CHECK(a.log_likelihood.size() == 30);
    CHECK(a.feature_ranges.size() == 3);
    for (std::size_t k = 0; k < a.forests.size(); ++k) {
      REQUIRE(a.forests[k].trees.size() == 15);
      CHECK(a.forests[k].offset == b.forests[k].offset);
      CHECK(a.log_likelihood[k] == b.log_likelihood[k]);
      for (std::size_t t = 0; t < 15; ++t) {
        const auto& na = a.forests[k].trees[t].nodes();
        const auto& nb = b.forests[k].trees[t].nodes();
        REQUIRE(na.size() == nb.size());
        for (std::size_t i = 0; i < na.size(); ++i) {
          CHECK(std::isfinite(na[i].value));
          CHECK(na[i].value == nb[i].value);
          CHECK(na[i].threshold == nb[i].threshold);
          CHECK(na[i].feature == nb[i].feature);
        }
      }
      CHECK(a.log_likelihood[k] == doctest::Approx(log_gen_likelihood(a.forests[k], aug, 1.0)).epsilon(1e-9));
    }
  }

  TEST_CASE("invalid configuration and data") {
    Matrix x(3, 1, 0.5);
    std::vector<double> y{1.0, std::nan(""), 2.0};
    Rng rng(1);
    const auto aug = augment(x, y, AugmentationScheme::single(), rng);
    CHECK_THROWS_AS(run_sampler(aug, small_config(2, 1, 1, 0)), NonFiniteError);
    SamplerConfig bad = small_config(2, 1, 0, 0);
    CHECK_THROWS_AS(bad.validate(), InputError);
    bad = small_config(2, 1, 1, 0);
    bad.learning_rate = 0.0;
    CHECK_THROWS_AS(bad.validate(), InputError);
  }

  TEST_CASE("held-out generalized log-likelihood improves with n") {
    // Scored per row on a fixed held-out augmented set; in-sample values are
    // not comparable across n because small fits overfit.
    auto draw = [](std::size_t n, Rng& rng, Matrix& x, std::vector<double>& y) {
      x = Matrix(n, 1);
      y.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        x(i, 0) = rng.uniform();
        y[i] = 3.0 * x(i, 0) + rng.normal(0, 0.5);
      }
    };
    Rng trng(99);
    Matrix xt;
    std::vector<double> yt;
    draw(2000, trng, xt, yt);
    const auto test = augment(xt, yt, AugmentationScheme::fully_augmented(2), trng);
    double prev = -1e300;
    for (std::size_t n : {50, 200, 800}) {
      double acc = 0.0;
      for (int rep = 0; rep < 3; ++rep) {
        Rng rng(100 + rep);
        Matrix x;
        std::vector<double> y;
        draw(n, rng, x, y);
        const auto aug = augment(x, y, AugmentationScheme::fully_augmented(2), rng);
        const auto draws = run_sampler(aug, small_config(20, 100, 50, 300 + rep));
        double m = 0.0;
        for (const auto& f : draws.forests) m += log_gen_likelihood(f, test, 1.0);
        acc += m / static_cast<double>(draws.forests.size()) / static_cast<double>(test.size());
      }
      const double mean = acc / 3.0;
      CHECK(mean >= prev);
      prev = mean;
    }
  }
}
