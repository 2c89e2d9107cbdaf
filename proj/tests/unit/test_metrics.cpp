#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <nlohmann/json.hpp>

#include "iqbart/error.hpp"
#include "iqbart/metrics.hpp"
#include "iqbart/numerics.hpp"
#include "oracles.hpp"

using namespace iqbart;

TEST_SUITE("metrics") {
  TEST_CASE("wasserstein examples") {
    std::vector<double> taus;
    for (int k = 1; k < 100; ++k) taus.push_back(k / 100.0);
    auto id = [](double t) { return t * t; };
    CHECK(wasserstein_mc(id, id, taus, WassersteinOrder::One) == 0.0);
    CHECK(wasserstein_mc(id, id, taus, WassersteinOrder::Infinity) == 0.0);
    auto shifted = [](double t) { return t * t - 0.7; };
    CHECK(wasserstein_mc(id, shifted, taus, WassersteinOrder::One) == doctest::Approx(0.7));
    CHECK(wasserstein_mc(id, shifted, taus, WassersteinOrder::Infinity) == doctest::Approx(0.7));
    CHECK_THROWS_AS(wasserstein_mc(id, id, std::vector<double>{}, WassersteinOrder::One), InputError);

    Rng rng(1);
    std::vector<double> u(100000);
    for (auto& t : u) t = rng.uniform();
    std::sort(u.begin(), u.end());
    const double w1 = wasserstein_mc([](double t) { return num::normal_quantile(t); }, [](double) { return 0.0; }, u,
                                     WassersteinOrder::One);
    CHECK(std::abs(w1 - std::sqrt(2.0 / M_PI)) < 0.01);
  }

  TEST_CASE("infinity order dominates order one") {
    Rng rng(2);
    for (int rep = 0; rep < 100; ++rep) {
      std::vector<double> a(50), b(50);
      for (auto& v : a) v = rng.normal();
      for (auto& v : b) v = rng.normal();
      CHECK(wasserstein(a, b, WassersteinOrder::Infinity) >= wasserstein(a, b, WassersteinOrder::One));
    }
  }

  TEST_CASE("report") {
    Rng rng(3);
    const auto grid = QuantileGrid::draw(DGPSpec::mixture(), 200, 50, rng);
    CHECK(std::is_sorted(grid.taus.begin(), grid.taus.end()));
    CHECK(grid.xs.rows == 50);
    const auto oracle = OracleQuantile::default_for(DGPSpec::mixture());
    CurveFn truth = [&](std::span<const double> x, std::span<const double> t) {
      return true_quantile_curve(DGPSpec::mixture(), x, t, oracle);
    };
    CurveFn shifted = [&](std::span<const double> x, std::span<const double> t) {
      auto v = truth(x, t);
      for (auto& q : v) q += 0.3;
      return v;
    };
    const auto r = report(truth, shifted, grid);
    CHECK(r.avg_w1 == doctest::Approx(0.3));
    CHECK(r.sup_w1 == doctest::Approx(0.3));
    CHECK(r.w1.size() == 50);
    const auto self = report(truth, truth, grid);
    CHECK(self.sup_winf < 0.01);

    CurveFn noisy = [&](std::span<const double> x, std::span<const double> t) {
      auto v = truth(x, t);
      for (auto& q : v) q += rng.normal(0, 0.2);
      return v;
    };
    const auto n = report(truth, noisy, grid);
    CHECK(n.avg_w1 <= n.sup_w1);
    CHECK(n.avg_winf <= n.sup_winf);
    CHECK(n.avg_w1 <= n.avg_winf);

    const nlohmann::json j = n;
    CHECK(j.at("avg_w1").get<double>() == n.avg_w1);
  }

  TEST_CASE("crps") {
    CHECK(crps([](double) { return 1.5; }, 1.5) == 0.0);
    CHECK(std::abs(crps([](double t) { return t; }, 0.5, 1000) - 1.0 / 12.0) < 0.002);
    // int (F(z) - 1{z >= y})^2 dz for F uniform on (0, 1), split at the kinks
    const double y = 2.0;
    auto sq = [y](double z) {
      const double f = std::clamp(z, 0.0, 1.0) - (z >= y ? 1.0 : 0.0);
      return f * f;
    };
    const double want = oracle::integrate(sq, 0.0, 1.0) + oracle::integrate(sq, 1.0, y);
    CHECK(std::abs(crps([](double t) { return t; }, y, 1000) - want) < 0.002);
    CHECK_THROWS_AS(crps([](double t) { return t; }, 0.0, 0), InputError);
  }

  TEST_CASE("crps is proper on simulated data") {
    Rng rng(4);
    const int n = 200;
    std::vector<double> ys(n);
    for (auto& v : ys) v = rng.normal();
    auto q = [](double t) { return num::normal_quantile(t); };
    double base = 0.0;
    std::vector<double> s0(n);
    for (int i = 0; i < n; ++i) base += s0[i] = crps(q, ys[i]);
    for (double shift : {-1.0, -0.5, 0.5, 1.0}) {
      std::vector<double> diff(n);
      double m = 0.0;
      for (int i = 0; i < n; ++i) {
        diff[i] = crps([&](double t) { return q(t) + shift; }, ys[i]) - s0[i];
        m += diff[i];
      }
      m /= n;
      double s2 = 0.0;
      for (double d : diff) s2 += (d - m) * (d - m);
      const double se = std::sqrt(s2 / (n - 1) / n);
      CHECK(m > -3.0 * se);
    }
  }

  TEST_CASE("interval score branches") {
    const IntervalForecast f{1.0, 3.0, 0.2};
    CHECK(interval_score(2.0, f) == 2.0);
    CHECK(interval_score(1.0, f) == 2.0);
    CHECK(interval_score(4.0, f) == 2.0 + 10.0);
    const IntervalForecast g{1.0, 3.0, 0.05};
    CHECK(interval_score(-1.0, g) == 2.0 + 80.0);
    CHECK_THROWS_AS(interval_score(0.0, IntervalForecast{2.0, 1.0, 0.1}), InputError);
    CHECK_THROWS_AS(interval_score(0.0, IntervalForecast{1.0, 2.0, 1.0}), InputError);
  }

  TEST_CASE("interval score is minimized at the true quantiles") {
    Rng rng(5);
    const double alpha = 0.2;
    std::vector<double> ys(20000);
    for (auto& v : ys) v = rng.normal();
    auto expected = [&](double lo, double hi) {
      double s = 0.0;
      for (double y : ys) s += interval_score(y, {lo, hi, alpha});
      return s / ys.size();
    };
    double best = 1e300, bl = 0, bu = 0;
    for (double lo = -2.0; lo <= -0.5; lo += 0.05)
      for (double hi = 0.5; hi <= 2.0; hi += 0.05) {
        const double s = expected(lo, hi);
        if (s < best) {
          best = s;
          bl = lo;
          bu = hi;
        }
      }
    CHECK(std::abs(bl - num::normal_quantile(alpha / 2)) < 0.1);
    CHECK(std::abs(bu - num::normal_quantile(1 - alpha / 2)) < 0.1);
  }

  TEST_CASE("msis") {
    const std::vector<double> h{0, 1, 0, 1};
    const IntervalForecast f{-0.5, 0.5, 0.1};
    CHECK(msis(h, 0.9, f) == interval_score(0.9, f));
    CHECK_THROWS_AS(msis(std::vector<double>{2, 2, 2}, 1.0, f), InputError);
    CHECK_THROWS_AS(msis(std::vector<double>{2}, 1.0, f), InputError);

    Rng rng(6);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> hist(2 + rng.below(30));
      for (auto& v : hist) v = rng.normal(0, 3);
      const double y = rng.normal(0, 3);
      double lo = rng.normal(), hi = lo + std::abs(rng.normal(0, 2));
      const double alpha = 0.01 + 0.9 * rng.uniform();
      const IntervalForecast g{lo, hi, alpha};
      const double m = msis(hist, y, g);
      // direct formula
      double scale = 0.0;
      for (std::size_t t = 1; t < hist.size(); ++t) scale += std::abs(hist[t] - hist[t - 1]);
      scale /= static_cast<double>(hist.size() - 1);
      const double direct =
          ((hi - lo) + 2.0 / alpha * (lo - y) * (y < lo) + 2.0 / alpha * (y - hi) * (y > hi)) / scale;
      CHECK(std::abs(m - direct) <= 1e-12 * std::max(1.0, std::abs(direct)));
      // scale invariance
      for (double c : {2.0, 0.37, 1e3}) {
        std::vector<double> hc = hist;
        for (auto& v : hc) v *= c;
        const double mc = msis(hc, c * y, {c * lo, c * hi, alpha});
        CHECK(std::abs(mc - m) <= 1e-12 * std::max(1.0, std::abs(m)));
      }
    }
  }

  TEST_CASE("critical bandwidth") {
    std::vector<double> pair;
    for (int i = 0; i < 500; ++i) {
      pair.push_back(-10.0);
      pair.push_back(10.0);
    }
    const double h = kde_critical_bandwidth(pair);
    CHECK(std::abs(h - 10.0) <= 1.5);

    Rng rng(7);
    std::vector<double> g(10000);
    for (auto& v : g) v = rng.normal();
    CHECK(kde_critical_bandwidth(g) < 1.0);

    std::vector<double> s(300);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = (i % 3 == 0 ? 4.0 : 0.0) + rng.normal();
    const double base = kde_critical_bandwidth(s);
    for (double c : {0.5, 3.0, 100.0}) {
      std::vector<double> sc = s;
      for (auto& v : sc) v *= c;
      CHECK(std::abs(kde_critical_bandwidth(sc) / (c * base) - 1.0) < 5e-3);
    }
    CHECK_THROWS_AS(kde_critical_bandwidth(std::vector<double>(20, 1.0)), InputError);
    CHECK_THROWS_AS(kde_critical_bandwidth(std::vector<double>{1, 2, 3}), InputError);
    CHECK(kde_mode_count(pair, 1.0) == 2);
    CHECK(kde_mode_count(pair, 30.0) == 1);
  }
}
