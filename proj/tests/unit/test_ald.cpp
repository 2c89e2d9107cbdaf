#include <doctest.h>

#include <cmath>
#include <vector>

#include "iqbart/ald.hpp"
#include "iqbart/error.hpp"
#include "iqbart/rng.hpp"
#include "oracles.hpp"

using namespace iqbart;

TEST_SUITE("ald") {
  TEST_CASE("quantile level rejects the boundary") {
    CHECK_THROWS_AS(QuantileLevel{0.0}, InputError);
    CHECK_THROWS_AS(QuantileLevel{1.0}, InputError);
    CHECK_THROWS_AS(QuantileLevel{std::nan("")}, InputError);
    CHECK(QuantileLevel{0.25}.value() == 0.25);
  }

  TEST_CASE("check loss values") {
    CHECK(check_loss(0.0, 0.37) == 0.0);
    CHECK(check_loss(2.0, 0.5) == doctest::Approx(1.0));
    CHECK(check_loss(-1.0, 0.3) == doctest::Approx(0.7));
  }

  TEST_CASE("check loss is nonnegative, zero only at 0, and convex") {
    Rng rng(11);
    for (int i = 0; i < 2000; ++i) {
      const double tau = rng.uniform();
      const double a = rng.normal(0, 5), b = rng.normal(0, 5);
      CHECK(check_loss(a, tau) > 0.0);
      CHECK(check_loss(0.5 * (a + b), tau) <= 0.5 * (check_loss(a, tau) + check_loss(b, tau)) + 1e-12);
    }
  }

  TEST_CASE("ald density at the location") {
    CHECK(ald_log_density(0.4, ALDParams(0.4, 1.0, QuantileLevel{0.5})) == doctest::Approx(std::log(0.25)));
    CHECK(ald_log_density(-2.0, ALDParams(-2.0, 2.0, QuantileLevel{0.3})) == doctest::Approx(std::log(0.21 / 2.0)));
    CHECK_THROWS_AS(ALDParams(0.0, 0.0, QuantileLevel{0.5}), InputError);
  }

  TEST_CASE("ald density integrates to one") {
    auto mass = [](double mu, double lambda, double tau) {
      const ALDParams p(mu, lambda, QuantileLevel{tau});
      auto f = [&](double y) { return std::exp(ald_log_density(y, p)); };
      const double inf = std::numeric_limits<double>::infinity();
      return oracle::integrate(f, -inf, mu) + oracle::integrate(f, mu, inf);
    };
    CHECK(std::abs(mass(0.3, 1.7, 0.25) - 1.0) < 1e-8);
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
      const double m = mass(rng.normal(0, 3), std::exp(rng.normal(0, 1)), 0.05 + 0.9 * rng.uniform());
      CHECK(std::abs(m - 1.0) < 1e-8);
    }
  }

  TEST_CASE("sample quantile examples") {
    const std::vector<double> y{3, 1, 2};
    CHECK(sample_quantile(y, QuantileLevel{0.5}) == 2.0);
    const std::vector<double> one{5};
    CHECK(sample_quantile(one, QuantileLevel{0.1}) == 5.0);
    CHECK(sample_quantile(one, QuantileLevel{0.9}) == 5.0);
    CHECK_THROWS_AS(sample_quantile(std::vector<double>{}, QuantileLevel{0.5}), InputError);
    // n tau integer: smallest minimizer
    const std::vector<double> four{1, 2, 3, 4};
    CHECK(sample_quantile(four, QuantileLevel{0.5}) == 2.0);
  }

  TEST_CASE("sample quantile matches an exhaustive risk scan") {
    Rng rng(3);
    for (int rep = 0; rep < 50; ++rep) {
      std::vector<double> y(20);
      for (auto& v : y) v = rng.normal();
      for (double tau : {0.3, 0.05, 0.5, 0.95})
        CHECK(sample_quantile(y, QuantileLevel{tau}) == oracle::scan_sample_quantile(y, tau));
    }
  }

  TEST_CASE("posterior mean is symmetric for two symmetric points") {
    for (double a : {0.1, 1.0, 50.0})
      for (double lambda : {0.01, 1.0, 100.0}) {
        const std::vector<double> y{-a, a};
        CHECK(std::abs(posterior_mean_quantile(y, QuantileLevel{0.5}, lambda)) < 1e-12 * a + 1e-15);
      }
  }

  TEST_CASE("posterior mean matches the quadrature oracle") {
    Rng rng(10);
    std::vector<double> y(10);
    for (auto& v : y) v = rng.uniform();
    const double got = posterior_mean_quantile(y, QuantileLevel{0.3}, 1.0);
    const double want = oracle::posterior_mean(y, 0.3, 1.0);
    CHECK(std::abs(got - want) <= 1e-8 * std::abs(want));

    for (int rep = 0; rep < 40; ++rep) {
      const std::size_t n = 1 + rng.below(50);
      std::vector<double> ys(n);
      const double scale = std::exp(rng.normal(0, 1));
      for (auto& v : ys) v = rng.normal(rng.normal(0, 2), scale);
      const double tau = 0.1 * static_cast<double>(1 + rng.below(9));
      const double lambda = std::vector<double>{0.1, 1.0, 10.0}[rng.below(3)];
      const double a = posterior_mean_quantile(ys, QuantileLevel{tau}, lambda);
      const double b = oracle::posterior_mean(ys, tau, lambda);
      const auto [lo, hi] = std::minmax_element(ys.begin(), ys.end());
      CHECK(std::abs(a - b) <= 1e-8 * std::max(std::abs(b), *hi - *lo + lambda));
    }
  }

  TEST_CASE("posterior mean limits") {
    Rng rng(21);
    std::vector<double> y(50);
    for (auto& v : y) v = rng.normal();
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= 50.0;
    double sd = 0.0;
    for (double v : y) sd += (v - mean) * (v - mean);
    sd = std::sqrt(sd / 49.0);
    // learning rate 1e-9: lambda = 1e9
    CHECK(std::abs(posterior_mean_quantile(y, QuantileLevel{0.5}, 1e9) - mean) < 1e-4 * sd);
    const auto [lo, hi] = std::minmax_element(y.begin(), y.end());
    // n tau = 5, 15, 35 are integers: the posterior flattens over the gap
    // between order statistics n tau and n tau + 1, so the limit is its midpoint
    std::vector<double> s = y;
    std::sort(s.begin(), s.end());
    for (double tau : {0.1, 0.3, 0.7}) {
      const auto k = static_cast<std::size_t>(std::lround(50 * tau));
      const double mid = 0.5 * (s[k - 1] + s[k]);
      CHECK(std::abs(posterior_mean_quantile(y, QuantileLevel{tau}, 1e-6) - mid) <= 1e-3 * (*hi - *lo));
    }
    // away from integer n tau the limit is the sample quantile
    const std::vector<double> y49(y.begin(), y.begin() + 49);
    for (double tau : {0.1, 0.3, 0.7}) {
      const double q = sample_quantile(y49, QuantileLevel{tau});
      CHECK(std::abs(posterior_mean_quantile(y49, QuantileLevel{tau}, 1e-6) - q) <= 1e-3 * (*hi - *lo));
    }
  }

  TEST_CASE("posterior mean is translation equivariant") {
    Rng rng(8);
    for (int rep = 0; rep < 30; ++rep) {
      std::vector<double> y(1 + rng.below(40));
      for (auto& v : y) v = rng.normal();
      const double c = rng.normal(0, 100);
      std::vector<double> yc = y;
      for (auto& v : yc) v += c;
      const double tau = rng.uniform(), lambda = std::exp(rng.normal(0, 2));
      const double a = posterior_mean_quantile(y, QuantileLevel{tau}, lambda);
      const double b = posterior_mean_quantile(yc, QuantileLevel{tau}, lambda);
      CHECK(std::abs(b - a - c) < 1e-10 * std::max(1.0, std::abs(c)));
    }
  }

  TEST_CASE("posterior mean edge cases") {
    CHECK_THROWS_AS(posterior_mean_quantile(std::vector<double>{}, QuantileLevel{0.5}, 1.0), InputError);
    CHECK_THROWS_AS(posterior_mean_quantile(std::vector<double>{1.0}, QuantileLevel{0.5}, 0.0), InputError);
    // all-equal data: two-sided exponential posterior around the common value
    const std::vector<double> same(7, 3.25);
    const double shift = 0.5 / (7 * 0.1) - 0.5 / (7 * 0.9);
    CHECK(posterior_mean_quantile(same, QuantileLevel{0.9}, 0.5) == doctest::Approx(3.25 + shift).epsilon(1e-14));
    CHECK(posterior_mean_quantile(same, QuantileLevel{0.5}, 0.5) == 3.25);
    for (double tau : {0.1, 0.4, 0.8})
      for (double lambda : {0.1, 10.0}) {
        const std::vector<double> one{-2.0};
        const double want = oracle::posterior_mean(one, tau, lambda);
        CHECK(std::abs(posterior_mean_quantile(one, QuantileLevel{tau}, lambda) - want) <= 1e-10 * std::abs(want));
      }
    // large n does not overflow
    Rng rng(1);
    std::vector<double> big(5000);
    for (auto& v : big) v = rng.normal(0, 1000);
    CHECK(std::isfinite(posterior_mean_quantile(big, QuantileLevel{0.2}, 1e-3)));
    CHECK(std::isfinite(posterior_mean_quantile(big, QuantileLevel{0.2}, 1e6)));
    // n tau integer branch
    const std::vector<double> y4{0.0, 1.0, 2.5, 4.0};
    CHECK(std::abs(posterior_mean_quantile(y4, QuantileLevel{0.5}, 0.7) - oracle::posterior_mean(y4, 0.5, 0.7)) < 1e-9);
  }
}
