#include "iqbart/leaf_posterior.hpp"

#include <algorithm>
#include <cmath>

#include "iqbart/error.hpp"
#include "iqbart/numerics.hpp"

namespace iqbart {

namespace {

// Excess e >= 0 over a of a standard normal truncated to [a, a + width], a >= 0.
double tail_excess(Rng& rng, double a, double width) {
  if (width * (a + 0.5 * width) <= 1.0) {
    for (;;) {
      const double e = width * rng.uniform();
      if (rng.uniform() < std::exp(-e * (a + 0.5 * e))) return e;
    }
  }
  const double rate = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double e = rng.exponential(rate);
    if (e > width) continue;
    const double d = a + e - rate;
    if (rng.uniform() < std::exp(-0.5 * d * d)) return e;
  }
}

// Integral over [0,1] of exp(w v - eps v^2), expanded in powers of eps:
//   sum_j (-eps)^j / j! * G_{2j}(w),  G_k(w) = integral of v^k exp(w v).
// eps is kept <= 1e-2 so four orders reach ~1e-12 relative; each order is
// summed only as far as its own weight requires.
constexpr double kCheapLimit = 1e-2;
constexpr double kSeriesTolerance = 1e-15;
constexpr int kMaxOrder = 4;
constexpr int kSeriesTerms = 14;
constexpr double kOrderWeight[kMaxOrder + 1] = {1.0, -1.0, 0.5, -1.0 / 6.0, 1.0 / 24.0};

struct InverseTable {
  double inv[kSeriesTerms + 2 * kMaxOrder + 2];
  constexpr InverseTable() : inv{} {
    for (int i = 1; i < kSeriesTerms + 2 * kMaxOrder + 2; ++i) inv[i] = 1.0 / i;
  }
};
constexpr InverseTable kInv{};

// Small |w|: forward Taylor series in w.
double tilted_integral_series(double w, double eps) {
  double total = 0.0;
  double ej = 1.0;
  for (int j = 0; j <= kMaxOrder; ++j) {
    if (j > 0) ej *= eps;
    const double weight = ej * std::abs(kOrderWeight[j]);
    if (weight < kSeriesTolerance) break;
    const double tol = kSeriesTolerance / weight;
    double term = 1.0;  // w^m / m!
    double acc = 0.0;
    for (int m = 0; m < kSeriesTerms; ++m) {
      acc += term * kInv.inv[m + 2 * j + 1];
      term *= w * kInv.inv[m + 1];
      if (std::abs(term) < tol) break;
    }
    total += kOrderWeight[j] * ej * acc;
  }
  return total;
}

// Larger |w|: integration by parts. For w < 0, `ew` is exp(w) and the result
// is the integral itself; for w > 0, `ew` is exp(-w) and the result is scaled
// by exp(-w). The recurrences amplify error by at most k!/|w|^k, which the
// eps^j weights absorb.
double tilted_integral_recurrence(double w, double ew, double eps) {
  int order = 0;
  double ej = 1.0;
  while (order < kMaxOrder) {
    ej *= eps;
    if (ej * std::abs(kOrderWeight[order + 1]) < kSeriesTolerance) break;
    ++order;
  }
  const double iw = 1.0 / w;
  const double lead = w < 0.0 ? ew : 1.0;
  double g = (w < 0.0 ? ew - 1.0 : 1.0 - ew) * iw;
  double total = g;
  double e = 1.0;
  for (int k = 1; k <= 2 * order; ++k) {
    g = (lead - k * g) * iw;
    if (k % 2 == 0) {
      e *= eps;
      total += kOrderWeight[k / 2] * e * g;
    }
  }
  return total;
}

double exp_small(double x) {
  return 1.0 + x * (1.0 + x * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x * (1.0 / 120.0 + x / 720.0)))));
}

constexpr double kTailTolerance = 1e-12;

}  // namespace

double sample_truncated_normal(Rng& rng, double mean, double sd, double lo, double hi) {
  if (!(hi > lo)) throw InputError("sample_truncated_normal: empty interval");
  const double a = std::isinf(lo) ? lo : (lo - mean) / sd;
  const double b = std::isinf(hi) ? hi : (hi - mean) / sd;
  const double width = (std::isinf(lo) || std::isinf(hi)) ? num::kInf : (hi - lo) / sd;
  double c;
  if (a >= 0.0) {
    c = lo + sd * tail_excess(rng, a, width);
  } else if (b <= 0.0) {
    c = hi - sd * tail_excess(rng, -b, width);
  } else if (b - a < 2.5) {
    double z;
    do z = a + (b - a) * rng.uniform();
    while (!(rng.uniform() < std::exp(-0.5 * z * z)));
    c = mean + sd * z;
  } else {
    double z;
    do z = rng.normal();
    while (z < a || z > b);
    c = mean + sd * z;
  }
  return std::clamp(c, lo, hi);
}

LeafPosterior::LeafPosterior(double learning_rate, double leaf_scale)
    : eta_(learning_rate), s_(leaf_scale), h_(0.5 / (leaf_scale * leaf_scale)),
      log_norm_(-std::log(leaf_scale) - num::kLogSqrt2Pi) {
  if (!(learning_rate > 0.0)) throw InputError("learning rate must be positive");
  if (!(leaf_scale > 0.0)) throw InputError("leaf scale must be positive");
}

double LeafPosterior::piece_mass(Piece& p, double e_lo, double e_hi) const {
  const double len = p.hi - p.lo;
  p.cheap = std::isfinite(len) && h_ * len * len <= kCheapLimit;
  if (!p.cheap) return std::exp(num::log_gaussian_piece(p.a - f_max_, p.b, h_, p.lo, p.hi));
  const double w = (p.b - 2.0 * h_ * p.lo) * len;
  const double eps = h_ * len * len;
  // Recurrence error is about 1e-16 / |w| once |w| >= 3 sqrt(eps).
  if (std::abs(w) < 1e-3 || w * w < 9.0 * eps) return len * e_lo * tilted_integral_series(w, eps);
  // e_lo * exp(w) = e_hi * exp(eps) since f(hi) = f(lo) + w - eps.
  if (w < 0.0) {
    if (e_lo == 0.0) return 0.0;
    return len * e_lo * tilted_integral_recurrence(w, e_hi * exp_small(eps) / e_lo, eps);
  }
  if (e_hi == 0.0) return 0.0;
  const double scale = e_hi * exp_small(eps);
  return len * scale * tilted_integral_recurrence(w, e_lo / scale, eps);
}

double LeafPosterior::log_marginal(std::span<const double> r, double sum_tau, double sum_tau_r) {
  prefix_.resize(r.size() + 1);
  prefix_[0] = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) prefix_[i + 1] = prefix_[i] + r[i];
  return log_marginal(r, prefix_, sum_tau, sum_tau_r);
}

double LeafPosterior::log_marginal(std::span<const double> r, std::span<const double> prefix, double sum_tau,
                                   double sum_tau_r) {
  const std::size_t n = r.size();

  const auto make = [&](std::size_t k) {
    Piece p;
    p.lo = k == 0 ? num::kNegInf : r[k - 1];
    p.hi = k == n ? num::kInf : r[k];
    p.a = eta_ * (prefix[k] - sum_tau_r) + log_norm_;
    p.b = eta_ * (sum_tau - static_cast<double>(k));
    p.mass = 0.0;
    p.cheap = false;
    return p;
  };
  const auto f_at = [&](const Piece& p, double c) { return p.a + c * (p.b - h_ * c); };
  // exp(f - f_max) at a finite piece bound, zero at infinite ones.
  const auto rel = [&](const Piece& p, double c) { return std::isinf(c) ? 0.0 : std::exp(f_at(p, c) - f_max_); };

  // Mode piece: first k whose derivative at its right end is nonpositive.
  std::size_t lo = 0, hi = n;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (eta_ * (sum_tau - static_cast<double>(mid)) - 2.0 * h_ * r[mid] <= 0.0) hi = mid;
    else lo = mid + 1;
  }
  const std::size_t mode = lo;

  pieces_.clear();
  Piece pm = make(mode);
  const double c_star = std::clamp(pm.b / (2.0 * h_), pm.lo, pm.hi);
  f_max_ = f_at(pm, c_star);
  const double e_mode_lo = rel(pm, pm.lo);
  const double e_mode_hi = rel(pm, pm.hi);
  pm.mass = piece_mass(pm, e_mode_lo, e_mode_hi);
  total_ = pm.mass;
  pieces_.push_back(pm);

  // Walk outward; everything beyond a bound is at most exp(f) / |f'| there.
  double e_edge = e_mode_lo;
  for (std::size_t k = mode; k-- > 0;) {
    Piece p = make(k);
    const double slope = p.b - 2.0 * h_ * p.hi;
    if (slope > 0.0 && e_edge / slope < kTailTolerance * total_) break;
    const double e_lo = rel(p, p.lo);
    p.mass = piece_mass(p, e_lo, e_edge);
    total_ += p.mass;
    pieces_.push_back(p);
    e_edge = e_lo;
  }
  e_edge = e_mode_hi;
  for (std::size_t k = mode + 1; k <= n; ++k) {
    Piece p = make(k);
    const double slope = -(p.b - 2.0 * h_ * p.lo);
    if (slope > 0.0 && e_edge / slope < kTailTolerance * total_) break;
    const double e_hi = rel(p, p.hi);
    p.mass = piece_mass(p, e_edge, e_hi);
    total_ += p.mass;
    pieces_.push_back(p);
    e_edge = e_hi;
  }
  if (!(total_ > 0.0) || !std::isfinite(total_)) throw NumericError("leaf marginal likelihood is not finite");
  return f_max_ + std::log(total_);
}

double LeafPosterior::sample(Rng& rng) const {
  double u = rng.uniform() * total_;
  const Piece* chosen = &pieces_.back();
  for (const auto& p : pieces_) {
    if (u < p.mass) {
      chosen = &p;
      break;
    }
    u -= p.mass;
  }
  const Piece& p = *chosen;
  if (!p.cheap) return sample_truncated_normal(rng, p.b / (2.0 * h_), s_, p.lo, p.hi);

  // Exponential tilt on the piece, then accept against the quadratic term.
  const double len = p.hi - p.lo;
  const double w = (p.b - 2.0 * h_ * p.lo) * len;
  const double eps = h_ * len * len;
  for (;;) {
    const double q = rng.uniform();
    double v;
    if (std::abs(w) < 1e-12) v = q;
    else if (w > 0.0) v = 1.0 + std::log(q + (1.0 - q) * std::exp(-w)) / w;
    else v = std::log1p(q * std::expm1(w)) / w;
    v = std::clamp(v, 0.0, 1.0);
    if (rng.uniform() < std::exp(-eps * v * v)) return p.lo + v * len;
  }
}

}  // namespace iqbart
