#pragma once

#include <span>
#include <vector>

#include "iqbart/rng.hpp"

namespace iqbart {

/// Draw from N(mean, sd^2) truncated to [lo, hi]; either bound may be infinite.
double sample_truncated_normal(Rng& rng, double mean, double sd, double lo, double hi);

/// Posterior of a single leaf value c whose rows have residuals r_i and
/// quantile levels tau_i:
///
///   p(c) ∝ exp(-eta * sum_i rho_{tau_i}(r_i - c)) * N(c; 0, s^2)
///
/// with eta the learning rate. The integrand is piecewise Gaussian between
/// consecutive order statistics of r, so the normalizer is a sum of closed
/// form pieces. Pieces far from the mode are dropped once a concavity bound
/// shows their total mass is below 1e-12 of what has been accumulated.
class LeafPosterior {
 public:
  LeafPosterior(double learning_rate, double leaf_scale);

  /// log of the integral of the density above (including the prior's
  /// normalizing constant). `r` must be sorted ascending; sum_tau = sum tau_i
  /// and sum_tau_r = sum tau_i r_i over the same rows.
  double log_marginal(std::span<const double> r, double sum_tau, double sum_tau_r);

  /// As above with prefix[k] = r[0] + ... + r[k-1] supplied (length n + 1).
  double log_marginal(std::span<const double> r, std::span<const double> prefix, double sum_tau, double sum_tau_r);

  /// Draws c from the posterior evaluated by the last log_marginal call.
  double sample(Rng& rng) const;

  double learning_rate() const { return eta_; }
  double leaf_scale() const { return s_; }

 private:
  struct Piece {
    double lo, hi;  // bounds in c
    double a, b;    // f(c) = a + b c - h c^2
    double mass;    // relative to exp(f_max)
    bool cheap;
  };

  double piece_mass(Piece& p, double e_lo, double e_hi) const;

  double eta_;
  double s_;
  double h_;
  double log_norm_;
  double f_max_ = 0.0;
  double total_ = 0.0;
  std::vector<double> prefix_;
  std::vector<Piece> pieces_;
};

}  // namespace iqbart
