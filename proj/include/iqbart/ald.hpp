#pragma once

#include <span>
#include <vector>

#include "iqbart/numerics.hpp"

namespace iqbart {

/// A quantile level strictly inside (0, 1).
class QuantileLevel {
 public:
  explicit QuantileLevel(double tau);
  double value() const { return tau_; }
  operator double() const { return tau_; }

 private:
  double tau_;
};

struct ALDParams {
  ALDParams(double mu, double lambda, QuantileLevel tau);
  double mu;
  double lambda;
  QuantileLevel tau;
};

inline double check_loss(double u, double tau) { return u * (tau - (u < 0.0 ? 1.0 : 0.0)); }

double ald_log_density(double y, const ALDParams& p);

/// Smallest order statistic minimizing the empirical check risk.
double sample_quantile(std::span<const double> y, QuantileLevel tau);

/// Intermediate quantities of the closed-form posterior mean under a flat
/// prior on the location. The posterior on piece k, between the k-th and
/// (k+1)-th order statistics, is proportional to w_k exp(-c_k mu).
///
/// phi_k and psi_k overflow in linear scale for moderate n, so they are kept
/// as log phi_k and a signed log |psi_k|. The data are centered on `center`
/// before the pieces are formed; psi is relative to that center.
struct PosteriorMeanWorkspace {
  std::vector<double> sorted_y;
  std::vector<double> log_w;      // n+1
  std::vector<double> c;          // n+1, c_k = (k - n tau) / lambda
  std::vector<num::SignedLog> psi;  // n+1
  std::vector<double> log_phi;    // n+1
  double center = 0.0;

  void build(std::span<const double> y, double tau, double lambda);
  double mean() const;
};

/// Posterior mean of the location under the ALD working likelihood with a
/// flat prior, evaluated in log space.
double posterior_mean_quantile(std::span<const double> y, QuantileLevel tau, double lambda);

}  // namespace iqbart
