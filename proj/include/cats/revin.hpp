#pragma once

#include <Eigen/Dense>
#include <vector>

namespace cats {

/// Per-instance statistics captured by norm() and consumed by denorm().
/// std = sqrt(variance + eps), so it is strictly positive even for constant
/// instances.
struct InstanceStats {
  Eigen::VectorXd mean;  // one per instance (column)
  Eigen::VectorXd std;
};

/// Learnable per-feature affine target: normalized instances get mean alpha
/// and scale beta. Disabled means plain instance normalization.
struct AffineParams {
  Eigen::VectorXd alpha;  // D
  Eigen::VectorXd beta;   // D
  bool enabled = false;

  static AffineParams identity(Eigen::Index features, bool enabled = true) {
    AffineParams a;
    a.alpha = Eigen::VectorXd::Zero(features);
    a.beta = Eigen::VectorXd::Ones(features);
    a.enabled = enabled;
    return a;
  }
};

inline constexpr double kRevinEps = 1e-5;

/// Normalize each column of x (instances of length L) over the lookback only.
/// `feature` maps each column to its originating feature for the affine
/// lookup; may be empty when affine is disabled.
Eigen::MatrixXd revin_norm(const Eigen::MatrixXd& x, const AffineParams& affine,
                           const std::vector<int>& feature, InstanceStats& stats,
                           double eps = kRevinEps);

/// Restore the statistics removed by the matching norm call:
/// y = std * (y_hat - alpha) / beta + mean.
Eigen::MatrixXd revin_denorm(const Eigen::MatrixXd& y_hat,
                             const InstanceStats& stats,
                             const AffineParams& affine,
                             const std::vector<int>& feature);

struct AffineGrads {
  Eigen::VectorXd alpha;  // D
  Eigen::VectorXd beta;   // D
};

/// Gradient of a loss through denorm: returns dL/dy_hat given dL/dy, and
/// accumulates the affine contributions (y_hat is the normalized-domain
/// prediction passed to denorm).
Eigen::MatrixXd revin_denorm_backward(const Eigen::MatrixXd& grad_y,
                                      const Eigen::MatrixXd& y_hat,
                                      const InstanceStats& stats,
                                      const AffineParams& affine,
                                      const std::vector<int>& feature,
                                      AffineGrads* acc);

/// Affine contribution from the norm side: x_n = alpha + beta * r with
/// r = (x - mean)/std, so dL/dalpha += sum(g), dL/dbeta += sum(g .* r).
void revin_norm_backward(const Eigen::MatrixXd& grad_xn,
                         const Eigen::MatrixXd& x_n, const AffineParams& affine,
                         const std::vector<int>& feature, AffineGrads* acc);

}  // namespace cats
