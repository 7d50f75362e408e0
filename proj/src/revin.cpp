#include "cats/revin.hpp"

#include <cmath>
#include <stdexcept>

namespace cats {

namespace {

void check_affine(const AffineParams& affine, const std::vector<int>& feature,
                  Eigen::Index cols) {
  if (!affine.enabled) return;
  if (static_cast<Eigen::Index>(feature.size()) != cols)
    throw std::invalid_argument("affine enabled but feature map missing");
  for (int f : feature)
    if (f < 0 || f >= affine.alpha.size())
      throw std::invalid_argument("feature index out of range");
}

}  // namespace

Eigen::MatrixXd revin_norm(const Eigen::MatrixXd& x, const AffineParams& affine,
                           const std::vector<int>& feature, InstanceStats& stats,
                           double eps) {
  const Eigen::Index len = x.rows(), n = x.cols();
  if (len < 2) throw std::invalid_argument("instance length must be >= 2");
  check_affine(affine, feature, n);

  stats.mean.resize(n);
  stats.std.resize(n);
  Eigen::MatrixXd out(len, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double mu = x.col(j).mean();
    const double var = (x.col(j).array() - mu).square().mean();
    const double sd = std::sqrt(var + eps);
    stats.mean(j) = mu;
    stats.std(j) = sd;
    out.col(j) = (x.col(j).array() - mu) / sd;
    if (affine.enabled) {
      const int f = feature[j];
      out.col(j) = affine.alpha(f) + affine.beta(f) * out.col(j).array();
    }
  }
  return out;
}

Eigen::MatrixXd revin_denorm(const Eigen::MatrixXd& y_hat,
                             const InstanceStats& stats,
                             const AffineParams& affine,
                             const std::vector<int>& feature) {
  const Eigen::Index n = y_hat.cols();
  check_affine(affine, feature, n);
  Eigen::MatrixXd out(y_hat.rows(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double a = 0.0, b = 1.0;
    if (affine.enabled) {
      a = affine.alpha(feature[j]);
      b = affine.beta(feature[j]);
    }
    out.col(j) = stats.std(j) * (y_hat.col(j).array() - a) / b + stats.mean(j);
  }
  return out;
}

Eigen::MatrixXd revin_denorm_backward(const Eigen::MatrixXd& grad_y,
                                      const Eigen::MatrixXd& y_hat,
                                      const InstanceStats& stats,
                                      const AffineParams& affine,
                                      const std::vector<int>& feature,
                                      AffineGrads* acc) {
  const Eigen::Index n = grad_y.cols();
  check_affine(affine, feature, n);
  Eigen::MatrixXd grad_yhat(grad_y.rows(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double a = 0.0, b = 1.0;
    if (affine.enabled) {
      a = affine.alpha(feature[j]);
      b = affine.beta(feature[j]);
    }
    const double sd = stats.std(j);
    grad_yhat.col(j) = grad_y.col(j) * (sd / b);
    if (affine.enabled && acc) {
      const int f = feature[j];
      acc->alpha(f) += -(sd / b) * grad_y.col(j).sum();
      acc->beta(f) +=
          -(sd / (b * b)) *
          (grad_y.col(j).array() * (y_hat.col(j).array() - a)).sum();
    }
  }
  return grad_yhat;
}

void revin_norm_backward(const Eigen::MatrixXd& grad_xn,
                         const Eigen::MatrixXd& x_n, const AffineParams& affine,
                         const std::vector<int>& feature, AffineGrads* acc) {
  if (!affine.enabled || !acc) return;
  check_affine(affine, feature, grad_xn.cols());
  for (Eigen::Index j = 0; j < grad_xn.cols(); ++j) {
    const int f = feature[j];
    const double a = affine.alpha(f), b = affine.beta(f);
    // r = (x - mean)/std recovered from the stored normalized instance
    Eigen::ArrayXd r = (x_n.col(j).array() - a) / b;
    acc->alpha(f) += grad_xn.col(j).sum();
    acc->beta(f) += (grad_xn.col(j).array() * r).sum();
  }
}

}  // namespace cats
