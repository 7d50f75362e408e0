#pragma once

#include <Eigen/Dense>
#include <functional>
#include <random>

namespace cats::testing {

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols,
                                     std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, scale);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = gauss(rng);
  return m;
}

inline Eigen::VectorXd random_vector(Eigen::Index n, std::uint64_t seed,
                                     double scale = 1.0) {
  return random_matrix(n, 1, seed, scale);
}

/// Central finite difference of a scalar function at one coordinate of a
/// parameter tensor.
inline double central_difference(double& coord,
                                 const std::function<double()>& eval,
                                 double eps = 1e-6) {
  const double saved = coord;
  coord = saved + eps;
  const double hi = eval();
  coord = saved - eps;
  const double lo = eval();
  coord = saved;
  return (hi - lo) / (2.0 * eps);
}

inline double rel_error(double a, double b, double floor = 1e-8) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace cats::testing
