#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace cats::theory {

/// One class of the fixed-design regression model y = x^T theta_star + noise.
struct LinearClassSpec {
  Eigen::VectorXd theta_star;  // L
  Eigen::MatrixXd design;      // N_k x L, drawn once and held fixed
  double sigma = 1.0;

  Eigen::Index samples() const { return design.rows(); }
  Eigen::MatrixXd psi() const { return design.transpose() * design; }
};

/// Fixed-design OLS via a rank-revealing QR; errors out on ill-conditioned
/// designs instead of returning garbage.
Eigen::VectorXd ols_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                        double condition_cap = 1e10);

/// (1/N) * (theta - theta_star)^T Psi (theta - theta_star).
double mahalanobis_excess(const Eigen::VectorXd& theta,
                          const Eigen::VectorXd& theta_star,
                          const Eigen::MatrixXd& psi, Eigen::Index n);

/// Psi-weighted pooled target (sum Psi_k)^-1 (sum Psi_k theta_star_k).
Eigen::VectorXd theta_bar(const std::vector<LinearClassSpec>& specs);

struct RiskReport {
  std::string design_name;
  double bias_part = 0.0;        // empirical, Mahalanobis distance of the mean
  double variance_part = 0.0;    // empirical
  double closed_form_bias = 0.0;
  double closed_form_variance = 0.0;
  double stderr_variance = 0.0;  // Monte Carlo standard error of the mean
  int trials = 0;
  std::uint64_t seed = 0;

  double empirical_excess() const { return bias_part + variance_part; }
  double closed_form_excess() const {
    return closed_form_bias + closed_form_variance;
  }
};

/// Per-class OLS over `trials` noise draws; the pooled empirical excess risk
/// should match KL/N * sigma^2 with zero bias.
RiskReport mc_validate_thm1(const std::vector<LinearClassSpec>& specs,
                            int trials, std::uint64_t seed);

/// One global OLS on the pooled data per trial; bias against the closed form
/// sum (N_k/N) ||theta_bar - theta_star_k||^2_Psi_k, variance against
/// L/N * sigma^2.
RiskReport mc_validate_thm2(const std::vector<LinearClassSpec>& specs,
                            int trials, std::uint64_t seed);

/// Draw K Gaussian fixed designs with given per-class parameters.
std::vector<LinearClassSpec> make_gaussian_specs(
    const std::vector<Eigen::VectorXd>& theta_stars,
    const std::vector<Eigen::Index>& samples_per_class, double sigma,
    std::uint64_t seed);

struct SweepRow {
  RiskReport report;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // one-channel, oracle-class, channel-independent
  bool variance_ordering_ok = false;
};

/// Compare one-channel (pooled), oracle-class (K models), and
/// channel-independent (D models) designs on the same synthetic data.
/// `heterogeneity` scales the spread of the class parameters.
SweepResult channel_design_sweep(int features, int num_classes, int dim,
                                 Eigen::Index total_samples, double sigma,
                                 std::uint64_t seed, int trials = 2000,
                                 double heterogeneity = 1.0);

/// 5% relative or 3 Monte Carlo standard errors, whichever is looser.
bool within_tolerance(double empirical, double closed_form, double stderr_mc);

std::string format_report(const RiskReport& r);

}  // namespace cats::theory
