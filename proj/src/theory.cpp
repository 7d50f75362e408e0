#include "cats/theory.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace cats::theory {

Eigen::VectorXd ols_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                        double condition_cap) {
  if (design.rows() != y.size())
    throw std::invalid_argument("design rows and target length differ");
  if (design.rows() < design.cols())
    throw std::invalid_argument("underdetermined system");
  Eigen::BDCSVD<Eigen::MatrixXd> svd(design,
                                     Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (smin <= 0.0 || sv(0) / smin > condition_cap) {
    std::ostringstream os;
    os << "ill-conditioned design, condition estimate "
       << (smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity());
    throw std::runtime_error(os.str());
  }
  return svd.solve(y);
}

double mahalanobis_excess(const Eigen::VectorXd& theta,
                          const Eigen::VectorXd& theta_star,
                          const Eigen::MatrixXd& psi, Eigen::Index n) {
  Eigen::VectorXd d = theta - theta_star;
  return d.dot(psi * d) / static_cast<double>(n);
}

Eigen::VectorXd theta_bar(const std::vector<LinearClassSpec>& specs) {
  if (specs.empty()) throw std::invalid_argument("no class specs");
  const Eigen::Index dim = specs[0].theta_star.size();
  Eigen::MatrixXd psi_sum = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(dim);
  for (const auto& s : specs) {
    Eigen::MatrixXd psi = s.psi();
    psi_sum += psi;
    rhs += psi * s.theta_star;
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(psi_sum);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("pooled Psi is singular");
  return ldlt.solve(rhs);
}

std::vector<LinearClassSpec> make_gaussian_specs(
    const std::vector<Eigen::VectorXd>& theta_stars,
    const std::vector<Eigen::Index>& samples_per_class, double sigma,
    std::uint64_t seed) {
  if (theta_stars.size() != samples_per_class.size())
    throw std::invalid_argument("spec size mismatch");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<LinearClassSpec> specs;
  for (std::size_t k = 0; k < theta_stars.size(); ++k) {
    LinearClassSpec s;
    s.theta_star = theta_stars[k];
    s.sigma = sigma;
    s.design.resize(samples_per_class[k], theta_stars[k].size());
    for (Eigen::Index i = 0; i < s.design.size(); ++i)
      s.design.data()[i] = gauss(rng);
    specs.push_back(std::move(s));
  }
  return specs;
}

namespace {

double stderr_of(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (xs.size() - 1) / xs.size());
}

}  // namespace

RiskReport mc_validate_thm1(const std::vector<LinearClassSpec>& specs,
                            int trials, std::uint64_t seed) {
  const int num_classes = static_cast<int>(specs.size());
  const Eigen::Index dim = specs[0].theta_star.size();
  Eigen::Index total = 0;
  std::vector<Eigen::MatrixXd> psis;
  for (const auto& s : specs) {
    if (s.samples() <= dim)
      throw std::invalid_argument("each class needs more samples than L");
    total += s.samples();
    psis.push_back(s.psi());
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<std::vector<Eigen::VectorXd>> estimates(
      num_classes, std::vector<Eigen::VectorXd>());
  for (int t = 0; t < trials; ++t) {
    for (int k = 0; k < num_classes; ++k) {
      const auto& s = specs[k];
      Eigen::VectorXd y = s.design * s.theta_star;
      for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += s.sigma * gauss(rng);
      estimates[k].push_back(ols_fit(s.design, y));
    }
  }

  std::vector<Eigen::VectorXd> means(num_classes,
                                     Eigen::VectorXd::Zero(dim));
  for (int k = 0; k < num_classes; ++k) {
    for (const auto& e : estimates[k]) means[k] += e;
    means[k] /= trials;
  }

  RiskReport r;
  r.design_name = "oracle-class";
  r.trials = trials;
  r.seed = seed;
  for (int k = 0; k < num_classes; ++k)
    r.bias_part += static_cast<double>(specs[k].samples()) / total *
                   mahalanobis_excess(means[k], specs[k].theta_star, psis[k],
                                      specs[k].samples());
  std::vector<double> per_trial(trials, 0.0);
  for (int t = 0; t < trials; ++t)
    for (int k = 0; k < num_classes; ++k)
      per_trial[t] += static_cast<double>(specs[k].samples()) / total *
                      mahalanobis_excess(estimates[k][t], means[k], psis[k],
                                         specs[k].samples());
  for (double v : per_trial) r.variance_part += v;
  r.variance_part /= trials;
  r.stderr_variance = stderr_of(per_trial, r.variance_part);
  r.closed_form_bias = 0.0;
  r.closed_form_variance = static_cast<double>(num_classes) * dim *
                           specs[0].sigma * specs[0].sigma / total;
  return r;
}

RiskReport mc_validate_thm2(const std::vector<LinearClassSpec>& specs,
                            int trials, std::uint64_t seed) {
  const int num_classes = static_cast<int>(specs.size());
  const Eigen::Index dim = specs[0].theta_star.size();
  Eigen::Index total = 0;
  std::vector<Eigen::MatrixXd> psis;
  for (const auto& s : specs) {
    total += s.samples();
    psis.push_back(s.psi());
  }
  if (total <= dim) throw std::invalid_argument("pooled samples must exceed L");

  // pooled design
  Eigen::MatrixXd pooled(total, dim);
  Eigen::Index row = 0;
  for (const auto& s : specs) {
    pooled.middleRows(row, s.samples()) = s.design;
    row += s.samples();
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  std::vector<Eigen::VectorXd> estimates;
  estimates.reserve(trials);
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd y(total);
    row = 0;
    for (const auto& s : specs) {
      Eigen::VectorXd clean = s.design * s.theta_star;
      for (Eigen::Index i = 0; i < clean.size(); ++i)
        clean(i) += s.sigma * gauss(rng);
      y.segment(row, s.samples()) = clean;
      row += s.samples();
    }
    estimates.push_back(ols_fit(pooled, y));
  }

  Eigen::VectorXd mean_est = Eigen::VectorXd::Zero(dim);
  for (const auto& e : estimates) mean_est += e;
  mean_est /= trials;

  RiskReport r;
  r.design_name = "one-channel";
  r.trials = trials;
  r.seed = seed;
  for (int k = 0; k < num_classes; ++k)
    r.bias_part += static_cast<double>(specs[k].samples()) / total *
                   mahalanobis_excess(mean_est, specs[k].theta_star, psis[k],
                                      specs[k].samples());
  std::vector<double> per_trial(trials, 0.0);
  for (int t = 0; t < trials; ++t)
    for (int k = 0; k < num_classes; ++k)
      per_trial[t] += static_cast<double>(specs[k].samples()) / total *
                      mahalanobis_excess(estimates[t], mean_est, psis[k],
                                         specs[k].samples());
  for (double v : per_trial) r.variance_part += v;
  r.variance_part /= trials;
  r.stderr_variance = stderr_of(per_trial, r.variance_part);

  Eigen::VectorXd tbar = theta_bar(specs);
  for (int k = 0; k < num_classes; ++k)
    r.closed_form_bias += static_cast<double>(specs[k].samples()) / total *
                          mahalanobis_excess(tbar, specs[k].theta_star,
                                             psis[k], specs[k].samples());
  r.closed_form_variance =
      static_cast<double>(dim) * specs[0].sigma * specs[0].sigma / total;
  return r;
}

bool within_tolerance(double empirical, double closed_form, double stderr_mc) {
  const double tol =
      std::max(0.05 * std::abs(closed_form), 3.0 * stderr_mc + 1e-12);
  return std::abs(empirical - closed_form) <= tol;
}

SweepResult channel_design_sweep(int features, int num_classes, int dim,
                                 Eigen::Index total_samples, double sigma,
                                 std::uint64_t seed, int trials,
                                 double heterogeneity) {
  if (features < 1 || num_classes < 1 || num_classes > features)
    throw std::invalid_argument("need 1 <= K <= D");
  if (total_samples % features != 0)
    throw std::invalid_argument("total samples must divide evenly by D");
  const Eigen::Index per_feature = total_samples / features;
  if (per_feature <= dim)
    throw std::invalid_argument("per-feature sample count must exceed L");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // class parameters: shared base plus a scaled per-class offset
  Eigen::VectorXd base(dim);
  for (Eigen::Index i = 0; i < dim; ++i) base(i) = gauss(rng);
  std::vector<Eigen::VectorXd> class_theta(num_classes);
  for (int k = 0; k < num_classes; ++k) {
    Eigen::VectorXd offset(dim);
    for (Eigen::Index i = 0; i < dim; ++i) offset(i) = gauss(rng);
    class_theta[k] = base + heterogeneity * offset;
  }

  // each feature belongs to class d mod K and owns a fixed Gaussian design
  std::vector<Eigen::VectorXd> feature_theta(features);
  std::vector<Eigen::Index> feature_samples(features, per_feature);
  for (int d = 0; d < features; ++d)
    feature_theta[d] = class_theta[d % num_classes];
  auto per_feature_specs =
      make_gaussian_specs(feature_theta, feature_samples, sigma, seed + 1);

  // group the same designs by class for the oracle setting
  std::vector<LinearClassSpec> class_specs(num_classes);
  for (int k = 0; k < num_classes; ++k) {
    std::vector<int> members;
    for (int d = 0; d < features; ++d)
      if (d % num_classes == k) members.push_back(d);
    LinearClassSpec s;
    s.theta_star = class_theta[k];
    s.sigma = sigma;
    s.design.resize(per_feature * static_cast<Eigen::Index>(members.size()),
                    dim);
    Eigen::Index row = 0;
    for (int d : members) {
      s.design.middleRows(row, per_feature) = per_feature_specs[d].design;
      row += per_feature;
    }
    class_specs[k] = std::move(s);
  }

  SweepResult out;
  RiskReport oc = mc_validate_thm2(per_feature_specs, trials, seed + 2);
  oc.design_name = "one-channel";
  RiskReport oracle = mc_validate_thm1(class_specs, trials, seed + 3);
  oracle.design_name = "oracle-class";
  RiskReport ci = mc_validate_thm1(per_feature_specs, trials, seed + 4);
  ci.design_name = "channel-independent";

  const double slack_ok = 3.0 * (oc.stderr_variance + oracle.stderr_variance +
                                 ci.stderr_variance);
  out.variance_ordering_ok =
      oc.variance_part <= oracle.variance_part + slack_ok &&
      oracle.variance_part <= ci.variance_part + slack_ok;
  out.rows.push_back({std::move(oc)});
  out.rows.push_back({std::move(oracle)});
  out.rows.push_back({std::move(ci)});
  return out;
}

std::string format_report(const RiskReport& r) {
  std::ostringstream os;
  os.precision(8);
  os << r.design_name << "\tclosed_bias=" << r.closed_form_bias
     << "\temp_bias=" << r.bias_part
     << "\tclosed_var=" << r.closed_form_variance
     << "\temp_var=" << r.variance_part << "\tstderr=" << r.stderr_variance
     << "\ttrials=" << r.trials << "\tseed=" << r.seed;
  return os.str();
}

}  // namespace cats::theory
