#include "cats/tslinear.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace cats {

void TSLinearConfig::validate() const {
  if (lookback < 2) throw std::invalid_argument("lookback must be >= 2");
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (period < 2) throw std::invalid_argument("period must be >= 2");
  if (ma_window < 3 || ma_window % 2 == 0)
    throw std::invalid_argument("ma_window must be odd and >= 3");
  if (ma_window > lookback)
    throw std::invalid_argument("ma_window must not exceed lookback");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("alpha must be in (0, 1)");
  if (recouple_m < 1) throw std::invalid_argument("m must be >= 1");
  if (recouple_m >= lookback)
    throw std::invalid_argument("m must be smaller than lookback");
}

TSLinearParams TSLinearParams::init(const TSLinearConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  TSLinearParams p;
  p.cfg = cfg;
  const int h = cfg.horizon, l = cfg.lookback;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0 / l, 1.0 / l);
  const auto fill = [&](Eigen::MatrixXd& m) {
    m.resize(h, l);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  };
  fill(p.ws_re);
  fill(p.ws_im);
  fill(p.wt);
  p.bs_re = Eigen::VectorXd::Zero(h);
  p.bs_im = Eigen::VectorXd::Zero(h);
  p.bt = Eigen::VectorXd::Zero(h);
  return p;
}

DecomposedSeries decompose(const Eigen::MatrixXd& x, int ma_window) {
  if (ma_window % 2 == 0) throw std::invalid_argument("ma_window must be odd");
  if (ma_window < 1 || ma_window > x.rows())
    throw std::invalid_argument("ma_window out of range");
  const Eigen::Index len = x.rows(), n = x.cols();
  const int r = (ma_window - 1) / 2;

  // replication-padded cumulative sum over rows
  Eigen::MatrixXd cs(len + 2 * r + 1, n);
  cs.row(0).setZero();
  for (Eigen::Index i = 0; i < len + 2 * r; ++i) {
    const Eigen::Index src = std::clamp<Eigen::Index>(i - r, 0, len - 1);
    cs.row(i + 1) = cs.row(i) + x.row(src);
  }

  DecomposedSeries d;
  d.trend.resize(len, n);
  for (Eigen::Index i = 0; i < len; ++i)
    d.trend.row(i) = (cs.row(i + ma_window) - cs.row(i)) / ma_window;
  d.seasonal = x - d.trend;
  return d;
}

Eigen::MatrixXd decompose_backward(const Eigen::MatrixXd& grad_trend,
                                   const Eigen::MatrixXd& grad_seasonal,
                                   int ma_window) {
  const Eigen::Index len = grad_trend.rows();
  const int r = (ma_window - 1) / 2;
  // dx = g_s + M^T (g_t - g_s), M the averaging map with clamped indices
  Eigen::MatrixXd gt = grad_trend - grad_seasonal;
  Eigen::MatrixXd gx = grad_seasonal;
  for (Eigen::Index i = 0; i < len; ++i) {
    for (int k = -r; k <= r; ++k) {
      const Eigen::Index j = std::clamp<Eigen::Index>(i + k, 0, len - 1);
      gx.row(j) += gt.row(i) / ma_window;
    }
  }
  return gx;
}

ComplexMat seasonal_to_complex(const Eigen::MatrixXd& s, int period) {
  if (period < 2) throw std::invalid_argument("period must be >= 2");
  const Eigen::Index len = s.rows();
  const double w = 2.0 * std::numbers::pi / period;
  ComplexMat z;
  z.re.resize(len, s.cols());
  z.im.resize(len, s.cols());
  for (Eigen::Index p = 0; p < len; ++p) {
    const double phase = w * static_cast<double>(p + 1);  // one-based index
    z.re.row(p) = s.row(p) * std::cos(phase);
    z.im.row(p) = s.row(p) * std::sin(phase);
  }
  return z;
}

ComplexMat complex_linear(const ComplexMat& z, const Eigen::MatrixXd& ws_re,
                          const Eigen::MatrixXd& ws_im,
                          const Eigen::VectorXd& bs_re,
                          const Eigen::VectorXd& bs_im) {
  ComplexMat zy;
  zy.re = ws_re * z.re - ws_im * z.im;
  zy.im = ws_re * z.im + ws_im * z.re;
  zy.re.colwise() += bs_re;
  zy.im.colwise() += bs_im;
  return zy;
}

Eigen::MatrixXd complex_to_real(const ComplexMat& zy, int period, int lookback) {
  const Eigen::Index h = zy.re.rows(), n = zy.re.cols();
  const double w = 2.0 * std::numbers::pi / period;
  Eigen::MatrixXd out(h, n);
  for (Eigen::Index q = 0; q < h; ++q) {
    const double phase = w * static_cast<double>(q + 1 + lookback);
    const double c = std::cos(phase), s = std::sin(phase);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double re = zy.re(q, j), im = zy.im(q, j);
      const double mod = std::sqrt(re * re + im * im);
      const double ref = re * c + im * s;  // Re(zy * e^{-j*phase})
      out(q, j) = (ref >= 0.0 ? mod : -mod);
    }
  }
  return out;
}

Eigen::MatrixXd trend_decouple(const Eigen::MatrixXd& t, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("alpha must be in (0, 1)");
  Eigen::MatrixXd h(t.rows(), t.cols());
  h.row(0) = t.row(0);
  if (t.rows() > 1)
    h.bottomRows(t.rows() - 1) =
        t.bottomRows(t.rows() - 1) - alpha * t.topRows(t.rows() - 1);
  return h;
}

Eigen::MatrixXd trend_recouple(const Eigen::MatrixXd& h_out,
                               const Eigen::MatrixXd& h_in_tail, double alpha,
                               int m) {
  if (h_in_tail.rows() != m)
    throw std::invalid_argument("tail must hold the last m states");
  const Eigen::Index h = h_out.rows(), n = h_out.cols();
  Eigen::MatrixXd cat(m + h, n);
  cat.topRows(m) = h_in_tail;
  cat.bottomRows(h) = h_out;

  Eigen::VectorXd kernel(m + 1);
  for (int i = 0; i <= m; ++i) kernel(i) = std::pow(alpha, i);

  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(h, n);
  for (Eigen::Index q = 0; q < h; ++q)
    for (int i = 0; i <= m; ++i) out.row(q) += kernel(i) * cat.row(m + q - i);
  return out;
}

namespace {

void check_finite(const Eigen::MatrixXd& m, const char* stage) {
  if (!m.allFinite()) throw NonFiniteError(stage);
}

}  // namespace

Eigen::MatrixXd tslinear_forward(const Eigen::MatrixXd& x_norm,
                                 const TSLinearParams& params,
                                 TSLinearTape* tape) {
  const auto& cfg = params.cfg;
  if (x_norm.rows() != cfg.lookback)
    throw std::invalid_argument("input length does not match lookback");
  check_finite(x_norm, "input");

  DecomposedSeries d = decompose(x_norm, cfg.ma_window);
  check_finite(d.trend, "decompose");

  // seasonal path
  ComplexMat z = seasonal_to_complex(d.seasonal, cfg.period);
  ComplexMat zy = complex_linear(z, params.ws_re, params.ws_im,
                                 cfg.seasonal_bias
                                     ? params.bs_re
                                     : Eigen::VectorXd::Zero(cfg.horizon).eval(),
                                 cfg.seasonal_bias
                                     ? params.bs_im
                                     : Eigen::VectorXd::Zero(cfg.horizon).eval());
  check_finite(zy.re, "complex_linear");
  Eigen::MatrixXd seasonal_pred = complex_to_real(zy, cfg.period, cfg.lookback);

  // trend path
  Eigen::MatrixXd h = trend_decouple(d.trend, cfg.alpha);
  Eigen::MatrixXd h_out = params.wt * h;
  h_out.colwise() += params.bt;
  check_finite(h_out, "trend_linear");
  Eigen::MatrixXd trend_pred = trend_recouple(
      h_out, h.bottomRows(cfg.recouple_m), cfg.alpha, cfg.recouple_m);

  Eigen::MatrixXd y = seasonal_pred + trend_pred;
  check_finite(y, "output");

  if (tape) {
    tape->z = std::move(z);
    tape->h = std::move(h);
    tape->zy = std::move(zy);
  }
  return y;
}

TSLinearGrads tslinear_backward(const TSLinearParams& params,
                                const TSLinearTape& tape,
                                const Eigen::MatrixXd& grad_y) {
  const auto& cfg = params.cfg;
  const Eigen::Index h = cfg.horizon, l = cfg.lookback, n = grad_y.cols();
  const int m = cfg.recouple_m;
  const double alpha = cfg.alpha;
  const double w = 2.0 * std::numbers::pi / cfg.period;

  TSLinearGrads g;

  // --- seasonal path ---
  // out = delta * |zy|, delta held constant
  ComplexMat g_zy;
  g_zy.re.resize(h, n);
  g_zy.im.resize(h, n);
  for (Eigen::Index q = 0; q < h; ++q) {
    const double phase = w * static_cast<double>(q + 1 + l);
    const double c = std::cos(phase), s = std::sin(phase);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double re = tape.zy.re(q, j), im = tape.zy.im(q, j);
      const double mod = std::sqrt(re * re + im * im);
      if (mod == 0.0) {
        g_zy.re(q, j) = 0.0;
        g_zy.im(q, j) = 0.0;
        continue;
      }
      const double delta = (re * c + im * s) >= 0.0 ? 1.0 : -1.0;
      const double gm = grad_y(q, j) * delta;
      g_zy.re(q, j) = gm * re / mod;
      g_zy.im(q, j) = gm * im / mod;
    }
  }

  g.ws_re = g_zy.re * tape.z.re.transpose() + g_zy.im * tape.z.im.transpose();
  g.ws_im = g_zy.im * tape.z.re.transpose() - g_zy.re * tape.z.im.transpose();
  if (cfg.seasonal_bias) {
    g.bs_re = g_zy.re.rowwise().sum();
    g.bs_im = g_zy.im.rowwise().sum();
  } else {
    g.bs_re = Eigen::VectorXd::Zero(h);
    g.bs_im = Eigen::VectorXd::Zero(h);
  }

  Eigen::MatrixXd g_zre =
      params.ws_re.transpose() * g_zy.re + params.ws_im.transpose() * g_zy.im;
  Eigen::MatrixXd g_zim =
      params.ws_re.transpose() * g_zy.im - params.ws_im.transpose() * g_zy.re;

  Eigen::MatrixXd g_seasonal(l, n);
  for (Eigen::Index p = 0; p < l; ++p) {
    const double phase = w * static_cast<double>(p + 1);
    g_seasonal.row(p) =
        std::cos(phase) * g_zre.row(p) + std::sin(phase) * g_zim.row(p);
  }

  // --- trend path ---
  // recouple adjoint: grad_cat(m+q-i) += alpha^i * grad_out(q)
  Eigen::MatrixXd g_cat = Eigen::MatrixXd::Zero(m + h, n);
  for (Eigen::Index q = 0; q < h; ++q) {
    double ai = 1.0;
    for (int i = 0; i <= m; ++i) {
      g_cat.row(m + q - i) += ai * grad_y.row(q);
      ai *= alpha;
    }
  }
  Eigen::MatrixXd g_hout = g_cat.bottomRows(h);

  g.wt = g_hout * tape.h.transpose();
  g.bt = g_hout.rowwise().sum();

  Eigen::MatrixXd g_h = params.wt.transpose() * g_hout;
  g_h.bottomRows(m) += g_cat.topRows(m);  // tail fed straight into recoupling

  // decouple adjoint: dt_i = dh_i - alpha * dh_{i+1}
  Eigen::MatrixXd g_trend(l, n);
  g_trend.row(l - 1) = g_h.row(l - 1);
  for (Eigen::Index i = l - 2; i >= 0; --i)
    g_trend.row(i) = g_h.row(i) - alpha * g_h.row(i + 1);

  g.input = decompose_backward(g_trend, g_seasonal, cfg.ma_window);
  return g;
}

}  // namespace cats
