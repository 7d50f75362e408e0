#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace cats {

/// Seasonal and trend parts of an input window; trend + seasonal == input.
struct DecomposedSeries {
  Eigen::MatrixXd trend;     // L x N
  Eigen::MatrixXd seasonal;  // L x N
};

/// Real/imaginary pair standing in for a complex matrix.
struct ComplexMat {
  Eigen::MatrixXd re, im;
};

struct TSLinearConfig {
  int lookback = 336;
  int horizon = 96;
  int period = 24;      // T in the phase w = 2*pi/T
  int ma_window = 25;   // decomposition moving-average width, odd
  double alpha = 0.5;   // smoothing constant for the trend states
  int recouple_m = 10;  // recoupling kernel length minus 1
  bool seasonal_bias = true;

  void validate() const;
};

/// One predictor's trainable state: complex seasonal map (stored as paired
/// real matrices), real trend state map, and the fixed constants.
struct TSLinearParams {
  TSLinearConfig cfg;
  Eigen::MatrixXd ws_re, ws_im;  // H x L
  Eigen::VectorXd bs_re, bs_im;  // H
  Eigen::MatrixXd wt;            // H x L
  Eigen::VectorXd bt;            // H

  static TSLinearParams init(const TSLinearConfig& cfg, std::uint64_t seed);
};

/// Intermediates retained by the forward pass for the backward pass.
struct TSLinearTape {
  ComplexMat z;      // seasonal in complex form, L x N
  Eigen::MatrixXd h; // decoupled trend states, L x N
  ComplexMat zy;     // complex-domain prediction, H x N
};

struct TSLinearGrads {
  Eigen::MatrixXd ws_re, ws_im;
  Eigen::VectorXd bs_re, bs_im;
  Eigen::MatrixXd wt;
  Eigen::VectorXd bt;
  Eigen::MatrixXd input;  // L x N, gradient toward the normalized input
};

struct NonFiniteError : std::runtime_error {
  explicit NonFiniteError(const std::string& stage)
      : std::runtime_error("non-finite values after stage: " + stage) {}
};

/// Centered moving average with edge replication padding; seasonal = x - trend.
DecomposedSeries decompose(const Eigen::MatrixXd& x, int ma_window);

/// Adjoint of the decomposition: maps (grad_trend, grad_seasonal) back to the
/// input gradient.
Eigen::MatrixXd decompose_backward(const Eigen::MatrixXd& grad_trend,
                                   const Eigen::MatrixXd& grad_seasonal,
                                   int ma_window);

/// z_p = s_p * e^{j*w*p}, w = 2*pi/T, p one-based down the column.
ComplexMat seasonal_to_complex(const Eigen::MatrixXd& s, int period);

/// zy = Ws * z + bias with Ws = A + jB.
ComplexMat complex_linear(const ComplexMat& z, const Eigen::MatrixXd& ws_re,
                          const Eigen::MatrixXd& ws_im,
                          const Eigen::VectorXd& bs_re,
                          const Eigen::VectorXd& bs_im);

/// s_q = delta * |zy_q| with delta = sign of Re(zy_q * e^{-j*w*(q+L)}); the
/// phase reference continues the input index line.
Eigen::MatrixXd complex_to_real(const ComplexMat& zy, int period, int lookback);

/// h_1 = t_1; h_i = t_i - alpha * t_{i-1}.
Eigen::MatrixXd trend_decouple(const Eigen::MatrixXd& t, double alpha);

/// Convolve [h_in_tail ; h_out] with the geometric kernel
/// [alpha^m, ..., alpha, 1] in valid mode; output has h_out's length.
Eigen::MatrixXd trend_recouple(const Eigen::MatrixXd& h_out,
                               const Eigen::MatrixXd& h_in_tail, double alpha,
                               int m);

/// Full predictor: seasonal path (complex linear on z) plus trend path
/// (decouple - linear map - recouple). Columns are independent instances.
Eigen::MatrixXd tslinear_forward(const Eigen::MatrixXd& x_norm,
                                 const TSLinearParams& params,
                                 TSLinearTape* tape = nullptr);

/// Exact reverse-mode gradients; the sign delta in the seasonal reversion is
/// treated as locally constant (gradient flows through the modulus only).
TSLinearGrads tslinear_backward(const TSLinearParams& params,
                                const TSLinearTape& tape,
                                const Eigen::MatrixXd& grad_y);

}  // namespace cats
