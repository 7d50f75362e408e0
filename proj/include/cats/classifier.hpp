#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace cats {

enum class ClassifierVariant { kMlp, kCnn };

/// Two-layer MLP head: softmax(W2 * tanh(W1 * x + b1) + b2).
struct MlpParams {
  Eigen::MatrixXd w1;  // hidden x L
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // K x hidden
  Eigen::VectorXd b2;

  static MlpParams init(int lookback, int hidden, int num_classes,
                        std::uint64_t seed);
};

struct MlpTape {
  Eigen::MatrixXd x;      // L x N input
  Eigen::MatrixXd a1;     // tanh activations, hidden x N
  Eigen::MatrixXd probs;  // K x N
};

/// Columns are instances; returns K x N probabilities.
Eigen::MatrixXd mlp_forward(const Eigen::MatrixXd& x, const MlpParams& p,
                            MlpTape* tape = nullptr);

struct MlpGrads {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;
};

MlpGrads mlp_backward(const MlpParams& p, const MlpTape& tape,
                      const Eigen::MatrixXd& grad_probs);

/// Experimental 1-D convolutional variant: three conv layers (stride 2, same
/// padding) with batch normalization (batch statistics) and ReLU, then a fully
/// connected layer and softmax.
struct ConvLayerParams {
  Eigen::MatrixXd w;   // out_ch x (in_ch * ksize)
  Eigen::VectorXd b;   // out_ch
  Eigen::VectorXd bn_gamma, bn_beta;  // out_ch
};

struct CnnParams {
  std::vector<ConvLayerParams> conv;  // 3 layers
  Eigen::MatrixXd fc_w;               // K x flat
  Eigen::VectorXd fc_b;
  int lookback = 0;
  int ksize = 5;
  int stride = 2;
  std::vector<int> channels = {16, 32, 32};

  static CnnParams init(int lookback, int num_classes, std::uint64_t seed);
  int out_len(int layer) const;  // spatial length after `layer+1` conv layers
};

struct CnnLayerTape {
  Eigen::MatrixXd input;   // (in_ch * in_len) x N
  Eigen::MatrixXd pre_bn;  // (out_ch * out_len) x N
  Eigen::MatrixXd xhat;    // normalized pre-activation
  Eigen::VectorXd bn_mean, bn_istd;  // per channel
  Eigen::MatrixXd relu_mask;
};

struct CnnTape {
  std::vector<CnnLayerTape> layers;
  Eigen::MatrixXd flat;   // flattened features
  Eigen::MatrixXd probs;  // K x N
};

Eigen::MatrixXd cnn_forward(const Eigen::MatrixXd& x, const CnnParams& p,
                            CnnTape* tape = nullptr);

struct CnnGrads {
  std::vector<ConvLayerParams> conv;  // same shapes as params
  Eigen::MatrixXd fc_w;
  Eigen::VectorXd fc_b;
};

CnnGrads cnn_backward(const CnnParams& p, const CnnTape& tape,
                      const Eigen::MatrixXd& grad_probs);

/// Column-wise softmax with max-shift.
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits);

/// Backward through a column-wise softmax given probs and dL/dprobs.
Eigen::MatrixXd softmax_backward(const Eigen::MatrixXd& probs,
                                 const Eigen::MatrixXd& grad_probs);

}  // namespace cats
