#include "cats/classifier.hpp"

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>

namespace cats {

namespace {

constexpr double kBnEps = 1e-5;

std::function<double()> uniform_init(std::mt19937_64& rng, int fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return [&rng, bound]() {
    std::uniform_real_distribution<double> u(-bound, bound);
    return u(rng);
  };
}

}  // namespace

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd p(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    Eigen::ArrayXd e = (logits.col(j).array() - logits.col(j).maxCoeff()).exp();
    p.col(j) = e / e.sum();
  }
  return p;
}

Eigen::MatrixXd softmax_backward(const Eigen::MatrixXd& probs,
                                 const Eigen::MatrixXd& grad_probs) {
  Eigen::MatrixXd g(probs.rows(), probs.cols());
  for (Eigen::Index j = 0; j < probs.cols(); ++j) {
    const double dot = probs.col(j).dot(grad_probs.col(j));
    g.col(j) = probs.col(j).array() * (grad_probs.col(j).array() - dot);
  }
  return g;
}

MlpParams MlpParams::init(int lookback, int hidden, int num_classes,
                          std::uint64_t seed) {
  if (hidden < 1 || num_classes < 1 || lookback < 1)
    throw std::invalid_argument("invalid MLP dimensions");
  std::mt19937_64 rng(seed);
  MlpParams p;
  auto u1 = uniform_init(rng, lookback);
  p.w1.resize(hidden, lookback);
  for (Eigen::Index i = 0; i < p.w1.size(); ++i) p.w1.data()[i] = u1();
  auto u2 = uniform_init(rng, hidden);
  p.w2.resize(num_classes, hidden);
  for (Eigen::Index i = 0; i < p.w2.size(); ++i) p.w2.data()[i] = u2();
  p.b1 = Eigen::VectorXd::Zero(hidden);
  p.b2 = Eigen::VectorXd::Zero(num_classes);
  return p;
}

Eigen::MatrixXd mlp_forward(const Eigen::MatrixXd& x, const MlpParams& p,
                            MlpTape* tape) {
  Eigen::MatrixXd a1 = (p.w1 * x).colwise() + p.b1;
  a1 = a1.array().tanh();
  Eigen::MatrixXd logits = (p.w2 * a1).colwise() + p.b2;
  Eigen::MatrixXd probs = softmax_columns(logits);
  if (tape) {
    tape->x = x;
    tape->a1 = std::move(a1);
    tape->probs = probs;
  }
  return probs;
}

MlpGrads mlp_backward(const MlpParams& p, const MlpTape& tape,
                      const Eigen::MatrixXd& grad_probs) {
  Eigen::MatrixXd g_logits = softmax_backward(tape.probs, grad_probs);
  MlpGrads g;
  g.w2 = g_logits * tape.a1.transpose();
  g.b2 = g_logits.rowwise().sum();
  Eigen::MatrixXd g_a1 = p.w2.transpose() * g_logits;
  Eigen::MatrixXd g_pre1 =
      g_a1.array() * (1.0 - tape.a1.array().square());
  g.w1 = g_pre1 * tape.x.transpose();
  g.b1 = g_pre1.rowwise().sum();
  return g;
}

// ---------------------------------------------------------------------------
// CNN variant (experimental)
// ---------------------------------------------------------------------------

int CnnParams::out_len(int layer) const {
  int len = lookback;
  for (int i = 0; i <= layer; ++i) len = (len + stride - 1) / stride;
  return len;
}

CnnParams CnnParams::init(int lookback, int num_classes, std::uint64_t seed) {
  if (lookback < 4) throw std::invalid_argument("lookback too short for CNN");
  std::mt19937_64 rng(seed);
  CnnParams p;
  p.lookback = lookback;
  int in_ch = 1;
  for (std::size_t i = 0; i < p.channels.size(); ++i) {
    ConvLayerParams layer;
    const int out_ch = p.channels[i];
    auto u = uniform_init(rng, in_ch * p.ksize);
    layer.w.resize(out_ch, in_ch * p.ksize);
    for (Eigen::Index k = 0; k < layer.w.size(); ++k) layer.w.data()[k] = u();
    layer.b = Eigen::VectorXd::Zero(out_ch);
    layer.bn_gamma = Eigen::VectorXd::Ones(out_ch);
    layer.bn_beta = Eigen::VectorXd::Zero(out_ch);
    p.conv.push_back(std::move(layer));
    in_ch = out_ch;
  }
  const int flat = p.channels.back() * p.out_len(2);
  auto u = uniform_init(rng, flat);
  p.fc_w.resize(num_classes, flat);
  for (Eigen::Index k = 0; k < p.fc_w.size(); ++k) p.fc_w.data()[k] = u();
  p.fc_b = Eigen::VectorXd::Zero(num_classes);
  return p;
}

namespace {

struct ConvDims {
  int in_ch, in_len, out_ch, out_len, pad_left;
};

ConvDims conv_dims(const CnnParams& p, int layer) {
  ConvDims d;
  d.in_ch = layer == 0 ? 1 : p.channels[layer - 1];
  d.in_len = layer == 0 ? p.lookback : p.out_len(layer - 1);
  d.out_ch = p.channels[layer];
  d.out_len = p.out_len(layer);
  const int pad_total =
      std::max((d.out_len - 1) * p.stride + p.ksize - d.in_len, 0);
  d.pad_left = pad_total / 2;
  return d;
}

// input/out are (ch * len) x N with row index ch*len + pos
Eigen::MatrixXd conv1d(const Eigen::MatrixXd& input, const ConvLayerParams& lp,
                       const ConvDims& d, int ksize, int stride) {
  const Eigen::Index n = input.cols();
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d.out_ch * d.out_len, n);
  for (int oc = 0; oc < d.out_ch; ++oc) {
    for (int pos = 0; pos < d.out_len; ++pos) {
      Eigen::RowVectorXd acc = Eigen::RowVectorXd::Constant(n, lp.b(oc));
      for (int ic = 0; ic < d.in_ch; ++ic) {
        for (int k = 0; k < ksize; ++k) {
          const int src = pos * stride + k - d.pad_left;
          if (src < 0 || src >= d.in_len) continue;
          acc += lp.w(oc, ic * ksize + k) * input.row(ic * d.in_len + src);
        }
      }
      out.row(oc * d.out_len + pos) = acc;
    }
  }
  return out;
}

}  // namespace

Eigen::MatrixXd cnn_forward(const Eigen::MatrixXd& x, const CnnParams& p,
                            CnnTape* tape) {
  if (x.rows() != p.lookback)
    throw std::invalid_argument("input length does not match CNN lookback");
  const Eigen::Index n = x.cols();
  Eigen::MatrixXd cur = x;
  CnnTape local;
  CnnTape* t = tape ? tape : &local;
  t->layers.assign(p.conv.size(), {});

  for (std::size_t li = 0; li < p.conv.size(); ++li) {
    const ConvDims d = conv_dims(p, static_cast<int>(li));
    CnnLayerTape& lt = t->layers[li];
    lt.input = cur;
    Eigen::MatrixXd pre = conv1d(cur, p.conv[li], d, p.ksize, p.stride);
    lt.pre_bn = pre;

    // batch normalization with batch statistics, per output channel
    lt.bn_mean.resize(d.out_ch);
    lt.bn_istd.resize(d.out_ch);
    lt.xhat.resize(pre.rows(), n);
    Eigen::MatrixXd act(pre.rows(), n);
    for (int c = 0; c < d.out_ch; ++c) {
      auto block = pre.middleRows(c * d.out_len, d.out_len);
      const double mean = block.mean();
      const double var = (block.array() - mean).square().mean();
      const double istd = 1.0 / std::sqrt(var + kBnEps);
      lt.bn_mean(c) = mean;
      lt.bn_istd(c) = istd;
      auto xh = lt.xhat.middleRows(c * d.out_len, d.out_len);
      xh = (block.array() - mean) * istd;
      act.middleRows(c * d.out_len, d.out_len) =
          p.conv[li].bn_gamma(c) * xh.array() + p.conv[li].bn_beta(c);
    }
    lt.relu_mask = (act.array() > 0.0).cast<double>();
    cur = act.array() * lt.relu_mask.array();
  }

  t->flat = cur;
  Eigen::MatrixXd logits = (p.fc_w * cur).colwise() + p.fc_b;
  Eigen::MatrixXd probs = softmax_columns(logits);
  t->probs = probs;
  return probs;
}

CnnGrads cnn_backward(const CnnParams& p, const CnnTape& tape,
                      const Eigen::MatrixXd& grad_probs) {
  const Eigen::Index n = grad_probs.cols();
  CnnGrads g;
  g.conv.resize(p.conv.size());

  Eigen::MatrixXd g_logits = softmax_backward(tape.probs, grad_probs);
  g.fc_w = g_logits * tape.flat.transpose();
  g.fc_b = g_logits.rowwise().sum();
  Eigen::MatrixXd g_cur = p.fc_w.transpose() * g_logits;

  for (int li = static_cast<int>(p.conv.size()) - 1; li >= 0; --li) {
    const ConvDims d = conv_dims(p, li);
    const CnnLayerTape& lt = tape.layers[li];
    ConvLayerParams& gl = g.conv[li];
    gl.w = Eigen::MatrixXd::Zero(d.out_ch, d.in_ch * p.ksize);
    gl.b = Eigen::VectorXd::Zero(d.out_ch);
    gl.bn_gamma = Eigen::VectorXd::Zero(d.out_ch);
    gl.bn_beta = Eigen::VectorXd::Zero(d.out_ch);

    // ReLU
    Eigen::MatrixXd g_act = g_cur.array() * lt.relu_mask.array();

    // batch norm
    Eigen::MatrixXd g_pre(g_act.rows(), n);
    const double count = static_cast<double>(d.out_len) * n;
    for (int c = 0; c < d.out_ch; ++c) {
      auto gy = g_act.middleRows(c * d.out_len, d.out_len);
      auto xh = lt.xhat.middleRows(c * d.out_len, d.out_len);
      gl.bn_gamma(c) = (gy.array() * xh.array()).sum();
      gl.bn_beta(c) = gy.sum();
      const double mean_gy = gy.sum() / count;
      const double mean_gyxh = gl.bn_gamma(c) / count;
      g_pre.middleRows(c * d.out_len, d.out_len) =
          p.conv[li].bn_gamma(c) * lt.bn_istd(c) *
          (gy.array() - mean_gy - xh.array() * mean_gyxh);
    }

    // conv
    Eigen::MatrixXd g_in = Eigen::MatrixXd::Zero(d.in_ch * d.in_len, n);
    for (int oc = 0; oc < d.out_ch; ++oc) {
      for (int pos = 0; pos < d.out_len; ++pos) {
        const auto gout = g_pre.row(oc * d.out_len + pos);
        gl.b(oc) += gout.sum();
        for (int ic = 0; ic < d.in_ch; ++ic) {
          for (int k = 0; k < p.ksize; ++k) {
            const int src = pos * p.stride + k - d.pad_left;
            if (src < 0 || src >= d.in_len) continue;
            gl.w(oc, ic * p.ksize + k) +=
                gout.dot(lt.input.row(ic * d.in_len + src));
            g_in.row(ic * d.in_len + src) +=
                p.conv[li].w(oc, ic * p.ksize + k) * gout;
          }
        }
      }
    }
    g_cur = std::move(g_in);
  }
  return g;
}

}  // namespace cats
