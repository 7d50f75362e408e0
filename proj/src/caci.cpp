#include "cats/caci.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace cats {

void adam_update(Eigen::Ref<Eigen::MatrixXd> param, const Eigen::MatrixXd& grad,
                 AdamState& state, const AdamHyper& hyper) {
  if (state.m.size() == 0) {
    state.m = Eigen::MatrixXd::Zero(param.rows(), param.cols());
    state.v = Eigen::MatrixXd::Zero(param.rows(), param.cols());
  }
  if (grad.rows() != param.rows() || grad.cols() != param.cols())
    throw std::invalid_argument("adam: gradient shape mismatch");
  ++state.step;
  state.m = hyper.beta1 * state.m + (1.0 - hyper.beta1) * grad;
  state.v =
      hyper.beta2 * state.v.array() + (1.0 - hyper.beta2) * grad.array().square();
  const double bc1 = 1.0 - std::pow(hyper.beta1, state.step);
  const double bc2 = 1.0 - std::pow(hyper.beta2, state.step);
  param.array() -= hyper.lr * (state.m.array() / bc1) /
                   ((state.v.array() / bc2).sqrt() + hyper.eps);
}

void adam_update(Eigen::VectorXd& param, const Eigen::VectorXd& grad,
                 AdamState& state, const AdamHyper& hyper) {
  Eigen::MatrixXd p = param, g = grad;
  adam_update(Eigen::Ref<Eigen::MatrixXd>(p), g, state, hyper);
  param = p;
}

std::vector<Eigen::Index> class_size_schedule(Eigen::Index pool, int num_classes) {
  if (num_classes < 1) throw std::invalid_argument("K must be >= 1");
  if (pool < num_classes)
    throw std::invalid_argument("pool smaller than class count");
  std::vector<Eigen::Index> sizes(num_classes, pool / num_classes);
  const Eigen::Index rem = pool % num_classes;
  for (Eigen::Index i = 0; i < rem; ++i) ++sizes[i];
  return sizes;
}

CatsLinearModel CatsLinearModel::init(const TrainConfig& cfg,
                                      Eigen::Index features) {
  if (cfg.num_classes < 1) throw std::invalid_argument("K must be >= 1");
  CatsLinearModel model;
  model.cfg = cfg;
  TSLinearConfig tcfg;
  tcfg.lookback = cfg.lookback;
  tcfg.horizon = cfg.horizon;
  tcfg.period = cfg.period;
  tcfg.ma_window = cfg.ma_window;
  tcfg.alpha = cfg.smoothing_alpha;
  tcfg.recouple_m = cfg.recouple_m;
  for (int k = 0; k < cfg.num_classes; ++k)
    model.predictors.push_back(
        TSLinearParams::init(tcfg, cfg.seed * 7919 + 101 + k));
  model.variant = cfg.classifier;
  if (cfg.classifier == ClassifierVariant::kMlp)
    model.mlp = MlpParams::init(cfg.lookback, cfg.hidden_size, cfg.num_classes,
                                cfg.seed * 7919 + 7);
  else
    model.cnn = CnnParams::init(cfg.lookback, cfg.num_classes,
                                cfg.seed * 7919 + 7);
  model.affine = AffineParams::identity(features, cfg.affine);
  return model;
}

namespace {

Eigen::MatrixXd gather_cols(const Eigen::MatrixXd& m,
                            const std::vector<Eigen::Index>& idx) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(j) = m.col(idx[j]);
  return out;
}

InstanceStats gather_stats(const InstanceStats& s,
                           const std::vector<Eigen::Index>& idx) {
  InstanceStats out;
  out.mean.resize(static_cast<Eigen::Index>(idx.size()));
  out.std.resize(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) {
    out.mean(j) = s.mean(idx[j]);
    out.std(j) = s.std(idx[j]);
  }
  return out;
}

std::vector<int> gather_feature(const std::vector<int>& f,
                                const std::vector<Eigen::Index>& idx) {
  if (f.empty()) return {};
  std::vector<int> out(idx.size());
  for (std::size_t j = 0; j < idx.size(); ++j) out[j] = f[idx[j]];
  return out;
}

Eigen::MatrixXd classifier_forward(const CatsLinearModel& model,
                                   const Eigen::MatrixXd& x, MlpTape* mlp_tape,
                                   CnnTape* cnn_tape) {
  if (model.variant == ClassifierVariant::kMlp)
    return mlp_forward(x, model.mlp, mlp_tape);
  return cnn_forward(x, model.cnn, cnn_tape);
}

}  // namespace

ClassAssignment assign_labels(const Eigen::MatrixXd& x_norm,
                              const Eigen::MatrixXd& y_true,
                              const CatsLinearModel& model,
                              const InstanceStats& stats,
                              const std::vector<int>& feature) {
  const Eigen::Index pool_size = x_norm.cols();
  const int num_classes = static_cast<int>(model.predictors.size());
  const auto sizes = class_size_schedule(pool_size, num_classes);

  std::vector<Eigen::Index> pool(pool_size);
  std::iota(pool.begin(), pool.end(), 0);

  ClassAssignment out;
  out.labels = Eigen::MatrixXd::Zero(num_classes, pool_size);
  out.members.resize(num_classes);

  for (int k = 0; k < num_classes; ++k) {
    if (static_cast<Eigen::Index>(pool.size()) < sizes[k])
      throw std::runtime_error("label pool exhausted before class " +
                               std::to_string(k));
    Eigen::MatrixXd xp = gather_cols(x_norm, pool);
    InstanceStats sp = gather_stats(stats, pool);
    std::vector<int> fp = gather_feature(feature, pool);

    Eigen::MatrixXd pred = tslinear_forward(xp, model.predictors[k]);
    Eigen::MatrixXd pred_dn = revin_denorm(pred, sp, model.affine, fp);

    std::vector<std::pair<double, Eigen::Index>> ranked(pool.size());
    for (std::size_t j = 0; j < pool.size(); ++j) {
      const double err =
          (pred_dn.col(j) - y_true.col(pool[j])).squaredNorm() / pred_dn.rows();
      ranked[j] = {err, pool[j]};
    }
    // stable (error, instance index) order keeps runs reproducible
    std::sort(ranked.begin(), ranked.end());

    std::vector<Eigen::Index> claimed;
    for (Eigen::Index j = 0; j < sizes[k]; ++j)
      claimed.push_back(ranked[j].second);
    std::sort(claimed.begin(), claimed.end());
    for (Eigen::Index idx : claimed) out.labels(k, idx) = 1.0;
    out.members[k] = claimed;

    std::vector<Eigen::Index> remaining;
    std::set_difference(pool.begin(), pool.end(), claimed.begin(),
                        claimed.end(), std::back_inserter(remaining));
    pool = std::move(remaining);
  }
  return out;
}

StepLosses train_step(CatsLinearModel& model, const WindowBatch& batch,
                      TrainerState& state) {
  const Eigen::Index pool = batch.instances();
  const int num_classes = static_cast<int>(model.predictors.size());
  if (pool < num_classes)
    throw std::invalid_argument("batch has fewer instances than classes");
  if (state.predictors.size() != model.predictors.size())
    state.predictors.resize(model.predictors.size());

  const AdamHyper pred_hyper{model.cfg.lr_predictor};
  const AdamHyper cls_hyper{model.cfg.lr_classifier};

  InstanceStats stats;
  Eigen::MatrixXd x_norm =
      revin_norm(batch.X, model.affine, batch.feature, stats);

  MlpTape mlp_tape;
  CnnTape cnn_tape;
  Eigen::MatrixXd probs =
      classifier_forward(model, x_norm, &mlp_tape, &cnn_tape);

  ClassAssignment assignment =
      assign_labels(x_norm, batch.Y, model, stats, batch.feature);

  AffineGrads affine_grads;
  if (model.affine.enabled) {
    affine_grads.alpha = Eigen::VectorXd::Zero(model.affine.alpha.size());
    affine_grads.beta = Eigen::VectorXd::Zero(model.affine.beta.size());
  }

  StepLosses losses;
  const double denom = static_cast<double>(pool) * model.cfg.horizon;

  for (int k = 0; k < num_classes; ++k) {
    const auto& idx = assignment.members[k];
    if (idx.empty()) continue;
    Eigen::MatrixXd xk = gather_cols(x_norm, idx);
    Eigen::MatrixXd yk = gather_cols(batch.Y, idx);
    InstanceStats sk = gather_stats(stats, idx);
    std::vector<int> fk = gather_feature(batch.feature, idx);

    TSLinearTape tape;
    Eigen::MatrixXd v = tslinear_forward(xk, model.predictors[k], &tape);
    Eigen::MatrixXd y_hat = revin_denorm(v, sk, model.affine, fk);
    Eigen::MatrixXd resid = y_hat - yk;
    losses.forecast += resid.squaredNorm();
    if (!std::isfinite(losses.forecast))
      throw std::runtime_error("non-finite forecast loss at class " +
                               std::to_string(k));

    Eigen::MatrixXd grad_y = (2.0 / denom) * resid;
    Eigen::MatrixXd grad_v = revin_denorm_backward(
        grad_y, v, sk, model.affine, fk,
        model.affine.enabled ? &affine_grads : nullptr);
    TSLinearGrads g = tslinear_backward(model.predictors[k], tape, grad_v);
    revin_norm_backward(g.input, xk, model.affine, fk,
                        model.affine.enabled ? &affine_grads : nullptr);

    auto& st = state.predictors[k];
    auto& p = model.predictors[k];
    adam_update(p.ws_re, g.ws_re, st.ws_re, pred_hyper);
    adam_update(p.ws_im, g.ws_im, st.ws_im, pred_hyper);
    adam_update(p.bs_re, g.bs_re, st.bs_re, pred_hyper);
    adam_update(p.bs_im, g.bs_im, st.bs_im, pred_hyper);
    adam_update(p.wt, g.wt, st.wt, pred_hyper);
    adam_update(p.bt, g.bt, st.bt, pred_hyper);
  }
  losses.forecast /= denom;

  // classifier loss on its own parameters only
  const Eigen::MatrixXd& labels = assignment.labels;
  Eigen::MatrixXd grad_probs;
  if (model.cfg.classifier_cross_entropy) {
    double ll = 0.0;
    grad_probs = Eigen::MatrixXd::Zero(probs.rows(), probs.cols());
    for (Eigen::Index j = 0; j < probs.cols(); ++j)
      for (Eigen::Index k = 0; k < probs.rows(); ++k)
        if (labels(k, j) > 0.5) {
          ll -= std::log(std::max(probs(k, j), 1e-300));
          grad_probs(k, j) = -1.0 / (std::max(probs(k, j), 1e-300) * pool);
        }
    losses.classify = ll / pool;
  } else {
    Eigen::MatrixXd diff = probs - labels;
    losses.classify = diff.squaredNorm() / static_cast<double>(diff.size());
    grad_probs = (2.0 / static_cast<double>(diff.size())) * diff;
  }
  if (!std::isfinite(losses.classify))
    throw std::runtime_error("non-finite classifier loss");

  if (model.variant == ClassifierVariant::kMlp) {
    MlpGrads g = mlp_backward(model.mlp, mlp_tape, grad_probs);
    adam_update(model.mlp.w1, g.w1, state.mlp_w1, cls_hyper);
    adam_update(model.mlp.b1, g.b1, state.mlp_b1, cls_hyper);
    adam_update(model.mlp.w2, g.w2, state.mlp_w2, cls_hyper);
    adam_update(model.mlp.b2, g.b2, state.mlp_b2, cls_hyper);
  } else {
    CnnGrads g = cnn_backward(model.cnn, cnn_tape, grad_probs);
    const std::size_t layers = model.cnn.conv.size();
    state.cnn_w.resize(layers);
    state.cnn_b.resize(layers);
    state.cnn_gamma.resize(layers);
    state.cnn_beta.resize(layers);
    for (std::size_t i = 0; i < layers; ++i) {
      adam_update(model.cnn.conv[i].w, g.conv[i].w, state.cnn_w[i], cls_hyper);
      adam_update(model.cnn.conv[i].b, g.conv[i].b, state.cnn_b[i], cls_hyper);
      adam_update(model.cnn.conv[i].bn_gamma, g.conv[i].bn_gamma,
                  state.cnn_gamma[i], cls_hyper);
      adam_update(model.cnn.conv[i].bn_beta, g.conv[i].bn_beta,
                  state.cnn_beta[i], cls_hyper);
    }
    adam_update(model.cnn.fc_w, g.fc_w, state.cnn_fc_w, cls_hyper);
    adam_update(model.cnn.fc_b, g.fc_b, state.cnn_fc_b, cls_hyper);
  }

  if (model.affine.enabled) {
    adam_update(model.affine.alpha, affine_grads.alpha, state.affine_alpha,
                pred_hyper);
    adam_update(model.affine.beta, affine_grads.beta, state.affine_beta,
                pred_hyper);
  }
  return losses;
}

Eigen::MatrixXd predict_weighted(const CatsLinearModel& model,
                                 const Eigen::MatrixXd& x,
                                 const std::vector<int>& feature) {
  InstanceStats stats;
  Eigen::MatrixXd x_norm = revin_norm(x, model.affine, feature, stats);
  Eigen::MatrixXd probs = classifier_forward(model, x_norm, nullptr, nullptr);

  Eigen::MatrixXd out =
      Eigen::MatrixXd::Zero(model.cfg.horizon, x.cols());
  for (std::size_t k = 0; k < model.predictors.size(); ++k) {
    Eigen::MatrixXd pred = tslinear_forward(x_norm, model.predictors[k]);
    out.array() += pred.array().rowwise() *
                   probs.row(static_cast<Eigen::Index>(k)).array();
  }
  return revin_denorm(out, stats, model.affine, feature);
}

EvalResult evaluate(const CatsLinearModel& model, const SeriesDataset& ds,
                    IndexRange range) {
  auto offsets =
      make_windows(range.size(), model.cfg.lookback, model.cfg.horizon);
  if (offsets.empty()) throw std::runtime_error("evaluation split is empty");
  BatchStream stream(ds, range, offsets, model.cfg.lookback, model.cfg.horizon,
                     model.cfg.batch_windows, /*shuffle=*/false, /*seed=*/0);
  double se = 0.0, ae = 0.0;
  long count = 0;
  WindowBatch batch;
  while (stream.next(batch)) {
    Eigen::MatrixXd pred = predict_weighted(model, batch.X, batch.feature);
    Eigen::MatrixXd err = pred - batch.Y;
    se += err.squaredNorm();
    ae += err.array().abs().sum();
    count += err.size();
  }
  return {se / count, ae / count};
}

std::string format_epoch_record(const EpochRecord& rec) {
  std::ostringstream os;
  os.precision(12);
  os << "epoch=" << rec.epoch << "\ttrain_lf=" << rec.train_loss_f
     << "\ttrain_lc=" << rec.train_loss_c << "\tval_mse=" << rec.val_mse
     << "\tval_mae=" << rec.val_mae << "\twall_s=" << rec.wall_seconds;
  return os.str();
}

TrainResult train_loop(const TrainConfig& cfg, const SeriesDataset& ds,
                       const SplitRanges& splits) {
  CatsLinearModel model = CatsLinearModel::init(cfg, ds.features());
  TrainerState state;
  TrainResult result;
  result.best = model;

  auto offsets = make_windows(splits.train.size(), cfg.lookback, cfg.horizon);
  if (offsets.empty()) throw std::runtime_error("training split is empty");

  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    BatchStream stream(ds, splits.train, offsets, cfg.lookback, cfg.horizon,
                       cfg.batch_windows, /*shuffle=*/true,
                       cfg.seed * 1000003ULL + static_cast<std::uint64_t>(epoch));
    double lf = 0.0, lc = 0.0;
    long instances = 0;
    WindowBatch batch;
    while (stream.next(batch)) {
      StepLosses losses = train_step(model, batch, state);
      lf += losses.forecast * batch.instances();
      lc += losses.classify * batch.instances();
      instances += batch.instances();
    }

    EvalResult val = evaluate(model, ds, splits.val);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss_f = lf / instances;
    rec.train_loss_c = lc / instances;
    rec.val_mse = val.mse;
    rec.val_mae = val.mae;
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    result.log.push_back(rec);

    if (val.mse < best_val) {
      best_val = val.mse;
      result.best = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  return result;
}

}  // namespace cats
