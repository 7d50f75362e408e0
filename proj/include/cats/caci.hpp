#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "cats/classifier.hpp"
#include "cats/dataset.hpp"
#include "cats/revin.hpp"
#include "cats/tslinear.hpp"

namespace cats {

/// Hard one-hot labels C and classifier probabilities C_hat for a batch of
/// instances, plus the per-class instance index sets.
struct ClassAssignment {
  Eigen::MatrixXd labels;  // K x P one-hot columns
  std::vector<std::vector<Eigen::Index>> members;  // instance indices per class
};

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moment accumulators for one parameter tensor.
struct AdamState {
  Eigen::MatrixXd m, v;
  long step = 0;
};

/// Standard Adam step with bias correction. Accumulators are allocated lazily
/// to match the parameter shape.
void adam_update(Eigen::Ref<Eigen::MatrixXd> param, const Eigen::MatrixXd& grad,
                 AdamState& state, const AdamHyper& hyper);
void adam_update(Eigen::VectorXd& param, const Eigen::VectorXd& grad,
                 AdamState& state, const AdamHyper& hyper);

struct TrainConfig {
  int num_classes = 10;  // K
  int lookback = 336;
  int horizon = 96;
  int batch_windows = 128;  // B
  int period = 24;
  int ma_window = 25;
  double smoothing_alpha = 0.5;
  int recouple_m = 10;
  int hidden_size = 64;
  ClassifierVariant classifier = ClassifierVariant::kMlp;
  bool affine = true;
  double lr_predictor = 1e-4;
  double lr_classifier = 1e-5;
  int max_epochs = 30;
  int patience = 5;
  std::uint64_t seed = 0;
  bool classifier_cross_entropy = false;  // ablation flag; MSE by default
};

/// The full model: K predictors, one classifier, one shared affine block.
struct CatsLinearModel {
  std::vector<TSLinearParams> predictors;
  MlpParams mlp;
  CnnParams cnn;
  ClassifierVariant variant = ClassifierVariant::kMlp;
  AffineParams affine;
  TrainConfig cfg;

  static CatsLinearModel init(const TrainConfig& cfg, Eigen::Index features);
};

/// Equal class sizes floor(B*D/K) with the remainder spread over the leading
/// classes.
std::vector<Eigen::Index> class_size_schedule(Eigen::Index pool, int num_classes);

/// Sequential greedy label assignment: each predictor in turn claims the N_k
/// remaining instances it forecasts best (per-instance MSE on denormalized
/// predictions). No gradient flows through this selection.
ClassAssignment assign_labels(const Eigen::MatrixXd& x_norm,
                              const Eigen::MatrixXd& y_true,
                              const CatsLinearModel& model,
                              const InstanceStats& stats,
                              const std::vector<int>& feature);

/// Optimizer state for the whole model.
struct TrainerState {
  struct PredictorSlots {
    AdamState ws_re, ws_im, bs_re, bs_im, wt, bt;
  };
  std::vector<PredictorSlots> predictors;
  AdamState mlp_w1, mlp_b1, mlp_w2, mlp_b2;
  std::vector<AdamState> cnn_w, cnn_b, cnn_gamma, cnn_beta;
  AdamState cnn_fc_w, cnn_fc_b;
  AdamState affine_alpha, affine_beta;
};

struct StepLosses {
  double forecast = 0.0;  // MSE(Y, Y_hat) on denormalized predictions
  double classify = 0.0;  // MSE(C, C_hat)
};

/// One pass of the supervised training schema over a batch: normalize,
/// classify, assign labels, per-class predictor updates, classifier update.
StepLosses train_step(CatsLinearModel& model, const WindowBatch& batch,
                      TrainerState& state);

/// Probability-weighted inference in the normalized domain, denormalized once.
Eigen::MatrixXd predict_weighted(const CatsLinearModel& model,
                                 const Eigen::MatrixXd& x,
                                 const std::vector<int>& feature);

struct EvalResult {
  double mse = 0.0;
  double mae = 0.0;
};

/// Metrics over every (instance, horizon step) pair of a split.
EvalResult evaluate(const CatsLinearModel& model, const SeriesDataset& ds,
                    IndexRange range);

struct EpochRecord {
  int epoch = 0;
  double train_loss_f = 0.0;
  double train_loss_c = 0.0;
  double val_mse = 0.0;
  double val_mae = 0.0;
  double wall_seconds = 0.0;
};

struct TrainResult {
  CatsLinearModel best;  // best-validation checkpoint
  std::vector<EpochRecord> log;
  int best_epoch = -1;
};

/// Epoch loop with shuffled batches, per-epoch validation, and early stopping.
TrainResult train_loop(const TrainConfig& cfg, const SeriesDataset& ds,
                       const SplitRanges& splits);

/// One metric-log line: tab-separated key=value pairs.
std::string format_epoch_record(const EpochRecord& rec);

}  // namespace cats
