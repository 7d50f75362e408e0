#include "cats/checkpoint.hpp"

#include <cstdio>
#include <fstream>

#include "doctest.h"

using namespace cats;

namespace {

struct TempFile {
  std::string path;
  TempFile() { path = std::string(std::tmpnam(nullptr)) + ".ckpt"; }
  ~TempFile() { std::remove(path.c_str()); }
};

TrainConfig tiny_cfg(ClassifierVariant variant) {
  TrainConfig cfg;
  cfg.num_classes = 3;
  cfg.lookback = 32;
  cfg.horizon = 8;
  cfg.period = 8;
  cfg.hidden_size = 12;
  cfg.classifier = variant;
  cfg.seed = 99;
  return cfg;
}

void check_equal(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  for (Eigen::Index i = 0; i < a.size(); ++i)
    CHECK(a.data()[i] == b.data()[i]);  // bit-exact
}

}  // namespace

TEST_CASE("checkpoint: MLP model round-trips bit-exactly") {
  auto model = CatsLinearModel::init(tiny_cfg(ClassifierVariant::kMlp), 2);
  TempFile f;
  save_checkpoint(model, f.path);
  auto back = load_checkpoint(f.path);

  CHECK(back.variant == ClassifierVariant::kMlp);
  CHECK(back.cfg.num_classes == 3);
  CHECK(back.cfg.lookback == 32);
  CHECK(back.cfg.horizon == 8);
  CHECK(back.cfg.period == 8);
  CHECK(back.cfg.smoothing_alpha == model.cfg.smoothing_alpha);
  REQUIRE(back.predictors.size() == 3);
  for (int k = 0; k < 3; ++k) {
    check_equal(back.predictors[k].ws_re, model.predictors[k].ws_re);
    check_equal(back.predictors[k].ws_im, model.predictors[k].ws_im);
    check_equal(back.predictors[k].bs_re, model.predictors[k].bs_re);
    check_equal(back.predictors[k].bs_im, model.predictors[k].bs_im);
    check_equal(back.predictors[k].wt, model.predictors[k].wt);
    check_equal(back.predictors[k].bt, model.predictors[k].bt);
  }
  check_equal(back.mlp.w1, model.mlp.w1);
  check_equal(back.mlp.b1, model.mlp.b1);
  check_equal(back.mlp.w2, model.mlp.w2);
  check_equal(back.mlp.b2, model.mlp.b2);
  CHECK(back.affine.enabled == model.affine.enabled);
  check_equal(back.affine.alpha, model.affine.alpha);
  check_equal(back.affine.beta, model.affine.beta);
}

TEST_CASE("checkpoint: CNN model round-trips bit-exactly") {
  auto cfg = tiny_cfg(ClassifierVariant::kCnn);
  auto model = CatsLinearModel::init(cfg, 1);
  TempFile f;
  save_checkpoint(model, f.path);
  auto back = load_checkpoint(f.path);

  CHECK(back.variant == ClassifierVariant::kCnn);
  REQUIRE(back.cnn.conv.size() == model.cnn.conv.size());
  for (std::size_t i = 0; i < model.cnn.conv.size(); ++i) {
    check_equal(back.cnn.conv[i].w, model.cnn.conv[i].w);
    check_equal(back.cnn.conv[i].b, model.cnn.conv[i].b);
    check_equal(back.cnn.conv[i].bn_gamma, model.cnn.conv[i].bn_gamma);
    check_equal(back.cnn.conv[i].bn_beta, model.cnn.conv[i].bn_beta);
  }
  check_equal(back.cnn.fc_w, model.cnn.fc_w);
  check_equal(back.cnn.fc_b, model.cnn.fc_b);
}

TEST_CASE("checkpoint: loaded model predicts identically") {
  auto model = CatsLinearModel::init(tiny_cfg(ClassifierVariant::kMlp), 2);
  TempFile f;
  save_checkpoint(model, f.path);
  auto back = load_checkpoint(f.path);

  Eigen::MatrixXd x(32, 2);
  for (int i = 0; i < 32; ++i) {
    x(i, 0) = std::sin(i * 0.3) + 0.01 * i;
    x(i, 1) = std::cos(i * 0.5);
  }
  std::vector<int> feature = {0, 1};
  auto p1 = predict_weighted(model, x, feature);
  auto p2 = predict_weighted(back, x, feature);
  check_equal(p1, p2);
}

TEST_CASE("checkpoint: bad magic and missing file rejected") {
  CHECK_THROWS(load_checkpoint("/nonexistent/model.ckpt"));
  TempFile f;
  std::ofstream(f.path, std::ios::binary) << "NOTAMODELXXXXXXXXXXX";
  CHECK_THROWS(load_checkpoint(f.path));
}

TEST_CASE("describe_checkpoint mentions the shapes and constants") {
  auto model = CatsLinearModel::init(tiny_cfg(ClassifierVariant::kMlp), 2);
  auto text = describe_checkpoint(model);
  CHECK(text.find("32") != std::string::npos);   // lookback
  CHECK(text.find("8") != std::string::npos);    // horizon
  CHECK(text.find("mlp") != std::string::npos);
}
