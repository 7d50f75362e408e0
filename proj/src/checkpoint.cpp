#include "cats/checkpoint.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cats {

namespace {

constexpr char kMagic[8] = {'C', 'A', 'T', 'S', 'L', 'N', 'R', '1'};

void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_f64(std::ostream& os, double v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
double read_f64(std::istream& is) {
  double v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_mat(std::ostream& os, const Eigen::MatrixXd& m) {
  write_u64(os, static_cast<std::uint64_t>(m.rows()));
  write_u64(os, static_cast<std::uint64_t>(m.cols()));
  os.write(reinterpret_cast<const char*>(m.data()),
           static_cast<std::streamsize>(m.size() * sizeof(double)));
}

Eigen::MatrixXd read_mat(std::istream& is) {
  const auto rows = static_cast<Eigen::Index>(read_u64(is));
  const auto cols = static_cast<Eigen::Index>(read_u64(is));
  if (!is || rows < 0 || cols < 0 || rows > (1 << 24) || cols > (1 << 24))
    throw std::runtime_error("corrupt checkpoint tensor header");
  Eigen::MatrixXd m(rows, cols);
  is.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(m.size() * sizeof(double)));
  if (!is) throw std::runtime_error("truncated checkpoint tensor");
  return m;
}

void write_vec(std::ostream& os, const Eigen::VectorXd& v) {
  write_mat(os, v);
}
Eigen::VectorXd read_vec(std::istream& is) {
  Eigen::MatrixXd m = read_mat(is);
  return Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(m.data(), m.size()));
}

}  // namespace

void save_checkpoint(const CatsLinearModel& model, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
  os.write(kMagic, sizeof(kMagic));

  const auto& c = model.cfg;
  write_u64(os, static_cast<std::uint64_t>(model.predictors.size()));
  write_u64(os, static_cast<std::uint64_t>(model.affine.alpha.size()));
  write_u64(os, static_cast<std::uint64_t>(c.lookback));
  write_u64(os, static_cast<std::uint64_t>(c.horizon));
  write_u64(os, static_cast<std::uint64_t>(c.period));
  write_u64(os, static_cast<std::uint64_t>(c.ma_window));
  write_u64(os, static_cast<std::uint64_t>(c.recouple_m));
  write_u64(os, static_cast<std::uint64_t>(c.hidden_size));
  write_u64(os, model.variant == ClassifierVariant::kCnn ? 1 : 0);
  write_u64(os, model.affine.enabled ? 1 : 0);
  write_f64(os, c.smoothing_alpha);

  write_vec(os, model.affine.alpha);
  write_vec(os, model.affine.beta);

  for (const auto& p : model.predictors) {
    write_mat(os, p.ws_re);
    write_mat(os, p.ws_im);
    write_vec(os, p.bs_re);
    write_vec(os, p.bs_im);
    write_mat(os, p.wt);
    write_vec(os, p.bt);
  }

  if (model.variant == ClassifierVariant::kMlp) {
    write_mat(os, model.mlp.w1);
    write_vec(os, model.mlp.b1);
    write_mat(os, model.mlp.w2);
    write_vec(os, model.mlp.b2);
  } else {
    write_u64(os, static_cast<std::uint64_t>(model.cnn.conv.size()));
    for (const auto& l : model.cnn.conv) {
      write_mat(os, l.w);
      write_vec(os, l.b);
      write_vec(os, l.bn_gamma);
      write_vec(os, l.bn_beta);
    }
    write_mat(os, model.cnn.fc_w);
    write_vec(os, model.cnn.fc_b);
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

CatsLinearModel load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::string(magic, 8) != std::string(kMagic, 8))
    throw std::runtime_error("not a checkpoint file: " + path);

  CatsLinearModel model;
  auto& c = model.cfg;
  const auto k = static_cast<int>(read_u64(is));
  const auto d = static_cast<Eigen::Index>(read_u64(is));
  c.num_classes = k;
  c.lookback = static_cast<int>(read_u64(is));
  c.horizon = static_cast<int>(read_u64(is));
  c.period = static_cast<int>(read_u64(is));
  c.ma_window = static_cast<int>(read_u64(is));
  c.recouple_m = static_cast<int>(read_u64(is));
  c.hidden_size = static_cast<int>(read_u64(is));
  model.variant = read_u64(is) == 1 ? ClassifierVariant::kCnn
                                    : ClassifierVariant::kMlp;
  c.classifier = model.variant;
  const bool affine_enabled = read_u64(is) == 1;
  c.smoothing_alpha = read_f64(is);
  c.affine = affine_enabled;

  model.affine.alpha = read_vec(is);
  model.affine.beta = read_vec(is);
  model.affine.enabled = affine_enabled;
  if (model.affine.alpha.size() != d)
    throw std::runtime_error("affine size mismatch in checkpoint");

  TSLinearConfig tcfg;
  tcfg.lookback = c.lookback;
  tcfg.horizon = c.horizon;
  tcfg.period = c.period;
  tcfg.ma_window = c.ma_window;
  tcfg.alpha = c.smoothing_alpha;
  tcfg.recouple_m = c.recouple_m;
  for (int i = 0; i < k; ++i) {
    TSLinearParams p;
    p.cfg = tcfg;
    p.ws_re = read_mat(is);
    p.ws_im = read_mat(is);
    p.bs_re = read_vec(is);
    p.bs_im = read_vec(is);
    p.wt = read_mat(is);
    p.bt = read_vec(is);
    model.predictors.push_back(std::move(p));
  }

  if (model.variant == ClassifierVariant::kMlp) {
    model.mlp.w1 = read_mat(is);
    model.mlp.b1 = read_vec(is);
    model.mlp.w2 = read_mat(is);
    model.mlp.b2 = read_vec(is);
  } else {
    const auto layers = read_u64(is);
    model.cnn.lookback = c.lookback;
    model.cnn.conv.clear();
    model.cnn.channels.clear();
    for (std::uint64_t i = 0; i < layers; ++i) {
      ConvLayerParams l;
      l.w = read_mat(is);
      l.b = read_vec(is);
      l.bn_gamma = read_vec(is);
      l.bn_beta = read_vec(is);
      model.cnn.channels.push_back(static_cast<int>(l.b.size()));
      model.cnn.conv.push_back(std::move(l));
    }
    model.cnn.fc_w = read_mat(is);
    model.cnn.fc_b = read_vec(is);
  }
  return model;
}

std::string describe_checkpoint(const CatsLinearModel& model) {
  std::ostringstream os;
  const auto& c = model.cfg;
  os << "predictors (K): " << model.predictors.size() << "\n"
     << "features (D): " << model.affine.alpha.size() << "\n"
     << "lookback (L): " << c.lookback << "\n"
     << "horizon (H): " << c.horizon << "\n"
     << "period (T): " << c.period << "\n"
     << "ma_window: " << c.ma_window << "\n"
     << "alpha: " << c.smoothing_alpha << "\n"
     << "recouple m: " << c.recouple_m << "\n"
     << "affine: " << (model.affine.enabled ? "enabled" : "disabled") << "\n"
     << "classifier: "
     << (model.variant == ClassifierVariant::kMlp ? "mlp" : "cnn") << "\n";
  if (!model.predictors.empty()) {
    const auto& p = model.predictors[0];
    os << "ws: " << p.ws_re.rows() << "x" << p.ws_re.cols()
       << " complex, wt: " << p.wt.rows() << "x" << p.wt.cols() << "\n";
  }
  if (model.variant == ClassifierVariant::kMlp)
    os << "mlp: " << model.mlp.w1.cols() << " -> " << model.mlp.w1.rows()
       << " -> " << model.mlp.w2.rows() << "\n";
  return os.str();
}

}  // namespace cats
