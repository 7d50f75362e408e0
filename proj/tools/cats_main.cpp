#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cats/caci.hpp"
#include "cats/checkpoint.hpp"
#include "cats/dataset.hpp"
#include "cats/theory.hpp"

namespace fs = std::filesystem;

namespace {

struct RunConfig {
  std::string data_path;
  std::string checkpoint_path;
  std::string out_dir = "out";
  std::string preset;
  std::string classifier = "mlp";
  cats::TrainConfig train;
};

void apply_preset(const std::string& name, cats::TrainConfig& cfg) {
  if (name.empty()) return;
  if (name == "etth") {
    cfg.period = 24;
    cfg.batch_windows = 128;
  } else if (name == "ettm") {
    cfg.period = 96;
    cfg.batch_windows = 128;
  } else if (name == "weather") {
    cfg.period = 144;
    cfg.batch_windows = 128;
  } else if (name == "electricity") {
    cfg.period = 24;
    cfg.batch_windows = 32;
  } else if (name == "traffic") {
    cfg.period = 24;
    cfg.batch_windows = 8;
  } else {
    throw CLI::ValidationError("--preset",
                               "unknown preset '" + name + "'");
  }
}

std::string default_out_dir() {
  const char* env = std::getenv("CATS_OUT_DIR");
  return env ? std::string(env) : std::string("out");
}

void add_model_flags(CLI::App* cmd, RunConfig& rc) {
  auto& t = rc.train;
  cmd->add_option("--lookback", t.lookback, "lookback length L");
  cmd->add_option("--horizon", t.horizon, "forecast horizon H");
  cmd->add_option("--classes", t.num_classes, "number of predictors K");
  cmd->add_option("--batch", t.batch_windows, "windows per batch B");
  cmd->add_option("--period", t.period, "seasonal period T");
  cmd->add_option("--ma-window", t.ma_window, "moving-average window");
  cmd->add_option("--alpha", t.smoothing_alpha, "trend smoothing alpha");
  cmd->add_option("--recouple-m", t.recouple_m, "recoupling kernel length m");
  cmd->add_option("--hidden", t.hidden_size, "classifier hidden width");
  cmd->add_option("--lr-predictor", t.lr_predictor, "predictor learning rate");
  cmd->add_option("--lr-classifier", t.lr_classifier,
                  "classifier learning rate");
  cmd->add_option("--epochs", t.max_epochs, "maximum epochs");
  cmd->add_option("--patience", t.patience, "early-stopping patience");
  cmd->add_option("--seed", t.seed, "random seed");
  cmd->add_option("--classifier", rc.classifier, "classifier variant")
      ->check(CLI::IsMember({"mlp", "cnn"}));
  cmd->add_flag("--no-affine", [&t](std::int64_t) { t.affine = false; },
                "disable the learnable affine in RevIN");
  cmd->add_option("--preset", rc.preset,
                  "dataset profile: etth, ettm, weather, electricity, traffic");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string metrics_text(const cats::TrainResult& result) {
  std::ostringstream os;
  for (const auto& rec : result.log)
    os << cats::format_epoch_record(rec) << "\n";
  return os.str();
}

int run_train(RunConfig rc) {
  apply_preset(rc.preset, rc.train);
  rc.train.classifier = rc.classifier == "cnn" ? cats::ClassifierVariant::kCnn
                                               : cats::ClassifierVariant::kMlp;
  // open the dataset before touching the output directory so a bad path
  // leaves no partial artifacts behind
  auto ds = cats::load_csv(rc.data_path);
  if (rc.train.num_classes >
      rc.train.batch_windows * static_cast<int>(ds.features()))
    throw CLI::ValidationError(
        "--classes", "K exceeds the instances per batch (B*D)");

  auto splits = cats::split(ds.rows(), {0.6, 0.2, 0.2}, rc.train.lookback,
                            rc.train.horizon);
  auto result = cats::train_loop(rc.train, ds, splits);
  auto test = cats::evaluate(result.best, ds, splits.test);

  fs::create_directories(rc.out_dir);
  cats::save_checkpoint(result.best, (fs::path(rc.out_dir) / "model.ckpt").string());
  write_text(fs::path(rc.out_dir) / "metrics.log", metrics_text(result));

  std::ostringstream summary;
  summary << std::setprecision(17) << "command=train\n"
          << "data=" << rc.data_path << "\n"
          << "seed=" << rc.train.seed << "\n"
          << "classes=" << rc.train.num_classes << "\n"
          << "lookback=" << rc.train.lookback << "\n"
          << "horizon=" << rc.train.horizon << "\n"
          << "epochs_run=" << result.log.size() << "\n"
          << "best_epoch=" << result.best_epoch << "\n"
          << "test_mse=" << test.mse << "\n"
          << "test_mae=" << test.mae << "\n";
  write_text(fs::path(rc.out_dir) / "summary.txt", summary.str());
  std::cout << summary.str();
  return 0;
}

int run_eval(const RunConfig& rc) {
  auto model = cats::load_checkpoint(rc.checkpoint_path);
  auto ds = cats::load_csv(rc.data_path);
  auto splits = cats::split(ds.rows(), {0.6, 0.2, 0.2}, model.cfg.lookback,
                            model.cfg.horizon);
  auto test = cats::evaluate(model, ds, splits.test);
  std::cout << std::setprecision(17) << "test_mse=" << test.mse << "\n"
            << "test_mae=" << test.mae << "\n";
  return 0;
}

struct TheoryConfig {
  int num_classes = 2;
  int dim = 3;
  long samples = 600;
  int features = 4;
  long sweep_samples = 2400;
  double sigma = 1.0;
  int trials = 2000;
  std::uint64_t seed = 7;
  std::string out_dir = default_out_dir();
};

int run_verify_theory(const TheoryConfig& tc) {
  using namespace cats::theory;
  if (tc.trials < 30)
    throw CLI::ValidationError("--trials",
                               "insufficient trials for the Monte Carlo "
                               "tolerance policy (need >= 30)");

  std::mt19937_64 rng(tc.seed * 2654435761ULL + 13);
  std::normal_distribution<double> gauss;
  std::vector<Eigen::VectorXd> thetas;
  std::vector<Eigen::Index> per_class;
  for (int k = 0; k < tc.num_classes; ++k) {
    Eigen::VectorXd t(tc.dim);
    for (int i = 0; i < tc.dim; ++i) t(i) = gauss(rng);
    thetas.push_back(t);
    per_class.push_back(tc.samples / tc.num_classes);
  }
  auto specs = make_gaussian_specs(thetas, per_class, tc.sigma, tc.seed);

  auto r1 = mc_validate_thm1(specs, tc.trials, tc.seed + 1);
  auto r2 = mc_validate_thm2(specs, tc.trials, tc.seed + 2);
  auto sweep = channel_design_sweep(tc.features, tc.num_classes, tc.dim,
                                    tc.sweep_samples, tc.sigma, tc.seed + 3,
                                    tc.trials);

  std::ostringstream table;
  table << format_report(r1) << "\n" << format_report(r2) << "\n";
  for (const auto& row : sweep.rows) table << format_report(row.report) << "\n";
  table << "variance_ordering="
        << (sweep.variance_ordering_ok ? "ok" : "violated") << "\n";

  fs::create_directories(tc.out_dir);
  write_text(fs::path(tc.out_dir) / "theory.txt", table.str());
  std::cout << table.str();

  std::vector<std::pair<std::string, bool>> checks;
  checks.emplace_back("thm1 excess",
                      within_tolerance(r1.empirical_excess(),
                                       r1.closed_form_excess(),
                                       r1.stderr_variance));
  checks.emplace_back("thm2 variance",
                      within_tolerance(r2.variance_part,
                                       r2.closed_form_variance,
                                       r2.stderr_variance));
  checks.emplace_back("thm2 bias",
                      within_tolerance(r2.bias_part, r2.closed_form_bias,
                                       3.0 * r2.stderr_variance));
  for (const auto& row : sweep.rows)
    checks.emplace_back(row.report.design_name + " variance",
                        within_tolerance(row.report.variance_part,
                                         row.report.closed_form_variance,
                                         row.report.stderr_variance));
  checks.emplace_back("variance ordering", sweep.variance_ordering_ok);

  int rc = 0;
  for (const auto& [name, ok] : checks)
    if (!ok) {
      std::cerr << "tolerance check failed: " << name << "\n";
      rc = 1;
    }
  return rc;
}

int run_inspect(const RunConfig& rc) {
  auto model = cats::load_checkpoint(rc.checkpoint_path);
  std::cout << cats::describe_checkpoint(model);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CATS-Linear forecasting toolkit"};
  app.require_subcommand(1);
  // config sections are named after the subcommand, e.g. [train]; flags given
  // on the command line take precedence over file values
  app.set_config("--config", "", "read options from a config file");
  app.allow_config_extras(CLI::config_extras_mode::error);

  RunConfig rc;
  rc.out_dir = default_out_dir();
  TheoryConfig tc;

  auto* train = app.add_subcommand("train", "train a model on a CSV dataset");
  train->configurable(true);
  train->fallthrough(true);
  train->add_option("--data", rc.data_path, "dataset CSV path")->required();
  train->add_option("--out", rc.out_dir, "output directory");
  add_model_flags(train, rc);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--data", rc.data_path, "dataset CSV path")->required();
  eval->add_option("--checkpoint", rc.checkpoint_path, "checkpoint path")
      ->required();

  auto* verify = app.add_subcommand("verify-theory",
                                    "Monte Carlo excess-risk validation");
  verify->configurable(true);
  verify->fallthrough(true);
  verify->add_option("--classes", tc.num_classes, "number of classes K");
  verify->add_option("--dim", tc.dim, "parameter dimension L");
  verify->add_option("--samples", tc.samples, "pooled sample count N");
  verify->add_option("--features", tc.features, "feature count D for the sweep");
  verify->add_option("--sweep-samples", tc.sweep_samples,
                     "pooled sample count for the sweep");
  verify->add_option("--sigma", tc.sigma, "noise standard deviation");
  verify->add_option("--trials", tc.trials, "Monte Carlo trials");
  verify->add_option("--seed", tc.seed, "random seed");
  verify->add_option("--out", tc.out_dir, "output directory");

  auto* inspect = app.add_subcommand("inspect",
                                     "print checkpoint shapes and constants");
  inspect->add_option("--checkpoint", rc.checkpoint_path, "checkpoint path")
      ->required();

  try {
    app.parse(argc, argv);
    if (train->parsed()) return run_train(rc);
    if (eval->parsed()) return run_eval(rc);
    if (verify->parsed()) return run_verify_theory(tc);
    if (inspect->parsed()) return run_inspect(rc);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
