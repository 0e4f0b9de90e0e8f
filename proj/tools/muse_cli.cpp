// Command-line front end for the WEASEL+MUSE toolkit: training, prediction,
// noise-robustness sweeps, prediction-time benchmarks and ablation reports.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "muse/classifier.hpp"
#include "muse/dataset_io.hpp"
#include "muse/dtw.hpp"
#include "muse/experiments.hpp"

namespace {

std::string dataset_name(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

std::string config_string(const muse::MuseModel& model) {
  std::string out = "l=" + std::to_string(model.config.word_length);
  out += ";binning=" + muse::to_string(model.sfa.binning);
  out += ";derivatives=" + std::to_string(model.config.use_derivatives ? 1 : 0);
  out += ";bigrams=" + std::to_string(model.config.use_bigrams ? 1 : 0);
  out += ";multivariate=" + std::to_string(model.config.multivariate_ids ? 1 : 0);
  return out;
}

std::vector<double> parse_levels(const std::string& text) {
  // start:end:step, inclusive of the end within half a step
  const auto first = text.find(':');
  const auto second = text.find(':', first + 1);
  if (first == std::string::npos || second == std::string::npos)
    throw muse::Error("levels must be given as start:end:step, e.g. 0:1:0.1");
  const double start = std::stod(text.substr(0, first));
  const double end = std::stod(text.substr(first + 1, second - first - 1));
  const double step = std::stod(text.substr(second + 1));
  if (step <= 0.0 || end < start) throw muse::Error("bad levels range '" + text + "'");
  std::vector<double> levels;
  for (double v = start; v <= end + step * 0.5; v += step) levels.push_back(v);
  return levels;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw muse::Error("cannot write '" + path + "'");
  return out;
}

struct CommonOptions {
  std::uint64_t seed = 42;
  int threads = static_cast<int>(std::thread::hardware_concurrency());
  int l = 0;  // 0 = cross-validate
  std::string binning;
  bool no_derivatives = false;
  bool no_bigrams = false;
  bool univariate = false;
  std::uint32_t window_step = 1;
  double chi2_threshold = 2.0;
  bool include_dc = false;
  double reg_c = 5.0;
  double bias = 1.0;
  double tolerance = 0.1;
  std::string bigram_stride = "adjacent";

  void attach(CLI::App* cmd, bool with_extraction = true) {
    cmd->add_option("--seed", seed, "Random seed for folds, solver and noise");
    cmd->add_option("--threads", threads, "Worker threads for cross-validation cells");
    cmd->add_option("--l", l, "SFA word length (skips cross-validation)")
        ->check(CLI::IsMember({2, 4, 6}));
    cmd->add_option("--binning", binning, "Binning mode (skips cross-validation)")
        ->check(CLI::IsMember({"depth", "freq", "equi_depth", "equi_frequency"}));
    if (with_extraction) {
      cmd->add_flag("--no-derivatives", no_derivatives, "Do not append derivative streams");
      cmd->add_flag("--no-bigrams", no_bigrams, "Unigram features only");
      cmd->add_flag("--univariate", univariate, "Drop dimension identifiers (ablation)");
      cmd->add_option("--window-step", window_step, "Keep every k-th window length")
          ->check(CLI::PositiveNumber);
      cmd->add_option("--chi2", chi2_threshold, "Chi-squared selection threshold");
      cmd->add_option("--C", reg_c, "Logistic-loss weight of the linear solver");
      cmd->add_option("--bias", bias, "Bias constant appended to every instance");
      cmd->add_option("--tolerance", tolerance, "Solver convergence tolerance");
      cmd->add_flag("--include-dc", include_dc, "Keep the DC Fourier coefficient");
      cmd->add_option("--bigram-stride", bigram_stride, "Bigram pairing: adjacent or window")
          ->check(CLI::IsMember({"adjacent", "window"}));
    }
  }

  muse::FitOptions fit_options() const {
    muse::FitOptions options;
    options.seed = seed;
    options.threads = std::max(1, threads);
    options.chi2_threshold = chi2_threshold;
    options.linear.regularization_c = reg_c;
    options.linear.bias = bias;
    options.linear.tolerance = tolerance;
    return options;
  }

  muse::ExtractionConfig extraction(const muse::Dataset& train) const {
    muse::ExtractionConfig cfg;
    cfg.window_lengths = muse::default_window_lengths(train, window_step);
    cfg.use_derivatives = !no_derivatives;
    cfg.use_bigrams = !no_bigrams;
    cfg.multivariate_ids = !univariate;
    cfg.include_dc = include_dc;
    cfg.bigram_adjacent = bigram_stride == "adjacent";
    return cfg;
  }

  std::optional<std::pair<int, muse::BinningMode>> pinned() const {
    const bool has_l = l != 0;
    const bool has_binning = !binning.empty();
    if (has_l != has_binning)
      throw muse::Error("provide both --l and --binning, or neither (cross-validation)");
    if (!has_l) return std::nullopt;
    return std::make_pair(l, muse::binning_mode_from_string(binning));
  }
};

int cmd_fit(const std::string& train_path, const std::string& model_path, const CommonOptions& common) {
  const muse::Dataset train = muse::load_dataset(train_path);
  muse::ExtractionConfig cfg = common.extraction(train);
  const muse::FitOptions options = common.fit_options();

  int l;
  muse::BinningMode mode;
  if (const auto pin = common.pinned(); pin.has_value()) {
    std::tie(l, mode) = *pin;
  } else {
    const muse::CvResult cv = muse::cross_validate(train, cfg, options);
    l = cv.best_word_length;
    mode = cv.best_binning;
    const std::string cv_path = model_path + ".cv.csv";
    auto out = open_output(cv_path);
    muse::write_cv_report(cv.rows, out);
    std::cout << "cross-validation: best l=" << l << " binning=" << muse::to_string(mode)
              << " (report: " << cv_path << ")\n";
  }

  const double t0 = muse::cpu_time_ms();
  const muse::MuseModel model = muse::fit(train, cfg, l, mode, options);
  const double train_ms = muse::cpu_time_ms() - t0;
  muse::save_model(model, model_path);
  std::cout << "fitted " << dataset_name(train_path) << ": " << model.stats.selected_feature_count
            << " features (of " << model.stats.pre_selection_feature_count << " pre-selection), "
            << config_string(model) << ", " << train_ms << " ms CPU\n"
            << "model written to " << model_path << "\n";
  return 0;
}

int cmd_predict(const std::string& model_path, const std::string& test_path, const std::string& out_path) {
  const muse::MuseModel model = muse::load_model(model_path);
  const muse::Dataset test = muse::load_dataset(test_path);
  const muse::DatasetPrediction pred = muse::predict_dataset(model, test);

  auto out = open_output(out_path);
  out << "sample,predicted,actual\n";
  for (std::size_t i = 0; i < pred.labels.size(); ++i)
    out << i << ',' << pred.labels[i] << ',' << test.samples[i].label << '\n';

  if (pred.labelled > 0)
    std::cout << "accuracy: " << pred.accuracy << " (" << pred.labelled << " labelled samples)\n";
  else
    std::cout << "test set is unlabelled; predictions written\n";
  std::cout << "predictions written to " << out_path << "\n";
  return 0;
}

int cmd_noise(const std::string& train_path, const std::string& test_path, const std::string& out_path,
              const std::string& levels_text, const std::string& noise_on, const CommonOptions& common) {
  const muse::Dataset train = muse::load_dataset(train_path);
  const muse::Dataset test = muse::load_dataset(test_path);

  muse::NoiseOptions options;
  options.seed = common.seed;
  options.fit = common.fit_options();
  options.pinned = common.pinned();
  if (noise_on == "train")
    options.target = muse::NoiseTarget::train_only;
  else if (noise_on == "test")
    options.target = muse::NoiseTarget::test_only;

  const std::vector<muse::NoiseRow> rows = muse::noise_sweep(train, test, parse_levels(levels_text), options);
  auto out = open_output(out_path);
  muse::write_noise_report(rows, out);
  std::cout << "noise sweep (" << rows.size() << " levels) written to " << out_path << "\n";
  return 0;
}

int cmd_bench(const std::string& train_path, const std::string& test_path, const std::string& out_path,
              int repeats, const CommonOptions& common) {
  const muse::Dataset train = muse::load_dataset(train_path);
  const muse::Dataset test = muse::load_dataset(test_path);
  const muse::BenchResult bench =
      muse::run_benchmark(train, test, common.fit_options(), muse::DtwConfig{}, repeats, common.pinned());

  const std::string name = dataset_name(train_path);
  std::vector<muse::RunReportRow> rows;
  rows.push_back({name, "weasel_muse",
                  "l=" + std::to_string(bench.word_length) + ";binning=" + muse::to_string(bench.binning),
                  bench.muse_acc, bench.muse_train_ms, bench.muse_predict_ms, bench.feature_count});
  rows.push_back({name, "dtwi", "window=1.0", bench.dtwi_acc, 0.0, bench.dtwi_predict_ms, 0});
  auto out = open_output(out_path);
  muse::write_run_report(rows, out);

  std::cout << "prediction CPU time: muse " << bench.muse_predict_ms << " ms, dtwi "
            << bench.dtwi_predict_ms << " ms, dtwi/muse ratio " << bench.ratio() << "\n"
            << "report written to " << out_path << "\n";
  return 0;
}

int cmd_ablate(const std::string& train_path, const std::string& test_path, const std::string& out_path,
               const CommonOptions& common) {
  const muse::Dataset train = muse::load_dataset(train_path);
  const muse::Dataset test = muse::load_dataset(test_path);
  const auto rows = muse::ablation_report(train, test, common.fit_options(), common.pinned());
  auto out = open_output(out_path);
  muse::write_ablation_report(rows, out);
  for (const auto& r : rows)
    std::cout << (r.multivariate_ids ? "multivariate" : "univariate  ") << " "
              << (r.derivatives ? "+derivatives" : "-derivatives") << "  accuracy " << r.accuracy << "\n";
  std::cout << "ablation report written to " << out_path << "\n";
  return 0;
}

int cmd_synth(const std::string& train_path, const std::string& test_path, std::size_t n_train,
              std::size_t n_test, std::uint64_t seed) {
  muse::ShapesSpec spec;
  spec.train_size = n_train;
  spec.test_size = n_test;
  const auto [train, test] = muse::generate_shapes_dataset(spec, seed);
  muse::save_dataset(train, train_path);
  muse::save_dataset(test, test_path);
  std::cout << "wrote " << train.size() << " train / " << test.size() << " test samples\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"WEASEL+MUSE multivariate time-series classification toolkit"};
  app.require_subcommand(1);

  std::string train_path, test_path, model_path, out_path;
  std::string levels_text = "0:1:0.1";
  std::string noise_on = "both";
  int repeats = 3;
  std::size_t n_train = 40, n_test = 60;

  CommonOptions fit_common, noise_common, bench_common, ablate_common;

  auto* fit = app.add_subcommand("fit", "Train a model (cross-validates l and binning unless pinned)");
  fit->add_option("--train", train_path, "Training dataset")->required()->check(CLI::ExistingFile);
  fit->add_option("--out", model_path, "Output model file")->required();
  fit_common.attach(fit);

  auto* predict = app.add_subcommand("predict", "Predict labels with a fitted model");
  predict->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
  predict->add_option("--test", test_path, "Dataset to predict")->required()->check(CLI::ExistingFile);
  predict->add_option("--out", out_path, "Per-sample label CSV")->required();

  auto* noise = app.add_subcommand("noise", "Gaussian-noise robustness sweep (muse vs dtwi)");
  noise->add_option("--train", train_path, "Training dataset")->required()->check(CLI::ExistingFile);
  noise->add_option("--test", test_path, "Test dataset")->required()->check(CLI::ExistingFile);
  noise->add_option("--levels", levels_text, "Noise SD range start:end:step (default 0:1:0.1)");
  noise->add_option("--noise-on", noise_on, "Where to inject noise")
      ->check(CLI::IsMember({"both", "train", "test"}));
  noise->add_option("--out", out_path, "Output CSV")->required();
  noise_common.attach(noise, false);

  auto* bench = app.add_subcommand("bench", "CPU prediction-time benchmark (muse vs dtwi)");
  bench->add_option("--train", train_path, "Training dataset")->required()->check(CLI::ExistingFile);
  bench->add_option("--test", test_path, "Test dataset")->required()->check(CLI::ExistingFile);
  bench->add_option("--out", out_path, "Output CSV")->required();
  bench->add_option("--repeats", repeats, "Prediction passes to average")->check(CLI::PositiveNumber);
  bench_common.attach(bench, false);

  auto* ablate = app.add_subcommand("ablate", "Four-arm ablation report (ids/derivatives on-off)");
  ablate->add_option("--train", train_path, "Training dataset")->required()->check(CLI::ExistingFile);
  ablate->add_option("--test", test_path, "Test dataset")->required()->check(CLI::ExistingFile);
  ablate->add_option("--out", out_path, "Output CSV")->required();
  ablate_common.attach(ablate, false);

  auto* synth = app.add_subcommand("synth", "Generate the synthetic two-class shapes dataset");
  synth->add_option("--out-train", train_path, "Output train CSV")->required();
  synth->add_option("--out-test", test_path, "Output test CSV")->required();
  synth->add_option("--n-train", n_train, "Training samples");
  synth->add_option("--n-test", n_test, "Test samples");
  std::uint64_t synth_seed = 42;
  synth->add_option("--seed", synth_seed, "Generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed()) return cmd_fit(train_path, model_path, fit_common);
    if (predict->parsed()) return cmd_predict(model_path, test_path, out_path);
    if (noise->parsed())
      return cmd_noise(train_path, test_path, out_path, levels_text, noise_on, noise_common);
    if (bench->parsed()) return cmd_bench(train_path, test_path, out_path, repeats, bench_common);
    if (ablate->parsed()) return cmd_ablate(train_path, test_path, out_path, ablate_common);
    if (synth->parsed()) return cmd_synth(train_path, test_path, n_train, n_test, synth_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
