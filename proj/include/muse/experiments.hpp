#pragma once

#include <cmath>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "muse/classifier.hpp"
#include "muse/core.hpp"
#include "muse/dtw.hpp"
#include "muse/preprocess.hpp"

namespace muse {

/// Process CPU time (all threads), in milliseconds.
inline double cpu_time_ms() {
  timespec ts{};
  clock_gettime(CLOCK_PROCESS_CPUTIME_ID, &ts);
  return static_cast<double>(ts.tv_sec) * 1e3 + static_cast<double>(ts.tv_nsec) * 1e-6;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = seed + 0x9e3779b97f4a7c15ULL * (a + 1) + 0xc2b2ae3d27d4eb4fULL * (b + 1);
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  return x;
}

// ---------------------------------------------------------------------------
// Report rows
// ---------------------------------------------------------------------------

struct RunReportRow {
  std::string dataset;
  std::string method;
  std::string config;
  double accuracy = 0.0;
  double train_time_ms = 0.0;
  double predict_time_ms = 0.0;
  std::uint64_t peak_feature_count = 0;
};

inline void write_run_report(const std::vector<RunReportRow>& rows, std::ostream& out) {
  out << "dataset,method,config,accuracy,train_time_ms,predict_time_ms,peak_feature_count\n";
  for (const auto& r : rows)
    out << r.dataset << ',' << r.method << ',' << r.config << ',' << r.accuracy << ','
        << r.train_time_ms << ',' << r.predict_time_ms << ',' << r.peak_feature_count << '\n';
}

inline void write_cv_report(const std::vector<CvRow>& rows, std::ostream& out) {
  out << "l,binning,fold,accuracy\n";
  for (const auto& r : rows)
    out << r.word_length << ',' << to_string(r.binning) << ',' << r.fold << ',' << r.accuracy << '\n';
}

// ---------------------------------------------------------------------------
// Noise robustness experiment
// ---------------------------------------------------------------------------

struct NoiseRow {
  double level;
  double muse_acc;
  double dtwi_acc;
};

enum class NoiseTarget { both, train_only, test_only };

struct NoiseOptions {
  std::uint64_t seed = 42;
  NoiseTarget target = NoiseTarget::both;
  /// When set, skips cross-validation and fits at this configuration.
  std::optional<std::pair<int, BinningMode>> pinned;
  FitOptions fit;
  DtwConfig dtw;
};

/// For each noise level: z-normalize all dimensions to unit SD, inject
/// Gaussian noise, fit the classifier and the DTW baseline, and record both
/// test accuracies. Deterministic for a fixed seed.
inline std::vector<NoiseRow> noise_sweep(const Dataset& train, const Dataset& test,
                                         const std::vector<double>& levels,
                                         const NoiseOptions& options = {}) {
  const Dataset train_base = z_normalize_dataset(train);
  const Dataset test_base = z_normalize_dataset(test);

  std::vector<NoiseRow> rows;
  rows.reserve(levels.size());
  for (std::size_t li = 0; li < levels.size(); ++li) {
    const double sd = levels[li];
    const bool on_train = options.target != NoiseTarget::test_only;
    const bool on_test = options.target != NoiseTarget::train_only;
    const Dataset noisy_train =
        on_train ? add_gaussian_noise(train_base, sd, mix_seed(options.seed, li, 0)) : train_base;
    const Dataset noisy_test =
        on_test ? add_gaussian_noise(test_base, sd, mix_seed(options.seed, li, 1)) : test_base;

    ExtractionConfig cfg;
    cfg.window_lengths = default_window_lengths(noisy_train);
    int l = 4;
    BinningMode mode = BinningMode::equi_depth;
    if (options.pinned.has_value()) {
      std::tie(l, mode) = *options.pinned;
    } else {
      const CvResult cv = cross_validate(noisy_train, cfg, options.fit);
      l = cv.best_word_length;
      mode = cv.best_binning;
    }
    const MuseModel model = fit(noisy_train, cfg, l, mode, options.fit);
    const double muse_acc = predict_dataset(model, noisy_test).accuracy;
    const double dtwi_acc = dtwi_classify(noisy_train, noisy_test, options.dtw).accuracy;
    rows.push_back({sd, muse_acc, dtwi_acc});
  }
  return rows;
}

inline void write_noise_report(const std::vector<NoiseRow>& rows, std::ostream& out) {
  out << "level,muse_acc,dtwi_acc\n";
  for (const auto& r : rows) out << r.level << ',' << r.muse_acc << ',' << r.dtwi_acc << '\n';
}

// ---------------------------------------------------------------------------
// Prediction-time benchmark
// ---------------------------------------------------------------------------

struct BenchResult {
  int word_length = 0;
  BinningMode binning = BinningMode::equi_depth;
  double muse_train_ms = 0.0;
  double muse_predict_ms = 0.0;  // per pass over the test split
  double dtwi_predict_ms = 0.0;
  double muse_acc = 0.0;
  double dtwi_acc = 0.0;
  std::uint64_t feature_count = 0;
  int repeats = 1;

  double ratio() const { return dtwi_predict_ms / muse_predict_ms; }
};

/// Measure CPU prediction time of the fitted classifier vs the DTW baseline
/// on the test split. Repeats average out clock granularity; both methods
/// run single-threaded.
inline BenchResult run_benchmark(const Dataset& train, const Dataset& test, const FitOptions& options = {},
                                 const DtwConfig& dtw = {}, int repeats = 3,
                                 std::optional<std::pair<int, BinningMode>> pinned = std::nullopt) {
  BenchResult result;
  result.repeats = repeats;

  ExtractionConfig cfg;
  cfg.window_lengths = default_window_lengths(train);

  const double t0 = cpu_time_ms();
  int l;
  BinningMode mode;
  if (pinned.has_value()) {
    std::tie(l, mode) = *pinned;
  } else {
    const CvResult cv = cross_validate(train, cfg, options);
    l = cv.best_word_length;
    mode = cv.best_binning;
  }
  const MuseModel model = fit(train, cfg, l, mode, options);
  result.muse_train_ms = cpu_time_ms() - t0;
  result.word_length = l;
  result.binning = mode;
  result.feature_count = model.stats.selected_feature_count;

  const double t1 = cpu_time_ms();
  DatasetPrediction muse_pred;
  for (int r = 0; r < repeats; ++r) muse_pred = predict_dataset(model, test);
  result.muse_predict_ms = (cpu_time_ms() - t1) / repeats;
  result.muse_acc = muse_pred.accuracy;

  const double t2 = cpu_time_ms();
  DtwiResult dtwi_pred;
  for (int r = 0; r < repeats; ++r) dtwi_pred = dtwi_classify(train, test, dtw);
  result.dtwi_predict_ms = (cpu_time_ms() - t2) / repeats;
  result.dtwi_acc = dtwi_pred.accuracy;
  return result;
}

// ---------------------------------------------------------------------------
// Ablation: multivariate ids and derivatives on/off
// ---------------------------------------------------------------------------

struct AblationRow {
  bool multivariate_ids;
  bool derivatives;
  int word_length;
  BinningMode binning;
  double accuracy;
};

/// The four design-decision arms, each cross-validated and refit in full.
inline std::vector<AblationRow> ablation_report(const Dataset& train, const Dataset& test,
                                                const FitOptions& options = {},
                                                std::optional<std::pair<int, BinningMode>> pinned =
                                                    std::nullopt) {
  std::vector<AblationRow> rows;
  for (const bool multivariate : {true, false}) {
    for (const bool derivatives : {true, false}) {
      ExtractionConfig cfg;
      cfg.window_lengths = default_window_lengths(train);
      cfg.multivariate_ids = multivariate;
      cfg.use_derivatives = derivatives;
      int l;
      BinningMode mode;
      if (pinned.has_value()) {
        std::tie(l, mode) = *pinned;
      } else {
        const CvResult cv = cross_validate(train, cfg, options);
        l = cv.best_word_length;
        mode = cv.best_binning;
      }
      const MuseModel model = fit(train, cfg, l, mode, options);
      rows.push_back({multivariate, derivatives, l, mode, predict_dataset(model, test).accuracy});
    }
  }
  return rows;
}

inline void write_ablation_report(const std::vector<AblationRow>& rows, std::ostream& out) {
  out << "multivariate_ids,derivatives,l,binning,accuracy\n";
  for (const auto& r : rows)
    out << (r.multivariate_ids ? 1 : 0) << ',' << (r.derivatives ? 1 : 0) << ',' << r.word_length
        << ',' << to_string(r.binning) << ',' << r.accuracy << '\n';
}

// ---------------------------------------------------------------------------
// Synthetic two-class shape data for the noise experiment
// ---------------------------------------------------------------------------

struct ShapesSpec {
  std::size_t train_size = 40;
  std::size_t test_size = 60;
  std::size_t min_length = 60;
  std::size_t max_length = 90;
};

/// Two classes of smooth two-dimensional shapes: a single hump versus two
/// humps, at random positions, widths and amplitudes. The second dimension
/// carries the complementary ramp of the same event positions. Deterministic
/// for a fixed seed.
inline std::pair<Dataset, Dataset> generate_shapes_dataset(const ShapesSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const auto make_sample = [&](bool two_humps) {
    const std::size_t n =
        spec.min_length + static_cast<std::size_t>(unit(rng) * static_cast<double>(
                                                                   spec.max_length - spec.min_length));
    MultivariateSeries s;
    s.label = two_humps ? "two_humps" : "one_hump";
    Series base(n, 0.0), ramp(n, 0.0);

    const int humps = two_humps ? 2 : 1;
    std::vector<double> centers;
    if (humps == 1) {
      centers.push_back(0.3 + 0.4 * unit(rng));
    } else {
      centers.push_back(0.15 + 0.2 * unit(rng));
      centers.push_back(0.6 + 0.25 * unit(rng));
    }
    const double width = (0.07 + 0.05 * unit(rng)) * static_cast<double>(n);
    const double amplitude = 0.8 + 0.4 * unit(rng);

    for (std::size_t t = 0; t < n; ++t) {
      double v = 0.0, r = 0.0;
      for (const double c : centers) {
        const double u = (static_cast<double>(t) - c * static_cast<double>(n)) / width;
        v += amplitude * std::exp(-0.5 * u * u);
        r += amplitude / (1.0 + std::exp(-u));  // sigmoid step at each hump
      }
      base[t] = v;
      ramp[t] = r;
    }
    s.dimensions.push_back(std::move(base));
    s.dimensions.push_back(std::move(ramp));
    return s;
  };

  const auto make_split = [&](std::size_t count) {
    Dataset ds;
    for (std::size_t i = 0; i < count; ++i) ds.samples.push_back(make_sample(i % 2 == 1));
    ds.rebuild_class_universe();
    return ds;
  };
  Dataset train = make_split(spec.train_size);
  Dataset test = make_split(spec.test_size);
  return {std::move(train), std::move(test)};
}

}  // namespace muse
