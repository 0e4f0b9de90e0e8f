#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "muse/bag_of_patterns.hpp"
#include "muse/core.hpp"
#include "muse/feature_selection.hpp"
#include "muse/linear_model.hpp"
#include "muse/preprocess.hpp"
#include "muse/sfa.hpp"

namespace muse {

inline constexpr int kModelFormatVersion = 1;

struct FitOptions {
  double chi2_threshold = 2.0;
  LinearParams linear;  // defaults follow the training protocol: C=5, bias=1, tolerance=0.1
  std::uint64_t seed = 42;
  int threads = 1;  // parallelism across cross-validation cells
};

/// Diagnostics recorded while fitting.
struct FitStats {
  std::uint64_t pre_selection_feature_count = 0;
  long double capacity_bound = 0;  // min(N*n_max^2, c^(2l)*n_max) * streams
  bool capacity_bound_ok = true;
  std::uint64_t selected_feature_count = 0;
  bool keep_all_fallback = false;
};

/// Full fitted artifact: SFA bins, feature dictionary, linear weights and the
/// extraction configuration, plus dataset metadata needed at predict time.
/// Immutable after fit; safe to share across threads.
struct MuseModel {
  SfaModel sfa;
  FeatureDictionary dictionary;
  LinearModel linear;
  ExtractionConfig config;
  std::vector<std::string> class_universe;
  std::size_t input_dim_count = 0;  // m before derivative augmentation
  std::size_t max_train_length = 0;
  FitStats stats;

  /// Packed-key lookup mirroring `dictionary` (rebuilt after load).
  PackedKeyIndex packed_index;
  /// Flat (stream, window) -> edge-list pointers resolved out of sfa.edges.
  std::vector<const std::vector<std::vector<double>>*> edge_grid;

  std::size_t stream_count() const { return input_dim_count * (config.use_derivatives ? 2 : 1); }

  void rebuild_packed_index() {
    std::vector<PackedKey> packed;
    packed.reserve(dictionary.size());
    for (const auto& key : dictionary.keys) packed.push_back(pack_key(key));
    packed_index = PackedKeyIndex(packed);
  }

  void rebuild_edge_grid() {
    const std::size_t windows = config.window_lengths.size();
    edge_grid.assign(stream_count() * windows, nullptr);
    for (std::size_t d = 0; d < stream_count(); ++d)
      for (std::size_t wi = 0; wi < windows; ++wi)
        edge_grid[d * windows + wi] =
            sfa.edges_for(static_cast<std::uint32_t>(d), config.window_lengths[wi]);
  }
};

namespace detail {

inline void check_trainable(const Dataset& train) {
  if (train.samples.empty()) throw Error("training set is empty");
  for (const auto& s : train.samples)
    if (!s.labelled()) throw Error("every training sample must be labelled");
  if (train.class_universe.size() < 2) throw Error("training set has fewer than 2 classes");
}

/// Sparse count vector of one (already augmented) sample under the fitted
/// model; the single featurization path shared by fit and predict.
inline SparseVector vectorize_sample(const MultivariateSeries& sample, const MuseModel& model,
                                     std::vector<double>& dense_scratch,
                                     std::vector<std::uint32_t>& touched_scratch) {
  const ExtractionConfig& cfg = model.config;
  touched_scratch.clear();
  const std::size_t n = sample.length();
  const std::size_t windows = cfg.window_lengths.size();
  for (std::size_t d = 0; d < sample.dim_count(); ++d) {
    const std::uint32_t key_dim = cfg.multivariate_ids ? static_cast<std::uint32_t>(d) : 0;
    for (std::size_t wi = 0; wi < windows; ++wi) {
      const std::uint32_t w = cfg.window_lengths[wi];
      if (n < w || !window_usable(w, cfg.word_length)) continue;
      const auto* edges = model.edge_grid[d * windows + wi];
      if (edges == nullptr) continue;  // no training window ever had this length
      emit_window_words(sample.dimensions[d], *edges, key_dim, w, cfg, [&](const PackedKey& key) {
        const std::uint32_t idx = model.packed_index.find(key);
        if (idx == PackedKeyIndex::kEmpty) return;
        if (dense_scratch[idx] == 0.0) touched_scratch.push_back(idx);
        dense_scratch[idx] += 1.0;
      });
    }
  }
  std::sort(touched_scratch.begin(), touched_scratch.end());
  SparseVector out;
  out.reserve(touched_scratch.size());
  for (const auto idx : touched_scratch) {
    out.push_back({idx, dense_scratch[idx]});
    dense_scratch[idx] = 0.0;
  }
  return out;
}

}  // namespace detail

/// Fit the full pipeline at a fixed (word length, binning mode):
/// derivatives (if enabled), SFA bins per (dimension, window length),
/// chi-squared feature selection at the configured threshold, then the
/// one-vs-rest linear model.
inline MuseModel fit(const Dataset& train, ExtractionConfig cfg, int word_length,
                     BinningMode binning, const FitOptions& options = {}) {
  detail::check_trainable(train);
  cfg.word_length = word_length;
  if (cfg.window_lengths.empty()) cfg.window_lengths = default_window_lengths(train);
  validate_extraction_config(cfg);

  const Dataset augmented = cfg.use_derivatives ? add_derivatives(train) : train;
  const std::size_t stream_count = augmented.dim_count();
  if (stream_count > kMaxDimId) throw Error("too many dimensions");

  MuseModel model;
  model.config = cfg;
  model.class_universe = train.class_universe;
  model.input_dim_count = train.dim_count();
  model.max_train_length = train.max_length();
  model.sfa.word_length = cfg.word_length;
  model.sfa.alphabet_size = cfg.alphabet_size;
  model.sfa.binning = binning;
  model.sfa.include_dc = cfg.include_dc;

  // --- bins: one edge list per (dimension, window length, position)
  for (std::size_t d = 0; d < stream_count; ++d) {
    const std::uint32_t dim_id = static_cast<std::uint32_t>(d);
    for (const auto w : cfg.window_lengths) {
      if (!detail::window_usable(w, cfg.word_length)) continue;
      std::vector<std::vector<double>> values(static_cast<std::size_t>(cfg.word_length));
      for (const auto& sample : augmented.samples) {
        if (sample.length() < w) continue;
        detail::for_each_window_spectrum(sample.dimensions[d], w, cfg.word_length, cfg.include_dc,
                                         [&](std::size_t, std::span<const double> coefs) {
                                           for (int p = 0; p < cfg.word_length; ++p)
                                             values[static_cast<std::size_t>(p)].push_back(
                                                 coefs[static_cast<std::size_t>(p)]);
                                         });
      }
      if (values.front().empty()) continue;  // no sample long enough for this window
      std::vector<std::vector<double>> edges(values.size());
      for (std::size_t p = 0; p < values.size(); ++p) {
        auto& collected = values[p];
        if (cfg.bin_sample_cap > 0 && collected.size() > cfg.bin_sample_cap) {
          std::mt19937_64 rng(options.seed ^ (static_cast<std::uint64_t>(dim_id) << 32) ^
                              (static_cast<std::uint64_t>(w) << 8) ^ static_cast<std::uint64_t>(p));
          std::vector<double> sampled;
          sampled.reserve(cfg.bin_sample_cap);
          std::sample(collected.begin(), collected.end(), std::back_inserter(sampled),
                      cfg.bin_sample_cap, rng);
          collected = std::move(sampled);
        }
        edges[p] = fit_bin_edges(std::move(collected), cfg.alphabet_size, binning);
      }
      model.sfa.edges[{dim_id, w}] = std::move(edges);
    }
  }

  // --- per-class word totals over the whole bag space (emission arithmetic)
  std::map<std::string, std::size_t> class_slot;
  for (std::size_t c = 0; c < model.class_universe.size(); ++c)
    class_slot[model.class_universe[c]] = c;
  std::vector<double> class_totals(model.class_universe.size(), 0.0);
  for (const auto& sample : augmented.samples)
    class_totals[class_slot.at(sample.label)] +=
        static_cast<double>(detail::words_per_sample(sample, cfg));

  // --- chi-squared selection, one block of accumulated counts per window length
  const std::size_t n_classes = model.class_universe.size();
  std::vector<WordKey> selected;
  std::uint64_t distinct_keys = 0;
  const auto run_selection = [&](bool keep_everything) {
    selected.clear();
    distinct_keys = 0;
    std::unordered_map<PackedKey, std::uint32_t, PackedKeyHash> slot_of;
    std::vector<double> counts;
    for (const auto w : cfg.window_lengths) {
      if (!detail::window_usable(w, cfg.word_length)) continue;
      slot_of.clear();
      counts.clear();
      for (const auto& sample : augmented.samples) {
        if (sample.length() < w) continue;
        const std::size_t cls = class_slot.at(sample.label);
        for (std::size_t d = 0; d < sample.dim_count(); ++d) {
          const std::uint32_t dim_id = static_cast<std::uint32_t>(d);
          const std::uint32_t key_dim = cfg.multivariate_ids ? dim_id : 0;
          const auto* edges = model.sfa.edges_for(dim_id, w);
          if (edges == nullptr) continue;
          detail::emit_window_words(sample.dimensions[d], *edges, key_dim, w, cfg,
                                    [&](const PackedKey& key) {
                                      auto [it, inserted] = slot_of.try_emplace(
                                          key, static_cast<std::uint32_t>(slot_of.size()));
                                      if (inserted) counts.resize(counts.size() + n_classes, 0.0);
                                      counts[it->second * n_classes + cls] += 1.0;
                                    });
        }
      }
      distinct_keys += slot_of.size();
      for (const auto& [key, slot] : slot_of) {
        const std::span<const double> per_class(counts.data() + slot * n_classes, n_classes);
        if (keep_everything || chi2_statistic(per_class, class_totals) >= options.chi2_threshold)
          selected.push_back(unpack_key(key, cfg.word_length));
      }
    }
  };
  run_selection(false);
  if (selected.empty() && distinct_keys > 0) {
    std::cerr << "warning: no feature reached the chi-squared threshold " << options.chi2_threshold
              << "; keeping all " << distinct_keys << " features\n";
    run_selection(true);
    model.stats.keep_all_fallback = true;
  }

  model.stats.pre_selection_feature_count = distinct_keys;
  {
    const long double n_max = static_cast<long double>(model.max_train_length);
    const long double by_windows = static_cast<long double>(augmented.size()) * n_max * n_max;
    const long double by_words =
        std::pow(static_cast<long double>(cfg.alphabet_size), 2.0L * cfg.word_length) * n_max;
    model.stats.capacity_bound = std::min(by_windows, by_words) * static_cast<long double>(stream_count);
    model.stats.capacity_bound_ok =
        static_cast<long double>(distinct_keys) <= model.stats.capacity_bound;
    if (!model.stats.capacity_bound_ok)
      std::cerr << "warning: pre-selection feature count " << distinct_keys
                << " exceeds the bag feature-space bound\n";
  }

  model.dictionary = FeatureDictionary::from_keys(std::move(selected));
  model.stats.selected_feature_count = model.dictionary.size();
  model.rebuild_packed_index();
  model.rebuild_edge_grid();

  // --- sparse training vectors and the linear model
  std::vector<SparseVector> xs;
  xs.reserve(augmented.size());
  std::vector<std::string> ys;
  ys.reserve(augmented.size());
  std::vector<double> dense(model.dictionary.size(), 0.0);
  std::vector<std::uint32_t> touched;
  for (const auto& sample : augmented.samples) {
    xs.push_back(detail::vectorize_sample(sample, model, dense, touched));
    ys.push_back(sample.label);
  }
  LinearParams lin = options.linear;
  lin.seed = options.seed;
  model.linear = train_linear(xs, ys, model.dictionary.size(), lin, nullptr, model.class_universe);
  return model;
}

struct DatasetPrediction {
  std::vector<std::string> labels;
  std::vector<std::vector<double>> scores;  // per sample, aligned with the model's class list
  double accuracy = 0.0;                    // over labelled test samples
  std::size_t labelled = 0;
};

/// Apply the identical preprocessing chain (derivatives, bins, dictionary)
/// and return argmax labels; accuracy is reported over labelled samples.
inline DatasetPrediction predict_dataset(const MuseModel& model, const Dataset& test) {
  if (test.samples.empty()) throw Error("test set is empty");
  if (test.dim_count() != model.input_dim_count)
    throw Error("test set has " + std::to_string(test.dim_count()) + " dimensions, model expects " +
                std::to_string(model.input_dim_count));

  const Dataset augmented = model.config.use_derivatives ? add_derivatives(test) : test;
  DatasetPrediction out;
  out.labels.reserve(test.size());
  std::vector<double> dense(model.dictionary.size(), 0.0);
  std::vector<std::uint32_t> touched;
  std::size_t correct = 0;
  for (const auto& sample : augmented.samples) {
    const SparseVector x = detail::vectorize_sample(sample, model, dense, touched);
    Prediction p = predict_linear(model.linear, x);
    if (sample.labelled()) {
      ++out.labelled;
      if (p.label == sample.label) ++correct;
    }
    out.labels.push_back(std::move(p.label));
    out.scores.push_back(std::move(p.scores));
  }
  out.accuracy = out.labelled == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(out.labelled);
  return out;
}

// ---------------------------------------------------------------------------
// Cross-validation over the word-length / binning grid
// ---------------------------------------------------------------------------

struct CvRow {
  int word_length;
  BinningMode binning;
  int fold;
  double accuracy;
};

struct CvResult {
  int best_word_length = 2;
  BinningMode best_binning = BinningMode::equi_depth;
  std::vector<CvRow> rows;
};

inline const std::vector<int>& cv_word_length_grid() {
  static const std::vector<int> grid{2, 4, 6};
  return grid;
}

/// Stratified fold ids (0..folds-1), one per sample; deterministic per seed.
inline std::vector<int> stratified_folds(const Dataset& ds, int folds, std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) by_class[ds.samples[i].label].push_back(i);
  std::vector<int> fold_of(ds.samples.size(), 0);
  std::mt19937_64 rng(seed);
  int next = 0;
  for (auto& [label, idxs] : by_class) {
    std::shuffle(idxs.begin(), idxs.end(), rng);
    for (const auto idx : idxs) {
      fold_of[idx] = next;
      next = (next + 1) % folds;
    }
  }
  return fold_of;
}

/// Evaluate the six (word length, binning) configurations with stratified
/// folds and pick the highest mean fold accuracy; ties break towards the
/// smaller word length, then equi_depth. Fold count is min(10, N).
inline CvResult cross_validate(const Dataset& train, ExtractionConfig cfg, const FitOptions& options = {}) {
  detail::check_trainable(train);
  if (cfg.window_lengths.empty()) cfg.window_lengths = default_window_lengths(train);

  const int folds = static_cast<int>(std::min<std::size_t>(10, train.size()));
  if (folds < 2) throw Error("cross-validation needs at least 2 samples");
  const std::vector<int> fold_of = stratified_folds(train, folds, options.seed);

  // Folds whose training part would be degenerate are skipped for every
  // configuration alike.
  std::vector<int> usable;
  for (int f = 0; f < folds; ++f) {
    Dataset part;
    bool has_val = false;
    for (std::size_t i = 0; i < train.samples.size(); ++i) {
      if (fold_of[i] == f)
        has_val = true;
      else
        part.samples.push_back(train.samples[i]);
    }
    part.rebuild_class_universe();
    if (has_val && part.class_universe.size() >= 2) usable.push_back(f);
  }
  if (usable.empty()) throw Error("no usable cross-validation fold");

  struct Cell {
    int config_idx;
    int fold;
  };
  const auto& grid = cv_word_length_grid();
  const std::vector<BinningMode> modes{BinningMode::equi_depth, BinningMode::equi_frequency};
  std::vector<Cell> cells;
  for (int g = 0; g < static_cast<int>(grid.size() * modes.size()); ++g)
    for (const auto f : usable) cells.push_back({g, f});
  std::vector<double> cell_accuracy(cells.size(), 0.0);

  std::atomic<std::size_t> next_cell{0};
  const auto worker = [&] {
    while (true) {
      const std::size_t at = next_cell.fetch_add(1);
      if (at >= cells.size()) return;
      const auto [config_idx, fold] = cells[at];
      const int l = grid[static_cast<std::size_t>(config_idx) / modes.size()];
      const BinningMode mode = modes[static_cast<std::size_t>(config_idx) % modes.size()];

      Dataset fit_part, val_part;
      fit_part.derivatives_added = val_part.derivatives_added = train.derivatives_added;
      for (std::size_t i = 0; i < train.samples.size(); ++i)
        (fold_of[i] == fold ? val_part : fit_part).samples.push_back(train.samples[i]);
      fit_part.rebuild_class_universe();
      val_part.rebuild_class_universe();

      FitOptions fold_options = options;
      fold_options.threads = 1;
      const MuseModel model = fit(fit_part, cfg, l, mode, fold_options);
      cell_accuracy[at] = predict_dataset(model, val_part).accuracy;
    }
  };
  const int thread_count = std::max(1, std::min<int>(options.threads, static_cast<int>(cells.size())));
  if (thread_count == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(thread_count));
    for (int t = 0; t < thread_count; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  CvResult result;
  double best_mean = -1.0;
  for (std::size_t g = 0; g < grid.size() * modes.size(); ++g) {
    const int l = grid[g / modes.size()];
    const BinningMode mode = modes[g % modes.size()];
    double sum = 0.0;
    int used = 0;
    for (std::size_t at = 0; at < cells.size(); ++at) {
      if (cells[at].config_idx != static_cast<int>(g)) continue;
      result.rows.push_back({l, mode, cells[at].fold, cell_accuracy[at]});
      sum += cell_accuracy[at];
      ++used;
    }
    const double mean = sum / static_cast<double>(used);
    if (mean > best_mean) {
      best_mean = mean;
      result.best_word_length = l;
      result.best_binning = mode;
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Model file round-trip (versioned JSON container)
// ---------------------------------------------------------------------------

inline void save_model(const MuseModel& model, const std::string& path) {
  nlohmann::json j;
  j["format"] = "muse-model";
  j["format_version"] = kModelFormatVersion;
  j["class_universe"] = model.class_universe;
  j["input_dim_count"] = model.input_dim_count;
  j["max_train_length"] = model.max_train_length;

  j["config"] = {{"window_lengths", model.config.window_lengths},
                 {"word_length", model.config.word_length},
                 {"alphabet_size", model.config.alphabet_size},
                 {"use_bigrams", model.config.use_bigrams},
                 {"use_derivatives", model.config.use_derivatives},
                 {"multivariate_ids", model.config.multivariate_ids},
                 {"include_dc", model.config.include_dc},
                 {"bin_sample_cap", model.config.bin_sample_cap},
                 {"bigram_adjacent", model.config.bigram_adjacent}};

  j["sfa"] = {{"binning", to_string(model.sfa.binning)}};
  auto& edges = j["sfa"]["edges"] = nlohmann::json::array();
  for (const auto& [key, per_position] : model.sfa.edges)
    edges.push_back({{"dim", key.first}, {"window", key.second}, {"thresholds", per_position}});

  auto& features = j["features"] = nlohmann::json::array();
  for (const auto& key : model.dictionary.keys) features.push_back(canonical_key_string(key));

  j["linear"] = {{"classes", model.linear.classes},
                 {"regularization_c", model.linear.params.regularization_c},
                 {"bias", model.linear.params.bias},
                 {"tolerance", model.linear.params.tolerance},
                 {"weights", model.linear.weights}};

  j["stats"] = {{"pre_selection_feature_count", model.stats.pre_selection_feature_count},
                {"selected_feature_count", model.stats.selected_feature_count},
                {"capacity_bound_ok", model.stats.capacity_bound_ok},
                {"keep_all_fallback", model.stats.keep_all_fallback}};

  std::ofstream out(path);
  if (!out) throw Error("cannot write model file '" + path + "'");
  out << j.dump();
  out << '\n';
  if (!out) throw Error("failed writing model file '" + path + "'");
}

inline MuseModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open model file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("corrupt model file '" + path + "': " + e.what());
  }

  try {
    if (j.value("format", "") != "muse-model") throw Error("not a muse model file");
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion)
      throw Error("unsupported model format version " + std::to_string(version) + " (expected " +
                  std::to_string(kModelFormatVersion) + ")");

    MuseModel model;
    model.class_universe = j.at("class_universe").get<std::vector<std::string>>();
    model.input_dim_count = j.at("input_dim_count").get<std::size_t>();
    model.max_train_length = j.at("max_train_length").get<std::size_t>();

    const auto& jc = j.at("config");
    model.config.window_lengths = jc.at("window_lengths").get<std::vector<std::uint32_t>>();
    model.config.word_length = jc.at("word_length").get<int>();
    model.config.alphabet_size = jc.at("alphabet_size").get<int>();
    model.config.use_bigrams = jc.at("use_bigrams").get<bool>();
    model.config.use_derivatives = jc.at("use_derivatives").get<bool>();
    model.config.multivariate_ids = jc.at("multivariate_ids").get<bool>();
    model.config.include_dc = jc.at("include_dc").get<bool>();
    model.config.bin_sample_cap = jc.at("bin_sample_cap").get<std::uint64_t>();
    model.config.bigram_adjacent = jc.at("bigram_adjacent").get<bool>();

    model.sfa.word_length = model.config.word_length;
    model.sfa.alphabet_size = model.config.alphabet_size;
    model.sfa.include_dc = model.config.include_dc;
    model.sfa.binning = binning_mode_from_string(j.at("sfa").at("binning").get<std::string>());
    for (const auto& e : j.at("sfa").at("edges")) {
      const std::uint32_t dim = e.at("dim").get<std::uint32_t>();
      const std::uint32_t window = e.at("window").get<std::uint32_t>();
      model.sfa.edges[{dim, window}] = e.at("thresholds").get<std::vector<std::vector<double>>>();
    }

    std::vector<WordKey> keys;
    for (const auto& text : j.at("features")) keys.push_back(parse_word_key(text.get<std::string>()));
    model.dictionary = FeatureDictionary::from_keys(std::move(keys));

    const auto& jl = j.at("linear");
    model.linear.classes = jl.at("classes").get<std::vector<std::string>>();
    model.linear.params.regularization_c = jl.at("regularization_c").get<double>();
    model.linear.params.bias = jl.at("bias").get<double>();
    model.linear.params.tolerance = jl.at("tolerance").get<double>();
    model.linear.weights = jl.at("weights").get<std::vector<std::vector<double>>>();
    model.linear.feature_count = model.dictionary.size();

    if (j.contains("stats")) {
      const auto& js = j.at("stats");
      model.stats.pre_selection_feature_count = js.at("pre_selection_feature_count").get<std::uint64_t>();
      model.stats.selected_feature_count = js.at("selected_feature_count").get<std::uint64_t>();
      model.stats.capacity_bound_ok = js.at("capacity_bound_ok").get<bool>();
      model.stats.keep_all_fallback = js.at("keep_all_fallback").get<bool>();
    }

    const std::size_t expected_rows = model.linear.classes.size() == 2 ? 1 : model.linear.classes.size();
    if (model.linear.weights.size() != expected_rows) throw Error("weight row count mismatch");
    for (const auto& row : model.linear.weights)
      if (row.size() != model.dictionary.size() + 1) throw Error("weight vector length mismatch");

    model.rebuild_packed_index();
    model.rebuild_edge_grid();
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw Error("corrupt model file '" + path + "': " + e.what());
  }
}

}  // namespace muse
