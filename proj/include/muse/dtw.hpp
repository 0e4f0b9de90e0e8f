#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "muse/core.hpp"
#include "muse/preprocess.hpp"

namespace muse {

/// Baseline configuration: 1-NN with dimension-independent DTW.
struct DtwConfig {
  /// Sakoe-Chiba band as a fraction of the longer series; 1.0 = full window.
  double window_fraction = 1.0;
  /// Whole-series per-dimension z-normalization before distances.
  bool normalize = true;
  /// Optional label-preserving speedups (first/last-point lower bound and
  /// early-abandoning rows against the best distance so far).
  bool use_pruning = false;
};

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Banded DTW with squared pointwise cost. Cells with |i-j| >= band are
/// excluded, so band = 1 walks the diagonal only and band >= max length is
/// the full window. Rows whose minimum exceeds the cutoff abandon early and
/// report +inf (only used with a finite cutoff).
inline double dtw_banded(const Series& a, const Series& b, std::size_t band, double cutoff) {
  const std::size_t la = a.size(), lb = b.size();
  if (la == 0 || lb == 0) throw Error("DTW requires non-empty series");
  const std::size_t diff = la > lb ? la - lb : lb - la;
  if (diff >= band) return kInf;  // no monotone path fits inside the band

  std::vector<double> prev(lb, kInf), curr(lb, kInf);
  for (std::size_t i = 0; i < la; ++i) {
    const std::size_t j_begin = i + 1 > band ? i + 1 - band : 0;
    const std::size_t j_end = std::min(lb, i + band);  // exclusive
    double row_min = kInf;
    for (std::size_t j = j_begin; j < j_end; ++j) {
      const double d = (a[i] - b[j]) * (a[i] - b[j]);
      double best;
      if (i == 0 && j == 0)
        best = 0.0;
      else if (i == 0)
        best = curr[j - 1];
      else if (j == 0)
        best = prev[0];
      else
        best = std::min({prev[j - 1], prev[j], curr[j - 1]});
      curr[j] = best + d;
      row_min = std::min(row_min, curr[j]);
    }
    if (row_min > cutoff) return kInf;
    std::swap(prev, curr);
    std::fill(curr.begin(), curr.end(), kInf);
  }
  return prev[lb - 1];
}

inline std::size_t band_of(const Series& a, const Series& b, double window_fraction) {
  if (window_fraction <= 0.0 || window_fraction > 1.0)
    throw Error("warping window fraction must be in (0, 1]");
  const std::size_t longest = std::max(a.size(), b.size());
  return static_cast<std::size_t>(std::ceil(window_fraction * static_cast<double>(longest)));
}

/// Mandatory first/last alignments give a cheap lower bound on DTW.
inline double dtw_lower_bound(const Series& a, const Series& b) {
  const double d0 = (a.front() - b.front()) * (a.front() - b.front());
  const double d1 = (a.back() - b.back()) * (a.back() - b.back());
  return d0 + d1;
}

}  // namespace detail

/// Classic DTW with squared pointwise cost and a Sakoe-Chiba band of width
/// ceil(fraction * max(|a|, |b|)). No final square root.
inline double dtw_distance(const Series& a, const Series& b, double window_fraction = 1.0) {
  return detail::dtw_banded(a, b, detail::band_of(a, b, window_fraction), detail::kInf);
}

/// Dimension-independent DTW: the sum of per-dimension DTW distances.
inline double dtwi_distance(const MultivariateSeries& a, const MultivariateSeries& b,
                            const DtwConfig& cfg = {}) {
  if (a.dim_count() != b.dim_count())
    throw Error("dimension count mismatch: " + std::to_string(a.dim_count()) + " vs " +
                std::to_string(b.dim_count()));
  double sum = 0.0;
  for (std::size_t d = 0; d < a.dim_count(); ++d)
    sum += dtw_distance(a.dimensions[d], b.dimensions[d], cfg.window_fraction);
  return sum;
}

struct DtwiResult {
  std::vector<std::string> labels;
  double accuracy = 0.0;      // over labelled test samples
  std::size_t labelled = 0;   // how many test samples had labels
};

/// 1-nearest-neighbor classification under dimension-independent DTW.
/// Ties go to the earlier training sample. Pruning, when enabled, never
/// changes any predicted label.
inline DtwiResult dtwi_classify(const Dataset& train, const Dataset& test, const DtwConfig& cfg = {}) {
  if (train.samples.empty()) throw Error("empty training set");
  for (const auto& s : train.samples)
    if (!s.labelled()) throw Error("unlabelled training sample");
  if (test.samples.empty()) throw Error("empty test set");
  if (train.dim_count() != test.dim_count()) throw Error("train/test dimension count mismatch");

  const Dataset train_n = cfg.normalize ? z_normalize_dataset(train) : train;
  const Dataset test_n = cfg.normalize ? z_normalize_dataset(test) : test;

  DtwiResult result;
  result.labels.reserve(test_n.samples.size());
  std::size_t correct = 0;

  for (std::size_t t = 0; t < test_n.samples.size(); ++t) {
    const auto& query = test_n.samples[t];
    double best = detail::kInf;
    std::size_t best_idx = 0;
    for (std::size_t r = 0; r < train_n.samples.size(); ++r) {
      const auto& ref = train_n.samples[r];
      if (ref.dim_count() != query.dim_count()) throw Error("sample dimension mismatch");
      double sum = 0.0;
      bool abandoned = false;
      if (cfg.use_pruning) {
        for (std::size_t d = 0; d < query.dim_count() && !abandoned; ++d)
          if ((sum += detail::dtw_lower_bound(query.dimensions[d], ref.dimensions[d])) >= best)
            abandoned = true;
        sum = 0.0;
      }
      for (std::size_t d = 0; d < query.dim_count() && !abandoned; ++d) {
        const auto band = detail::band_of(query.dimensions[d], ref.dimensions[d], cfg.window_fraction);
        const double cutoff = cfg.use_pruning ? best - sum : detail::kInf;
        const double dist = detail::dtw_banded(query.dimensions[d], ref.dimensions[d], band, cutoff);
        sum += dist;
        if (sum >= best) abandoned = true;  // cannot beat the current nearest neighbour
      }
      if (!abandoned && sum < best) {
        best = sum;
        best_idx = r;
      }
    }
    const std::string& predicted = train_n.samples[best_idx].label;
    result.labels.push_back(predicted);
    if (test_n.samples[t].labelled()) {
      ++result.labelled;
      if (predicted == test_n.samples[t].label) ++correct;
    }
  }
  result.accuracy =
      result.labelled == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(result.labelled);
  return result;
}

}  // namespace muse
