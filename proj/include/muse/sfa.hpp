#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "muse/core.hpp"

namespace muse {

/// How quantization boundaries are derived from training coefficients:
/// equi_depth splits the value range into equal-width intervals,
/// equi_frequency places boundaries so each bin holds an equal number of
/// training values.
enum class BinningMode { equi_depth, equi_frequency };

inline std::string to_string(BinningMode mode) {
  return mode == BinningMode::equi_depth ? "equi_depth" : "equi_frequency";
}

inline BinningMode binning_mode_from_string(const std::string& s) {
  if (s == "equi_depth" || s == "depth") return BinningMode::equi_depth;
  if (s == "equi_frequency" || s == "freq") return BinningMode::equi_frequency;
  throw Error("unknown binning mode '" + s + "'");
}

/// Fit the c-1 ascending bin edges for one (dimension, window, position)
/// collection of training coefficients. Degenerate all-equal collections
/// produce equal edges; quantize's strictly-greater rule then maps every
/// value to the last letter.
inline std::vector<double> fit_bin_edges(std::vector<double> values, int alphabet_size,
                                         BinningMode mode) {
  if (values.empty()) throw Error("cannot fit bin edges on an empty collection");
  if (alphabet_size < 2) throw Error("alphabet size must be at least 2");
  std::vector<double> edges(static_cast<std::size_t>(alphabet_size) - 1);

  if (mode == BinningMode::equi_depth) {
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it, hi = *hi_it;
    const double width = (hi - lo) / static_cast<double>(alphabet_size);
    for (int k = 1; k < alphabet_size; ++k)
      edges[static_cast<std::size_t>(k) - 1] = lo + width * static_cast<double>(k);
  } else {
    std::sort(values.begin(), values.end());
    const std::size_t size = values.size();
    for (int k = 1; k < alphabet_size; ++k) {
      // Edge at the k*(size/c)-th order statistic, midpoint convention.
      const std::size_t idx =
          static_cast<std::size_t>(k) * size / static_cast<std::size_t>(alphabet_size);
      double edge;
      if (idx == 0)
        edge = values.front();
      else if (idx >= size)
        edge = values.back();
      else
        edge = 0.5 * (values[idx - 1] + values[idx]);
      edges[static_cast<std::size_t>(k) - 1] = edge;
    }
  }
  return edges;
}

/// Letter index of one coefficient: the index of the first edge strictly
/// greater than the value; values at or above the last edge map to c-1.
inline int letter_index(double value, std::span<const double> edges) {
  return static_cast<int>(std::upper_bound(edges.begin(), edges.end(), value) - edges.begin());
}

/// Quantize one coefficient vector into a word of letters 'a'..'a'+c-1.
/// edges_per_position holds one ascending edge list per coefficient position.
inline std::string quantize(std::span<const double> coefs,
                            const std::vector<std::vector<double>>& edges_per_position) {
  if (coefs.size() > edges_per_position.size())
    throw Error("no fitted edges for some coefficient positions");
  std::string word(coefs.size(), 'a');
  for (std::size_t p = 0; p < coefs.size(); ++p)
    word[p] = static_cast<char>('a' + letter_index(coefs[p], edges_per_position[p]));
  return word;
}

/// Trained symbolic Fourier approximation: the transform parameters plus one
/// edge list per (dim_id, window_len, coefficient position). Immutable after
/// fitting; safe to share across threads.
struct SfaModel {
  int word_length = 4;      // number of Fourier values kept (real+imag counted separately)
  int alphabet_size = 4;
  BinningMode binning = BinningMode::equi_depth;
  bool include_dc = false;

  /// (dim_id, window_len) -> per-position edge lists (word_length of them).
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::vector<double>>> edges;

  const std::vector<std::vector<double>>* edges_for(std::uint32_t dim_id,
                                                    std::uint32_t window_len) const {
    const auto it = edges.find({dim_id, window_len});
    return it == edges.end() ? nullptr : &it->second;
  }

  const std::vector<std::vector<double>>& edges_for_checked(std::uint32_t dim_id,
                                                            std::uint32_t window_len) const {
    const auto* e = edges_for(dim_id, window_len);
    if (e == nullptr)
      throw Error("no fitted SFA bins for dim " + std::to_string(dim_id) + ", window " +
                  std::to_string(window_len));
    return *e;
  }
};

}  // namespace muse
