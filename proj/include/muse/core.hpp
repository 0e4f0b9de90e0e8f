#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace muse {

/// Error type thrown by every operation in this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A univariate time series: an ordered sequence of finite real values.
using Series = std::vector<double>;

/// One labelled sample: m synchronized numeric streams of equal length.
/// An empty label marks an unlabelled sample.
struct MultivariateSeries {
  std::vector<Series> dimensions;
  std::string label;

  std::size_t dim_count() const { return dimensions.size(); }

  /// Per-sample length n (all dimensions are equally long).
  std::size_t length() const { return dimensions.empty() ? 0 : dimensions.front().size(); }

  bool labelled() const { return !label.empty(); }
};

/// A set of samples sharing the same number of dimensions m.
struct Dataset {
  std::vector<MultivariateSeries> samples;
  /// Distinct labels, sorted. Unlabelled samples do not contribute.
  std::vector<std::string> class_universe;
  /// Set once derivative streams have been appended; guards double application.
  bool derivatives_added = false;

  std::size_t size() const { return samples.size(); }

  std::size_t dim_count() const { return samples.empty() ? 0 : samples.front().dim_count(); }

  std::size_t max_length() const {
    std::size_t n = 0;
    for (const auto& s : samples) n = std::max(n, s.length());
    return n;
  }

  void rebuild_class_universe() {
    std::set<std::string> labels;
    for (const auto& s : samples)
      if (s.labelled()) labels.insert(s.label);
    class_universe.assign(labels.begin(), labels.end());
  }
};

/// Identifier of one bag-of-patterns feature: the dimension it came from,
/// the window length, and the letters of the word (plus the preceding
/// window's word for bigrams). Canonical text form:
///   d<dim>_w<len>_<letters>            (unigram)
///   d<dim>_w<len>_<prev>_<letters>     (bigram)
struct WordKey {
  std::uint32_t dim_id = 0;
  std::uint32_t window_len = 0;
  std::string letters;
  std::string prev_letters;  // empty for unigrams

  bool is_bigram() const { return !prev_letters.empty(); }

  friend auto operator<=>(const WordKey&, const WordKey&) = default;
};

inline bool valid_letters(std::string_view s) {
  if (s.empty()) return false;
  for (char ch : s)
    if (ch < 'a' || ch > 'z') return false;
  return true;
}

/// Deterministic, injective rendering of a key.
inline std::string canonical_key_string(const WordKey& key) {
  std::string out;
  out.reserve(8 + key.letters.size() + key.prev_letters.size());
  out += 'd';
  out += std::to_string(key.dim_id);
  out += "_w";
  out += std::to_string(key.window_len);
  out += '_';
  if (key.is_bigram()) {
    out += key.prev_letters;
    out += '_';
  }
  out += key.letters;
  return out;
}

/// Inverse of canonical_key_string. Throws Error on malformed input.
inline WordKey parse_word_key(std::string_view text) {
  const auto fail = [&] { throw Error("malformed word key: '" + std::string(text) + "'"); };

  std::vector<std::string_view> tokens;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '_') {
      tokens.push_back(text.substr(start, i - start));
      start = i + 1;
    }
  }
  if (tokens.size() != 3 && tokens.size() != 4) fail();
  if (tokens[0].size() < 2 || tokens[0][0] != 'd') fail();
  if (tokens[1].size() < 2 || tokens[1][0] != 'w') fail();

  const auto parse_uint = [&](std::string_view s) -> std::uint32_t {
    std::uint64_t v = 0;
    if (s.empty()) fail();
    for (char ch : s) {
      if (ch < '0' || ch > '9') fail();
      v = v * 10 + static_cast<std::uint64_t>(ch - '0');
      if (v > 0xffffffffULL) fail();
    }
    // no leading zeros ("d01" would not round-trip)
    if (s.size() > 1 && s[0] == '0') fail();
    return static_cast<std::uint32_t>(v);
  };

  WordKey key;
  key.dim_id = parse_uint(tokens[0].substr(1));
  key.window_len = parse_uint(tokens[1].substr(1));
  if (tokens.size() == 4) {
    key.prev_letters = std::string(tokens[2]);
    key.letters = std::string(tokens[3]);
    if (key.prev_letters.size() != key.letters.size()) fail();
  } else {
    key.letters = std::string(tokens[2]);
  }
  if (!valid_letters(key.letters)) fail();
  if (key.is_bigram() && !valid_letters(key.prev_letters)) fail();
  return key;
}

/// One entry of a sparse feature vector.
struct SparseEntry {
  std::uint32_t index;
  double value;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Sparse real vector with entries in ascending index order.
using SparseVector = std::vector<SparseEntry>;

/// Histogram of word occurrences for one sample. Zero-count entries are
/// never stored; the total equals the number of words emitted.
struct BagOfPatterns {
  std::map<WordKey, std::uint32_t> counts;

  void add(const WordKey& key, std::uint32_t n = 1) {
    if (n == 0) return;
    counts[key] += n;
  }

  void merge(const BagOfPatterns& other) {
    for (const auto& [key, n] : other.counts) add(key, n);
  }

  std::uint64_t total() const {
    std::uint64_t t = 0;
    for (const auto& [key, n] : counts) t += n;
    return t;
  }
};

}  // namespace muse
