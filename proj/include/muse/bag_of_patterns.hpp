#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "muse/core.hpp"
#include "muse/fourier.hpp"
#include "muse/sfa.hpp"

namespace muse {

/// Switches for feature extraction. Window lengths are shared across
/// dimensions; window lengths longer than a sample simply contribute nothing
/// for that sample.
struct ExtractionConfig {
  std::vector<std::uint32_t> window_lengths;
  int word_length = 4;
  int alphabet_size = 4;
  bool use_bigrams = true;
  bool use_derivatives = true;
  /// When off, every key is emitted with dim_id 0 (univariate ablation).
  bool multivariate_ids = true;
  bool include_dc = false;
  /// Optional cap on training coefficients per (dim, window, position) used
  /// for bin fitting; 0 disables sampling.
  std::uint64_t bin_sample_cap = 0;
  /// Bigrams pair each window with the preceding adjacent window (stride 1)
  /// by default; the alternative pairs the last non-overlapping window
  /// (stride = window length).
  bool bigram_adjacent = true;

  std::size_t bigram_stride(std::uint32_t window_len) const {
    return bigram_adjacent ? 1 : window_len;
  }
};

inline constexpr std::uint32_t kMinWindowLength = 4;

// Packing limits; the canonical text form is unconstrained, these bound the
// fixed-width internal representation only.
inline constexpr int kMaxWordLength = 8;
inline constexpr int kMaxAlphabet = 16;
inline constexpr std::uint32_t kMaxDimId = (1u << 12) - 1;
inline constexpr std::uint32_t kMaxWindowLen = (1u << 18) - 1;

inline void validate_extraction_config(const ExtractionConfig& cfg) {
  if (cfg.word_length < 2 || cfg.word_length % 2 != 0 || cfg.word_length > kMaxWordLength)
    throw Error("word length must be even, in [2, " + std::to_string(kMaxWordLength) + "]");
  if (cfg.alphabet_size < 2 || cfg.alphabet_size > kMaxAlphabet)
    throw Error("alphabet size must be in [2, " + std::to_string(kMaxAlphabet) + "]");
  if (cfg.window_lengths.empty()) throw Error("window length set is empty");
  for (const auto w : cfg.window_lengths) {
    if (w < kMinWindowLength) throw Error("window lengths must be at least 4");
    if (w > kMaxWindowLen) throw Error("window length too large");
  }
}

/// All integer window lengths from 4 to the maximum sample length, optionally
/// thinned to every step-th length for long series.
inline std::vector<std::uint32_t> default_window_lengths(const Dataset& ds, std::uint32_t step = 1) {
  if (ds.samples.empty()) throw Error("cannot derive window lengths from an empty dataset");
  if (step == 0) throw Error("window step must be positive");
  const std::size_t max_len = ds.max_length();
  if (max_len < kMinWindowLength)
    throw Error("maximum sample length " + std::to_string(max_len) + " is below the minimum window length 4");
  std::vector<std::uint32_t> lengths;
  for (std::uint32_t w = kMinWindowLength; w <= static_cast<std::uint32_t>(max_len); w += step)
    lengths.push_back(w);
  return lengths;
}

// ---------------------------------------------------------------------------
// Fixed-width key packing. Words store one letter per 4 bits, so the packed
// form covers word_length <= 8 and alphabet_size <= 16; the canonical text
// form stays the contract.
// ---------------------------------------------------------------------------

using PackedWord = std::uint32_t;

struct PackedKey {
  std::uint64_t gram = 0;   // current word | previous word << 32
  std::uint32_t meta = 0;   // dim_id | window_len << 12 | bigram flag << 30

  friend bool operator==(const PackedKey&, const PackedKey&) = default;
};

struct PackedKeyHash {
  std::size_t operator()(const PackedKey& k) const {
    std::uint64_t x = k.gram ^ (static_cast<std::uint64_t>(k.meta) << 17);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return static_cast<std::size_t>(x);
  }
};

inline PackedKey pack_unigram(std::uint32_t dim_id, std::uint32_t window_len, PackedWord word) {
  return {static_cast<std::uint64_t>(word), dim_id | (window_len << 12)};
}

inline PackedKey pack_bigram(std::uint32_t dim_id, std::uint32_t window_len, PackedWord prev,
                             PackedWord word) {
  return {static_cast<std::uint64_t>(word) | (static_cast<std::uint64_t>(prev) << 32),
          dim_id | (window_len << 12) | (1u << 30)};
}

inline std::string unpack_letters(PackedWord word, int word_length) {
  std::string letters(static_cast<std::size_t>(word_length), 'a');
  for (int p = 0; p < word_length; ++p)
    letters[static_cast<std::size_t>(p)] = static_cast<char>('a' + ((word >> (4 * p)) & 0xf));
  return letters;
}

inline PackedWord pack_letters(std::string_view letters) {
  PackedWord word = 0;
  for (std::size_t p = 0; p < letters.size(); ++p)
    word |= static_cast<PackedWord>(letters[p] - 'a') << (4 * p);
  return word;
}

inline WordKey unpack_key(const PackedKey& key, int word_length) {
  WordKey out;
  out.dim_id = key.meta & 0xfff;
  out.window_len = (key.meta >> 12) & 0x3ffff;
  out.letters = unpack_letters(static_cast<PackedWord>(key.gram & 0xffffffffULL), word_length);
  if (key.meta & (1u << 30))
    out.prev_letters = unpack_letters(static_cast<PackedWord>(key.gram >> 32), word_length);
  return out;
}

inline PackedKey pack_key(const WordKey& key) {
  if (key.dim_id > kMaxDimId || key.window_len > kMaxWindowLen ||
      key.letters.size() > kMaxWordLength)
    throw Error("word key exceeds packed representation limits");
  const PackedWord word = pack_letters(key.letters);
  return key.is_bigram() ? pack_bigram(key.dim_id, key.window_len, pack_letters(key.prev_letters), word)
                         : pack_unigram(key.dim_id, key.window_len, word);
}

/// Read-only open-addressing map from packed keys to feature indices; built
/// once per fitted model, probed on every word of every prediction.
class PackedKeyIndex {
 public:
  PackedKeyIndex() = default;

  explicit PackedKeyIndex(std::span<const PackedKey> keys) {
    std::size_t capacity = 16;
    while (capacity < keys.size() * 2 + 1) capacity *= 2;
    mask_ = capacity - 1;
    slots_.assign(capacity, PackedKey{});
    values_.assign(capacity, kEmpty);
    for (std::size_t i = 0; i < keys.size(); ++i) {
      std::size_t s = PackedKeyHash{}(keys[i]) & mask_;
      while (values_[s] != kEmpty) {
        if (slots_[s] == keys[i]) throw Error("duplicate packed key");
        s = (s + 1) & mask_;
      }
      slots_[s] = keys[i];
      values_[s] = static_cast<std::uint32_t>(i);
    }
    size_ = keys.size();
  }

  /// Feature index of the key, or UINT32_MAX when absent.
  std::uint32_t find(const PackedKey& key) const {
    if (values_.empty()) return kEmpty;
    std::size_t s = PackedKeyHash{}(key) & mask_;
    while (values_[s] != kEmpty) {
      if (slots_[s] == key) return values_[s];
      s = (s + 1) & mask_;
    }
    return kEmpty;
  }

  std::size_t size() const { return size_; }

  static constexpr std::uint32_t kEmpty = 0xffffffffu;

 private:
  std::vector<PackedKey> slots_;
  std::vector<std::uint32_t> values_;
  std::size_t mask_ = 0;
  std::size_t size_ = 0;
};

namespace detail {

/// Words of one (dimension stream, window length): slides the Fourier
/// transform across the stream, quantizes every offset, and reports each
/// unigram to the sink as a packed key. With bigrams enabled, each window at
/// offset a is additionally paired with the word of the preceding window at
/// offset a - bigram_stride(window_len).
template <typename Sink>
void emit_window_words(const Series& values, const std::vector<std::vector<double>>& edges,
                       std::uint32_t key_dim, std::uint32_t window_len, const ExtractionConfig& cfg,
                       Sink&& sink) {
  const int l = cfg.word_length;
  const std::size_t stride = cfg.bigram_stride(window_len);
  thread_local std::vector<PackedWord> history;
  if (cfg.use_bigrams && values.size() >= window_len) {
    const std::size_t need = values.size() - window_len + 1;
    if (history.size() < need) history.resize(need);
  }
  for_each_window_spectrum(values, window_len, l, cfg.include_dc,
                           [&](std::size_t offset, std::span<const double> coefs) {
                             PackedWord word = 0;
                             for (int p = 0; p < l; ++p) {
                               const double v = coefs[static_cast<std::size_t>(p)];
                               const auto& e = edges[static_cast<std::size_t>(p)];
                               PackedWord letter = 0;
                               for (const double threshold : e) letter += threshold <= v ? 1u : 0u;
                               word |= letter << (4 * p);
                             }
                             sink(pack_unigram(key_dim, window_len, word));
                             if (cfg.use_bigrams) {
                               history[offset] = word;
                               if (offset >= stride)
                                 sink(pack_bigram(key_dim, window_len, history[offset - stride], word));
                             }
                           });
}

/// A window can only be transformed when it has at least word_length values.
inline bool window_usable(std::uint32_t window_len, int word_length) {
  return window_len >= static_cast<std::uint32_t>(word_length);
}

/// Number of words one sample emits for one (dimension, window) pair.
inline std::uint64_t words_per_dim_window(std::size_t n, std::uint32_t w,
                                          const ExtractionConfig& cfg) {
  if (n < w || !window_usable(w, cfg.word_length)) return 0;
  const std::uint64_t unigrams = n - w + 1;
  if (!cfg.use_bigrams) return unigrams;
  const std::uint64_t stride = cfg.bigram_stride(w);
  return unigrams + (unigrams > stride ? unigrams - stride : 0);
}

/// Total words one sample emits across all dimensions and window lengths.
inline std::uint64_t words_per_sample(const MultivariateSeries& sample, const ExtractionConfig& cfg) {
  std::uint64_t total = 0;
  for (const auto w : cfg.window_lengths)
    total += static_cast<std::uint64_t>(sample.dim_count()) *
             words_per_dim_window(sample.length(), w, cfg);
  return total;
}

}  // namespace detail

/// Build the bag of patterns of one sample from all of its dimensions
/// (including derivative dimensions if the sample carries them), all window
/// lengths, unigrams and bigrams. Bins must be fitted for every
/// (dim, window) pair the sample can produce.
inline BagOfPatterns build_bag(const MultivariateSeries& sample, const SfaModel& sfa,
                               const ExtractionConfig& cfg) {
  validate_extraction_config(cfg);
  BagOfPatterns bag;
  const std::size_t n = sample.length();
  for (std::size_t d = 0; d < sample.dim_count(); ++d) {
    const std::uint32_t dim_id = static_cast<std::uint32_t>(d);
    const std::uint32_t key_dim = cfg.multivariate_ids ? dim_id : 0;
    for (const auto w : cfg.window_lengths) {
      if (n < w || !detail::window_usable(w, cfg.word_length)) continue;
      const auto& edges = sfa.edges_for_checked(dim_id, w);
      detail::emit_window_words(sample.dimensions[d], edges, key_dim, w, cfg,
                                [&](const PackedKey& key) {
                                  bag.add(unpack_key(key, cfg.word_length));
                                });
    }
  }
  return bag;
}

/// Test harness for the order-invariance property of the bag model: checks
/// that unigram totals over windows lying fully inside the two swapped
/// segments [seg_a, seg_a+seg_len) and [seg_b, seg_b+seg_len) are preserved
/// between a sample and its segment-swapped permutation.
inline bool bag_order_invariance_check(const MultivariateSeries& sample,
                                       const MultivariateSeries& permuted, std::size_t seg_a,
                                       std::size_t seg_b, std::size_t seg_len, const SfaModel& sfa,
                                       const ExtractionConfig& cfg) {
  validate_extraction_config(cfg);
  if (sample.dim_count() != permuted.dim_count() || sample.length() != permuted.length())
    return false;

  const auto inside = [&](std::size_t offset, std::uint32_t w) {
    const std::size_t end = offset + w;
    return (offset >= seg_a && end <= seg_a + seg_len) || (offset >= seg_b && end <= seg_b + seg_len);
  };

  const auto collect = [&](const MultivariateSeries& s) {
    std::map<WordKey, std::uint32_t> counts;
    for (std::size_t d = 0; d < s.dim_count(); ++d) {
      const std::uint32_t dim_id = static_cast<std::uint32_t>(d);
      for (const auto w : cfg.window_lengths) {
        if (s.length() < w || !detail::window_usable(w, cfg.word_length)) continue;
        const auto& edges = sfa.edges_for_checked(dim_id, w);
        detail::for_each_window_spectrum(
            s.dimensions[d], w, cfg.word_length, cfg.include_dc,
            [&](std::size_t offset, std::span<const double> coefs) {
              if (!inside(offset, w)) return;
              WordKey key{dim_id, w, quantize(coefs, edges), {}};
              ++counts[key];
            });
      }
    }
    return counts;
  };

  return collect(sample) == collect(permuted);
}

}  // namespace muse
