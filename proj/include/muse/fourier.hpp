#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "muse/core.hpp"
#include "muse/preprocess.hpp"

namespace muse {

/// Truncated Fourier transform of one (already z-normalized) window.
///
/// Returns word_length real values: the interleaved real/imaginary parts of
/// the lowest-frequency word_length/2 complex DFT coefficients, starting at
/// coefficient index 1. A z-normalized window has zero mean, so the DC
/// coefficient carries no information and is skipped; include_dc restores it
/// for ablation (index 0 first, its always-zero imaginary part included).
inline std::vector<double> truncated_fourier(std::span<const double> window, int word_length,
                                             bool include_dc = false) {
  const std::size_t w = window.size();
  if (word_length <= 0 || word_length % 2 != 0) throw Error("word length must be even and positive");
  if (static_cast<std::size_t>(word_length) > w) throw Error("word length exceeds window length");

  std::vector<double> out(static_cast<std::size_t>(word_length));
  const int first_coef = include_dc ? 0 : 1;
  for (int j = 0; j < word_length / 2; ++j) {
    const int k = first_coef + j;
    double re = 0.0, im = 0.0;
    const double step = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(w);
    for (std::size_t t = 0; t < w; ++t) {
      const double angle = step * static_cast<double>(t);
      re += window[t] * std::cos(angle);
      im += window[t] * std::sin(angle);
    }
    out[2 * static_cast<std::size_t>(j)] = re;
    out[2 * static_cast<std::size_t>(j) + 1] = im;
  }
  return out;
}

namespace detail {

/// Incremental sliding DFT over all windows of one series.
///
/// Maintains the unnormalized coefficients X_k of the raw window and the
/// rolling sum/sum-of-squares, advancing each by O(l) per offset:
///   X_k(a+1) = (X_k(a) - x_a + x_{a+w}) * e^{2 pi i k / w}
/// Z-normalizing a window divides every k>=1 coefficient by the window's
/// population standard deviation (the mean shift only affects k=0), so the
/// per-window values are X_k / sigma. State is recomputed from scratch every
/// resync_interval offsets to stop floating-point drift from accumulating.
inline constexpr int kMaxSpectrumValues = 32;

template <typename Fn>
void for_each_window_spectrum(const Series& series, std::size_t window_len, int word_length,
                              bool include_dc, Fn&& fn) {
  const std::size_t n = series.size();
  const std::size_t w = window_len;
  if (w == 0 || n < w) return;
  if (word_length > kMaxSpectrumValues) throw Error("word length too large for the sliding transform");
  const int half = word_length / 2;
  const int first_coef = include_dc ? 0 : 1;
  constexpr std::size_t resync_interval = 128;
  constexpr double degenerate_std = 1e-8;

  std::array<std::complex<double>, kMaxSpectrumValues / 2> coefs;
  std::array<std::complex<double>, kMaxSpectrumValues / 2> rotators;
  for (int j = 0; j < half; ++j) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(first_coef + j) /
                         static_cast<double>(w);
    rotators[static_cast<std::size_t>(j)] = std::polar(1.0, angle);
  }

  double sum = 0.0, sum_sq = 0.0;
  const auto recompute = [&](std::size_t offset) {
    sum = 0.0;
    sum_sq = 0.0;
    for (std::size_t t = 0; t < w; ++t) {
      const double v = series[offset + t];
      sum += v;
      sum_sq += v * v;
    }
    for (int j = 0; j < half; ++j) {
      const int k = first_coef + j;
      const double step = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(w);
      // recursive rotation instead of per-element trig; drift is re-zeroed at
      // every resync and stays orders below the 1e-6 contract
      const std::complex<double> twiddle = std::polar(1.0, step);
      std::complex<double> phase{1.0, 0.0};
      std::complex<double> acc{0.0, 0.0};
      for (std::size_t t = 0; t < w; ++t) {
        acc += series[offset + t] * phase;
        phase *= twiddle;
      }
      coefs[static_cast<std::size_t>(j)] = acc;
    }
  };

  std::array<double, kMaxSpectrumValues> row{};
  const std::size_t count = n - w + 1;
  for (std::size_t a = 0; a < count; ++a) {
    if (a % resync_interval == 0) {
      recompute(a);
    } else {
      const double gone = series[a - 1];
      const double came = series[a + w - 1];
      sum += came - gone;
      sum_sq += came * came - gone * gone;
      for (int j = 0; j < half; ++j)
        coefs[static_cast<std::size_t>(j)] =
            (coefs[static_cast<std::size_t>(j)] + (came - gone)) * rotators[static_cast<std::size_t>(j)];
    }

    const double mean = sum / static_cast<double>(w);
    const double var = std::max(0.0, sum_sq / static_cast<double>(w) - mean * mean);
    const double sd = std::sqrt(var);

    if (sd < degenerate_std) {
      std::fill(row.begin(), row.begin() + word_length, 0.0);
    } else {
      const double inv = 1.0 / sd;
      for (int j = 0; j < half; ++j) {
        std::complex<double> z = coefs[static_cast<std::size_t>(j)];
        if (include_dc && first_coef + j == 0) {
          // DC of a z-normalized window is identically zero.
          z = {0.0, 0.0};
        } else {
          z *= inv;
        }
        row[2 * static_cast<std::size_t>(j)] = z.real();
        row[2 * static_cast<std::size_t>(j) + 1] = z.imag();
      }
    }
    fn(a, std::span<const double>(row.data(), static_cast<std::size_t>(word_length)));
  }
}

}  // namespace detail

/// Fourier coefficients of every z-normalized window of length window_len,
/// one row per offset. Matches the per-window definition
/// truncated_fourier(z_normalize(window), l) within 1e-6; computed with an
/// incremental update (O(n*l) per window length instead of O(n*w)).
inline std::vector<std::vector<double>> sliding_fourier(const Series& series, std::size_t window_len,
                                                        int word_length, bool include_dc = false) {
  if (word_length <= 0 || word_length % 2 != 0) throw Error("word length must be even and positive");
  if (window_len > 0 && static_cast<std::size_t>(word_length) > window_len)
    throw Error("word length exceeds window length");
  std::vector<std::vector<double>> rows;
  if (window_len == 0 || series.size() < window_len) return rows;
  rows.reserve(series.size() - window_len + 1);
  detail::for_each_window_spectrum(series, window_len, word_length, include_dc,
                                   [&](std::size_t, std::span<const double> row) {
                                     rows.emplace_back(row.begin(), row.end());
                                   });
  return rows;
}

}  // namespace muse
