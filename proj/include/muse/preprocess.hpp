#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "muse/core.hpp"

namespace muse {

/// Population standard deviation below which a window counts as constant.
inline constexpr double kDegenerateStd = 1e-8;

inline double mean_of(const Series& values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

/// Population (1/n) standard deviation.
inline double population_std(const Series& values) {
  const double mu = mean_of(values);
  double acc = 0.0;
  for (double v : values) acc += (v - mu) * (v - mu);
  return std::sqrt(acc / static_cast<double>(values.size()));
}

/// Shift/scale to mean 0 and population standard deviation 1.
/// Near-constant input (sd < 1e-8) maps to all zeros.
inline Series z_normalize(const Series& window) {
  if (window.empty()) throw Error("cannot normalize an empty series");
  const double mu = mean_of(window);
  const double sd = population_std(window);
  Series out(window.size());
  if (sd < kDegenerateStd) return out;  // zeros
  const double inv = 1.0 / sd;
  for (std::size_t i = 0; i < window.size(); ++i) out[i] = (window[i] - mu) * inv;
  return out;
}

/// Z-normalize every dimension of every sample over its whole length.
inline Dataset z_normalize_dataset(const Dataset& ds) {
  Dataset out = ds;
  for (auto& sample : out.samples)
    for (auto& dim : sample.dimensions) dim = z_normalize(dim);
  return out;
}

/// Append the derivative stream of each dimension: the absolute pairwise
/// differences, left-padded with a single 0 so every dimension keeps length n.
/// Dimension m+i is the derivative of dimension i. Refuses datasets that were
/// already augmented.
inline Dataset add_derivatives(const Dataset& ds) {
  if (ds.derivatives_added) throw Error("derivatives were already added to this dataset");
  Dataset out = ds;
  for (std::size_t si = 0; si < out.samples.size(); ++si) {
    auto& sample = out.samples[si];
    const std::size_t m = sample.dim_count();
    const std::size_t n = sample.length();
    if (n < 2)
      throw Error("sample " + std::to_string(si) + " is too short for derivatives (length " +
                  std::to_string(n) + ")");
    sample.dimensions.reserve(2 * m);
    for (std::size_t d = 0; d < m; ++d) {
      const Series& src = sample.dimensions[d];
      Series deriv(n, 0.0);
      for (std::size_t j = 1; j < n; ++j) deriv[j] = std::abs(src[j] - src[j - 1]);
      sample.dimensions.push_back(std::move(deriv));
    }
  }
  out.derivatives_added = true;
  return out;
}

/// Perturb every value with an independent draw from Normal(0, sd^2).
/// Deterministic for a fixed seed; per-sample engines are seeded with
/// seed XOR sample index so samples can be processed independently.
inline Dataset add_gaussian_noise(const Dataset& ds, double sd, std::uint64_t seed) {
  if (sd < 0.0) throw Error("noise standard deviation must be non-negative");
  Dataset out = ds;
  if (sd == 0.0) return out;
  for (std::size_t si = 0; si < out.samples.size(); ++si) {
    std::mt19937_64 rng(seed ^ static_cast<std::uint64_t>(si));
    std::normal_distribution<double> noise(0.0, sd);
    for (auto& dim : out.samples[si].dimensions)
      for (double& v : dim) v += noise(rng);
  }
  return out;
}

}  // namespace muse
