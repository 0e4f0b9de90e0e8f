#pragma once

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "muse/core.hpp"

namespace muse {

/// Chi-squared statistic of independence on the 2 x |Y| contingency table
/// (feature count vs rest-of-count per class), with expected counts derived
/// from the class totals. Classes with zero total are excluded. Returns 0
/// when the feature's distribution is exactly proportional to class totals.
inline double chi2_statistic(std::span<const double> feature_counts_per_class,
                             std::span<const double> class_totals) {
  if (feature_counts_per_class.size() != class_totals.size())
    throw Error("per-class counts and totals must align");
  if (class_totals.size() < 2) throw Error("chi-squared needs at least 2 classes");

  double feature_total = 0.0, grand_total = 0.0;
  for (std::size_t c = 0; c < class_totals.size(); ++c) {
    if (class_totals[c] <= 0.0) continue;  // excluded from the table
    feature_total += feature_counts_per_class[c];
    grand_total += class_totals[c];
  }
  const double rest_total = grand_total - feature_total;
  if (feature_total <= 0.0 || rest_total <= 0.0 || grand_total <= 0.0) return 0.0;

  double stat = 0.0;
  for (std::size_t c = 0; c < class_totals.size(); ++c) {
    if (class_totals[c] <= 0.0) continue;
    const double share = class_totals[c] / grand_total;
    const double e_feature = feature_total * share;
    const double e_rest = rest_total * share;
    const double o_feature = feature_counts_per_class[c];
    const double o_rest = class_totals[c] - o_feature;
    stat += (o_feature - e_feature) * (o_feature - e_feature) / e_feature;
    stat += (o_rest - e_rest) * (o_rest - e_rest) / e_rest;
  }
  return stat;
}

/// The post-selection mapping from word keys to contiguous feature indices.
/// Iteration order is deterministic: ascending lexicographic on the canonical
/// key text.
struct FeatureDictionary {
  std::vector<WordKey> keys;             // position = feature index
  std::map<WordKey, std::uint32_t> index;

  std::size_t size() const { return keys.size(); }

  static FeatureDictionary from_keys(std::vector<WordKey> selected) {
    std::vector<std::pair<std::string, WordKey>> rendered;
    rendered.reserve(selected.size());
    for (auto& key : selected) rendered.emplace_back(canonical_key_string(key), std::move(key));
    std::sort(rendered.begin(), rendered.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    FeatureDictionary dict;
    dict.keys.reserve(rendered.size());
    for (auto& [text, key] : rendered) {
      dict.index.emplace(key, static_cast<std::uint32_t>(dict.keys.size()));
      dict.keys.push_back(std::move(key));
    }
    if (dict.index.size() != dict.keys.size()) throw Error("duplicate keys in feature dictionary");
    return dict;
  }
};

/// Keep exactly the keys whose chi-squared statistic reaches the threshold
/// and assign contiguous indices in deterministic order. Falls back to
/// keeping every key (with a warning) if nothing passes the threshold.
inline FeatureDictionary select_features(std::span<const BagOfPatterns> train_bags,
                                         std::span<const std::string> labels, double threshold = 2.0) {
  if (train_bags.size() != labels.size()) throw Error("bags and labels must align");
  if (threshold < 0.0) throw Error("selection threshold must be non-negative");

  std::vector<std::string> classes(labels.begin(), labels.end());
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  if (classes.size() < 2) throw Error("feature selection needs at least 2 classes");

  std::map<std::string, std::size_t> class_of;
  for (std::size_t c = 0; c < classes.size(); ++c) class_of[classes[c]] = c;

  std::vector<double> class_totals(classes.size(), 0.0);
  std::map<WordKey, std::vector<double>> counts;
  for (std::size_t i = 0; i < train_bags.size(); ++i) {
    const std::size_t c = class_of.at(std::string(labels[i]));
    for (const auto& [key, n] : train_bags[i].counts) {
      auto it = counts.find(key);
      if (it == counts.end()) it = counts.emplace(key, std::vector<double>(classes.size(), 0.0)).first;
      it->second[c] += static_cast<double>(n);
      class_totals[c] += static_cast<double>(n);
    }
  }

  std::vector<WordKey> selected;
  for (const auto& [key, per_class] : counts)
    if (chi2_statistic(per_class, class_totals) >= threshold) selected.push_back(key);

  if (selected.empty() && !counts.empty()) {
    std::cerr << "warning: no feature reached the chi-squared threshold " << threshold
              << "; keeping all " << counts.size() << " features\n";
    for (const auto& [key, per_class] : counts) selected.push_back(key);
  }
  return FeatureDictionary::from_keys(std::move(selected));
}

/// Sparse count vector of one bag under a fixed dictionary; unselected keys
/// are ignored, selected ones keep their raw counts.
inline SparseVector vectorize(const BagOfPatterns& bag, const FeatureDictionary& dict) {
  SparseVector out;
  for (const auto& [key, n] : bag.counts) {
    const auto it = dict.index.find(key);
    if (it != dict.index.end()) out.push_back({it->second, static_cast<double>(n)});
  }
  std::sort(out.begin(), out.end(),
            [](const SparseEntry& a, const SparseEntry& b) { return a.index < b.index; });
  return out;
}

}  // namespace muse
