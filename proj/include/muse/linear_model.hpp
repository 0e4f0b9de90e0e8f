#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "muse/core.hpp"

namespace muse {

/// Solver configuration. The objective per class is
///   min_w  1/2 ||w||^2 + C * sum_i log(1 + exp(-y_i * w.x_i))
/// where each instance is extended with the constant bias feature B and the
/// bias weight is part of w (and regularized with it).
struct LinearParams {
  double regularization_c = 5.0;
  double bias = 1.0;
  double tolerance = 0.1;
  int max_iterations = 1000;
  std::uint64_t seed = 1;
};

/// Per-class weight vectors over the selected feature space. Binary problems
/// train a single vector separating classes[0] (positive) from classes[1].
struct LinearModel {
  std::vector<std::string> classes;
  std::size_t feature_count = 0;
  /// One row per class for |Y| > 2, a single row for binary problems;
  /// each row has feature_count + 1 weights, the last one for the bias.
  std::vector<std::vector<double>> weights;
  LinearParams params;

  std::span<const double> row(std::size_t i) const { return weights[i]; }
};

namespace detail {

inline double sparse_dot(std::span<const double> w, const SparseVector& x, double bias) {
  double acc = bias > 0.0 ? w.back() * bias : 0.0;
  for (const auto& e : x) acc += w[e.index] * e.value;
  return acc;
}

/// Primal objective; used by the optional per-iteration trace and tests.
inline double primal_objective(std::span<const double> w, std::span<const SparseVector> xs,
                               std::span<const signed char> ys, double c, double bias) {
  double obj = 0.0;
  for (double v : w) obj += 0.5 * v * v;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double margin = static_cast<double>(ys[i]) * sparse_dot(w, xs[i], bias);
    // log1p(exp(-m)) computed stably for both signs of m
    obj += c * (margin > 0 ? std::log1p(std::exp(-margin)) : -margin + std::log1p(std::exp(margin)));
  }
  return obj;
}

/// Dual coordinate descent for L2-regularized logistic regression
/// (Yu, Huang & Lin's dual method with an inner Newton step). Terminates
/// when the largest sub-problem gradient falls below the tolerance.
inline std::vector<double> solve_binary_lr(std::span<const SparseVector> xs,
                                           std::span<const signed char> ys, std::size_t feature_count,
                                           const LinearParams& params,
                                           std::vector<double>* objective_trace = nullptr) {
  const std::size_t l = xs.size();
  const double upper = params.regularization_c;
  const std::size_t w_size = feature_count + 1;  // bias weight appended

  std::vector<double> w(w_size, 0.0);
  std::vector<double> xtx(l);
  std::vector<double> alpha(2 * l);
  for (std::size_t i = 0; i < l; ++i) {
    alpha[2 * i] = std::min(0.001 * upper, 1e-8);
    alpha[2 * i + 1] = upper - alpha[2 * i];
  }
  for (std::size_t i = 0; i < l; ++i) {
    double sq = params.bias > 0.0 ? params.bias * params.bias : 0.0;
    for (const auto& e : xs[i]) sq += e.value * e.value;
    xtx[i] = sq;
    const double coef = static_cast<double>(ys[i]) * alpha[2 * i];
    for (const auto& e : xs[i]) w[e.index] += coef * e.value;
    if (params.bias > 0.0) w.back() += coef * params.bias;
  }

  std::vector<std::size_t> order(l);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(params.seed);

  const int max_inner = 100;
  double innereps = 1e-2;
  const double innereps_min = std::min(1e-8, params.tolerance);

  for (int iter = 0; iter < params.max_iterations; ++iter) {
    std::shuffle(order.begin(), order.end(), rng);
    int newton_total = 0;
    double gmax = 0.0;

    for (const std::size_t i : order) {
      const double yi = static_cast<double>(ys[i]);
      const double a = xtx[i];
      const double b = yi * sparse_dot(w, xs[i], params.bias);

      // pick the smaller of (alpha, C - alpha) as the active variable
      std::size_t ind1 = 2 * i, ind2 = 2 * i + 1;
      double sign = 1.0;
      if (0.5 * a * (alpha[ind2] - alpha[ind1]) + b < 0) {
        std::swap(ind1, ind2);
        sign = -1.0;
      }

      const double alpha_old = alpha[ind1];
      double z = alpha_old;
      if (upper - z < 0.5 * upper) z = 0.1 * z;
      double gp = a * (z - alpha_old) + sign * b + std::log(z / (upper - z));
      gmax = std::max(gmax, std::fabs(gp));

      int inner = 0;
      const double eta = 0.1;
      while (inner <= max_inner) {
        if (std::fabs(gp) < innereps) break;
        const double gpp = a + upper / (upper - z) / z;
        const double tentative = z - gp / gpp;
        z = tentative <= 0.0 ? z * eta : tentative;
        gp = a * (z - alpha_old) + sign * b + std::log(z / (upper - z));
        ++newton_total;
        ++inner;
      }

      if (inner > 0) {
        alpha[ind1] = z;
        alpha[ind2] = upper - z;
        const double coef = sign * (z - alpha_old) * yi;
        for (const auto& e : xs[i]) w[e.index] += coef * e.value;
        if (params.bias > 0.0) w.back() += coef * params.bias;
      }
    }

    if (objective_trace != nullptr)
      objective_trace->push_back(primal_objective(w, xs, ys, upper, params.bias));
    if (gmax < params.tolerance) break;
    if (newton_total <= static_cast<int>(l) / 10) innereps = std::max(innereps_min, 0.1 * innereps);
  }
  return w;
}

}  // namespace detail

/// Train one-vs-rest weight vectors over sparse count vectors. Classes are
/// ordered as first seen in y unless an explicit class order is given;
/// binary problems produce a single vector. Deterministic for fixed
/// params.seed.
inline LinearModel train_linear(std::span<const SparseVector> xs, std::span<const std::string> ys,
                                std::size_t feature_count, const LinearParams& params = {},
                                std::vector<std::vector<double>>* objective_traces = nullptr,
                                std::vector<std::string> class_order = {}) {
  if (xs.empty()) throw Error("cannot train on an empty set");
  if (xs.size() != ys.size()) throw Error("features and labels must align");

  LinearModel model;
  model.feature_count = feature_count;
  model.params = params;
  model.classes = std::move(class_order);
  if (model.classes.empty()) {
    for (const auto& label : ys)
      if (std::find(model.classes.begin(), model.classes.end(), label) == model.classes.end())
        model.classes.push_back(label);
  } else {
    for (const auto& label : ys)
      if (std::find(model.classes.begin(), model.classes.end(), label) == model.classes.end())
        throw Error("label '" + label + "' not in the given class order");
  }
  if (model.classes.size() < 2) throw Error("training set has a single class");

  const std::size_t runs = model.classes.size() == 2 ? 1 : model.classes.size();
  for (std::size_t c = 0; c < runs; ++c) {
    std::vector<signed char> targets(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
      targets[i] = ys[i] == model.classes[c] ? 1 : -1;
    LinearParams per_class = params;
    per_class.seed = params.seed + c;
    std::vector<double>* trace = nullptr;
    if (objective_traces != nullptr) {
      objective_traces->emplace_back();
      trace = &objective_traces->back();
    }
    model.weights.push_back(detail::solve_binary_lr(xs, targets, feature_count, per_class, trace));
  }
  return model;
}

struct Prediction {
  std::string label;
  std::vector<double> scores;  // one per class, aligned with model.classes
};

/// Argmax of per-class scores w_c . x~; ties break towards the earlier class
/// in the model's class list.
inline Prediction predict_linear(const LinearModel& model, const SparseVector& x) {
  for (const auto& e : x)
    if (e.index >= model.feature_count) throw Error("feature index out of range");

  Prediction out;
  if (model.classes.size() == 2) {
    const double s = detail::sparse_dot(model.weights[0], x, model.params.bias);
    out.scores = {s, -s};
  } else {
    out.scores.reserve(model.classes.size());
    for (std::size_t c = 0; c < model.classes.size(); ++c)
      out.scores.push_back(detail::sparse_dot(model.weights[c], x, model.params.bias));
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < out.scores.size(); ++c)
    if (out.scores[c] > out.scores[best]) best = c;
  out.label = model.classes[best];
  return out;
}

}  // namespace muse
