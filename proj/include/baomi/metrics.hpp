#pragma once

#include <array>
#include <cstddef>
#include <span>

namespace baomi {

/// counts[true_class][predicted_class]
struct ConfusionMatrix {
  std::array<std::array<std::size_t, 2>, 2> counts{};

  void add(std::size_t truth, std::size_t predicted) { ++counts.at(truth).at(predicted); }
  std::size_t total() const;
  bool operator==(const ConfusionMatrix&) const = default;
};

/// All values in percent.
struct Metrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
};

// Per-class F1 = 2 TP / (2 TP + FP + FN), 0 when the class is neither present
// nor predicted. Throws std::invalid_argument on an empty matrix.
Metrics metrics_from_confusion(const ConfusionMatrix& cm);

// Argmax over one row of logits; ties go to the lower class index.
std::size_t predict_class(std::span<const double> logits);

Metrics mean_metrics(std::span<const Metrics> per_fold);

}  // namespace baomi
