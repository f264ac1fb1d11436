#include "baomi/metrics.hpp"

#include <stdexcept>

namespace baomi {

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts)
    for (std::size_t c : row) n += c;
  return n;
}

Metrics metrics_from_confusion(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw std::invalid_argument("metrics of an empty confusion matrix");
  const std::size_t classes = cm.counts.size();

  std::size_t correct = 0;
  double macro = 0.0, weighted = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    const std::size_t tp = cm.counts[c][c];
    std::size_t fn = 0, fp = 0;
    for (std::size_t o = 0; o < classes; ++o) {
      if (o == c) continue;
      fn += cm.counts[c][o];
      fp += cm.counts[o][c];
    }
    const std::size_t denom = 2 * tp + fp + fn;
    const double f1 = denom == 0 ? 0.0 : 2.0 * tp / static_cast<double>(denom);
    const std::size_t support = tp + fn;
    correct += tp;
    macro += f1;
    weighted += f1 * static_cast<double>(support);
  }
  Metrics m;
  m.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(total);
  m.macro_f1 = 100.0 * macro / static_cast<double>(classes);
  m.weighted_f1 = 100.0 * weighted / static_cast<double>(total);
  return m;
}

std::size_t predict_class(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("predict_class: empty logits");
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.size(); ++c)
    if (logits[c] > logits[best]) best = c;
  return best;
}

Metrics mean_metrics(std::span<const Metrics> per_fold) {
  if (per_fold.empty()) throw std::invalid_argument("mean of zero folds");
  Metrics m;
  for (const Metrics& f : per_fold) {
    m.accuracy += f.accuracy;
    m.macro_f1 += f.macro_f1;
    m.weighted_f1 += f.weighted_f1;
  }
  const double n = static_cast<double>(per_fold.size());
  m.accuracy /= n;
  m.macro_f1 /= n;
  m.weighted_f1 /= n;
  return m;
}

}  // namespace baomi
