#include "training/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common/error.hpp"

namespace ccan {

double auc_binary(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimensionError("scores and labels differ in length");
  const std::size_t n = scores.size();
  std::size_t positives = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw MetricError("binary labels must be 0 or 1");
    positives += static_cast<std::size_t>(l);
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) throw MetricError("AUC needs both classes present");
  for (double s : scores) {
    if (std::isnan(s)) throw MetricError("AUC score is NaN");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Sum of doubled mid-ranks of the positives stays integral.
  std::uint64_t rank_sum2 = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const std::uint64_t doubled_mid = static_cast<std::uint64_t>(i + 1 + j);  // 2 × mean of ranks i+1..j
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1) rank_sum2 += doubled_mid;
    }
    i = j;
  }
  // 2U = 2R - n1(n1 + 1)
  const std::uint64_t u2 = rank_sum2 - static_cast<std::uint64_t>(positives) * (positives + 1);
  return static_cast<double>(u2) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

double auc_macro_ovr(const std::vector<std::vector<double>>& scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DimensionError("scores and labels differ in length");
  if (scores.empty()) throw MetricError("AUC of an empty set");
  const std::size_t k = scores.front().size();
  if (k < 2) throw MetricError("one-vs-rest AUC needs at least two score columns");
  std::vector<double> column(scores.size());
  std::vector<int> hit(scores.size());
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i].size() != k) throw MetricError("ragged score matrix");
      if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= k) throw MetricError("label outside the class range");
      column[i] = scores[i][c];
      hit[i] = labels[i] == static_cast<int>(c) ? 1 : 0;
    }
    try {
      total += auc_binary(column, hit);
    } catch (const MetricError&) {
      throw MetricError("class " + std::to_string(c) + " is missing or covers every sample");
    }
  }
  return total / static_cast<double>(k);
}

double auc_for_outputs(const std::vector<std::vector<double>>& probs, std::span<const int> labels) {
  if (!probs.empty() && probs.front().size() == 1) {
    std::vector<double> column;
    column.reserve(probs.size());
    for (const auto& p : probs) column.push_back(p.at(0));
    return auc_binary(column, labels);
  }
  return auc_macro_ovr(probs, labels);
}

double bce_loss(std::span<const double> probs, std::span<const double> targets) {
  if (probs.size() != targets.size() || probs.empty()) throw DimensionError("bce needs matching non-empty inputs");
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], 1e-7, 1.0 - 1e-7);
    total -= targets[i] * std::log(p) + (1.0 - targets[i]) * std::log(1.0 - p);
  }
  return total / static_cast<double>(probs.size());
}

double total_loss(std::span<const double> stage_losses) {
  if (stage_losses.empty()) throw UsageError("total loss needs at least one stage");
  double total = 0.0;
  for (double l : stage_losses) total += l;
  return total;
}

}  // namespace ccan
