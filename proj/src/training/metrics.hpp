#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ccan {

// Probability that a random positive outranks a random negative, ties 0.5.
// labels are 0/1. Throws MetricError unless both classes occur.
double auc_binary(std::span<const double> scores, std::span<const int> labels);

// Unweighted mean over classes of the one-vs-rest AUC. scores is n rows of K.
// Throws MetricError when a class has no sample or every sample.
double auc_macro_ovr(const std::vector<std::vector<double>>& scores, std::span<const int> labels);

// AUC for model outputs: binary heads (one column) use auc_binary on label == 1,
// wider heads use auc_macro_ovr.
double auc_for_outputs(const std::vector<std::vector<double>>& probs, std::span<const int> labels);

// Mean binary cross-entropy with probabilities clamped to [1e-7, 1 - 1e-7].
double bce_loss(std::span<const double> probs, std::span<const double> targets);

// Eq. 3 combination of stage losses: a plain sum.
double total_loss(std::span<const double> stage_losses);

}  // namespace ccan
