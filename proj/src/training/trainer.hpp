#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "data/bag.hpp"
#include "model/trainable.hpp"

namespace ccan {

using BagRefs = std::vector<const FeatureBag*>;

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 30;  // bags per optimizer step (gradient accumulation)
  double lr_max = 5e-6;
  double lr_min = 0.0;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<double> fractions{0.02, 0.05, 0.10, 0.25, 0.50, 0.75, 1.00};
  std::uint64_t seed = 0;

  // Throws ConfigError naming the offending field.
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_auc = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_auc = 0.0;
  double test_auc_at_best = 0.0;  // NaN when no test set was given
};

// Label vector for AUC.
std::vector<int> bag_labels(const BagRefs& bags);

// Eval-mode averaged probabilities for each bag.
std::vector<std::vector<double>> predict_all(const TrainableModel& model, const BagRefs& bags);

double evaluate_auc(const TrainableModel& model, const BagRefs& bags);

// Trains in place. On return the model holds the parameters of the best
// validation epoch (first epoch wins ties) and the test AUC is measured there.
TrainHistory train(TrainableModel& model, const BagRefs& train_bags, const BagRefs& val_bags,
                   const BagRefs& test_bags, const TrainConfig& config);

// epoch,train_loss,val_auc rows.
void write_history_csv(const TrainHistory& history, const std::string& path);
// best_epoch,best_val_auc,test_auc
void write_summary_csv(const TrainHistory& history, const std::string& path);

}  // namespace ccan
