#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "data/split.hpp"
#include "model/config.hpp"
#include "training/trainer.hpp"

namespace ccan {

struct SweepRow {
  std::size_t fold = 0;
  double fraction = 1.0;
  ModelKind model = ModelKind::kCCAN;
  std::size_t best_epoch = 0;
  double val_auc = 0.0;
  double test_auc = 0.0;
};

struct SweepOptions {
  std::vector<std::size_t> folds;      // empty = every fold of the plan
  std::vector<ModelKind> models{ModelKind::kCCAN, ModelKind::kMeanPool, ModelKind::kMaxPool};
  bool patient_atomic_subsample = false;
  std::size_t jobs = 1;                // cells trained concurrently
};

// For every fold × fraction × model: subsample the fold's train ids, train a fresh
// model and record the test AUC at the best validation epoch. Seeds derive from
// train.seed so a cell's result does not depend on jobs or cell order. Rows come
// back in fold, fraction, model order.
std::vector<SweepRow> data_efficiency_sweep(const std::vector<FeatureBag>& bags, const SplitPlan& plan,
                                            const CCANConfig& model_config, const TrainConfig& train,
                                            const SweepOptions& options);

// Header fold,fraction,model,best_epoch,val_auc,test_auc.
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);

}  // namespace ccan
