#include "training/sweep.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "common/binary_io.hpp"
#include "common/error.hpp"
#include "common/format.hpp"
#include "common/rng.hpp"

namespace ccan {

namespace {

struct Cell {
  std::size_t fold;
  double fraction;
  ModelKind model;
};

SweepRow run_cell(const std::vector<FeatureBag>& bags, const SplitPlan& plan, const CCANConfig& model_config,
                  const TrainConfig& train, const SweepOptions& options, const Cell& cell) {
  const Fold& fold = plan.folds.at(cell.fold);
  const std::string fold_tag = std::to_string(cell.fold);
  // Shared per fold so fractions nest.
  const std::uint64_t subsample_seed = derive_seed(train.seed, "sweep/subsample/" + fold_tag);
  std::vector<std::string> ids;
  if (options.patient_atomic_subsample) {
    std::vector<std::string> patients;
    for (const FeatureBag* b : select_bags(bags, fold.train)) patients.push_back(b->patient_id);
    ids = subsample_fraction_by_patient(fold.train, patients, cell.fraction, subsample_seed);
  } else {
    ids = subsample_fraction(fold.train, cell.fraction, subsample_seed);
  }

  const std::string model_tag = to_string(cell.model);
  TrainableModel model =
      TrainableModel::create(cell.model, model_config, derive_seed(train.seed, "sweep/init/" + model_tag + "/" + fold_tag));
  TrainConfig cell_train = train;
  cell_train.seed = derive_seed(train.seed, "sweep/train/" + model_tag + "/" + fold_tag + "/" + format_double(cell.fraction));
  const TrainHistory h =
      ccan::train(model, select_bags(bags, ids), select_bags(bags, fold.val), select_bags(bags, fold.test), cell_train);
  return {cell.fold, cell.fraction, cell.model, h.best_epoch, h.best_val_auc, h.test_auc_at_best};
}

}  // namespace

std::vector<SweepRow> data_efficiency_sweep(const std::vector<FeatureBag>& bags, const SplitPlan& plan,
                                            const CCANConfig& model_config, const TrainConfig& train,
                                            const SweepOptions& options) {
  train.validate();
  if (train.fractions.empty()) throw ConfigError("train.fractions must not be empty");
  if (options.models.empty()) throw ConfigError("sweep needs at least one model");
  std::vector<std::size_t> folds = options.folds;
  if (folds.empty()) {
    for (std::size_t f = 0; f < plan.folds.size(); ++f) folds.push_back(f);
  }
  std::vector<Cell> cells;
  for (std::size_t f : folds) {
    if (f >= plan.folds.size()) throw ConfigError("fold " + std::to_string(f) + " is not in the split plan");
    for (double fraction : train.fractions) {
      for (ModelKind m : options.models) cells.push_back({f, fraction, m});
    }
  }

  std::vector<SweepRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      try {
        rows[i] = run_cell(bags, plan, model_config, train, options, cells[i]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = cells.size();
      }
    }
  };
  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, cells.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  std::ostringstream out;
  out << "fold,fraction,model,best_epoch,val_auc,test_auc\n";
  for (const auto& r : rows) {
    out << r.fold << ',' << format_double(r.fraction) << ',' << to_string(r.model) << ',' << r.best_epoch << ','
        << format_double(r.val_auc) << ',' << format_double(r.test_auc) << '\n';
  }
  write_text_file(path, out.str());
}

}  // namespace ccan
