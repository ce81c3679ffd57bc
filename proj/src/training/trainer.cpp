#include "training/trainer.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "common/binary_io.hpp"
#include "common/error.hpp"
#include "common/format.hpp"
#include "common/rng.hpp"
#include "training/metrics.hpp"
#include "training/optim.hpp"

namespace ccan {

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("train.epochs must be positive");
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (!(lr_min >= 0.0 && lr_min <= lr_max)) throw ConfigError("train.lr_min must satisfy 0 <= lr_min <= lr_max");
  if (weight_decay < 0.0) throw ConfigError("train.weight_decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("train.beta1 must lie in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train.beta2 must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("train.eps must be positive");
  for (double f : fractions) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("train.fractions entries must lie in (0, 1]");
  }
}

std::vector<int> bag_labels(const BagRefs& bags) {
  std::vector<int> labels;
  labels.reserve(bags.size());
  for (const FeatureBag* b : bags) labels.push_back(static_cast<int>(b->label));
  return labels;
}

std::vector<std::vector<double>> predict_all(const TrainableModel& model, const BagRefs& bags) {
  std::vector<std::vector<double>> out;
  out.reserve(bags.size());
  for (const FeatureBag* b : bags) out.push_back(model.predict(*b));
  return out;
}

double evaluate_auc(const TrainableModel& model, const BagRefs& bags) {
  return auc_for_outputs(predict_all(model, bags), bag_labels(bags));
}

TrainHistory train(TrainableModel& model, const BagRefs& train_bags, const BagRefs& val_bags,
                   const BagRefs& test_bags, const TrainConfig& config) {
  config.validate();
  if (train_bags.empty()) throw DataError("training set is empty");
  if (val_bags.empty()) throw DataError("validation set is empty");

  const std::size_t num_classes = model.config().num_classes;
  AdamW optimizer(model.parameters(), {config.beta1, config.beta2, config.eps, config.weight_decay});
  const std::size_t steps_per_epoch = (train_bags.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t horizon = config.epochs * steps_per_epoch;

  Rng order_rng(derive_seed(config.seed, "train/order"));
  Rng dropout_rng(derive_seed(config.seed, "train/dropout"));
  std::vector<std::size_t> order(train_bags.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainHistory history;
  history.best_val_auc = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<float>> best;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    order_rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    std::size_t pending = 0;
    auto apply = [&] {
      optimizer.scale_grads(1.0 / static_cast<double>(pending));
      optimizer.step(cosine_lr(step, horizon, config.lr_max, config.lr_min));
      optimizer.zero_grads();
      ++step;
      pending = 0;
    };
    for (std::size_t idx : order) {
      const FeatureBag& bag = *train_bags[idx];
      const auto target_values = label_targets(bag.label, num_classes);
      const std::vector<float> targets(target_values.begin(), target_values.end());
      std::vector<Tensor<float>> losses;
      for (const auto& p : model.stage_probs(bag, &dropout_rng, true)) losses.push_back(bce(p, std::span<const float>(targets)));
      const Tensor<float> total = add_all(losses);
      if (!std::isfinite(total.item())) throw NumericError("non-finite training loss on bag " + bag.bag_id);
      loss_sum += total.item();
      total.backward();
      if (++pending == config.batch_size) apply();
    }
    if (pending > 0) apply();

    EpochRecord record{epoch, loss_sum / static_cast<double>(train_bags.size()), evaluate_auc(model, val_bags)};
    history.epochs.push_back(record);
    if (record.val_auc > history.best_val_auc) {
      history.best_val_auc = record.val_auc;
      history.best_epoch = epoch;
      best = model.snapshot();
    }
  }
  model.restore(best);
  history.test_auc_at_best =
      test_bags.empty() ? std::numeric_limits<double>::quiet_NaN() : evaluate_auc(model, test_bags);
  return history;
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
  std::ostringstream out;
  out << "epoch,train_loss,val_auc\n";
  for (const auto& e : history.epochs) {
    out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_auc) << '\n';
  }
  write_text_file(path, out.str());
}

void write_summary_csv(const TrainHistory& history, const std::string& path) {
  std::ostringstream out;
  out << "best_epoch,best_val_auc,test_auc\n"
      << history.best_epoch << ',' << format_double(history.best_val_auc) << ','
      << format_double(history.test_auc_at_best) << '\n';
  write_text_file(path, out.str());
}

}  // namespace ccan
