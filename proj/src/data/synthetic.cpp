#include "data/synthetic.hpp"

#include <cmath>
#include <cstdio>

#include "common/error.hpp"
#include "common/rng.hpp"

namespace ccan {

namespace {

std::string numbered(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%04zu", prefix, i);
  return buf;
}

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticParams& p) {
  if (p.n_bags == 0) throw ConfigError("synthetic dataset needs at least one bag");
  if (p.n_min == 0 || p.n_min > p.n_max) throw ConfigError("bag size range must satisfy 1 <= n_min <= n_max");
  if (p.feature_dim == 0) throw ConfigError("feature_dim must be positive");
  if (p.n_classes < 2) throw ConfigError("n_classes must be at least 2");
  if (p.witness_min > p.witness_max) throw ConfigError("witness range must satisfy witness_min <= witness_max");
  if (p.witness_shift < 0.0) throw ConfigError("witness_shift must be non-negative");
  const std::size_t cells = p.grid_rows * p.grid_cols;
  if (cells < p.n_max) {
    throw ConfigError("grid " + std::to_string(p.grid_rows) + "x" + std::to_string(p.grid_cols) +
                      " is smaller than the largest bag (" + std::to_string(p.n_max) + ")");
  }

  SyntheticDataset ds;
  Rng dir_rng(derive_seed(p.seed, "synthetic/directions"));
  for (std::size_t c = 0; c < p.n_classes; ++c) {
    std::vector<double> u(p.feature_dim);
    double norm = 0.0;
    do {
      norm = 0.0;
      for (double& v : u) {
        v = dir_rng.normal();
        norm += v * v;
      }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (double& v : u) v /= norm;
    ds.directions.push_back(std::move(u));
  }

  // Balanced labels in shuffled order.
  std::vector<std::uint32_t> labels(p.n_bags);
  for (std::size_t i = 0; i < p.n_bags; ++i) labels[i] = static_cast<std::uint32_t>(i % p.n_classes);
  Rng label_rng(derive_seed(p.seed, "synthetic/labels"));
  label_rng.shuffle(labels.begin(), labels.end());

  Rng rng(derive_seed(p.seed, "synthetic/bags"));
  Rng patient_rng(derive_seed(p.seed, "synthetic/patients"));
  std::size_t patient = 0, left_for_patient = 0;
  for (std::size_t b = 0; b < p.n_bags; ++b) {
    if (left_for_patient == 0) {
      ++patient;
      left_for_patient = 1 + patient_rng.index(3);
    }
    --left_for_patient;

    FeatureBag bag;
    bag.bag_id = numbered("B", b);
    bag.patient_id = numbered("P", patient - 1);
    bag.label = labels[b];
    bag.rows_total = p.grid_rows;
    bag.cols_total = p.grid_cols;
    const std::size_t n = p.n_min + rng.index(p.n_max - p.n_min + 1);
    for (std::size_t cell : rng.sample_without_replacement(cells, n)) {
      bag.coords.push_back({cell / p.grid_cols, cell % p.grid_cols, p.grid_rows, p.grid_cols});
    }
    bag.tokens = Matrix(n, p.feature_dim);
    for (float& v : bag.tokens.values) v = static_cast<float>(rng.normal());

    std::vector<bool> witness(n, false);
    const bool positive = p.n_classes > 2 || bag.label != 0;
    if (positive) {
      const std::size_t count = std::min(n, p.witness_min + rng.index(p.witness_max - p.witness_min + 1));
      const auto& u = ds.directions[bag.label];
      for (std::size_t i : rng.sample_without_replacement(n, count)) {
        witness[i] = true;
        for (std::size_t d = 0; d < p.feature_dim; ++d) {
          bag.tokens(i, d) = static_cast<float>(bag.tokens(i, d) + p.witness_shift * u[d]);
        }
      }
    }
    ds.bags.push_back(std::move(bag));
    ds.witness.push_back(std::move(witness));
  }
  return ds;
}

}  // namespace ccan
