#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "data/bag.hpp"

namespace ccan {

struct SyntheticParams {
  std::size_t n_bags = 200;
  std::size_t n_min = 10;  // tokens per bag, inclusive range
  std::size_t n_max = 40;
  std::size_t feature_dim = 64;
  double witness_shift = 4.0;
  std::size_t witness_min = 2;  // witness tokens per positive bag, inclusive range
  std::size_t witness_max = 6;
  std::size_t grid_rows = 16;
  std::size_t grid_cols = 16;
  std::size_t n_classes = 2;
  std::uint64_t seed = 0;
};

struct SyntheticDataset {
  std::vector<FeatureBag> bags;
  // witness[b][i] is true when token i of bag b carries the class signal.
  std::vector<std::vector<bool>> witness;
  // Unit direction per class (class 0 unused in the binary case).
  std::vector<std::vector<double>> directions;
};

// Background tokens are standard normal. A positive bag of class c replaces a
// few tokens by normal(shift·u_c, 1). In the binary case only label 1 carries
// witnesses; with more classes every class does. Patients own 1–3 consecutive bags.
// Throws ConfigError when the grid cannot hold n_max distinct coordinates.
SyntheticDataset generate_synthetic(const SyntheticParams& params);

}  // namespace ccan
