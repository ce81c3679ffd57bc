#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "common/rng.hpp"
#include "data/bag.hpp"
#include "tensor/tensor.hpp"

namespace ccan::testing {

template <typename T>
Tensor<T> random_tensor(std::size_t rows, std::size_t cols, Rng& rng, double stddev = 1.0, bool requires_grad = true) {
  std::vector<T> v(rows * cols);
  for (T& x : v) x = static_cast<T>(rng.normal(0.0, stddev));
  return Tensor<T>({rows, cols}, std::move(v), requires_grad);
}

// Bag with n standard-normal tokens placed at distinct cells of a rows×cols grid.
inline FeatureBag random_bag(std::size_t n, std::size_t dim, std::size_t rows, std::size_t cols, Rng& rng,
                             std::uint32_t label = 0) {
  FeatureBag bag;
  bag.bag_id = "bag";
  bag.patient_id = "patient";
  bag.label = label;
  bag.rows_total = rows;
  bag.cols_total = cols;
  bag.tokens = Matrix(n, dim);
  for (float& v : bag.tokens.values) v = static_cast<float>(rng.normal());
  for (std::size_t cell : rng.sample_without_replacement(rows * cols, n)) {
    bag.coords.push_back({cell / cols, cell % cols, rows, cols});
  }
  return bag;
}

// Fresh directory under the system temp dir, removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& name)
      : path_(std::filesystem::temp_directory_path() / ("ccan_test_" + name)) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace ccan::testing
