#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bench/bench.hpp"
#include "data/synthetic.hpp"
#include "model/config.hpp"
#include "preprocess/pipeline.hpp"
#include "training/trainer.hpp"

namespace ccan {

// Every setting a command can read, keyed by dotted names such as model.J.
// Values are kept as validated text; typed views are built on demand.
class RunConfig {
 public:
  enum class Type { kInt, kReal, kBool, kString, kRealList, kIntList };

  // Defaults, with run.seed taken from CCAN_SEED when set.
  RunConfig();

  // `key = value` lines, '#' comments. Later assignments win.
  void load_file(const std::string& path);
  void load_text(const std::string& text, const std::string& origin = "<text>");
  // Throws ConfigError naming the key for unknown keys or values of the wrong type.
  void set(const std::string& key, const std::string& value);

  const std::string& get(const std::string& key) const;
  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  std::vector<std::string> keys() const;

  std::uint64_t get_u64(const std::string& key) const;
  std::size_t get_size(const std::string& key) const { return static_cast<std::size_t>(get_u64(key)); }
  double get_real(const std::string& key) const;
  bool get_bool(const std::string& key) const;
  std::vector<double> get_reals(const std::string& key) const;
  std::vector<std::size_t> get_sizes(const std::string& key) const;

  // Reloadable `key = value` listing of every setting.
  std::string dump() const;

  CCANConfig model_config() const;
  ModelKind model_kind() const;
  TrainConfig train_config() const;
  SyntheticParams synth_params() const;
  PipelineOptions pipeline_options() const;
  BenchOptions bench_options() const;

  // Resolved paths of the run layout runs/<name>/...
  std::string run_dir() const;
  std::string manifest_path() const;
  std::string split_path() const;
  std::string fold_dir(std::size_t fold) const;
  std::string checkpoint_path(std::size_t fold) const;

 private:
  struct Entry {
    Type type;
    std::string value;
  };
  void define(const std::string& key, Type type, const std::string& value);
  std::map<std::string, Entry> entries_;
};

}  // namespace ccan
