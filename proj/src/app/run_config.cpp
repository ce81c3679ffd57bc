#include "app/run_config.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "common/error.hpp"
#include "common/format.hpp"
#include "common/rng.hpp"

namespace ccan {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto z = s.find_last_not_of(" \t\r\n");
  return s.substr(a, z - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_u64(const std::string& s, std::uint64_t& out) {
  if (s.empty() || s[0] == '-' || s[0] == '+') return false;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  if (errno != 0 || *end != '\0') return false;
  out = v;
  return true;
}

bool parse_real(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (errno != 0 || *end != '\0') return false;
  out = v;
  return true;
}

bool parse_bool(const std::string& s, bool& out) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0" || s == "no" || s == "off") {
    out = false;
    return true;
  }
  return false;
}

const char* type_name(RunConfig::Type t) {
  switch (t) {
    case RunConfig::Type::kInt: return "a non-negative integer";
    case RunConfig::Type::kReal: return "a real number";
    case RunConfig::Type::kBool: return "a boolean";
    case RunConfig::Type::kString: return "a string";
    case RunConfig::Type::kRealList: return "a comma-separated list of reals";
    case RunConfig::Type::kIntList: return "a comma-separated list of integers";
  }
  return "a value";
}

bool valid_value(RunConfig::Type type, const std::string& v) {
  std::uint64_t u;
  double d;
  bool b;
  switch (type) {
    case RunConfig::Type::kInt: return parse_u64(v, u);
    case RunConfig::Type::kReal: return parse_real(v, d);
    case RunConfig::Type::kBool: return parse_bool(v, b);
    case RunConfig::Type::kString: return true;
    case RunConfig::Type::kRealList:
      for (const auto& item : split_list(v))
        if (!parse_real(item, d)) return false;
      return true;
    case RunConfig::Type::kIntList:
      for (const auto& item : split_list(v))
        if (!parse_u64(item, u)) return false;
      return true;
  }
  return false;
}

}  // namespace

void RunConfig::define(const std::string& key, Type type, const std::string& value) {
  entries_[key] = Entry{type, value};
}

RunConfig::RunConfig() {
  using T = Type;
  const CCANConfig m;
  const TrainConfig t;
  const SyntheticParams s;
  const PipelineOptions p;
  const BenchOptions b;

  std::string seed = "0";
  if (const char* env = std::getenv("CCAN_SEED"); env != nullptr && *env != '\0') {
    std::uint64_t v;
    if (!parse_u64(env, v)) throw ConfigError("CCAN_SEED: expected a non-negative integer, got '" + std::string(env) + "'");
    seed = env;
  }
  define("run.seed", T::kInt, seed);
  define("run.root", T::kString, "runs");
  define("run.name", T::kString, "default");

  define("model.kind", T::kString, "ccan");
  define("model.J", T::kInt, std::to_string(m.stages));
  define("model.M", T::kInt, std::to_string(m.latents));
  define("model.C", T::kInt, std::to_string(m.compression));
  define("model.D_l", T::kInt, std::to_string(m.latent_dim));
  define("model.D_f", T::kInt, std::to_string(m.feature_dim));
  define("model.Z", T::kInt, std::to_string(m.repeats));
  define("model.S", T::kInt, std::to_string(m.self_layers));
  define("model.p_do", T::kReal, format_double(m.token_dropout));
  define("model.K", T::kInt, std::to_string(m.num_classes));
  define("model.I", T::kInt, std::to_string(m.frequencies));
  define("model.f_max", T::kReal, format_double(m.f_max));
  define("model.scale", T::kString, to_string(m.scale_mode));
  define("model.heads", T::kInt, std::to_string(m.heads));
  define("model.raw_coords", T::kBool, m.append_raw_coords ? "true" : "false");

  define("train.epochs", T::kInt, std::to_string(t.epochs));
  define("train.batch_size", T::kInt, std::to_string(t.batch_size));
  define("train.lr", T::kReal, format_double(t.lr_max));
  define("train.lr_min", T::kReal, format_double(t.lr_min));
  define("train.weight_decay", T::kReal, format_double(t.weight_decay));
  define("train.beta1", T::kReal, format_double(t.beta1));
  define("train.beta2", T::kReal, format_double(t.beta2));
  define("train.eps", T::kReal, format_double(t.eps));
  define("train.fractions", T::kRealList, "0.02,0.05,0.1,0.25,0.5,0.75,1");
  define("train.fold", T::kInt, "0");
  define("train.checkpoint", T::kString, "");

  define("synth.n_bags", T::kInt, std::to_string(s.n_bags));
  define("synth.n_min", T::kInt, std::to_string(s.n_min));
  define("synth.n_max", T::kInt, std::to_string(s.n_max));
  define("synth.shift", T::kReal, format_double(s.witness_shift));
  define("synth.witness_min", T::kInt, std::to_string(s.witness_min));
  define("synth.witness_max", T::kInt, std::to_string(s.witness_max));
  define("synth.grid_rows", T::kInt, std::to_string(s.grid_rows));
  define("synth.grid_cols", T::kInt, std::to_string(s.grid_cols));

  define("data.manifest", T::kString, "");

  define("split.k", T::kInt, "4");
  define("split.val_fraction", T::kReal, "0.2");
  define("split.plan", T::kString, "");

  define("eval.set", T::kString, "test");

  define("sweep.models", T::kString, "ccan,mean-pool,max-pool");
  define("sweep.folds", T::kIntList, "");
  define("sweep.jobs", T::kInt, "1");
  define("sweep.patient_atomic", T::kBool, "false");
  define("sweep.out", T::kString, "");

  define("explain.checkpoint", T::kString, "");
  define("explain.bag", T::kString, "");
  define("explain.out", T::kString, "");
  define("explain.top_k", T::kInt, "5");

  define("embed.checkpoint", T::kString, "");
  define("embed.out", T::kString, "");

  define("bench.Ns", T::kIntList, "250,500,1000,2000,4000");
  define("bench.repeats", T::kInt, std::to_string(b.repeats));
  define("bench.warmups", T::kInt, std::to_string(b.warmups));
  define("bench.baseline", T::kBool, b.include_baseline ? "true" : "false");
  define("bench.out", T::kString, "");

  define("preprocess.inputs", T::kString, "");
  define("preprocess.out_dir", T::kString, "");
  define("preprocess.patch_microns", T::kReal, format_double(p.patch_microns));
  define("preprocess.white_threshold", T::kReal, format_double(p.white_threshold));
  define("preprocess.blur_threshold", T::kReal, format_double(p.blur_threshold));
  define("preprocess.canny_sigma", T::kReal, format_double(p.canny.sigma));
  define("preprocess.canny_low", T::kReal, format_double(p.canny.low));
  define("preprocess.canny_high", T::kReal, format_double(p.canny.high));
  define("preprocess.gray", T::kString, "luma");
}

void RunConfig::set(const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key), value = trim(raw_value);
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("unknown configuration key '" + key + "'");
  if (!valid_value(it->second.type, value)) {
    throw ConfigError(key + ": expected " + type_name(it->second.type) + ", got '" + value + "'");
  }
  it->second.value = value;
}

void RunConfig::load_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value', got '" + line + "'");
    }
    set(line.substr(0, eq), line.substr(eq + 1));
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  load_text(buf.str(), path);
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw ConfigError("unknown configuration key '" + key + "'");
  return it->second.value;
}

std::vector<std::string> RunConfig::keys() const {
  std::vector<std::string> out;
  for (const auto& [k, e] : entries_) out.push_back(k);
  return out;
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  std::uint64_t v = 0;
  if (!parse_u64(get(key), v)) throw ConfigError(key + ": expected a non-negative integer");
  return v;
}

double RunConfig::get_real(const std::string& key) const {
  double v = 0;
  if (!parse_real(get(key), v)) throw ConfigError(key + ": expected a real number");
  return v;
}

bool RunConfig::get_bool(const std::string& key) const {
  bool v = false;
  if (!parse_bool(get(key), v)) throw ConfigError(key + ": expected a boolean");
  return v;
}

std::vector<double> RunConfig::get_reals(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(get(key))) {
    double v;
    if (!parse_real(item, v)) throw ConfigError(key + ": '" + item + "' is not a real number");
    out.push_back(v);
  }
  return out;
}

std::vector<std::size_t> RunConfig::get_sizes(const std::string& key) const {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(get(key))) {
    std::uint64_t v;
    if (!parse_u64(item, v)) throw ConfigError(key + ": '" + item + "' is not an integer");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

std::string RunConfig::dump() const {
  std::ostringstream out;
  for (const auto& [k, e] : entries_) out << k << " = " << e.value << '\n';
  return out.str();
}

ModelKind RunConfig::model_kind() const { return parse_model_kind(get("model.kind")); }

CCANConfig RunConfig::model_config() const {
  CCANConfig c;
  c.stages = get_size("model.J");
  c.latents = get_size("model.M");
  c.compression = get_size("model.C");
  c.latent_dim = get_size("model.D_l");
  c.feature_dim = get_size("model.D_f");
  c.repeats = get_size("model.Z");
  c.self_layers = get_size("model.S");
  c.token_dropout = get_real("model.p_do");
  c.num_classes = get_size("model.K");
  c.frequencies = get_size("model.I");
  c.f_max = get_real("model.f_max");
  c.scale_mode = parse_scale_mode(get("model.scale"));
  c.heads = get_size("model.heads");
  c.append_raw_coords = get_bool("model.raw_coords");
  c.seed = get_u64("run.seed");
  c.validate();
  return c;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.epochs = get_size("train.epochs");
  t.batch_size = get_size("train.batch_size");
  t.lr_max = get_real("train.lr");
  t.lr_min = get_real("train.lr_min");
  t.weight_decay = get_real("train.weight_decay");
  t.beta1 = get_real("train.beta1");
  t.beta2 = get_real("train.beta2");
  t.eps = get_real("train.eps");
  t.fractions = get_reals("train.fractions");
  t.seed = derive_seed(get_u64("run.seed"), "train");
  t.validate();
  return t;
}

SyntheticParams RunConfig::synth_params() const {
  SyntheticParams s;
  s.n_bags = get_size("synth.n_bags");
  s.n_min = get_size("synth.n_min");
  s.n_max = get_size("synth.n_max");
  s.feature_dim = get_size("model.D_f");
  s.witness_shift = get_real("synth.shift");
  s.witness_min = get_size("synth.witness_min");
  s.witness_max = get_size("synth.witness_max");
  s.grid_rows = get_size("synth.grid_rows");
  s.grid_cols = get_size("synth.grid_cols");
  s.n_classes = get_size("model.K");
  s.seed = derive_seed(get_u64("run.seed"), "synth");
  return s;
}

PipelineOptions RunConfig::pipeline_options() const {
  PipelineOptions p;
  p.patch_microns = get_real("preprocess.patch_microns");
  p.white_threshold = get_real("preprocess.white_threshold");
  p.blur_threshold = get_real("preprocess.blur_threshold");
  p.canny.sigma = get_real("preprocess.canny_sigma");
  p.canny.low = get_real("preprocess.canny_low");
  p.canny.high = get_real("preprocess.canny_high");
  const std::string& gray = get("preprocess.gray");
  if (gray == "luma") p.gray = GrayMode::kLuma601;
  else if (gray == "mean") p.gray = GrayMode::kChannelMean;
  else throw ConfigError("preprocess.gray: expected 'luma' or 'mean', got '" + gray + "'");
  p.feature_dim = get_size("model.D_f");
  p.seed = derive_seed(get_u64("run.seed"), "features");
  return p;
}

BenchOptions RunConfig::bench_options() const {
  BenchOptions b;
  b.repeats = get_size("bench.repeats");
  b.warmups = get_size("bench.warmups");
  b.include_baseline = get_bool("bench.baseline");
  b.seed = derive_seed(get_u64("run.seed"), "bench");
  return b;
}

std::string RunConfig::run_dir() const { return get("run.root") + "/" + get("run.name"); }

std::string RunConfig::manifest_path() const {
  const std::string& m = get("data.manifest");
  return m.empty() ? run_dir() + "/data/manifest.csv" : m;
}

std::string RunConfig::split_path() const {
  const std::string& p = get("split.plan");
  return p.empty() ? run_dir() + "/split.csv" : p;
}

std::string RunConfig::fold_dir(std::size_t fold) const { return run_dir() + "/fold" + std::to_string(fold); }

std::string RunConfig::checkpoint_path(std::size_t fold) const {
  const std::string& c = get("train.checkpoint");
  return c.empty() ? fold_dir(fold) + "/checkpoint.ccan" : c;
}

}  // namespace ccan
