#include "ccan/ccan.h"

#include <cstring>
#include <iostream>
#include <new>
#include <string>

#include "app/commands.hpp"
#include "app/run_config.hpp"
#include "bench/bench.hpp"
#include "common/error.hpp"
#include "model/trainable.hpp"
#include "training/metrics.hpp"

struct ccan_config {
  ccan::RunConfig config;
};

struct ccan_model {
  ccan::TrainableModel model;
};

namespace {

thread_local std::string last_error;

ccan_status fail(ccan_status status, const std::string& message) {
  last_error = message;
  return status;
}

// Runs fn, translating exceptions into status codes.
template <typename Fn>
ccan_status guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return CCAN_OK;
  } catch (const ccan::Error& e) {
    return fail(static_cast<ccan_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(CCAN_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(CCAN_ERR_INTERNAL, e.what());
  }
}

ccan_status copy_out(const std::string& text, char* buf, std::size_t capacity, std::size_t* needed) {
  if (needed != nullptr) *needed = text.size() + 1;
  if (buf == nullptr || capacity < text.size() + 1) {
    return fail(CCAN_ERR_BUFFER_TOO_SMALL, "buffer of " + std::to_string(capacity) + " bytes cannot hold " +
                                               std::to_string(text.size() + 1));
  }
  std::memcpy(buf, text.c_str(), text.size() + 1);
  last_error.clear();
  return CCAN_OK;
}

}  // namespace

extern "C" {

const char* ccan_version(void) { return "1.0.0"; }

const char* ccan_status_string(ccan_status status) {
  switch (status) {
    case CCAN_OK: return "ok";
    case CCAN_ERR_DIMENSION: return "dimension error";
    case CCAN_ERR_NUMERIC: return "numeric error";
    case CCAN_ERR_USAGE: return "usage error";
    case CCAN_ERR_CONFIG: return "config error";
    case CCAN_ERR_DATA: return "data error";
    case CCAN_ERR_FORMAT: return "format error";
    case CCAN_ERR_IO: return "io error";
    case CCAN_ERR_METRIC: return "metric error";
    case CCAN_ERR_BUFFER_TOO_SMALL: return "buffer too small";
    case CCAN_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* ccan_last_error(void) { return last_error.c_str(); }

ccan_status ccan_config_create(ccan_config** out) {
  if (out == nullptr) return fail(CCAN_ERR_USAGE, "ccan_config_create: null output pointer");
  *out = nullptr;
  return guarded([&] { *out = new ccan_config{}; });
}

void ccan_config_destroy(ccan_config* config) { delete config; }

ccan_status ccan_config_load_file(ccan_config* config, const char* path) {
  if (config == nullptr || path == nullptr) return fail(CCAN_ERR_USAGE, "ccan_config_load_file: null argument");
  return guarded([&] { config->config.load_file(path); });
}

ccan_status ccan_config_set(ccan_config* config, const char* key, const char* value) {
  if (config == nullptr || key == nullptr || value == nullptr) return fail(CCAN_ERR_USAGE, "ccan_config_set: null argument");
  return guarded([&] { config->config.set(key, value); });
}

ccan_status ccan_config_get(const ccan_config* config, const char* key, char* buf, size_t capacity, size_t* needed) {
  if (config == nullptr || key == nullptr) return fail(CCAN_ERR_USAGE, "ccan_config_get: null argument");
  std::string value;
  const ccan_status s = guarded([&] { value = config->config.get(key); });
  return s != CCAN_OK ? s : copy_out(value, buf, capacity, needed);
}

ccan_status ccan_config_dump(const ccan_config* config, char* buf, size_t capacity, size_t* needed) {
  if (config == nullptr) return fail(CCAN_ERR_USAGE, "ccan_config_dump: null config");
  return copy_out(config->config.dump(), buf, capacity, needed);
}

const char* ccan_command_list(void) {
  static const std::string list = [] {
    std::string s;
    for (const auto& n : ccan::command_names()) s += (s.empty() ? "" : " ") + n;
    return s;
  }();
  return list.c_str();
}

ccan_status ccan_run(const ccan_config* config, const char* command) {
  if (config == nullptr || command == nullptr) return fail(CCAN_ERR_USAGE, "ccan_run: null argument");
  return guarded([&] {
    ccan::dispatch(command, config->config, std::cout);
    std::cout.flush();
  });
}

ccan_status ccan_model_load(const char* checkpoint_path, ccan_model** out) {
  if (checkpoint_path == nullptr || out == nullptr) return fail(CCAN_ERR_USAGE, "ccan_model_load: null argument");
  *out = nullptr;
  return guarded([&] { *out = new ccan_model{ccan::load_checkpoint(checkpoint_path)}; });
}

void ccan_model_destroy(ccan_model* model) { delete model; }

size_t ccan_model_output_dim(const ccan_model* model) {
  return model == nullptr ? 0 : model->model.config().output_dim();
}

ccan_status ccan_model_predict_file(const ccan_model* model, const char* bag_path, double* probs, size_t capacity,
                                    size_t* count) {
  if (model == nullptr || bag_path == nullptr) return fail(CCAN_ERR_USAGE, "ccan_model_predict_file: null argument");
  std::vector<double> p;
  const ccan_status s = guarded([&] { p = model->model.predict(ccan::read_bag(bag_path)); });
  if (s != CCAN_OK) return s;
  if (count != nullptr) *count = p.size();
  if (probs == nullptr || capacity < p.size()) return fail(CCAN_ERR_BUFFER_TOO_SMALL, "probability buffer too small");
  std::copy(p.begin(), p.end(), probs);
  return CCAN_OK;
}

ccan_status ccan_auc_binary(const double* scores, const int* labels, size_t n, double* out) {
  if (scores == nullptr || labels == nullptr || out == nullptr) return fail(CCAN_ERR_USAGE, "ccan_auc_binary: null argument");
  return guarded([&] { *out = ccan::auc_binary({scores, n}, {labels, n}); });
}

ccan_status ccan_count_macs(const ccan_config* config, size_t tokens, uint64_t* out) {
  if (config == nullptr || out == nullptr) return fail(CCAN_ERR_USAGE, "ccan_count_macs: null argument");
  return guarded([&] { *out = ccan::count_macs(config->config.model_config(), tokens); });
}

}  // extern "C"
