#include "modnn/modnn.h"

#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>

#include "modnn/error.hpp"
#include "modnn/model/neural.hpp"
#include "modnn/pipeline/pipeline.hpp"
#include "modnn/testbed/frame.hpp"

struct modnn_config {
  modnn::ExperimentConfig value;
};

struct modnn_model {
  std::unique_ptr<modnn::NeuralModel> value;
  std::string variant;
};

namespace {

thread_local std::string g_last_error;

modnn_status fail(modnn_status s, const std::string& message) {
  g_last_error = message;
  return s;
}

template <class F>
modnn_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return MODNN_OK;
  } catch (const modnn::Error& e) {
    return fail(static_cast<modnn_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(MODNN_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MODNN_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(MODNN_ERR_INTERNAL, "unknown error");
  }
}

void require(const void* p, const char* what) {
  if (!p) throw modnn::ContractError(std::string(what) + " must not be null");
}

std::string out_dir_of(const modnn_config* config, const char* out_dir) {
  return out_dir ? std::string(out_dir) : config->value.out_dir;
}

template <class F>
modnn_status command(const modnn_config* config, const char* out_dir, F&& f) {
  return guarded([&] {
    require(config, "config");
    f(config->value, out_dir_of(config, out_dir));
  });
}

}  // namespace

extern "C" {

const char* modnn_version(void) { return "1.0.0"; }

const char* modnn_last_error(void) { return g_last_error.c_str(); }

modnn_status modnn_config_load(const char* path, modnn_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new modnn_config{modnn::load_config(path)};
  });
}

modnn_status modnn_config_parse(const char* text, modnn_config** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = new modnn_config{modnn::parse_config(text)};
  });
}

modnn_status modnn_config_set(modnn_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    modnn::ExperimentConfig next = config->value;
    next.set(key, value);
    next.validate();
    config->value = std::move(next);
  });
}

modnn_status modnn_config_get(const modnn_config* config, const char* key, char* buf, size_t cap,
                              size_t* needed) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    const std::string v = config->value.get(key);
    if (needed) *needed = v.size() + 1;
    if (!buf || cap < v.size() + 1) throw modnn::ContractError("buffer too small for '" + std::string(key) + "'");
    std::memcpy(buf, v.c_str(), v.size() + 1);
  });
}

modnn_status modnn_config_hash(const modnn_config* config, char out[17]) {
  return guarded([&] {
    require(config, "config");
    require(out, "out");
    const std::string h = config->value.hash();
    std::memcpy(out, h.c_str(), 17);
  });
}

void modnn_config_free(modnn_config* config) { delete config; }

modnn_status modnn_simulate(const modnn_config* config, const char* out_dir) {
  return command(config, out_dir, modnn::cmd_simulate);
}

modnn_status modnn_train(const modnn_config* config, const char* out_dir) {
  return command(config, out_dir, modnn::cmd_train);
}

modnn_status modnn_audit(const modnn_config* config, const char* out_dir) {
  return command(config, out_dir, modnn::cmd_audit);
}

modnn_status modnn_control(const modnn_config* config, const char* out_dir) {
  return command(config, out_dir, [](const auto& c, const auto& d) { modnn::cmd_control(c, d); });
}

modnn_status modnn_run(const char* name, const modnn_config* config, const char* out_dir) {
  return guarded([&] {
    require(name, "command");
    require(config, "config");
    modnn::run_command(name, config->value, out_dir_of(config, out_dir));
  });
}

modnn_status modnn_model_load(const char* path, modnn_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto m = modnn::load_checkpoint(path);
    std::string variant = m->variant();
    *out = new modnn_model{std::move(m), std::move(variant)};
  });
}

const char* modnn_model_variant(const modnn_model* model) { return model ? model->variant.c_str() : ""; }

size_t modnn_model_history(const modnn_model* model) { return model ? model->value->history_length() : 0; }

size_t modnn_model_horizon(const modnn_model* model) { return model ? model->value->horizon() : 0; }

modnn_status modnn_model_predict(const modnn_model* model, const char* frame_path, size_t anchor, double* out,
                                 size_t cap) {
  return guarded([&] {
    require(model, "model");
    require(frame_path, "frame_path");
    require(out, "out");
    const auto& m = *model->value;
    if (cap < m.horizon()) throw modnn::ContractError("output buffer shorter than the horizon");
    const auto frame = modnn::testbed::load_frame(frame_path);
    if (anchor < m.history_length() || anchor + m.horizon() + 1 > frame.size()) {
      throw modnn::ContractError("anchor " + std::to_string(anchor) + " leaves no full window in the frame");
    }
    const auto y = m.forward(modnn::window_at(frame, anchor, m.history_length(), m.horizon()));
    std::copy(y.begin(), y.end(), out);
  });
}

void modnn_model_free(modnn_model* model) { delete model; }

}  // extern "C"
