#include <cstdio>
#include <fstream>
#include <sstream>

#include "modnn/error.hpp"
#include "modnn/hash.hpp"
#include "modnn/model/neural.hpp"

namespace modnn {

namespace {

constexpr const char* kFormat = "modnn-checkpoint";
constexpr int kVersion = 1;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t model_digest(const NeuralModel& m) {
  Fnv1a h;
  h.text(m.variant());
  h.text(m.shape().to_json().dump());
  const NormStats& s = m.stats();
  for (const ChannelStats* c : {&s.t_out, &s.solar, &s.occ, &s.u_hvac, &s.t_zone}) {
    h.f64(c->mean);
    h.f64(c->std);
  }
  h.u64(m.params().checksum());
  return h.digest();
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kModnn:
      return "modnn";
    case Variant::kLstm:
      return "lstm";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  if (name == "modnn") return Variant::kModnn;
  if (name == "lstm") return Variant::kLstm;
  throw ConfigError("unknown model variant '" + name + "' (expected modnn or lstm)");
}

nlohmann::json ModelShape::to_json() const {
  return {{"history", history}, {"horizon", horizon}, {"hidden", hidden}, {"latent", latent}};
}

ModelShape ModelShape::from_json(const nlohmann::json& j) {
  ModelShape s;
  s.history = j.at("history").get<std::size_t>();
  s.horizon = j.at("horizon").get<std::size_t>();
  s.hidden = j.at("hidden").get<int>();
  s.latent = j.at("latent").get<int>();
  return s;
}

std::unique_ptr<NeuralModel> make_model(Variant variant, ModelShape shape, NormStats stats,
                                        std::uint64_t seed) {
  switch (variant) {
    case Variant::kModnn:
      return std::make_unique<ModnnModel>(shape, stats, seed);
    case Variant::kLstm:
      return std::make_unique<LstmModel>(shape, stats, seed);
  }
  throw ConfigError("unknown model variant");
}

nlohmann::json checkpoint_json(const NeuralModel& model, const std::string& config_hash) {
  return {{"format", kFormat},
          {"version", kVersion},
          {"variant", model.variant()},
          {"shape", model.shape().to_json()},
          {"normalization", model.stats().to_json()},
          {"config_hash", config_hash},
          {"params", model.params().to_json()},
          {"checksum", hex64(model_digest(model))}};
}

std::string checkpoint_text(const NeuralModel& model, const std::string& config_hash) {
  return checkpoint_json(model, config_hash).dump(1) + "\n";
}

void save_checkpoint(const NeuralModel& model, const std::string& path, const std::string& config_hash) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw IntegrityError("cannot open '" + path + "' for writing");
  }
  os << checkpoint_text(model, config_hash);
  if (!os) {
    throw IntegrityError("write to '" + path + "' failed");
  }
}

std::unique_ptr<NeuralModel> checkpoint_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object() || j.value("format", "") != kFormat) {
      throw IntegrityError("not a modnn checkpoint");
    }
    if (j.at("version").get<int>() != kVersion) {
      throw IntegrityError("unsupported checkpoint version " + j.at("version").dump());
    }
    const Variant variant = parse_variant(j.at("variant").get<std::string>());
    const ModelShape shape = ModelShape::from_json(j.at("shape"));
    const NormStats stats = NormStats::from_json(j.at("normalization"));
    auto model = make_model(variant, shape, stats, 0);
    model->mutable_params().assign_from_json(j.at("params"));
    const std::string expected = j.at("checksum").get<std::string>();
    if (hex64(model_digest(*model)) != expected) {
      throw IntegrityError("checkpoint checksum mismatch");
    }
    return model;
  } catch (const IntegrityError&) {
    throw;
  } catch (const std::exception& e) {
    throw IntegrityError(std::string("malformed checkpoint: ") + e.what());
  }
}

std::unique_ptr<NeuralModel> load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw IntegrityError("cannot open checkpoint '" + path + "'");
  }
  std::stringstream ss;
  ss << is.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const std::exception& e) {
    throw IntegrityError("checkpoint '" + path + "' is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace modnn
