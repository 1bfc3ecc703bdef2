#include "modnn/nn/params.hpp"

#include "modnn/error.hpp"
#include "modnn/hash.hpp"

namespace modnn::nn {

std::size_t ParamSet::add(std::string name, Matrix value) {
  for (const auto& p : params_) {
    if (p.name == name) {
      throw ContractError("duplicate parameter name '" + name + "'");
    }
  }
  params_.push_back({std::move(name), std::move(value)});
  return params_.size() - 1;
}

std::size_t ParamSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name == name) return i;
  }
  throw ContractError("unknown parameter '" + name + "'");
}

std::vector<Var> ParamSet::bind(Tape& tape, bool trainable) const {
  std::vector<Var> vars;
  vars.reserve(params_.size());
  for (const auto& p : params_) {
    vars.push_back(trainable ? tape.leaf(p.value) : tape.constant(p.value));
  }
  return vars;
}

nlohmann::json ParamSet::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : params_) {
    nlohmann::json values = nlohmann::json::array();
    for (Index r = 0; r < p.value.rows(); ++r) {
      for (Index c = 0; c < p.value.cols(); ++c) {
        values.push_back(p.value(r, c));
      }
    }
    arr.push_back({{"name", p.name}, {"shape", {p.value.rows(), p.value.cols()}}, {"values", values}});
  }
  return arr;
}

void ParamSet::assign_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != params_.size()) {
    throw IntegrityError("checkpoint parameter list does not match the model layout");
  }
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& e = j[i];
    auto& p = params_[i];
    if (e.at("name").get<std::string>() != p.name) {
      throw IntegrityError("checkpoint parameter " + std::to_string(i) + " is '" +
                           e.at("name").get<std::string>() + "', expected '" + p.name + "'");
    }
    const auto shape = e.at("shape");
    if (shape.size() != 2 || shape[0].get<Index>() != p.value.rows() ||
        shape[1].get<Index>() != p.value.cols()) {
      throw IntegrityError("checkpoint parameter '" + p.name + "' has the wrong shape");
    }
    const auto& values = e.at("values");
    if (!values.is_array() || static_cast<Index>(values.size()) != p.value.size()) {
      throw IntegrityError("checkpoint parameter '" + p.name + "' has the wrong value count");
    }
    std::size_t k = 0;
    for (Index r = 0; r < p.value.rows(); ++r) {
      for (Index c = 0; c < p.value.cols(); ++c) {
        if (!values[k].is_number()) {
          throw IntegrityError("checkpoint parameter '" + p.name + "' holds a non-numeric value");
        }
        p.value(r, c) = values[k++].get<double>();
      }
    }
  }
}

std::uint64_t ParamSet::checksum() const {
  Fnv1a h;
  for (const auto& p : params_) {
    h.text(p.name);
    h.u64(static_cast<std::uint64_t>(p.value.rows()));
    h.u64(static_cast<std::uint64_t>(p.value.cols()));
    for (Index r = 0; r < p.value.rows(); ++r) {
      for (Index c = 0; c < p.value.cols(); ++c) {
        h.f64(p.value(r, c));
      }
    }
  }
  return h.digest();
}

}  // namespace modnn::nn
