#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "modnn/nn/tape.hpp"

namespace modnn::nn {

struct NamedParam {
  std::string name;
  Matrix value;
};

/// Ordered, named collection of trainable matrices.
class ParamSet {
 public:
  /// Registers a parameter; names must be unique.
  std::size_t add(std::string name, Matrix value);

  std::size_t size() const { return params_.size(); }
  NamedParam& operator[](std::size_t i) { return params_[i]; }
  const NamedParam& operator[](std::size_t i) const { return params_[i]; }
  std::size_t index_of(const std::string& name) const;
  Matrix& at(const std::string& name) { return params_[index_of(name)].value; }
  const Matrix& at(const std::string& name) const { return params_[index_of(name)].value; }

  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  /// Places every parameter on the tape, as leaves when `trainable`, constants otherwise.
  std::vector<Var> bind(Tape& tape, bool trainable) const;

  /// [{name, shape: [rows, cols], values: [row-major]}]
  nlohmann::json to_json() const;
  /// Restores values into an existing layout. Names, order and shapes must match.
  void assign_from_json(const nlohmann::json& j);
  /// 64-bit FNV-1a over names, shapes and the raw bits of every value.
  std::uint64_t checksum() const;

 private:
  std::vector<NamedParam> params_;
};

using Bound = std::span<const Var>;

}  // namespace modnn::nn
