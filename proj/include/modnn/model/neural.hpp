#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "modnn/model/dynamics.hpp"
#include "modnn/nn/layers.hpp"
#include "modnn/nn/params.hpp"

namespace modnn {

enum class Variant { kModnn, kLstm };

std::string to_string(Variant v);
/// "modnn" or "lstm"; throws ConfigError otherwise.
Variant parse_variant(const std::string& name);

/// Window and layer sizes; recorded in checkpoints.
struct ModelShape {
  std::size_t history = 96;
  std::size_t horizon = 96;
  int hidden = 16;  // recurrent state width per module
  int latent = 4;   // width of each latent heat-flux vector

  nlohmann::json to_json() const;
  static ModelShape from_json(const nlohmann::json& j);
  bool operator==(const ModelShape&) const = default;
};

/// A trainable sequence model: parameters, normalisation and a batched forward pass.
class NeuralModel : public DynamicsModel {
 public:
  NeuralModel(ModelShape shape, NormStats stats) : shape_(shape), stats_(stats) {}

  std::size_t history_length() const override { return shape_.history; }
  std::size_t horizon() const override { return shape_.horizon; }
  virtual Variant kind() const = 0;
  std::string variant() const override { return to_string(kind()); }

  const ModelShape& shape() const { return shape_; }
  const NormStats& stats() const { return stats_; }
  const nn::ParamSet& params() const { return params_; }
  nn::ParamSet& mutable_params() { return params_; }

  /// One B x 1 node per decoder step holding predicted zone temperatures in degC.
  /// `vars` are this model's parameters bound on `tape` in ParamSet order.
  virtual std::vector<nn::Var> predict_batch(nn::Tape& tape, nn::Bound vars,
                                             const WindowBatch& batch) const = 0;
  virtual std::unique_ptr<NeuralModel> clone() const = 0;

 protected:
  ModelShape shape_;
  NormStats stats_;
  nn::ParamSet params_;
};

/// Modularised network whose HVAC pathway is monotone by construction.
///
/// External and internal heat-transfer modules are GRU encoder / current-cell /
/// decoder stacks that read only disturbances, so their latent fluxes do not
/// depend on u. The HVAC module and the heat-balance module are positive linear
/// maps, and the decoder integrates
///   y_t = y_{t-1} + balance(q_ext_t + q_int_t + hvac(u_t)).
/// Hence d y_t / d u_s >= 0 for s <= t and = 0 for s > t.
class ModnnModel final : public NeuralModel {
 public:
  struct Layers {
    nn::GruCell ext_encoder;
    nn::GruCell ext_current;
    nn::GruCell ext_decoder;
    nn::LinearLayer ext_flux;
    nn::GruCell int_encoder;
    nn::GruCell int_current;
    nn::GruCell int_decoder;
    nn::LinearLayer int_flux;
    nn::PositiveLinearLayer hvac;
    nn::PositiveLinearLayer balance;
  };

  ModnnModel(ModelShape shape, NormStats stats, std::uint64_t seed);

  Variant kind() const override { return Variant::kModnn; }
  const Layers& layers() const { return layers_; }

  std::unique_ptr<Rollout> condition(const PredictionWindow& window) const override;
  std::vector<nn::Var> predict_batch(nn::Tape& tape, nn::Bound vars,
                                     const WindowBatch& batch) const override;
  std::unique_ptr<NeuralModel> clone() const override;

  /// Sum of external and internal latent fluxes, one B x latent node per decoder step.
  std::vector<nn::Var> disturbance_flux(nn::Tape& tape, nn::Bound vars,
                                        const WindowBatch& batch) const;

 private:
  Layers layers_;
};

/// Unconstrained encoder / current-cell / decoder LSTM over all channels with a linear readout.
class LstmModel final : public NeuralModel {
 public:
  struct Layers {
    nn::LstmCell encoder;
    nn::LstmCell current;
    nn::LstmCell decoder;
    nn::LinearLayer readout;
  };

  LstmModel(ModelShape shape, NormStats stats, std::uint64_t seed);

  Variant kind() const override { return Variant::kLstm; }
  const Layers& layers() const { return layers_; }

  std::unique_ptr<Rollout> condition(const PredictionWindow& window) const override;
  std::vector<nn::Var> predict_batch(nn::Tape& tape, nn::Bound vars,
                                     const WindowBatch& batch) const override;
  std::unique_ptr<NeuralModel> clone() const override;

 private:
  Layers layers_;
};

std::unique_ptr<NeuralModel> make_model(Variant variant, ModelShape shape, NormStats stats,
                                        std::uint64_t seed);

/// Versioned JSON checkpoint: variant, shape, normalisation, named row-major
/// parameters and a checksum over all of them.
nlohmann::json checkpoint_json(const NeuralModel& model, const std::string& config_hash = {});
std::string checkpoint_text(const NeuralModel& model, const std::string& config_hash = {});
void save_checkpoint(const NeuralModel& model, const std::string& path,
                     const std::string& config_hash = {});
/// Throws IntegrityError on parse failures, checksum mismatch or layout mismatch.
std::unique_ptr<NeuralModel> checkpoint_from_json(const nlohmann::json& j);
std::unique_ptr<NeuralModel> load_checkpoint(const std::string& path);

}  // namespace modnn
