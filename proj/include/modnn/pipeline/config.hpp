#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "modnn/control/mpc.hpp"
#include "modnn/eval/consistency.hpp"
#include "modnn/model/neural.hpp"
#include "modnn/testbed/simulate.hpp"
#include "modnn/train/trainer.hpp"

namespace modnn {

struct AuditSettings {
  std::size_t window_stride = 4;
  std::size_t max_pairs = 1000;
  std::size_t jacobian_windows = 128;
};

struct ControlRunSettings {
  ClosedLoopOptions loop;
  bool mirrored = false;  // adds MPC through the sign-reflected ModNN
  bool policy = false;    // adds the control-law network trained through ModNN
  PolicyTrainOptions policy_options;
  std::size_t policy_stride = 16;
};

/// Everything one experiment needs; every field has a flat key.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  testbed::TestbedConfig testbed;
  std::vector<Variant> variants{Variant::kModnn, Variant::kLstm};
  ModelShape shape;
  SplitOptions split;
  TrainOptions train;
  AuditSettings audit;
  ControlRunSettings control;

  /// Range checks of every section. Throws ConfigError.
  void validate() const;

  /// Testbed with the experiment seed applied.
  testbed::TestbedConfig simulation() const;
  TrainOptions training() const;
  AuditOptions auditing(double u_floor) const;
  /// Testbed for closed-loop runs; its disturbances come from a separate seed stream.
  testbed::TestbedConfig closed_loop_testbed() const;

  /// Sets one key from text. Throws ConfigError for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static std::vector<std::string> keys();

  /// Sorted key=value lines of every key except out_dir.
  std::string canonical() const;
  /// 16 hex digits of FNV-1a over canonical().
  std::string hash() const;
};

/// Parses "key = value" lines; '#' starts a comment. `seed` is required.
/// Throws ConfigError naming the line or key.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);

}  // namespace modnn
