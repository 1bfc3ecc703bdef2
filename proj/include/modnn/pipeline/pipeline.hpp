#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "modnn/pipeline/config.hpp"

namespace modnn {

/// File names inside an output directory; commands communicate only through these.
namespace files {
inline constexpr const char* kConfig = "config.txt";
inline constexpr const char* kFrame = "frame.csv";
inline constexpr const char* kMetrics = "metrics.json";
std::string checkpoint(Variant v);    // <variant>.ckpt.json
std::string train_report(Variant v);  // <variant>_train.json
std::string train_curve(Variant v);   // <variant>_train.csv
std::string audit_report(Variant v);  // <variant>_audit.json
std::string audit_pairs(Variant v);   // <variant>_pairs.csv
std::string control_frame(const std::string& controller);  // <controller>_frame.csv
}  // namespace files

/// Baseline on-off run over testbed.days; writes frame.csv and config.txt.
void cmd_simulate(const ExperimentConfig& config, const std::string& out_dir);

/// Trains every configured variant on frame.csv; writes checkpoints and reports.
void cmd_train(const ExperimentConfig& config, const std::string& out_dir);

/// Audits every configured variant's checkpoint on the validation days of frame.csv.
void cmd_audit(const ExperimentConfig& config, const std::string& out_dir);

/// Closed-loop comparison of the on-off baseline and MPC through each checkpoint;
/// writes one frame per controller and metrics.json.
nlohmann::json cmd_control(const ExperimentConfig& config, const std::string& out_dir);

/// Dispatches "simulate", "train", "audit" or "control". Throws ConfigError for other names.
void run_command(const std::string& command, const ExperimentConfig& config, const std::string& out_dir);

}  // namespace modnn
