#include "modnn/pipeline/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>

#include "modnn/control/mpc.hpp"
#include "modnn/error.hpp"
#include "modnn/eval/consistency.hpp"
#include "modnn/model/reference.hpp"
#include "modnn/testbed/simulate.hpp"
#include "modnn/train/trainer.hpp"

namespace modnn {

namespace files {
std::string checkpoint(Variant v) { return to_string(v) + ".ckpt.json"; }
std::string train_report(Variant v) { return to_string(v) + "_train.json"; }
std::string train_curve(Variant v) { return to_string(v) + "_train.csv"; }
std::string audit_report(Variant v) { return to_string(v) + "_audit.json"; }
std::string audit_pairs(Variant v) { return to_string(v) + "_pairs.csv"; }
std::string control_frame(const std::string& controller) { return controller + "_frame.csv"; }
}  // namespace files

namespace {

namespace fs = std::filesystem;

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IntegrityError("cannot create output directory '" + dir + "'");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IntegrityError("cannot write '" + path + "'");
  out << text;
  if (!out.flush()) throw IntegrityError("write failed for '" + path + "'");
}

void write_json(const std::string& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

std::string provenance(const ExperimentConfig& config) {
  return "config_hash " + config.hash() + "\nseed " + std::to_string(config.seed);
}

testbed::TimeSeriesFrame input_frame(const std::string& out_dir) {
  const std::string path = join(out_dir, files::kFrame);
  if (!fs::exists(path)) throw IntegrityError("missing '" + path + "'; run simulate first");
  return testbed::load_frame(path);
}

std::unique_ptr<NeuralModel> input_checkpoint(const std::string& out_dir, Variant v) {
  const std::string path = join(out_dir, files::checkpoint(v));
  if (!fs::exists(path)) throw IntegrityError("missing '" + path + "'; run train first");
  auto model = load_checkpoint(path);
  if (model->kind() != v) throw IntegrityError("'" + path + "' holds a " + model->variant() + " model");
  return model;
}

double min_hvac(const testbed::TimeSeriesFrame& frame) {
  double lo = 0.0;
  for (double u : frame.u_hvac) lo = std::min(lo, u);
  return lo;
}

}  // namespace

void cmd_simulate(const ExperimentConfig& config, const std::string& out_dir) {
  config.validate();
  ensure_dir(out_dir);
  const auto frame = testbed::run_baseline(config.simulation());
  write_text(join(out_dir, files::kConfig), "# config_hash " + config.hash() + "\n" + config.canonical());
  testbed::save_frame(frame, join(out_dir, files::kFrame), provenance(config));
}

void cmd_train(const ExperimentConfig& config, const std::string& out_dir) {
  config.validate();
  const auto frame = input_frame(out_dir);
  const DataSplit data = split_frame(frame, config.shape.history, config.shape.horizon, config.split);
  for (Variant v : config.variants) {
    auto result = train(v, config.shape, data, config.training());
    result.report.config_hash = config.hash();
    save_checkpoint(*result.model, join(out_dir, files::checkpoint(v)), config.hash());
    write_json(join(out_dir, files::train_report(v)), result.report.to_json());
    write_text(join(out_dir, files::train_curve(v)), result.report.to_csv(provenance(config)));
  }
}

void cmd_audit(const ExperimentConfig& config, const std::string& out_dir) {
  config.validate();
  const auto frame = input_frame(out_dir);
  const DataSplit data = split_frame(frame, config.shape.history, config.shape.horizon, config.split);
  const auto held_out = frame.slice(data.val_begin, frame.size());
  const AuditOptions options = config.auditing(min_hvac(frame));
  for (Variant v : config.variants) {
    const auto model = input_checkpoint(out_dir, v);
    const Audit audit = full_report(*model, data.val.windows, held_out, options, config.hash());
    write_json(join(out_dir, files::audit_report(v)), audit.report.to_json());
    save_pairs(audit.pairs, join(out_dir, files::audit_pairs(v)), provenance(config));
  }
}

nlohmann::json cmd_control(const ExperimentConfig& config, const std::string& out_dir) {
  config.validate();
  const auto& run = config.control;
  const auto bed = config.closed_loop_testbed();

  std::vector<std::pair<std::string, std::shared_ptr<const DynamicsModel>>> mpc;
  std::shared_ptr<const DynamicsModel> modnn;
  for (Variant v : config.variants) {
    std::shared_ptr<const DynamicsModel> model = input_checkpoint(out_dir, v);
    if (v == Variant::kModnn) modnn = model;
    mpc.emplace_back("mpc_" + to_string(v), model);
  }
  if ((run.mirrored || run.policy) && !modnn) {
    throw ConfigError("control.mirrored and control.policy need modnn in model.variants");
  }
  if (run.mirrored) mpc.emplace_back("mpc_mirrored_modnn", std::make_shared<MirroredModel>(modnn));

  std::vector<std::unique_ptr<Controller>> controllers;
  controllers.push_back(std::make_unique<OnOffController>());
  for (const auto& [name, model] : mpc) controllers.push_back(std::make_unique<MpcController>(name, model));
  if (run.policy) {
    const auto frame = input_frame(out_dir);
    const DataSplit data = split_frame(frame, config.shape.history, config.shape.horizon, config.split);
    const auto scenarios = make_scenarios(frame.slice(0, data.train_rows), config.simulation(), run.loop.settings,
                                          config.shape.history, config.shape.horizon, run.policy_stride);
    PolicyTrainOptions po = run.policy_options;
    po.seed = config.seed;
    std::shared_ptr<const ControlLawNet> net = train_control_law(*modnn, scenarios, po).net;
    controllers.push_back(std::make_unique<PolicyController>("policy_modnn", net, config.shape.history));
  }

  ensure_dir(out_dir);
  testbed::TimeSeriesFrame baseline;
  nlohmann::json entries = nlohmann::json::array();
  for (auto& c : controllers) {
    const auto frame = closed_loop(*c, bed, run.loop);
    const std::string name = c->name();
    if (entries.empty()) baseline = frame;
    testbed::save_frame(frame, join(out_dir, files::control_frame(name)), provenance(config));
    nlohmann::json j = control_metrics(name, frame, baseline, bed, run.loop.settings).to_json();
    j["frame"] = files::control_frame(name);
    entries.push_back(j);
  }
  const auto& s = run.loop.settings;
  nlohmann::json metrics = {
      {"config_hash", config.hash()},
      {"seed", config.seed},
      {"control_seed", bed.seed},
      {"settings",
       {{"w_obj", s.w_obj},
        {"w_comfort", s.w_comfort},
        {"w_input", s.w_input},
        {"power_scale_w", s.power_scale},
        {"price_offpeak", s.price_offpeak},
        {"price_peak", s.price_peak},
        {"cop", bed.hvac.cop},
        {"comfort_low_c", s.comfort_low},
        {"margin_c", s.margin},
        {"peak_start_h", bed.schedule.peak_start},
        {"peak_end_h", bed.schedule.peak_end},
        {"warmup_days", run.loop.warmup_days},
        {"control_days", run.loop.control_days}}},
      {"controllers", entries}};
  write_json(join(out_dir, files::kMetrics), metrics);
  return metrics;
}

void run_command(const std::string& command, const ExperimentConfig& config, const std::string& out_dir) {
  if (command == "simulate") {
    cmd_simulate(config, out_dir);
  } else if (command == "train") {
    cmd_train(config, out_dir);
  } else if (command == "audit") {
    cmd_audit(config, out_dir);
  } else if (command == "control") {
    cmd_control(config, out_dir);
  } else {
    throw ConfigError("unknown command '" + command + "'");
  }
}

}  // namespace modnn
