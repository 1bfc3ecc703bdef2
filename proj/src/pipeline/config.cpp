#include "modnn/pipeline/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <type_traits>

#include "modnn/error.hpp"
#include "modnn/hash.hpp"
#include "modnn/random.hpp"

namespace modnn {

namespace {

constexpr std::uint64_t kControlStream = 6;
constexpr std::uint64_t kAuditStream = 9;

static_assert(std::is_same_v<std::uint64_t, std::size_t>);

template <class T>
struct TimeRef {
  T& v;
};
template <class T>
struct VariantsRef {
  T& v;
};

/// Calls f(key, ref) for every configurable field; works for const and mutable configs.
template <class Cfg, class F>
void for_each_field(Cfg& c, F&& f) {
  auto& tb = c.testbed;
  auto& ctl = c.control;
  auto& s = ctl.loop.settings;
  f("seed", c.seed);
  f("out_dir", c.out_dir);
  f("testbed.days", tb.days);
  f("testbed.start", TimeRef<std::remove_reference_t<decltype((tb.start))>>{tb.start});
  f("testbed.occupants", tb.occupants);
  f("testbed.t_zone_init", tb.t_zone_init);
  f("rc.c_zone", tb.rc.c_zone);
  f("rc.r_env", tb.rc.r_env);
  f("rc.a_solar", tb.rc.a_solar);
  f("rc.q_person", tb.rc.q_person);
  f("rc.q_base", tb.rc.q_base);
  f("hvac.t_supply", tb.hvac.t_supply);
  f("hvac.flow_max", tb.hvac.flow_max);
  f("hvac.rho_air", tb.hvac.rho_air);
  f("hvac.cp_air", tb.hvac.cp_air);
  f("hvac.cop", tb.hvac.cop);
  f("schedule.setpoint_occupied", tb.schedule.setpoint_occupied);
  f("schedule.setpoint_unoccupied", tb.schedule.setpoint_unoccupied);
  f("schedule.deadband", tb.schedule.deadband);
  f("schedule.depart_min", tb.schedule.depart_min);
  f("schedule.depart_max", tb.schedule.depart_max);
  f("schedule.arrive_min", tb.schedule.arrive_min);
  f("schedule.arrive_max", tb.schedule.arrive_max);
  f("schedule.peak_start", tb.schedule.peak_start);
  f("schedule.peak_end", tb.schedule.peak_end);
  f("weather.t_out_mean", tb.weather.t_out_mean);
  f("weather.t_out_amplitude", tb.weather.t_out_amplitude);
  f("weather.t_out_peak_hour", tb.weather.t_out_peak_hour);
  f("weather.t_out_noise", tb.weather.t_out_noise);
  f("weather.t_out_day_spread", tb.weather.t_out_day_spread);
  f("weather.solar_peak", tb.weather.solar_peak);
  f("weather.sunrise", tb.weather.sunrise);
  f("weather.sunset", tb.weather.sunset);
  f("weather.clearness_min", tb.weather.clearness_min);
  f("model.variants", VariantsRef<std::remove_reference_t<decltype((c.variants))>>{c.variants});
  f("model.history", c.shape.history);
  f("model.horizon", c.shape.horizon);
  f("model.hidden", c.shape.hidden);
  f("model.latent", c.shape.latent);
  f("train.epochs", c.train.epochs);
  f("train.lr", c.train.lr);
  f("train.batch", c.train.batch);
  f("train.trv_windows", c.train.trv_windows);
  f("train.train_days", c.split.train_days);
  f("train.val_days", c.split.val_days);
  f("train.train_stride", c.split.train_stride);
  f("train.val_stride", c.split.val_stride);
  f("audit.window_stride", c.audit.window_stride);
  f("audit.max_pairs", c.audit.max_pairs);
  f("audit.jacobian_windows", c.audit.jacobian_windows);
  f("control.warmup_days", ctl.loop.warmup_days);
  f("control.days", ctl.loop.control_days);
  f("control.w_obj", s.w_obj);
  f("control.w_comfort", s.w_comfort);
  f("control.w_input", s.w_input);
  f("control.power_scale", s.power_scale);
  f("control.price_offpeak", s.price_offpeak);
  f("control.price_peak", s.price_peak);
  f("control.comfort_low", s.comfort_low);
  f("control.margin", s.margin);
  f("control.iters", s.opt.iters);
  f("control.lr", s.opt.lr);
  f("control.lr_decay", s.opt.lr_decay);
  f("control.grad_tol", s.opt.grad_tol);
  f("control.mirrored", ctl.mirrored);
  f("control.policy", ctl.policy);
  f("policy.epochs", ctl.policy_options.epochs);
  f("policy.lr", ctl.policy_options.lr);
  f("policy.batch", ctl.policy_options.batch);
  f("policy.hidden", ctl.policy_options.hidden);
  f("policy.stride", ctl.policy_stride);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& text, const char* expected) {
  throw ConfigError("config key '" + key + "': expected " + expected + ", got '" + text + "'");
}

template <class T>
void parse_number(const std::string& key, const std::string& text, T& out, const char* expected) {
  T v{};
  const char* end = text.data() + text.size();
  const auto r = std::from_chars(text.data(), end, v);
  if (text.empty() || r.ec != std::errc() || r.ptr != end) bad_value(key, text, expected);
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(v)) bad_value(key, text, expected);
  }
  out = v;
}

void parse_into(const std::string& key, const std::string& text, double& out) {
  parse_number(key, text, out, "a finite number");
}
void parse_into(const std::string& key, const std::string& text, int& out) {
  parse_number(key, text, out, "an integer");
}
void parse_into(const std::string& key, const std::string& text, std::size_t& out) {
  if (!text.empty() && text[0] == '-') bad_value(key, text, "a non-negative integer");
  parse_number(key, text, out, "a non-negative integer");
}
void parse_into(const std::string& key, const std::string& text, bool& out) {
  if (text == "true" || text == "1") {
    out = true;
  } else if (text == "false" || text == "0") {
    out = false;
  } else {
    bad_value(key, text, "true or false");
  }
}
void parse_into(const std::string& key, const std::string& text, std::string& out) {
  if (text.empty()) bad_value(key, text, "a non-empty string");
  out = text;
}
void parse_into(const std::string& key, const std::string& text, TimeRef<std::int64_t> out) {
  try {
    out.v = testbed::parse_iso8601(text);
  } catch (const Error&) {
    bad_value(key, text, "a UTC time like 2023-06-01T00:00:00Z");
  }
}
void parse_into(const std::string& key, const std::string& text, VariantsRef<std::vector<Variant>> out) {
  std::vector<Variant> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    Variant x;
    try {
      x = parse_variant(item);
    } catch (const ConfigError&) {
      bad_value(key, text, "a comma-separated list of modnn and lstm");
    }
    if (std::find(v.begin(), v.end(), x) != v.end()) bad_value(key, text, "distinct variants");
    v.push_back(x);
  }
  if (v.empty()) bad_value(key, text, "at least one variant");
  out.v = v;
}

std::string format(double v) { return testbed::format_double(v); }
std::string format(int v) { return std::to_string(v); }
std::string format(std::size_t v) { return std::to_string(v); }
std::string format(bool v) { return v ? "true" : "false"; }
std::string format(const std::string& v) { return v; }
std::string format(TimeRef<const std::int64_t> t) { return testbed::format_iso8601(t.v); }
std::string format(VariantsRef<const std::vector<Variant>> vs) {
  std::string out;
  for (Variant v : vs.v) out += (out.empty() ? "" : ",") + to_string(v);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void ExperimentConfig::validate() const {
  testbed.validate();
  if (testbed.days < 1) throw ConfigError("testbed.days must be at least 1");
  if (shape.history < 1 || shape.horizon < 1 || shape.hidden < 1 || shape.latent < 1) {
    throw ConfigError("model.history, model.horizon, model.hidden and model.latent must be positive");
  }
  if (train.epochs < 0) throw ConfigError("train.epochs must be non-negative");
  if (!(train.lr > 0.0)) throw ConfigError("train.lr must be positive");
  if (train.batch < 1) throw ConfigError("train.batch must be positive");
  if (split.train_days < 1 || split.val_days < 1) throw ConfigError("train.train_days and train.val_days must be positive");
  if (split.train_days + split.val_days > testbed.days) {
    throw ConfigError("train.train_days + train.val_days exceeds testbed.days");
  }
  if (split.train_stride < 1 || split.val_stride < 1) throw ConfigError("train strides must be positive");
  if (audit.window_stride < 1 || audit.max_pairs < 1 || audit.jacobian_windows < 1) {
    throw ConfigError("audit.window_stride, audit.max_pairs and audit.jacobian_windows must be positive");
  }
  if (control.loop.warmup_days < 0 || control.loop.control_days < 1) {
    throw ConfigError("control.warmup_days must be non-negative and control.days positive");
  }
  if (static_cast<std::size_t>(control.loop.warmup_days) * testbed::kStepsPerDay < shape.history) {
    throw ConfigError("control.warmup_days must cover model.history steps");
  }
  control.loop.settings.validate();
  const auto& p = control.policy_options;
  if (p.epochs < 0 || !(p.lr > 0.0) || p.batch < 1 || p.hidden < 1 || control.policy_stride < 1) {
    throw ConfigError("policy.epochs, policy.lr, policy.batch, policy.hidden and policy.stride out of range");
  }
}

testbed::TestbedConfig ExperimentConfig::simulation() const {
  testbed::TestbedConfig c = testbed;
  c.seed = seed;
  return c;
}

TrainOptions ExperimentConfig::training() const {
  TrainOptions o = train;
  o.seed = seed;
  return o;
}

AuditOptions ExperimentConfig::auditing(double u_floor) const {
  AuditOptions o;
  o.u_floor = u_floor;
  o.u_ceiling = 0.0;
  o.jacobian_windows = audit.jacobian_windows;
  o.pq.u_floor = u_floor;
  o.pq.window_stride = audit.window_stride;
  o.pq.max_pairs = audit.max_pairs;
  o.pq.seed = derive_seed(seed, kAuditStream);
  return o;
}

testbed::TestbedConfig ExperimentConfig::closed_loop_testbed() const {
  testbed::TestbedConfig c = testbed;
  c.seed = derive_seed(seed, kControlStream);
  return c;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  bool found = false;
  for_each_field(*this, [&](const char* k, auto&& ref) {
    if (key == k) {
      parse_into(key, value, ref);
      found = true;
    }
  });
  if (!found) throw ConfigError("unknown config key '" + key + "'");
}

std::string ExperimentConfig::get(const std::string& key) const {
  std::string out;
  bool found = false;
  for_each_field(*this, [&](const char* k, auto&& ref) {
    if (key == k) {
      out = format(ref);
      found = true;
    }
  });
  if (!found) throw ConfigError("unknown config key '" + key + "'");
  return out;
}

std::vector<std::string> ExperimentConfig::keys() {
  std::vector<std::string> out;
  const ExperimentConfig c;
  for_each_field(c, [&](const char* k, auto&&) { out.emplace_back(k); });
  return out;
}

std::string ExperimentConfig::canonical() const {
  std::map<std::string, std::string> sorted;
  for_each_field(*this, [&](const char* k, auto&& ref) { sorted[k] = format(ref); });
  sorted.erase("out_dir");
  std::string out;
  for (const auto& [k, v] : sorted) out += k + "=" + v + "\n";
  return out;
}

std::string ExperimentConfig::hash() const {
  Fnv1a h;
  h.text(canonical());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h.digest()));
  return buf;
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig c;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(number) + ": empty key");
    if (!seen.insert(key).second) throw ConfigError("duplicate config key '" + key + "'");
    c.set(key, value);
  }
  if (!seen.contains("seed")) throw ConfigError("missing required config key 'seed'");
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace modnn
