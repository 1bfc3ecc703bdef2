#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "modnn/model/dynamics.hpp"
#include "modnn/testbed/frame.hpp"

namespace modnn {

struct TrvResult {
  double plus = 0.0;   // degC h of cooling that warms relative to HVAC off
  double minus = 0.0;  // degC h of cooling removal that cools relative to max cooling
  std::size_t windows = 0;
};

/// Temperature response violation over whole-horizon constant injections.
/// Per window, with T_pred from the window's own u, T_up from u_ceiling and
/// T_down from u_floor everywhere:
///   plus  += sum_t max(0, T_pred - T_up) * 0.25
///   minus += sum_t max(0, T_down - T_pred) * 0.25
/// Throws ContractError unless u_floor <= every original u <= u_ceiling.
TrvResult trv(const DynamicsModel& model, std::span<const PredictionWindow> windows, double u_floor,
              double u_ceiling);

/// exp(-|x - y|^2 / (2 sigma^2)). Throws ContractError for sigma <= 0 or unequal lengths.
double gaussian_kernel(std::span<const double> x, std::span<const double> y, double sigma);

/// Biased (V-statistic) squared maximum mean discrepancy between the rows of P and Q:
///   mean_{P,P} K + mean_{Q,Q} K - 2 mean_{P,Q} K
/// Throws ContractError on an empty set, mismatched widths or sigma <= 0.
double mmd2(const nn::Matrix& p, const nn::Matrix& q, double sigma);

/// Median pairwise Euclidean distance over the rows of P and Q together.
double median_heuristic(const nn::Matrix& p, const nn::Matrix& q);

/// A one-step HVAC power change and the matching one-step temperature change.
struct ResponsePair {
  double du = 0.0;  // W
  double dt = 0.0;  // degC
};

struct PqOptions {
  double u_floor = 0.0;          // most negative HVAC power of the random test load
  std::size_t window_stride = 4;
  std::size_t max_pairs = 1000;  // per set, subsampled without replacement
  std::uint64_t seed = 0;
};

struct PqSets {
  std::vector<ResponsePair> p;  // model responses to a random test load
  std::vector<ResponsePair> q;  // consecutive differences of the raw frame
  nn::Matrix p_std;             // rows of P standardised jointly with Q
  nn::Matrix q_std;
  double du_mean = 0.0, du_std = 1.0;
  double dt_mean = 0.0, dt_std = 1.0;
  double sigma = 1.0;           // median heuristic on the standardised pairs
};

/// Raw-data pairs, causally aligned with the model's: pair j (1 <= j <= n - 2)
/// is (u_j - u_{j-1}, t_zone_{j+1} - t_zone_j), since row j's t_zone is
/// measured before u_j acts.
std::vector<ResponsePair> frame_pairs(const testbed::TimeSeriesFrame& frame);

/// Model pairs: a random HVAC sequence, uniform in [u_floor, 0] per step, is
/// injected into every window_stride-th window; pair k of a window is
/// (u_k - u_{k-1}, y_k - y_{k-1}) with u_{-1} the last logged HVAC power and
/// y_{-1} the current temperature.
std::vector<ResponsePair> model_pairs(const DynamicsModel& model,
                                      std::span<const PredictionWindow> windows,
                                      const PqOptions& options);

/// P from model_pairs over `windows`, Q from `frame`, both subsampled,
/// standardised and with the kernel width chosen. Deterministic per seed.
PqSets build_pq(const DynamicsModel& model, std::span<const PredictionWindow> windows,
                const testbed::TimeSeriesFrame& frame, const PqOptions& options);

struct JacobianMin {
  double value = 0.0;
  std::size_t windows = 0;
};

/// Smallest causal (s <= t) HVAC Jacobian entry over every window_stride-th window.
JacobianMin jacobian_min(const DynamicsModel& model, std::span<const PredictionWindow> windows,
                         std::size_t max_windows = 128);

struct AuditOptions {
  double u_floor = 0.0;
  double u_ceiling = 0.0;
  std::size_t jacobian_windows = 128;
  PqOptions pq;
};

struct ConsistencyReport {
  std::string variant;
  double mae = 0.0;
  double mape = 0.0;
  TrvResult trv;
  JacobianMin jacobian;
  double mmd = 0.0;
  double mmd2 = 0.0;
  double sigma = 0.0;
  std::size_t p_pairs = 0;
  std::size_t q_pairs = 0;
  AuditOptions options;
  std::string config_hash;

  nlohmann::json to_json() const;
};

struct Audit {
  ConsistencyReport report;
  PqSets pairs;
};

/// Accuracy plus TRV, Jacobian minimum and MMD on held-out windows.
Audit full_report(const DynamicsModel& model, std::span<const PredictionWindow> windows,
                  const testbed::TimeSeriesFrame& frame, const AuditOptions& options,
                  const std::string& config_hash = {});

/// "set,du_w,dt_c" rows for P and Q, raw units; `comment` lines are prefixed with "# ".
void save_pairs(const PqSets& sets, const std::string& path, const std::string& comment = {});

}  // namespace modnn
