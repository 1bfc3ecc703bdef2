#include "modnn/eval/consistency.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "modnn/error.hpp"
#include "modnn/random.hpp"
#include "modnn/testbed/rc.hpp"
#include "modnn/train/trainer.hpp"

namespace modnn {

TrvResult trv(const DynamicsModel& model, std::span<const PredictionWindow> windows, double u_floor,
              double u_ceiling) {
  if (!(u_floor <= u_ceiling)) {
    throw ContractError("trv: u_floor must not exceed u_ceiling");
  }
  TrvResult r;
  for (const PredictionWindow& w : windows) {
    for (double u : w.future_u) {
      if (u < u_floor || u > u_ceiling) {
        throw ContractError("trv: window at row " + std::to_string(w.anchor) + " has u = " +
                            std::to_string(u) + " outside [u_floor, u_ceiling]");
      }
    }
    auto rollout = model.condition(w);
    const std::vector<double> up_u(w.horizon(), u_ceiling);
    const std::vector<double> down_u(w.horizon(), u_floor);
    const auto pred = rollout->predict(w.future_u);
    const auto up = rollout->predict(up_u);
    const auto down = rollout->predict(down_u);
    for (std::size_t t = 0; t < pred.size(); ++t) {
      r.plus += std::max(0.0, pred[t] - up[t]) * testbed::kStepHours;
      r.minus += std::max(0.0, down[t] - pred[t]) * testbed::kStepHours;
    }
    ++r.windows;
  }
  return r;
}

double gaussian_kernel(std::span<const double> x, std::span<const double> y, double sigma) {
  if (!(sigma > 0.0)) {
    throw ContractError("gaussian_kernel: sigma must be positive");
  }
  if (x.size() != y.size()) {
    throw ContractError("gaussian_kernel: vectors differ in length");
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) d2 += (x[i] - y[i]) * (x[i] - y[i]);
  return std::exp(-d2 / (2.0 * sigma * sigma));
}

namespace {

double mean_kernel(const nn::Matrix& a, const nn::Matrix& b, double inv2s2) {
  double total = 0.0;
  for (nn::Index i = 0; i < a.rows(); ++i) {
    double row = 0.0;
    for (nn::Index j = 0; j < b.rows(); ++j) {
      row += std::exp(-(a.row(i) - b.row(j)).squaredNorm() * inv2s2);
    }
    total += row;
  }
  return total / (static_cast<double>(a.rows()) * static_cast<double>(b.rows()));
}

}  // namespace

double mmd2(const nn::Matrix& p, const nn::Matrix& q, double sigma) {
  if (p.rows() == 0 || q.rows() == 0) {
    throw ContractError("mmd2: both sample sets must be non-empty");
  }
  if (p.cols() != q.cols()) {
    throw ContractError("mmd2: sample sets differ in dimension");
  }
  if (!(sigma > 0.0)) {
    throw ContractError("mmd2: sigma must be positive");
  }
  const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
  const double kpq = mean_kernel(p, q, inv2s2);
  const double kqp = mean_kernel(q, p, inv2s2);
  // The cross term is averaged over both orders so mmd2(P, Q) == mmd2(Q, P) bit for bit.
  return mean_kernel(p, p, inv2s2) + mean_kernel(q, q, inv2s2) - (kpq + kqp);
}

double median_heuristic(const nn::Matrix& p, const nn::Matrix& q) {
  nn::Matrix all(p.rows() + q.rows(), p.cols());
  all << p, q;
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(all.rows() * (all.rows() - 1) / 2));
  for (nn::Index i = 0; i < all.rows(); ++i) {
    for (nn::Index j = i + 1; j < all.rows(); ++j) d.push_back((all.row(i) - all.row(j)).norm());
  }
  if (d.empty()) {
    throw ContractError("median_heuristic: need at least two points");
  }
  const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
  std::nth_element(d.begin(), mid, d.end());
  double med = *mid;
  if (d.size() % 2 == 0) {
    med = 0.5 * (med + *std::max_element(d.begin(), mid));
  }
  return med > 0.0 ? med : 1.0;
}

std::vector<ResponsePair> frame_pairs(const testbed::TimeSeriesFrame& f) {
  std::vector<ResponsePair> out;
  for (std::size_t j = 1; j + 1 < f.size(); ++j) {
    out.push_back({f.u_hvac[j] - f.u_hvac[j - 1], f.t_zone[j + 1] - f.t_zone[j]});
  }
  return out;
}

std::vector<ResponsePair> model_pairs(const DynamicsModel& model,
                                      std::span<const PredictionWindow> windows,
                                      const PqOptions& o) {
  if (!(o.u_floor <= 0.0) || o.window_stride == 0) {
    throw ContractError("model_pairs: need u_floor <= 0 and a positive stride");
  }
  Rng rng(derive_seed(o.seed, 11));
  std::vector<ResponsePair> out;
  for (std::size_t i = 0; i < windows.size(); i += o.window_stride) {
    const PredictionWindow& w = windows[i];
    std::vector<double> u(w.horizon());
    for (double& v : u) v = rng.uniform(o.u_floor, 0.0);
    const auto y = model.condition(w)->predict(u);
    double u_prev = w.history.empty() ? 0.0 : w.history.back().u_hvac;
    double y_prev = w.current.t_zone;
    for (std::size_t k = 0; k < u.size(); ++k) {
      out.push_back({u[k] - u_prev, y[k] - y_prev});
      u_prev = u[k];
      y_prev = y[k];
    }
  }
  return out;
}

namespace {

std::vector<ResponsePair> subsample(std::vector<ResponsePair> v, std::size_t max, Rng& rng) {
  if (max == 0 || v.size() <= max) return v;
  // Partial Fisher-Yates, then restore the original order of the kept pairs.
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < max; ++i) {
    std::swap(idx[i], idx[i + rng.below(idx.size() - i)]);
  }
  idx.resize(max);
  std::sort(idx.begin(), idx.end());
  std::vector<ResponsePair> out;
  out.reserve(max);
  for (std::size_t i : idx) out.push_back(v[i]);
  return out;
}

nn::Matrix standardise(const std::vector<ResponsePair>& v, const PqSets& s) {
  nn::Matrix m(static_cast<nn::Index>(v.size()), 2);
  for (std::size_t i = 0; i < v.size(); ++i) {
    m(static_cast<nn::Index>(i), 0) = (v[i].du - s.du_mean) / s.du_std;
    m(static_cast<nn::Index>(i), 1) = (v[i].dt - s.dt_mean) / s.dt_std;
  }
  return m;
}

}  // namespace

PqSets build_pq(const DynamicsModel& model, std::span<const PredictionWindow> windows,
                const testbed::TimeSeriesFrame& frame, const PqOptions& o) {
  Rng rng(derive_seed(o.seed, 12));
  PqSets s;
  s.p = subsample(model_pairs(model, windows, o), o.max_pairs, rng);
  s.q = subsample(frame_pairs(frame), o.max_pairs, rng);
  if (s.p.empty() || s.q.empty()) {
    throw ContractError("build_pq: no response pairs (too few windows or rows)");
  }
  double n = 0.0, su = 0.0, st = 0.0;
  for (const auto* set : {&s.p, &s.q}) {
    for (const auto& r : *set) {
      su += r.du;
      st += r.dt;
      n += 1.0;
    }
  }
  s.du_mean = su / n;
  s.dt_mean = st / n;
  double vu = 0.0, vt = 0.0;
  for (const auto* set : {&s.p, &s.q}) {
    for (const auto& r : *set) {
      vu += (r.du - s.du_mean) * (r.du - s.du_mean);
      vt += (r.dt - s.dt_mean) * (r.dt - s.dt_mean);
    }
  }
  s.du_std = std::sqrt(vu / n);
  s.dt_std = std::sqrt(vt / n);
  if (!(s.du_std > 0.0)) s.du_std = 1.0;
  if (!(s.dt_std > 0.0)) s.dt_std = 1.0;
  s.p_std = standardise(s.p, s);
  s.q_std = standardise(s.q, s);
  s.sigma = median_heuristic(s.p_std, s.q_std);
  return s;
}

JacobianMin jacobian_min(const DynamicsModel& model, std::span<const PredictionWindow> windows,
                         std::size_t max_windows) {
  JacobianMin r;
  r.value = std::numeric_limits<double>::infinity();
  if (windows.empty() || max_windows == 0) return r;
  const std::size_t stride = std::max<std::size_t>(1, windows.size() / max_windows);
  for (std::size_t i = 0; i < windows.size() && r.windows < max_windows; i += stride) {
    const nn::Matrix J = model.hvac_jacobian(windows[i]);
    for (nn::Index t = 0; t < J.rows(); ++t) {
      for (nn::Index s = 0; s <= t; ++s) r.value = std::min(r.value, J(t, s));
    }
    ++r.windows;
  }
  return r;
}

nlohmann::json ConsistencyReport::to_json() const {
  return {{"variant", variant},
          {"accuracy", {{"mae_c", mae}, {"mape_pct", mape}}},
          {"trv", {{"plus_ch", trv.plus}, {"minus_ch", trv.minus}, {"windows", trv.windows}}},
          {"jacobian", {{"min_c_per_w", jacobian.value}, {"windows", jacobian.windows}}},
          {"mmd",
           {{"mmd", mmd},
            {"mmd2", mmd2},
            {"sigma", sigma},
            {"sigma_policy", "median pairwise distance of jointly standardised pairs"},
            {"estimator", "biased V-statistic"},
            {"p_pairs", p_pairs},
            {"q_pairs", q_pairs}}},
          {"settings",
           {{"u_floor_w", options.u_floor},
            {"u_ceiling_w", options.u_ceiling},
            {"jacobian_windows", options.jacobian_windows},
            {"pq_window_stride", options.pq.window_stride},
            {"pq_max_pairs", options.pq.max_pairs},
            {"seed", options.pq.seed}}},
          {"config_hash", config_hash}};
}

Audit full_report(const DynamicsModel& model, std::span<const PredictionWindow> windows,
                  const testbed::TimeSeriesFrame& frame, const AuditOptions& options,
                  const std::string& config_hash) {
  Audit a;
  ConsistencyReport& r = a.report;
  r.variant = model.variant();
  r.options = options;
  r.config_hash = config_hash;
  const Accuracy acc = window_accuracy(model, windows);
  r.mae = acc.mae;
  r.mape = acc.mape;
  r.trv = trv(model, windows, options.u_floor, options.u_ceiling);
  r.jacobian = jacobian_min(model, windows, options.jacobian_windows);
  PqOptions pq = options.pq;
  pq.u_floor = options.u_floor;
  a.pairs = build_pq(model, windows, frame, pq);
  r.mmd2 = mmd2(a.pairs.p_std, a.pairs.q_std, a.pairs.sigma);
  r.mmd = std::sqrt(std::max(0.0, r.mmd2));
  r.sigma = a.pairs.sigma;
  r.p_pairs = a.pairs.p.size();
  r.q_pairs = a.pairs.q.size();
  return a;
}

void save_pairs(const PqSets& sets, const std::string& path, const std::string& comment) {
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw IntegrityError("cannot open '" + path + "' for writing");
  }
  if (!comment.empty()) {
    std::size_t start = 0;
    while (start <= comment.size()) {
      const auto end = comment.find('\n', start);
      os << "# " << comment.substr(start, end - start) << '\n';
      if (end == std::string::npos) break;
      start = end + 1;
    }
  }
  os << "set,du_w,dt_c\n";
  for (const auto& r : sets.p) os << "P," << testbed::format_double(r.du) << ',' << testbed::format_double(r.dt) << '\n';
  for (const auto& r : sets.q) os << "Q," << testbed::format_double(r.du) << ',' << testbed::format_double(r.dt) << '\n';
  if (!os) {
    throw IntegrityError("write to '" + path + "' failed");
  }
}

}  // namespace modnn
