#include "modnn/model/window.hpp"

#include <cmath>
#include <numbers>

#include "modnn/error.hpp"

namespace modnn {

void PredictionWindow::check(std::size_t history_length, std::size_t horizon_length) const {
  if (history.size() != history_length) {
    throw ShapeError("window history has " + std::to_string(history.size()) + " rows, expected " +
                     std::to_string(history_length));
  }
  if (future_dist.size() != horizon_length || future_u.size() != horizon_length) {
    throw ShapeError("window future has " + std::to_string(future_u.size()) + " rows, expected " +
                     std::to_string(horizon_length));
  }
  if (!truth.empty() && truth.size() != horizon_length) {
    throw ShapeError("window truth length does not match the horizon");
  }
  auto finite = [](double v) { return std::isfinite(v); };
  bool ok = finite(current.t_out) && finite(current.solar) && finite(current.occ) &&
            finite(current.t_zone);
  for (const auto& r : history) {
    ok = ok && finite(r.t_out) && finite(r.solar) && finite(r.occ) && finite(r.u_hvac) &&
         finite(r.t_zone);
  }
  for (std::size_t k = 0; k < future_dist.size(); ++k) {
    ok = ok && finite(future_dist[k].t_out) && finite(future_dist[k].solar) &&
         finite(future_dist[k].occ) && finite(future_u[k]);
  }
  if (!ok) {
    throw ContractError("window contains non-finite input");
  }
}

namespace {

ChannelStats stats_of(const std::vector<double>& v) {
  ChannelStats s;
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(v.size()));
  if (!(s.std > 1e-12)) s.std = 1.0;
  return s;
}

nlohmann::json channel_json(const ChannelStats& c) { return nlohmann::json::array({c.mean, c.std}); }

ChannelStats channel_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) {
    throw IntegrityError("normalisation entry must be [mean, std]");
  }
  ChannelStats c{j[0].get<double>(), j[1].get<double>()};
  if (!(c.std > 0.0) || !std::isfinite(c.mean)) {
    throw IntegrityError("normalisation std must be positive");
  }
  return c;
}

}  // namespace

NormStats NormStats::from_frame(const testbed::TimeSeriesFrame& f) {
  return {stats_of(f.t_out), stats_of(f.solar), stats_of(f.occ), stats_of(f.u_hvac), stats_of(f.t_zone)};
}

nlohmann::json NormStats::to_json() const {
  return {{"t_out", channel_json(t_out)},   {"solar", channel_json(solar)},
          {"occ", channel_json(occ)},       {"u_hvac", channel_json(u_hvac)},
          {"t_zone", channel_json(t_zone)}};
}

NormStats NormStats::from_json(const nlohmann::json& j) {
  return {channel_from(j.at("t_out")), channel_from(j.at("solar")), channel_from(j.at("occ")),
          channel_from(j.at("u_hvac")), channel_from(j.at("t_zone"))};
}

double hour_sin(double hour) { return std::sin(2.0 * std::numbers::pi * hour / 24.0); }
double hour_cos(double hour) { return std::cos(2.0 * std::numbers::pi * hour / 24.0); }

nn::Matrix WindowBatch::select(const nn::Matrix& step, std::initializer_list<int> columns) {
  nn::Matrix out(step.rows(), static_cast<nn::Index>(columns.size()));
  nn::Index j = 0;
  for (int c : columns) out.col(j++) = step.col(c);
  return out;
}

WindowBatch make_batch(const std::vector<const PredictionWindow*>& windows, const NormStats& s) {
  if (windows.empty()) {
    throw ContractError("make_batch: no windows");
  }
  const auto B = static_cast<nn::Index>(windows.size());
  const std::size_t L = windows.front()->history.size();
  const std::size_t M = windows.front()->horizon();
  WindowBatch b;
  b.history.assign(L, nn::Matrix::Zero(B, kFeatureCount));
  b.future.assign(M, nn::Matrix::Zero(B, kFeatureCount));
  b.current = nn::Matrix::Zero(B, kFeatureCount);
  b.future_u.resize(B, static_cast<nn::Index>(M));
  b.y0.resize(B, 1);
  bool all_truth = true;
  for (const auto* w : windows) all_truth = all_truth && w->truth.size() == M;
  if (all_truth) b.truth.resize(B, static_cast<nn::Index>(M));

  for (nn::Index r = 0; r < B; ++r) {
    const PredictionWindow& w = *windows[static_cast<std::size_t>(r)];
    w.check(L, M);
    for (std::size_t t = 0; t < L; ++t) {
      const StepRecord& h = w.history[t];
      auto row = b.history[t].row(r);
      row(kFeatTout) = s.t_out.normalize(h.t_out);
      row(kFeatSolar) = s.solar.normalize(h.solar);
      row(kFeatOcc) = s.occ.normalize(h.occ);
      row(kFeatU) = s.u_hvac.normalize(h.u_hvac);
      row(kFeatTzone) = s.t_zone.normalize(h.t_zone);
      row(kFeatSin) = hour_sin(h.hour);
      row(kFeatCos) = hour_cos(h.hour);
    }
    auto cur = b.current.row(r);
    cur(kFeatTout) = s.t_out.normalize(w.current.t_out);
    cur(kFeatSolar) = s.solar.normalize(w.current.solar);
    cur(kFeatOcc) = s.occ.normalize(w.current.occ);
    cur(kFeatTzone) = s.t_zone.normalize(w.current.t_zone);
    cur(kFeatSin) = hour_sin(w.current.hour);
    cur(kFeatCos) = hour_cos(w.current.hour);
    for (std::size_t k = 0; k < M; ++k) {
      const DisturbanceStep& d = w.future_dist[k];
      auto row = b.future[k].row(r);
      row(kFeatTout) = s.t_out.normalize(d.t_out);
      row(kFeatSolar) = s.solar.normalize(d.solar);
      row(kFeatOcc) = s.occ.normalize(d.occ);
      row(kFeatSin) = hour_sin(d.hour);
      row(kFeatCos) = hour_cos(d.hour);
      b.future_u(r, static_cast<nn::Index>(k)) = s.u_hvac.normalize(w.future_u[k]);
      if (all_truth) b.truth(r, static_cast<nn::Index>(k)) = w.truth[k];
    }
    b.y0(r, 0) = w.current.t_zone;
  }
  return b;
}

PredictionWindow window_at(const testbed::TimeSeriesFrame& f, std::size_t anchor, std::size_t L,
                           std::size_t M) {
  if (anchor < L || anchor + M >= f.size()) {
    throw DatasetError("window anchored at row " + std::to_string(anchor) + " does not fit in " +
                       std::to_string(f.size()) + " rows");
  }
  PredictionWindow w;
  w.anchor = anchor;
  w.timestamp = f.timestamp(anchor);
  w.history.reserve(L);
  for (std::size_t j = anchor - L; j < anchor; ++j) {
    w.history.push_back({f.t_out[j], f.solar[j], f.occ[j], f.u_hvac[j], f.t_zone[j], f.hour_of_day(j)});
  }
  w.current = {f.t_out[anchor], f.solar[anchor], f.occ[anchor], f.t_zone[anchor], f.hour_of_day(anchor)};
  w.future_dist.reserve(M);
  w.future_u.reserve(M);
  w.truth.reserve(M);
  for (std::size_t k = 0; k < M; ++k) {
    const std::size_t j = anchor + k;
    w.future_dist.push_back({f.t_out[j], f.solar[j], f.occ[j], f.hour_of_day(j)});
    w.future_u.push_back(f.u_hvac[j]);
    w.truth.push_back(f.t_zone[j + 1]);
  }
  return w;
}

}  // namespace modnn
