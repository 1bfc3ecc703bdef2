#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace modnn::testbed {

/// Uniformly sampled testbed record at 900 s steps.
///
/// Row i holds the disturbances and HVAC power applied over
/// [timestamp(i), timestamp(i) + 900 s) and the zone temperature measured at
/// the start of that interval. The next row's t_zone is therefore the response
/// to this row's u_hvac.
struct TimeSeriesFrame {
  std::int64_t start = 0;   // seconds since 1970-01-01T00:00:00Z
  std::int64_t step = 900;  // seconds
  std::vector<double> t_out;   // degC
  std::vector<double> solar;   // W/m^2
  std::vector<double> occ;     // persons
  std::vector<double> u_hvac;  // W, signed thermal power into the zone
  std::vector<double> p_elec;  // W electrical
  std::vector<double> t_zone;  // degC

  std::size_t size() const { return t_zone.size(); }
  std::int64_t timestamp(std::size_t i) const { return start + static_cast<std::int64_t>(i) * step; }
  /// Local hour of day in [0, 24) for row i.
  double hour_of_day(std::size_t i) const;
  /// Rows [begin, end) with the start timestamp adjusted.
  TimeSeriesFrame slice(std::size_t begin, std::size_t end) const;
  void reserve(std::size_t n);
  void push_row(double t_out, double solar, double occ, double u_hvac, double p_elec, double t_zone);
  /// Equal channel lengths, positive step. Throws IngestionError.
  void validate() const;

  bool operator==(const TimeSeriesFrame&) const = default;
};

inline constexpr const char* kFrameHeader = "timestamp,t_out_c,solar_wm2,occ,u_hvac_w,p_elec_w,t_zone_c";

/// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_iso8601(std::int64_t epoch_seconds);
/// Accepts "YYYY-MM-DDTHH:MM:SS" with an optional trailing 'Z'. Throws IngestionError.
std::int64_t parse_iso8601(const std::string& text);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Writes the CSV schema; each line of `comment` is emitted first, prefixed with "# ".
void save_frame(const TimeSeriesFrame& frame, const std::string& path,
                const std::string& comment = {});
/// Reads the CSV schema, skipping leading '#' lines. Enforces exact header names
/// and 900 s spacing. Throws IngestionError naming the offending line.
TimeSeriesFrame load_frame(const std::string& path);

}  // namespace modnn::testbed
