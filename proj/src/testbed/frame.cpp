#include "modnn/testbed/frame.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "modnn/error.hpp"

namespace modnn::testbed {

namespace {

// Civil-calendar conversions for the proleptic Gregorian calendar.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const auto doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

const char* const kColumns[] = {"timestamp", "t_out_c", "solar_wm2", "occ",
                                "u_hvac_w",  "p_elec_w", "t_zone_c"};

}  // namespace

double TimeSeriesFrame::hour_of_day(std::size_t i) const {
  const std::int64_t sec = timestamp(i) - floor_div(timestamp(i), 86400) * 86400;
  return static_cast<double>(sec) / 3600.0;
}

TimeSeriesFrame TimeSeriesFrame::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > size()) {
    throw DatasetError("frame slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                       ") out of range for " + std::to_string(size()) + " rows");
  }
  TimeSeriesFrame f;
  f.start = timestamp(begin);
  f.step = step;
  auto cut = [&](const std::vector<double>& v) {
    return std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(begin),
                               v.begin() + static_cast<std::ptrdiff_t>(end));
  };
  f.t_out = cut(t_out);
  f.solar = cut(solar);
  f.occ = cut(occ);
  f.u_hvac = cut(u_hvac);
  f.p_elec = cut(p_elec);
  f.t_zone = cut(t_zone);
  return f;
}

void TimeSeriesFrame::reserve(std::size_t n) {
  for (auto* v : {&t_out, &solar, &occ, &u_hvac, &p_elec, &t_zone}) v->reserve(n);
}

void TimeSeriesFrame::push_row(double to, double so, double oc, double u, double p, double tz) {
  t_out.push_back(to);
  solar.push_back(so);
  occ.push_back(oc);
  u_hvac.push_back(u);
  p_elec.push_back(p);
  t_zone.push_back(tz);
}

void TimeSeriesFrame::validate() const {
  const std::size_t n = t_zone.size();
  if (t_out.size() != n || solar.size() != n || occ.size() != n || u_hvac.size() != n ||
      p_elec.size() != n) {
    throw IngestionError("frame channels have unequal lengths");
  }
  if (step <= 0) {
    throw IngestionError("frame step must be positive");
  }
}

std::string format_iso8601(std::int64_t t) {
  const std::int64_t days = floor_div(t, 86400);
  const std::int64_t sec = t - days * 86400;
  std::int64_t y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  char buf[80];
  std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ",
                static_cast<long long>(y), m, d, static_cast<long long>(sec / 3600),
                static_cast<long long>((sec / 60) % 60), static_cast<long long>(sec % 60));
  return buf;
}

std::int64_t parse_iso8601(const std::string& text) {
  int y, mo, d, h, mi, s;
  char tail = 0;
  const int got = std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &y, &mo, &d, &h, &mi, &s, &tail);
  const bool ok_tail = got == 6 || (got == 7 && tail == 'Z' && text.back() == 'Z' &&
                                    text.size() == 20);
  if ((got != 6 && got != 7) || !ok_tail || (got == 6 && text.size() != 19) || mo < 1 || mo > 12 ||
      d < 1 || d > 31 || h > 23 || mi > 59 || s > 59 || h < 0 || mi < 0 || s < 0) {
    throw IngestionError("malformed ISO-8601 timestamp '" + text + "'");
  }
  return days_from_civil(y, static_cast<unsigned>(mo), static_cast<unsigned>(d)) * 86400 +
         h * 3600 + mi * 60 + s;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void save_frame(const TimeSeriesFrame& frame, const std::string& path, const std::string& comment) {
  frame.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) {
    throw IngestionError("cannot open '" + path + "' for writing");
  }
  if (!comment.empty()) {
    std::istringstream lines(comment);
    std::string line;
    while (std::getline(lines, line)) os << "# " << line << '\n';
  }
  os << kFrameHeader << '\n';
  for (std::size_t i = 0; i < frame.size(); ++i) {
    os << format_iso8601(frame.timestamp(i)) << ',' << format_double(frame.t_out[i]) << ','
       << format_double(frame.solar[i]) << ',' << format_double(frame.occ[i]) << ','
       << format_double(frame.u_hvac[i]) << ',' << format_double(frame.p_elec[i]) << ','
       << format_double(frame.t_zone[i]) << '\n';
  }
  if (!os) {
    throw IngestionError("write to '" + path + "' failed");
  }
}

TimeSeriesFrame load_frame(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) {
    throw IngestionError("cannot open frame '" + path + "'");
  }
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line[0] == '#') continue;
    have_header = true;
    break;
  }
  if (!have_header) {
    throw IngestionError(path + ": missing header row");
  }
  const auto header = split_commas(line);
  for (const auto& name : header) {
    bool known = false;
    for (const char* c : kColumns) known = known || name == c;
    if (!known) {
      throw IngestionError(path + ", line " + std::to_string(line_no) + ": unknown column '" + name + "'");
    }
  }
  if (header.size() != std::size(kColumns)) {
    throw IngestionError(path + ", line " + std::to_string(line_no) + ": header must be exactly '" +
                         kFrameHeader + "'");
  }
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] != kColumns[k]) {
      throw IngestionError(path + ", line " + std::to_string(line_no) + ": column " + std::to_string(k + 1) +
                           " must be '" + kColumns[k] + "', found '" + header[k] + "'");
    }
  }

  TimeSeriesFrame f;
  std::int64_t prev_ts = 0;
  bool first = true;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_commas(line);
    const std::string where = path + ", line " + std::to_string(line_no) + ": ";
    if (fields.size() != std::size(kColumns)) {
      throw IngestionError(where + "expected " + std::to_string(std::size(kColumns)) +
                           " fields, found " + std::to_string(fields.size()));
    }
    std::int64_t ts;
    try {
      ts = parse_iso8601(fields[0]);
    } catch (const IngestionError& e) {
      throw IngestionError(where + e.what());
    }
    double v[6];
    for (int k = 0; k < 6; ++k) {
      const std::string& s = fields[static_cast<std::size_t>(k + 1)];
      auto res = std::from_chars(s.data(), s.data() + s.size(), v[k]);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v[k])) {
        throw IngestionError(where + "bad number '" + s + "' in column " + kColumns[k + 1]);
      }
    }
    if (first) {
      f.start = ts;
      first = false;
    } else if (ts - prev_ts != f.step) {
      throw IngestionError(where + "timestamp " + fields[0] + " is " + std::to_string(ts - prev_ts) +
                           " s after the previous row, expected " + std::to_string(f.step));
    }
    prev_ts = ts;
    f.push_row(v[0], v[1], v[2], v[3], v[4], v[5]);
  }
  return f;
}

}  // namespace modnn::testbed
