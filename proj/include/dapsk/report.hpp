// CSV and SVG output of sweep results.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "dapsk/simulate.hpp"

namespace dapsk {

inline constexpr const char* kCsvHeader = "mode,snr_db,U,mod_order,blocks,ber,amp_ber,phase_ber,ser,se";

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string to_csv(const std::vector<MetricsRecord>& records) {
  std::string out = std::string(kCsvHeader) + "\n";
  for (const auto& r : records) {
    out += r.mode + "," + format_double(r.snr_db) + "," + std::to_string(r.antennas) + "," +
           std::to_string(r.mod_order) + "," + std::to_string(r.blocks) + "," + format_double(r.ber) +
           "," + format_double(r.amp_ber) + "," + format_double(r.phase_ber) + "," +
           format_double(r.ser) + "," + format_double(r.se) + "\n";
  }
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open output file: " + path);
  os << text;
  if (!os) throw std::runtime_error("failed writing output file: " + path);
}

inline void emit_csv(const std::vector<MetricsRecord>& records, const std::string& path) {
  write_text(path, to_csv(records));
}

/// Parses CSV written by to_csv. Tally counts are not part of the format.
inline std::vector<MetricsRecord> parse_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader) throw std::runtime_error("csv: missing or unexpected header");
  std::vector<MetricsRecord> out;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 10) throw std::runtime_error("csv line " + std::to_string(lineno) + ": expected 10 fields");
    try {
      MetricsRecord r;
      r.mode = f[0];
      r.snr_db = std::stod(f[1]);
      r.antennas = std::stoi(f[2]);
      r.mod_order = std::stoi(f[3]);
      r.blocks = std::stoi(f[4]);
      r.ber = std::stod(f[5]);
      r.amp_ber = std::stod(f[6]);
      r.phase_ber = std::stod(f[7]);
      r.ser = std::stod(f[8]);
      r.se = std::stod(f[9]);
      out.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw std::runtime_error("csv line " + std::to_string(lineno) + ": malformed number");
    }
  }
  return out;
}

namespace detail {

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> ber;
  std::vector<std::pair<double, double>> se;
};

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace detail

/// Two panels: BER on a log axis and spectral efficiency on a linear axis.
inline std::string to_svg(const std::vector<MetricsRecord>& records) {
  require(!records.empty(), "emit_svg: no records to plot");
  std::map<std::tuple<std::string, int, int>, detail::Series> by_curve;
  double xmin = records.front().snr_db, xmax = xmin, se_max = 0.0, ber_min = 1.0;
  for (const auto& r : records) {
    auto& s = by_curve[{r.mode, r.antennas, r.mod_order}];
    s.name = r.mode + " U=" + std::to_string(r.antennas) + " " + std::to_string(r.mod_order) + "-pt";
    s.ber.emplace_back(r.snr_db, r.ber);
    s.se.emplace_back(r.snr_db, r.se);
    xmin = std::min(xmin, r.snr_db);
    xmax = std::max(xmax, r.snr_db);
    se_max = std::max(se_max, r.se);
    if (r.ber > 0.0) ber_min = std::min(ber_min, r.ber);
  }
  if (xmax == xmin) xmax = xmin + 1.0;
  const double decade_lo = std::floor(std::log10(ber_min)) - (ber_min >= 1.0 ? 1.0 : 0.0);
  const double se_top = se_max > 0.0 ? std::ceil(se_max) : 1.0;

  const double W = 960, H = 440, pw = 380, ph = 300, top = 50;
  const double left[2] = {70, 550};
  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

  auto px = [&](int panel, double x) { return left[panel] + (x - xmin) / (xmax - xmin) * pw; };
  auto py_ber = [&](double b) {
    const double lb = std::log10(std::max(b, std::pow(10.0, decade_lo)));
    return top + (0.0 - lb) / (0.0 - decade_lo) * ph;
  };
  auto py_se = [&](double s) { return top + (1.0 - s / se_top) * ph; };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  const char* titles[2] = {"BER", "Spectral efficiency (bits/use)"};
  for (int p = 0; p < 2; ++p) {
    os << "<rect x=\"" << left[p] << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    os << "<text x=\"" << detail::svg_num(left[p] + pw / 2) << "\" y=\"" << top - 15
       << "\" text-anchor=\"middle\" font-size=\"13\">" << titles[p] << "</text>\n";
    os << "<text x=\"" << detail::svg_num(left[p] + pw / 2) << "\" y=\"" << top + ph + 32
       << "\" text-anchor=\"middle\">SNR (dB)</text>\n";
    for (const auto& r : records) {
      const double x = px(p, r.snr_db);
      os << "<text x=\"" << detail::svg_num(x) << "\" y=\"" << top + ph + 15 << "\" text-anchor=\"middle\">"
         << detail::svg_num(r.snr_db).substr(0, detail::svg_num(r.snr_db).find('.')) << "</text>\n";
    }
  }
  for (double d = decade_lo; d <= 0.0; d += 1.0) {
    const double y = py_ber(std::pow(10.0, d));
    os << "<line x1=\"" << left[0] << "\" x2=\"" << left[0] + pw << "\" y1=\"" << detail::svg_num(y)
       << "\" y2=\"" << detail::svg_num(y) << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << left[0] - 5 << "\" y=\"" << detail::svg_num(y + 4) << "\" text-anchor=\"end\">1e"
       << static_cast<int>(d) << "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double s = se_top * k / 4.0;
    const double y = py_se(s);
    os << "<line x1=\"" << left[1] << "\" x2=\"" << left[1] + pw << "\" y1=\"" << detail::svg_num(y)
       << "\" y2=\"" << detail::svg_num(y) << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << left[1] - 5 << "\" y=\"" << detail::svg_num(y + 4) << "\" text-anchor=\"end\">"
       << detail::svg_num(s) << "</text>\n";
  }
  int idx = 0;
  for (const auto& [key, s] : by_curve) {
    const char* color = palette[idx % 8];
    std::string ber_pts, se_pts;
    for (const auto& [x, b] : s.ber) ber_pts += detail::svg_num(px(0, x)) + "," + detail::svg_num(py_ber(b)) + " ";
    for (const auto& [x, v] : s.se) se_pts += detail::svg_num(px(1, x)) + "," + detail::svg_num(py_se(v)) + " ";
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << ber_pts << "\"/>\n";
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << se_pts << "\"/>\n";
    const double ly = top + ph + 50 + 0.0 * idx;
    os << "<rect x=\"" << 70 + 220 * (idx % 4) << "\" y=\"" << ly + 14 * (idx / 4) - 8
       << "\" width=\"12\" height=\"4\" fill=\"" << color << "\"/>\n";
    os << "<text x=\"" << 86 + 220 * (idx % 4) << "\" y=\"" << ly + 14 * (idx / 4) << "\">" << s.name
       << "</text>\n";
    ++idx;
  }
  os << "</svg>\n";
  return os.str();
}

inline void emit_svg(const std::vector<MetricsRecord>& records, const std::string& path) {
  write_text(path, to_svg(records));
}

}  // namespace dapsk
