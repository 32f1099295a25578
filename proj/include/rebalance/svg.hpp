#pragma once

// Static SVG line charts for the trend reports.

#include <algorithm>
#include <cstdio>
#include <string>
#include <vector>

namespace rebalance::svg {

struct Series {
  std::string name;
  std::vector<double> y;  // one value per x label, in [0, 1]
};

struct Chart {
  std::string title;
  std::string x_title;
  std::vector<std::string> x_labels;
  std::vector<Series> series;
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline const char* color(std::size_t i) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};
  return kColors[i % 6];
}

}  // namespace detail

// Y axis is fixed to [0, 1]; x labels are spaced evenly.
inline std::string render(const Chart& c) {
  using detail::num;
  const double w = 640, h = 400, left = 60, right = 150, top = 40, bottom = 60;
  const double pw = w - left - right, ph = h - top - bottom;
  const std::size_t n = c.x_labels.size();
  const auto x_at = [&](std::size_t i) { return left + (n <= 1 ? pw / 2 : pw * static_cast<double>(i) / (n - 1)); };
  const auto y_at = [&](double v) { return top + ph * (1.0 - std::clamp(v, 0.0, 1.0)); };

  std::string out = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(w) + "\" height=\"" + num(h) +
                    "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + num(w / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" +
         detail::escape(c.title) + "</text>\n";
  for (int t = 0; t <= 5; ++t) {
    const double v = t / 5.0;
    out += "<line x1=\"" + num(left) + "\" y1=\"" + num(y_at(v)) + "\" x2=\"" + num(left + pw) + "\" y2=\"" +
           num(y_at(v)) + "\" stroke=\"#ddd\"/>\n";
    out += "<text x=\"" + num(left - 6) + "\" y=\"" + num(y_at(v) + 4) + "\" text-anchor=\"end\">" + num(v) +
           "</text>\n";
  }
  for (std::size_t i = 0; i < n; ++i) {
    out += "<text x=\"" + num(x_at(i)) + "\" y=\"" + num(top + ph + 18) + "\" text-anchor=\"middle\">" +
           detail::escape(c.x_labels[i]) + "</text>\n";
  }
  out += "<text x=\"" + num(left + pw / 2) + "\" y=\"" + num(h - 15) + "\" text-anchor=\"middle\">" +
         detail::escape(c.x_title) + "</text>\n";
  for (std::size_t s = 0; s < c.series.size(); ++s) {
    const auto& series = c.series[s];
    std::string points;
    for (std::size_t i = 0; i < std::min(n, series.y.size()); ++i) {
      points += (points.empty() ? "" : " ") + num(x_at(i)) + "," + num(y_at(series.y[i]));
    }
    out += "<polyline fill=\"none\" stroke=\"" + std::string(detail::color(s)) + "\" stroke-width=\"2\" points=\"" +
           points + "\"/>\n";
    const double ly = top + 16.0 * static_cast<double>(s);
    out += "<line x1=\"" + num(left + pw + 12) + "\" y1=\"" + num(ly) + "\" x2=\"" + num(left + pw + 32) +
           "\" y2=\"" + num(ly) + "\" stroke=\"" + detail::color(s) + "\" stroke-width=\"2\"/>\n";
    out += "<text x=\"" + num(left + pw + 38) + "\" y=\"" + num(ly + 4) + "\">" + detail::escape(series.name) +
           "</text>\n";
  }
  out += "</svg>\n";
  return out;
}

}  // namespace rebalance::svg
