#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace varlasso::svg {

struct LineSeries {
  std::string name;
  std::string color;
  std::vector<std::optional<double>> values;  // one per x position
  bool dashed = false;
};

struct Band {
  std::string color;
  std::vector<std::optional<double>> lower;
  std::vector<std::optional<double>> upper;
};

namespace detail {

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Frame {
  double width = 900, height = 420;
  double left = 70, right = 170, top = 40, bottom = 60;
  double plot_w() const { return width - left - right; }
  double plot_h() const { return height - top - bottom; }
};

inline void header(std::ostringstream& os, const Frame& f, const std::string& title) {
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\"" << f.height
     << "\" viewBox=\"0 0 " << f.width << ' ' << f.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << f.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title) << "</text>\n";
}

inline void y_axis(std::ostringstream& os, const Frame& f, double lo, double hi, const std::string& label) {
  const double y0 = f.top + f.plot_h();
  os << "<line x1=\"" << f.left << "\" y1=\"" << f.top << "\" x2=\"" << f.left << "\" y2=\"" << y0 << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << f.left << "\" y1=\"" << y0 << "\" x2=\"" << f.left + f.plot_w() << "\" y2=\"" << y0 << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = lo + (hi - lo) * i / 5.0;
    const double y = y0 - f.plot_h() * i / 5.0;
    os << "<line x1=\"" << f.left - 4 << "\" y1=\"" << num(y) << "\" x2=\"" << f.left << "\" y2=\"" << num(y) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << f.left - 8 << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">" << tick_label(v) << "</text>\n";
  }
  os << "<text transform=\"translate(18," << num(f.top + f.plot_h() / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(label) << "</text>\n";
}

inline void legend(std::ostringstream& os, const Frame& f, const std::vector<std::pair<std::string, std::string>>& items) {
  double y = f.top + 10;
  const double x = f.left + f.plot_w() + 15;
  for (const auto& [name, color] : items) {
    os << "<rect x=\"" << x << "\" y=\"" << num(y - 9) << "\" width=\"14\" height=\"10\" fill=\"" << color << "\"/>\n";
    os << "<text x=\"" << x + 20 << "\" y=\"" << num(y) << "\">" << escape(name) << "</text>\n";
    y += 18;
  }
}

inline std::pair<double, double> padded_range(double lo, double hi) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) return {0.0, 1.0};
  if (hi - lo < 1e-9) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

}  // namespace detail

/// Line chart over categorical x positions (e.g. week labels) with optional shaded bands.
inline std::string line_chart(const std::string& title, const std::vector<std::string>& x_labels,
                              const std::vector<LineSeries>& series, const std::vector<Band>& bands = {},
                              const std::string& y_label = "cases") {
  detail::Frame f;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  auto extend = [&](const std::vector<std::optional<double>>& v) {
    for (const auto& x : v)
      if (x && std::isfinite(*x)) {
        lo = std::min(lo, *x);
        hi = std::max(hi, *x);
      }
  };
  for (const auto& s : series) extend(s.values);
  for (const auto& b : bands) {
    extend(b.lower);
    extend(b.upper);
  }
  std::tie(lo, hi) = detail::padded_range(lo, hi);
  const std::size_t n = x_labels.size();
  auto px = [&](std::size_t i) { return f.left + (n > 1 ? f.plot_w() * static_cast<double>(i) / static_cast<double>(n - 1) : f.plot_w() / 2); };
  auto py = [&](double v) { return f.top + f.plot_h() * (1.0 - (v - lo) / (hi - lo)); };

  std::ostringstream os;
  detail::header(os, f, title);
  detail::y_axis(os, f, lo, hi, y_label);
  const std::size_t step = std::max<std::size_t>(1, n / 8);
  for (std::size_t i = 0; i < n; i += step) {
    os << "<text x=\"" << detail::num(px(i)) << "\" y=\"" << detail::num(f.top + f.plot_h() + 18)
       << "\" text-anchor=\"middle\" font-size=\"10\">" << detail::escape(x_labels[i]) << "</text>\n";
  }
  for (const auto& b : bands) {
    std::string upper, lower;
    for (std::size_t i = 0; i < n && i < b.upper.size() && i < b.lower.size(); ++i) {
      if (!b.upper[i] || !b.lower[i]) continue;
      upper += detail::num(px(i)) + "," + detail::num(py(*b.upper[i])) + " ";
      lower = detail::num(px(i)) + "," + detail::num(py(*b.lower[i])) + " " + lower;
    }
    if (!upper.empty())
      os << "<polygon points=\"" << upper << lower << "\" fill=\"" << b.color << "\" fill-opacity=\"0.25\" stroke=\"none\"/>\n";
  }
  for (const auto& s : series) {
    std::string pts;
    auto flush = [&] {
      if (!pts.empty())
        os << "<polyline points=\"" << pts << "\" fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.8\""
           << (s.dashed ? " stroke-dasharray=\"5,3\"" : "") << "/>\n";
      pts.clear();
    };
    for (std::size_t i = 0; i < n && i < s.values.size(); ++i) {
      if (!s.values[i] || !std::isfinite(*s.values[i])) {
        flush();
        continue;
      }
      pts += detail::num(px(i)) + "," + detail::num(py(*s.values[i])) + " ";
    }
    flush();
  }
  std::vector<std::pair<std::string, std::string>> items;
  for (const auto& s : series) items.emplace_back(s.name, s.color);
  detail::legend(os, f, items);
  os << "</svg>\n";
  return os.str();
}

/// Grouped bars: one group per category, one bar per series within it.
inline std::string grouped_bar_chart(const std::string& title, const std::vector<std::string>& groups,
                                     const std::vector<std::string>& series_names, const std::vector<std::string>& colors,
                                     const std::vector<std::vector<std::optional<double>>>& values,  // [group][series]
                                     const std::string& y_label) {
  detail::Frame f;
  double hi = 0.0;
  double lo = 0.0;
  for (const auto& g : values)
    for (const auto& v : g)
      if (v && std::isfinite(*v)) {
        hi = std::max(hi, *v);
        lo = std::min(lo, *v);
      }
  if (hi - lo < 1e-12) hi = lo + 1.0;
  hi += 0.05 * (hi - lo);
  auto py = [&](double v) { return f.top + f.plot_h() * (1.0 - (v - lo) / (hi - lo)); };

  std::ostringstream os;
  detail::header(os, f, title);
  detail::y_axis(os, f, lo, hi, y_label);
  const double group_w = f.plot_w() / static_cast<double>(std::max<std::size_t>(groups.size(), 1));
  const double bar_w = group_w * 0.8 / static_cast<double>(std::max<std::size_t>(series_names.size(), 1));
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double gx = f.left + group_w * static_cast<double>(g) + group_w * 0.1;
    for (std::size_t s = 0; s < series_names.size(); ++s) {
      if (g >= values.size() || s >= values[g].size() || !values[g][s]) continue;
      const double v = *values[g][s];
      const double y1 = py(std::max(v, 0.0));
      const double y2 = py(std::min(v, 0.0));
      os << "<rect x=\"" << detail::num(gx + bar_w * static_cast<double>(s)) << "\" y=\"" << detail::num(y1) << "\" width=\""
         << detail::num(bar_w * 0.95) << "\" height=\"" << detail::num(std::max(y2 - y1, 0.0)) << "\" fill=\""
         << colors[s % colors.size()] << "\"><title>" << detail::escape(series_names[s]) << ": " << detail::tick_label(v)
         << "</title></rect>\n";
    }
    os << "<text x=\"" << detail::num(gx + group_w * 0.4) << "\" y=\"" << detail::num(f.top + f.plot_h() + 18)
       << "\" text-anchor=\"middle\">" << detail::escape(groups[g]) << "</text>\n";
  }
  std::vector<std::pair<std::string, std::string>> items;
  for (std::size_t s = 0; s < series_names.size(); ++s) items.emplace_back(series_names[s], colors[s % colors.size()]);
  detail::legend(os, f, items);
  os << "</svg>\n";
  return os.str();
}

inline std::string bar_chart(const std::string& title, const std::vector<std::string>& labels, const std::vector<double>& values,
                             const std::string& y_label, const std::string& color = "#1f77b4") {
  std::vector<std::vector<std::optional<double>>> grid;
  for (double v : values) grid.push_back({v});
  return grouped_bar_chart(title, labels, {y_label}, {color}, grid, y_label);
}

}  // namespace varlasso::svg
