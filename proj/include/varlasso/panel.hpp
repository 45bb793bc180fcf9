#pragma once

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "varlasso/error.hpp"

namespace varlasso {

/// Calendar date (no time of day, no timezone). Weeks are identified by their start date.
class Date {
 public:
  Date() = default;
  explicit Date(std::chrono::sys_days days) : days_(days) {}
  Date(int year, unsigned month, unsigned day)
      : days_(std::chrono::year{year} / std::chrono::month{month} / std::chrono::day{day}) {}

  /// Parses YYYY-MM-DD.
  static Date parse(std::string_view text) {
    auto fail = [&] { throw DataError("unparseable date '" + std::string(text) + "' (expected YYYY-MM-DD)"); };
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') fail();
    auto digits = [&](std::size_t pos, std::size_t len) {
      int v = 0;
      for (std::size_t i = pos; i < pos + len; ++i) {
        if (text[i] < '0' || text[i] > '9') fail();
        v = v * 10 + (text[i] - '0');
      }
      return v;
    };
    const int y = digits(0, 4);
    const int m = digits(5, 2);
    const int d = digits(8, 2);
    const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                          std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) fail();
    return Date(std::chrono::sys_days{ymd});
  }

  std::string str() const {
    const std::chrono::year_month_day ymd{days_};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
  }

  int year() const { return static_cast<int>(std::chrono::year_month_day{days_}.year()); }
  std::int64_t day_number() const { return days_.time_since_epoch().count(); }
  std::chrono::sys_days days() const { return days_; }

  Date plus_days(std::int64_t n) const { return Date(days_ + std::chrono::days{n}); }
  Date plus_weeks(std::int64_t n) const { return plus_days(7 * n); }
  friend std::int64_t days_between(Date from, Date to) { return (to.days_ - from.days_).count(); }

  friend auto operator<=>(const Date&, const Date&) = default;
  friend bool operator==(const Date&, const Date&) = default;

 private:
  std::chrono::sys_days days_{};
};

inline std::ostream& operator<<(std::ostream& os, const Date& d) { return os << d.str(); }

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Weekly case counts for K jurisdictions on a dense 7-day grid. Immutable after construction.
class TimeSeriesPanel {
 public:
  TimeSeriesPanel(std::vector<std::string> jurisdictions, Date first_week, CountMatrix counts)
      : jurisdictions_(std::move(jurisdictions)), first_week_(first_week), counts_(std::move(counts)) {
    if (jurisdictions_.empty()) throw DataError("panel needs at least one jurisdiction");
    if (static_cast<Eigen::Index>(jurisdictions_.size()) != counts_.rows())
      throw DataError("panel has " + std::to_string(jurisdictions_.size()) + " jurisdictions but " +
                      std::to_string(counts_.rows()) + " count rows");
    if (counts_.cols() < 1) throw DataError("panel needs at least one week");
    std::set<std::string> seen;
    for (const auto& j : jurisdictions_)
      if (!seen.insert(j).second) throw DataError("duplicate jurisdiction '" + j + "'");
    if ((counts_.array() < 0).any()) throw DataError("panel counts must be non-negative");
  }

  Eigen::Index num_series() const { return counts_.rows(); }
  Eigen::Index num_weeks() const { return counts_.cols(); }
  const std::vector<std::string>& jurisdictions() const { return jurisdictions_; }
  const CountMatrix& counts() const { return counts_; }
  Date first_week() const { return first_week_; }
  Date last_week() const { return week(num_weeks() - 1); }
  Date week(Eigen::Index t) const { return first_week_.plus_weeks(t); }

  std::vector<Date> week_starts() const {
    std::vector<Date> out;
    out.reserve(static_cast<std::size_t>(num_weeks()));
    for (Eigen::Index t = 0; t < num_weeks(); ++t) out.push_back(week(t));
    return out;
  }

  /// Grid index of a week start; throws if the date is not on the grid.
  Eigen::Index index_of(Date d) const {
    const auto offset = days_between(first_week_, d);
    if (offset < 0 || offset % 7 != 0 || offset / 7 >= num_weeks())
      throw DataError("date " + d.str() + " is not on the panel grid [" + first_week_.str() + ", " +
                      last_week().str() + "]");
    return static_cast<Eigen::Index>(offset / 7);
  }

  Eigen::Index index_of_jurisdiction(std::string_view id) const {
    const auto it = std::find(jurisdictions_.begin(), jurisdictions_.end(), id);
    if (it == jurisdictions_.end()) throw DataError("unknown jurisdiction '" + std::string(id) + "'");
    return static_cast<Eigen::Index>(it - jurisdictions_.begin());
  }

  Eigen::MatrixXd as_real() const { return counts_.cast<double>(); }

  friend bool operator==(const TimeSeriesPanel& a, const TimeSeriesPanel& b) {
    return a.jurisdictions_ == b.jurisdictions_ && a.first_week_ == b.first_week_ &&
           a.counts_.rows() == b.counts_.rows() && a.counts_.cols() == b.counts_.cols() &&
           a.counts_ == b.counts_;
  }

 private:
  std::vector<std::string> jurisdictions_;
  Date first_week_;
  CountMatrix counts_;
};

/// Sub-panel with week_starts <= cutoff_week (inclusive).
inline TimeSeriesPanel slice_until(const TimeSeriesPanel& panel, Date cutoff_week) {
  if (cutoff_week < panel.first_week())
    throw DataError("cutoff " + cutoff_week.str() + " precedes the first panel week " + panel.first_week().str());
  const Eigen::Index last = panel.index_of(cutoff_week);
  return TimeSeriesPanel(panel.jurisdictions(), panel.first_week(), panel.counts().leftCols(last + 1));
}

/// Per-jurisdiction total of all weeks starting in the given calendar year.
inline std::vector<std::int64_t> annual_totals(const TimeSeriesPanel& panel, int year) {
  std::vector<std::int64_t> totals(static_cast<std::size_t>(panel.num_series()), 0);
  for (Eigen::Index t = 0; t < panel.num_weeks(); ++t) {
    if (panel.week(t).year() != year) continue;
    for (Eigen::Index k = 0; k < panel.num_series(); ++k) totals[static_cast<std::size_t>(k)] += panel.counts()(k, t);
  }
  return totals;
}

struct IngestionReport {
  std::size_t rows_read = 0;
  std::size_t fills = 0;
  Date first_week;
  Date last_week;
  std::size_t jurisdictions = 0;
  std::size_t weeks = 0;
};

inline void to_json(nlohmann::json& j, const IngestionReport& r) {
  j = nlohmann::json{{"rows_read", r.rows_read},
                     {"fills", r.fills},
                     {"date_range", {r.first_week.str(), r.last_week.str()}},
                     {"jurisdictions", r.jurisdictions},
                     {"weeks", r.weeks}};
}

struct Ingestion {
  TimeSeriesPanel panel;
  IngestionReport report;
};

namespace detail {

// RFC 4180-style field splitting: double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      if (!field.empty() || was_quoted) throw DataError("malformed CSV: stray quote on line " + std::to_string(line_no));
      quoted = was_quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      was_quoted = false;
    } else {
      if (was_quoted) throw DataError("malformed CSV: text after closing quote on line " + std::to_string(line_no));
      field.push_back(c);
    }
  }
  if (quoted) throw DataError("malformed CSV: unterminated quote on line " + std::to_string(line_no));
  fields.push_back(std::move(field));
  return fields;
}

inline std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

inline std::int64_t parse_count(const std::string& text, std::size_t line_no) {
  if (text.empty()) throw DataError("malformed CSV: empty count on line " + std::to_string(line_no));
  std::size_t pos = 0;
  bool negative = false;
  if (text[0] == '-' || text[0] == '+') {
    negative = text[0] == '-';
    pos = 1;
  }
  if (pos == text.size()) throw DataError("malformed CSV: bad count '" + text + "' on line " + std::to_string(line_no));
  std::int64_t v = 0;
  for (; pos < text.size(); ++pos) {
    if (text[pos] < '0' || text[pos] > '9')
      throw DataError("malformed CSV: non-integer count '" + text + "' on line " + std::to_string(line_no));
    v = v * 10 + (text[pos] - '0');
  }
  if (negative && v != 0) throw DataError("negative count " + text + " on line " + std::to_string(line_no));
  return v;
}

}  // namespace detail

/// Reads (jurisdiction, week_start, cases) rows and builds a dense weekly panel.
/// Missing (jurisdiction, week) pairs are zero-filled and counted in the report.
inline Ingestion read_panel(std::istream& in, const std::string& date_column = "week_start",
                            const std::string& id_column = "jurisdiction", const std::string& value_column = "cases") {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw DataError("malformed CSV: missing header row");
  ++line_no;
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line, line_no);
  auto column = [&](const std::string& name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (detail::trim(header[i]) == name) return i;
    throw DataError("malformed CSV: header lacks column '" + name + "'");
  };
  const std::size_t date_idx = column(date_column);
  const std::size_t id_idx = column(id_column);
  const std::size_t value_idx = column(value_column);

  std::vector<std::string> order;
  std::map<std::string, std::size_t> id_index;
  std::map<std::pair<std::size_t, std::int64_t>, std::int64_t> cells;
  std::int64_t min_day = 0;
  std::int64_t max_day = 0;
  std::size_t rows = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split_csv_line(line, line_no);
    if (fields.size() != header.size())
      throw DataError("malformed CSV: line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                      " fields, header has " + std::to_string(header.size()));
    const std::string id = detail::trim(fields[id_idx]);
    if (id.empty()) throw DataError("malformed CSV: empty jurisdiction on line " + std::to_string(line_no));
    const Date date = Date::parse(detail::trim(fields[date_idx]));
    const std::int64_t value = detail::parse_count(detail::trim(fields[value_idx]), line_no);

    auto [it, inserted] = id_index.emplace(id, order.size());
    if (inserted) order.push_back(id);
    const std::int64_t day = date.day_number();
    if (!cells.emplace(std::pair{it->second, day}, value).second)
      throw DataError("duplicate key (" + id + ", " + date.str() + ") on line " + std::to_string(line_no));
    if (rows == 0) {
      min_day = max_day = day;
    } else {
      min_day = std::min(min_day, day);
      max_day = std::max(max_day, day);
    }
    ++rows;
  }
  if (rows == 0) throw DataError("malformed CSV: no data rows");

  const Date first{std::chrono::sys_days{std::chrono::days{min_day}}};
  const auto weeks = static_cast<Eigen::Index>((max_day - min_day) / 7 + 1);
  CountMatrix counts = CountMatrix::Zero(static_cast<Eigen::Index>(order.size()), weeks);
  for (const auto& [key, value] : cells) {
    const std::int64_t offset = key.second - min_day;
    if (offset % 7 != 0)
      throw DataError("date " + first.plus_days(offset).str() + " does not land on the weekly grid starting " +
                      first.str());
    counts(static_cast<Eigen::Index>(key.first), static_cast<Eigen::Index>(offset / 7)) = value;
  }

  IngestionReport report;
  report.rows_read = rows;
  report.fills = static_cast<std::size_t>(counts.size()) - cells.size();
  report.first_week = first;
  report.last_week = first.plus_weeks(weeks - 1);
  report.jurisdictions = order.size();
  report.weeks = static_cast<std::size_t>(weeks);
  return Ingestion{TimeSeriesPanel(std::move(order), first, std::move(counts)), report};
}

inline Ingestion load_panel(const std::string& path, const std::string& date_column = "week_start",
                            const std::string& id_column = "jurisdiction", const std::string& value_column = "cases") {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open panel file '" + path + "'");
  return read_panel(in, date_column, id_column, value_column);
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

/// Long-format CSV, one row per (jurisdiction, week), zeros included.
inline void write_panel(std::ostream& out, const TimeSeriesPanel& panel, const std::string& date_column = "week_start",
                        const std::string& id_column = "jurisdiction", const std::string& value_column = "cases") {
  out << csv_quote(id_column) << ',' << csv_quote(date_column) << ',' << csv_quote(value_column) << '\n';
  for (Eigen::Index k = 0; k < panel.num_series(); ++k)
    for (Eigen::Index t = 0; t < panel.num_weeks(); ++t)
      out << csv_quote(panel.jurisdictions()[static_cast<std::size_t>(k)]) << ',' << panel.week(t).str() << ','
          << panel.counts()(k, t) << '\n';
}

inline void save_panel(const std::string& path, const TimeSeriesPanel& panel) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write panel file '" + path + "'");
  write_panel(out, panel);
}

}  // namespace varlasso
