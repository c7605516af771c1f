#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "dakit/errors.hpp"
#include "dakit/ode.hpp"
#include "dakit/piecewise.hpp"
#include "dakit/runoff.hpp"
#include "dakit/util.hpp"

namespace dakit {

// Minimal CSV: comma-separated, LF line endings (CR tolerated on read), no
// quoting. All numeric fields are written with format_double, so files
// round-trip bit for bit.
struct CsvTable {
  struct Row {
    std::size_t line = 0;  // 1-based source line, for error messages
    std::vector<std::string> cells;
  };
  std::vector<std::string> header;
  std::vector<Row> rows;
};

inline CsvTable read_csv(const std::string& path) {
  const std::string text = read_file(path);
  CsvTable table;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string line = text.substr(
        pos, nl == std::string::npos ? std::string::npos : nl - pos);
    pos = (nl == std::string::npos) ? text.size() : nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells = split(line, ',');
    if (table.header.empty()) {
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size())
      throw ParseError(path, line_no,
                       "expected " + std::to_string(table.header.size()) +
                           " columns, got " + std::to_string(cells.size()));
    table.rows.push_back({line_no, std::move(cells)});
  }
  if (table.header.empty())
    throw ParseError(path, line_no == 0 ? 1 : line_no, "missing header row");
  return table;
}

namespace detail {

inline void require_header(const CsvTable& table, const std::string& path,
                           const std::vector<std::string>& expected) {
  if (table.header != expected) {
    std::string want;
    for (const auto& c : expected) {
      if (!want.empty()) want += ",";
      want += c;
    }
    std::string got;
    for (const auto& c : table.header) {
      if (!got.empty()) got += ",";
      got += c;
    }
    throw ParseError(path, 1, "expected header '" + want + "', got '" + got + "'");
  }
}

inline double cell_double(const std::string& path, const CsvTable::Row& row,
                          std::size_t col, const std::string& name) {
  const std::string token(trim(row.cells[col]));
  const auto v = try_parse_double(token);
  if (!v)
    throw ParseError(path, row.line,
                     "column '" + name + "': '" + token + "' is not a number");
  return *v;
}

inline std::uint64_t cell_u64(const std::string& path, const CsvTable::Row& row,
                              std::size_t col, const std::string& name) {
  const std::string token(trim(row.cells[col]));
  const auto v = try_parse_u64(token);
  if (!v)
    throw ParseError(path, row.line, "column '" + name + "': '" + token +
                                         "' is not a non-negative integer");
  return *v;
}

}  // namespace detail

// Header `t,x0,x1,...`; one row per sample, 17 significant digits.
inline std::string trajectory_to_csv(const Trajectory& traj) {
  std::string out = "t";
  for (std::size_t i = 0; i < traj.dimension(); ++i)
    out += ",x" + std::to_string(i);
  out += "\n";
  for (std::size_t r = 0; r < traj.size(); ++r) {
    out += format_double(traj.times[r]);
    for (double v : traj.states[r]) {
      out += ",";
      out += format_double(v);
    }
    out += "\n";
  }
  return out;
}

inline void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
  write_file_atomic(path, trajectory_to_csv(traj));
}

// Values only; the loaded trajectory has no derivatives, so it supports
// exact-time lookup but not interpolation.
inline Trajectory load_trajectory_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  if (table.header.empty() || table.header[0] != "t")
    throw ParseError(path, 1, "expected first column 't'");
  for (std::size_t i = 1; i < table.header.size(); ++i)
    if (table.header[i] != "x" + std::to_string(i - 1))
      throw ParseError(path, 1, "expected column 'x" + std::to_string(i - 1) +
                                    "', got '" + table.header[i] + "'");
  const std::size_t dim = table.header.size() - 1;
  if (dim == 0) throw ParseError(path, 1, "no state columns");
  Trajectory traj;
  for (const auto& row : table.rows) {
    const double t = detail::cell_double(path, row, 0, "t");
    if (!traj.times.empty() && t <= traj.times.back())
      throw ParseError(path, row.line, "time does not increase");
    std::vector<double> state(dim);
    for (std::size_t i = 0; i < dim; ++i)
      state[i] = detail::cell_double(path, row, i + 1, table.header[i + 1]);
    traj.times.push_back(t);
    traj.states.push_back(std::move(state));
  }
  if (traj.times.empty()) throw ParseError(path, 1, "no samples");
  return traj;
}

// Long format, one observation per row: `t,component,value,variance`.
// Times must be non-decreasing; equal times carry different components.
inline std::string measurements_to_csv(const MeasurementSeries& series) {
  std::string out = "t,component,value,variance\n";
  for (std::size_t m = 0; m < series.size(); ++m) {
    for (const auto& [comp, obs] : series.observations[m]) {
      out += format_double(series.times[m]);
      out += "," + std::to_string(comp);
      out += "," + format_double(obs.value);
      out += "," + format_double(obs.variance);
      out += "\n";
    }
  }
  return out;
}

inline void write_measurements_csv(const MeasurementSeries& series,
                                   const std::string& path) {
  write_file_atomic(path, measurements_to_csv(series));
}

inline MeasurementSeries load_measurements_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  detail::require_header(table, path, {"t", "component", "value", "variance"});
  MeasurementSeries series;
  for (const auto& row : table.rows) {
    const double t = detail::cell_double(path, row, 0, "t");
    const auto comp = detail::cell_u64(path, row, 1, "component");
    const double value = detail::cell_double(path, row, 2, "value");
    const double variance = detail::cell_double(path, row, 3, "variance");
    try {
      series.add(t, static_cast<std::size_t>(comp), {value, variance});
    } catch (const std::invalid_argument& e) {
      throw ParseError(path, row.line, e.what());
    }
  }
  return series;
}

// `label,area,cn`
inline std::vector<LandUseParcel> load_parcels_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  detail::require_header(table, path, {"label", "area", "cn"});
  std::vector<LandUseParcel> parcels;
  for (const auto& row : table.rows) {
    LandUseParcel p;
    p.label = std::string(trim(row.cells[0]));
    p.area = detail::cell_double(path, row, 1, "area");
    p.cn = detail::cell_double(path, row, 2, "cn");
    if (p.label.empty()) throw ParseError(path, row.line, "empty label");
    if (!(p.area > 0.0)) throw ParseError(path, row.line, "area must be > 0");
    if (!(p.cn > 0.0 && p.cn <= 100.0))
      throw ParseError(path, row.line, "cn must be in (0, 100]");
    parcels.push_back(std::move(p));
  }
  if (parcels.empty()) throw ParseError(path, 1, "no parcels");
  return parcels;
}

// `day,p_mm,model_q,model_var,obs_q,obs_var`
inline std::vector<RunoffDay> load_runoff_days_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  detail::require_header(table, path,
                         {"day", "p_mm", "model_q", "model_var", "obs_q", "obs_var"});
  std::vector<RunoffDay> days;
  for (const auto& row : table.rows) {
    RunoffDay d;
    d.day = std::string(trim(row.cells[0]));
    d.rainfall_p = detail::cell_double(path, row, 1, "p_mm");
    d.model_q = {detail::cell_double(path, row, 2, "model_q"),
                 detail::cell_double(path, row, 3, "model_var")};
    d.observed_q = {detail::cell_double(path, row, 4, "obs_q"),
                    detail::cell_double(path, row, 5, "obs_var")};
    if (d.day.empty()) throw ParseError(path, row.line, "empty day");
    if (!(d.rainfall_p >= 0.0))
      throw ParseError(path, row.line, "p_mm must be >= 0");
    if (!(d.model_q.value >= 0.0) || !(d.observed_q.value >= 0.0))
      throw ParseError(path, row.line, "runoff must be >= 0");
    if (!(d.model_q.variance >= 0.0) || !(d.observed_q.variance >= 0.0))
      throw ParseError(path, row.line, "variance must be >= 0");
    days.push_back(std::move(d));
  }
  if (days.empty()) throw ParseError(path, 1, "no days");
  return days;
}

}  // namespace dakit
