#include "csv.hpp"

#include <charconv>

#include "cart/errors.hpp"

namespace cart::cli {

std::string fmt17(double v) {
  char buf[40];
  auto res =
      std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

std::string trajectory_csv(const Trajectory& traj) {
  std::string o = "t,x1,x2,x3,tau,V,z2\n";
  for (const TrajectorySample& s : traj.samples) {
    o += fmt17(s.t);
    o += ',';
    o += fmt17(s.state.x1);
    o += ',';
    o += fmt17(s.state.x2);
    o += ',';
    o += fmt17(s.state.x3);
    o += ',';
    o += fmt17(s.tau_applied);
    o += ',';
    if (s.v) o += fmt17(*s.v);
    o += ',';
    if (s.z2) o += fmt17(*s.z2);
    o += '\n';
  }
  return o;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string o =
      "cell_index,varied_value,clearance_time,relapse_time,diverged,nadir_t,"
      "nadir_x1\n";
  for (const SweepRow& r : rows) {
    o += std::to_string(r.cell_index);
    o += ',';
    o += fmt17(r.varied_value);
    o += ',';
    if (r.clearance_time) o += fmt17(*r.clearance_time);
    o += ',';
    if (r.relapse_time) o += fmt17(*r.relapse_time);
    o += ',';
    o += r.diverged ? '1' : '0';
    o += ',';
    o += fmt17(r.nadir_t);
    o += ',';
    o += fmt17(r.nadir_x1);
    o += '\n';
  }
  return o;
}

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

CsvTable parse_csv(std::string_view text) {
  CsvTable t;
  std::size_t start = 0;
  int lineno = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    std::string_view line = end == std::string_view::npos
                                ? text.substr(start)
                                : text.substr(start, end - start);
    start = end == std::string_view::npos ? text.size() + 1 : end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++lineno;
    if (line.empty()) {
      if (start > text.size()) break;  // trailing newline
      throw InvalidInputError("csv line " + std::to_string(lineno) +
                              ": empty line");
    }
    if (t.header.empty()) {
      for (std::string_view h : split(line, ','))
        t.header.emplace_back(h);
      continue;
    }
    std::vector<std::optional<double>> row;
    for (std::string_view cell : split(line, ',')) {
      if (cell.empty()) {
        row.push_back(std::nullopt);
        continue;
      }
      double v = 0.0;
      auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
        throw InvalidInputError("csv line " + std::to_string(lineno) +
                                ": not a number: '" + std::string(cell) + "'");
      row.push_back(v);
    }
    if (row.size() != t.header.size())
      throw InvalidInputError("csv line " + std::to_string(lineno) + ": has " +
                              std::to_string(row.size()) + " cells, header has " +
                              std::to_string(t.header.size()));
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw InvalidInputError("csv: file is empty");
  return t;
}

}  // namespace cart::cli
