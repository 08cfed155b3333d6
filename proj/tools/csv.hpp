// CSV output for trajectories and sweeps, plus the small reader the plot
// command uses. All numbers go through std::to_chars, so output is
// locale-independent and byte-identical across runs.
#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cart/simulate.hpp"

namespace cart::cli {

// Value formatted with 17 significant digits, enough to reconstruct the
// exact double.
std::string fmt17(double v);

// Header t,x1,x2,x3,tau,V,z2; V and z2 cells are empty on samples that do
// not carry them (runs without an active certificate).
std::string trajectory_csv(const Trajectory& traj);

struct SweepRow {
  long cell_index = 0;
  double varied_value = 0.0;
  std::optional<double> clearance_time;
  std::optional<double> relapse_time;
  bool diverged = false;
  double nadir_t = 0.0;
  double nadir_x1 = 0.0;
};

// Header cell_index,varied_value,clearance_time,relapse_time,diverged,
// nadir_t,nadir_x1; absent times are empty cells, diverged is 1/0.
std::string sweep_csv(const std::vector<SweepRow>& rows);

struct CsvTable {
  std::vector<std::string> header;
  // row-major; empty cells are nullopt
  std::vector<std::vector<std::optional<double>>> rows;
};

// Strict reader for the files this tool writes: one header line, numeric or
// empty cells, every row as wide as the header. Throws InvalidInputError
// with the line number on anything else.
CsvTable parse_csv(std::string_view text);

}  // namespace cart::cli
