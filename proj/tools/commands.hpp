// The five CLI verbs. Each loads its inputs, does the work, prints a
// key-value summary to stdout and returns a process exit code; validation
// and integration failures propagate as exceptions for main() to map.
#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace cart::cli {

struct GlobalOpts {
  // Deterministic jitter seed for the sampled coupling bound; absent means
  // corner-exact sampling with no jitter.
  std::optional<std::uint64_t> seed;
};

// Integrate the scenario, write the trajectory CSV, print the outcome.
int cmd_simulate(const std::string& scenario_path, const std::string& out_csv,
                 const GlobalOpts& g);

// Print every equilibrium of the scenario's parameter set with its spectrum
// and stability, plus the controlled rest point implied by the law.
int cmd_equilibria(const std::string& scenario_path);

struct DesignArgs {
  std::string scenario_path;
  double a = 0.0;
  std::optional<double> k;  // explicit bound
  bool estimate_k = false;  // sample the bound over the certified region
  std::optional<double> xi; // absent = choose by the margin rule
};

// Work out the full backstepping design for gain a over the scenario's
// parameters. Exit code 1 when the resulting pair fails the definiteness
// condition k^2 < xi * ell * m.
int cmd_design(const DesignArgs& args, const GlobalOpts& g);

struct SweepArgs {
  std::string scenario_path;
  std::string vary;  // a | tau | dose_x3
  double from = 0.0;
  double to = 0.0;
  int steps = 0;
  std::string out_csv;
};

// Re-run the scenario across a grid of one field and tabulate outcomes.
int cmd_sweep(const SweepArgs& args, const GlobalOpts& g);

struct PlotArgs {
  std::string csv_path;
  std::string out_svg;
  bool log_y = false;
};

int cmd_plot(const PlotArgs& args);

}  // namespace cart::cli
