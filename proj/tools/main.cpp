#include <charconv>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "cart/errors.hpp"
#include "commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "Simulator and stability toolkit for a three-population CAR T / tumor "
      "model"};
  app.require_subcommand(1);

  cart::cli::GlobalOpts g;
  app.add_option("--seed", g.seed,
                 "seed for jittered sampling in the coupling bound estimate");

  std::string sim_scn, sim_out;
  CLI::App* sim = app.add_subcommand(
      "simulate", "integrate a scenario and write its trajectory CSV");
  sim->add_option("scenario", sim_scn, "scenario file")->required();
  sim->add_option("-o,--output", sim_out, "trajectory CSV to write")
      ->required();

  std::string eq_scn;
  CLI::App* eq = app.add_subcommand(
      "equilibria", "list the equilibria, spectra and stability verdicts");
  eq->add_option("scenario", eq_scn, "scenario file")->required();

  cart::cli::DesignArgs da;
  std::string xi_word;
  CLI::App* de = app.add_subcommand(
      "design", "derive the backstepping flux and Lyapunov certificate");
  de->add_option("scenario", da.scenario_path, "scenario file")->required();
  de->add_option("--a", da.a, "closed-loop gain, > 1")->required();
  CLI::Option* opt_k = de->add_option("--k", da.k, "coupling bound");
  CLI::Option* opt_est =
      de->add_flag("--estimate-k", da.estimate_k,
                   "sample the coupling bound over the certified region");
  opt_k->excludes(opt_est);
  CLI::Option* opt_xi =
      de->add_option("--xi", xi_word, "certificate weight, or auto");

  cart::cli::SweepArgs sa;
  CLI::App* sw = app.add_subcommand(
      "sweep", "tabulate outcomes across a one-parameter grid");
  sw->add_option("scenario", sa.scenario_path, "scenario file")->required();
  sw->add_option("--vary", sa.vary, "field to vary: a, tau or dose_x3")
      ->required();
  sw->add_option("--from", sa.from, "first grid value")->required();
  sw->add_option("--to", sa.to, "last grid value")->required();
  sw->add_option("--steps", sa.steps, "number of grid cells")->required();
  sw->add_option("-o,--output", sa.out_csv, "sweep CSV to write")->required();

  cart::cli::PlotArgs pa;
  CLI::App* pl =
      app.add_subcommand("plot", "render a trajectory CSV as an SVG chart");
  pl->add_option("csv", pa.csv_path, "trajectory CSV")->required();
  pl->add_option("-o,--output", pa.out_svg, "SVG to write")->required();
  pl->add_flag("--log", pa.log_y, "logarithmic population axis");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) return cart::cli::cmd_simulate(sim_scn, sim_out, g);
    if (eq->parsed()) return cart::cli::cmd_equilibria(eq_scn);
    if (de->parsed()) {
      if (*opt_xi) {
        if (xi_word != "auto") {
          double v = 0.0;
          auto res = std::from_chars(xi_word.data(),
                                     xi_word.data() + xi_word.size(), v);
          if (res.ec != std::errc{} ||
              res.ptr != xi_word.data() + xi_word.size())
            throw cart::InvalidInputError("--xi: expected a number or auto, got '" +
                                          xi_word + "'");
          da.xi = v;
        }
      }
      return cart::cli::cmd_design(da, g);
    }
    if (sw->parsed()) return cart::cli::cmd_sweep(sa, g);
    if (pl->parsed()) return cart::cli::cmd_plot(pa);
  } catch (const cart::IntegrationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
