#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>
#include <vector>

#include "cart/backstepping.hpp"
#include "cart/equilibria.hpp"
#include "cart/simulate.hpp"
#include "csv.hpp"
#include "scenario.hpp"
#include "svg.hpp"

namespace cart::cli {
namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError(path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInputError(path + ": cannot write file");
  out << content;
  out.flush();
  if (!out) throw InvalidInputError(path + ": write failed");
}

std::string opt_str(const std::optional<double>& v) {
  return v ? fmt17(*v) : std::string("none");
}

const char* bool_str(bool v) { return v ? "true" : "false"; }

std::string eig_str(const std::complex<double>& c) {
  if (c.imag() == 0.0) return fmt17(c.real());
  std::string s = fmt17(c.real());
  s += c.imag() < 0.0 ? '-' : '+';
  s += fmt17(std::abs(c.imag()));
  s += 'i';
  return s;
}

void print_outcome(const OutcomeReport& rep) {
  std::cout << "clearance_time " << opt_str(rep.clearance_time) << "\n"
            << "relapse_time " << opt_str(rep.relapse_time) << "\n"
            << "diverged " << bool_str(rep.diverged) << "\n"
            << "monotone_growth " << bool_str(rep.monotone_growth) << "\n"
            << "nadir_t " << fmt17(rep.nadir_t) << "\n"
            << "nadir_x1 " << fmt17(rep.nadir_x1) << "\n";
}

}  // namespace

int cmd_simulate(const std::string& scenario_path, const std::string& out_csv,
                 const GlobalOpts& g) {
  ScenarioFile s = load_scenario(scenario_path);

  ControlLaw law = s.law;
  std::optional<ResolvedCertificate> cert;
  if (s.certificate) {
    cert = resolve_certificate(s, g.seed);
    law.lyapunov_xi = cert->design.xi;  // log V along the run
  }

  Trajectory traj =
      integrate(s.params, s.initial, law, s.events, s.horizon, s.integrator);
  write_file(out_csv, trajectory_csv(traj));

  OutcomeReport rep = analyze_outcome(traj, s.analysis.clearance_threshold,
                                      s.analysis.relapse_factor);
  std::cout << "samples " << traj.samples.size() << "\n"
            << "events_applied " << traj.events_applied.size() << "\n"
            << "truncated " << bool_str(traj.truncated) << "\n";
  print_outcome(rep);
  if (cert) {
    std::cout << "certificate_k " << fmt17(cert->design.k) << "\n"
              << "certificate_xi " << fmt17(cert->design.xi) << "\n"
              << "certificate_u_bound " << fmt17(cert->u_bound) << "\n"
              << "pd_condition " << bool_str(pd_condition(cert->design))
              << "\n";
  }
  return 0;
}

int cmd_equilibria(const std::string& scenario_path) {
  ScenarioFile s = load_scenario(scenario_path);
  EquilibriaSummary sum = all_equilibria(s.params);

  for (const EquilibriumReport& r : sum.reports) {
    std::cout << "equilibrium " << to_string(r.kind) << "\n"
              << "  point " << fmt17(r.point.x1) << " " << fmt17(r.point.x2)
              << " " << fmt17(r.point.x3) << "\n"
              << "  admissible " << bool_str(r.admissible) << "\n"
              << "  stability " << to_string(r.stability) << "\n"
              << "  eigenvalues " << eig_str(r.eigenvalues[0]) << " "
              << eig_str(r.eigenvalues[1]) << " " << eig_str(r.eigenvalues[2])
              << "\n";
  }
  std::cout << "degenerate_interior " << bool_str(sum.degenerate_interior)
            << "\n";
  if (!sum.note.empty()) std::cout << "note " << sum.note << "\n";
  std::cout << "bistable " << bool_str(sum.bistable) << "\n";

  // The rest point the active law would hold the system at.
  std::optional<double> tau;
  if (s.law.kind == ControlLaw::Kind::ConstantTau) tau = s.law.tau;
  if (s.law.kind == ControlLaw::Kind::Backstepping)
    tau = tau_from_a(s.params, s.law.gain);
  if (tau && s.params.phi < s.params.rho && s.params.mu > 0.0) {
    EquilibriumReport r = controlled_equilibrium(s.params, *tau);
    std::cout << "controlled_tau " << fmt17(*tau) << "\n"
              << "controlled_point " << fmt17(r.point.x1) << " "
              << fmt17(r.point.x2) << " " << fmt17(r.point.x3) << "\n"
              << "controlled_admissible " << bool_str(r.admissible) << "\n"
              << "controlled_stability " << to_string(r.stability) << "\n"
              << "controlled_eigenvalues " << eig_str(r.eigenvalues[0]) << " "
              << eig_str(r.eigenvalues[1]) << " " << eig_str(r.eigenvalues[2])
              << "\n"
              << "tau_lower_bound " << fmt17(tau_lower_bound(s.params))
              << "\n";
  }
  return 0;
}

int cmd_design(const DesignArgs& args, const GlobalOpts& g) {
  ScenarioFile s = load_scenario(args.scenario_path);
  if (args.k && args.estimate_k)
    throw InvalidInputError("--k: cannot combine with --estimate-k");

  // Reuse the certificate resolver: keep any region / u_bound the scenario
  // pins, replace gain and the k / xi requests with the command line.
  ScenarioFile t = s;
  t.law = ControlLaw::backstepping(args.a);
  CertificateSpec spec = s.certificate.value_or(CertificateSpec{});
  spec.a = args.a;
  spec.k = args.estimate_k ? std::nullopt : std::optional<double>(args.k.value_or(0.0));
  spec.xi = args.xi;
  t.certificate = spec;

  ResolvedCertificate rc = resolve_certificate(t, g.seed);
  const BacksteppingDesign& d = rc.design;
  bool pd = pd_condition(d);

  std::cout << "a " << fmt17(d.a) << "\n"
            << "tau " << fmt17(d.tau) << "\n"
            << "tau_lower_bound " << fmt17(tau_lower_bound(s.params)) << "\n"
            << "b_hat " << fmt17(d.b_hat) << "\n"
            << "ell_hat " << fmt17(d.ell_hat) << "\n"
            << "m_hat " << fmt17(d.m_hat) << "\n"
            << "k " << fmt17(d.k) << "\n"
            << "xi " << fmt17(d.xi) << "\n"
            << "region_x1 " << fmt17(rc.region.x1_lo) << " "
            << fmt17(rc.region.x1_hi) << "\n"
            << "region_z2 " << fmt17(rc.region.z2_lo) << " "
            << fmt17(rc.region.z2_hi) << "\n"
            << "u_bound " << fmt17(rc.u_bound) << "\n"
            << "pd_condition " << bool_str(pd) << "\n";
  if (!pd) {
    std::cerr << "error: k^2 = " << fmt17(d.k * d.k)
              << " is not below xi*ell*m = " << fmt17(d.xi * d.ell_hat * d.m_hat)
              << "; the cross term can defeat the certificate\n";
    return 1;
  }
  return 0;
}

int cmd_sweep(const SweepArgs& args, const GlobalOpts&) {
  ScenarioFile base = load_scenario(args.scenario_path);

  if (args.steps < 1) throw InvalidInputError("--steps: must be >= 1");
  if (!std::isfinite(args.from)) throw InvalidInputError("--from: must be finite");
  if (!std::isfinite(args.to)) throw InvalidInputError("--to: must be finite");

  enum class Vary { A, Tau, DoseX3 } vary;
  if (args.vary == "a") {
    if (base.law.kind != ControlLaw::Kind::Backstepping)
      throw InvalidInputError(
          "--vary: a requires a scenario with law.kind backstepping");
    vary = Vary::A;
  } else if (args.vary == "tau") {
    if (base.law.kind != ControlLaw::Kind::ConstantTau)
      throw InvalidInputError(
          "--vary: tau requires a scenario with law.kind constant_tau");
    vary = Vary::Tau;
  } else if (args.vary == "dose_x3") {
    if (base.events.empty())
      throw InvalidInputError(
          "--vary: dose_x3 requires a scenario with at least one event");
    vary = Vary::DoseX3;
  } else {
    throw InvalidInputError("--vary: expected a, tau or dose_x3, got '" +
                            args.vary + "'");
  }

  std::vector<double> values(static_cast<std::size_t>(args.steps));
  for (int i = 0; i < args.steps; ++i) {
    values[static_cast<std::size_t>(i)] =
        args.steps == 1
            ? args.from
            : args.from + (args.to - args.from) * i / (args.steps - 1);
  }
  for (double v : values) {
    if (vary == Vary::A && !(v > 1.0))
      throw InvalidInputError("--vary: every a value on the grid must be > 1");
    if (vary != Vary::A && !(v >= 0.0))
      throw InvalidInputError("--vary: grid values must be >= 0");
  }

  auto apply = [vary](ScenarioFile& s, double v) {
    switch (vary) {
      case Vary::A: s.law.gain = v; break;
      case Vary::Tau: s.law.tau = v; break;
      case Vary::DoseX3: s.events.front().delta.x3 = v; break;
    }
  };

  const std::size_t n = values.size();
  std::vector<SweepRow> rows(n);
  std::vector<std::exception_ptr> errors(n);

  auto run_cell = [&](std::size_t i) {
    ScenarioFile s = base;
    apply(s, values[i]);
    Trajectory tr = integrate(s.params, s.initial, s.law, s.events, s.horizon,
                              s.integrator);
    OutcomeReport rep = analyze_outcome(tr, s.analysis.clearance_threshold,
                                        s.analysis.relapse_factor);
    SweepRow row;
    row.cell_index = static_cast<long>(i);
    row.varied_value = values[i];
    row.clearance_time = rep.clearance_time;
    row.relapse_time = rep.relapse_time;
    row.diverged = rep.diverged;
    row.nadir_t = rep.nadir_t;
    row.nadir_x1 = rep.nadir_x1;
    rows[i] = row;
  };

  unsigned hw = std::thread::hardware_concurrency();
  std::size_t n_threads = std::min<std::size_t>(hw == 0 ? 1 : hw, n);
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        run_cell(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) {
      pool.emplace_back([&, t]() {
        for (std::size_t i = t; i < n; i += n_threads) {
          try {
            run_cell(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (std::thread& th : pool) th.join();
  }
  // Report the first failing cell; integration failures get the cell named.
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const IntegrationError& e) {
      throw IntegrationError("cell " + std::to_string(i) + " (" + args.vary +
                                 " = " + fmt17(values[i]) + "): " + e.what(),
                             e.time);
    }
    // non-integration failures propagate unchanged from the rethrow above
  }

  write_file(args.out_csv, sweep_csv(rows));
  std::cout << "cells " << n << "\n";
  return 0;
}

int cmd_plot(const PlotArgs& args) {
  CsvTable t = parse_csv(read_file(args.csv_path));
  PlotOptions opts;
  opts.log_y = args.log_y;
  std::size_t slash = args.csv_path.find_last_of('/');
  opts.title = slash == std::string::npos ? args.csv_path
                                          : args.csv_path.substr(slash + 1);
  write_file(args.out_svg, trajectory_svg(t, opts));
  return 0;
}

}  // namespace cart::cli
