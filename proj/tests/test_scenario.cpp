#include <cmath>
#include <string>

#include "cart/equilibria.hpp"
#include "cart/simulate.hpp"
#include "csv.hpp"
#include "doctest.h"
#include "scenario.hpp"
#include "support/oracles.hpp"
#include "svg.hpp"

using namespace cart;
using namespace cart::cli;

namespace {

std::string scn(const char* name) {
  return std::string(CART_SCENARIO_DIR) + "/" + name;
}

// A minimal complete scenario the mutation tests below start from.
const char* kBase = R"(
params {
  r 0.2  b 1  gamma 1  phi 0.3  rho 0.4
  theta 1  alpha 0.5  epsilon 0.4  mu 0.1
}
initial { x1 0.5  x2 0.1  x3 0.2 }
law { kind off }
horizon 10
)";

}  // namespace

TEST_CASE("minimal scenario parses with defaults") {
  const ScenarioFile s = parse_scenario(kBase);
  CHECK(s.params.r == 0.2);
  CHECK(s.params.mu == 0.1);
  CHECK(s.initial.x2 == 0.1);
  CHECK(s.law.kind == ControlLaw::Kind::Off);
  CHECK(s.law.tau_drains_pool);
  CHECK(s.events.empty());
  CHECK(s.horizon == 10.0);
  CHECK(s.integrator == IntegratorConfig{});
  CHECK(s.analysis.clearance_threshold == 1.0);
  CHECK(s.analysis.relapse_factor == 10.0);
  CHECK(!s.certificate);
}

TEST_CASE("comments, blank lines and one-per-line layout are equivalent") {
  const char* spread = R"(
# leading comment
params {
  r 0.2   # inline comment
  b 1
  gamma 1
  phi 0.3
  rho 0.4
  theta 1
  alpha 0.5
  epsilon 0.4
  mu 0.1
}

initial {
  x1 0.5
  x2 0.1
  x3 0.2
}
law {
  kind off
}
horizon 10
)";
  CHECK(parse_scenario(spread) == parse_scenario(kBase));
}

TEST_CASE("full scenario round-trips through the canonical form") {
  ScenarioFile s = parse_scenario(kBase);
  s.law = ControlLaw::backstepping(3.0, false);
  s.law.lyapunov_xi = 2.5;
  s.events.push_back({1.25, State{0.0, 0.0, 0.5}});
  s.events.push_back({4.0, State{0.1, 0.2, 0.0}});
  s.integrator.method = IntegratorConfig::Method::RK4Fixed;
  s.integrator.step = 0.005;
  s.integrator.nonneg_floor = false;
  s.integrator.output_dt = 0.25;
  s.analysis.clearance_threshold = 0.01;
  s.analysis.relapse_factor = 4.0;
  CertificateSpec c;
  c.a = 3.0;
  c.k = 1.5;
  c.xi = std::nullopt;  // auto
  c.region = CertifiedRegion{0.0, 2.0, -1.0, 1.0};
  c.u_bound = 10.0;
  s.certificate = c;

  const std::string text = serialize_scenario(s);
  const ScenarioFile back = parse_scenario(text);
  CHECK(back == s);
  CHECK(serialize_scenario(back) == text);
}

TEST_CASE("doubles survive the round trip exactly") {
  ScenarioFile s = parse_scenario(kBase);
  s.params.r = 0.1;                  // not representable exactly
  s.params.b = 1e-9;
  s.params.gamma = 1.0 / 3.0;
  s.horizon = 200.0000000000001;
  const ScenarioFile back = parse_scenario(serialize_scenario(s));
  CHECK(back.params.r == s.params.r);
  CHECK(back.params.gamma == s.params.gamma);
  CHECK(back.horizon == s.horizon);
}

TEST_CASE("bundled scenarios parse, validate and round-trip") {
  for (const char* name :
       {"uncontrolled.scn", "backstepping.scn", "uncontrolled-activation.scn",
        "uncontrolled-pool-only.scn"}) {
    CAPTURE(name);
    const ScenarioFile s = load_scenario(scn(name));
    CHECK(s.horizon > 0.0);
    const std::string text = serialize_scenario(s);
    CHECK(parse_scenario(text) == s);
  }
}

TEST_CASE("parse errors name the offending field") {
  auto expect = [](const std::string& text, const char* needle) {
    CAPTURE(needle);
    CHECK_THROWS_WITH_AS(parse_scenario(text), doctest::Contains(needle),
                         ScenarioError);
  };

  // structural
  expect("params { r 0.2 r 0.3 }", "params.r: duplicate field");
  expect("params { r }", "missing value for field 'params.r'");
  expect(std::string(kBase) + "bogus 1", "bogus: unknown field");
  expect(std::string(kBase) + "\nparams { }", "params: duplicate field");

  // field level
  expect(R"(params { r nope b 1 gamma 1 phi 0.3 rho 0.4 theta 1 alpha 0.5 epsilon 0.4 mu 0.1 }
initial { x1 0 x2 0 x3 0 } law { kind off } horizon 10)",
         "params.r: not a number");
  expect(R"(params { b 1 gamma 1 phi 0.3 rho 0.4 theta 1 alpha 0.5 epsilon 0.4 mu 0.1 }
initial { x1 0 x2 0 x3 0 } law { kind off } horizon 10)",
         "params.r: required field missing");

  std::string base(kBase);
  expect(base + "weird { }", "weird: unknown field");
  expect(base + "events [ { time -1 x3 1 } ]",
         "events[0].time: must be finite and >= 0");
  expect(base + "events [ { time 1 x3 -5 } ]", "events[0].x3");
  expect(base + "events [ { time 1 dose 5 } ]", "events[0].dose: unknown field");
  expect(base + "integrator { method rk9 }",
         "integrator.method: expected rk45 or rk4");
  expect(base + "integrator { rel_tol 0 }",
         "integrator.rel_tol: must be finite and > 0");
  expect(base + "analysis { relapse_factor 1 }",
         "analysis.relapse_factor: must be finite and > 1");

  // law cross rules
  std::string no_law = R"(
params {
  r 0.2  b 1  gamma 1  phi 0.3  rho 0.4
  theta 1  alpha 0.5  epsilon 0.4  mu 0.1
}
initial { x1 0.5  x2 0.1  x3 0.2 }
horizon 10
)";
  expect(no_law + "law { kind off tau 3 }",
         "law.tau: only valid when kind is constant_tau");
  expect(no_law + "law { kind constant_tau }",
         "law.tau: required field missing");
  expect(no_law + "law { kind constant_tau tau 1 a 2 }",
         "law.a: only valid when kind is backstepping");
  expect(no_law + "law { kind backstepping }", "law.a: required field missing");
  expect(no_law + "law { kind sorcery }", "law.kind: expected off");
  expect(no_law + "law { kind off lyapunov_xi 1 }",
         "law.lyapunov_xi: only valid when kind is backstepping");

  // certificate cross rules
  expect(base + "certificate { k 1 }",
         "certificate: only valid when law.kind is backstepping");
  expect(no_law + "law { kind backstepping a 2 }\ncertificate { a 3 }",
         "certificate.a: must equal law.a");
  expect(no_law + "law { kind backstepping a 2 }\ncertificate { k -1 }",
         "certificate.k: must be finite and >= 0");
  expect(no_law +
             "law { kind backstepping a 2 }\ncertificate { region { x1_lo 1 "
             "x1_hi 0 z2_lo 0 z2_hi 1 } }",
         "certificate.region.x1_hi");
}

TEST_CASE("syntax errors carry a line number") {
  CHECK_THROWS_WITH_AS(parse_scenario("params {\n  r 0.2\n"),
                       doctest::Contains("line 3"), ScenarioError);
  CHECK_THROWS_WITH_AS(parse_scenario("params ]"), doctest::Contains("line 1"),
                       ScenarioError);
  CHECK_THROWS_WITH_AS(parse_scenario("events [ 5 ]"),
                       doctest::Contains("expected '{'"), ScenarioError);
}

TEST_CASE("auto keyword and absence both mean automatic") {
  std::string no_law = R"(
params {
  r 0.2  b 1  gamma 1  phi 0.25 rho 0.4
  theta 1  alpha 0.5  epsilon 0.4  mu 0.1
}
initial { x1 0.5  x2 0.1  x3 0.2 }
horizon 10
law { kind backstepping a 2 }
)";
  const ScenarioFile with_auto =
      parse_scenario(no_law + "certificate { k auto xi auto u_bound auto }");
  const ScenarioFile implicit = parse_scenario(no_law + "certificate { }");
  CHECK(with_auto.certificate == implicit.certificate);
  CHECK(!with_auto.certificate->k);
  CHECK(!with_auto.certificate->xi);
  CHECK(!with_auto.certificate->u_bound);
}

TEST_CASE("certificate resolution fills the automatic pieces") {
  std::string text = R"(
params {
  r 0.2  b 1  gamma 1  phi 0.25 rho 0.4
  theta 1  alpha 0.5  epsilon 0.4  mu 0.1
}
initial { x1 0.5  x2 0.1  x3 0.2 }
horizon 10
law { kind backstepping a 2 }
)";

  SUBCASE("defaults derive from the initial state and schedule") {
    ScenarioFile s = parse_scenario(text + "certificate { k 0.1 xi 1 }");
    s.events.push_back({1.0, State{0.0, 0.0, 0.7}});
    const ResolvedCertificate rc = resolve_certificate(s);
    CHECK(rc.design.k == 0.1);
    CHECK(rc.design.xi == 1.0);
    CHECK(rc.region.x1_lo == 0.0);
    CHECK(rc.region.x1_hi == 0.5);
    const double z0 = std::abs(z2(s.params, 2.0, s.initial));
    CHECK(rc.region.z2_lo == -z0);
    CHECK(rc.region.z2_hi == z0);
    // pool: 0.2 initial + 0.7 dose = 0.9 beats the settled pool here
    const double settled =
        controlled_equilibrium(s.params, tau_from_a(s.params, 2.0)).point.x3;
    CHECK(rc.u_bound ==
          doctest::Approx(1.1 * std::max(0.9, settled)).epsilon(1e-12));
  }

  SUBCASE("xi follows from k by the margin rule") {
    const ScenarioFile s = parse_scenario(text + "certificate { k 0.05 }");
    const ResolvedCertificate rc = resolve_certificate(s);
    CHECK(rc.design.xi == select_xi(s.params, 2.0, 0.05));
  }

  SUBCASE("k follows from xi by sampling the bracket") {
    const ScenarioFile s = parse_scenario(
        text +
        "certificate { xi 1 region { x1_lo 0 x1_hi 0.5 z2_lo -0.5 z2_hi 0.5 } "
        "u_bound 1 }");
    const ResolvedCertificate rc = resolve_certificate(s);
    const BacksteppingDesign probe = make_design(s.params, 2.0, 0.0, 1.0);
    CHECK(rc.design.k ==
          estimate_k(s.params, probe, {0.0, 0.5, -0.5, 0.5}, 1.0));
  }

  SUBCASE("joint selection settles on a small region") {
    const ScenarioFile s = parse_scenario(
        text +
        "certificate { region { x1_lo 0 x1_hi 0.02 z2_lo -0.02 z2_hi 0.02 } "
        "u_bound 0.1 }");
    const ResolvedCertificate rc = resolve_certificate(s);
    CHECK(pd_condition(rc.design));
    // self-consistency of the settled pair
    const BacksteppingDesign probe =
        make_design(s.params, 2.0, 0.0, rc.design.xi);
    const double k_back =
        estimate_k(s.params, probe, rc.region, rc.u_bound);
    CHECK(rc.design.k == doctest::Approx(k_back).epsilon(1e-9));
  }

  SUBCASE("joint selection over a huge region reports divergence") {
    ScenarioFile s = parse_scenario(text + "certificate { }");
    s.initial.x1 = 2e6;
    s.params.b = 1e-9;
    s.params.gamma = 3e-6;
    CHECK_THROWS_WITH_AS(resolve_certificate(s), doctest::Contains("pin k"),
                         ScenarioError);
  }

  SUBCASE("a certificate needs a backstepping law") {
    const ScenarioFile s = parse_scenario(kBase);
    CHECK_THROWS_WITH_AS(resolve_certificate(s),
                         doctest::Contains("backstepping"), ScenarioError);
  }
}

TEST_CASE("trajectory csv shape and determinism") {
  const ScenarioFile s = load_scenario(scn("backstepping.scn"));
  ControlLaw law = s.law;
  law.lyapunov_xi = resolve_certificate(s).design.xi;
  const Trajectory tr =
      integrate(s.params, s.initial, law, s.events, s.horizon, s.integrator);
  const std::string csv = trajectory_csv(tr);

  CHECK(csv.substr(0, csv.find('\n')) == "t,x1,x2,x3,tau,V,z2");
  // one header plus one line per sample, newline-terminated
  const std::size_t lines =
      static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n'));
  CHECK(lines == tr.samples.size() + 1);
  CHECK(csv.back() == '\n');

  // certificate active: no empty V / z2 cells anywhere
  CHECK(csv.find(",,") == std::string::npos);

  const Trajectory tr2 =
      integrate(s.params, s.initial, law, s.events, s.horizon, s.integrator);
  CHECK(trajectory_csv(tr2) == csv);

  // without the certificate weight both final columns are empty
  const ScenarioFile u = load_scenario(scn("uncontrolled.scn"));
  const Trajectory tu = integrate(u.params, u.initial, u.law, u.events,
                                  u.horizon, u.integrator);
  const std::string ucsv = trajectory_csv(tu);
  const std::string first_row = ucsv.substr(
      ucsv.find('\n') + 1,
      ucsv.find('\n', ucsv.find('\n') + 1) - ucsv.find('\n') - 1);
  CHECK(first_row.substr(first_row.size() - 2) == ",,");
}

TEST_CASE("csv parses back exactly") {
  Trajectory tr;
  TrajectorySample a;
  a.t = 0.1;
  a.state = {1.0 / 3.0, 2e6, 0.0};
  a.tau_applied = 22666.666666666668;
  a.v = 3.14159;
  a.z2 = -0.125;
  tr.samples.push_back(a);
  TrajectorySample b;
  b.t = 0.2;
  b.state = {1e-30, 5.0, 7.0};
  b.tau_applied = 0.0;
  tr.samples.push_back(b);

  const CsvTable t = parse_csv(trajectory_csv(tr));
  REQUIRE(t.header.size() == 7);
  REQUIRE(t.rows.size() == 2);
  CHECK(*t.rows[0][1] == 1.0 / 3.0);
  CHECK(*t.rows[0][4] == 22666.666666666668);
  CHECK(*t.rows[0][5] == 3.14159);
  CHECK(*t.rows[1][1] == 1e-30);
  CHECK(!t.rows[1][5]);
  CHECK(!t.rows[1][6]);
}

TEST_CASE("csv reader rejects malformed input") {
  CHECK_THROWS_WITH_AS(parse_csv(""), doctest::Contains("empty"),
                       InvalidInputError);
  CHECK_THROWS_WITH_AS(parse_csv("t,x1\n1,2,3\n"), doctest::Contains("cells"),
                       InvalidInputError);
  CHECK_THROWS_WITH_AS(parse_csv("t,x1\n1,abc\n"),
                       doctest::Contains("not a number"), InvalidInputError);
}

TEST_CASE("sweep csv layout") {
  std::vector<SweepRow> rows(2);
  rows[0].cell_index = 0;
  rows[0].varied_value = 1.5;
  rows[0].clearance_time = 12.5;
  rows[0].nadir_t = 3.0;
  rows[0].nadir_x1 = 0.25;
  rows[1].cell_index = 1;
  rows[1].varied_value = 2.0;
  rows[1].relapse_time = 80.0;
  rows[1].diverged = true;
  rows[1].nadir_t = 4.0;
  rows[1].nadir_x1 = 125.0;
  const std::string csv = sweep_csv(rows);
  CHECK(csv ==
        "cell_index,varied_value,clearance_time,relapse_time,diverged,"
        "nadir_t,nadir_x1\n"
        "0,1.5,12.5,,0,3,0.25\n"
        "1,2,,80,1,4,125\n");
}

TEST_CASE("svg renders population series") {
  const ScenarioFile s = load_scenario(scn("uncontrolled.scn"));
  const Trajectory tr =
      integrate(s.params, s.initial, s.law, s.events, s.horizon, s.integrator);
  const CsvTable t = parse_csv(trajectory_csv(tr));

  const std::string lin = trajectory_svg(t);
  CHECK(lin.find("<svg") == 0);
  CHECK(lin.rfind("</svg>\n") == lin.size() - 7);
  // three population polylines
  std::size_t n = 0;
  for (std::size_t pos = lin.find("<polyline"); pos != std::string::npos;
       pos = lin.find("<polyline", pos + 1))
    ++n;
  CHECK(n == 3);
  CHECK(lin.find("t (days)") != std::string::npos);

  PlotOptions lo;
  lo.log_y = true;
  const std::string log = trajectory_svg(t, lo);
  CHECK(log.find("log scale") != std::string::npos);
  // same bytes on a second render
  CHECK(trajectory_svg(t, lo) == log);

  CsvTable bad;
  bad.header = {"t", "q"};
  bad.rows.push_back({1.0, 2.0});
  CHECK_THROWS_WITH_AS(trajectory_svg(bad), doctest::Contains("population"),
                       InvalidInputError);
}

TEST_CASE("outcome flags are grid independent on the bundled scenarios") {
  for (const char* name : {"uncontrolled.scn", "backstepping.scn"}) {
    CAPTURE(name);
    const ScenarioFile s = load_scenario(scn(name));

    IntegratorConfig fine = s.integrator;  // rk45, 1e-8 / 1e-10
    const Trajectory ta = integrate(s.params, s.initial, s.law, s.events,
                                    s.horizon, fine);
    const OutcomeReport ra = analyze_outcome(ta, s.analysis.clearance_threshold,
                                             s.analysis.relapse_factor);

    IntegratorConfig coarse = s.integrator;
    coarse.method = IntegratorConfig::Method::RK4Fixed;
    coarse.step = 0.01;
    const Trajectory tb = integrate(s.params, s.initial, s.law, s.events,
                                    s.horizon, coarse);
    const OutcomeReport rb = analyze_outcome(tb, s.analysis.clearance_threshold,
                                             s.analysis.relapse_factor);

    CHECK(ra.clearance_time.has_value() == rb.clearance_time.has_value());
    CHECK(ra.relapse_time.has_value() == rb.relapse_time.has_value());
    CHECK(ra.diverged == rb.diverged);
    if (ra.clearance_time)
      CHECK(std::abs(*ra.clearance_time - *rb.clearance_time) <= 0.5);
    if (ra.relapse_time)
      CHECK(std::abs(*ra.relapse_time - *rb.relapse_time) <= 0.5);
  }
}

TEST_CASE("relapse happens after the nadir; clearance excludes divergence") {
  const ScenarioFile s = load_scenario(scn("uncontrolled.scn"));
  const Trajectory tr =
      integrate(s.params, s.initial, s.law, s.events, s.horizon, s.integrator);
  const OutcomeReport rep = analyze_outcome(tr, s.analysis.clearance_threshold,
                                            s.analysis.relapse_factor);
  REQUIRE(rep.relapse_time.has_value());
  CHECK(*rep.relapse_time > rep.nadir_t);
  CHECK(!(rep.clearance_time && rep.diverged));
}

TEST_CASE("non-negativity floor holds on every bundled sample") {
  for (const char* name :
       {"uncontrolled.scn", "backstepping.scn", "uncontrolled-activation.scn",
        "uncontrolled-pool-only.scn"}) {
    CAPTURE(name);
    const ScenarioFile s = load_scenario(scn(name));
    const Trajectory tr = integrate(s.params, s.initial, s.law, s.events,
                                    s.horizon, s.integrator);
    for (const auto& smp : tr.samples) {
      CHECK(smp.state.x1 >= 0.0);
      CHECK(smp.state.x2 >= 0.0);
      CHECK(smp.state.x3 >= 0.0);
    }
  }
}

TEST_CASE("floor off: excursions stay at roundoff scale") {
  const ScenarioFile s = load_scenario(scn("backstepping.scn"));
  IntegratorConfig cfg = s.integrator;
  cfg.nonneg_floor = false;
  const Trajectory tr =
      integrate(s.params, s.initial, s.law, s.events, s.horizon, cfg);
  double scale = 0.0;
  for (const auto& smp : tr.samples)
    scale = std::max({scale, smp.state.x1, smp.state.x2, smp.state.x3});
  for (const auto& smp : tr.samples) {
    CHECK(smp.state.x1 >= -1e-6 * scale);
    CHECK(smp.state.x2 >= -1e-6 * scale);
    CHECK(smp.state.x3 >= -1e-6 * scale);
  }
}
