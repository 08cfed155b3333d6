#include <benchmark/benchmark.h>

#include "cart/backstepping.hpp"
#include "cart/equilibria.hpp"
#include "cart/model.hpp"
#include "cart/simulate.hpp"
#include "scenario.hpp"

using namespace cart;

namespace {

ModelParams cell_scale() {
  ModelParams p;
  p.r = 0.17;
  p.b = 1e-9;
  p.gamma = 3e-6;
  p.phi = 0.25;
  p.rho = 0.35;
  p.theta = 1e-9;
  p.alpha = 1e-10;
  p.epsilon = 0.15;
  p.mu = 0.04;
  return p;
}

cli::ScenarioFile bundled(const char* name) {
  return cli::load_scenario(std::string(CART_SCENARIO_DIR) + "/" + name);
}

void bm_vector_field(benchmark::State& st) {
  const ModelParams p = cell_scale();
  State s{2e6, 1e5, 3e5};
  for (auto _ : st) {
    benchmark::DoNotOptimize(vector_field(p, s, 100.0));
    s.x1 += 1e-9;  // defeat cross-iteration folding
  }
}
BENCHMARK(bm_vector_field);

void bm_jacobian_spectrum(benchmark::State& st) {
  const ModelParams p = cell_scale();
  State s{2e6, 1e5, 3e5};
  for (auto _ : st) {
    benchmark::DoNotOptimize(eigenvalues_3x3(jacobian(p, s)));
    s.x2 += 1e-9;
  }
}
BENCHMARK(bm_jacobian_spectrum);

void bm_all_equilibria(benchmark::State& st) {
  const ModelParams p = cell_scale();
  for (auto _ : st) benchmark::DoNotOptimize(all_equilibria(p));
}
BENCHMARK(bm_all_equilibria);

void bm_estimate_k(benchmark::State& st) {
  const ModelParams p = cell_scale();
  const BacksteppingDesign d = make_design(p, 4.0, 0.0, 1694.6);
  const CertifiedRegion reg{0.0, 2000.0, -1000.0, 1000.0};
  for (auto _ : st)
    benchmark::DoNotOptimize(estimate_k(p, d, reg, 1.5e6));
}
BENCHMARK(bm_estimate_k);

// Full simulations of the bundled treatment scenarios, parse included
// once up front so the loop times integration alone.
void bm_simulate(benchmark::State& st, const char* name) {
  const cli::ScenarioFile s = bundled(name);
  for (auto _ : st) {
    Trajectory tr = integrate(s.params, s.initial, s.law, s.events, s.horizon,
                              s.integrator);
    benchmark::DoNotOptimize(tr.samples.data());
  }
}
BENCHMARK_CAPTURE(bm_simulate, uncontrolled, "uncontrolled.scn");
BENCHMARK_CAPTURE(bm_simulate, backstepping, "backstepping.scn");

void bm_parse_scenario(benchmark::State& st) {
  const std::string text =
      cli::serialize_scenario(bundled("backstepping.scn"));
  for (auto _ : st)
    benchmark::DoNotOptimize(cli::parse_scenario(text));
}
BENCHMARK(bm_parse_scenario);

}  // namespace

BENCHMARK_MAIN();
