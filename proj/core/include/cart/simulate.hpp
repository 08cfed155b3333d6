#pragma once

#include <optional>
#include <vector>

#include "cart/types.hpp"

namespace cart {

// Impulsive dose applied at a fixed time: the state jumps by delta.
struct DoseEvent {
  double time = 0.0;
  State delta;  // added componentwise, each >= 0

  bool operator==(const DoseEvent&) const = default;
};

struct IntegratorConfig {
  enum class Method { RK4Fixed, RK45Adaptive };

  Method method = Method::RK45Adaptive;

  double step = 0.01;  // RK4Fixed step, days

  // RK45Adaptive (Dormand-Prince 5(4)) controls
  double rel_tol = 1e-8;
  double abs_tol = 1e-10;  // cells
  double min_step = 1e-12;
  double max_step = 1.0;

  // Clamp tiny negative populations to zero after each accepted step;
  // excursions beyond the roundoff floor raise NegativeStateError.
  bool nonneg_floor = true;

  // Uniform output grid spacing (days); samples are produced by dense
  // interpolation, independent of the internal step sequence.
  double output_dt = 0.1;

  bool operator==(const IntegratorConfig&) const = default;
};

void validate(const IntegratorConfig& cfg,
              std::string_view prefix = "integrator");

struct TrajectorySample {
  double t = 0.0;
  State state;
  double tau_applied = 0.0;
  std::optional<double> v;   // Lyapunov value, Backstepping runs with xi set
  std::optional<double> z2;  // tracking error, Backstepping runs
};

struct AppliedDose {
  DoseEvent event;
  State before;
  State after;  // before + delta, componentwise
};

struct Trajectory {
  std::vector<TrajectorySample> samples;  // strictly increasing times
  std::vector<AppliedDose> events_applied;
  // Integration stopped early because the state left the finite range.
  bool truncated = false;
  double truncation_time = 0.0;
};

// Integrates the model under `law` from s0 to `horizon`, stopping exactly at
// each dose time, adding the dose, and resuming. Samples land on the uniform
// output grid; a sample coinciding with a dose time records the post-dose
// state (the pre/post pair is kept in events_applied). Backstepping runs use
// the constant flux tau_from_a(p, law.gain) and record z2 (plus V when
// law.lyapunov_xi >= 0). Throws StiffnessError if the adaptive step
// collapses, NegativeStateError if a population dives past the roundoff
// floor; unbounded growth truncates the run instead of throwing.
Trajectory integrate(const ModelParams& p, const State& s0,
                     const ControlLaw& law, std::vector<DoseEvent> events,
                     double horizon, const IntegratorConfig& cfg = {});

struct OutcomeReport {
  // First sample time after which x1 stays below the clearance threshold
  // through the horizon.
  std::optional<double> clearance_time;
  // First time after the nadir with x1 > relapse_factor * nadir.
  std::optional<double> relapse_time;
  bool diverged = false;  // non-finite or > 1e15 anywhere, or truncated
  // CAR T pools (x2 + x3) still rising at the horizon: non-decreasing over
  // the second half of the run and up by >= 5% across it.
  bool monotone_growth = false;
  double nadir_t = 0.0;   // minimum tumor burden after the first dose
  double nadir_x1 = 0.0;
};

OutcomeReport analyze_outcome(const Trajectory& traj,
                              double clearance_threshold = 1.0,
                              double relapse_factor = 10.0);

}  // namespace cart
