#include "cart/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cart/backstepping.hpp"
#include "cart/model.hpp"

namespace cart {

void validate(const IntegratorConfig& cfg, std::string_view prefix) {
  auto bad = [&](const char* field, const char* why) {
    throw InvalidInputError(std::string(prefix) + "." + field + ": " + why);
  };
  if (!(std::isfinite(cfg.step) && cfg.step > 0.0))
    bad("step", "must be finite and > 0");
  if (!(std::isfinite(cfg.rel_tol) && cfg.rel_tol > 0.0))
    bad("rel_tol", "must be finite and > 0");
  if (!(std::isfinite(cfg.abs_tol) && cfg.abs_tol > 0.0))
    bad("abs_tol", "must be finite and > 0");
  if (!(std::isfinite(cfg.min_step) && cfg.min_step > 0.0))
    bad("min_step", "must be finite and > 0");
  if (!(std::isfinite(cfg.max_step) && cfg.max_step >= cfg.min_step))
    bad("max_step", "must be finite and >= min_step");
  if (!(std::isfinite(cfg.output_dt) && cfg.output_dt > 0.0))
    bad("output_dt", "must be finite and > 0");
}

namespace {

// Growth beyond this magnitude stops the run; the analyzer flags divergence
// from the recorded samples (threshold 1e15), which the 0.1-day grid has
// already crossed many times by now.
constexpr double kTruncationCutoff = 1e18;
constexpr long kMaxInternalSteps = 20'000'000;
// A state this far past cell-count scales is treated as divergence when the
// step size collapses, instead of error-ing out of an exploding run.
constexpr double kDivergedScale = 1e12;

inline Vec3 add_scaled(const Vec3& y, double h, const Vec3& k) {
  return {y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]};
}

inline double max_abs(const Vec3& y) {
  return std::max({std::abs(y[0]), std::abs(y[1]), std::abs(y[2])});
}

inline bool finite(const Vec3& y) {
  return std::isfinite(y[0]) && std::isfinite(y[1]) && std::isfinite(y[2]);
}

// Dormand-Prince 5(4) tableau.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                 a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                 a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
// b - b*: weights of the embedded error estimate
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
// dense-output weights of the 5th-order continuous extension
constexpr double d1 = -12715105075.0 / 11282082432.0;
constexpr double d3 = 87487479700.0 / 32700410799.0;
constexpr double d4 = -10690763975.0 / 1880347072.0;
constexpr double d5 = 701980252875.0 / 199316789632.0;
constexpr double d6 = -1453857185.0 / 822651844.0;
constexpr double d7 = 69997945.0 / 29380423.0;

// Continuous extension over one accepted step, evaluable anywhere inside it.
struct DenseStep {
  double t0 = 0.0, h = 0.0;
  Vec3 y0{}, y1{};

  enum class Kind { Dopri, Hermite } kind = Kind::Hermite;
  // Dopri: Shampine interpolant coefficients; Hermite: endpoint slopes.
  Vec3 r2{}, r3{}, r4{}, r5{};
  Vec3 f0{}, f1{};

  Vec3 eval(double t) const {
    const double th = (t - t0) / h;
    if (th <= 1e-12) return y0;
    if (th >= 1.0 - 1e-12) return y1;
    Vec3 out;
    if (kind == Kind::Dopri) {
      const double th1 = 1.0 - th;
      for (int i = 0; i < 3; ++i) {
        out[i] = y0[i] +
                 th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
      }
    } else {
      const double th2 = th * th, th3 = th2 * th;
      const double h00 = 2 * th3 - 3 * th2 + 1, h10 = th3 - 2 * th2 + th;
      const double h01 = -2 * th3 + 3 * th2, h11 = th3 - th2;
      for (int i = 0; i < 3; ++i) {
        out[i] = h00 * y0[i] + h10 * h * f0[i] + h01 * y1[i] +
                 h11 * h * f1[i];
      }
    }
    return out;
  }
};

struct Driver {
  const ModelParams& p;
  const IntegratorConfig& cfg;
  double tau = 0.0;
  bool drains = true;

  const ControlLaw* law = nullptr;
  Trajectory* traj = nullptr;

  double t = 0.0;
  Vec3 y{};
  Vec3 f_cur{};  // f(t, y); FSAL slot
  double h = 0.0;
  long next_grid = 0;  // next output index to emit
  long steps_taken = 0;
  long crawl_iters = 0;  // consecutive steps too small to ever finish
  bool done = false;  // truncated: stop integrating, keep what we have

  Vec3 f(const Vec3& yy) const {
    return vector_field(p, State{yy[0], yy[1], yy[2]}, tau, drains);
  }

  TrajectorySample make_sample(double ts, const Vec3& ys) const {
    TrajectorySample s;
    s.t = ts;
    s.state = State{ys[0], ys[1], ys[2]};
    s.tau_applied = tau;
    if (law->kind == ControlLaw::Kind::Backstepping) {
      s.z2 = z2(p, law->gain, s.state);
      if (law->lyapunov_xi >= 0.0)
        s.v = lyapunov(law->lyapunov_xi, s.state.x1, *s.z2);
    }
    return s;
  }

  // Clamp roundoff-scale negative populations; anything worse is a hard
  // error. Returns true if the state changed.
  bool apply_floor(Vec3& yy, double at) const {
    if (!cfg.nonneg_floor) return false;
    const double base =
        (cfg.method == IntegratorConfig::Method::RK45Adaptive) ? cfg.abs_tol
                                                               : 1e-9;
    const double tol = std::max(base, 1e-12 * max_abs(yy));
    bool changed = false;
    for (double& v : yy) {
      if (v < 0.0) {
        if (v < -tol) {
          throw NegativeStateError(
              "population fell below the non-negativity floor", at);
        }
        v = 0.0;
        changed = true;
      }
    }
    return changed;
  }

  Vec3 clamp_sample(Vec3 v) const {
    if (cfg.nonneg_floor)
      for (double& x : v) x = std::max(x, 0.0);
    return v;
  }

  // Emit output-grid samples due in (t0, t1]; a point equal to `defer_at`
  // (a dose time) is left for the caller to emit post-dose.
  void emit_grid(const DenseStep& dense, double t1, double defer_at) {
    for (;;) {
      const double g = static_cast<double>(next_grid) * cfg.output_dt;
      if (g > t1) break;
      if (g == defer_at) break;
      traj->samples.push_back(make_sample(g, clamp_sample(dense.eval(g))));
      ++next_grid;
    }
  }

  void truncate(double at) {
    traj->truncated = true;
    traj->truncation_time = at;
    done = true;
  }

  void bump_steps(double at) {
    if (++steps_taken > kMaxInternalSteps) {
      throw StiffnessError("step budget exhausted", at);
    }
  }

  // An exploding component can drag the stable step size down so far that
  // the remaining span would take more steps than the budget allows. Once
  // that situation persists, give the run its verdict now: blown far past
  // cell-count scales means divergence, otherwise genuine stiffness.
  // Returns true when the run was truncated.
  bool crawl_check(double stop) {
    const double steps_left =
        (stop - t) / std::max(h, std::numeric_limits<double>::min());
    if (steps_left > static_cast<double>(kMaxInternalSteps - steps_taken)) {
      if (++crawl_iters >= 100) {
        if (max_abs(y) > kDivergedScale) {
          truncate(t);
          return true;
        }
        throw StiffnessError(
            "adaptive step too small to finish within the step budget", t);
      }
    } else {
      crawl_iters = 0;
    }
    return false;
  }

  // Advance from t to `stop`, emitting grid samples as steps complete.
  // `defer_at` is `stop` when a dose waits there.
  void advance(double stop, double defer_at) {
    if (cfg.method == IntegratorConfig::Method::RK45Adaptive) {
      advance_dopri(stop, defer_at);
    } else {
      advance_rk4(stop, defer_at);
    }
  }

  void advance_dopri(double stop, double defer_at) {
    while (!done && t < stop) {
      bump_steps(t);
      if (crawl_check(stop)) return;
      bool landing = false;
      double hs = h;
      if (t + hs >= stop) {
        hs = stop - t;
        landing = true;
      }

      const Vec3 k1 = f_cur;
      const Vec3 k2 = f(add_scaled(y, hs * a21, k1));
      Vec3 yt;
      for (int i = 0; i < 3; ++i)
        yt[i] = y[i] + hs * (a31 * k1[i] + a32 * k2[i]);
      const Vec3 k3 = f(yt);
      for (int i = 0; i < 3; ++i)
        yt[i] = y[i] + hs * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
      const Vec3 k4 = f(yt);
      for (int i = 0; i < 3; ++i)
        yt[i] = y[i] +
                hs * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
      const Vec3 k5 = f(yt);
      for (int i = 0; i < 3; ++i)
        yt[i] = y[i] + hs * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] +
                             a64 * k4[i] + a65 * k5[i]);
      const Vec3 k6 = f(yt);
      Vec3 ynew;
      for (int i = 0; i < 3; ++i)
        ynew[i] = y[i] + hs * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] +
                               b5 * k5[i] + b6 * k6[i]);
      const Vec3 k7 = finite(ynew) ? f(ynew) : Vec3{};

      double err = 0.0;
      for (int i = 0; i < 3; ++i) {
        const double le = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] +
                                e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        const double sc =
            cfg.abs_tol +
            cfg.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
        err += (le / sc) * (le / sc);
      }
      err = std::sqrt(err / 3.0);
      if (!finite(ynew) || !std::isfinite(err)) {
        err = std::numeric_limits<double>::infinity();
      }

      if (err <= 1.0) {
        const double t_new = landing ? stop : t + hs;

        DenseStep dense;
        dense.kind = DenseStep::Kind::Dopri;
        dense.t0 = t;
        dense.h = hs;
        dense.y0 = y;
        dense.y1 = ynew;
        for (int i = 0; i < 3; ++i) {
          const double ydiff = ynew[i] - y[i];
          const double bspl = hs * k1[i] - ydiff;
          dense.r2[i] = ydiff;
          dense.r3[i] = bspl;
          dense.r4[i] = ydiff - hs * k7[i] - bspl;
          dense.r5[i] = hs * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] +
                              d5 * k5[i] + d6 * k6[i] + d7 * k7[i]);
        }

        const bool floored = apply_floor(ynew, t_new);
        dense.y1 = ynew;
        emit_grid(dense, t_new, defer_at);

        t = t_new;
        y = ynew;
        f_cur = floored ? f(y) : k7;

        if (max_abs(y) > kTruncationCutoff) {
          truncate(t);
          return;
        }

        const double fac =
            (err == 0.0) ? 5.0
                         : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        h = std::clamp(hs * fac, cfg.min_step, cfg.max_step);
      } else {
        const double fac = std::clamp(0.9 * std::pow(err, -0.2), 0.1, 0.9);
        const double h_try = hs * fac;
        if (h_try < cfg.min_step) {
          if (max_abs(y) > 1e15) {
            truncate(t);
            return;
          }
          throw StiffnessError("adaptive step collapsed below min_step", t);
        }
        h = h_try;
      }
    }
  }

  void advance_rk4(double stop, double defer_at) {
    while (!done && t < stop) {
      bump_steps(t);
      bool landing = false;
      double hs = cfg.step;
      if (t + hs >= stop) {
        hs = stop - t;
        landing = true;
      }

      const Vec3 k1 = f_cur;
      const Vec3 k2 = f(add_scaled(y, 0.5 * hs, k1));
      const Vec3 k3 = f(add_scaled(y, 0.5 * hs, k2));
      const Vec3 k4 = f(add_scaled(y, hs, k3));
      Vec3 ynew;
      for (int i = 0; i < 3; ++i)
        ynew[i] =
            y[i] + hs / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);

      const double t_new = landing ? stop : t + hs;
      if (!finite(ynew)) {
        truncate(t_new);
        return;
      }
      apply_floor(ynew, t_new);
      const Vec3 fnew = f(ynew);

      DenseStep dense;
      dense.kind = DenseStep::Kind::Hermite;
      dense.t0 = t;
      dense.h = hs;
      dense.y0 = y;
      dense.y1 = ynew;
      dense.f0 = k1;
      dense.f1 = fnew;
      emit_grid(dense, t_new, defer_at);

      t = t_new;
      y = ynew;
      f_cur = fnew;

      if (max_abs(y) > kTruncationCutoff) {
        truncate(t);
        return;
      }
    }
  }
};

}  // namespace

Trajectory integrate(const ModelParams& p, const State& s0,
                     const ControlLaw& law, std::vector<DoseEvent> events,
                     double horizon, const IntegratorConfig& cfg) {
  validate(p);
  validate(s0, "initial");
  validate(law);
  validate(cfg);
  if (!(std::isfinite(horizon) && horizon > 0.0)) {
    throw InvalidInputError("horizon: must be finite and > 0");
  }
  for (const auto& ev : events) {
    if (!(std::isfinite(ev.time) && ev.time >= 0.0)) {
      throw InvalidInputError("events.time: must be finite and >= 0");
    }
    validate(ev.delta, "events.delta");
  }
  std::stable_sort(events.begin(), events.end(),
                   [](const DoseEvent& a, const DoseEvent& b) {
                     return a.time < b.time;
                   });

  Trajectory traj;
  Driver drv{p, cfg};
  drv.law = &law;
  drv.traj = &traj;
  drv.drains = law.tau_drains_pool;
  switch (law.kind) {
    case ControlLaw::Kind::Off: drv.tau = 0.0; break;
    case ControlLaw::Kind::ConstantTau: drv.tau = law.tau; break;
    case ControlLaw::Kind::Backstepping:
      drv.tau = tau_from_a(p, law.gain);
      break;
  }

  drv.t = 0.0;
  drv.y = {s0.x1, s0.x2, s0.x3};

  std::size_t ev_idx = 0;
  auto apply_doses_at = [&](double when) {
    while (ev_idx < events.size() && events[ev_idx].time == when) {
      AppliedDose ad;
      ad.event = events[ev_idx];
      ad.before = State{drv.y[0], drv.y[1], drv.y[2]};
      drv.y[0] += events[ev_idx].delta.x1;
      drv.y[1] += events[ev_idx].delta.x2;
      drv.y[2] += events[ev_idx].delta.x3;
      ad.after = State{drv.y[0], drv.y[1], drv.y[2]};
      traj.events_applied.push_back(ad);
      ++ev_idx;
    }
  };

  apply_doses_at(0.0);
  traj.samples.push_back(drv.make_sample(0.0, drv.y));
  drv.next_grid = 1;
  drv.f_cur = drv.f(drv.y);
  drv.h = std::clamp(cfg.output_dt, cfg.min_step, cfg.max_step);

  // Stop points: each distinct dose time inside the window, then the horizon.
  std::vector<double> stops;
  for (const auto& ev : events) {
    if (ev.time > 0.0 && ev.time <= horizon &&
        (stops.empty() || stops.back() != ev.time)) {
      stops.push_back(ev.time);
    }
  }
  if (stops.empty() || stops.back() != horizon) stops.push_back(horizon);

  for (double stop : stops) {
    if (drv.done) break;
    const bool has_dose =
        ev_idx < events.size() && events[ev_idx].time == stop;
    drv.advance(stop, has_dose ? stop : std::numeric_limits<double>::quiet_NaN());
    if (drv.done) break;
    if (has_dose) {
      apply_doses_at(stop);
      // a grid point deferred from the segment end is recorded post-dose
      const double g = static_cast<double>(drv.next_grid) * cfg.output_dt;
      if (g == stop) {
        traj.samples.push_back(drv.make_sample(g, drv.y));
        ++drv.next_grid;
      }
      drv.f_cur = drv.f(drv.y);
    }
  }

  if (!drv.done && !traj.samples.empty() &&
      traj.samples.back().t < horizon) {
    traj.samples.push_back(drv.make_sample(horizon, drv.y));
  }
  return traj;
}

OutcomeReport analyze_outcome(const Trajectory& traj,
                              double clearance_threshold,
                              double relapse_factor) {
  if (!(std::isfinite(clearance_threshold) && clearance_threshold >= 0.0)) {
    throw InvalidInputError("clearance_threshold: must be finite and >= 0");
  }
  if (!(std::isfinite(relapse_factor) && relapse_factor > 1.0)) {
    throw InvalidInputError("relapse_factor: must be finite and > 1");
  }
  OutcomeReport out;
  const auto& s = traj.samples;
  if (s.empty()) {
    out.diverged = traj.truncated;
    return out;
  }

  out.diverged = traj.truncated;
  for (const auto& smp : s) {
    const double m = std::max({smp.state.x1, smp.state.x2, smp.state.x3});
    if (!all_finite(smp.state) || m > 1e15) {
      out.diverged = true;
      break;
    }
  }

  double first_dose_t = s.front().t;
  if (!traj.events_applied.empty()) {
    first_dose_t = traj.events_applied.front().event.time;
    for (const auto& ad : traj.events_applied)
      first_dose_t = std::min(first_dose_t, ad.event.time);
  }

  std::size_t nadir_idx = 0;
  bool have_nadir = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i].t < first_dose_t) continue;
    if (!have_nadir || s[i].state.x1 < s[nadir_idx].state.x1) {
      nadir_idx = i;
      have_nadir = true;
    }
  }
  if (!have_nadir) nadir_idx = 0;
  out.nadir_t = s[nadir_idx].t;
  out.nadir_x1 = s[nadir_idx].state.x1;

  // clearance: last index still at/above threshold decides the entry time
  std::size_t last_above = s.size();
  for (std::size_t i = s.size(); i-- > 0;) {
    if (s[i].state.x1 >= clearance_threshold) {
      last_above = i;
      break;
    }
  }
  if (!out.diverged) {
    if (last_above == s.size()) {
      out.clearance_time = s.front().t;
    } else if (last_above + 1 < s.size()) {
      out.clearance_time = s[last_above + 1].t;
    }
  }

  const bool cleared_and_held =
      out.nadir_x1 < clearance_threshold && out.clearance_time.has_value();
  if (!cleared_and_held) {
    for (std::size_t i = nadir_idx + 1; i < s.size(); ++i) {
      if (s[i].state.x1 > relapse_factor * out.nadir_x1) {
        out.relapse_time = s[i].t;
        break;
      }
    }
  }

  // pools still rising at the horizon: non-decreasing x2+x3 over the second
  // half of the run and up by at least 5% across it
  const double t_mid = 0.5 * (s.front().t + s.back().t);
  std::size_t mid_idx = s.size();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i].t >= t_mid) {
      mid_idx = i;
      break;
    }
  }
  if (mid_idx + 1 < s.size()) {
    bool rising = true;
    for (std::size_t i = mid_idx; i + 1 < s.size() && rising; ++i) {
      const double c0 = s[i].state.x2 + s[i].state.x3;
      const double c1 = s[i + 1].state.x2 + s[i + 1].state.x3;
      rising = c1 >= c0 - 1e-9 * std::max(1.0, std::abs(c0));
    }
    const double c_mid = s[mid_idx].state.x2 + s[mid_idx].state.x3;
    const double c_end = s.back().state.x2 + s.back().state.x3;
    out.monotone_growth = rising && c_end > 0.0 && c_end >= 1.05 * c_mid;
  }
  return out;
}

}  // namespace cart
