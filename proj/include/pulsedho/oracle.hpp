#pragma once

// Brute-force reference: classical RK4 on
//   x' = v,  v' = -2 gamma v - omega0^2 x + F(t) / m,
// integrated from t = 0 with fixed steps. Dirac kicks are applied as exact
// velocity jumps on inserted nodes; finite-width pulses are integrated with a
// refined step inside +/- 4 tau of each centre.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "pulsedho/error.hpp"
#include "pulsedho/forcing.hpp"
#include "pulsedho/model.hpp"

namespace pulsedho {

struct OracleConfig {
  double dt = 1e-4;
  int substep_refine = 16;
};

/// Largest admissible base step: min(t0 / 50, tau / 4 when tau > 0).
inline double max_oracle_step(const SystemParams& params, const DriveSpec& drive) {
  double limit = derived(params).t0 / 50.0;
  if (drive.tau > 0.0) limit = std::min(limit, drive.tau / 4.0);
  return limit;
}

/// Step used when none is requested: min(t0 / 200, tau / 10).
inline double default_oracle_step(const SystemParams& params, const DriveSpec& drive) {
  double dt = derived(params).t0 / 200.0;
  if (drive.tau > 0.0) dt = std::min(dt, drive.tau / 10.0);
  return dt;
}

/// Displacement and velocity on the sample grid.
struct PhaseSpaceTrace {
  TimeGrid grid;
  std::vector<double> x;
  std::vector<double> v;
};

namespace detail {

inline constexpr double kRefineHalfWidth = 4.0;  // in units of tau

struct OracleNode {
  double t;
  enum Kind { Kick, Boundary, Sample } kind;  // processing order at equal t
  std::size_t sample = 0;

  friend bool operator<(const OracleNode& a, const OracleNode& b) {
    if (a.t != b.t) return a.t < b.t;
    return a.kind < b.kind;
  }
};

inline bool inside_refine_window(const DriveSpec& d, double t) {
  if (d.kind == PulseKind::DiracComb) return false;
  const double half = kRefineHalfWidth * d.tau;
  const auto n = last_pulse_before(d, t, half);
  return n && since_arrival(d, t, *n) - half < 0.0;
}

}  // namespace detail

inline PhaseSpaceTrace integrate_phase_space(const TimeGrid& grid, const SystemParams& params,
                                             const DriveSpec& drive, const InitialConditions& ic,
                                             const OracleConfig& config = {}) {
  validate(params, drive).value();
  if (auto v = validate_grid(grid); !v.empty()) throw Error(ErrorCode::InvalidInput, v.front().message);
  if (grid.t_start < 0.0) throw Error(ErrorCode::NegativeTime, "oracle integrates from t = 0");
  if (!(config.dt > 0.0) || !std::isfinite(config.dt)) {
    throw Error(ErrorCode::InvalidInput, "oracle dt must be > 0");
  }
  if (config.substep_refine < 1) throw Error(ErrorCode::InvalidInput, "substep_refine must be >= 1");
  if (config.dt > max_oracle_step(params, drive)) {
    throw Error(ErrorCode::StepTooLarge, "oracle dt exceeds min(t0/50, tau/4)");
  }

  const double t_end = grid.t_end;
  std::vector<detail::OracleNode> nodes;
  nodes.reserve(grid.n_samples + 16);
  for (std::size_t i = 0; i < grid.n_samples; ++i) nodes.push_back({grid.at(i), detail::OracleNode::Sample, i});

  for (std::size_t n = 0; drive.has_pulse(n) && drive.arrival(n) - detail::kRefineHalfWidth * drive.tau <= t_end;
       ++n) {
    const double c = drive.arrival(n);
    if (drive.kind == PulseKind::DiracComb) {
      nodes.push_back({c, detail::OracleNode::Kick});
      continue;
    }
    const double half = detail::kRefineHalfWidth * drive.tau;
    for (double b : {c - half, c + half}) nodes.push_back({b, detail::OracleNode::Boundary});
    if (drive.kind == PulseKind::SquareTrain) {
      for (double b : {c - drive.tau, c + drive.tau}) nodes.push_back({b, detail::OracleNode::Boundary});
    }
  }
  std::sort(nodes.begin(), nodes.end());

  const double inv_mass = 1.0 / params.mass;
  const double two_gamma = 2.0 * params.gamma;
  const double w0sq = params.omega0 * params.omega0;
  // Square forcing is piecewise constant between nodes (edges are nodes), so
  // it is sampled once per segment rather than at the segment ends.
  const bool smooth_force = drive.kind == PulseKind::GaussianTrain;
  double segment_accel = 0.0;
  auto accel = [&](double t, double x, double v) {
    double a = -two_gamma * v - w0sq * x;
    a += smooth_force ? force_eval(t, drive) * inv_mass : segment_accel;
    return a;
  };

  double t = 0.0;
  double x = ic.x0;
  double v = ic.v0;
  auto advance_to = [&](double target) {
    if (!(target > t)) return;
    const double mid = t + 0.5 * (target - t);
    const double h_max = detail::inside_refine_window(drive, mid) ? config.dt / config.substep_refine : config.dt;
    if (drive.kind == PulseKind::SquareTrain) segment_accel = force_eval(mid, drive) * inv_mass;
    const auto steps = static_cast<std::size_t>(std::ceil((target - t) / h_max));
    const double start = t;
    const double span = target - start;
    for (std::size_t i = 0; i < steps; ++i) {
      const double t0 = start + span * (static_cast<double>(i) / static_cast<double>(steps));
      const double t1 = (i + 1 == steps) ? target : start + span * (static_cast<double>(i + 1) / static_cast<double>(steps));
      const double h = t1 - t0;
      const double th = t0 + 0.5 * h;
      const double k1x = v;
      const double k1v = accel(t0, x, v);
      const double k2x = v + 0.5 * h * k1v;
      const double k2v = accel(th, x + 0.5 * h * k1x, k2x);
      const double k3x = v + 0.5 * h * k2v;
      const double k3v = accel(th, x + 0.5 * h * k2x, k3x);
      const double k4x = v + h * k3v;
      const double k4v = accel(t1, x + h * k3x, k4x);
      x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
      v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
    t = target;
  };

  PhaseSpaceTrace out{grid, std::vector<double>(grid.n_samples), std::vector<double>(grid.n_samples)};
  const double kick = drive.impulse * inv_mass;
  for (const auto& node : nodes) {
    if (node.t < 0.0) continue;
    advance_to(node.t);
    switch (node.kind) {
      case detail::OracleNode::Kick: v += kick; break;
      case detail::OracleNode::Boundary: break;
      case detail::OracleNode::Sample:
        out.x[node.sample] = x;
        out.v[node.sample] = v;
        break;
    }
  }
  return out;
}

inline Trace integrate(const TimeGrid& grid, const SystemParams& params, const DriveSpec& drive,
                       const InitialConditions& ic, const OracleConfig& config = {}) {
  auto ps = integrate_phase_space(grid, params, drive, ic, config);
  return Trace(grid, std::move(ps.x), method::Oracle{config.dt}, params, drive);
}

// ---------------------------------------------------------------------------

struct Comparison {
  double max_abs_diff = 0.0;
  /// max |a - b| / max |a|; equals max_abs_diff when rel_is_absolute.
  double max_rel_to_peak = 0.0;
  double rms_diff = 0.0;
  double argmax_time = 0.0;
  bool rel_is_absolute = false;
};

inline Comparison compare(const Trace& a, const Trace& b) {
  if (!(a.grid() == b.grid())) throw Error(ErrorCode::GridMismatch, "traces are sampled on different grids");
  Comparison c;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]);
    sum_sq += d * d;
    if (d > c.max_abs_diff) {
      c.max_abs_diff = d;
      c.argmax_time = a.time(i);
    }
  }
  if (a.size() > 0) c.rms_diff = std::sqrt(sum_sq / static_cast<double>(a.size()));
  const double peak = a.peak();
  if (peak > 0.0) {
    c.max_rel_to_peak = c.max_abs_diff / peak;
  } else {
    c.max_rel_to_peak = c.max_abs_diff;
    c.rel_is_absolute = true;
  }
  if (a.size() > 0 && c.max_abs_diff == 0.0) c.argmax_time = a.time(0);
  return c;
}

}  // namespace pulsedho
