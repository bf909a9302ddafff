#pragma once

// Domain types for a damped harmonic oscillator driven by a train of short
// pulses:
//
//   x'' + 2 gamma x' + omega0^2 x = F(t) / m,
//   F(t) = sum_n F_pulse(t - n T - Q).
//
// All types are plain values. Validation is explicit: validate() reports every
// violated invariant instead of stopping at the first one.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "pulsedho/error.hpp"

namespace pulsedho {

/// Oscillator constants. omega0 is stored; omega = sqrt(omega0^2 - gamma^2) is
/// derived (see derived()).
struct SystemParams {
  double mass = 1.0;
  double gamma = 0.0;
  double omega0 = 0.0;

  /// Builds the parameters from the damped frequency, as the figures and
  /// experiments usually quote (gamma, omega).
  static SystemParams with_omega(double mass, double gamma, double omega) {
    return SystemParams{mass, gamma, std::hypot(gamma, omega)};
  }

  double damping_coefficient() const { return 2.0 * mass * gamma; }
  double stiffness() const { return mass * omega0 * omega0; }
};

struct DerivedQuantities {
  double omega = 0.0;  ///< underdamped oscillation frequency
  double tau0 = 0.0;   ///< damping time 1/gamma
  double t0 = 0.0;     ///< oscillation time 1/omega
};

inline DerivedQuantities derived(const SystemParams& p) {
  // (w0 - g)(w0 + g) keeps the difference of squares accurate near critical damping.
  const double omega = std::sqrt((p.omega0 - p.gamma) * (p.omega0 + p.gamma));
  return {omega, 1.0 / p.gamma, 1.0 / omega};
}

enum class PulseKind { DiracComb, SquareTrain, GaussianTrain };

inline const char* to_string(PulseKind kind) {
  switch (kind) {
    case PulseKind::DiracComb: return "dc";
    case PulseKind::SquareTrain: return "sp";
    case PulseKind::GaussianTrain: return "gp";
  }
  return "?";
}

/// Number of pulses in the train, N_d + 1, or an unbounded train.
class PulseCount {
 public:
  constexpr PulseCount() = default;

  static constexpr PulseCount infinite() { return PulseCount(); }
  static constexpr PulseCount finite(std::size_t n) { return PulseCount(n); }

  constexpr bool is_infinite() const { return infinite_; }
  constexpr std::size_t count() const { return n_; }

  friend constexpr bool operator==(PulseCount, PulseCount) = default;

 private:
  constexpr explicit PulseCount(std::size_t n) : n_(n), infinite_(false) {}

  std::size_t n_ = 0;
  bool infinite_ = true;
};

struct DriveSpec {
  PulseKind kind = PulseKind::DiracComb;
  double period = 1.0;  ///< T
  double tau = 0.0;     ///< half-width (square) or standard deviation (Gaussian)
  double shift = 0.0;   ///< Q, centre of the first pulse
  PulseCount pulses = PulseCount::infinite();
  double impulse = 1.0;  ///< I_p delivered by a single pulse

  double repetition_rate() const { return 2.0 * std::numbers::pi / period; }

  /// Peak force of a single pulse, F0 = I_p / 2 tau for square pulses and
  /// I_p / (sqrt(2 pi) tau) for Gaussian pulses.
  double peak_force() const {
    if (kind == PulseKind::GaussianTrain) {
      return impulse / (std::sqrt(2.0 * std::numbers::pi) * tau);
    }
    return impulse / (2.0 * tau);
  }

  /// Arrival time (pulse centre) of pulse n.
  double arrival(std::size_t n) const { return static_cast<double>(n) * period + shift; }

  bool has_pulse(std::size_t n) const { return pulses.is_infinite() || n < pulses.count(); }
};

struct InitialConditions {
  double x0 = 0.0;
  double v0 = 0.0;
};

/// Uniform sampling of [t_start, t_end], endpoints included.
struct TimeGrid {
  double t_start = 0.0;
  double t_end = 1.0;
  std::size_t n_samples = 2;

  double step() const {
    return n_samples > 1 ? (t_end - t_start) / static_cast<double>(n_samples - 1) : 0.0;
  }

  double at(std::size_t i) const {
    if (n_samples < 2 || i == 0) return t_start;
    if (i + 1 == n_samples) return t_end;
    return t_start + (t_end - t_start) * (static_cast<double>(i) / static_cast<double>(n_samples - 1));
  }

  std::vector<double> times() const {
    std::vector<double> t(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) t[i] = at(i);
    return t;
  }

  friend bool operator==(const TimeGrid&, const TimeGrid&) = default;
};

namespace method {
struct TimePeriodic {
  friend bool operator==(const TimePeriodic&, const TimePeriodic&) = default;
};
/// Harmonic series truncated at `cutoff`; empty selects the cutoff from the
/// analytic tail bound.
struct Harmonic {
  std::optional<int> cutoff;
  friend bool operator==(const Harmonic&, const Harmonic&) = default;
};
struct SecondHarmonic {
  friend bool operator==(const SecondHarmonic&, const SecondHarmonic&) = default;
};
struct Oracle {
  double dt = 0.0;
  friend bool operator==(const Oracle&, const Oracle&) = default;
};
}  // namespace method

using MethodSelector =
    std::variant<method::TimePeriodic, method::Harmonic, method::SecondHarmonic, method::Oracle>;

inline std::string label(const MethodSelector& m) {
  struct Visitor {
    std::string operator()(const method::TimePeriodic&) const { return "tp"; }
    std::string operator()(const method::Harmonic& h) const {
      return h.cutoff ? "hs" + std::to_string(*h.cutoff) : "hs";
    }
    std::string operator()(const method::SecondHarmonic&) const { return "approx2"; }
    std::string operator()(const method::Oracle&) const { return "oracle"; }
  };
  return std::visit(Visitor{}, m);
}

// ---------------------------------------------------------------------------
// Validation

enum class ViolationKind { NotUnderdamped, GeometryViolation, NonPositive, NonFinite, IllConditioned };

inline const char* to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::NotUnderdamped: return "NotUnderdamped";
    case ViolationKind::GeometryViolation: return "GeometryViolation";
    case ViolationKind::NonPositive: return "NonPositive";
    case ViolationKind::NonFinite: return "NonFinite";
    case ViolationKind::IllConditioned: return "IllConditioned";
  }
  return "?";
}

struct Violation {
  ViolationKind kind;
  std::string message;
};

/// Minimum damping per period; below it the pole-pair denominators of the
/// harmonic solutions, (e^{gamma T} - cos omega T)^2 + sin^2 omega T, can vanish.
inline constexpr double kMinDampingPerPeriod = 1e-6;

struct ValidatedSetup {
  SystemParams params;
  DriveSpec drive;
};

class ValidationResult {
 public:
  ValidationResult(ValidatedSetup setup, std::vector<Violation> violations)
      : setup_(std::move(setup)), violations_(std::move(violations)) {}

  bool ok() const { return violations_.empty(); }
  explicit operator bool() const { return ok(); }

  const std::vector<Violation>& violations() const { return violations_; }

  bool has(ViolationKind kind) const {
    for (const auto& v : violations_) {
      if (v.kind == kind) return true;
    }
    return false;
  }

  std::string summary() const {
    std::string out;
    for (const auto& v : violations_) {
      if (!out.empty()) out += "; ";
      out += to_string(v.kind);
      out += ": ";
      out += v.message;
    }
    return out;
  }

  /// The validated pair; throws InvalidInput when any invariant is violated.
  const ValidatedSetup& value() const {
    if (!ok()) throw Error(ErrorCode::InvalidInput, summary());
    return setup_;
  }

 private:
  ValidatedSetup setup_;
  std::vector<Violation> violations_;
};

namespace detail {

inline void require_positive(std::vector<Violation>& out, const char* name, double v) {
  if (!std::isfinite(v)) {
    out.push_back({ViolationKind::NonFinite, std::string(name) + " is not finite"});
  } else if (v <= 0.0) {
    out.push_back({ViolationKind::NonPositive, std::string(name) + " must be > 0"});
  }
}

}  // namespace detail

inline std::vector<Violation> validate_params(const SystemParams& p) {
  std::vector<Violation> out;
  detail::require_positive(out, "mass", p.mass);
  detail::require_positive(out, "gamma", p.gamma);
  detail::require_positive(out, "omega0", p.omega0);
  if (std::isfinite(p.gamma) && std::isfinite(p.omega0) && p.gamma > 0.0 && p.omega0 > 0.0 &&
      !(p.gamma < p.omega0)) {
    out.push_back({ViolationKind::NotUnderdamped, "requires 0 < gamma < omega0"});
  }
  return out;
}

inline std::vector<Violation> validate_drive(const DriveSpec& d) {
  std::vector<Violation> out;
  detail::require_positive(out, "period", d.period);
  detail::require_positive(out, "shift", d.shift);
  if (!std::isfinite(d.impulse)) {
    out.push_back({ViolationKind::NonFinite, "impulse is not finite"});
  }
  if (!d.pulses.is_infinite() && d.pulses.count() == 0) {
    out.push_back({ViolationKind::NonPositive, "pulse count must be >= 1"});
  }
  if (!std::isfinite(d.tau)) {
    out.push_back({ViolationKind::NonFinite, "tau is not finite"});
    return out;
  }
  if (d.kind == PulseKind::DiracComb) {
    if (d.tau != 0.0) {
      out.push_back({ViolationKind::GeometryViolation, "Dirac comb requires tau == 0"});
    }
  } else if (d.tau <= 0.0) {
    out.push_back({ViolationKind::NonPositive, "tau must be > 0 for finite-width pulses"});
  }
  if (std::isfinite(d.period) && std::isfinite(d.shift)) {
    if (!(d.period > 2.0 * d.tau)) {
      out.push_back({ViolationKind::GeometryViolation, "pulses overlap: requires T > 2 tau"});
    }
    if (!(d.shift > d.tau)) {
      out.push_back({ViolationKind::GeometryViolation, "requires Q > tau"});
    }
    if (!(d.period > d.shift)) {
      out.push_back({ViolationKind::GeometryViolation, "requires T > Q"});
    }
  }
  return out;
}

/// Checks every invariant of the pair; never throws.
inline ValidationResult validate(const SystemParams& params, const DriveSpec& drive) {
  std::vector<Violation> out = validate_params(params);
  std::vector<Violation> d = validate_drive(drive);
  out.insert(out.end(), d.begin(), d.end());
  if (out.empty() && params.gamma * drive.period < kMinDampingPerPeriod) {
    out.push_back({ViolationKind::IllConditioned, "requires gamma * T >= 1e-6"});
  }
  return ValidationResult({params, drive}, std::move(out));
}

inline std::vector<Violation> validate_grid(const TimeGrid& g) {
  std::vector<Violation> out;
  if (!std::isfinite(g.t_start) || !std::isfinite(g.t_end)) {
    out.push_back({ViolationKind::NonFinite, "grid bounds are not finite"});
  } else if (!(g.t_start < g.t_end)) {
    out.push_back({ViolationKind::GeometryViolation, "requires t_start < t_end"});
  }
  if (g.n_samples == 0) {
    out.push_back({ViolationKind::NonPositive, "n_samples must be >= 1"});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trace

/// Sampled displacement together with the configuration that produced it.
class Trace {
 public:
  Trace(TimeGrid grid, std::vector<double> values, MethodSelector method, SystemParams params,
        DriveSpec drive, std::vector<std::string> diagnostics = {})
      : grid_(grid),
        values_(std::move(values)),
        method_(method),
        params_(params),
        drive_(drive),
        diagnostics_(std::move(diagnostics)) {
    if (values_.size() != grid_.n_samples) {
      throw Error(ErrorCode::InvalidInput, "trace length does not match grid");
    }
    for (double v : values_) {
      if (!std::isfinite(v)) throw Error(ErrorCode::InvalidInput, "trace holds a non-finite value");
    }
  }

  const TimeGrid& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }
  const MethodSelector& method() const { return method_; }
  const SystemParams& params() const { return params_; }
  const DriveSpec& drive() const { return drive_; }
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

  std::size_t size() const { return values_.size(); }
  double time(std::size_t i) const { return grid_.at(i); }
  double operator[](std::size_t i) const { return values_[i]; }

  double peak() const {
    double p = 0.0;
    for (double v : values_) p = std::max(p, std::abs(v));
    return p;
  }

 private:
  TimeGrid grid_;
  std::vector<double> values_;
  MethodSelector method_;
  SystemParams params_;
  DriveSpec drive_;
  std::vector<std::string> diagnostics_;
};

}  // namespace pulsedho
