#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>

#include "pulsedho/error.hpp"
#include "pulsedho/model.hpp"

namespace pulsedho {

/// Time since the centre of pulse n, t - (nT + Q). Every gate and phase in the
/// library is computed from this value so that all code paths agree on which
/// pulses a sample sees.
inline double since_arrival(const DriveSpec& d, double t, std::size_t n) { return t - d.arrival(n); }

/// Largest pulse index n with since_arrival(t, n) + lead >= 0, honouring the
/// pulse count. Empty when no pulse qualifies.
inline std::optional<std::size_t> last_pulse_before(const DriveSpec& d, double t, double lead = 0.0) {
  const double x = (t + lead - d.shift) / d.period;
  if (!(x > -2.0)) return std::nullopt;
  double guess = std::floor(x) + 1.0;
  if (!d.pulses.is_infinite()) {
    guess = std::min(guess, static_cast<double>(d.pulses.count()) - 1.0);
  }
  if (guess < 0.0) guess = 0.0;
  auto n = static_cast<std::size_t>(guess);
  while (since_arrival(d, t, n) + lead < 0.0) {
    if (n == 0) return std::nullopt;
    --n;
  }
  return n;
}

/// Smallest pulse index whose response can still be represented after decaying
/// at rate gamma: older pulses contribute exactly zero in double precision.
inline std::size_t first_live_pulse(const DriveSpec& d, double t, double gamma, double lead = 0.0) {
  constexpr double kUnderflowExponent = 750.0;
  const double x = (t + lead - kUnderflowExponent / gamma - d.shift) / d.period;
  if (!(x > 1.0)) return 0;
  return static_cast<std::size_t>(std::floor(x)) - 1;
}

/// Driving force of a square or Gaussian pulse train at time t. Delta pulses
/// have no pointwise value and are rejected.
inline double force_eval(double t, const DriveSpec& d) {
  switch (d.kind) {
    case PulseKind::DiracComb:
      throw Error(ErrorCode::DeltaNotEvaluable, "a Dirac comb has no pointwise force value");
    case PulseKind::SquareTrain: {
      // Active on [centre - tau, centre + tau) with Theta(0) = 1.
      const auto last = last_pulse_before(d, t, d.tau);
      if (!last) return 0.0;
      const double s = since_arrival(d, t, *last);
      return (s - d.tau < 0.0) ? d.impulse / (2.0 * d.tau) : 0.0;
    }
    case PulseKind::GaussianTrain: {
      constexpr double kReach = 40.0;  // exp(-800) underflows to 0
      const auto last = last_pulse_before(d, t, kReach * d.tau);
      if (!last) return 0.0;
      const double norm = d.impulse / (std::sqrt(2.0 * std::numbers::pi) * d.tau);
      double f = 0.0;
      for (std::size_t n = *last + 1; n-- > 0;) {
        const double s = since_arrival(d, t, n);
        if (s > kReach * d.tau) break;
        const double u = s / d.tau;
        f += norm * std::exp(-0.5 * u * u);
      }
      return f;
    }
  }
  return 0.0;
}

}  // namespace pulsedho
