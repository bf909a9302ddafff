#pragma once

// Closed-form responses of the underdamped oscillator to pulse trains.
//
// Two families are provided for each pulse shape:
//
//  * time-periodic (tp_*): one impulse-response term per pulse, summed over
//    the pulses that have arrived;
//  * harmonic (hs_*): the pulse train summed first (N_d -> infinity), giving a
//    decaying pole-pair transient plus a Fourier series in omega_k = k omega_R,
//    truncated at a cutoff k_c.
//
// approx2_* keep only harmonics k <= 2 in amplitude-phase form.
//
// Every function expects parameters that pass validate(); the functions only
// check their own preconditions (pulse kind, t >= 0, erf range).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "pulsedho/error.hpp"
#include "pulsedho/forcing.hpp"
#include "pulsedho/model.hpp"

namespace pulsedho {

/// Constant a of the erf approximation erf(z) ~ 1 +/- i a tau omega / sqrt 2
/// at s = -gamma +/- i omega; a = ln(pi).
inline constexpr double kErfConstant = 1.1447298858494002;

/// Largest Im z = tau omega / sqrt 2 for which the erf approximation is used.
inline constexpr double kErfValidityLimit = 0.5;

inline constexpr int kMaxAutoCutoff = 10000;
inline constexpr double kAutoCutoffTolerance = 1e-8;

struct HarmonicTermDiagnostics {
  int k = 0;
  double amplitude = 0.0;  ///< >= 0
  double phase = 0.0;      ///< term = amplitude * sin(omega_k (t - Q) + phase)
};

namespace detail {

inline void require_kind(const DriveSpec& d, PulseKind kind, const char* what) {
  if (d.kind != kind) {
    throw Error(ErrorCode::KindMismatch,
                std::string(what) + " requires a " + to_string(kind) + " drive, got " + to_string(d.kind));
  }
}

inline void require_non_negative_time(double t) {
  if (!(t >= 0.0)) throw Error(ErrorCode::NegativeTime, "solutions are defined for t >= 0");
}

inline void require_cutoff(int k_c) {
  if (k_c < 1) throw Error(ErrorCode::InvalidInput, "harmonic cutoff must be >= 1");
}

/// Constants shared by every closed form of one (params, drive) pair.
struct Constants {
  double gamma, omega, omega0_sq, period, tau, shift, omega_r;
  double amplitude;  // I_p / m
  // Pole-pair denominator 1 - 2 e^{gT} cos(wT) + e^{2gT}, scaled by e^{-2gT}
  // so that large gamma T cannot overflow.
  double decay_one;  // e^{-gamma T}
  double decay_two;  // e^{-2 gamma T}
  double pole_den;

  Constants(const SystemParams& p, const DriveSpec& d)
      : gamma(p.gamma),
        omega(derived(p).omega),
        omega0_sq(p.omega0 * p.omega0),
        period(d.period),
        tau(d.tau),
        shift(d.shift),
        omega_r(d.repetition_rate()),
        amplitude(d.impulse / p.mass),
        decay_one(std::exp(-p.gamma * d.period)),
        decay_two(std::exp(-2.0 * p.gamma * d.period)),
        pole_den(decay_two - 2.0 * decay_one * std::cos(omega * d.period) + 1.0) {}

  double omega_k(int k) const { return static_cast<double>(k) * omega_r; }

  /// (omega0^2 - omega_k^2)^2 + 4 gamma^2 omega_k^2
  double resonance_den(double wk) const {
    const double b = omega0_sq - wk * wk;
    return b * b + 4.0 * gamma * gamma * wk * wk;
  }

  double gaussian_factor(double wk) const { return std::exp(-0.5 * tau * tau * wk * wk); }
};

// Periodic part of the Dirac-comb harmonic solution at s = t - Q >= 0, per unit
// I_p/m. gaussian selects the Gaussian spectral weights; the k-th weight is
// otherwise 1.
inline double dc_like_series(const Constants& c, double s, int k_c, bool gaussian) {
  double sum = 1.0 / (c.period * c.omega0_sq);
  for (int k = 1; k <= k_c; ++k) {
    const double wk = c.omega_k(k);
    const double arg = wk * s;
    double term = (2.0 * (c.omega0_sq - wk * wk) * std::cos(arg) + 4.0 * c.gamma * wk * std::sin(arg)) /
                  (c.period * c.resonance_den(wk));
    if (gaussian) term *= c.gaussian_factor(wk);
    sum += term;
  }
  return sum;
}

/// Response of the comb summed over all pulses, pole-pair part, per unit I_p/m:
/// e^{-gs} (sin(w u) - e^{gT} sin(w (u + T))) / (w (1 - 2 e^{gT} cos wT + e^{2gT}))
/// with u = s - phase_delay.
inline double pole_pair_transient(const Constants& c, double s, double phase_delay) {
  const double u = s - phase_delay;
  return std::exp(-c.gamma * s) *
         (c.decay_two * std::sin(c.omega * u) - c.decay_one * std::sin(c.omega * (u + c.period))) /
         (c.omega * c.pole_den);
}

/// x_inf for the square train before the I_p / (2 tau m) factor: response to
/// a periodic staircase of unit steps, evaluated at s >= 0.
inline double square_staircase(const Constants& c, double s, int k_c) {
  const double w0sq = c.omega0_sq;
  const double ramp = (-4.0 * c.gamma + (c.period + 2.0 * s) * w0sq) / (2.0 * c.period * w0sq * w0sq);
  auto phase_term = [&](double u) { return c.omega * std::cos(c.omega * u) + c.gamma * std::sin(c.omega * u); };
  const double transient = -std::exp(-c.gamma * s) *
                           (c.decay_two * phase_term(s) - c.decay_one * phase_term(s + c.period)) /
                           (c.omega * w0sq * c.pole_den);
  double series = 0.0;
  for (int k = 1; k <= k_c; ++k) {
    const double wk = c.omega_k(k);
    const double arg = wk * s;
    series += (-4.0 * c.gamma * wk * std::cos(arg) + 2.0 * (w0sq - wk * wk) * std::sin(arg)) /
              (wk * c.resonance_den(wk));
  }
  return ramp + transient + series / c.period;
}

inline double approx2_core(const Constants& c, double s, double weight1, double weight2) {
  const double wr = c.omega_r;
  const double w0sq = c.omega0_sq;
  const double phi1 = std::atan((w0sq - wr * wr) / (2.0 * c.gamma * wr));
  const double phi2 = std::atan((w0sq - 4.0 * wr * wr) / (4.0 * c.gamma * wr));
  const double r1 = std::sqrt((w0sq - wr * wr) * (w0sq - wr * wr) + 4.0 * c.gamma * c.gamma * wr * wr);
  const double r2 =
      std::sqrt((w0sq - 4.0 * wr * wr) * (w0sq - 4.0 * wr * wr) + 16.0 * c.gamma * c.gamma * wr * wr);
  return (1.0 / w0sq + 2.0 * weight1 * std::sin(wr * s + phi1) / r1 +
          2.0 * weight2 * std::sin(2.0 * wr * s + phi2) / r2) /
         c.period;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Free response

/// Displacement response to a unit impulse at t = 0: e^{-gamma t} sin(omega t) / omega.
inline double green_function(double t, const SystemParams& params) {
  detail::require_non_negative_time(t);
  const double omega = derived(params).omega;
  return std::exp(-params.gamma * t) * std::sin(omega * t) / omega;
}

inline double homogeneous(double t, const SystemParams& params, const InitialConditions& ic) {
  detail::require_non_negative_time(t);
  const double omega = derived(params).omega;
  return std::exp(-params.gamma * t) *
         (ic.x0 * std::cos(omega * t) + (ic.v0 + params.gamma * ic.x0) / omega * std::sin(omega * t));
}

// ---------------------------------------------------------------------------
// Time-periodic solutions

inline double tp_dc(double t, const SystemParams& params, const DriveSpec& drive) {
  detail::require_kind(drive, PulseKind::DiracComb, "tp_dc");
  detail::require_non_negative_time(t);
  const detail::Constants c(params, drive);
  const auto last = last_pulse_before(drive, t);
  if (!last) return 0.0;
  double sum = 0.0;
  for (std::size_t n = first_live_pulse(drive, t, c.gamma); n <= *last; ++n) {
    const double s = since_arrival(drive, t, n);
    sum += std::exp(-c.gamma * s) * std::sin(c.omega * s);
  }
  return c.amplitude / c.omega * sum;
}

inline double tp_sp(double t, const SystemParams& params, const DriveSpec& drive) {
  detail::require_kind(drive, PulseKind::SquareTrain, "tp_sp");
  detail::require_non_negative_time(t);
  const detail::Constants c(params, drive);
  const auto last = last_pulse_before(drive, t, c.tau);
  if (!last) return 0.0;
  auto edge = [&](double u) {
    return std::exp(-c.gamma * u) * (c.omega * std::cos(c.omega * u) + c.gamma * std::sin(c.omega * u)) /
           (c.omega * c.omega0_sq);
  };
  double sum = 0.0;
  for (std::size_t n = first_live_pulse(drive, t, c.gamma, c.tau); n <= *last; ++n) {
    const double s = since_arrival(drive, t, n);
    const double rise = s + c.tau;
    const double fall = s - c.tau;
    const bool risen = rise >= 0.0;
    const bool fallen = fall >= 0.0;
    double term = ((risen ? 1.0 : 0.0) - (fallen ? 1.0 : 0.0)) / c.omega0_sq;
    if (risen) term -= edge(rise);
    if (fallen) term += edge(fall);
    sum += term;
  }
  return c.amplitude / (2.0 * c.tau) * sum;
}

/// Time-periodic solution for a Gaussian train. `erf_constant` is the constant
/// a of the erf approximation; a = 0 reduces to erf(z) ~ 1.
inline double tp_gp(double t, const SystemParams& params, const DriveSpec& drive,
                    double erf_constant = kErfConstant) {
  detail::require_kind(drive, PulseKind::GaussianTrain, "tp_gp");
  detail::require_non_negative_time(t);
  const detail::Constants c(params, drive);
  if (!(c.tau * c.omega / std::numbers::sqrt2 < kErfValidityLimit)) {
    throw Error(ErrorCode::ErfApproxOutOfRange, "requires tau * omega / sqrt(2) < 0.5");
  }
  const auto last = last_pulse_before(drive, t);
  if (!last) return 0.0;
  const double delay = c.gamma * c.tau * c.tau;
  const double cos_weight = erf_constant * c.tau * c.omega / (2.0 * std::numbers::sqrt2);
  double sum = 0.0;
  for (std::size_t n = first_live_pulse(drive, t, c.gamma); n <= *last; ++n) {
    const double s = since_arrival(drive, t, n);
    const double phase = c.omega * (s - delay);
    sum += std::exp(-c.gamma * s) * (std::sin(phase) - cos_weight * std::cos(phase));
  }
  const double envelope = std::exp(-0.5 * c.tau * c.tau * (c.omega * c.omega - c.gamma * c.gamma));
  return c.amplitude / c.omega * envelope * sum;
}

// ---------------------------------------------------------------------------
// Harmonic solutions (infinite pulse train)

inline double hs_dc(double t, const SystemParams& params, const DriveSpec& drive, int k_c) {
  detail::require_kind(drive, PulseKind::DiracComb, "hs_dc");
  detail::require_non_negative_time(t);
  detail::require_cutoff(k_c);
  const double s = t - drive.shift;
  if (s < 0.0) return 0.0;
  const detail::Constants c(params, drive);
  return c.amplitude * (detail::pole_pair_transient(c, s, 0.0) + detail::dc_like_series(c, s, k_c, false));
}

inline double hs_sp(double t, const SystemParams& params, const DriveSpec& drive, int k_c) {
  detail::require_kind(drive, PulseKind::SquareTrain, "hs_sp");
  detail::require_non_negative_time(t);
  detail::require_cutoff(k_c);
  const detail::Constants c(params, drive);
  const double rise = t - drive.shift + c.tau;
  const double fall = t - drive.shift - c.tau;
  double x = 0.0;
  if (rise >= 0.0) x += detail::square_staircase(c, rise, k_c);
  if (fall >= 0.0) x -= detail::square_staircase(c, fall, k_c);
  return c.amplitude / (2.0 * c.tau) * x;
}

inline double hs_gp(double t, const SystemParams& params, const DriveSpec& drive, int k_c) {
  detail::require_kind(drive, PulseKind::GaussianTrain, "hs_gp");
  detail::require_non_negative_time(t);
  detail::require_cutoff(k_c);
  const double s = t - drive.shift;
  if (s < 0.0) return 0.0;
  const detail::Constants c(params, drive);
  const double envelope = std::exp(0.5 * c.tau * c.tau * (c.gamma * c.gamma - c.omega * c.omega));
  const double transient = envelope * detail::pole_pair_transient(c, s, c.gamma * c.tau * c.tau);
  return c.amplitude * (transient + detail::dc_like_series(c, s, k_c, true));
}

// ---------------------------------------------------------------------------
// Second-harmonic approximations

inline double approx2_dc(double t, const SystemParams& params, const DriveSpec& drive) {
  detail::require_kind(drive, PulseKind::DiracComb, "approx2_dc");
  detail::require_non_negative_time(t);
  const double s = t - drive.shift;
  if (s < 0.0) return 0.0;
  const detail::Constants c(params, drive);
  return c.amplitude * detail::approx2_core(c, s, 1.0, 1.0);
}

inline double approx2_gp(double t, const SystemParams& params, const DriveSpec& drive) {
  detail::require_kind(drive, PulseKind::GaussianTrain, "approx2_gp");
  detail::require_non_negative_time(t);
  const double s = t - drive.shift;
  if (s < 0.0) return 0.0;
  const detail::Constants c(params, drive);
  const double wr = c.omega_r;
  return c.amplitude * detail::approx2_core(c, s, c.gaussian_factor(wr), c.gaussian_factor(2.0 * wr));
}

// ---------------------------------------------------------------------------
// Harmonic diagnostics and truncation

/// Steady-state harmonic content of the particular solution,
/// x_p(t) = sum_k amplitude_k sin(omega_k (t - Q) + phase_k), k = 0..k_c.
/// The k = 0 entry is the static offset (phase pi/2).
inline std::vector<HarmonicTermDiagnostics> harmonic_terms(const SystemParams& params, const DriveSpec& drive,
                                                           int k_c) {
  detail::require_cutoff(k_c);
  const detail::Constants c(params, drive);
  std::vector<HarmonicTermDiagnostics> out;
  out.reserve(static_cast<std::size_t>(k_c) + 1);
  const double dc = c.amplitude / (c.period * c.omega0_sq);
  out.push_back({0, std::abs(dc), dc >= 0.0 ? std::numbers::pi / 2 : -std::numbers::pi / 2});
  for (int k = 1; k <= k_c; ++k) {
    const double wk = c.omega_k(k);
    const double root = std::sqrt(c.resonance_den(wk));
    double amp = 2.0 * c.amplitude / (c.period * root);
    double phase = std::atan2(c.omega0_sq - wk * wk, 2.0 * c.gamma * wk);
    if (drive.kind == PulseKind::GaussianTrain) amp *= c.gaussian_factor(wk);
    if (drive.kind == PulseKind::SquareTrain) amp *= std::sin(wk * c.tau) / (wk * c.tau);
    if (amp < 0.0) {
      amp = -amp;
      phase += std::numbers::pi;
    }
    phase = std::remainder(phase, 2.0 * std::numbers::pi);
    out.push_back({k, amp, phase});
  }
  return out;
}

/// Upper bound on the magnitude of harmonic term k (k >= 1), valid for every k:
/// 2 |I_p| / (m T) * G_k * S_k / max(|omega0^2 - omega_k^2|, 2 gamma omega_k),
/// where G_k is the Gaussian spectral factor and S_k = min(1, 1 / (omega_k tau))
/// the square-pulse sinc envelope.
inline double harmonic_term_bound(int k, const SystemParams& params, const DriveSpec& drive) {
  const detail::Constants c(params, drive);
  const double wk = c.omega_k(k);
  double bound =
      2.0 * std::abs(c.amplitude) / c.period / std::max(std::abs(c.omega0_sq - wk * wk), 2.0 * c.gamma * wk);
  if (drive.kind == PulseKind::GaussianTrain) bound *= c.gaussian_factor(wk);
  if (drive.kind == PulseKind::SquareTrain) bound *= std::min(1.0, 1.0 / (wk * c.tau));
  return bound;
}

/// Smallest cutoff after which every remaining term is below
/// 1e-8 * |I_p| / (m T omega0^2). Past omega_k^2 >= 2 omega0^2 the bound
/// 2 |I_p| G_k S_k / (m T (omega_k^2 - omega0^2)) decreases monotonically, so the
/// first term below tolerance there bounds the whole tail.
inline int auto_cutoff(const SystemParams& params, const DriveSpec& drive) {
  const detail::Constants c(params, drive);
  if (c.amplitude == 0.0) return 1;
  const double threshold = kAutoCutoffTolerance * std::abs(c.amplitude) / (c.period * c.omega0_sq);
  const int k_start = static_cast<int>(std::ceil(std::sqrt(2.0 * c.omega0_sq) / c.omega_r));
  for (int k_c = std::max(1, k_start - 1); k_c <= kMaxAutoCutoff; ++k_c) {
    const double wk = c.omega_k(k_c + 1);
    double tail = 2.0 * std::abs(c.amplitude) / (c.period * (wk * wk - c.omega0_sq));
    if (drive.kind == PulseKind::GaussianTrain) tail *= c.gaussian_factor(wk);
    if (drive.kind == PulseKind::SquareTrain) tail *= std::min(1.0, 1.0 / (wk * c.tau));
    if (tail < threshold) return k_c;
  }
  throw Error(ErrorCode::TruncationBudgetExceeded, "harmonic cutoff would exceed 10^4 terms");
}

}  // namespace pulsedho
