#pragma once

// Least-squares recovery of (gamma, omega) from a displacement trace, with the
// drive and mass known and zero initial conditions.

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "pulsedho/closed_form.hpp"
#include "pulsedho/error.hpp"
#include "pulsedho/evaluate.hpp"
#include "pulsedho/model.hpp"

namespace pulsedho {

struct FitSettings {
  int max_iterations = 200;
  double lambda_init = 1e-3;
  double lambda_factor = 10.0;
  double rms_tolerance = 1e-10;       ///< relative decrease of the RMS residual
  double gradient_tolerance = 1e-10;  ///< |J^T r|
  int stall_iterations = 2;
  double fd_step = 1e-6;  ///< relative to max(|p|, 1)
  double max_condition = 1e12;
  double gamma_floor = 1e-9;
  double omega_margin = 1e-9;
};

struct FitProblem {
  Trace data;
  DriveSpec drive;
  double mass = 1.0;
  MethodSelector model = method::TimePeriodic{};
  double gamma_init = 0.0;
  double omega_init = 0.0;
  FitSettings settings = {};
};

struct FitResult {
  double gamma_hat = 0.0;
  double omega_hat = 0.0;
  double omega0_hat = 0.0;
  double residual_rms = 0.0;
  int n_iterations = 0;
  bool converged = false;
  double jacobian_condition = 0.0;
  /// Sum of squared residuals at the start and after every accepted step.
  std::vector<double> objective_history;
  std::vector<double> residuals;  ///< data - model at the returned estimate
};

namespace detail {

inline std::pair<double, double> project(double gamma, double omega, const FitSettings& s) {
  gamma = std::max(gamma, s.gamma_floor);
  omega = std::max(omega, gamma + s.omega_margin);
  return {gamma, omega};
}

class FitModel {
 public:
  FitModel(const FitProblem& p) : problem_(p), times_(p.data.grid().times()) {
    if (!std::holds_alternative<method::TimePeriodic>(p.model) &&
        !std::holds_alternative<method::SecondHarmonic>(p.model)) {
      throw Error(ErrorCode::InvalidInput, "fit model must be TimePeriodic or SecondHarmonic");
    }
  }

  std::vector<double> evaluate(double gamma, double omega) const {
    const auto params = SystemParams::with_omega(problem_.mass, gamma, omega);
    const auto xp = particular_solution(params, problem_.drive, problem_.model);
    std::vector<double> out(times_.size());
    for (std::size_t i = 0; i < times_.size(); ++i) out[i] = xp(times_[i]);
    return out;
  }

  std::vector<double> residuals(double gamma, double omega) const {
    auto r = evaluate(gamma, omega);
    const auto& y = problem_.data.values();
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = y[i] - r[i];
    return r;
  }

 private:
  const FitProblem& problem_;
  std::vector<double> times_;
};

inline double sum_of_squares(const std::vector<double>& r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return s;
}

}  // namespace detail

/// Levenberg-Marquardt on the sum of squared residuals. Returns with
/// converged = false when the iteration cap is reached.
inline FitResult fit(const FitProblem& problem) {
  const FitSettings& s = problem.settings;
  if (problem.data.size() < 10) throw Error(ErrorCode::InvalidInput, "fit needs at least 10 samples");
  if (!(problem.gamma_init > 0.0 && problem.omega_init > problem.gamma_init) ||
      !std::isfinite(problem.omega_init)) {
    throw Error(ErrorCode::InvalidInput, "initial guess must satisfy 0 < gamma < omega");
  }
  if (!(problem.mass > 0.0)) throw Error(ErrorCode::InvalidInput, "mass must be > 0");
  if (auto v = validate_drive(problem.drive); !v.empty()) throw Error(ErrorCode::InvalidInput, v.front().message);

  const detail::FitModel model(problem);
  const std::size_t n = problem.data.size();
  auto [gamma, omega] = detail::project(problem.gamma_init, problem.omega_init, s);

  std::vector<double> r = model.residuals(gamma, omega);
  double cost = detail::sum_of_squares(r);
  FitResult result;
  result.objective_history.push_back(cost);

  double lambda = s.lambda_init;
  int stall = 0;
  int iter = 0;
  for (; iter < s.max_iterations && stall < s.stall_iterations;) {
    ++iter;
    // Central-difference Jacobian of the model, d model / d(gamma, omega).
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(n), 2);
    const double p[2] = {gamma, omega};
    for (int j = 0; j < 2; ++j) {
      const double h = s.fd_step * std::max(std::abs(p[j]), 1.0);
      double lo[2] = {p[0], p[1]};
      double hi[2] = {p[0], p[1]};
      hi[j] += h;
      lo[j] -= h;
      const auto m_hi = model.evaluate(hi[0], hi[1]);
      const auto m_lo = model.evaluate(lo[0], lo[1]);
      for (std::size_t i = 0; i < n; ++i) jac(static_cast<Eigen::Index>(i), j) = (m_hi[i] - m_lo[i]) / (2.0 * h);
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac);
    const auto sv = svd.singularValues();
    const double cond = sv(1) > 0.0 ? sv(0) / sv(1) : std::numeric_limits<double>::infinity();
    result.jacobian_condition = cond;
    if (!(cond <= s.max_condition)) {
      throw Error(ErrorCode::SingularJacobian, "Jacobian condition number exceeds 1e12");
    }

    const Eigen::Map<const Eigen::VectorXd> rv(r.data(), static_cast<Eigen::Index>(n));
    const Eigen::Matrix2d jtj = jac.transpose() * jac;
    const Eigen::Vector2d grad = jac.transpose() * rv;

    const double rms_old = std::sqrt(cost / static_cast<double>(n));
    bool accepted = false;
    while (!accepted && lambda < 1e20) {
      Eigen::Matrix2d a = jtj;
      a.diagonal() += lambda * jtj.diagonal();
      const Eigen::Vector2d delta = a.ldlt().solve(grad);
      const auto [g_try, w_try] = detail::project(gamma + delta(0), omega + delta(1), s);
      std::vector<double> r_try;
      double cost_try = std::numeric_limits<double>::infinity();
      try {
        r_try = model.residuals(g_try, w_try);
        cost_try = detail::sum_of_squares(r_try);
      } catch (const Error&) {
      }
      if (cost_try <= cost) {
        gamma = g_try;
        omega = w_try;
        r = std::move(r_try);
        cost = cost_try;
        lambda /= s.lambda_factor;
        result.objective_history.push_back(cost);
        accepted = true;
      } else {
        lambda *= s.lambda_factor;
      }
    }

    const double rms_new = std::sqrt(cost / static_cast<double>(n));
    const double rel_decrease = rms_old > 0.0 ? (rms_old - rms_new) / rms_old : 0.0;
    if (rel_decrease < s.rms_tolerance || grad.norm() < s.gradient_tolerance) {
      ++stall;
    } else {
      stall = 0;
    }
  }

  result.gamma_hat = gamma;
  result.omega_hat = omega;
  result.omega0_hat = std::hypot(gamma, omega);
  result.residual_rms = std::sqrt(cost / static_cast<double>(n));
  result.n_iterations = iter;
  result.converged = stall >= s.stall_iterations;
  result.residuals = std::move(r);
  return result;
}

// ---------------------------------------------------------------------------
// Starting values

struct InitialGuess {
  double gamma = 0.0;
  double omega = 0.0;
};

namespace detail {

/// Times and |values| of the lobe extrema of y, one per lobe closed by a sign
/// change; values within 5% of the largest magnitude count as zero.
inline std::vector<std::pair<double, double>> lobe_extrema(const std::vector<double>& t,
                                                           const std::vector<double>& y) {
  std::vector<std::pair<double, double>> out;
  double scale = 0.0;
  for (double v : y) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) return out;
  const double dead = 0.05 * scale;

  int sign = 0;
  std::size_t best = 0;
  auto flush = [&] {
    if (sign == 0) return;
    double tb = t[best];
    double yb = std::abs(y[best]);
    if (best > 0 && best + 1 < y.size()) {
      // Parabolic refinement through the three samples around the extremum.
      const double a = y[best - 1], b = y[best], c = y[best + 1];
      const double den = a - 2.0 * b + c;
      if (den != 0.0) {
        const double off = 0.5 * (a - c) / den;
        if (std::abs(off) <= 1.0) {
          const double h = t[best + 1] - t[best];
          tb += off * h;
          yb = std::abs(b - 0.25 * (a - c) * off);
        }
      }
    }
    out.emplace_back(tb, yb);
  };
  for (std::size_t i = 0; i < y.size(); ++i) {
    const int s = y[i] > dead ? 1 : (y[i] < -dead ? -1 : 0);
    if (s == 0) continue;
    if (s != sign) {
      flush();
      sign = s;
      best = i;
    } else if (std::abs(y[i]) > std::abs(y[best])) {
      best = i;
    }
  }
  // The last lobe is open at the window edge and is dropped.
  return out;
}

}  // namespace detail

/// omega from the zero-padded spectrum of the last complete inter-pulse window,
/// gamma from the log-decrement of lobe extrema in the first inter-pulse window.
/// Falls back to 2 omega_R and 1 / (5 T).
inline InitialGuess initial_guess(const Trace& data, const DriveSpec& drive) {
  const TimeGrid& g = data.grid();
  if (!(g.t_end - g.t_start >= 3.0 * drive.period) || data.size() < 4) {
    throw Error(ErrorCode::InsufficientData, "data must cover at least 3 periods");
  }
  const std::vector<double> t = g.times();
  const std::vector<double>& y = data.values();
  const double lead = 4.0 * drive.tau;

  auto window = [&](double a, double b) {
    std::pair<std::vector<double>, std::vector<double>> w;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] >= a && t[i] < b) {
        w.first.push_back(t[i]);
        w.second.push_back(y[i]);
      }
    }
    return w;
  };

  InitialGuess guess{1.0 / (5.0 * drive.period), 2.0 * drive.repetition_rate()};

  // Last full window [arrival(n) + 4 tau, arrival(n + 1)) inside the data.
  std::optional<std::size_t> last;
  for (std::size_t n = 0; drive.has_pulse(n + 1) && drive.arrival(n + 1) <= g.t_end; ++n) {
    if (drive.arrival(n) + lead >= g.t_start) last = n;
  }
  if (last) {
    auto [wt, wy] = window(drive.arrival(*last) + lead, drive.arrival(*last + 1));
    if (wy.size() >= 8) {
      double mean = 0.0;
      for (double v : wy) mean += v;
      mean /= static_cast<double>(wy.size());
      const std::size_t pad = 64 * wy.size();
      std::vector<double> buf(pad, 0.0);
      for (std::size_t i = 0; i < wy.size(); ++i) buf[i] = wy[i] - mean;
      Eigen::FFT<double> fft;
      std::vector<std::complex<double>> spec;
      fft.fwd(spec, buf);
      std::size_t best = 0;
      double best_mag = 0.0;
      for (std::size_t k = 1; k <= pad / 2; ++k) {
        const double mag = std::abs(spec[k]);
        if (mag > best_mag) {
          best_mag = mag;
          best = k;
        }
      }
      if (best > 0) guess.omega = 2.0 * std::numbers::pi * static_cast<double>(best) / (static_cast<double>(pad) * g.step());
    }
  }

  // First window [Q + 4 tau, T + Q): log-linear fit of the extrema magnitudes.
  auto [ft, fy] = window(std::max(g.t_start, drive.shift + lead), drive.shift + drive.period);
  const auto ext = detail::lobe_extrema(ft, fy);
  if (ext.size() >= 2) {
    double st = 0.0, sl = 0.0, stt = 0.0, stl = 0.0;
    for (const auto& [te, ye] : ext) {
      const double l = std::log(ye);
      st += te;
      sl += l;
      stt += te * te;
      stl += te * l;
    }
    const double k = static_cast<double>(ext.size());
    const double den = k * stt - st * st;
    if (den > 0.0) {
      const double slope = (k * stl - st * sl) / den;
      if (slope < 0.0 && std::isfinite(slope)) guess.gamma = -slope;
    }
  }
  if (!(guess.omega > guess.gamma)) guess.omega = 2.0 * guess.gamma;
  return guess;
}

}  // namespace pulsedho
