#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "pulsedho/closed_form.hpp"
#include "pulsedho/error.hpp"
#include "pulsedho/model.hpp"
#include "pulsedho/oracle.hpp"

namespace pulsedho {

/// Particular solution selected by `m` as a function of t. The harmonic cutoff
/// is resolved once here (auto_cutoff when unset). Oracle is not a point method.
inline std::function<double(double)> particular_solution(const SystemParams& params, const DriveSpec& drive,
                                                         const MethodSelector& m) {
  if (std::holds_alternative<method::TimePeriodic>(m)) {
    switch (drive.kind) {
      case PulseKind::DiracComb: return [=](double t) { return tp_dc(t, params, drive); };
      case PulseKind::SquareTrain: return [=](double t) { return tp_sp(t, params, drive); };
      case PulseKind::GaussianTrain: return [=](double t) { return tp_gp(t, params, drive); };
    }
  }
  if (const auto* h = std::get_if<method::Harmonic>(&m)) {
    const int k_c = h->cutoff ? *h->cutoff : auto_cutoff(params, drive);
    if (k_c < 1) throw Error(ErrorCode::InvalidInput, "harmonic cutoff must be >= 1");
    switch (drive.kind) {
      case PulseKind::DiracComb: return [=](double t) { return hs_dc(t, params, drive, k_c); };
      case PulseKind::SquareTrain: return [=](double t) { return hs_sp(t, params, drive, k_c); };
      case PulseKind::GaussianTrain: return [=](double t) { return hs_gp(t, params, drive, k_c); };
    }
  }
  if (std::holds_alternative<method::SecondHarmonic>(m)) {
    switch (drive.kind) {
      case PulseKind::DiracComb: return [=](double t) { return approx2_dc(t, params, drive); };
      case PulseKind::GaussianTrain: return [=](double t) { return approx2_gp(t, params, drive); };
      case PulseKind::SquareTrain:
        throw Error(ErrorCode::KindMismatch, "no second-harmonic form for a square train");
    }
  }
  throw Error(ErrorCode::InvalidInput, "method " + label(m) + " has no pointwise closed form");
}

struct EvaluateOptions {
  unsigned workers = 1;  ///< 0 uses std::thread::hardware_concurrency()
};

/// Homogeneous plus particular solution on every grid sample, or the oracle
/// integration when `m` is Oracle.
inline Trace evaluate_trace(const TimeGrid& grid, const SystemParams& params, const DriveSpec& drive,
                            const InitialConditions& ic, const MethodSelector& m,
                            const EvaluateOptions& options = {}) {
  validate(params, drive).value();
  if (auto v = validate_grid(grid); !v.empty()) throw Error(ErrorCode::InvalidInput, v.front().message);
  if (grid.t_start < 0.0) throw Error(ErrorCode::NegativeTime, "grid starts before t = 0");

  if (const auto* o = std::get_if<method::Oracle>(&m)) {
    return integrate(grid, params, drive, ic, OracleConfig{o->dt});
  }

  std::vector<std::string> diagnostics;
  if (std::holds_alternative<method::Harmonic>(m) && !drive.pulses.is_infinite()) {
    diagnostics.push_back("warning: harmonic solution models an infinite train; " +
                          std::to_string(drive.pulses.count()) + " pulses requested");
  }

  const auto xp = particular_solution(params, drive, m);
  const bool free_motion = ic.x0 != 0.0 || ic.v0 != 0.0;
  std::vector<double> values(grid.n_samples);
  auto fill = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double t = grid.at(i);
      double x = xp(t);
      if (free_motion) x += homogeneous(t, params, ic);
      values[i] = x;
    }
  };

  unsigned workers = options.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.workers;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(1, grid.n_samples / 256)));
  if (workers <= 1) {
    fill(0, grid.n_samples);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (grid.n_samples + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
      const std::size_t begin = std::min(grid.n_samples, w * chunk);
      const std::size_t end = std::min(grid.n_samples, begin + chunk);
      pool.emplace_back([&, w, begin, end] {
        try {
          fill(begin, end);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return Trace(grid, std::move(values), m, params, drive, std::move(diagnostics));
}

}  // namespace pulsedho
