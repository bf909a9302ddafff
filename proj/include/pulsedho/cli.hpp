#pragma once

// Command-line front end. run() takes the arguments after the program name and
// returns the process exit code: 0 success, 2 invalid input, 3 fit not
// converged.

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "pulsedho/closed_form.hpp"
#include "pulsedho/error.hpp"
#include "pulsedho/evaluate.hpp"
#include "pulsedho/fitting.hpp"
#include "pulsedho/forcing.hpp"
#include "pulsedho/model.hpp"
#include "pulsedho/oracle.hpp"

namespace pulsedho::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNotConverged = 3;

/// 17 significant digits (exact round trip), trailing zeros dropped.
inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

/// Parses tp | hs | hs:K | approx2 | oracle | oracle:DT.
inline MethodSelector parse_method(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const std::optional<std::string> arg =
      colon == std::string::npos ? std::nullopt : std::optional<std::string>(text.substr(colon + 1));
  auto number = [&](auto& value) {
    const auto* first = arg->data();
    const auto* last = first + arg->size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) throw Error(ErrorCode::InvalidInput, "bad method argument: " + text);
  };
  if (name == "tp" && !arg) return method::TimePeriodic{};
  if (name == "approx2" && !arg) return method::SecondHarmonic{};
  if (name == "hs") {
    if (!arg) return method::Harmonic{};
    int k = 0;
    number(k);
    if (k < 1) throw Error(ErrorCode::InvalidInput, "harmonic cutoff must be >= 1");
    return method::Harmonic{k};
  }
  if (name == "oracle") {
    if (!arg) return method::Oracle{0.0};
    double dt = 0.0;
    number(dt);
    if (!(dt > 0.0)) throw Error(ErrorCode::InvalidInput, "oracle dt must be > 0");
    return method::Oracle{dt};
  }
  throw Error(ErrorCode::InvalidInput, "unknown method: " + text);
}

inline PulseCount parse_pulses(const std::string& text) {
  if (text == "inf") return PulseCount::infinite();
  std::size_t n = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), n);
  if (ec != std::errc() || ptr != text.data() + text.size() || n == 0) {
    throw Error(ErrorCode::InvalidInput, "--pulses must be a positive integer or inf");
  }
  return PulseCount::finite(n);
}

struct RunConfig {
  std::string kind = "dc";
  std::optional<double> gamma;
  std::optional<double> omega;
  std::optional<double> omega0;
  double mass = 1.0;
  double impulse = 1.0;
  double period = 1.0;
  double tau = 0.0;
  std::optional<double> shift;
  std::string pulses = "inf";
  double t_start = 0.0;
  std::optional<double> t_end;
  std::size_t samples = 6000;
  std::vector<std::string> methods;
  bool normalized = false;
  std::uint64_t seed = 0;
  std::string out;
  unsigned workers = 0;

  // limit-study
  std::vector<double> taus;

  // fit
  std::string data;
  bool synthetic = false;
  double noise = 0.0;
  std::optional<double> gamma_init;
  std::optional<double> omega_init;
  std::string residuals;

  PulseKind pulse_kind() const {
    if (kind == "dc") return PulseKind::DiracComb;
    if (kind == "sp") return PulseKind::SquareTrain;
    if (kind == "gp") return PulseKind::GaussianTrain;
    throw Error(ErrorCode::InvalidInput, "--kind must be dc, sp or gp");
  }

  DriveSpec drive() const {
    if (!shift) throw Error(ErrorCode::InvalidInput, "--shift is required");
    return DriveSpec{pulse_kind(), period, tau, *shift, parse_pulses(pulses), impulse};
  }

  SystemParams params() const {
    if (!gamma) throw Error(ErrorCode::InvalidInput, "--gamma is required");
    if (!omega && !omega0) throw Error(ErrorCode::InvalidInput, "one of --omega or --omega0 is required");
    if (omega && omega0) {
      const double w0sq = *omega0 * *omega0;
      if (std::abs(w0sq - *omega * *omega - *gamma * *gamma) > 1e-9 * w0sq) {
        throw Error(ErrorCode::InvalidInput, "--omega0 is inconsistent with --gamma and --omega");
      }
    }
    if (omega) return SystemParams::with_omega(mass, *gamma, *omega);
    return SystemParams{mass, *gamma, *omega0};
  }

  TimeGrid grid() const { return TimeGrid{t_start, t_end.value_or(6.0 * period), samples}; }

  std::vector<MethodSelector> method_list() const {
    std::vector<MethodSelector> out;
    for (const auto& m : methods) out.push_back(parse_method(m));
    if (out.empty()) out.push_back(method::TimePeriodic{});
    return out;
  }
};

namespace detail {

/// Validates the pair and the grid; throws InvalidInput listing every violation.
inline ValidatedSetup checked_setup(const RunConfig& cfg) {
  const auto result = validate(cfg.params(), cfg.drive());
  auto grid_violations = validate_grid(cfg.grid());
  if (!result.ok() || !grid_violations.empty()) {
    std::string msg = result.summary();
    for (const auto& v : grid_violations) {
      if (!msg.empty()) msg += "; ";
      msg += std::string(to_string(v.kind)) + ": " + v.message;
    }
    throw Error(ErrorCode::InvalidInput, msg);
  }
  return result.value();
}

inline MethodSelector resolve_oracle_step(MethodSelector m, const SystemParams& p, const DriveSpec& d) {
  if (auto* o = std::get_if<method::Oracle>(&m); o && o->dt == 0.0) o->dt = default_oracle_step(p, d);
  return m;
}

/// Writes to --out when given, else to `fallback`.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : stream_(&fallback) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw Error(ErrorCode::InvalidInput, "cannot open output file: " + path);
      stream_ = file_.get();
    }
  }
  std::ostream& operator*() { return *stream_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_;
};

inline void write_traces(std::ostream& os, const std::vector<Trace>& traces, double scale) {
  os << 't';
  if (traces.size() == 1) {
    os << ",x";
  } else {
    for (const auto& tr : traces) os << ",x_" << label(tr.method());
  }
  os << '\n';
  for (std::size_t i = 0; i < traces.front().size(); ++i) {
    os << format_number(traces.front().time(i));
    for (const auto& tr : traces) os << ',' << format_number(tr[i] * scale);
    os << '\n';
  }
}

inline std::vector<Trace> evaluate_all(const RunConfig& cfg, const ValidatedSetup& setup) {
  std::vector<Trace> traces;
  for (const auto& m : cfg.method_list()) {
    traces.push_back(evaluate_trace(cfg.grid(), setup.params, setup.drive, InitialConditions{},
                                    resolve_oracle_step(m, setup.params, setup.drive),
                                    EvaluateOptions{cfg.workers}));
  }
  return traces;
}

inline void report_diagnostics(const std::vector<Trace>& traces, std::ostream& err) {
  for (const auto& tr : traces) {
    for (const auto& d : tr.diagnostics()) err << d << '\n';
  }
}

/// x m / I_p when --normalized is set.
inline double output_scale(const RunConfig& cfg, const ValidatedSetup& setup) {
  if (!cfg.normalized) return 1.0;
  if (setup.drive.impulse == 0.0) throw Error(ErrorCode::InvalidInput, "--normalized needs a nonzero --impulse");
  return setup.params.mass / setup.drive.impulse;
}

inline int cmd_trace(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  const auto setup = checked_setup(cfg);
  const auto traces = evaluate_all(cfg, setup);
  report_diagnostics(traces, err);
  const double scale = output_scale(cfg, setup);
  Sink sink(cfg.out, out);
  write_traces(*sink, traces, scale);
  return kExitOk;
}

inline int cmd_compare(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.methods.size() < 2) throw Error(ErrorCode::InvalidInput, "compare needs at least two --method values");
  const auto setup = checked_setup(cfg);
  const auto traces = evaluate_all(cfg, setup);
  report_diagnostics(traces, err);
  for (std::size_t j = 1; j < traces.size(); ++j) {
    const auto c = compare(traces.front(), traces[j]);
    const std::string prefix =
        traces.size() == 2 ? "" : label(traces[j].method()) + "_vs_" + label(traces.front().method()) + ".";
    out << prefix << "max_abs=" << format_number(c.max_abs_diff) << '\n';
    out << prefix << "max_rel_to_peak=" << format_number(c.max_rel_to_peak) << '\n';
    out << prefix << "rms=" << format_number(c.rms_diff) << '\n';
    out << prefix << "argmax_t=" << format_number(c.argmax_time) << '\n';
    if (c.rel_is_absolute) out << prefix << "rel_is_absolute=true\n";
  }
  if (!cfg.out.empty()) {
    const double scale = output_scale(cfg, setup);
    Sink sink(cfg.out, out);
    write_traces(*sink, traces, scale);
  }
  return kExitOk;
}

inline int cmd_limit_study(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.pulse_kind() == PulseKind::DiracComb) {
    throw Error(ErrorCode::InvalidInput, "limit-study needs --kind sp or gp");
  }
  if (cfg.taus.empty()) throw Error(ErrorCode::InvalidInput, "limit-study needs --taus");
  const auto methods = cfg.method_list();
  if (methods.size() != 1) throw Error(ErrorCode::InvalidInput, "limit-study takes a single --method");

  RunConfig dc_cfg = cfg;
  dc_cfg.kind = "dc";
  dc_cfg.tau = 0.0;
  const auto dc_setup = checked_setup(dc_cfg);
  // Validate every tau before evaluating anything.
  std::vector<ValidatedSetup> setups;
  for (double tau : cfg.taus) {
    RunConfig c = cfg;
    c.tau = tau;
    setups.push_back(checked_setup(c));
  }
  const MethodSelector m = resolve_oracle_step(methods.front(), dc_setup.params, dc_setup.drive);
  const auto reference =
      evaluate_trace(cfg.grid(), dc_setup.params, dc_setup.drive, {}, m, EvaluateOptions{cfg.workers});
  report_diagnostics({reference}, err);

  Sink sink(cfg.out, out);
  *sink << "tau,max_abs_diff_vs_dc\n";
  for (const auto& s : setups) {
    const auto tr = evaluate_trace(cfg.grid(), s.params, s.drive, {},
                                   resolve_oracle_step(methods.front(), s.params, s.drive),
                                   EvaluateOptions{cfg.workers});
    *sink << format_number(s.drive.tau) << ',' << format_number(compare(reference, tr).max_abs_diff) << '\n';
  }
  return kExitOk;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  return cells;
}

inline double parse_cell(std::string cell, std::size_t line_no) {
  cell.erase(0, cell.find_first_not_of(" \t\r"));
  cell.erase(cell.find_last_not_of(" \t\r") + 1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::InvalidInput, "line " + std::to_string(line_no) + ": not a number: '" + cell + "'");
  }
  return v;
}

/// Reads `t,x` observations. Times must be strictly increasing and uniformly
/// spaced (relative deviation <= 1e-6 of the step).
inline Trace read_observations(const std::string& path, const SystemParams& params, const DriveSpec& drive) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::InvalidInput, "cannot read data file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::InvalidInput, "data file is empty");
  std::vector<double> t, x;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    if (cells.size() < 2) throw Error(ErrorCode::InvalidInput, "line " + std::to_string(line_no) + ": expected t,x");
    t.push_back(parse_cell(cells[0], line_no));
    x.push_back(parse_cell(cells[1], line_no));
    if (t.size() > 1 && !(t.back() > t[t.size() - 2])) {
      throw Error(ErrorCode::InvalidInput, "line " + std::to_string(line_no) + ": times must be strictly increasing");
    }
  }
  if (t.size() < 2) throw Error(ErrorCode::InvalidInput, "data file needs at least two rows");
  const TimeGrid grid{t.front(), t.back(), t.size()};
  const double h = grid.step();
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (std::abs(t[i] - grid.at(i)) > 1e-6 * h) {
      throw Error(ErrorCode::InvalidInput, "sample times must be uniformly spaced");
    }
  }
  return Trace(grid, std::move(x), method::TimePeriodic{}, params, drive);
}

inline int cmd_fit(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  if (cfg.synthetic == !cfg.data.empty()) {
    throw Error(ErrorCode::InvalidInput, "fit needs exactly one of --data or --synthetic");
  }
  const auto methods = cfg.method_list();
  if (methods.size() != 1) throw Error(ErrorCode::InvalidInput, "fit takes a single --method (tp or approx2)");
  const MethodSelector model = methods.front();
  if (!std::holds_alternative<method::TimePeriodic>(model) &&
      !std::holds_alternative<method::SecondHarmonic>(model)) {
    throw Error(ErrorCode::InvalidInput, "fit model must be tp or approx2");
  }
  if (!(cfg.noise >= 0.0)) throw Error(ErrorCode::InvalidInput, "--noise must be >= 0");

  DriveSpec drive = cfg.drive();
  if (auto v = validate_drive(drive); !v.empty()) {
    throw Error(ErrorCode::InvalidInput, std::string(to_string(v.front().kind)) + ": " + v.front().message);
  }

  std::optional<Trace> data;
  if (cfg.synthetic) {
    const auto setup = checked_setup(cfg);
    auto truth = evaluate_trace(cfg.grid(), setup.params, setup.drive, {}, model, EvaluateOptions{cfg.workers});
    std::vector<double> values = truth.values();
    if (cfg.noise > 0.0) {
      std::mt19937_64 rng(cfg.seed);
      std::normal_distribution<double> normal(0.0, cfg.noise * truth.peak());
      for (double& v : values) v += normal(rng);
    }
    data.emplace(truth.grid(), std::move(values), model, setup.params, setup.drive);
  } else {
    const SystemParams placeholder{cfg.mass, 0.0, 0.0};
    data.emplace(read_observations(cfg.data, placeholder, drive));
  }

  FitProblem problem{*data, drive, cfg.mass, model};
  if (cfg.gamma_init && cfg.omega_init) {
    problem.gamma_init = *cfg.gamma_init;
    problem.omega_init = *cfg.omega_init;
  } else {
    const auto guess = initial_guess(*data, drive);
    problem.gamma_init = cfg.gamma_init.value_or(guess.gamma);
    problem.omega_init = cfg.omega_init.value_or(guess.omega);
  }

  FitResult r;
  try {
    r = fit(problem);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SingularJacobian) throw;
    err << e.what() << '\n';
    return kExitNotConverged;
  }
  out << "gamma_hat=" << format_number(r.gamma_hat) << '\n';
  out << "omega_hat=" << format_number(r.omega_hat) << '\n';
  out << "omega0_hat=" << format_number(r.omega0_hat) << '\n';
  out << "residual_rms=" << format_number(r.residual_rms) << '\n';
  out << "converged=" << (r.converged ? "true" : "false") << '\n';
  out << "iterations=" << r.n_iterations << '\n';
  out << "jacobian_condition=" << format_number(r.jacobian_condition) << '\n';

  if (!cfg.residuals.empty()) {
    Sink sink(cfg.residuals, out);
    *sink << "t,residual\n";
    for (std::size_t i = 0; i < data->size(); ++i) {
      *sink << format_number(data->time(i)) << ',' << format_number(r.residuals[i]) << '\n';
    }
  }
  if (!r.converged) {
    err << "NotConverged: iteration cap reached\n";
    return kExitNotConverged;
  }
  return kExitOk;
}

inline int cmd_force(const RunConfig& cfg, std::ostream& out, std::ostream&) {
  const DriveSpec drive = cfg.drive();
  if (auto v = validate_drive(drive); !v.empty()) {
    std::string msg;
    for (const auto& x : v) msg += (msg.empty() ? "" : "; ") + std::string(to_string(x.kind)) + ": " + x.message;
    throw Error(ErrorCode::InvalidInput, msg);
  }
  const TimeGrid grid = cfg.grid();
  if (auto v = validate_grid(grid); !v.empty()) throw Error(ErrorCode::InvalidInput, v.front().message);
  Sink sink(cfg.out, out);
  *sink << "t,f\n";
  for (std::size_t i = 0; i < grid.n_samples; ++i) {
    const double t = grid.at(i);
    *sink << format_number(t) << ',' << format_number(force_eval(t, drive)) << '\n';
  }
  return kExitOk;
}

inline void add_shared_options(CLI::App& sub, RunConfig& cfg, bool physics_required) {
  auto* kind = sub.add_option("--kind", cfg.kind, "pulse shape")->check(CLI::IsMember({"dc", "sp", "gp"}));
  sub.add_option("--gamma", cfg.gamma, "damping rate");
  sub.add_option("--omega", cfg.omega, "damped oscillation frequency");
  sub.add_option("--omega0", cfg.omega0, "natural frequency");
  sub.add_option("--mass", cfg.mass, "mass")->capture_default_str();
  sub.add_option("--impulse", cfg.impulse, "impulse per pulse")->capture_default_str();
  sub.add_option("--period", cfg.period, "pulse period T")->capture_default_str();
  sub.add_option("--tau", cfg.tau, "pulse half-width or standard deviation")->capture_default_str();
  auto* shift = sub.add_option("--shift", cfg.shift, "centre of the first pulse, Q");
  sub.add_option("--pulses", cfg.pulses, "number of pulses or inf")->capture_default_str();
  sub.add_option("--t-start", cfg.t_start, "first sample time")->capture_default_str();
  sub.add_option("--t-end", cfg.t_end, "last sample time (default 6T)");
  sub.add_option("--samples", cfg.samples, "number of samples")->capture_default_str()->check(CLI::PositiveNumber);
  sub.add_option("--method", cfg.methods, "tp | hs[:k] | approx2 | oracle[:dt] (repeatable)");
  sub.add_flag("--normalized", cfg.normalized, "write x m / I_p");
  sub.add_option("--seed", cfg.seed, "random seed")->capture_default_str();
  sub.add_option("--out", cfg.out, "output CSV path (default stdout)");
  sub.add_option("--workers", cfg.workers, "evaluation threads, 0 for all cores")->capture_default_str();
  if (physics_required) {
    kind->required();
    shift->required();
  }
}

}  // namespace detail

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Closed-form and numerical responses of a pulse-driven damped oscillator"};
  app.require_subcommand(1);
  RunConfig cfg;

  auto* trace = app.add_subcommand("trace", "sample one or more solution methods");
  auto* cmp = app.add_subcommand("compare", "compare two or more methods on one grid");
  auto* limit = app.add_subcommand("limit-study", "distance to the Dirac comb as tau shrinks");
  auto* fitc = app.add_subcommand("fit", "estimate gamma and omega from a trace");
  auto* force = app.add_subcommand("force", "sample the driving force");
  for (auto* sub : {trace, cmp, limit, fitc, force}) detail::add_shared_options(*sub, cfg, true);
  limit->add_option("--taus", cfg.taus, "pulse widths to evaluate")->delimiter(',');
  fitc->add_option("--data", cfg.data, "CSV with t,x observations");
  fitc->add_flag("--synthetic", cfg.synthetic, "fit data generated from --gamma/--omega");
  fitc->add_option("--noise", cfg.noise, "Gaussian noise, fraction of peak")->capture_default_str();
  fitc->add_option("--gamma-init", cfg.gamma_init, "starting gamma");
  fitc->add_option("--omega-init", cfg.omega_init, "starting omega");
  fitc->add_option("--residuals", cfg.residuals, "write residuals CSV");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (trace->parsed()) return detail::cmd_trace(cfg, out, err);
    if (cmp->parsed()) return detail::cmd_compare(cfg, out, err);
    if (limit->parsed()) return detail::cmd_limit_study(cfg, out, err);
    if (fitc->parsed()) return detail::cmd_fit(cfg, out, err);
    if (force->parsed()) return detail::cmd_force(cfg, out, err);
  } catch (const Error& e) {
    err << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace pulsedho::cli
