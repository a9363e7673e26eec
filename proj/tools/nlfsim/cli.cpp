#include "cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "nlf/adiabatic.hpp"
#include "nlf/config.hpp"
#include "nlf/csv.hpp"
#include "nlf/errors.hpp"
#include "nlf/fit.hpp"
#include "nlf/params.hpp"
#include "nlf/response.hpp"
#include "nlf/selfsustained.hpp"
#include "nlf/timedomain.hpp"

namespace nlfsim {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using ojson = nlohmann::ordered_json;

constexpr double pn = 1e-12;
constexpr double nm = 1e-9;

enum class Kind { Number, Integer, Flag, Text };

struct OptSpec {
  std::string key;  // snake_case in the config file, --kebab-case on the command line
  Kind kind;
  json def;
  std::string help;
};

struct Output {
  std::string file;
  std::string content;
};

struct Context {
  nlf::SystemParams sys;
  ojson opts;
  unsigned threads = 1;
  ojson derived_extra = ojson::object();
  ojson results = ojson::object();
  std::vector<Output> files;

  double num(const std::string& k) const { return opts.at(k).get<double>(); }
  long integer(const std::string& k) const { return opts.at(k).get<long>(); }
  bool flag(const std::string& k) const { return opts.at(k).get<bool>(); }
  std::string text(const std::string& k) const { return opts.at(k).get<std::string>(); }
  nlf::Damping g() const { return sys.damping(); }
  double a1(double v) const { return nlf::amplitude_from_scaled(v, sys.modes.mode1, sys.scaling); }
  double a2(double v) const { return nlf::amplitude_from_scaled(v, sys.modes.mode2, sys.scaling); }
  double f_from_pn(double f) const { return nlf::scaled_drive(f * pn, sys.modes.mode1, sys.scaling); }
  double pn_from_f(double f) const {
    return nlf::force_from_scaled_drive(f, sys.modes.mode1, sys.scaling) / pn;
  }
};

struct Experiment {
  std::string name;
  std::string help;
  std::vector<OptSpec> options;
  std::function<void(const Context&)> check;
  std::function<void(Context&)> compute;
};

std::string kebab(std::string s) {
  for (auto& c : s)
    if (c == '_') c = '-';
  return s;
}

[[noreturn]] void bad(const std::string& key, const std::string& what) {
  throw nlf::ConfigError("experiment." + key, what);
}

void positive(const Context& c, const std::string& k) {
  if (!(c.num(k) > 0.0)) bad(k, "must be positive");
}

void ordered(const Context& c, const std::string& lo, const std::string& hi) {
  if (!(c.num(lo) < c.num(hi))) bad(hi, "must exceed " + lo);
}

void at_least(const Context& c, const std::string& k, long n) {
  if (c.integer(k) < n) bad(k, "must be at least " + std::to_string(n));
}

void upper_only(const Context& c) {
  if (c.sys.rwa.sideband != nlf::Sideband::Upper)
    throw nlf::ConfigError("rwa.sideband", "this experiment needs the upper sideband");
}

ojson constant(double v, const std::string& unit, const std::string& formula) {
  ojson e;
  e["value"] = v;
  e["unit"] = unit;
  e["formula"] = formula;
  return e;
}

ojson derived_constants(const nlf::SystemParams& sys) {
  const auto g = sys.damping();
  const auto nf = nlf::alpha_beta(sys.rwa, g.gamma2);
  ojson d;
  d["alpha_per_s"] = constant(nf.alpha, "1/s",
                              "alpha_beta: -2 sigma f_p^2 Gamma2 / (Gamma2^2 + Delta^2)");
  d["beta_per_s"] = constant(nf.beta, "1/s",
                             "alpha_beta: Lambda11 + 2 f_p^2 Delta / (Gamma2^2 + Delta^2)");
  d["alpha_per_s_m2"] = constant(nlf::alpha_per_m2(nf, sys.modes.mode1, sys.scaling), "1/(s m^2)",
                                 "alpha_per_m2: alpha m1 omega1 / (2 C_sc)");
  const double big_g = nlf::bifurcation_gain(sys.rwa, g);
  d["G_per_s2"] = constant(big_g, "1/s^2",
                           "bifurcation_gain: (Gamma1+Gamma2) Lambda12 + 2 Gamma2 Lambda11 + "
                           "Gamma1 Lambda22 / 2");
  if (sys.rwa.f_p > 0.0 && big_g > 0.0) {
    const double db = nlf::delta_b(sys.rwa, g).delta_b;
    const std::string f =
        "delta_b: (Gamma1^2 G^2 - (2 Gamma1 + Gamma2)^2 f_p^4) / (2 Gamma1 f_p^2 G)";
    d["delta_b_rad_s"] = constant(db, "rad/s", f);
    d["delta_b_hz"] = constant(nlf::rad_to_hz(db), "Hz", f);
  } else {
    d["delta_b_rad_s"] = nullptr;
    d["delta_b_hz"] = nullptr;
  }
  d["omega1_over_gamma2"] = constant(sys.modes.mode1.omega / g.gamma2, "1", "omega1 / Gamma2");
  d["drive_scale_per_s_per_pn"] =
      constant(nlf::scaled_drive(pn, sys.modes.mode1, sys.scaling), "1/(s pN)",
               "drive_scale: (8 m1 omega1 C_sc)^(-1/2)");
  d["amplitude_scale_mode1_m"] =
      constant(nlf::amplitude_from_scaled(1.0, sys.modes.mode1, sys.scaling), "m",
               "amplitude_from_scaled: (2 C_sc / (m1 omega1))^(1/2)");
  d["amplitude_scale_mode2_m"] =
      constant(nlf::amplitude_from_scaled(1.0, sys.modes.mode2, sys.scaling), "m",
               "amplitude_from_scaled: (2 C_sc / (m2 omega2))^(1/2)");
  d["pump_frequency_rad_s"] =
      constant(nlf::pump_frequency(sys), "rad/s", "pump_frequency: omega2 + 2 sigma omega1 + Delta");
  return d;
}

ojson state_count_summary(const nlf::SweepResult& r, const Context& c, bool frequency) {
  ojson s;
  s["has_isolated"] = r.has_isolated;
  if (r.has_isolated) {
    s["omega_L_rad_s"] = r.omega_l;
    s["omega_H_rad_s"] = r.omega_h;
    s["omega_L_hz"] = nlf::rad_to_hz(r.omega_l);
    s["omega_H_hz"] = nlf::rad_to_hz(r.omega_h);
  }
  s["hysteretic"] = r.hysteretic;
  s["window_ok"] = r.window_ok;
  s["ambiguous_links"] = r.ambiguous_links;
  ojson branches = ojson::array();
  for (const auto& b : r.branches) {
    ojson e;
    e["branch_id"] = b.branch_id;
    e["isolated"] = b.isolated;
    e["u1_sq_max"] = b.x_max;
    e["a1_max_m"] = c.a1(std::sqrt(b.x_max));
    if (frequency) {
      e["detune_at_max_rad_s"] = b.detune_at_max;
      e["gamma_peak_per_s"] = b.gamma_peak;
    }
    e[frequency ? "detune_lo_rad_s" : "f_d1_lo_per_s"] = b.param_lo;
    e[frequency ? "detune_hi_rad_s" : "f_d1_hi_per_s"] = b.param_hi;
    branches.push_back(e);
  }
  s["branches"] = branches;
  ojson folds = ojson::array();
  for (const auto& f : r.folds) {
    ojson e;
    e[frequency ? "detune_rad_s" : "f_d1_per_s"] = f.at;
    if (!frequency) e["f_d1_pn"] = c.pn_from_f(f.at);
    e["branch_id"] = f.branch_id;
    e["count_below"] = f.count_below;
    e["count_above"] = f.count_above;
    folds.push_back(e);
  }
  s["folds"] = folds;
  return s;
}

nlf::CsvTable sweep_table(const nlf::SweepResult& r, const Context& c, bool frequency) {
  nlf::CsvTable t({frequency ? "detune_rad_s" : "f_d1_per_s", "branch_id", "a1_m", "a2_m",
                   "u1_sq", "u2_sq", "stable", "residual"});
  for (const auto& pt : r.points) {
    const auto& st = pt.state;
    t.cell(pt.param)
        .cell(st.branch_id)
        .cell(c.a1(std::sqrt(st.u1_sq)))
        .cell(c.a2(std::sqrt(st.u2_sq)))
        .cell(st.u1_sq)
        .cell(st.u2_sq)
        .cell(st.stable)
        .cell(st.residual);
    t.end_row();
  }
  return t;
}

std::vector<double> linspace(double lo, double hi, long n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) v[i] = n == 1 ? lo : lo + (hi - lo) * i / static_cast<double>(n - 1);
  return v;
}

// ---------------------------------------------------------------------------

void ringdown_run(Context& c) {
  nlf::RingdownOptions ro;
  ro.integrate.sample_dt = c.num("sample_dt_s");
  ro.window = static_cast<int>(c.integer("window"));
  ro.zero_v2 = c.flag("zero_v2");
  const auto tr = nlf::ringdown(c.sys, c.num("a1_nm") * nm, c.num("horizon_s"), ro);
  nlf::CsvTable t({"t_s", "a1_m", "a2_m", "re_v1", "im_v1", "re_v2", "im_v2", "gamma_inst_per_s"});
  std::vector<double> ts, mlog;
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    t.cell(tr.times[i]).cell(tr.a1[i]).cell(tr.a2[i]);
    t.cell(tr.v1[i].real()).cell(tr.v1[i].imag()).cell(tr.v2[i].real()).cell(tr.v2[i].imag());
    t.cell(tr.gamma_inst[i]);
    t.end_row();
    if (tr.a1[i] > 0.0) {
      ts.push_back(tr.times[i]);
      mlog.push_back(-std::log(tr.a1[i]));
    }
  }
  c.files.push_back({"ringdown.csv", t.str()});
  c.results["samples"] = tr.times.size();
  c.results["a1_final_m"] = tr.a1.back();
  if (ts.size() >= 2) c.results["mean_decay_rate_per_s"] = nlf::fit_line(ts, mlog).slope;
}

void adiabatic_curve_run(Context& c) {
  const auto grid = nlf::log_grid(c.num("x_min"), c.num("x_max"), c.integer("points"));
  const auto cv = nlf::adiabatic_curve(grid, c.sys.rwa, c.g());
  nlf::CsvTable t({"x", "gamma_ad_per_s", "phi_dot_rad_s", "y", "valid"});
  for (std::size_t i = 0; i < cv.grid.size(); ++i) {
    t.cell(cv.grid[i]).cell(cv.gamma_ad[i]).cell(cv.phi_dot[i]).cell(cv.y[i]);
    t.cell(static_cast<bool>(cv.validity[i]));
    t.end_row();
  }
  c.files.push_back({"adiabatic_curve.csv", t.str()});
  if (c.sys.rwa.sideband == nlf::Sideband::Upper) {
    try {
      const auto th = nlf::thresholds(c.sys);
      c.results["cycle_exists"] = th.exists;
      if (th.exists) {
        c.results["x_th"] = th.x_th;
        c.results["x_st"] = th.x_st;
        c.results["a_th_m"] = th.a_th;
        c.results["a_st_m"] = th.a_st;
      }
    } catch (const nlf::AmbiguityError& e) {
      c.results["thresholds"] = std::string("ambiguous: ") + e.what();
    }
  }
}

void self_sustained_run(Context& c) {
  nlf::CsvTable t({"delta_rad_s", "branch", "c1_sq", "c2_sq", "a1_m", "a2_m",
                   "delta_omega_rad_s", "stable"});
  auto p = c.sys.rwa;
  long with_cycles = 0;
  for (double hz : linspace(c.num("sweep_start_hz"), c.num("sweep_stop_hz"), c.integer("points"))) {
    p.delta = nlf::hz_to_rad(hz);
    const auto sols = nlf::solve_limit_cycles(p, c.g());
    if (!sols.empty()) ++with_cycles;
    for (const auto& s : sols) {
      t.cell(p.delta).cell(nlf::to_string(s.branch)).cell(s.c1_sq).cell(s.c2_sq);
      t.cell(c.a1(std::sqrt(s.c1_sq))).cell(c.a2(std::sqrt(s.c2_sq)));
      t.cell(s.delta_omega).cell(s.stable);
      t.end_row();
    }
  }
  c.files.push_back({"self_sustained.csv", t.str()});
  c.results["detunings_with_cycles"] = with_cycles;
}

void basin_run(Context& c) {
  nlf::CsvTable t({"a1_initial_m", "outcome", "final_a1_m", "a_st_m"});
  long settled = 0;
  for (double a : linspace(c.num("a1_start_nm"), c.num("a1_stop_nm"), c.integer("points"))) {
    const auto r = nlf::classify_basin(a * nm, c.sys, c.num("horizon_s"));
    t.cell(a * nm).cell(nlf::to_string(r.outcome)).cell(r.final_amplitude).cell(r.a_st);
    t.end_row();
    if (r.outcome == nlf::BasinOutcome::SettlesToLimitCycle) ++settled;
  }
  c.files.push_back({"basin.csv", t.str()});
  const auto th = nlf::thresholds(c.sys);
  c.results["cycle_exists"] = th.exists;
  if (th.exists) {
    c.results["a_th_m"] = th.a_th;
    c.results["a_st_m"] = th.a_st;
  }
  c.results["settled"] = settled;
}

nlf::SweepOptions sweep_options(const Context& c) {
  nlf::SweepOptions so;
  so.threads = c.threads;
  return so;
}

void forced_response_run(Context& c) {
  const double f = c.f_from_pn(c.num("fd1_pn"));
  c.derived_extra["f_d1_per_s"] = constant(f, "1/s", "scaled_drive: F_d1 (8 m1 omega1 C_sc)^(-1/2)");
  const auto r = nlf::frequency_sweep(c.sys.rwa, c.g(), f, nlf::hz_to_rad(c.num("sweep_start_hz")),
                                      nlf::hz_to_rad(c.num("sweep_stop_hz")), c.integer("points"),
                                      sweep_options(c));
  c.files.push_back({"forced_response.csv", sweep_table(r, c, true).str()});
  c.results = state_count_summary(r, c, true);
  c.files.push_back({"summary.json", c.results.dump(2) + "\n"});
}

void force_sweep_run(Context& c) {
  const double lo = c.f_from_pn(c.num("fd1_start_pn"));
  const double hi = c.f_from_pn(c.num("fd1_stop_pn"));
  const auto r = nlf::force_sweep(c.sys.rwa, c.g(), nlf::hz_to_rad(c.num("detune_hz")), lo, hi,
                                  c.integer("points"), sweep_options(c));
  c.files.push_back({"force_sweep.csv", sweep_table(r, c, false).str()});
  c.results = state_count_summary(r, c, false);
  c.files.push_back({"summary.json", c.results.dump(2) + "\n"});
}

void gamma_peak_run(Context& c) {
  std::vector<double> fs;
  for (double f : linspace(c.num("fd1_start_pn"), c.num("fd1_stop_pn"), c.integer("drives")))
    fs.push_back(c.f_from_pn(f));
  auto so = sweep_options(c);
  const auto cv = nlf::gamma_peak_curve(c.sys.rwa, c.g(), fs, nlf::hz_to_rad(c.num("sweep_start_hz")),
                                        nlf::hz_to_rad(c.num("sweep_stop_hz")), c.integer("points"),
                                        so);
  nlf::CsvTable t({"f_d1_per_s", "f_d1_pn", "branch_id", "isolated", "gamma_peak_per_s"});
  for (const auto& s : cv.samples) {
    t.cell(s.f_d1).cell(c.pn_from_f(s.f_d1)).cell(s.branch_id).cell(s.isolated).cell(s.gamma_peak);
    t.end_row();
  }
  c.files.push_back({"gamma_peak.csv", t.str()});
  c.results["multivalued"] = cv.multivalued;
  if (cv.multivalued) {
    c.results["multivalued_lo_pn"] = c.pn_from_f(cv.multi_lo);
    c.results["multivalued_hi_pn"] = c.pn_from_f(cv.multi_hi);
  }
}

void branch_merge_run(Context& c) {
  const auto m = nlf::locate_branch_merge(
      c.sys.rwa, c.g(), nlf::hz_to_rad(c.num("sweep_start_hz")), nlf::hz_to_rad(c.num("sweep_stop_hz")),
      c.f_from_pn(c.num("fd1_start_pn")), c.f_from_pn(c.num("fd1_stop_pn")), 1e-6,
      c.integer("points"), c.threads);
  if (!m.found) throw nlf::SolverError("branch-merge: no isolated branch merges inside the drive range");
  nlf::CsvTable t({"f_d1_critical_per_s", "f_d1_critical_pn", "f_d1_saddle_per_s", "omega_c_rad_s",
                   "omega_c_hz", "u1_sq_c", "isolated_below", "isolated_above"});
  t.cell(m.f_d1_critical).cell(c.pn_from_f(m.f_d1_critical)).cell(m.f_d1_saddle);
  t.cell(m.omega_c).cell(nlf::rad_to_hz(m.omega_c)).cell(m.x_c);
  t.cell(m.isolated_below).cell(m.isolated_above);
  t.end_row();
  c.files.push_back({"merge.csv", t.str()});
  ojson s;
  s["f_d1_critical_per_s"] = m.f_d1_critical;
  s["f_d1_critical_pn"] = c.pn_from_f(m.f_d1_critical);
  s["f_d1_saddle_per_s"] = m.f_d1_saddle;
  s["omega_c_rad_s"] = m.omega_c;
  s["omega_c_hz"] = nlf::rad_to_hz(m.omega_c);
  s["bisection_steps"] = m.bisection_steps;
  s["straddle_ok"] = m.normal_form_ok;
  c.results["merge"] = s;
  c.files.push_back({"summary.json", c.results.dump(2) + "\n"});
}

std::vector<std::pair<double, double>> read_two_columns(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw nlf::IoError("cannot read " + path);
  std::vector<std::pair<double, double>> pts;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double a, b;
    if (!(ls >> a >> b)) {
      if (lineno == 1) continue;  // header
      throw nlf::ConfigError(path + ":" + std::to_string(lineno), "expected two numbers");
    }
    pts.emplace_back(a, b);
  }
  return pts;
}

void calibrate_run(Context& c) {
  const auto& m1 = c.sys.modes.mode1;
  nlf::CsvTable t({"quantity", "value", "unit"});
  const double mass =
      nlf::calibrate_mass_from_drive(c.num("fd1_pn") * pn, c.num("fd1_per_s"), m1.omega, c.sys.scaling);
  auto mode = m1;
  mode.mass = mass;
  const double fp = nlf::calibrate_fp_from_bifurcation(nlf::hz_to_rad(c.num("delta_b_hz")), c.g(),
                                                       c.sys.rwa);
  t.cell("m1_kg").cell(mass).cell("kg").end_row();
  t.cell("characteristic_displacement_m")
      .cell(nlf::amplitude_from_scaled(1.0, mode, c.sys.scaling))
      .cell("m")
      .end_row();
  t.cell("fp_per_s").cell(fp).cell("1/s").end_row();
  c.results["m1_kg"] = mass;
  c.results["fp_per_s"] = fp;
  if (!c.text("shift_csv").empty()) {
    nlf::CalibrationData data;
    data.points = read_two_columns(c.text("shift_csv"));
    const auto fit = nlf::fit_dispersive_slope(data);
    t.cell("dispersive_slope").cell(fit.slope).cell("shift per m^2").end_row();
    t.cell("dispersive_intercept").cell(fit.intercept).cell("shift").end_row();
    c.results["dispersive_slope"] = fit.slope;
  }
  c.files.push_back({"calibration.csv", t.str()});
}

void full_eom_run(Context& c) {
  const auto& sys = c.sys;
  const double x0 = std::pow(
      nlf::scaled_from_amplitude(c.num("a1_nm") * nm, sys.modes.mode1, sys.scaling), 2);
  const auto s0 = nlf::ringdown_initial_state(x0, sys.rwa, c.g());
  nlf::FullOptions fo;
  fo.steps_per_period = c.num("steps_per_period");
  fo.sample_dt = c.num("sample_dt_s");
  const double horizon = c.num("horizon_s");
  const auto full = nlf::integrate_full_eom(nlf::full_state_from_rwa(s0, sys),
                                            nlf::raw_from_scaled(sys.rwa, sys.modes, sys.scaling),
                                            sys.modes, sys.scaling, nlf::pump_frequency(sys), horizon, fo);
  nlf::IntegrateOptions io;
  io.sample_dt = fo.sample_dt;
  const auto rwa = nlf::integrate_rwa(s0, sys.rwa, c.g(), {}, horizon, io);
  nlf::CsvTable t({"t_s", "abs_v1_full", "abs_v1_rwa", "rel_err"});
  double worst = 0.0;
  const std::size_t n = std::min(full.v1.size(), rwa.v1.size());
  for (std::size_t i = 0; i < n; ++i) {
    const double a = std::abs(full.v1[i]), b = std::abs(rwa.v1[i]);
    const double e = std::abs(a - b) / b;
    worst = std::max(worst, e);
    t.cell(full.states[i].t).cell(a).cell(b).cell(e).end_row();
  }
  c.files.push_back({"full_eom_check.csv", t.str()});
  c.results["max_rel_err"] = worst;
}

// ---------------------------------------------------------------------------

std::vector<Experiment> experiments() {
  const OptSpec start_hz{"sweep_start_hz", Kind::Number, -11.0, "Sweep start (drive detuning, Hz)"};
  const OptSpec stop_hz{"sweep_stop_hz", Kind::Number, 12.0, "Sweep stop (drive detuning, Hz)"};
  std::vector<Experiment> ex;
  ex.push_back({"ringdown",
                "Free decay from an initial mode-1 amplitude",
                {{"a1_nm", Kind::Number, 30.0, "Initial mode-1 amplitude (nm)"},
                 {"horizon_s", Kind::Number, 2.0, "Simulated time (s)"},
                 {"sample_dt_s", Kind::Number, 1e-3, "Output sampling interval (s)"},
                 {"window", Kind::Integer, 51, "Samples per decay-rate fit (odd)"},
                 {"zero_v2", Kind::Flag, false, "Start mode 2 at rest instead of slaved"}},
                [](const Context& c) {
                  positive(c, "a1_nm");
                  positive(c, "horizon_s");
                  positive(c, "sample_dt_s");
                  if (c.num("sample_dt_s") >= c.num("horizon_s")) bad("sample_dt_s", "must be below horizon_s");
                  if (c.integer("window") < 3 || c.integer("window") % 2 == 0) bad("window", "must be odd and >= 3");
                },
                ringdown_run});
  ex.push_back({"adiabatic-curve",
                "Extended adiabatic decay rate on a logarithmic amplitude grid",
                {{"x_min", Kind::Number, 1e-4, "Smallest squared scaled amplitude"},
                 {"x_max", Kind::Number, 1e3, "Largest squared scaled amplitude"},
                 {"points", Kind::Integer, 400, "Grid points"}},
                [](const Context& c) {
                  positive(c, "x_min");
                  ordered(c, "x_min", "x_max");
                  at_least(c, "points", 2);
                },
                adiabatic_curve_run});
  ex.push_back({"self-sustained-sweep",
                "Closed-form self-sustained cycles against pump detuning",
                {{"sweep_start_hz", Kind::Number, -100.0, "First pump detuning (Hz)"},
                 {"sweep_stop_hz", Kind::Number, 0.0, "Last pump detuning (Hz)"},
                 {"points", Kind::Integer, 201, "Detunings"}},
                [](const Context& c) {
                  upper_only(c);
                  ordered(c, "sweep_start_hz", "sweep_stop_hz");
                  at_least(c, "points", 2);
                },
                self_sustained_run});
  ex.push_back({"basin",
                "Fate of the free oscillation for a range of initial amplitudes",
                {{"a1_start_nm", Kind::Number, 1.0, "Smallest initial amplitude (nm)"},
                 {"a1_stop_nm", Kind::Number, 60.0, "Largest initial amplitude (nm)"},
                 {"points", Kind::Integer, 24, "Initial amplitudes"},
                 {"horizon_s", Kind::Number, 0.0, "Simulated time per run (s); 0 picks 20/Gamma1"}},
                [](const Context& c) {
                  upper_only(c);
                  positive(c, "a1_start_nm");
                  ordered(c, "a1_start_nm", "a1_stop_nm");
                  at_least(c, "points", 2);
                  if (c.num("horizon_s") < 0.0) bad("horizon_s", "must not be negative");
                },
                basin_run});
  ex.push_back({"forced-response",
                "Stationary forced states against drive frequency",
                {{"fd1_pn", Kind::Number, 0.7, "Drive amplitude (pN)"}, start_hz, stop_hz,
                 {"points", Kind::Integer, 1001, "Grid detunings"}},
                [](const Context& c) {
                  positive(c, "fd1_pn");
                  ordered(c, "sweep_start_hz", "sweep_stop_hz");
                  at_least(c, "points", 3);
                },
                forced_response_run});
  ex.push_back({"force-sweep",
                "Stationary forced states against drive amplitude",
                {{"detune_hz", Kind::Number, 0.4, "Drive detuning from omega1 (Hz)"},
                 {"fd1_start_pn", Kind::Number, 0.01, "Smallest drive (pN)"},
                 {"fd1_stop_pn", Kind::Number, 1.5, "Largest drive (pN)"},
                 {"points", Kind::Integer, 401, "Grid drives"}},
                [](const Context& c) {
                  positive(c, "fd1_start_pn");
                  ordered(c, "fd1_start_pn", "fd1_stop_pn");
                  at_least(c, "points", 3);
                },
                force_sweep_run});
  ex.push_back({"gamma-peak",
                "Gamma_peak of every branch against drive amplitude",
                {{"fd1_start_pn", Kind::Number, 0.1, "Smallest drive (pN)"},
                 {"fd1_stop_pn", Kind::Number, 1.0, "Largest drive (pN)"},
                 {"drives", Kind::Integer, 19, "Drive amplitudes"}, start_hz, stop_hz,
                 {"points", Kind::Integer, 801, "Grid detunings per sweep"}},
                [](const Context& c) {
                  positive(c, "fd1_start_pn");
                  ordered(c, "fd1_start_pn", "fd1_stop_pn");
                  ordered(c, "sweep_start_hz", "sweep_stop_hz");
                  at_least(c, "drives", 1);
                  at_least(c, "points", 3);
                },
                gamma_peak_run});
  ex.push_back({"branch-merge",
                "Drive at which the isolated branch joins the main branch",
                {{"fd1_start_pn", Kind::Number, 0.7, "Drive with an isolated branch (pN)"},
                 {"fd1_stop_pn", Kind::Number, 1.4, "Upper end of the drive search (pN)"}, start_hz,
                 stop_hz, {"points", Kind::Integer, 2001, "Grid detunings of the checking sweeps"}},
                [](const Context& c) {
                  positive(c, "fd1_start_pn");
                  ordered(c, "fd1_start_pn", "fd1_stop_pn");
                  ordered(c, "sweep_start_hz", "sweep_stop_hz");
                  at_least(c, "points", 3);
                },
                branch_merge_run});
  ex.push_back({"calibrate",
                "Effective mass from the drive scaling and f_p from the bifurcation detuning",
                {{"fd1_pn", Kind::Number, 0.7, "Drive force (pN)"},
                 {"fd1_per_s", Kind::Number, 1.717, "Scaled drive for that force (1/s)"},
                 {"delta_b_hz", Kind::Number, -24.1, "Detuning where cycles appear (Hz)"},
                 {"shift_csv", Kind::Text, "", "Optional two-column file: squared amplitude (m^2), frequency shift"}},
                [](const Context& c) {
                  positive(c, "fd1_pn");
                  positive(c, "fd1_per_s");
                },
                calibrate_run});
  ex.push_back({"full-eom-check",
                "Full equations of motion against the slow-amplitude equations",
                {{"a1_nm", Kind::Number, 10.0, "Initial mode-1 amplitude (nm)"},
                 {"horizon_s", Kind::Number, 0.01, "Simulated time, at most 0.05 s"},
                 {"steps_per_period", Kind::Number, 200.0, "RK4 steps per mode-2 period (>= 50)"},
                 {"sample_dt_s", Kind::Number, 1e-4, "Output sampling interval (s)"}},
                [](const Context& c) {
                  positive(c, "a1_nm");
                  positive(c, "horizon_s");
                  if (c.num("horizon_s") > 0.05) bad("horizon_s", "must not exceed 0.05 s");
                  if (c.num("steps_per_period") < 50.0) bad("steps_per_period", "must be at least 50");
                  positive(c, "sample_dt_s");
                  if (c.num("sample_dt_s") > c.num("horizon_s")) bad("sample_dt_s", "must not exceed horizon_s");
                },
                full_eom_run});
  return ex;
}

ojson resolve_options(const Experiment& ex, const json& section,
                      const std::map<std::string, std::optional<std::string>>& flags) {
  ojson opts;
  for (const auto& o : ex.options) opts[o.key] = o.def;
  auto assign = [&](const OptSpec& o, const json& v, const std::string& where) {
    switch (o.kind) {
      case Kind::Number:
        if (!v.is_number()) throw nlf::ConfigError(where, "expected a number");
        opts[o.key] = v.get<double>();
        break;
      case Kind::Integer:
        if (!v.is_number_integer()) throw nlf::ConfigError(where, "expected an integer");
        opts[o.key] = v.get<long>();
        break;
      case Kind::Flag:
        if (!v.is_boolean()) throw nlf::ConfigError(where, "expected true or false");
        opts[o.key] = v.get<bool>();
        break;
      case Kind::Text:
        if (!v.is_string()) throw nlf::ConfigError(where, "expected a string");
        opts[o.key] = v.get<std::string>();
        break;
    }
  };
  if (!section.is_null()) {
    if (!section.is_object()) throw nlf::ConfigError("experiment", "expected an object");
    for (const auto& [k, v] : section.items()) {
      if (k == "name") {
        if (!v.is_string() || v.get<std::string>() != ex.name)
          throw nlf::ConfigError("experiment.name", "does not match the subcommand '" + ex.name + "'");
        continue;
      }
      auto it = std::find_if(ex.options.begin(), ex.options.end(),
                             [&](const OptSpec& o) { return o.key == k; });
      if (it == ex.options.end()) throw nlf::ConfigError("experiment." + k, "unknown key");
      assign(*it, v, "experiment." + k);
    }
  }
  for (const auto& o : ex.options) {
    const auto& f = flags.at(o.key);
    if (!f) continue;
    const std::string where = "--" + kebab(o.key);
    switch (o.kind) {
      case Kind::Number:
        try {
          std::size_t used = 0;
          const double v = std::stod(*f, &used);
          if (used != f->size()) throw std::invalid_argument(*f);
          opts[o.key] = v;
        } catch (const std::exception&) {
          throw nlf::ConfigError(where, "expected a number, got '" + *f + "'");
        }
        break;
      case Kind::Integer:
        try {
          std::size_t used = 0;
          const long v = std::stol(*f, &used);
          if (used != f->size()) throw std::invalid_argument(*f);
          opts[o.key] = v;
        } catch (const std::exception&) {
          throw nlf::ConfigError(where, "expected an integer, got '" + *f + "'");
        }
        break;
      case Kind::Flag:
        opts[o.key] = true;
        break;
      case Kind::Text:
        opts[o.key] = *f;
        break;
    }
  }
  return opts;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_outputs(const fs::path& dir, const std::vector<Output>& files) {
  std::vector<fs::path> written;
  try {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw nlf::IoError("cannot create output directory " + dir.string() + ": " + ec.message());
    for (const auto& f : files) {
      const auto path = dir / f.file;
      std::ofstream os(path, std::ios::binary | std::ios::trunc);
      if (!os) throw nlf::IoError("cannot write " + path.string());
      written.push_back(path);
      os << f.content;
      os.close();
      if (!os) throw nlf::IoError("write failed for " + path.string());
    }
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    throw;
  }
}

}  // namespace

std::vector<std::string> experiment_names() {
  std::vector<std::string> n;
  for (const auto& e : experiments()) n.push_back(e.name);
  return n;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const auto exps = experiments();

  CLI::App app{"Two-mode nonlinear-friction simulator", "nlfsim"};
  app.fallthrough();
  app.require_subcommand(1);
  std::string config_path, out_dir, preset_name, sideband;
  bool no_timestamp = false;
  int threads = 1;
  std::optional<double> delta_hz, fp_per_s;
  app.add_option("--config", config_path, "JSON parameter and experiment file");
  app.add_option("--out", out_dir, "Output directory (default: $NLF_OUT_DIR, else ./nlf_out)");
  app.add_option("--preset", preset_name, "Parameter preset");
  app.add_flag("--no-timestamp", no_timestamp, "Omit the creation time from the manifest");
  app.add_option("--threads", threads, "Worker threads for sweeps (0: all cores)");
  app.add_option("--delta-hz", delta_hz, "Pump detuning Delta (Hz), overrides the configuration");
  app.add_option("--fp-per-s", fp_per_s, "Pump strength f_p (1/s), overrides the configuration");
  app.add_option("--sideband", sideband, "Pumped sideband: upper or lower");

  std::map<std::string, std::map<std::string, std::optional<std::string>>> flag_values;
  std::map<std::string, CLI::App*> subs;
  for (const auto& e : exps) {
    auto* sub = app.add_subcommand(e.name, e.help);
    subs[e.name] = sub;
    auto& store = flag_values[e.name];
    for (const auto& o : e.options) {
      auto& slot = store[o.key];
      const std::string help = o.help + (o.kind == Kind::Flag ? "" : " [default " + o.def.dump() + "]");
      if (o.kind == Kind::Flag)
        sub->add_flag_callback("--" + kebab(o.key), [&slot] { slot = "true"; }, help);
      else
        sub->add_option("--" + kebab(o.key), slot, help);
    }
  }

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return Ok;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return Ok;
  } catch (const CLI::ParseError& e) {
    err << "nlfsim: " << e.what() << "\n";
    return ConfigFailure;
  }
  const Experiment* chosen = nullptr;
  for (const auto& e : exps)
    if (subs[e.name]->parsed()) chosen = &e;

  Context ctx;
  // Configuration and options.
  try {
    json cfg = json::object();
    if (!config_path.empty()) {
      try {
        cfg = nlf::load_json_file(config_path);
      } catch (const nlf::IoError& e) {
        throw nlf::ConfigError("--config", e.what());
      }
    }
    if (!preset_name.empty()) {
      if (!cfg.is_object()) throw nlf::ConfigError("<root>", "expected an object");
      cfg["preset"] = preset_name;
    }
    ctx.sys = nlf::system_params_from_json(cfg);
    if (delta_hz) ctx.sys.rwa.delta = nlf::hz_to_rad(*delta_hz);
    if (fp_per_s) ctx.sys.rwa.f_p = *fp_per_s;
    if (!sideband.empty()) ctx.sys.rwa.sideband = nlf::sideband_from_string(sideband);
    try {
      nlf::validate(ctx.sys);
    } catch (const nlf::DomainError& e) {
      throw nlf::ConfigError("parameters", e.what());
    }
    const json section = cfg.contains("experiment") ? cfg.at("experiment") : json();
    ctx.opts = resolve_options(*chosen, section, flag_values.at(chosen->name));
    if (threads < 0) throw nlf::ConfigError("--threads", "must not be negative");
    ctx.threads = threads == 0 ? std::max(1u, std::thread::hardware_concurrency())
                               : static_cast<unsigned>(threads);
    chosen->check(ctx);
  } catch (const nlf::ConfigError& e) {
    err << "nlfsim: configuration error in " << e.what() << "\n";
    return ConfigFailure;
  }

  if (out_dir.empty()) {
    const char* env = std::getenv("NLF_OUT_DIR");
    out_dir = env && *env ? env : "nlf_out";
  }

  try {
    chosen->compute(ctx);
  } catch (const nlf::ConfigError& e) {
    err << "nlfsim: configuration error in " << e.what() << "\n";
    return ConfigFailure;
  } catch (const nlf::IoError& e) {
    err << "nlfsim: I/O error: " << e.what() << "\n";
    return IoFailure;
  } catch (const std::exception& e) {
    err << "nlfsim: " << chosen->name << " failed: " << e.what() << "\n";
    return SolverFailure;
  }

  ojson manifest;
  manifest["generator"] = "nlfsim";
  if (!no_timestamp) manifest["created_utc"] = utc_now();
  manifest["experiment"] = chosen->name;
  manifest["parameters"] = ojson::parse(nlf::system_params_to_json(ctx.sys).dump());
  manifest["options"] = ctx.opts;
  auto derived = derived_constants(ctx.sys);
  for (const auto& [k, v] : ctx.derived_extra.items()) derived[k] = v;
  manifest["derived"] = derived;
  manifest["results"] = ctx.results;
  ojson outputs = ojson::array();
  for (const auto& f : ctx.files) outputs.push_back(f.file);
  outputs.push_back("manifest.json");
  manifest["outputs"] = outputs;
  ctx.files.push_back({"manifest.json", manifest.dump(2) + "\n"});

  try {
    write_outputs(out_dir, ctx.files);
  } catch (const nlf::IoError& e) {
    err << "nlfsim: I/O error: " << e.what() << "\n";
    return IoFailure;
  }
  out << chosen->name << ": wrote " << ctx.files.size() << " files to " << out_dir << "\n";
  return Ok;
}

}  // namespace nlfsim
