// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.  Tolerances are the ones the criteria state.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "nlf/adiabatic.hpp"
#include "nlf/params.hpp"
#include "nlf/response.hpp"
#include "nlf/rwa.hpp"
#include "nlf/selfsustained.hpp"
#include "nlf/timedomain.hpp"

using namespace nlf;

namespace {

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

double pn_to_f(double pn, const SystemParams& s) {
  return scaled_drive(pn * 1e-12, s.modes.mode1, s.scaling);
}
double f_to_pn(double f, const SystemParams& s) {
  return force_from_scaled_drive(f, s.modes.mode1, s.scaling) * 1e12;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

Outcome criterion1() {
  const auto s = paper_device();
  const auto nf = alpha_beta(s.rwa, s.damping().gamma2);
  const double ea = rel(nf.alpha, -1.509), eb = rel(nf.beta, 0.4326);
  char buf[200];
  std::snprintf(buf, sizeof buf, "alpha=%.5f (rel %.2e), beta=%.5f (rel %.2e), tol 1e-3", nf.alpha,
                ea, nf.beta, eb);
  return {ea <= 1e-3 && eb <= 1e-3, buf};
}

Outcome criterion2() {
  const auto s = paper_device();
  const double r = s.modes.mode1.omega / s.damping().gamma2;
  char buf[120];
  std::snprintf(buf, sizeof buf, "omega1/Gamma2=%.2f (rel %.2e), tol 1e-3", r, rel(r, 1453.0));
  return {rel(r, 1453.0) <= 1e-3, buf};
}

Outcome criterion3() {
  const auto s = paper_device();
  const double f = pn_to_f(0.70, s);
  const double m1 = calibrate_mass_from_drive(0.70e-12, 1.717, s.modes.mode1.omega, s.scaling);
  auto mode = s.modes.mode1;
  mode.mass = m1;
  const double scale = amplitude_from_scaled(1.0, mode, s.scaling);
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "f_d1(0.70 pN)=%.5f (rel %.2e); implied m1=%.4g kg, displacement scale %.3f nm",
                f, rel(f, 1.717), m1, scale * 1e9);
  return {rel(f, 1.717) <= 1e-3 && rel(scale, 10e-9) <= 0.1, buf};
}

Outcome criterion4() {
  const auto base = paper_device();
  const auto g = base.damping();
  int sets = 0, ok = 0;
  double worst = 0.0;
  for (double fp : {14.5, 18.332}) {
    auto p = base.rwa;
    p.f_p = fp;
    const double db = delta_b(p, g).delta_b;
    for (double k : {0.1, 0.3, 0.5, 1.0, 2.0}) {
      p.delta = db + k * std::abs(db);
      const auto sols = solve_limit_cycles(p, g);
      ++sets;
      if (sols.size() != 2) continue;
      const double plus = sols[0].c1_sq, minus = sols[1].c1_sq;
      IntegrateOptions io;
      io.sample_dt = 1.0;
      // Run until the amplitude stops moving, at most 400 s.
      auto settle = [&](double x0) {
        RwaState st = ringdown_initial_state(x0, p, g);
        double prev = x0;
        for (int chunk = 0; chunk < 20; ++chunk) {
          const auto tr = integrate_rwa(st, p, g, {}, 20.0, io);
          st = {tr.v1.back(), tr.v2.back(), 0.0};
          const double now = std::norm(st.v1);
          if (std::abs(now - prev) < 1e-9 * std::max(plus, now)) break;
          prev = now;
        }
        return std::norm(st.v1);
      };
      const double up = settle(1.3 * minus);
      const double down = settle(0.7 * minus);
      const double err = rel(up, plus);
      worst = std::max(worst, err);
      if (err <= 1e-5 && down < 1e-6 * minus) ++ok;
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d/%d sets converge (worst rel err %.2e, tol 1e-5) and decay below threshold",
                ok, sets, worst);
  return {ok == sets && sets == 10, buf};
}

Outcome criterion5() {
  const auto s = paper_device();
  const auto g = s.damping();
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> u(-300.0, -1.0);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double target = hz_to_rad(u(rng));
    auto p = s.rwa;
    p.f_p = calibrate_fp_from_bifurcation(target, g, s.rwa);
    worst = std::max(worst, rel(delta_b(p, g).delta_b, target));
  }
  auto p = s.rwa;
  p.f_p = calibrate_fp_from_bifurcation(hz_to_rad(-24.1), g, s.rwa);
  p.delta = hz_to_rad(-24.1);
  const auto at = solve_limit_cycles(p, g);
  auto above = p, below = p;
  above.delta *= 1 - 1e-6;
  below.delta *= 1 + 1e-6;
  const auto sa = solve_limit_cycles(above, g);
  const bool coalesce = at.size() == 1 && sa.size() == 2 && solve_limit_cycles(below, g).empty() &&
                        rel(sa[1].c1_sq, sa[0].c1_sq) < 1e-2;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "round trip worst rel %.2e (tol 1e-10); f_p(-24.1 Hz)=%.4f 1/s, double root %s",
                worst, p.f_p, coalesce ? "yes" : "no");
  return {worst <= 1e-10 && coalesce, buf};
}

Outcome criterion6() {
  const auto s = paper_device();
  const auto g = s.damping();
  const double f = 1.717;
  const auto sw = frequency_sweep(s.rwa, g, f, hz_to_rad(-11.0), hz_to_rad(12.0), 1001);
  if (!sw.has_isolated) return {false, "no isolated branch"};
  bool three = true;
  for (int i = 1; i < 10; ++i) {
    const double d = sw.omega_l + (sw.omega_h - sw.omega_l) * i / 10.0;
    const auto sts = stationary_states({f, d}, s.rwa, g);
    int stable = 0, one_unstable = 0;
    for (const auto& st : sts) {
      stable += st.stable;
      one_unstable += st.n_unstable == 1;
    }
    three = three && sts.size() == 3 && stable == 2 && one_unstable == 1;
  }
  int crossings = 0;
  for (const auto& fold : sw.folds) {
    const bool endpoint = std::abs(fold.at - sw.omega_l) < 1e-3 || std::abs(fold.at - sw.omega_h) < 1e-3;
    if (!endpoint) continue;
    const bool zero = std::abs(fold.lower.max_real_eig) < 0.05 * g.gamma1 &&
                      std::abs(fold.upper.max_real_eig) < 0.05 * g.gamma1;
    if (fold.lower.n_unstable + fold.upper.n_unstable == 1 && zero) ++crossings;
  }
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "[omega_L, omega_H]=[%.5f, %.5f] Hz, 3 states (2 stable) inside: %s, "
                "saddle-node endpoints: %d/2",
                rad_to_hz(sw.omega_l), rad_to_hz(sw.omega_h), three ? "yes" : "no", crossings);
  return {three && crossings == 2 && sw.omega_l < sw.omega_h, buf};
}

Outcome criterion7() {
  const auto s = paper_device();
  const auto g = s.damping();
  const auto m = locate_branch_merge(s.rwa, g, hz_to_rad(-11.0), hz_to_rad(12.0), pn_to_f(0.7, s),
                                     pn_to_f(1.4, s), 1e-6, 2001);
  if (!m.found) return {false, "no merge located"};
  const double pn = f_to_pn(m.f_d1_critical, s);
  const double err = rel(pn, 0.8214);
  // Drives 0.02% apart around the merge.
  SweepOptions so;
  so.extra = {m.omega_c};
  so.refine_peaks = false;
  const bool lo = frequency_sweep(s.rwa, g, m.f_d1_critical * (1 - 1e-4), hz_to_rad(-11.0),
                                  hz_to_rad(12.0), 2001, so).has_isolated;
  const bool hi = frequency_sweep(s.rwa, g, m.f_d1_critical * (1 + 1e-4), hz_to_rad(-11.0),
                                  hz_to_rad(12.0), 2001, so).has_isolated;
  char buf[240];
  std::snprintf(buf, sizeof buf,
                "F_c=%.6f pN (rel %.2e vs 0.8214, tol 1e-2), omega_c=%.5f Hz, "
                "isolated at -0.01%%: %s, at +0.01%%: %s",
                pn, err, rad_to_hz(m.omega_c), lo ? "yes" : "no", hi ? "yes" : "no");
  return {err <= 1e-2 && lo && !hi, buf};
}

Outcome criterion8() {
  const auto s = paper_device();
  const auto g = s.damping();
  auto lin = s.rwa;
  lin.f_p = 0.0;
  std::vector<double> drives;
  for (double pn : {0.1, 0.2, 0.5, 1.0}) drives.push_back(pn_to_f(pn, s));
  const auto flat = gamma_peak_curve(lin, g, drives, hz_to_rad(-11.0), hz_to_rad(12.0), 801);
  double worst = 0.0;
  for (const auto& sm : flat.samples) worst = std::max(worst, rel(sm.gamma_peak, g.gamma1 / 2));
  const bool a = !flat.multivalued && flat.samples.size() == drives.size() && worst <= 5e-3;

  const auto cv = gamma_peak_curve(s.rwa, g, {pn_to_f(0.7, s)}, hz_to_rad(-11.0), hz_to_rad(12.0), 801);
  const double lo = f_to_pn(cv.multi_lo, s), hi = f_to_pn(cv.multi_hi, s);
  const bool two = cv.samples.size() == 2;
  const bool b = cv.multivalued && two && rel(lo, 0.57) <= 0.05 && rel(hi, 0.82) <= 0.05;
  char buf[240];
  std::snprintf(buf, sizeof buf,
                "(a) Gamma_peak/(Gamma1/2) worst rel %.2e over 0.1-1.0 pN (tol 5e-3); "
                "(b) two-valued for [%.4f, %.4f] pN (rel %.2e, %.2e; tol 5e-2)",
                worst, lo, hi, rel(lo, 0.57), rel(hi, 0.82));
  return {a && b, buf};
}

Outcome criterion9() {
  auto far = paper_device();
  far.rwa.delta = hz_to_rad(-1000.0);
  const auto g = far.damping();
  const auto a = force_sweep(far.rwa, g, hz_to_rad(1.1), 0.05, 40.0, 801);
  const auto b = force_sweep(far.rwa, g, hz_to_rad(0.4), 0.05, 40.0, 801);
  const auto s = paper_device();
  const auto c = force_sweep(s.rwa, g, hz_to_rad(0.4), pn_to_f(0.01, s), pn_to_f(1.5, s), 801);
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "-1000 Hz: 1.1 Hz %s, 0.4 Hz %s; -35 Hz: 0.4 Hz %s",
                a.hysteretic ? "hysteretic" : "single-valued",
                b.hysteretic ? "hysteretic" : "single-valued",
                c.hysteretic ? "hysteretic" : "single-valued");
  return {a.hysteretic && !b.hysteretic && c.hysteretic, buf};
}

Outcome criterion10() {
  const auto base = paper_device();
  const auto g = base.damping();
  int compared = 0;
  double worst = 0.0;
  for (double hz : {-30.0, -35.0, -50.0, -100.0, -200.0}) {
    auto s = base;
    s.rwa.delta = hz_to_rad(hz);
    const auto tr = ringdown(s, 100e-9, 3.0);
    int taken = 0;
    for (std::size_t i = 0; i < tr.times.size() && taken < 10; i += 37) {
      if (std::isnan(tr.gamma_inst[i]) || tr.times[i] < 0.05) continue;
      const auto st = solve_extended_adiabatic(std::norm(tr.v1[i]), s.rwa, g);
      if (!(st.gamma_ad < 0.1 * std::abs(st.d_value))) continue;
      worst = std::max(worst, rel(tr.gamma_inst[i], st.gamma_ad));
      ++taken;
    }
    compared += taken;
  }
  // Non-monotonic rate with return toward Γ₁ at −35 Hz.
  const auto tr = ringdown(base, 200e-9, 5.0);
  std::vector<double> rates;
  for (std::size_t i = 0; i < tr.times.size(); ++i)
    if (!std::isnan(tr.gamma_inst[i]) && tr.times[i] > 0.03) rates.push_back(tr.gamma_inst[i]);
  const auto it = std::min_element(rates.begin(), rates.end());
  const bool dip = it != rates.begin() && it + 1 != rates.end() &&
                   rates.front() > *it + 0.2 * g.gamma1 && rates.back() > 0.95 * g.gamma1;
  char buf[200];
  std::snprintf(buf, sizeof buf,
                "%d valid points, worst rel %.2e (tol 5e-2); -35 Hz rate minimum %.3f 1/s, "
                "final %.3f 1/s: %s",
                compared, worst, *it, rates.back(), dip ? "non-monotonic" : "monotonic");
  return {compared >= 50 && worst <= 0.05 && dip, buf};
}

Outcome criterion11() {
  const auto s = paper_device();
  const double x0 = std::pow(scaled_from_amplitude(10e-9, s.modes.mode1, s.scaling), 2);
  const auto r0 = ringdown_initial_state(x0, s.rwa, s.damping());
  const auto full = integrate_full_eom(full_state_from_rwa(r0, s), raw_from_scaled(s.rwa, s.modes, s.scaling),
                                       s.modes, s.scaling, pump_frequency(s), 0.01);
  IntegrateOptions io;
  io.sample_dt = 1e-4;
  const auto slow = integrate_rwa(r0, s.rwa, s.damping(), {}, 0.01, io);
  double worst = 0.0;
  const std::size_t n = std::min(slow.v1.size(), full.v1.size());
  for (std::size_t i = 0; i < n; ++i)
    worst = std::max(worst, rel(std::abs(full.v1[i]), std::abs(slow.v1[i])));
  char buf[120];
  std::snprintf(buf, sizeof buf, "10 ms from 10 nm: worst envelope rel err %.2e (tol 2e-2)", worst);
  return {n == 101 && worst <= 0.02, buf};
}

Outcome criterion12() {
  const auto s = paper_device();
  const Damping none{0.0, 0.0};
  RwaState s0;
  s0.v1 = {1.5, 0.3};
  s0.v2 = {0.05, -0.02};
  const double h0 = rwa_hamiltonian(s0, s.rwa);
  IntegrateOptions io;
  io.sample_dt = 1e-2;
  const auto tr = integrate_rwa(s0, s.rwa, none, {}, 1.0, io);
  double drift = 0.0;
  for (std::size_t i = 0; i < tr.times.size(); ++i)
    drift = std::max(drift, std::abs(rwa_hamiltonian(RwaState{tr.v1[i], tr.v2[i], 0.0}, s.rwa) - h0));
  drift /= std::abs(h0);

  std::mt19937 rng(12);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  double grad_err = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Vector4 y{u(rng), u(rng), u(rng), u(rng)};
    const Vector4 d = rwa_rhs<double>(y, 0.0, s.rwa, none);
    Vector4 gr;
    for (int i = 0; i < 4; ++i) {
      Vector4 yp = y, ym = y;
      yp[i] += 1e-6;
      ym[i] -= 1e-6;
      gr[i] = (rwa_hamiltonian<double>(yp, s.rwa) - rwa_hamiltonian<double>(ym, s.rwa)) / 2e-6;
    }
    const Vector4 expect{-0.5 * gr[1], 0.5 * gr[0], -0.5 * gr[3], 0.5 * gr[2]};
    grad_err = std::max(grad_err, (d - expect).norm() / (1 + d.norm()));
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "H drift %.2e per s (tol 1e-7); gradient mismatch %.2e (tol 1e-6)",
                drift, grad_err);
  return {drift < 1e-7 && grad_err < 1e-6, buf};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"alpha/beta reproduction", criterion1},
      {"resolved-sideband ratio", criterion2},
      {"drive-scaling calibration", criterion3},
      {"self-sustained branch vs ODE", criterion4},
      {"bifurcation round trip", criterion5},
      {"isolated-branch structure", criterion6},
      {"codimension-2 merge", criterion7},
      {"Gamma_peak behavior", criterion8},
      {"hysteresis threshold", criterion9},
      {"adiabatic vs ODE", criterion10},
      {"RWA vs full equations", criterion11},
      {"Hamiltonian conservation", criterion12},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s %2zu %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
