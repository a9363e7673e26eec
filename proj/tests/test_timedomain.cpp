#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>

#include "nlf/adiabatic.hpp"
#include "nlf/errors.hpp"
#include "nlf/params.hpp"
#include "nlf/rwa.hpp"
#include "nlf/timedomain.hpp"
#include "oracles.hpp"

using namespace nlf;
using oracle::rel;

namespace {

SystemParams linear_device() {
  auto s = paper_device();
  s.rwa.f_p = 0.0;
  s.rwa.lambda11 = s.rwa.lambda12 = s.rwa.lambda22 = 0.0;
  s.rwa.delta = 0.0;
  return s;
}

}  // namespace

TEST_CASE("right-hand side basics") {
  const auto s = paper_device();
  const Vector4 zero = Vector4::Zero();
  CHECK(rwa_rhs<double>(zero, 0.0, s.rwa, s.damping()).isZero(0.0));

  const auto lin = linear_device();
  const Vector4 y{0.3, -0.7, 1.1, 0.2};
  const Vector4 d = rwa_rhs<double>(y, 0.0, lin.rwa, lin.damping());
  CHECK(d[0] == -3.26 * y[0]);
  CHECK(d[1] == -3.26 * y[1]);
  CHECK(d[2] == -187.57 * y[2]);
  CHECK(d[3] == -187.57 * y[3]);
}

TEST_CASE("undamped flow is generated by the Hamiltonian") {
  // v̇ = i ∂H/∂v*, i.e. ȧ = −½∂H/∂b and ḃ = ½∂H/∂a for v = a + ib.
  auto s = paper_device();
  const Damping none{0.0, 0.0};
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (auto sb : {Sideband::Upper, Sideband::Lower}) {
    s.rwa.sideband = sb;
    for (int trial = 0; trial < 20; ++trial) {
      const Vector4 y{u(rng), u(rng), u(rng), u(rng)};
      const Vector4 d = rwa_rhs<double>(y, 0.0, s.rwa, none);
      Vector4 grad;
      for (int i = 0; i < 4; ++i) {
        const double h = 1e-6;
        Vector4 yp = y, ym = y;
        yp[i] += h;
        ym[i] -= h;
        grad[i] = (rwa_hamiltonian<double>(yp, s.rwa) - rwa_hamiltonian<double>(ym, s.rwa)) / (2 * h);
      }
      const Vector4 expect{-0.5 * grad[1], 0.5 * grad[0], -0.5 * grad[3], 0.5 * grad[2]};
      CHECK((d - expect).norm() < 1e-6 * (1 + d.norm()));
    }
  }
}

TEST_CASE("linear ringdown is exponential") {
  const auto s = linear_device();
  RwaState s0;
  s0.v1 = {0.6, 0.8};
  s0.v2 = {0.1, 0.0};
  const auto tr = integrate_rwa(s0, s.rwa, s.damping(), {}, 1.0);
  REQUIRE(tr.times.size() == 1001);
  CHECK(tr.times.back() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(rel(std::abs(tr.v1.back()), std::exp(-3.26)) < 1e-8);
  CHECK(std::abs(tr.v1.back()) == doctest::Approx(0.0384).epsilon(1e-2));
  for (std::size_t i = 1; i < tr.times.size(); ++i) REQUIRE(tr.times[i] > tr.times[i - 1]);
}

TEST_CASE("Hamiltonian is conserved without damping") {
  const auto s = paper_device();
  const Damping none{0.0, 0.0};
  RwaState s0;
  s0.v1 = {1.5, 0.3};
  s0.v2 = {0.05, -0.02};
  const double h0 = rwa_hamiltonian(s0, s.rwa);
  IntegrateOptions opt;
  opt.sample_dt = 1e-2;
  const auto tr = integrate_rwa(s0, s.rwa, none, {}, 1.0, opt);
  double worst = 0.0;
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    const RwaState st{tr.v1[i], tr.v2[i], tr.times[i]};
    worst = std::max(worst, std::abs(rwa_hamiltonian(st, s.rwa) - h0));
  }
  CHECK(worst / std::abs(h0) < 1e-7);
}

TEST_CASE("integration is deterministic and converged") {
  const auto s = paper_device();
  const auto s0 = ringdown_initial_state(3.0, s.rwa, s.damping());
  const auto a = integrate_rwa(s0, s.rwa, s.damping(), {}, 0.5);
  const auto b = integrate_rwa(s0, s.rwa, s.damping(), {}, 0.5);
  CHECK(a.v1 == b.v1);
  CHECK(a.v2 == b.v2);
  IntegrateOptions tight;
  tight.control.rtol = 5e-11;
  tight.control.atol = 5e-13;
  const auto c = integrate_rwa(s0, s.rwa, s.damping(), {}, 0.5, tight);
  CHECK(std::abs(a.v1.back() - c.v1.back()) < 1e-8 * std::abs(c.v1.back()));
}

TEST_CASE("step-size underflow is reported") {
  auto s = paper_device();
  RwaState s0;
  s0.v1 = 1e3;
  IntegrateOptions opt;
  opt.control.max_steps = 100;
  CHECK_THROWS_AS(integrate_rwa(s0, s.rwa, s.damping(), {}, 10.0, opt), SolverError);
  CHECK_THROWS_AS(integrate_rwa(s0, s.rwa, s.damping(), {}, 0.0), DomainError);
}

TEST_CASE("instantaneous rate") {
  std::vector<double> t, a;
  for (int i = 0; i < 400; ++i) {
    t.push_back(i * 1e-3);
    a.push_back(2e-8 * std::exp(-3.26 * t.back()));
  }
  const auto r = instantaneous_rate(t, a, 51);
  REQUIRE(r.size() == 350);
  for (const auto& p : r) {
    REQUIRE(p.valid);
    CHECK(std::abs(p.gamma_inst - 3.26) < 1e-10);
  }
  CHECK(r.front().t == t[25]);

  a[200] = 0.0;
  const auto z = instantaneous_rate(t, a, 51);
  int flagged = 0;
  for (const auto& p : z) flagged += !p.valid;
  CHECK(flagged == 51);
  CHECK_THROWS_AS(instantaneous_rate(t, a, 50), DomainError);
}

TEST_CASE("linear ringdown rate is the linear damping") {
  auto s = paper_device();
  s.rwa.f_p = 0.0;
  s.rwa.lambda11 = 0.0;  // Λ₁₂, Λ₂₂ only shift mode 2 and the phase
  RingdownOptions opt;
  const auto tr = ringdown(s, 30e-9, 1.0, opt);
  int n = 0;
  for (double g : tr.gamma_inst) {
    if (std::isnan(g)) continue;
    CHECK(std::abs(g - 3.26) < 1e-8);
    ++n;
  }
  CHECK(n == 1001 - 50);
}

TEST_CASE("negative nonlinear friction at the published detuning") {
  const auto s = paper_device();
  const double g1 = s.damping().gamma1;

  SUBCASE("decay is slower than exponential at first") {
    const auto tr = ringdown(s, 12e-9, 0.3);
    const double a0 = tr.a1.front();
    for (std::size_t i = 10; i < tr.times.size(); i += 10)
      CHECK(tr.a1[i] > a0 * std::exp(-g1 * tr.times[i]));
  }

  SUBCASE("small-amplitude slope of the rate matches alpha") {
    const auto tr = ringdown(s, 3e-9, 1.5);
    std::vector<double> xs, ys;
    for (std::size_t i = 0; i < tr.times.size(); ++i) {
      if (std::isnan(tr.gamma_inst[i]) || tr.times[i] < 0.05) continue;
      xs.push_back(tr.a1[i] * tr.a1[i]);
      ys.push_back(tr.gamma_inst[i]);
    }
    REQUIRE(xs.size() > 100);
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) mx += xs[i], my += ys[i];
    mx /= xs.size();
    my /= xs.size();
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i)
      sxx += (xs[i] - mx) * (xs[i] - mx), sxy += (xs[i] - mx) * (ys[i] - my);
    const double slope = sxy / sxx;
    const double expect = alpha_per_m2(alpha_beta(s.rwa, s.damping().gamma2), s.modes.mode1, s.scaling);
    CHECK(rel(slope, expect) < 0.05);
    CHECK(rel(my - slope * mx, g1) < 0.01);
  }

  SUBCASE("large start gives a single interior minimum of the rate") {
    const auto tr = ringdown(s, 200e-9, 5.0);
    std::vector<double> g;
    for (std::size_t i = 0; i < tr.times.size(); ++i)
      if (!std::isnan(tr.gamma_inst[i]) && tr.times[i] > 0.03) g.push_back(tr.gamma_inst[i]);
    REQUIRE(g.size() > 100);
    // In time the amplitude falls, so the rate rises from its early value,
    // hits the minimum at moderate amplitude and climbs back toward Γ₁.
    const auto it = std::min_element(g.begin(), g.end());
    CHECK(it != g.begin());
    CHECK(it + 1 != g.end());
    CHECK(std::is_sorted(g.begin(), it + 1, std::greater<>()));
    CHECK(std::is_sorted(it, g.end()));
    CHECK(g.back() > 0.95 * g1);
    CHECK(g.front() > *it + 0.2 * g1);
  }

  SUBCASE("adiabatic rate agrees with the time-domain rate where valid") {
    const auto tr = ringdown(s, 100e-9, 1.0);
    int compared = 0;
    for (std::size_t i = 0; i < tr.times.size(); i += 5) {
      if (std::isnan(tr.gamma_inst[i]) || tr.times[i] < 0.05) continue;
      const double x = std::norm(tr.v1[i]);
      const auto st = solve_extended_adiabatic(x, s.rwa, s.damping());
      if (!(st.gamma_ad < 0.1 * std::abs(st.d_value))) continue;
      CAPTURE(tr.times[i]);
      CHECK(rel(tr.gamma_inst[i], st.gamma_ad) < 0.05);
      ++compared;
    }
    CHECK(compared > 100);
  }
}

TEST_CASE("basin of the self-sustained cycle") {
  auto s = paper_device();
  s.rwa.delta = 0.0;
  const auto th = thresholds(s);
  REQUIRE(th.exists);
  CHECK(th.a_th == doctest::Approx(9.676e-9).epsilon(1e-3));

  CHECK(classify_basin(0.0, s).outcome == BasinOutcome::DecaysToZero);

  const auto below = classify_basin(0.98 * th.a_th, s);
  CHECK(below.outcome == BasinOutcome::DecaysToZero);
  const auto above = classify_basin(1.02 * th.a_th, s);
  CHECK(above.outcome == BasinOutcome::SettlesToLimitCycle);
  CHECK(rel(above.final_amplitude, th.a_st) < 0.01);
  const auto high = classify_basin(2.0 * th.a_st, s);
  CHECK(high.outcome == BasinOutcome::SettlesToLimitCycle);
  CHECK(rel(high.final_amplitude, th.a_st) < 0.01);
  CHECK(high.a_st == th.a_st);

  // Bisection on the initial amplitude lands on a_th.
  double lo = 0.5 * th.a_th, hi = 2.0 * th.a_th;
  for (int i = 0; i < 8; ++i) {
    const double mid = 0.5 * (lo + hi);
    (classify_basin(mid, s).outcome == BasinOutcome::DecaysToZero ? lo : hi) = mid;
  }
  CHECK(rel(0.5 * (lo + hi), th.a_th) < 0.02);

  auto lower = s;
  lower.rwa.sideband = Sideband::Lower;
  CHECK_THROWS_AS(classify_basin(1e-9, lower), DomainError);
}

TEST_CASE("full equations of motion") {
  const auto s = paper_device();
  const double g1 = s.damping().gamma1;

  SUBCASE("damped oscillator envelope") {
    FullState f0;
    f0.q1 = 10e-9;
    const auto tr = integrate_full_eom(f0, RawCouplings{}, s.modes, s.scaling, 0.0, 0.01);
    REQUIRE(tr.v1.size() == 101);
    const double v0 = std::abs(tr.v1.front());
    for (std::size_t i = 0; i < tr.v1.size(); ++i)
      CHECK(rel(std::abs(tr.v1[i]) / v0, std::exp(-g1 * tr.states[i].t)) < 1e-4);
  }

  SUBCASE("agrees with the slow dynamics") {
    const double x0 = std::pow(scaled_from_amplitude(10e-9, s.modes.mode1, s.scaling), 2);
    const auto r0 = ringdown_initial_state(x0, s.rwa, s.damping());
    const auto raw = raw_from_scaled(s.rwa, s.modes, s.scaling);
    const auto full = integrate_full_eom(full_state_from_rwa(r0, s), raw, s.modes, s.scaling,
                                         pump_frequency(s), 0.01);
    IntegrateOptions io;
    io.sample_dt = 1e-4;
    const auto slow = integrate_rwa(r0, s.rwa, s.damping(), {}, 0.01, io);
    REQUIRE(slow.v1.size() == full.v1.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < slow.v1.size(); ++i)
      worst = std::max(worst, rel(std::abs(full.v1[i]), std::abs(slow.v1[i])));
    CHECK(worst < 0.02);
  }

  SUBCASE("pump far off both sidebands has no effect") {
    const double x0 = 1.0;
    RwaState r0;
    r0.v1 = std::sqrt(x0);
    auto far = s;
    far.rwa.delta = 150.0 * s.damping().gamma2;
    const auto raw = raw_from_scaled(far.rwa, far.modes, far.scaling);
    auto unpumped = raw;
    unpumped.big_f_p = 0.0;
    const auto f0 = full_state_from_rwa(r0, far);
    const auto a = integrate_full_eom(f0, raw, s.modes, s.scaling, pump_frequency(far), 0.01);
    const auto b = integrate_full_eom(f0, unpumped, s.modes, s.scaling, pump_frequency(far), 0.01);
    double worst = 0.0;
    for (std::size_t i = 0; i < a.v1.size(); ++i)
      worst = std::max(worst, rel(std::abs(a.v1[i]), std::abs(b.v1[i])));
    CHECK(worst < 0.01);
  }

  SUBCASE("rejected configurations") {
    FullOptions coarse;
    coarse.steps_per_period = 20.0;
    CHECK_THROWS_AS(integrate_full_eom({}, RawCouplings{}, s.modes, s.scaling, 0.0, 0.01, coarse),
                    DomainError);
    CHECK_THROWS_AS(integrate_full_eom({}, RawCouplings{}, s.modes, s.scaling, 0.0, 0.06),
                    DomainError);
  }
}
