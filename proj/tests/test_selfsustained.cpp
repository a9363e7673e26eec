#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>

#include "nlf/errors.hpp"
#include "nlf/params.hpp"
#include "nlf/selfsustained.hpp"
#include "nlf/stability.hpp"
#include "nlf/timedomain.hpp"
#include "oracles.hpp"

using namespace nlf;
using oracle::rel;
using cd = std::complex<double>;

namespace {

SystemParams device(double fp, double delta) {
  auto s = paper_device();
  s.rwa.f_p = fp;
  s.rwa.delta = delta;
  return s;
}

// Stationarity of the co-rotating amplitudes, written directly in complex form.
double stationarity(const SelfSustainedSolution& sol, const RwaParams& p, const Damping& g) {
  const cd c1 = sol.c1, c2 = sol.c2;
  const double n1 = std::norm(c1), n2 = std::norm(c2);
  const cd i(0, 1);
  const cd r1 = -g.gamma1 * c1 + i * (p.lambda11 * n1 + p.lambda12 * n2 - sol.delta_omega) * c1 -
                2.0 * i * p.f_p * std::conj(c1) * std::conj(c2);
  const cd r2 = -g.gamma2 * c2 +
                i * (-p.delta + p.lambda12 * n1 + p.lambda22 * n2 + 2.0 * sol.delta_omega) * c2 -
                i * p.f_p * std::conj(c1) * std::conj(c1);
  return std::max(std::abs(r1), std::abs(r2)) / std::max(1.0, n1);
}

bool has_cycle(const RwaParams& p, const Damping& g) { return !solve_limit_cycles(p, g).empty(); }

}  // namespace

TEST_CASE("no pump, no cycles") {
  const auto s = device(0.0, 0.0);
  const auto g = s.damping();
  const double big_g = bifurcation_gain(s.rwa, g);
  CHECK(cycle_discriminant(s.rwa, g) == doctest::Approx(-3.26 * 3.26 * big_g * big_g));
  CHECK(solve_limit_cycles(s.rwa, g).empty());
  CHECK_THROWS_AS(delta_b(s.rwa, g), DomainError);
}

TEST_CASE("two branches above the bifurcation") {
  const auto s = device(14.5, 0.0);
  const auto g = s.damping();
  const auto sols = solve_limit_cycles(s.rwa, g);
  REQUIRE(sols.size() == 2);
  CHECK(sols[0].branch == CycleBranch::Plus);
  CHECK(sols[1].branch == CycleBranch::Minus);
  CHECK(sols[0].c1_sq > sols[1].c1_sq);
  for (const auto& sol : sols) {
    CHECK(sol.c1_sq > 0.0);
    CHECK(sol.c2_sq > 0.0);
    CHECK(rel(g.gamma1 * sol.c1_sq, 2 * g.gamma2 * sol.c2_sq) < 1e-10);
    CHECK(rel(std::norm(sol.c2), sol.c2_sq) < 1e-10);
    CHECK(stationarity(sol, s.rwa, g) < 1e-9);
    CHECK(cycle_residual(sol, s.rwa, g) < 1e-9);
  }

  const auto plus = stability_of_cycle(sols[0], s.rwa, g);
  const auto minus = stability_of_cycle(sols[1], s.rwa, g);
  CHECK(plus.stable);
  CHECK(sols[0].stable);
  CHECK_FALSE(minus.stable);
  CHECK(minus.n_unstable == 1);
  // The excluded eigenvalue is the phase mode at zero.
  CHECK(std::abs(plus.eigenvalues[plus.excluded]) < 1e-8 * g.gamma2);
  CHECK(std::abs(minus.eigenvalues[minus.excluded]) < 1e-8 * g.gamma2);
}

TEST_CASE("Jacobian agrees with finite differences") {
  const auto s = device(14.5, 0.0);
  const auto g = s.damping();
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int trial = 0; trial < 10; ++trial) {
    const Vector4 y{u(rng), u(rng), u(rng), u(rng)};
    const double frame = u(rng);
    const auto jac = rwa_jacobian(y, s.rwa, g, {}, frame);
    for (int j = 0; j < 4; ++j) {
      const double h = 1e-6;
      Vector4 yp = y, ym = y;
      yp[j] += h;
      ym[j] -= h;
      const Vector4 col = (rwa_rhs<double>(yp, 0.0, s.rwa, g, {}, frame) -
                           rwa_rhs<double>(ym, 0.0, s.rwa, g, {}, frame)) / (2 * h);
      CHECK((col - jac.col(j)).norm() < 1e-6 * (1 + col.norm()));
    }
  }
}

TEST_CASE("zero state spectrum without pump") {
  const auto s = device(0.0, 0.0);
  const auto rep = linear_stability(Vector4::Zero(), s.rwa, s.damping(), {}, 0.0);
  CHECK(rep.stable);
  CHECK(rep.eigenvalues[0].real() == doctest::Approx(-3.26));
  CHECK(rep.eigenvalues[1].real() == doctest::Approx(-3.26));
  CHECK(rep.eigenvalues[2].real() == doctest::Approx(-187.57));
  CHECK(rep.eigenvalues[3].real() == doctest::Approx(-187.57));
}

TEST_CASE("bifurcation detuning") {
  const auto s = paper_device();
  const auto g = s.damping();
  const double db = delta_b(s.rwa, g).delta_b;
  CHECK(rad_to_hz(db) == doctest::Approx(-23.885).epsilon(1e-4));

  SUBCASE("discriminant vanishes there") {
    auto q = s.rwa;
    q.delta = db;
    const double big_g = bifurcation_gain(q, g);
    const double scale = g.gamma1 * g.gamma1 * big_g * big_g;
    CHECK(std::abs(cycle_discriminant(q, g)) < 1e-9 * scale);
  }

  SUBCASE("branches coincide at the bifurcation") {
    auto q = s.rwa;
    q.delta = db;
    const auto sols = solve_limit_cycles(q, g);
    REQUIRE(sols.size() == 1);
    q.delta = db * (1 - 1e-12);
    const auto pair = solve_limit_cycles(q, g);
    REQUIRE_FALSE(pair.empty());
    if (pair.size() == 2) CHECK(rel(pair[0].c1_sq, pair[1].c1_sq) < 1e-6);
    CHECK(rel(pair[0].c1_sq, sols[0].c1_sq) < 1e-6);
  }

  SUBCASE("cycles exist above and not below") {
    auto q = s.rwa;
    const double onset = oracle::first_sign_change(
        [&](double d) {
          q.delta = d;
          return has_cycle(q, g) ? 1.0 : -1.0;
        },
        hz_to_rad(-60.0), hz_to_rad(0.0), 600);
    CHECK(rel(onset, db) < 1e-9);
    for (double hz : {-100.0, -40.0, -24.0}) {
      q.delta = hz_to_rad(hz);
      CHECK_FALSE(has_cycle(q, g));
    }
    for (double hz : {-23.8, -10.0, 0.0, 30.0}) {
      q.delta = hz_to_rad(hz);
      CHECK(solve_limit_cycles(q, g).size() == 2);
    }
  }

  SUBCASE("lower sideband is rejected") {
    auto q = s.rwa;
    q.sideband = Sideband::Lower;
    CHECK_THROWS_AS(solve_limit_cycles(q, g), DomainError);
  }
}

TEST_CASE("calibration round trip") {
  const auto s = paper_device();
  const auto g = s.damping();
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-200.0, -1.0);
  for (int i = 0; i < 20; ++i) {
    const double target = hz_to_rad(u(rng));
    auto q = s.rwa;
    q.f_p = calibrate_fp_from_bifurcation(target, g, s.rwa);
    CHECK(rel(delta_b(q, g).delta_b, target) < 1e-10);
  }
}

TEST_CASE("oscillation frequencies") {
  const auto s = paper_device();
  const auto g = s.damping();
  const double w1 = s.modes.mode1.omega;
  const double wf = pump_frequency(s);

  SelfSustainedSolution zero;
  const auto [f1, f2] = oscillation_frequencies(zero, w1, wf);
  CHECK(f1 == w1);
  CHECK(f2 == wf - 2 * w1);

  auto q = device(14.5, 0.0).rwa;
  for (const auto& sol : solve_limit_cycles(q, g)) {
    const auto [a, b] = oscillation_frequencies(sol, w1, wf);
    CHECK(std::abs(2 * a + b - wf) <= 1e-12 * wf);
  }

  q.delta = hz_to_rad(10.0);
  CHECK(cycle_frequency_offset(0.0, q, g) == doctest::Approx(1.055).epsilon(1e-3));
  CHECK(cycle_frequency_offset(0.0, q, g) ==
        doctest::Approx(3.26 * hz_to_rad(10.0) / (2 * 3.26 + 187.57)).epsilon(1e-14));
}

TEST_CASE("saddle-node normal form") {
  const auto s = paper_device();
  const auto g = s.damping();
  const double db = delta_b(s.rwa, g).delta_b;
  const double span = 0.05 * std::abs(db);
  const auto fit = normal_form_fit(s.rwa, g, db, db + span, 41);
  CHECK(fit.exponent == doctest::Approx(0.5).epsilon(0.04));
  CHECK(fit.k > 0.0);
  CHECK(fit.r0 > 0.0);

  // Log–log slope from the two branches, computed here.
  auto q = s.rwa;
  std::vector<double> lx, ly;
  for (double e : {1e-6, 1e-5, 1e-4, 1e-3}) {
    q.delta = db + e * std::abs(db);
    const auto sols = solve_limit_cycles(q, g);
    REQUIRE(sols.size() == 2);
    lx.push_back(std::log(e));
    ly.push_back(std::log(std::sqrt(sols[0].c1_sq) - std::sqrt(sols[1].c1_sq)));
  }
  const double slope = (ly.back() - ly.front()) / (lx.back() - lx.front());
  CHECK(std::abs(slope - 0.5) < 0.02);
  CHECK(rel(fit.r0 * fit.r0, solve_limit_cycles([&] {
                               auto a = s.rwa;
                               a.delta = db;
                               return a;
                             }(), g)[0].c1_sq) < 1e-2);
  CHECK_THROWS_AS(normal_form_fit(s.rwa, g, db - 2 * span, db - span), FitError);
}

TEST_CASE("time-domain integration reaches the stable branch") {
  const auto s = device(14.5, 0.0);
  const auto g = s.damping();
  const auto sols = solve_limit_cycles(s.rwa, g);
  REQUIRE(sols.size() == 2);
  RwaState s0 = ringdown_initial_state(1.3 * sols[1].c1_sq, s.rwa, g);
  IntegrateOptions opt;
  opt.sample_dt = 0.05;
  const auto tr = integrate_rwa(s0, s.rwa, g, {}, 12.0, opt);
  CHECK(rel(std::norm(tr.v1.back()), sols[0].c1_sq) < 1e-6);

  s0 = ringdown_initial_state(0.7 * sols[1].c1_sq, s.rwa, g);
  const auto down = integrate_rwa(s0, s.rwa, g, {}, 12.0, opt);
  CHECK(std::norm(down.v1.back()) < 1e-6 * sols[1].c1_sq);
}
