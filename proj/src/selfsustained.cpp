#include "nlf/selfsustained.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nlf/errors.hpp"
#include "nlf/fit.hpp"

namespace nlf {

std::string to_string(CycleBranch b) { return b == CycleBranch::Plus ? "plus" : "minus"; }

double cycle_discriminant(const RwaParams& p, const Damping& g) {
  const double big_g = bifurcation_gain(p, g);
  const double s = 2.0 * g.gamma1 + g.gamma2;
  const double fp2 = p.f_p * p.f_p;
  return 2.0 * g.gamma1 * fp2 * big_g * p.delta + s * s * fp2 * fp2 -
         g.gamma1 * g.gamma1 * big_g * big_g;
}

double cycle_frequency_offset(double c1_sq, const RwaParams& p, const Damping& g) {
  const double g1 = g.gamma1, g2 = g.gamma2;
  return (g1 * p.delta - c1_sq * (0.5 * g1 * p.lambda12 + 0.5 * (g1 * g1 / g2) * p.lambda22 -
                                  g2 * p.lambda11)) /
         (2.0 * g1 + g2);
}

std::vector<SelfSustainedSolution> solve_limit_cycles(const RwaParams& p, const Damping& g) {
  if (p.sideband != Sideband::Upper)
    throw DomainError("solve_limit_cycles: only defined for the upper sideband");
  std::vector<SelfSustainedSolution> out;
  const double big_g = bifurcation_gain(p, g);
  double disc = cycle_discriminant(p, g);
  if (big_g == 0.0 || p.f_p == 0.0) return out;

  const double g1 = g.gamma1, g2 = g.gamma2;
  const double s = 2.0 * g1 + g2;
  const double fp2 = p.f_p * p.f_p;
  // Within rounding of Δ_B the two branches are one double root.
  const double scale = s * s * fp2 * fp2 + g1 * g1 * big_g * big_g;
  const bool double_root = std::abs(disc) <= 1e-12 * scale;
  if (double_root) disc = 0.0;
  if (!(disc >= 0.0)) return out;

  const double base = g1 * big_g * p.delta + s * s * fp2;
  const double root = s * std::sqrt(disc);
  const double pref = (g2 / g1) / (big_g * big_g);
  for (int sg : {+1, -1}) {
    if (double_root && sg < 0) break;
    const double c1_sq = pref * (base + sg * root);
    if (!(c1_sq > 0.0) || !std::isfinite(c1_sq)) continue;
    SelfSustainedSolution sol;
    sol.branch = sg > 0 ? CycleBranch::Plus : CycleBranch::Minus;
    sol.c1_sq = c1_sq;
    sol.c2_sq = g1 * c1_sq / (2.0 * g2);
    sol.delta_omega = cycle_frequency_offset(c1_sq, p, g);
    sol.c1 = std::sqrt(c1_sq);
    const std::complex<double> z(g2, p.delta - 2.0 * sol.delta_omega - p.lambda12 * c1_sq -
                                         p.lambda22 * sol.c2_sq);
    sol.c2 = std::complex<double>(0.0, -p.f_p) * c1_sq / z;
    sol.stable = stability_of_cycle(sol, p, g).stable;
    out.push_back(sol);
  }
  return out;
}

std::pair<double, double> oscillation_frequencies(const SelfSustainedSolution& sol, double omega1,
                                                  double omega_f) {
  return {omega1 + sol.delta_omega, omega_f - 2.0 * omega1 - 2.0 * sol.delta_omega};
}

StabilityReport stability_of_cycle(const SelfSustainedSolution& sol, const RwaParams& p,
                                   const Damping& g) {
  const Vector4 s{sol.c1.real(), sol.c1.imag(), sol.c2.real(), sol.c2.imag()};
  return linear_stability(s, p, g, {}, sol.delta_omega, true);
}

double cycle_residual(const SelfSustainedSolution& sol, const RwaParams& p, const Damping& g) {
  const Vector4 s{sol.c1.real(), sol.c1.imag(), sol.c2.real(), sol.c2.imag()};
  return rwa_rhs<double>(s, 0.0, p, g, {}, sol.delta_omega).cwiseAbs().maxCoeff();
}

BifurcationResult delta_b(const RwaParams& p, const Damping& g) {
  if (!(p.f_p > 0.0)) throw DomainError("delta_b: f_p must be positive");
  const double big_g = bifurcation_gain(p, g);
  if (!(big_g > 0.0)) throw DomainError("delta_b: G must be positive");
  const double s = 2.0 * g.gamma1 + g.gamma2;
  const double fp2 = p.f_p * p.f_p;
  BifurcationResult r;
  r.delta_b = (g.gamma1 * g.gamma1 * big_g * big_g - s * s * fp2 * fp2) / (2.0 * g.gamma1 * fp2 * big_g);
  return r;
}

NormalFormFit fit_normal_form(const std::vector<NormalFormPoint>& pts, double delta_b) {
  // r = r₀ + side·q·√(Δ − Δ_B), linear in (r₀, q); k = q².
  double s11 = 0, s12 = 0, s22 = 0, b1 = 0, b2 = 0;
  std::size_t n = 0;
  for (const auto& pt : pts) {
    const double e = pt.delta - delta_b;
    if (e < 0.0) continue;
    const double u = pt.side * std::sqrt(e);
    s11 += 1.0;
    s12 += u;
    s22 += u * u;
    b1 += pt.r;
    b2 += u * pt.r;
    ++n;
  }
  if (n < 3) throw FitError("normal_form_fit: fewer than three branch points in window");
  const double det = s11 * s22 - s12 * s12;
  if (!(std::abs(det) > 0.0)) throw FitError("normal_form_fit: degenerate design");
  NormalFormFit f;
  f.r0 = (s22 * b1 - s12 * b2) / det;
  const double q = (s11 * b2 - s12 * b1) / det;
  f.k = q * q;
  f.n = n;
  for (const auto& pt : pts) {
    const double e = pt.delta - delta_b;
    if (e < 0.0) continue;
    const double r = pt.r - (f.r0 + pt.side * q * std::sqrt(e));
    f.rss += r * r;
    f.max_abs_residual = std::max(f.max_abs_residual, std::abs(r));
  }

  // Exponent of the separation r₊ − r₋ against Δ − Δ_B.
  std::vector<double> lx, ly;
  for (const auto& a : pts) {
    if (a.side != +1) continue;
    for (const auto& b : pts)
      if (b.side == -1 && b.delta == a.delta && a.delta > delta_b && a.r > b.r) {
        lx.push_back(std::log(a.delta - delta_b));
        ly.push_back(std::log(a.r - b.r));
      }
  }
  f.exponent = std::numeric_limits<double>::quiet_NaN();
  if (lx.size() >= 2) {
    try {
      f.exponent = fit_line(lx, ly).slope;
    } catch (const FitError&) {
    }
  }
  return f;
}

NormalFormFit normal_form_fit(const RwaParams& p, const Damping& g, double window_lo,
                              double window_hi, std::size_t n_points) {
  if (!(window_hi > window_lo) || n_points < 2)
    throw DomainError("normal_form_fit: empty detuning window");
  const double db = delta_b(p, g).delta_b;
  std::vector<NormalFormPoint> pts;
  std::size_t with_solutions = 0;
  RwaParams q = p;
  for (std::size_t i = 0; i < n_points; ++i) {
    q.delta = window_lo + (window_hi - window_lo) * static_cast<double>(i) /
                              static_cast<double>(n_points - 1);
    const auto sols = solve_limit_cycles(q, g);
    if (sols.size() == 2) ++with_solutions;
    for (const auto& s : sols)
      pts.push_back({q.delta, std::sqrt(s.c1_sq), s.branch == CycleBranch::Plus ? +1 : -1});
  }
  if (with_solutions < 2)
    throw FitError("normal_form_fit: fewer than two detunings with both branches");
  return fit_normal_form(pts, db);
}

}  // namespace nlf
