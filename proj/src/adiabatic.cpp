#include "nlf/adiabatic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nlf/detail/roots.hpp"
#include "nlf/errors.hpp"

namespace nlf {

namespace {

constexpr double tiny = std::numeric_limits<double>::min();

std::complex<double> d_of(double x, double y, double phi_dot, const RwaParams& p,
                          const Damping& g) {
  const int sg = sign(p.sideband);
  return {g.gamma2, p.delta - 2.0 * sg * phi_dot - p.lambda12 * x - p.lambda22 * y};
}

AdiabaticState make_state(double x, double y, double phi_dot, const RwaParams& p,
                          const Damping& g) {
  AdiabaticState s;
  s.x = x;
  s.y = y;
  s.phi_dot = phi_dot;
  s.d_value = d_of(x, y, phi_dot, p, g);
  const double re_inv = s.d_value.real() / std::norm(s.d_value);
  s.gamma_ad = g.gamma1 - 2.0 * sign(p.sideband) * p.f_p * p.f_p * x * re_inv;
  s.residual = adiabatic_residual(s, p);
  return s;
}

// Right-hand sides of the two self-consistency equations at (φ̇, y).
std::pair<double, double> mapped(double x, double phi_dot, double y, const RwaParams& p,
                                 const Damping& g) {
  const auto d = d_of(x, y, phi_dot, p, g);
  const double n = std::norm(d);
  const double fp2 = p.f_p * p.f_p;
  const double y_new = fp2 * x * x / n;
  const double im_inv = -d.imag() / n;
  const double phi_new = p.lambda12 * y + p.lambda11 * x - 2.0 * fp2 * x * im_inv;
  return {phi_new, y_new};
}

// With s = Im D the system collapses to one equation R(s) = 0.
struct Reduced {
  double x;
  const RwaParams& p;
  const Damping& g;

  std::pair<double, double> phi_y(double s) const {
    const double den = g.gamma2 * g.gamma2 + s * s;
    const double fp2 = p.f_p * p.f_p;
    const double y = fp2 * x * x / den;
    const double phi = p.lambda12 * y + p.lambda11 * x + 2.0 * fp2 * x * s / den;
    return {phi, y};
  }
  double operator()(double s) const {
    const auto [phi, y] = phi_y(s);
    return p.delta - 2.0 * sign(p.sideband) * phi - p.lambda12 * x - p.lambda22 * y - s;
  }
};

std::vector<AdiabaticState> enumerate(double x, const RwaParams& p, const Damping& g) {
  const Reduced r{x, p, g};
  const double fp2 = p.f_p * p.f_p;
  const double y_max = fp2 * x * x / (g.gamma2 * g.gamma2);
  const double bound = 2.0 * (std::abs(p.lambda12) * y_max + std::abs(p.lambda11) * x +
                              fp2 * x / g.gamma2) +
                       std::abs(p.lambda12) * x + std::abs(p.lambda22) * y_max;
  const double lo = p.delta - bound - g.gamma2;
  const double hi = p.delta + bound + g.gamma2;
  // R varies on the scale Γ₂ around s = 0 and slowly far away, so sample
  // uniformly in θ with s = Γ₂ tan θ.
  const double t_lo = std::atan(lo / g.gamma2);
  const double t_hi = std::atan(hi / g.gamma2);
  constexpr int n = 4000;
  std::vector<AdiabaticState> out;
  double s_prev = lo, r_prev = r(lo);
  for (int i = 1; i <= n; ++i) {
    const double s = i == n ? hi : g.gamma2 * std::tan(t_lo + (t_hi - t_lo) * i / n);
    const double rv = r(s);
    if (rv == 0.0 || (rv < 0.0) != (r_prev < 0.0)) {
      const double root = rv == 0.0 ? s
                                    : detail::bisect(r, s_prev, s, r_prev, rv,
                                                     4.0 * std::numeric_limits<double>::epsilon() *
                                                         std::max(std::abs(s), g.gamma2));
      const auto [phi, y] = r.phi_y(root);
      auto st = make_state(x, y, phi, p, g);
      st.method = "bracket";
      if (out.empty() || std::abs(out.back().d_value.imag() - root) > 1e-9 * g.gamma2)
        out.push_back(st);
    }
    s_prev = s;
    r_prev = rv;
  }
  for (auto& st : out) st.n_solutions = static_cast<int>(out.size());
  return out;
}

bool fixed_point(double x, const RwaParams& p, const Damping& g, double& phi, double& y,
                 int& iters) {
  for (iters = 1; iters <= 1000; ++iters) {
    const auto [phi_t, y_t] = mapped(x, phi, y, p, g);
    const double dphi = phi_t - phi, dy = y_t - y;
    phi += 0.5 * dphi;
    y += 0.5 * dy;
    if (!std::isfinite(phi) || !std::isfinite(y)) return false;
    if (std::abs(dphi) <= 1e-12 * std::max(std::abs(phi), tiny) + tiny &&
        std::abs(dy) <= 1e-12 * std::max(std::abs(y), tiny) + tiny)
      return true;
  }
  return false;
}

bool newton(double x, const RwaParams& p, const Damping& g, double& phi, double& y, int& iters) {
  auto resid = [&](double a, double b) {
    const auto [ta, tb] = mapped(x, a, b, p, g);
    return std::pair{ta - a, tb - b};
  };
  auto norm = [](std::pair<double, double> v, double sa, double sb) {
    return std::hypot(v.first / sa, v.second / sb);
  };
  for (iters = 1; iters <= 100; ++iters) {
    const double sa = std::max(std::abs(phi), 1.0), sb = std::max(std::abs(y), 1e-300);
    const auto f = resid(phi, y);
    const double f0 = norm(f, sa, sb);
    if (f0 < 1e-13) return true;
    const double ha = 1e-7 * sa, hb = 1e-7 * std::max(std::abs(y), 1e-12);
    const auto fa = resid(phi + ha, y);
    const auto fb = resid(phi, y + hb);
    const double j11 = (fa.first - f.first) / ha, j21 = (fa.second - f.second) / ha;
    const double j12 = (fb.first - f.first) / hb, j22 = (fb.second - f.second) / hb;
    const double det = j11 * j22 - j12 * j21;
    if (!std::isfinite(det) || det == 0.0) return false;
    const double da = -(j22 * f.first - j12 * f.second) / det;
    const double db = -(-j21 * f.first + j11 * f.second) / det;
    double lam = 1.0;
    for (int k = 0; k < 40; ++k, lam *= 0.5) {
      const double na = phi + lam * da, nb = std::max(y + lam * db, 0.0);
      if (norm(resid(na, nb), sa, sb) < f0) {
        phi = na;
        y = nb;
        break;
      }
      if (k == 39) return false;
    }
  }
  return false;
}

}  // namespace

double gamma_ad_simple(double x, const RwaParams& p, const Damping& g) {
  if (!(x >= 0.0)) throw DomainError("gamma_ad_simple: x must be non-negative");
  return g.gamma1 + alpha_beta(p, g.gamma2).alpha * x;
}

double adiabatic_residual(const AdiabaticState& s, const RwaParams& p) {
  const double fp2 = p.f_p * p.f_p;
  const double n = std::norm(s.d_value);
  const double lhs = s.y * n, rhs = fp2 * s.x * s.x;
  const double r1 = std::abs(lhs - rhs) / std::max({std::abs(lhs), std::abs(rhs), tiny});
  const double im_term = 2.0 * fp2 * s.x * (-s.d_value.imag() / n);
  const double phi_rhs = p.lambda12 * s.y + p.lambda11 * s.x - im_term;
  const double scale = std::abs(p.lambda12 * s.y) + std::abs(p.lambda11 * s.x) +
                       std::abs(im_term) + std::abs(s.phi_dot);
  const double r2 = std::abs(s.phi_dot - phi_rhs) / std::max(scale, tiny);
  return std::max(r1, r2);
}

std::vector<AdiabaticState> all_extended_adiabatic(double x, const RwaParams& p,
                                                   const Damping& g) {
  if (!(x >= 0.0) || !std::isfinite(x))
    throw DomainError("solve_extended_adiabatic: x must be finite and non-negative");
  if (x == 0.0) {
    auto s = make_state(0.0, 0.0, 0.0, p, g);
    s.method = "exact";
    return {s};
  }
  return enumerate(x, p, g);
}

AdiabaticState solve_extended_adiabatic(double x, const RwaParams& p, const Damping& g,
                                        const AdiabaticState* seed) {
  if (!(x >= 0.0) || !std::isfinite(x))
    throw DomainError("solve_extended_adiabatic: x must be finite and non-negative");
  if (x == 0.0) {
    auto s = make_state(0.0, 0.0, 0.0, p, g);
    s.method = "exact";
    return s;
  }

  const auto roots = enumerate(x, p, g);

  // Without a seed and with several roots, continue from small x so the
  // returned root is the one connected to the x = 0 branch.
  AdiabaticState walked;
  if (!seed && roots.size() > 1) {
    const auto steps = log_grid(std::min(1e-6, 1e-3 * x), x, 200);
    walked = make_state(0.0, 0.0, 0.0, p, g);
    for (std::size_t i = 0; i + 1 < steps.size(); ++i)
      walked = solve_extended_adiabatic(steps[i], p, g, &walked);
    seed = &walked;
  }

  double phi, y;
  if (seed) {
    // Linear extrapolation of the seed in x.
    const double ratio = seed->x > 0.0 ? x / seed->x : 0.0;
    phi = seed->x > 0.0 ? seed->phi_dot * ratio : alpha_beta(p, g.gamma2).beta * x;
    y = seed->x > 0.0 ? seed->y * ratio * ratio : p.f_p * p.f_p * x * x /
                                                       (g.gamma2 * g.gamma2 + p.delta * p.delta);
  } else {
    phi = alpha_beta(p, g.gamma2).beta * x;
    y = p.f_p * p.f_p * x * x / (g.gamma2 * g.gamma2 + p.delta * p.delta);
  }
  const double target_s = d_of(x, y, phi, p, g).imag();

  int iters = 0;
  AdiabaticState found;
  bool ok = false;
  double phi0 = phi, y0 = y;
  if (fixed_point(x, p, g, phi, y, iters)) {
    found = make_state(x, y, phi, p, g);
    found.method = "fixed-point";
    ok = found.residual < 1e-10;
  }
  if (!ok) {
    phi = phi0;
    y = y0;
    if (newton(x, p, g, phi, y, iters)) {
      found = make_state(x, y, phi, p, g);
      found.method = "newton";
      ok = found.residual < 1e-10;
    }
  }
  found.iterations = iters;

  // Root nearest the continuation prediction among all roots.
  const AdiabaticState* nearest = nullptr;
  for (const auto& r : roots)
    if (!nearest || std::abs(r.d_value.imag() - target_s) <
                        std::abs(nearest->d_value.imag() - target_s))
      nearest = &r;

  if (ok && nearest &&
      std::abs(found.d_value.imag() - nearest->d_value.imag()) > 1e-6 * std::abs(found.d_value)) {
    // The iteration landed on a different root than continuity predicts.
    ok = false;
  }
  if (!ok) {
    if (!nearest || !(nearest->residual < 1e-10))
      throw SolverError("solve_extended_adiabatic: no converged solution at x = " +
                            std::to_string(x),
                        nearest ? nearest->residual : found.residual);
    found = *nearest;
  }
  found.n_solutions = static_cast<int>(roots.size());
  return found;
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2) throw DomainError("log_grid: need 0 < lo < hi, n >= 2");
  std::vector<double> out(n);
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

AdiabaticCurve adiabatic_curve(const std::vector<double>& grid, const RwaParams& p,
                               const Damping& g) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0)) throw DomainError("adiabatic_curve: grid values must be >= 0");
    if (i > 0 && !(grid[i] > grid[i - 1]))
      throw DomainError("adiabatic_curve: grid must be strictly increasing");
  }
  AdiabaticCurve c;
  c.grid = grid;
  AdiabaticState prev = make_state(0.0, 0.0, 0.0, p, g);
  for (double x : grid) {
    const auto s = solve_extended_adiabatic(x, p, g, &prev);
    c.gamma_ad.push_back(s.gamma_ad);
    c.phi_dot.push_back(s.phi_dot);
    c.y.push_back(s.y);
    c.d_value.push_back(s.d_value);
    c.validity.push_back(s.gamma_ad < 0.1 * std::abs(s.d_value));
    prev = s;
  }
  return c;
}

ThresholdResult thresholds(const SystemParams& sys, const ThresholdOptions& opt) {
  const auto& p = sys.rwa;
  const auto g = sys.damping();
  if (p.sideband != Sideband::Upper)
    throw DomainError("thresholds: only defined for the upper sideband");
  ThresholdResult res;
  if (p.f_p == 0.0) return res;

  const auto grid = log_grid(opt.x_lo, opt.x_hi, opt.n_grid);
  std::vector<AdiabaticState> states;
  states.reserve(grid.size());
  AdiabaticState prev = make_state(0.0, 0.0, 0.0, p, g);
  for (double x : grid) {
    prev = solve_extended_adiabatic(x, p, g, &prev);
    states.push_back(prev);
  }

  // Γ_ad(x) evaluated with a seed from the nearest grid state on the left.
  auto gamma_at = [&](double x) {
    const auto it = std::upper_bound(grid.begin(), grid.end(), x);
    const std::size_t k = it == grid.begin() ? 0 : static_cast<std::size_t>(it - grid.begin() - 1);
    return solve_extended_adiabatic(x, p, g, &states[k]).gamma_ad;
  };

  std::vector<double> roots;
  auto add_root = [&](double a, double b, double fa, double fb) {
    roots.push_back(detail::bisect(gamma_at, a, b, fa, fb, opt.x_tol));
  };
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double fa = states[i - 1].gamma_ad, fb = states[i].gamma_ad;
    if ((fa < 0.0) != (fb < 0.0)) add_root(grid[i - 1], grid[i], fa, fb);
  }
  // A dip that stays between grid points: refine positive local minima.
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
    const double f = states[i].gamma_ad;
    if (f > 0.0 && f <= states[i - 1].gamma_ad && f <= states[i + 1].gamma_ad) {
      const auto [xm, fm] = detail::golden_min(gamma_at, grid[i - 1], grid[i + 1], opt.x_tol);
      if (fm < 0.0) {
        add_root(grid[i - 1], xm, states[i - 1].gamma_ad, fm);
        add_root(xm, grid[i + 1], fm, states[i + 1].gamma_ad);
      }
    }
  }
  std::sort(roots.begin(), roots.end());
  if (roots.empty()) return res;
  if (roots.size() != 2)
    throw AmbiguityError("thresholds: expected two zero crossings of the decay rate, found " +
                             std::to_string(roots.size()),
                         roots);
  res.exists = true;
  res.x_th = roots[0];
  res.x_st = roots[1];
  res.a_th = amplitude_from_scaled(std::sqrt(res.x_th), sys.modes.mode1, sys.scaling);
  res.a_st = amplitude_from_scaled(std::sqrt(res.x_st), sys.modes.mode1, sys.scaling);
  return res;
}

}  // namespace nlf
