#include "nlf/response.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <thread>

#include <Eigen/Eigenvalues>

#include "nlf/adiabatic.hpp"
#include "nlf/detail/cubic.hpp"
#include "nlf/detail/roots.hpp"
#include "nlf/errors.hpp"
#include "nlf/rwa.hpp"

namespace nlf {

namespace {

using cd = std::complex<double>;
constexpr double tiny = std::numeric_limits<double>::min();

double curve_origin(double d, const RwaParams& p) { return p.delta - 2.0 * sign(p.sideband) * d; }

// Without cross-Kerr coupling and with either no pump or no self-Kerr of
// mode 2, s is pinned at Δ − 2σd and the drive condition is a cubic in x.
bool pinned_curve(const RwaParams& p) {
  return p.lambda12 == 0.0 && (p.lambda22 == 0.0 || p.f_p == 0.0);
}

void check_params(const RwaParams& p) {
  if (p.lambda12 < 0.0 || p.lambda22 < 0.0)
    throw DomainError("forced response: negative Lambda12 or Lambda22 is not supported");
}

cd w_factor(double d, double x, double y, double s, const RwaParams& p, const Damping& g) {
  const cd z2(g.gamma2, s);
  const cd z2s = sign(p.sideband) > 0 ? std::conj(z2) : z2;
  const cd z1(g.gamma1, d - p.lambda11 * x - p.lambda12 * y);
  return z1 - 2.0 * sign(p.sideband) * p.f_p * p.f_p * x / z2s;
}

ResponseState make_state(double d, double f, double x, double y, double s, const RwaParams& p,
                         const Damping& g) {
  ResponseState st;
  st.s = s;
  const cd w = w_factor(d, x, y, s, p, g);
  st.u1 = cd(0.0, -f) / w;
  const cd z2(g.gamma2, s);
  const cd u1p = sign(p.sideband) > 0 ? std::conj(st.u1) : st.u1;
  st.u2 = cd(0.0, -p.f_p) * u1p * u1p / z2;
  st.u1_sq = x;
  st.u2_sq = y;
  return st;
}

// Sampling of the curve parameter: every s reached by the x-grid of the
// spec'd log scan (all roots of the slaving cubic at each x), plus extras.
std::vector<double> s_samples(double d, const RwaParams& p, const Damping& g,
                              const std::vector<double>& extra) {
  static const std::vector<double> xs = log_grid(1e-10, 1e4, 8000);
  const double c0 = curve_origin(d, p);
  std::vector<double> s;
  s.reserve(xs.size() + extra.size() + 1);
  s.push_back(c0);
  const double fp2 = p.f_p * p.f_p;
  const double l22 = p.lambda22;
  for (double x : xs) {
    const double b = c0 - p.lambda12 * x;
    if (fp2 == 0.0 || l22 == 0.0) {
      const double y = fp2 == 0.0 ? 0.0 : fp2 * x * x / (g.gamma2 * g.gamma2 + b * b);
      s.push_back(b - l22 * y);
      continue;
    }
    for (double y : detail::real_cubic_roots(l22 * l22, -2.0 * b * l22,
                                             g.gamma2 * g.gamma2 + b * b, -fp2 * x * x))
      if (y >= 0.0) s.push_back(b - l22 * y);
  }
  for (double e : extra)
    if (e <= c0) s.push_back(e);
  std::sort(s.begin(), s.end(), std::greater<>());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  return s;
}

struct CurveRoot {
  double s, x, y;
};

// Roots of M(d, s) = f² along the curve, ordered by decreasing s.
std::vector<CurveRoot> curve_roots(double d, double f, const RwaParams& p, const Damping& g,
                                   const std::vector<double>& extra = {}) {
  const double f2 = f * f;
  auto F = [&](double s) { return curve_point(d, s, p, g).m / f2 - 1.0; };
  std::vector<double> ss = s_samples(d, p, g, extra);
  std::vector<double> fs(ss.size());
  for (std::size_t i = 0; i < ss.size(); ++i) fs[i] = F(ss[i]);
  // Make sure the far end lies beyond the last root.
  for (int k = 0; fs.back() < 0.0 && k < 200; ++k) {
    ss.push_back(ss.back() - std::ldexp(g.gamma2, k));
    fs.push_back(F(ss.back()));
  }

  std::vector<double> roots;
  auto refine = [&](double a, double b, double fa, double fb) {
    const double tol = 1e-15 * std::max({std::abs(a), std::abs(b), g.gamma2});
    roots.push_back(detail::bisect(F, a, b, fa, fb, tol));
  };
  for (std::size_t i = 1; i < ss.size(); ++i) {
    if (fs[i] == 0.0) {
      roots.push_back(ss[i]);
      continue;
    }
    if (fs[i - 1] != 0.0 && (fs[i - 1] < 0.0) != (fs[i] < 0.0)) refine(ss[i - 1], ss[i], fs[i - 1], fs[i]);
  }
  // A pair of roots hidden between samples shows up as an extremum of F that
  // approaches zero without crossing.
  for (std::size_t i = 1; i + 1 < ss.size(); ++i) {
    const double a = fs[i - 1], b = fs[i], c = fs[i + 1];
    const bool same = (a < 0.0) == (b < 0.0) && (b < 0.0) == (c < 0.0);
    if (!same) continue;
    const bool peak = b < 0.0 ? (b >= a && b >= c) : (b <= a && b <= c);
    if (!peak) continue;
    const double sgn = b < 0.0 ? -1.0 : 1.0;
    auto h = [&](double s) { return sgn * F(s); };
    // Left and right are swapped because s decreases along the samples.
    const auto [sm, hm] = detail::golden_min(h, ss[i + 1], ss[i - 1],
                                             1e-14 * std::max(std::abs(ss[i]), g.gamma2));
    if (hm < 0.0) {
      const double fm = sgn * hm;
      refine(ss[i - 1], sm, a, fm);
      refine(sm, ss[i + 1], fm, c);
    }
  }
  std::sort(roots.begin(), roots.end(), std::greater<>());
  std::vector<CurveRoot> out;
  for (double s : roots) {
    const auto cp = curve_point(d, s, p, g);
    if (!(cp.x > 0.0)) continue;
    if (!out.empty()) {
      const auto& q = out.back();
      if (std::abs(q.x - cp.x) <= 1e-8 * std::max(q.x, cp.x) &&
          std::abs(q.y - cp.y) <= 1e-8 * std::max({q.y, cp.y, 1e-300}))
        continue;
    }
    out.push_back({s, cp.x, cp.y});
  }
  return out;
}

// Drive condition as a cubic in x when s is pinned.
std::vector<CurveRoot> pinned_roots(double d, double f, const RwaParams& p, const Damping& g) {
  const double s = curve_origin(d, p);
  const cd z2(g.gamma2, s);
  const cd z2s = sign(p.sideband) > 0 ? std::conj(z2) : z2;
  const double yk = p.f_p * p.f_p / std::norm(z2);  // y = yk·x²
  const cd a(g.gamma1, d);
  const cd b = cd(0.0, -p.lambda11) - 2.0 * sign(p.sideband) * p.f_p * p.f_p / z2s;
  // |a + bx|²x − f² = |b|²x³ + 2Re(a b̄)x² + |a|²x − f²
  std::vector<CurveRoot> out;
  for (double x :
       detail::real_cubic_roots(std::norm(b), 2.0 * (a * std::conj(b)).real(), std::norm(a), -f * f))
    if (x > 0.0) out.push_back({s, x, yk * x * x});
  std::sort(out.begin(), out.end(), [](const auto& l, const auto& r) { return l.x < r.x; });
  return out;
}

std::vector<CurveRoot> all_roots(double d, double f, const RwaParams& p, const Damping& g,
                                 const std::vector<double>& extra = {}) {
  check_params(p);
  if (!(f > 0.0)) throw DomainError("stationary_states: f_d1 must be positive");
  return pinned_curve(p) ? pinned_roots(d, f, p, g) : curve_roots(d, f, p, g, extra);
}

std::vector<ResponseState> states_from_roots(const std::vector<CurveRoot>& roots,
                                             const DriveConfig& dc, const RwaParams& p,
                                             const Damping& g) {
  std::vector<ResponseState> out;
  out.reserve(roots.size());
  for (const auto& r : roots) {
    auto st = make_state(dc.detune, dc.f_d1, r.x, r.y, r.s, p, g);
    st.residual = response_residual(st, dc, p, g);
    const auto rep = stability_of_state(st, dc, p, g);
    st.stable = rep.stable;
    st.n_unstable = rep.n_unstable;
    st.max_real_eig = rep.eigenvalues[0].real();
    out.push_back(st);
  }
  return out;
}

double link_cost(const ResponseState& a, const ResponseState& b) {
  return std::abs(std::log(a.u1_sq) - std::log(b.u1_sq)) +
         std::abs(std::log1p(a.u2_sq) - std::log1p(b.u2_sq));
}

struct UnionFind {
  std::vector<int> parent;
  int add() {
    parent.push_back(static_cast<int>(parent.size()));
    return parent.back();
  }
  int find(int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

struct Level {
  double param;
  std::vector<ResponseState> st;
  std::vector<int> ids;
};

template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(n)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += threads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Chooses the adjacent pair (j, j+1) of `big` that has no partner in
// `small`, minimizing the order-preserving matching cost.  Ties go to the
// lower j (lower amplitude).
int align_pair(const std::vector<ResponseState>& small, const std::vector<ResponseState>& big,
               bool& ambiguous) {
  const int n = static_cast<int>(small.size());
  int best = 0;
  double best_cost = std::numeric_limits<double>::infinity(), second = best_cost;
  for (int j = 0; j <= n; ++j) {
    double c = 0.0;
    for (int k = 0; k < n; ++k) c += link_cost(small[k], big[k < j ? k : k + 2]);
    if (c < best_cost) {
      second = best_cost;
      best_cost = c;
      best = j;
    } else if (c < second) {
      second = c;
    }
  }
  ambiguous = n > 0 && std::isfinite(second) && second - best_cost <= 1e-9 * (1.0 + best_cost);
  return best;
}

class SweepLinker {
 public:
  SweepLinker(std::function<std::vector<ResponseState>(double)> solve, double tol)
      : solve_(std::move(solve)), tol_(tol) {}

  void add_level(Level& lv) {
    lv.ids.clear();
    for (std::size_t k = 0; k < lv.st.size(); ++k) lv.ids.push_back(uf.add());
  }

  void link(Level& a, Level& b) {
    const std::size_t na = a.st.size(), nb = b.st.size();
    if (na == nb) {
      for (std::size_t k = 0; k < na; ++k) uf.unite(a.ids[k], b.ids[k]);
      return;
    }
    if (b.param - a.param > tol_) {
      Level m{0.5 * (a.param + b.param), solve_(0.5 * (a.param + b.param)), {}};
      add_level(m);
      link(a, m);
      link(m, b);
      return;
    }
    const bool grows = nb > na;
    Level& small = grows ? a : b;
    Level& big = grows ? b : a;
    if (big.st.size() != small.st.size() + 2) {
      // Several events inside the tolerance: nearest-neighbour fallback.
      ++ambiguous;
      for (std::size_t k = 0; k < small.st.size(); ++k) {
        std::size_t best = 0;
        for (std::size_t q = 1; q < big.st.size(); ++q)
          if (link_cost(small.st[k], big.st[q]) < link_cost(small.st[k], big.st[best])) best = q;
        uf.unite(small.ids[k], big.ids[best]);
      }
      return;
    }
    bool amb = false;
    const int j = align_pair(small.st, big.st, amb);
    if (amb) ++ambiguous;
    for (std::size_t k = 0; k < small.st.size(); ++k)
      uf.unite(small.ids[k], big.ids[k < static_cast<std::size_t>(j) ? k : k + 2]);
    uf.unite(big.ids[j], big.ids[j + 1]);
    Fold fo;
    fo.at = 0.5 * (a.param + b.param);
    fo.count_below = static_cast<int>(na);
    fo.count_above = static_cast<int>(nb);
    fo.lower = big.st[j];
    fo.upper = big.st[j + 1];
    folds.push_back(fo);
    fold_ids.push_back(big.ids[j]);
  }

  UnionFind uf;
  std::vector<Fold> folds;
  std::vector<int> fold_ids;
  int ambiguous = 0;

 private:
  std::function<std::vector<ResponseState>(double)> solve_;
  double tol_;
};

std::vector<double> sweep_grid(double lo, double hi, std::size_t n, const std::vector<double>& extra) {
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i)
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  grid.back() = hi;
  for (double e : extra)
    if (e > lo && e < hi) grid.push_back(e);
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

// Golden-section refinement of a branch maximum: follow the state nearest to
// `ref` across detunings in [lo, hi].
void refine_peak(BranchSummary& b, const ResponseState& ref, double lo, double hi, double f,
                 const RwaParams& p, const Damping& g) {
  auto neg_x = [&](double d) {
    const auto roots = all_roots(d, f, p, g);
    double best_cost = std::numeric_limits<double>::infinity(), x = 0.0;
    for (const auto& r : roots) {
      ResponseState s;
      s.u1_sq = r.x;
      s.u2_sq = r.y;
      const double c = link_cost(ref, s);
      if (c < best_cost) {
        best_cost = c;
        x = r.x;
      }
    }
    return best_cost < 0.5 ? -x : 0.0;
  };
  const auto [d, v] = detail::golden_min(neg_x, lo, hi, 1e-9 * std::max(1.0, std::abs(lo)));
  if (-v > b.x_max) {
    b.x_max = -v;
    b.detune_at_max = d;
  }
}

}  // namespace

CurvePoint curve_point(double d, double s, const RwaParams& p, const Damping& g) {
  CurvePoint cp;
  cp.s = s;
  const double tau = curve_origin(d, p) - s;
  if (tau <= 0.0) return cp;
  const double den = g.gamma2 * g.gamma2 + s * s;
  const double fp2 = p.f_p * p.f_p;
  const double a = p.lambda22 * fp2 / den;
  cp.x = 2.0 * tau / (p.lambda12 + std::sqrt(p.lambda12 * p.lambda12 + 4.0 * a * tau));
  cp.y = fp2 * cp.x * cp.x / den;
  cp.m = std::norm(w_factor(d, cp.x, cp.y, s, p, g)) * cp.x;
  return cp;
}

double response_residual(const ResponseState& st, const DriveConfig& dc, const RwaParams& p,
                         const Damping& g) {
  const double x = std::norm(st.u1), y = std::norm(st.u2);
  const double s = curve_origin(dc.detune, p) - p.lambda12 * x - p.lambda22 * y;
  const double m = std::norm(w_factor(dc.detune, x, y, s, p, g)) * x;
  const double f2 = dc.f_d1 * dc.f_d1;
  const double r_drive = std::abs(m - f2) / f2;
  const double lhs = y * (g.gamma2 * g.gamma2 + s * s), rhs = p.f_p * p.f_p * x * x;
  const double r_slave = std::abs(lhs - rhs) / std::max({lhs, rhs, tiny});
  return std::max(r_drive, r_slave);
}

StabilityReport stability_of_state(const ResponseState& st, const DriveConfig& dc,
                                   const RwaParams& p, const Damping& g) {
  const Vector4 v{st.u1.real(), st.u1.imag(), st.u2.real(), st.u2.imag()};
  return linear_stability(v, p, g, Drive{dc.f_d1, dc.detune}, dc.detune, false);
}

std::vector<ResponseState> stationary_states(const DriveConfig& dc, const RwaParams& p,
                                             const Damping& g) {
  const auto roots = all_roots(dc.detune, dc.f_d1, p, g);
  if (roots.empty())
    throw SolverError("stationary_states: no solution found (internal error)", 0.0);
  return states_from_roots(roots, dc, p, g);
}

int state_count(const DriveConfig& dc, const RwaParams& p, const Damping& g) {
  return static_cast<int>(all_roots(dc.detune, dc.f_d1, p, g).size());
}

SweepResult frequency_sweep(const RwaParams& p, const Damping& g, double f_d1, double detune_lo,
                            double detune_hi, std::size_t n_points, const SweepOptions& opt) {
  if (n_points < 2) throw DomainError("frequency_sweep: need at least two points");
  if (!(detune_hi > detune_lo)) throw DomainError("frequency_sweep: empty detuning range");
  const auto grid = sweep_grid(detune_lo, detune_hi, n_points, opt.extra);
  auto solve = [&](double d) {
    return states_from_roots(all_roots(d, f_d1, p, g), {f_d1, d}, p, g);
  };

  std::vector<Level> levels(grid.size());
  parallel_for(grid.size(), opt.threads, [&](std::size_t i) {
    levels[i].param = grid[i];
    levels[i].st = solve(grid[i]);
  });
  for (const auto& lv : levels)
    if (lv.st.empty()) throw SolverError("frequency_sweep: no solution at a grid point", 0.0);

  SweepLinker linker(solve, opt.fold_tol);
  for (auto& lv : levels) linker.add_level(lv);
  for (std::size_t i = 1; i < levels.size(); ++i) linker.link(levels[i - 1], levels[i]);

  SweepResult res;
  res.ambiguous_links = linker.ambiguous;
  // Compact branch ids in order of first appearance.
  std::vector<int> compact(linker.uf.parent.size(), -1);
  int next = 0;
  auto id_of = [&](int node) {
    const int r = linker.uf.find(node);
    if (compact[r] < 0) compact[r] = next++;
    return compact[r];
  };
  std::vector<std::pair<const ResponseState*, double>> refs;  // argmax state per branch
  for (const auto& lv : levels)
    for (std::size_t k = 0; k < lv.st.size(); ++k) {
      SweepPoint sp{lv.param, lv.st[k]};
      sp.state.branch_id = id_of(lv.ids[k]);
      res.points.push_back(sp);
    }
  std::vector<bool> touches_end(next, false);
  for (std::size_t k = 0; k < levels.front().st.size(); ++k) touches_end[id_of(levels.front().ids[k])] = true;
  for (std::size_t k = 0; k < levels.back().st.size(); ++k) touches_end[id_of(levels.back().ids[k])] = true;

  res.branches.resize(next);
  std::vector<std::size_t> argmax(next, 0);
  for (int b = 0; b < next; ++b) {
    res.branches[b].branch_id = b;
    res.branches[b].isolated = !touches_end[b];
    res.branches[b].param_lo = std::numeric_limits<double>::infinity();
    res.branches[b].param_hi = -std::numeric_limits<double>::infinity();
  }
  for (std::size_t i = 0; i < res.points.size(); ++i) {
    const auto& sp = res.points[i];
    auto& b = res.branches[sp.state.branch_id];
    b.param_lo = std::min(b.param_lo, sp.param);
    b.param_hi = std::max(b.param_hi, sp.param);
    if (sp.state.u1_sq > b.x_max) {
      b.x_max = sp.state.u1_sq;
      b.detune_at_max = sp.param;
      argmax[sp.state.branch_id] = i;
    }
  }
  for (std::size_t k = 0; k < linker.folds.size(); ++k) {
    auto fo = linker.folds[k];
    fo.branch_id = id_of(linker.fold_ids[k]);
    fo.lower.branch_id = fo.upper.branch_id = fo.branch_id;
    res.folds.push_back(fo);
    if (fo.at - detune_lo < 20.0 * g.gamma1 || detune_hi - fo.at < 20.0 * g.gamma1)
      res.window_ok = false;
  }
  for (auto& b : res.branches) {
    if (opt.refine_peaks) {
      const double d0 = res.points[argmax[b.branch_id]].param;
      const auto it = std::lower_bound(grid.begin(), grid.end(), d0);
      const std::size_t i = static_cast<std::size_t>(it - grid.begin());
      if (i > 0 && i + 1 < grid.size())
        refine_peak(b, res.points[argmax[b.branch_id]].state, grid[i - 1], grid[i + 1], f_d1, p, g);
    }
    b.gamma_peak = f_d1 / (2.0 * std::sqrt(b.x_max));
  }
  bool first = true;
  for (const auto& fo : res.folds) {
    if (!res.branches[fo.branch_id].isolated) continue;
    res.has_isolated = true;
    res.omega_l = first ? fo.at : std::min(res.omega_l, fo.at);
    res.omega_h = first ? fo.at : std::max(res.omega_h, fo.at);
    first = false;
  }
  for (const auto& b : res.branches) res.has_isolated = res.has_isolated || b.isolated;
  res.hysteretic = !res.folds.empty();
  return res;
}

SweepResult force_sweep(const RwaParams& p, const Damping& g, double detune, double f_lo,
                        double f_hi, std::size_t n_points, const SweepOptions& opt) {
  if (n_points < 2) throw DomainError("force_sweep: need at least two points");
  if (!(f_lo > 0.0) || !(f_hi > f_lo)) throw DomainError("force_sweep: need 0 < f_lo < f_hi");
  check_params(p);
  SweepResult res;

  // Folds in the drive are the local extrema of M along the curve.
  std::vector<std::pair<double, double>> ext;  // (s, M)
  if (pinned_curve(p)) {
    // M(x) = |b|²x³ + 2Re(a b̄)x² + |a|²x; extrema where M'(x) = 0.
    const double s = curve_origin(detune, p);
    const cd z2(g.gamma2, s);
    const cd z2s = sign(p.sideband) > 0 ? std::conj(z2) : z2;
    const cd a(g.gamma1, detune);
    const cd b = cd(0.0, -p.lambda11) - 2.0 * sign(p.sideband) * p.f_p * p.f_p / z2s;
    const double c3 = std::norm(b), c2 = 2.0 * (a * std::conj(b)).real(), c1 = std::norm(a);
    for (double x : detail::real_cubic_roots(0.0, 3.0 * c3, 2.0 * c2, c1))
      if (x > 0.0) ext.emplace_back(-x, ((c3 * x + c2) * x + c1) * x);
    std::sort(ext.begin(), ext.end(), [](auto& l, auto& r) { return l.first > r.first; });
  } else {
    const auto ss = s_samples(detune, p, g, {});
    std::vector<double> ms(ss.size());
    for (std::size_t i = 0; i < ss.size(); ++i) ms[i] = curve_point(detune, ss[i], p, g).m;
    for (std::size_t i = 1; i + 1 < ss.size(); ++i) {
      const bool mx = ms[i] > ms[i - 1] && ms[i] >= ms[i + 1];
      const bool mn = ms[i] < ms[i - 1] && ms[i] <= ms[i + 1];
      if (!mx && !mn) continue;
      const double sg = mx ? -1.0 : 1.0;
      auto h = [&](double s) { return sg * curve_point(detune, s, p, g).m; };
      const auto [sm, hm] =
          detail::golden_min(h, ss[i + 1], ss[i - 1], 1e-14 * std::max(std::abs(ss[i]), g.gamma2));
      ext.emplace_back(sm, sg * hm);
    }
  }
  for (std::size_t k = 0; k < ext.size(); ++k) {
    Fold fo;
    fo.at = std::sqrt(ext[k].second);
    fo.branch_id = static_cast<int>(k);
    res.folds.push_back(fo);
  }
  res.hysteretic = !ext.empty();

  const auto grid = sweep_grid(f_lo, f_hi, n_points, opt.extra);
  std::vector<std::vector<ResponseState>> sols(grid.size());
  parallel_for(grid.size(), opt.threads, [&](std::size_t i) {
    sols[i] = states_from_roots(all_roots(detune, grid[i], p, g), {grid[i], detune}, p, g);
  });
  int n_branches = static_cast<int>(ext.size()) + 1;
  res.branches.resize(n_branches);
  for (int b = 0; b < n_branches; ++b) {
    res.branches[b].branch_id = b;
    res.branches[b].param_lo = std::numeric_limits<double>::infinity();
    res.branches[b].param_hi = -std::numeric_limits<double>::infinity();
  }
  for (std::size_t i = 0; i < grid.size(); ++i)
    for (auto st : sols[i]) {
      // Monotone piece of M along the curve: folds passed from s = c0.
      const double key = pinned_curve(p) ? -st.u1_sq : st.s;
      int id = 0;
      for (const auto& e : ext)
        if (e.first > key) ++id;
      st.branch_id = id;
      res.points.push_back({grid[i], st});
      auto& b = res.branches[id];
      b.param_lo = std::min(b.param_lo, grid[i]);
      b.param_hi = std::max(b.param_hi, grid[i]);
      if (st.u1_sq > b.x_max) {
        b.x_max = st.u1_sq;
        b.detune_at_max = detune;
      }
    }
  for (auto& b : res.branches)
    b.gamma_peak = b.x_max > 0.0 ? b.param_hi / (2.0 * std::sqrt(b.x_max)) : 0.0;
  // One connected curve: nothing can be isolated in a drive sweep.
  res.has_isolated = false;
  return res;
}

std::string to_string(CriticalKind k) {
  switch (k) {
    case CriticalKind::Minimum: return "minimum";
    case CriticalKind::Saddle: return "saddle";
    case CriticalKind::Maximum: return "maximum";
  }
  return "saddle";
}

std::vector<CriticalPoint> response_critical_points(const RwaParams& p, const Damping& g,
                                                    double detune_lo, double detune_hi) {
  check_params(p);
  if (!(detune_hi > detune_lo)) throw DomainError("response_critical_points: empty range");
  if (pinned_curve(p)) return {};
  // L(d, t) = ln M(d, s) with s = Δ − 2σd − e^t.
  auto L = [&](double d, double t) {
    const double s = curve_origin(d, p) - std::exp(t);
    return std::log(curve_point(d, s, p, g).m);
  };
  constexpr int nd = 241, nt = 361;
  const double t_lo = std::log(1e-4), t_hi = std::log(1e7);
  const double hd = (detune_hi - detune_lo) / (nd - 1), ht = (t_hi - t_lo) / (nt - 1);
  std::vector<double> val(nd * nt);
  for (int i = 0; i < nd; ++i)
    for (int j = 0; j < nt; ++j) val[i * nt + j] = L(detune_lo + i * hd, t_lo + j * ht);
  auto at = [&](int i, int j) { return val[i * nt + j]; };

  std::vector<double> gd(nd * nt, 0.0), gt(nd * nt, 0.0);
  for (int i = 1; i + 1 < nd; ++i)
    for (int j = 1; j + 1 < nt; ++j) {
      gd[i * nt + j] = at(i + 1, j) - at(i - 1, j);
      gt[i * nt + j] = at(i, j + 1) - at(i, j - 1);
    }

  auto grad_hess = [&](double d, double t, Eigen::Vector2d& gr, Eigen::Matrix2d& h) {
    const double ed = 1e-4 * std::max(1.0, std::abs(d)), et = 1e-4;
    const double f0 = L(d, t);
    const double fpd = L(d + ed, t), fmd = L(d - ed, t);
    const double fpt = L(d, t + et), fmt = L(d, t - et);
    const double fpp = L(d + ed, t + et), fpm = L(d + ed, t - et);
    const double fmp = L(d - ed, t + et), fmm = L(d - ed, t - et);
    gr << (fpd - fmd) / (2 * ed), (fpt - fmt) / (2 * et);
    h(0, 0) = (fpd - 2 * f0 + fmd) / (ed * ed);
    h(1, 1) = (fpt - 2 * f0 + fmt) / (et * et);
    h(0, 1) = h(1, 0) = (fpp - fpm - fmp + fmm) / (4 * ed * et);
  };

  std::vector<CriticalPoint> out;
  std::vector<std::pair<double, double>> seen;
  for (int i = 1; i + 2 < nd; ++i)
    for (int j = 1; j + 2 < nt; ++j) {
      auto mixed = [&](const std::vector<double>& gr) {
        const double a = gr[i * nt + j], b = gr[(i + 1) * nt + j], c = gr[i * nt + j + 1],
                     e = gr[(i + 1) * nt + j + 1];
        const double lo = std::min({a, b, c, e}), hi = std::max({a, b, c, e});
        return lo <= 0.0 && hi >= 0.0;
      };
      if (!mixed(gd) || !mixed(gt)) continue;
      double d = detune_lo + (i + 0.5) * hd, t = t_lo + (j + 0.5) * ht;
      bool ok = false;
      for (int it = 0; it < 60; ++it) {
        Eigen::Vector2d gr;
        Eigen::Matrix2d h;
        grad_hess(d, t, gr, h);
        const Eigen::Vector2d step = h.fullPivLu().solve(-gr);
        if (!step.allFinite()) break;
        d += std::clamp(step[0], -hd, hd);
        t += std::clamp(step[1], -ht, ht);
        if (std::abs(d - (detune_lo + (i + 0.5) * hd)) > 3 * hd ||
            std::abs(t - (t_lo + (j + 0.5) * ht)) > 3 * ht)
          break;
        if (std::abs(step[0]) < 1e-11 * std::max(1.0, std::abs(d)) && std::abs(step[1]) < 1e-11) {
          ok = true;
          break;
        }
      }
      if (!ok) continue;
      bool dup = false;
      for (const auto& [sd, st] : seen)
        if (std::abs(sd - d) < 1e-6 * std::max(1.0, std::abs(d)) && std::abs(st - t) < 1e-6) dup = true;
      if (dup) continue;
      seen.emplace_back(d, t);
      Eigen::Vector2d gr;
      Eigen::Matrix2d h;
      grad_hess(d, t, gr, h);
      const Eigen::Vector2d ev = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(h).eigenvalues();
      CriticalPoint cp;
      cp.detune = d;
      cp.s = curve_origin(d, p) - std::exp(t);
      const auto pt = curve_point(d, cp.s, p, g);
      cp.x = pt.x;
      cp.y = pt.y;
      cp.f_d1 = std::sqrt(pt.m);
      cp.kind = ev[0] > 0.0 ? CriticalKind::Minimum
                            : (ev[1] < 0.0 ? CriticalKind::Maximum : CriticalKind::Saddle);
      out.push_back(cp);
    }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.f_d1 < b.f_d1; });
  return out;
}

MergeResult locate_branch_merge(const RwaParams& p, const Damping& g, double detune_lo,
                                double detune_hi, double f_lo, double f_hi, double rel_tol,
                                std::size_t sweep_points, unsigned threads) {
  if (!(f_lo > 0.0) || !(f_hi > f_lo)) throw DomainError("locate_branch_merge: need 0 < f_lo < f_hi");
  MergeResult res;
  const auto cps = response_critical_points(p, g, detune_lo, detune_hi);
  SweepOptions so;
  so.threads = threads;
  so.refine_peaks = false;
  for (const auto& cp : cps) {
    if (cp.kind != CriticalKind::Saddle || cp.f_d1 <= f_lo || cp.f_d1 >= f_hi) continue;
    so.extra = {cp.detune};
    if (!frequency_sweep(p, g, f_lo, detune_lo, detune_hi, sweep_points, so).has_isolated) continue;

    // Near the saddle the line d = ω_c crosses two extra states just below
    // the merge and none just above; bisect on that count.
    const std::vector<double> extra{cp.s};
    auto count = [&](double f) {
      return static_cast<int>(all_roots(cp.detune, f, p, g, extra).size());
    };
    double a = cp.f_d1 * (1.0 - 1e-5), b = cp.f_d1 * (1.0 + 1e-5);
    const int n_lo = count(a), n_hi = count(b);
    if (n_lo != n_hi + 2) continue;
    int steps = 0;
    while ((b - a) > rel_tol * 0.5 * (a + b) && steps < 200) {
      const double m = 0.5 * (a + b);
      (count(m) == n_lo ? a : b) = m;
      ++steps;
    }
    res.found = true;
    res.f_d1_critical = 0.5 * (a + b);
    res.f_d1_saddle = cp.f_d1;
    res.omega_c = cp.detune;
    res.x_c = cp.x;
    res.bisection_steps = steps;
    // Drives 0.01% either side of the merge must straddle the change of
    // topology in full frequency sweeps.
    res.isolated_below =
        frequency_sweep(p, g, res.f_d1_critical * (1.0 - 1e-4), detune_lo, detune_hi, sweep_points, so)
            .has_isolated;
    res.isolated_above =
        frequency_sweep(p, g, res.f_d1_critical * (1.0 + 1e-4), detune_lo, detune_hi, sweep_points, so)
            .has_isolated;
    res.normal_form_ok = res.isolated_below && !res.isolated_above;
    return res;
  }
  return res;
}

GammaPeakCurve gamma_peak_curve(const RwaParams& p, const Damping& g,
                                const std::vector<double>& f_d1_values, double detune_lo,
                                double detune_hi, std::size_t n_points, const SweepOptions& opt) {
  GammaPeakCurve out;
  for (double f : f_d1_values) {
    const auto sw = frequency_sweep(p, g, f, detune_lo, detune_hi, n_points, opt);
    for (const auto& b : sw.branches) out.samples.push_back({f, b.branch_id, b.isolated, b.gamma_peak});
    if (sw.has_isolated) out.multivalued = true;
  }
  // Interval ends from the critical points: a minimum of M gives birth to the
  // isolated branch, the next saddle above it merges it with the main branch.
  if (!pinned_curve(p)) {
    const auto cps = response_critical_points(p, g, detune_lo, detune_hi);
    for (const auto& mn : cps) {
      if (mn.kind != CriticalKind::Minimum) continue;
      double merge = std::numeric_limits<double>::infinity();
      for (const auto& sd : cps)
        if (sd.kind == CriticalKind::Saddle && sd.f_d1 > mn.f_d1) merge = std::min(merge, sd.f_d1);
      if (std::isfinite(merge)) {
        out.multivalued = true;
        out.multi_lo = mn.f_d1;
        out.multi_hi = merge;
        break;
      }
    }
  }
  return out;
}

SharpeningReport peak_sharpening_check(const RwaParams& p, const Damping& g, double f_small,
                                       double f_large, double detune_lo, double detune_hi,
                                       std::size_t n_points, const SweepOptions& opt) {
  if (!(f_small > 0.0) || !(f_large > f_small))
    throw DomainError("peak_sharpening_check: need 0 < f_small < f_large");
  SharpeningReport r;
  r.drive_ratio = f_large / f_small;
  const auto a = frequency_sweep(p, g, f_small, detune_lo, detune_hi, n_points, opt);
  const auto b = frequency_sweep(p, g, f_large, detune_lo, detune_hi, n_points, opt);
  auto peak = [](const SweepResult& s) {
    double x = 0.0;
    for (const auto& br : s.branches) x = std::max(x, br.x_max);
    return std::sqrt(x);
  };
  r.peak_ratio = peak(b) / peak(a);
  r.min_pointwise = std::numeric_limits<double>::infinity();
  r.max_pointwise = 0.0;
  // Points are stored level by level in the same detuning order.
  auto singles = [](const SweepResult& s) {
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      const bool alone = (i == 0 || s.points[i - 1].param != s.points[i].param) &&
                         (i + 1 == s.points.size() || s.points[i + 1].param != s.points[i].param);
      if (alone) out.emplace_back(s.points[i].param, std::sqrt(s.points[i].state.u1_sq));
    }
    return out;
  };
  const auto sa = singles(a), sb = singles(b);
  std::size_t j = 0;
  for (const auto& [d, amp] : sa) {
    while (j < sb.size() && sb[j].first < d) ++j;
    if (j < sb.size() && sb[j].first == d) {
      const double ratio = sb[j].second / amp;
      r.min_pointwise = std::min(r.min_pointwise, ratio);
      r.max_pointwise = std::max(r.max_pointwise, ratio);
    }
  }
  return r;
}

}  // namespace nlf
