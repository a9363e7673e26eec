#ifndef NLF_ODE_HPP
#define NLF_ODE_HPP

// Explicit Runge–Kutta integrators on fixed-size Eigen vectors.
//
// dormand_prince: adaptive 5(4) pair with the 4th-order continuous
// extension, sampled on a uniform output grid.
// rk4_fixed: classical fixed-step RK4 for the fast full equations.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>

#include <Eigen/Core>

#include "nlf/errors.hpp"

namespace nlf {

struct StepControl {
  double rtol = 1e-10;
  double atol = 1e-12;
  double h_init = 0.0;  // 0 picks a starting step automatically
  double h_max = std::numeric_limits<double>::infinity();
  double h_min_rel = 1e-14;  // underflow threshold relative to max(|t|, span)
  std::size_t max_steps = 50'000'000;
};

struct IntegrationStats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t rhs_calls = 0;
  double last_error = 0.0;  // last accepted scaled error norm
};

namespace detail {

template <class Vec>
double scaled_norm(const Vec& err, const Vec& y0, const Vec& y1, const StepControl& c) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < err.size(); ++i) {
    const double sc = c.atol + c.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    const double r = err[i] / sc;
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(err.size()));
}

}  // namespace detail

/// Integrates y' = f(t, y) from t0 to t1 and calls observe(t, y) at
/// t0, t0 + dt, ... (and at t1 if it does not fall on the grid).  Returns
/// the state at t1.  Throws SolverError when the step size underflows.
template <class Vec, class Rhs, class Observer>
Vec dormand_prince(Rhs&& f, Vec y, double t0, double t1, double dt, Observer&& observe,
                   const StepControl& ctl = {}, IntegrationStats* stats = nullptr) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                          a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  static constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                          d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                          d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

  IntegrationStats local;
  IntegrationStats& st = stats ? *stats : local;
  const double span = t1 - t0;
  if (!(span > 0.0)) throw DomainError("dormand_prince: horizon must be positive");
  if (!(dt > 0.0)) throw DomainError("dormand_prince: sample interval must be positive");

  double t = t0;
  Vec k1 = f(t, y);
  ++st.rhs_calls;
  double h = ctl.h_init > 0.0 ? ctl.h_init : std::min(span, ctl.h_max);
  if (ctl.h_init <= 0.0) {
    // Hairer's heuristic first step from the derivative scale.
    double d0 = 0.0, d1n = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      const double sc = ctl.atol + ctl.rtol * std::abs(y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      d1n += (k1[i] / sc) * (k1[i] / sc);
    }
    d0 = std::sqrt(d0 / y.size());
    d1n = std::sqrt(d1n / y.size());
    h = (d0 < 1e-5 || d1n < 1e-5) ? 1e-6 : 0.01 * d0 / d1n;
    h = std::min({h, span, ctl.h_max});
  }

  std::size_t next_sample = 0;
  auto sample_time = [&](std::size_t k) { return t0 + static_cast<double>(k) * dt; };
  observe(t, y);
  next_sample = 1;

  while (t < t1) {
    if (st.accepted + st.rejected >= ctl.max_steps)
      throw SolverError("dormand_prince: step budget exhausted", st.last_error);
    const bool last = t + h >= t1;
    if (last) h = t1 - t;
    const double h_min = ctl.h_min_rel * std::max(std::abs(t), std::abs(span));
    if (h < h_min) {
      std::ostringstream os;
      os << "integrator step size underflow at t=" << t << " (h=" << h << "); state:";
      for (Eigen::Index i = 0; i < y.size(); ++i) os << ' ' << y[i];
      throw SolverError(os.str(), st.last_error);
    }

    const Vec k2 = f(t + c2 * h, (y + h * (a21 * k1)).eval());
    const Vec k3 = f(t + c3 * h, (y + h * (a31 * k1 + a32 * k2)).eval());
    const Vec k4 = f(t + c4 * h, (y + h * (a41 * k1 + a42 * k2 + a43 * k3)).eval());
    const Vec k5 = f(t + c5 * h, (y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)).eval());
    const Vec k6 =
        f(t + h, (y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5)).eval());
    const Vec y_new = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    const Vec k7 = f(t + h, y_new);
    st.rhs_calls += 6;

    const Vec err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double en = detail::scaled_norm(err, y, y_new, ctl);
    if (!std::isfinite(en)) {
      ++st.rejected;
      h *= 0.2;
      continue;
    }
    if (en <= 1.0) {
      const double t_new = last ? t1 : t + h;
      // Continuous extension coefficients for samples inside (t, t_new].
      const Vec ydiff = y_new - y;
      const Vec bspl = h * k1 - ydiff;
      const Vec r4 = ydiff - h * k7 - bspl;
      const Vec r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
      while (true) {
        const double ts = sample_time(next_sample);
        if (ts > t_new * (1.0 + 1e-15) + 1e-300) break;
        const double th = (ts - t) / h;
        const double th1 = 1.0 - th;
        const Vec ys = y + th * (ydiff + th1 * (bspl + th * (r4 + th1 * r5)));
        observe(ts, ys);
        ++next_sample;
      }
      t = t_new;
      y = y_new;
      k1 = k7;
      ++st.accepted;
      st.last_error = en;
      if (last) break;
      const double fac = std::clamp(0.9 * std::pow(std::max(en, 1e-10), -0.2), 0.2, 5.0);
      h = std::min(h * fac, ctl.h_max);
    } else {
      ++st.rejected;
      h *= std::clamp(0.9 * std::pow(en, -0.2), 0.1, 0.9);
    }
  }
  // Horizon not on the sample grid: emit the end point too.
  if (sample_time(next_sample - 1) < t1 * (1.0 - 1e-15)) observe(t1, y);
  return y;
}

/// Classical RK4 with n_steps of size h; observe(t, y) every `stride` steps
/// (and at the start).
template <class Vec, class Rhs, class Observer>
Vec rk4_fixed(Rhs&& f, Vec y, double t0, double h, std::size_t n_steps, std::size_t stride,
              Observer&& observe) {
  double t = t0;
  observe(t, y);
  for (std::size_t i = 1; i <= n_steps; ++i) {
    const Vec k1 = f(t, y);
    const Vec k2 = f(t + 0.5 * h, (y + 0.5 * h * k1).eval());
    const Vec k3 = f(t + 0.5 * h, (y + 0.5 * h * k2).eval());
    const Vec k4 = f(t + h, (y + h * k3).eval());
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t = t0 + static_cast<double>(i) * h;
    if (stride > 0 && i % stride == 0) observe(t, y);
  }
  return y;
}

}  // namespace nlf

#endif  // NLF_ODE_HPP
