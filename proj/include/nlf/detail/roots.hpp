#ifndef NLF_DETAIL_ROOTS_HPP
#define NLF_DETAIL_ROOTS_HPP

#include <cmath>
#include <utility>

namespace nlf::detail {

/// Bisection on a sign-changing bracket [a, b] with f(a) = fa, f(b) = fb.
/// Stops when the bracket is narrower than xtol or cannot be split further.
template <class F>
double bisect(F&& f, double a, double b, double fa, double fb, double xtol, int max_iter = 400) {
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  for (int i = 0; i < max_iter; ++i) {
    const double m = 0.5 * (a + b);
    if (!(std::abs(b - a) > xtol) || m == a || m == b) return m;
    const double fm = f(m);
    if (fm == 0.0) return m;
    if ((fm < 0.0) == (fa < 0.0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
      fb = fm;
    }
  }
  return 0.5 * (a + b);
}

/// Golden-section search for a minimum of f on [a, b].  Returns (x, f(x)).
template <class F>
std::pair<double, double> golden_min(F&& f, double a, double b, double xtol, int max_iter = 200) {
  const double r = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - r * (b - a);
  double d = a + r * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < max_iter && std::abs(b - a) > xtol; ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - r * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + r * (b - a);
      fd = f(d);
    }
  }
  return fc < fd ? std::pair{c, fc} : std::pair{d, fd};
}

}  // namespace nlf::detail

#endif  // NLF_DETAIL_ROOTS_HPP
