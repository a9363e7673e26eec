#ifndef NLF_DETAIL_CUBIC_HPP
#define NLF_DETAIL_CUBIC_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace nlf::detail {

/// Real roots of a3·x³ + a2·x² + a1·x + a0 = 0 in ascending order, polished
/// by Newton steps.  Lower-degree cases are handled when leading
/// coefficients vanish.
inline std::vector<double> real_cubic_roots(double a3, double a2, double a1, double a0) {
  std::vector<double> r;
  auto polish = [&](double x) {
    for (int i = 0; i < 4; ++i) {
      const double f = ((a3 * x + a2) * x + a1) * x + a0;
      const double df = (3.0 * a3 * x + 2.0 * a2) * x + a1;
      if (df == 0.0) break;
      const double nx = x - f / df;
      if (!std::isfinite(nx)) break;
      if (std::abs(nx - x) <= 1e-16 * std::abs(x)) {
        x = nx;
        break;
      }
      x = nx;
    }
    return x;
  };
  if (a3 == 0.0) {
    if (a2 == 0.0) {
      if (a1 != 0.0) r.push_back(-a0 / a1);
      return r;
    }
    const double disc = a1 * a1 - 4.0 * a2 * a0;
    if (disc < 0.0) return r;
    const double q = -0.5 * (a1 + std::copysign(std::sqrt(disc), a1));
    if (q != 0.0) r.push_back(a0 / q);
    r.push_back(q / a2);
    if (q == 0.0) r.push_back(0.0);
    std::sort(r.begin(), r.end());
    return r;
  }
  const double b = a2 / a3, c = a1 / a3, d = a0 / a3;
  const double q = (b * b - 3.0 * c) / 9.0;
  const double rr = (2.0 * b * b * b - 9.0 * b * c + 27.0 * d) / 54.0;
  const double q3 = q * q * q;
  if (rr * rr < q3) {
    const double th = std::acos(std::clamp(rr / std::sqrt(q3), -1.0, 1.0));
    const double m = -2.0 * std::sqrt(q);
    for (int k = 0; k < 3; ++k)
      r.push_back(polish(m * std::cos((th + 2.0 * std::numbers::pi * (k - 1)) / 3.0) - b / 3.0));
  } else {
    const double aa = -std::copysign(std::cbrt(std::abs(rr) + std::sqrt(rr * rr - q3)), rr);
    const double bb = aa == 0.0 ? 0.0 : q / aa;
    r.push_back(polish(aa + bb - b / 3.0));
  }
  std::sort(r.begin(), r.end());
  return r;
}

}  // namespace nlf::detail

#endif  // NLF_DETAIL_CUBIC_HPP
