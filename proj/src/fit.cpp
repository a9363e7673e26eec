#include "nlf/fit.hpp"

#include <algorithm>
#include <cmath>

#include "nlf/errors.hpp"

namespace nlf {

namespace {

void finish(LineFit& fit, std::span<const double> x, std::span<const double> y) {
  fit.n = x.size();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (fit.slope * x[i] + fit.intercept);
    fit.rss += r * r;
    fit.max_abs_residual = std::max(fit.max_abs_residual, std::abs(r));
  }
}

}  // namespace

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw FitError("fit_line: size mismatch");
  if (x.size() < 2) throw FitError("fit_line: need at least two points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw FitError("fit_line: non-finite data");
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  // Centered sums keep the slope accurate when |x| is large (e.g. m²-scale
  // abscissas against rad/s shifts).
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const double scale = std::max(std::abs(mx), 1e-300);
  if (sxx <= 0.0 || std::sqrt(sxx / n) <= 1e-14 * scale)
    throw FitError("fit_line: degenerate abscissas");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  finish(fit, x, y);
  return fit;
}

LineFit fit_through_origin(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw FitError("fit_through_origin: size mismatch");
  if (x.empty()) throw FitError("fit_through_origin: no data");
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  if (sxx <= 0.0) throw FitError("fit_through_origin: degenerate abscissas");
  LineFit fit;
  fit.slope = sxy / sxx;
  finish(fit, x, y);
  return fit;
}

}  // namespace nlf
