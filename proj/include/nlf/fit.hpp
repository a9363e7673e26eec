#ifndef NLF_FIT_HPP
#define NLF_FIT_HPP

#include <span>

#include "nlf/params.hpp"

namespace nlf {

/// Ordinary least squares y = slope·x + intercept.  Throws FitError when
/// fewer than two points are given or all abscissas coincide.
LineFit fit_line(std::span<const double> x, std::span<const double> y);

/// Least squares y = slope·x (no intercept).
LineFit fit_through_origin(std::span<const double> x, std::span<const double> y);

}  // namespace nlf

#endif  // NLF_FIT_HPP
