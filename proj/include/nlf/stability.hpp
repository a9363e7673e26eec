#ifndef NLF_STABILITY_HPP
#define NLF_STABILITY_HPP

// Linear stability of stationary points of the slow dynamics in a
// co-rotating frame.

#include <array>
#include <complex>

#include <Eigen/Core>

#include "nlf/params.hpp"
#include "nlf/rwa.hpp"

namespace nlf {

struct StabilityReport {
  bool stable = false;
  bool marginal = false;  // largest relevant real part within the margin of zero
  int n_unstable = 0;     // eigenvalues with real part above the margin
  std::array<std::complex<double>, 4> eigenvalues{};  // sorted by descending real part
  int excluded = -1;      // index into eigenvalues of the dropped neutral mode, or −1
};

/// Exact Jacobian of rwa_rhs (automatic differentiation) at state s, time t.
Eigen::Matrix4d rwa_jacobian(const Vector4& s, const RwaParams& p, const Damping& g,
                             const Drive& drive = {}, double frame_rate = 0.0, double t = 0.0);

/// Classifies a spectrum with margin `margin` on the real parts.  With
/// exclude_neutral the eigenvalue of smallest modulus is ignored; stationary
/// self-sustained cycles carry one such mode from the phase symmetry
/// c₁ → c₁e^{iθ}, c₂ → c₂e^{∓2iθ}.
StabilityReport classify_spectrum(const Eigen::Matrix4d& jac, double margin,
                                  bool exclude_neutral = false);

StabilityReport linear_stability(const Vector4& s, const RwaParams& p, const Damping& g,
                                 const Drive& drive, double frame_rate,
                                 bool exclude_neutral = false);

}  // namespace nlf

#endif  // NLF_STABILITY_HPP
