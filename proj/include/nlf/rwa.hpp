#ifndef NLF_RWA_HPP
#define NLF_RWA_HPP

// Slow-amplitude dynamics of the pumped mode pair in the rotating frame.
//
// State vectors hold (Re v₁, Im v₁, Re v₂, Im v₂).  The right-hand side is
// written in real arithmetic and templated on the scalar type so the same
// code serves the integrators (double) and the Jacobians
// (Eigen::AutoDiffScalar).

#include <cmath>
#include <complex>

#include <Eigen/Core>

#include "nlf/params.hpp"

namespace nlf {

template <typename Scalar>
using Vec4 = Eigen::Matrix<Scalar, 4, 1>;

using Vector4 = Vec4<double>;

struct RwaState {
  std::complex<double> v1;
  std::complex<double> v2;
  double t = 0.0;

  Vector4 vec() const { return {v1.real(), v1.imag(), v2.real(), v2.imag()}; }
  static RwaState from_vec(const Vector4& s, double t) {
    return {{s[0], s[1]}, {s[2], s[3]}, t};
  }
};

/// Resonant force on mode 1: amplitude f_d1 (1/s) at detuning ω_d1 − ω₁.
struct Drive {
  double f_d1 = 0.0;
  double detune = 0.0;
};

/// Time derivative of the slow amplitudes.
///
/// `frame_rate` δ moves to the frame v₁ = c₁e^{iδt}, v₂ = c₂e^{∓2iδt}
/// (upper/lower sideband).  With δ equal to the drive detuning the driven
/// system is autonomous; with δ = 0 it is the plain rotating frame.
template <typename Scalar>
Vec4<Scalar> rwa_rhs(const Vec4<Scalar>& s, double t, const RwaParams& p, const Damping& g,
                     const Drive& drive = {}, double frame_rate = 0.0) {
  using std::cos;
  using std::sin;
  const Scalar& a = s[0];
  const Scalar& b = s[1];
  const Scalar& c = s[2];
  const Scalar& e = s[3];
  const Scalar n1 = a * a + b * b;
  const Scalar n2 = c * c + e * e;
  const int sb = sign(p.sideband);

  // Frequency pulls: mode 1 sees Λ₁₁|v₁|² + Λ₁₂|v₂|² − δ, mode 2 sees
  // −Δ + Λ₁₂|v₁|² + Λ₂₂|v₂|² ± 2δ.
  const Scalar w1 = p.lambda11 * n1 + p.lambda12 * n2 - frame_rate;
  const Scalar w2 = -p.delta + p.lambda12 * n1 + p.lambda22 * n2 + 2.0 * sb * frame_rate;

  Vec4<Scalar> out;
  out[0] = -g.gamma1 * a - w1 * b;
  out[1] = -g.gamma1 * b + w1 * a;
  out[2] = -g.gamma2 * c - w2 * e;
  out[3] = -g.gamma2 * e + w2 * c;

  const double fp = p.f_p;
  if (sb > 0) {
    // −2i f_p v₁* v₂*  and  −i f_p v₁*²
    const Scalar pr = a * c - b * e;
    const Scalar pi = a * e + b * c;
    out[0] += -2.0 * fp * pi;
    out[1] += -2.0 * fp * pr;
    out[2] += -2.0 * fp * a * b;
    out[3] += -fp * (a * a - b * b);
  } else {
    // −2i f_p v₁* v₂  and  −i f_p v₁²
    const Scalar pr = a * c + b * e;
    const Scalar pi = a * e - b * c;
    out[0] += 2.0 * fp * pi;
    out[1] += -2.0 * fp * pr;
    out[2] += 2.0 * fp * a * b;
    out[3] += -fp * (a * a - b * b);
  }

  if (drive.f_d1 != 0.0) {
    // −i f_d1 e^{iθ}, θ = (detune − δ)t
    const double theta = (drive.detune - frame_rate) * t;
    out[0] += drive.f_d1 * sin(theta);
    out[1] += -drive.f_d1 * cos(theta);
  }
  return out;
}

/// H = −Δ|v₂|² + Λ₁₂|v₁|²|v₂|² + ½Λ₁₁|v₁|⁴ + ½Λ₂₂|v₂|⁴ − f_p(v₁²v₂^(∗) + c.c.),
/// with v₂ conjugated in the pump term for the lower sideband.
template <typename Scalar>
Scalar rwa_hamiltonian(const Vec4<Scalar>& s, const RwaParams& p) {
  const Scalar& a = s[0];
  const Scalar& b = s[1];
  const Scalar& c = s[2];
  const Scalar& e = s[3];
  const Scalar n1 = a * a + b * b;
  const Scalar n2 = c * c + e * e;
  // Re(v₁²) and Im(v₁²)
  const Scalar qr = a * a - b * b;
  const Scalar qi = 2.0 * a * b;
  const Scalar pump = sign(p.sideband) > 0 ? (qr * c - qi * e) : (qr * c + qi * e);
  return -p.delta * n2 + p.lambda12 * n1 * n2 + 0.5 * p.lambda11 * n1 * n1 +
         0.5 * p.lambda22 * n2 * n2 - 2.0 * p.f_p * pump;
}

inline double rwa_hamiltonian(const RwaState& s, const RwaParams& p) {
  return rwa_hamiltonian<double>(s.vec(), p);
}

inline RwaState rwa_rhs(const RwaState& s, const RwaParams& p, const Damping& g,
                        const Drive& drive = {}) {
  return RwaState::from_vec(rwa_rhs<double>(s.vec(), s.t, p, g, drive), s.t);
}

}  // namespace nlf

#endif  // NLF_RWA_HPP
