#include "nlf/stability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/AutoDiff>

#include "nlf/errors.hpp"

namespace nlf {

Eigen::Matrix4d rwa_jacobian(const Vector4& s, const RwaParams& p, const Damping& g,
                             const Drive& drive, double frame_rate, double t) {
  using AD = Eigen::AutoDiffScalar<Eigen::Vector4d>;
  Vec4<AD> x;
  for (int i = 0; i < 4; ++i) x[i] = AD(s[i], 4, i);
  const Vec4<AD> f = rwa_rhs<AD>(x, t, p, g, drive, frame_rate);
  Eigen::Matrix4d jac;
  for (int i = 0; i < 4; ++i) jac.row(i) = f[i].derivatives().transpose();
  return jac;
}

StabilityReport classify_spectrum(const Eigen::Matrix4d& jac, double margin, bool exclude_neutral) {
  if (!jac.allFinite()) throw SolverError("stability: non-finite Jacobian", 0.0);
  Eigen::EigenSolver<Eigen::Matrix4d> es(jac, false);
  if (es.info() != Eigen::Success) throw SolverError("stability: eigenvalue iteration failed", 0.0);

  StabilityReport r;
  for (int i = 0; i < 4; ++i) r.eigenvalues[i] = es.eigenvalues()[i];
  std::sort(r.eigenvalues.begin(), r.eigenvalues.end(),
            [](const auto& a, const auto& b) {
              if (a.real() != b.real()) return a.real() > b.real();
              return a.imag() > b.imag();
            });
  if (exclude_neutral) {
    int k = 0;
    for (int i = 1; i < 4; ++i)
      if (std::abs(r.eigenvalues[i]) < std::abs(r.eigenvalues[k])) k = i;
    r.excluded = k;
  }
  double max_re = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 4; ++i) {
    if (i == r.excluded) continue;
    const double re = r.eigenvalues[i].real();
    max_re = std::max(max_re, re);
    if (re > margin) ++r.n_unstable;
  }
  r.stable = max_re < -margin;
  r.marginal = std::abs(max_re) <= margin;
  return r;
}

StabilityReport linear_stability(const Vector4& s, const RwaParams& p, const Damping& g,
                                 const Drive& drive, double frame_rate, bool exclude_neutral) {
  return classify_spectrum(rwa_jacobian(s, p, g, drive, frame_rate), 1e-9 * g.gamma2,
                           exclude_neutral);
}

}  // namespace nlf
