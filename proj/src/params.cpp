#include "nlf/params.hpp"

#include <cmath>

#include "nlf/errors.hpp"
#include "nlf/fit.hpp"

namespace nlf {

namespace {

void require_finite(double v, const std::string& name) {
  if (!std::isfinite(v)) throw DomainError(name + " is not finite");
}

void require_positive(double v, const std::string& name) {
  require_finite(v, name);
  if (v <= 0.0) throw DomainError(name + " must be positive");
}

}  // namespace

std::string to_string(Sideband s) { return s == Sideband::Upper ? "upper" : "lower"; }

Sideband sideband_from_string(const std::string& s) {
  if (s == "upper") return Sideband::Upper;
  if (s == "lower") return Sideband::Lower;
  throw ConfigError("rwa.sideband", "expected 'upper' or 'lower', got '" + s + "'");
}

SystemParams paper_device() {
  SystemParams s;
  s.modes.mode1 = {272599.72, 3.26, 7.62e-11};
  s.modes.mode2 = {9942136.19, 187.57, 5e-13};
  s.scaling.c_sc = 1e-21;
  s.rwa.lambda11 = 2.201;
  s.rwa.lambda22 = 1627.7;
  s.rwa.lambda12 = 33.234;
  s.rwa.f_p = 18.332;
  s.rwa.delta = hz_to_rad(-35.0);
  s.rwa.sideband = Sideband::Upper;
  return s;
}

std::vector<std::string> preset_names() { return {"paper-device"}; }

SystemParams preset(const std::string& name) {
  if (name == "paper-device") return paper_device();
  throw ConfigError("preset", "unknown preset '" + name + "'");
}

void validate(const ModeParams& m, const std::string& where) {
  require_positive(m.omega, where + ".omega");
  require_positive(m.gamma, where + ".gamma");
  require_positive(m.mass, where + ".mass");
}

void validate(const ModePair& m) {
  validate(m.mode1, "mode1");
  validate(m.mode2, "mode2");
  if (m.mode2.omega <= m.mode1.omega) throw DomainError("mode2.omega must exceed mode1.omega");
  if (m.mode2.gamma <= m.mode1.gamma) throw DomainError("mode2.gamma must exceed mode1.gamma");
}

void validate(const ScalingConfig& sc) { require_positive(sc.c_sc, "scaling.c_sc"); }

void validate(const RwaParams& p, double omega1) {
  require_finite(p.lambda11, "rwa.lambda11");
  require_finite(p.lambda12, "rwa.lambda12");
  require_finite(p.lambda22, "rwa.lambda22");
  require_finite(p.f_p, "rwa.f_p");
  require_finite(p.delta, "rwa.delta");
  if (p.f_p < 0.0) throw DomainError("rwa.f_p must be non-negative");
  if (p.lambda22 < 0.0) throw DomainError("rwa.lambda22 must be non-negative");
  if (std::abs(p.delta) >= omega1 / 100.0)
    throw DomainError("rwa.delta must be small compared with omega1");
}

void validate(const SystemParams& s) {
  validate(s.modes);
  validate(s.scaling);
  validate(s.rwa, s.modes.mode1.omega);
}

RwaParams scaled_params_from_raw(const RawCouplings& raw, const ModePair& modes,
                                 const ScalingConfig& sc, double delta, Sideband sideband) {
  require_finite(raw.gamma_disp, "raw.gamma_disp");
  require_finite(raw.gamma1, "raw.gamma1");
  require_finite(raw.gamma2, "raw.gamma2");
  require_finite(raw.big_f_p, "raw.big_f_p");
  validate(modes.mode1, "mode1");
  validate(modes.mode2, "mode2");
  validate(sc);
  const auto& [w1, g1, m1] = modes.mode1;
  const auto& [w2, g2, m2] = modes.mode2;
  const double c = sc.c_sc;
  RwaParams p;
  p.lambda12 = raw.gamma_disp * c / (2.0 * m1 * m2 * w1 * w2);
  p.lambda11 = 3.0 * raw.gamma1 * c / (4.0 * m1 * m1 * w1 * w1);
  p.lambda22 = 3.0 * raw.gamma2 * c / (4.0 * m2 * m2 * w2 * w2);
  p.f_p = raw.big_f_p * std::sqrt(c) / (4.0 * std::sqrt(2.0 * m2 * w2) * m1 * w1);
  p.delta = delta;
  p.sideband = sideband;
  return p;
}

RawCouplings raw_from_scaled(const RwaParams& p, const ModePair& modes, const ScalingConfig& sc) {
  validate(modes.mode1, "mode1");
  validate(modes.mode2, "mode2");
  validate(sc);
  const auto& [w1, g1, m1] = modes.mode1;
  const auto& [w2, g2, m2] = modes.mode2;
  const double c = sc.c_sc;
  RawCouplings raw;
  raw.gamma_disp = p.lambda12 * 2.0 * m1 * m2 * w1 * w2 / c;
  raw.gamma1 = p.lambda11 * 4.0 * m1 * m1 * w1 * w1 / (3.0 * c);
  raw.gamma2 = p.lambda22 * 4.0 * m2 * m2 * w2 * w2 / (3.0 * c);
  raw.big_f_p = p.f_p * 4.0 * std::sqrt(2.0 * m2 * w2) * m1 * w1 / std::sqrt(c);
  return raw;
}

double amplitude_from_scaled(double v_mag, const ModeParams& mode, const ScalingConfig& sc) {
  if (!(v_mag >= 0.0)) throw DomainError("amplitude_from_scaled: |v| must be non-negative");
  return std::sqrt(2.0 * sc.c_sc / (mode.mass * mode.omega)) * v_mag;
}

double scaled_from_amplitude(double amplitude, const ModeParams& mode, const ScalingConfig& sc) {
  if (!(amplitude >= 0.0)) throw DomainError("scaled_from_amplitude: amplitude must be non-negative");
  return amplitude / std::sqrt(2.0 * sc.c_sc / (mode.mass * mode.omega));
}

NonlinearFriction alpha_beta(const RwaParams& p, double gamma2) {
  const double denom = gamma2 * gamma2 + p.delta * p.delta;
  const double fp2 = p.f_p * p.f_p;
  NonlinearFriction nf;
  nf.alpha = -2.0 * fp2 * gamma2 / denom;
  if (p.sideband == Sideband::Lower) nf.alpha = -nf.alpha;
  nf.beta = p.lambda11 + 2.0 * fp2 * p.delta / denom;
  return nf;
}

double alpha_per_m2(const NonlinearFriction& nf, const ModeParams& mode1, const ScalingConfig& sc) {
  return nf.alpha * mode1.mass * mode1.omega / (2.0 * sc.c_sc);
}

LineFit fit_dispersive_slope(const CalibrationData& data) {
  std::vector<double> x, y;
  x.reserve(data.points.size());
  y.reserve(data.points.size());
  for (const auto& [a2, shift] : data.points) {
    x.push_back(a2);
    y.push_back(shift);
  }
  return fit_line(x, y);
}

double drive_scale(const ModeParams& mode1, const ScalingConfig& sc) {
  return 1.0 / std::sqrt(8.0 * mode1.mass * mode1.omega * sc.c_sc);
}

double scaled_drive(double force_newton, const ModeParams& mode1, const ScalingConfig& sc) {
  return force_newton * drive_scale(mode1, sc);
}

double force_from_scaled_drive(double f_d1, const ModeParams& mode1, const ScalingConfig& sc) {
  return f_d1 / drive_scale(mode1, sc);
}

double calibrate_mass_from_drive(double force_newton, double f_d1, double omega1,
                                 const ScalingConfig& sc) {
  require_positive(force_newton, "F_d1");
  require_positive(omega1, "omega1");
  validate(sc);
  require_finite(f_d1, "f_d1");
  if (f_d1 <= 0.0) throw DomainError("calibrate_mass_from_drive: f_d1 must be positive");
  return force_newton * force_newton / (8.0 * f_d1 * f_d1 * omega1 * sc.c_sc);
}

double bifurcation_gain(const RwaParams& p, const Damping& g) {
  return (g.gamma1 + g.gamma2) * p.lambda12 + 2.0 * g.gamma2 * p.lambda11 +
         0.5 * g.gamma1 * p.lambda22;
}

double calibrate_fp_from_bifurcation(double delta_b, const Damping& g, const RwaParams& lambdas) {
  require_finite(delta_b, "delta_B");
  const double big_g = bifurcation_gain(lambdas, g);
  if (!(big_g > 0.0) || !(g.gamma1 > 0.0))
    throw CalibrationError("calibrate_fp_from_bifurcation: no positive root (G <= 0)");
  // a P² + b P + c = 0 with P = f_p², a > 0, c < 0: exactly one positive root.
  const double a = (2.0 * g.gamma1 + g.gamma2) * (2.0 * g.gamma1 + g.gamma2);
  const double b = 2.0 * g.gamma1 * big_g * delta_b;
  const double c = -g.gamma1 * g.gamma1 * big_g * big_g;
  const double disc = std::sqrt(b * b - 4.0 * a * c);
  const double root = b <= 0.0 ? (-b + disc) / (2.0 * a) : (2.0 * -c) / (b + disc);
  if (!(root > 0.0) || !std::isfinite(root))
    throw CalibrationError("calibrate_fp_from_bifurcation: no positive root");
  return std::sqrt(root);
}

}  // namespace nlf
