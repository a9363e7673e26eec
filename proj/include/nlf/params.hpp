#ifndef NLF_PARAMS_HPP
#define NLF_PARAMS_HPP

// Physical and scaled parameters of the two-mode system, unit conversions
// between displacement and the dimensionless slow amplitudes, and the
// calibration relations that tie measured quantities to model parameters.
//
// Frequencies are angular (rad/s) everywhere inside the library.  Values
// given in Hz are converted once, with hz_to_rad, at the boundary.

#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace nlf {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

constexpr double hz_to_rad(double hz) { return two_pi * hz; }
constexpr double rad_to_hz(double rad) { return rad / two_pi; }

enum class Sideband { Upper, Lower };

std::string to_string(Sideband s);
Sideband sideband_from_string(const std::string& s);

/// +1 for pumping at ω₂ + 2ω₁, −1 for ω₂ − 2ω₁.
constexpr int sign(Sideband s) { return s == Sideband::Upper ? 1 : -1; }

struct ModeParams {
  double omega = 0.0;  // rad/s
  double gamma = 0.0;  // rad/s
  double mass = 0.0;   // kg
};

struct ModePair {
  ModeParams mode1;
  ModeParams mode2;
};

struct ScalingConfig {
  double c_sc = 1e-21;  // J·s
};

struct RwaParams {
  double lambda11 = 0.0;  // 1/s
  double lambda22 = 0.0;  // 1/s
  double lambda12 = 0.0;  // 1/s
  double f_p = 0.0;       // 1/s
  double delta = 0.0;     // pump detuning, rad/s
  Sideband sideband = Sideband::Upper;
};

/// Coefficients of the full equations of motion.
struct RawCouplings {
  double gamma_disp = 0.0;  // dispersive coupling γ, kg·m⁻²·s⁻²
  double gamma1 = 0.0;      // Duffing coefficient of mode 1
  double gamma2 = 0.0;      // Duffing coefficient of mode 2
  double big_f_p = 0.0;     // pump amplitude F_p
};

/// Linear decay rates of the two modes, the only mode data the scaled
/// dynamics needs.
struct Damping {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
};

inline Damping damping(const ModePair& m) { return {m.mode1.gamma, m.mode2.gamma}; }

struct SystemParams {
  ModePair modes;
  ScalingConfig scaling;
  RwaParams rwa;

  Damping damping() const { return nlf::damping(modes); }
};

/// Device parameters of the plate/beam resonator.  Masses are not measured
/// directly: m₁ follows from the drive calibration, m₂ is a geometry
/// estimate.  Only dimensional I/O depends on them.
SystemParams paper_device();

/// Named presets; throws ConfigError for unknown names.
SystemParams preset(const std::string& name);
std::vector<std::string> preset_names();

void validate(const ModeParams& m, const std::string& where = "mode");
void validate(const ModePair& m);
void validate(const ScalingConfig& sc);
void validate(const RwaParams& p, double omega1);
void validate(const SystemParams& s);

RwaParams scaled_params_from_raw(const RawCouplings& raw, const ModePair& modes,
                                 const ScalingConfig& sc, double delta = 0.0,
                                 Sideband sideband = Sideband::Upper);
RawCouplings raw_from_scaled(const RwaParams& p, const ModePair& modes,
                             const ScalingConfig& sc);

/// A = (2C_sc/(mω))^{1/2}·|v|.
double amplitude_from_scaled(double v_mag, const ModeParams& mode, const ScalingConfig& sc);
double scaled_from_amplitude(double amplitude, const ModeParams& mode,
                             const ScalingConfig& sc);

/// Coefficients of the simple adiabatic reduction
///   v̇₁ ≈ −v₁(Γ₁ + α|v₁|²) + iβv₁|v₁|².
struct NonlinearFriction {
  double alpha = 0.0;
  double beta = 0.0;
};

NonlinearFriction alpha_beta(const RwaParams& p, double gamma2);

/// α expressed per squared displacement: α̃ = α·m₁ω₁/(2C_sc), in 1/(s·m²).
double alpha_per_m2(const NonlinearFriction& nf, const ModeParams& mode1,
                    const ScalingConfig& sc);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rss = 0.0;           // residual sum of squares
  double max_abs_residual = 0.0;
  std::size_t n = 0;
};

/// Dispersive frequency-shift measurements: squared amplitude of one mode
/// (m²) against the shift of the other mode's frequency.
struct CalibrationData {
  std::vector<std::pair<double, double>> points;
};

/// Ordinary least-squares line through the shift data; the slope is the
/// dispersive-shift coefficient.  The conversion from this slope to γ is
/// convention-dependent and is left to the caller.
LineFit fit_dispersive_slope(const CalibrationData& data);

/// Scaled drive per newton: f_d1 = F_d1·(8m₁ω₁C_sc)^{−1/2}.
double drive_scale(const ModeParams& mode1, const ScalingConfig& sc);
double scaled_drive(double force_newton, const ModeParams& mode1, const ScalingConfig& sc);
double force_from_scaled_drive(double f_d1, const ModeParams& mode1, const ScalingConfig& sc);

/// Inverts the drive scaling for the effective mass: m₁ = F²/(8f²ω₁C_sc).
double calibrate_mass_from_drive(double force_newton, double f_d1, double omega1,
                                 const ScalingConfig& sc);

/// G = (Γ₁+Γ₂)Λ₁₂ + 2Γ₂Λ₁₁ + ½Γ₁Λ₂₂, the combination of conservative
/// nonlinearities that controls the existence of self-sustained cycles.
double bifurcation_gain(const RwaParams& p, const Damping& g);

/// Pump strength for which self-sustained vibrations first appear at the
/// pump detuning `delta_b` (rad/s): the positive root in f² of
///   (2Γ₁+Γ₂)²f⁴ + 2Γ₁GΔ_B f² − Γ₁²G² = 0,
/// where the square-root argument of the cycle amplitude vanishes.
double calibrate_fp_from_bifurcation(double delta_b, const Damping& g, const RwaParams& lambdas);

}  // namespace nlf

#endif  // NLF_PARAMS_HPP
