#ifndef NLF_RESPONSE_HPP
#define NLF_RESPONSE_HPP

// Forced response of mode 1 under sideband pumping: all coexisting
// stationary states, their stability, frequency and force sweeps, the
// isolated branch, its merge with the main branch, and Γ_peak.
//
// Notation (scaled units): x = |u₁|², y = |u₂|², d = ω_d1 − ω₁,
// Z₂ = Γ₂ + is with s = Δ − 2σd − Λ₁₂x − Λ₂₂y,
// Z₁ = Γ₁ + id − iΛ₁₁x − iΛ₁₂y, and the drive condition
//   M(d, s) = |Z₁ − 2σf_p²x/Z₂ᶿ|²·x = f_d1²    (Z₂ᶿ = Z₂* upper, Z₂ lower).
// Along the slaving relation y|Z₂|² = f_p²x² every admissible s ≤ Δ − 2σd
// fixes (x, y) uniquely when Λ₁₂, Λ₂₂ ≥ 0, so the states at fixed d are the
// roots of a scalar function of s.

#include <complex>
#include <optional>
#include <vector>

#include "nlf/params.hpp"
#include "nlf/stability.hpp"

namespace nlf {

struct DriveConfig {
  double f_d1 = 0.0;    // 1/s
  double detune = 0.0;  // rad/s
};

struct ResponseState {
  double u1_sq = 0.0;
  double u2_sq = 0.0;
  std::complex<double> u1;
  std::complex<double> u2;
  double s = 0.0;         // Im Z₂, the curve parameter
  double residual = 0.0;  // max of the relative drive and slaving residuals
  bool stable = false;
  int n_unstable = 0;
  double max_real_eig = 0.0;
  int branch_id = -1;
};

/// Point on the slaving curve for curve parameter s at detuning d.
struct CurvePoint {
  double s = 0.0;
  double x = 0.0;
  double y = 0.0;
  double m = 0.0;  // M(d, s)
};

CurvePoint curve_point(double d, double s, const RwaParams& p, const Damping& g);

/// All stationary states, ordered along the curve (by decreasing s, i.e.
/// increasing distance from x = 0).  Stability is filled in.
std::vector<ResponseState> stationary_states(const DriveConfig& d, const RwaParams& p,
                                             const Damping& g);

/// Residuals of the two algebraic conditions (relative).
double response_residual(const ResponseState& st, const DriveConfig& d, const RwaParams& p,
                         const Damping& g);

StabilityReport stability_of_state(const ResponseState& st, const DriveConfig& d,
                                   const RwaParams& p, const Damping& g);

struct Fold {
  double at = 0.0;       // detuning (frequency sweep) or drive (force sweep)
  int branch_id = -1;
  int count_below = 0;   // solution counts on either side
  int count_above = 0;
  ResponseState lower;   // the merging pair just on the multi-state side
  ResponseState upper;
};

struct SweepPoint {
  double param = 0.0;  // detune (rad/s) or f_d1 (1/s)
  ResponseState state;
};

struct BranchSummary {
  int branch_id = -1;
  bool isolated = false;
  double x_max = 0.0;          // peak |u₁|² on the branch
  double detune_at_max = 0.0;  // rad/s
  double gamma_peak = 0.0;     // f_d1/(2|u₁|max), 1/s
  double param_lo = 0.0;       // extent of the branch along the sweep
  double param_hi = 0.0;
};

struct SweepResult {
  std::vector<SweepPoint> points;
  std::vector<Fold> folds;
  std::vector<BranchSummary> branches;
  bool has_isolated = false;
  double omega_l = 0.0;  // isolated-branch endpoints (rad/s) when present
  double omega_h = 0.0;
  bool hysteretic = false;  // force sweeps: multivalued somewhere
  bool window_ok = true;    // window extends ≥ 20Γ₁ beyond every fold
  int ambiguous_links = 0;
};

struct SweepOptions {
  double fold_tol = 1e-4;       // rad/s (frequency) or relative (force)
  unsigned threads = 1;
  std::vector<double> extra;    // additional sweep values merged into the grid
  bool refine_peaks = true;
};

SweepResult frequency_sweep(const RwaParams& p, const Damping& g, double f_d1, double detune_lo,
                            double detune_hi, std::size_t n_points, const SweepOptions& opt = {});

SweepResult force_sweep(const RwaParams& p, const Damping& g, double detune, double f_lo,
                        double f_hi, std::size_t n_points, const SweepOptions& opt = {});

enum class CriticalKind { Minimum, Saddle, Maximum };

std::string to_string(CriticalKind k);

/// Critical point of M(d, s): a minimum is where an isolated branch is born
/// as the drive grows, a saddle where two branches touch.
struct CriticalPoint {
  double detune = 0.0;
  double s = 0.0;
  double x = 0.0;
  double y = 0.0;
  double f_d1 = 0.0;  // √M at the point
  CriticalKind kind = CriticalKind::Saddle;
};

std::vector<CriticalPoint> response_critical_points(const RwaParams& p, const Damping& g,
                                                    double detune_lo, double detune_hi);

struct MergeResult {
  bool found = false;
  double f_d1_critical = 0.0;  // by bisection on the solution count at omega_c
  double f_d1_saddle = 0.0;    // √M at the saddle
  double omega_c = 0.0;        // rad/s
  double x_c = 0.0;
  bool isolated_below = false;  // frequency sweep at f_c(1 − 1e-4)
  bool isolated_above = false;  // frequency sweep at f_c(1 + 1e-4)
  bool normal_form_ok = false;  // the two sweeps straddle the merge
  int bisection_steps = 0;
};

/// Drive at which the isolated branch joins the main branch, searched for
/// f_d1 ∈ [f_lo, f_hi] with the merge frequency in [detune_lo, detune_hi].
/// An isolated branch must be present at f_lo.  The merge is the saddle of
/// M between the isolated and the main branch; the drive is bisected on the
/// local state count at ω_c and confirmed by frequency sweeps.
MergeResult locate_branch_merge(const RwaParams& p, const Damping& g, double detune_lo,
                                double detune_hi, double f_lo, double f_hi,
                                double rel_tol = 1e-6, std::size_t sweep_points = 2001,
                                unsigned threads = 1);

/// Number of stationary states at (f_d1, detune).
int state_count(const DriveConfig& d, const RwaParams& p, const Damping& g);

struct GammaPeakSample {
  double f_d1 = 0.0;
  int branch_id = -1;
  bool isolated = false;
  double gamma_peak = 0.0;
};

struct GammaPeakCurve {
  std::vector<GammaPeakSample> samples;
  bool multivalued = false;
  double multi_lo = 0.0;  // f_d1 interval with an isolated branch (from critical points)
  double multi_hi = 0.0;
};

GammaPeakCurve gamma_peak_curve(const RwaParams& p, const Damping& g,
                                const std::vector<double>& f_d1_values, double detune_lo,
                                double detune_hi, std::size_t n_points,
                                const SweepOptions& opt = {});

struct SharpeningReport {
  double drive_ratio = 0.0;
  double peak_ratio = 0.0;
  double min_pointwise = 0.0;  // over detunings where both drives give one state
  double max_pointwise = 0.0;
};

SharpeningReport peak_sharpening_check(const RwaParams& p, const Damping& g, double f_small,
                                       double f_large, double detune_lo, double detune_hi,
                                       std::size_t n_points, const SweepOptions& opt = {});

}  // namespace nlf

#endif  // NLF_RESPONSE_HPP
