#ifndef NLF_SELFSUSTAINED_HPP
#define NLF_SELFSUSTAINED_HPP

// Stationary self-sustained vibrations of the pumped pair (upper sideband):
// closed-form amplitudes and frequency offsets, their stability, and the
// saddle-node of cycles at Δ_B.

#include <utility>
#include <vector>

#include "nlf/params.hpp"
#include "nlf/stability.hpp"

namespace nlf {

enum class CycleBranch { Plus, Minus };

std::string to_string(CycleBranch b);

struct SelfSustainedSolution {
  double c1_sq = 0.0;
  double c2_sq = 0.0;
  double delta_omega = 0.0;  // rad/s
  std::complex<double> c1;   // real by choice of phase
  std::complex<double> c2;
  bool stable = false;
  CycleBranch branch = CycleBranch::Plus;
};

/// Square-root argument of the closed-form amplitude; solutions exist where
/// it is non-negative.
double cycle_discriminant(const RwaParams& p, const Damping& g);

/// δω for a given |c₁|².
double cycle_frequency_offset(double c1_sq, const RwaParams& p, const Damping& g);

/// Both branches (Plus first) with positive |c₁|²; empty when none exist and
/// a single Plus entry when the discriminant is zero to rounding.
/// Stability is computed from the Jacobian in the co-rotating frame.
std::vector<SelfSustainedSolution> solve_limit_cycles(const RwaParams& p, const Damping& g);

/// (ω₁ + δω, ω_F − 2ω₁ − 2δω).
std::pair<double, double> oscillation_frequencies(const SelfSustainedSolution& sol, double omega1,
                                                  double omega_f);

StabilityReport stability_of_cycle(const SelfSustainedSolution& sol, const RwaParams& p,
                                   const Damping& g);

/// Largest |component| of the time derivative at the solution, in the frame
/// rotating with δω.
double cycle_residual(const SelfSustainedSolution& sol, const RwaParams& p, const Damping& g);

enum class BifurcationKind { SaddleNodeOfCycles };

struct BifurcationResult {
  double delta_b = 0.0;  // rad/s
  BifurcationKind kind = BifurcationKind::SaddleNodeOfCycles;
};

/// Δ_B = (Γ₁²G² − (2Γ₁+Γ₂)²f_p⁴)/(2Γ₁f_p²G), the zero of cycle_discriminant.
BifurcationResult delta_b(const RwaParams& p, const Damping& g);

struct NormalFormPoint {
  double delta = 0.0;  // rad/s
  double r = 0.0;      // |c₁|
  int side = +1;       // +1 for the Plus branch, −1 for Minus
};

struct NormalFormFit {
  double r0 = 0.0;
  double k = 0.0;         // r = r₀ ± √(k(Δ − Δ_B))
  double rss = 0.0;
  double max_abs_residual = 0.0;
  std::size_t n = 0;
  double exponent = 0.0;  // log–log slope of the branch separation (NaN if not computable)
};

/// Linear least squares for (r₀, √k) given Δ_B.
NormalFormFit fit_normal_form(const std::vector<NormalFormPoint>& pts, double delta_b);

/// Samples n_points detunings in [window_lo, window_hi], collects both
/// branches and fits the normal form.  Throws FitError with fewer than two
/// detunings carrying solutions.
NormalFormFit normal_form_fit(const RwaParams& p, const Damping& g, double window_lo,
                              double window_hi, std::size_t n_points = 41);

}  // namespace nlf

#endif  // NLF_SELFSUSTAINED_HPP
