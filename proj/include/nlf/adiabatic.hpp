#ifndef NLF_ADIABATIC_HPP
#define NLF_ADIABATIC_HPP

// Effective decay rate of mode 1 when mode 2 adiabatically follows it.
//
// Simple form: Γ_ad = Γ₁ + αx.  Extended form: with v₁ = √x e^{iφ} and v₂
// slaved, D = Γ₂ + i(Δ − 2σφ̇ − Λ₁₂x − Λ₂₂y) (σ = ±1 for the upper/lower
// sideband) and
//   y  = f_p²x²/|D|²,
//   φ̇  = Λ₁₂y + Λ₁₁x − 2f_p²x·Im D⁻¹,
//   Γ_ad = Γ₁ − 2σf_p²x·Re D⁻¹.

#include <complex>
#include <string>
#include <vector>

#include "nlf/params.hpp"

namespace nlf {

double gamma_ad_simple(double x, const RwaParams& p, const Damping& g);

struct AdiabaticState {
  double x = 0.0;
  double y = 0.0;
  double phi_dot = 0.0;
  std::complex<double> d_value;
  double gamma_ad = 0.0;
  double residual = 0.0;    // max relative residual of the two equations
  int iterations = 0;
  std::string method;       // "fixed-point", "newton" or "bracket"
  int n_solutions = 1;      // distinct self-consistent solutions found at x (diagnostic)
};

/// Self-consistent solve at squared amplitude x.  `seed`, when given, is
/// the solution at a neighbouring x and selects the continuously connected
/// root.  Throws SolverError if every stage fails.
AdiabaticState solve_extended_adiabatic(double x, const RwaParams& p, const Damping& g,
                                        const AdiabaticState* seed = nullptr);

/// Every self-consistent solution at x, ordered by Im D.  Used for
/// diagnostics and as the last-resort stage of the solver.
std::vector<AdiabaticState> all_extended_adiabatic(double x, const RwaParams& p,
                                                   const Damping& g);

/// Relative residuals of the two self-consistency equations.
double adiabatic_residual(const AdiabaticState& s, const RwaParams& p);

struct AdiabaticCurve {
  std::vector<double> grid;
  std::vector<double> gamma_ad;
  std::vector<double> phi_dot;
  std::vector<double> y;
  std::vector<std::complex<double>> d_value;
  std::vector<bool> validity;  // Γ_ad < 0.1·|D|
};

/// Sequential continuation from x = 0 along a strictly increasing grid.
AdiabaticCurve adiabatic_curve(const std::vector<double>& grid, const RwaParams& p,
                               const Damping& g);

std::vector<double> log_grid(double lo, double hi, std::size_t n);

struct ThresholdResult {
  bool exists = false;
  double x_th = 0.0;  // squared scaled amplitudes at the zero crossings
  double x_st = 0.0;
  double a_th = 0.0;  // m
  double a_st = 0.0;  // m
};

struct ThresholdOptions {
  double x_lo = 1e-4;
  double x_hi = 1e3;
  std::size_t n_grid = 400;
  double x_tol = 1e-12;
};

/// Zero crossings of the extended Γ_ad (upper sideband).  Throws
/// AmbiguityError when the number of sign changes is not 0 or 2.
ThresholdResult thresholds(const SystemParams& sys, const ThresholdOptions& opt = {});

}  // namespace nlf

#endif  // NLF_ADIABATIC_HPP
