#ifndef NLF_TIMEDOMAIN_HPP
#define NLF_TIMEDOMAIN_HPP

// Time integration of the slow dynamics and of the full equations of
// motion, ringdown rate extraction and basin classification.

#include <complex>
#include <optional>
#include <vector>

#include "nlf/ode.hpp"
#include "nlf/params.hpp"
#include "nlf/rwa.hpp"

namespace nlf {

struct RwaTrajectory {
  std::vector<double> times;
  std::vector<std::complex<double>> v1;
  std::vector<std::complex<double>> v2;
  IntegrationStats stats;
};

struct IntegrateOptions {
  double sample_dt = 1e-3;  // s
  StepControl control{};
};

RwaTrajectory integrate_rwa(const RwaState& s0, const RwaParams& p, const Damping& g,
                            const Drive& drive, double horizon, const IntegrateOptions& opt = {});

struct RingdownTrace {
  std::vector<double> times;
  std::vector<double> a1;  // m
  std::vector<double> a2;  // m
  std::vector<std::complex<double>> v1;
  std::vector<std::complex<double>> v2;
  std::vector<double> gamma_inst;  // NaN where undefined
};

struct RatePoint {
  double t = 0.0;
  double a1_sq = 0.0;       // squared amplitude at the window centre (input units²)
  double gamma_inst = 0.0;  // −d ln A₁/dt
  bool valid = false;       // false when the window contains a non-positive amplitude
};

/// Centred sliding-window least-squares slope of ln A₁; `window` is an odd
/// number of samples.  Only windows that fit inside the trace are reported.
std::vector<RatePoint> instantaneous_rate(const std::vector<double>& times,
                                          const std::vector<double>& a1, int window = 51);

/// Initial slow state for a ringdown from squared amplitude x0 with zero
/// phase; v₂ is the adiabatic slave value unless `zero_v2`.
RwaState ringdown_initial_state(double x0, const RwaParams& p, const Damping& g,
                                bool zero_v2 = false);

struct RingdownOptions {
  IntegrateOptions integrate{};
  int window = 51;
  bool zero_v2 = false;
};

/// Free decay from mode-1 amplitude a1_initial (m).  Dimensional amplitudes
/// use the configured masses; gamma_inst is filled on interior samples.
RingdownTrace ringdown(const SystemParams& sys, double a1_initial, double horizon,
                       const RingdownOptions& opt = {});

enum class BasinOutcome { DecaysToZero, SettlesToLimitCycle, Undecided };

std::string to_string(BasinOutcome b);

struct BasinResult {
  BasinOutcome outcome = BasinOutcome::Undecided;
  double final_amplitude = 0.0;  // mean over the decision window, m
  double a_st = 0.0;             // reference stable amplitude, m (0 if none)
};

/// Integrates from a1_initial (m) and classifies the end state.  horizon ≤ 0
/// selects 20/Γ₁.
BasinResult classify_basin(double a1_initial, const SystemParams& sys, double horizon = 0.0,
                           const IntegrateOptions& opt = {});

struct FullState {
  double q1 = 0.0, q2 = 0.0;  // m
  double p1 = 0.0, p2 = 0.0;  // m/s
  double t = 0.0;
};

struct FullTrajectory {
  std::vector<FullState> states;
  std::vector<std::complex<double>> v1;  // mode-1 slow amplitude recovered from (q₁, q̇₁)
};

struct FullOptions {
  double steps_per_period = 200.0;  // per period of mode 2; at least 50
  double sample_dt = 1e-4;           // s
};

/// Pump frequency ω_F = ω₂ + σ·2ω₁ + Δ for the configured sideband.
double pump_frequency(const SystemParams& sys);

/// Fixed-step RK4 integration of the full two-mode equations with pump
/// amplitude raw.big_f_p at omega_f.  Horizon is limited to 0.05 s.
FullTrajectory integrate_full_eom(const FullState& s0, const RawCouplings& raw,
                                  const ModePair& modes, const ScalingConfig& sc, double omega_f,
                                  double horizon, const FullOptions& opt = {});

/// Displacements and velocities that correspond to slow amplitudes (v₁, v₂)
/// at t = 0, with mode 2 referenced to ω_F − σ·2ω₁.
FullState full_state_from_rwa(const RwaState& s, const SystemParams& sys);

}  // namespace nlf

#endif  // NLF_TIMEDOMAIN_HPP
