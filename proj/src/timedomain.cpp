#include "nlf/timedomain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nlf/adiabatic.hpp"
#include "nlf/errors.hpp"

namespace nlf {

RwaTrajectory integrate_rwa(const RwaState& s0, const RwaParams& p, const Damping& g,
                            const Drive& drive, double horizon, const IntegrateOptions& opt) {
  if (!(horizon > 0.0)) throw DomainError("integrate_rwa: horizon must be positive");
  if (!std::isfinite(std::abs(s0.v1)) || !std::isfinite(std::abs(s0.v2)))
    throw DomainError("integrate_rwa: non-finite initial state");
  RwaTrajectory tr;
  const auto n_expected = static_cast<std::size_t>(horizon / opt.sample_dt) + 2;
  tr.times.reserve(n_expected);
  tr.v1.reserve(n_expected);
  tr.v2.reserve(n_expected);
  auto rhs = [&](double t, const Vector4& y) { return rwa_rhs<double>(y, t, p, g, drive); };
  auto observe = [&](double t, const Vector4& y) {
    tr.times.push_back(t);
    tr.v1.emplace_back(y[0], y[1]);
    tr.v2.emplace_back(y[2], y[3]);
  };
  dormand_prince(rhs, s0.vec(), s0.t, s0.t + horizon, opt.sample_dt, observe, opt.control,
                 &tr.stats);
  return tr;
}

std::vector<RatePoint> instantaneous_rate(const std::vector<double>& times,
                                          const std::vector<double>& a1, int window) {
  if (times.size() != a1.size()) throw DomainError("instantaneous_rate: size mismatch");
  if (times.size() < 3) throw DomainError("instantaneous_rate: need at least three samples");
  if (window < 3 || window % 2 == 0) throw DomainError("instantaneous_rate: window must be odd and >= 3");
  const auto n = static_cast<int>(times.size());
  const int half = window / 2;
  std::vector<RatePoint> out;
  for (int c = half; c + half < n; ++c) {
    RatePoint rp;
    rp.t = times[c];
    rp.a1_sq = a1[c] * a1[c];
    bool ok = true;
    double mt = 0.0, ml = 0.0;
    for (int k = c - half; k <= c + half; ++k) {
      if (!(a1[k] > 0.0)) {
        ok = false;
        break;
      }
      mt += times[k];
      ml += std::log(a1[k]);
    }
    if (!ok) {
      rp.gamma_inst = std::numeric_limits<double>::quiet_NaN();
      out.push_back(rp);
      continue;
    }
    mt /= window;
    ml /= window;
    double stt = 0.0, stl = 0.0;
    for (int k = c - half; k <= c + half; ++k) {
      const double dt = times[k] - mt;
      stt += dt * dt;
      stl += dt * (std::log(a1[k]) - ml);
    }
    rp.gamma_inst = -stl / stt;
    rp.valid = true;
    out.push_back(rp);
  }
  return out;
}

RwaState ringdown_initial_state(double x0, const RwaParams& p, const Damping& g, bool zero_v2) {
  if (!(x0 >= 0.0)) throw DomainError("ringdown_initial_state: x0 must be non-negative");
  RwaState s;
  s.v1 = std::sqrt(x0);
  if (zero_v2 || x0 == 0.0) return s;
  const auto ad = solve_extended_adiabatic(x0, p, g);
  // v₂ = −i f_p v₁*²/D (upper) or −i f_p v₁²/D (lower); v₁ is real here.
  s.v2 = std::complex<double>(0.0, -p.f_p) * (s.v1 * s.v1) / ad.d_value;
  return s;
}

RingdownTrace ringdown(const SystemParams& sys, double a1_initial, double horizon,
                       const RingdownOptions& opt) {
  const double x0 = std::pow(scaled_from_amplitude(a1_initial, sys.modes.mode1, sys.scaling), 2);
  const auto s0 = ringdown_initial_state(x0, sys.rwa, sys.damping(), opt.zero_v2);
  const auto tr = integrate_rwa(s0, sys.rwa, sys.damping(), {}, horizon, opt.integrate);
  RingdownTrace out;
  out.times = tr.times;
  out.v1 = tr.v1;
  out.v2 = tr.v2;
  out.a1.reserve(tr.times.size());
  out.a2.reserve(tr.times.size());
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    out.a1.push_back(amplitude_from_scaled(std::abs(tr.v1[i]), sys.modes.mode1, sys.scaling));
    out.a2.push_back(amplitude_from_scaled(std::abs(tr.v2[i]), sys.modes.mode2, sys.scaling));
  }
  out.gamma_inst.assign(out.times.size(), std::numeric_limits<double>::quiet_NaN());
  if (out.times.size() >= static_cast<std::size_t>(opt.window)) {
    const auto rates = instantaneous_rate(out.times, out.a1, opt.window);
    const int half = opt.window / 2;
    for (std::size_t i = 0; i < rates.size(); ++i)
      if (rates[i].valid) out.gamma_inst[i + half] = rates[i].gamma_inst;
  }
  return out;
}

std::string to_string(BasinOutcome b) {
  switch (b) {
    case BasinOutcome::DecaysToZero: return "decays-to-zero";
    case BasinOutcome::SettlesToLimitCycle: return "settles-to-limit-cycle";
    case BasinOutcome::Undecided: return "undecided";
  }
  return "undecided";
}

BasinResult classify_basin(double a1_initial, const SystemParams& sys, double horizon,
                           const IntegrateOptions& opt) {
  if (!(a1_initial >= 0.0)) throw DomainError("classify_basin: amplitude must be non-negative");
  if (sys.rwa.sideband != Sideband::Upper)
    throw DomainError("classify_basin: only defined for the upper sideband");
  BasinResult res;
  const auto th = thresholds(sys);
  res.a_st = th.exists ? th.a_st : 0.0;
  if (a1_initial == 0.0) {
    res.outcome = BasinOutcome::DecaysToZero;
    return res;
  }
  if (horizon <= 0.0) horizon = 20.0 / sys.modes.mode1.gamma;

  const double x0 = std::pow(scaled_from_amplitude(a1_initial, sys.modes.mode1, sys.scaling), 2);
  const auto s0 = ringdown_initial_state(x0, sys.rwa, sys.damping());
  const auto tr = integrate_rwa(s0, sys.rwa, sys.damping(), {}, horizon, opt);

  const double t_from = tr.times.back() - 0.01 * horizon;
  double sum = 0.0, lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  int n = 0;
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    if (tr.times[i] < t_from) continue;
    const double a = amplitude_from_scaled(std::abs(tr.v1[i]), sys.modes.mode1, sys.scaling);
    sum += a;
    lo = std::min(lo, a);
    hi = std::max(hi, a);
    ++n;
  }
  res.final_amplitude = sum / n;
  if (th.exists) {
    const double cut = 0.5 * th.a_st;
    if (lo < cut && hi >= cut)
      res.outcome = BasinOutcome::Undecided;
    else
      res.outcome = res.final_amplitude < cut ? BasinOutcome::DecaysToZero
                                              : BasinOutcome::SettlesToLimitCycle;
  } else {
    res.outcome = res.final_amplitude < 1e-3 * a1_initial ? BasinOutcome::DecaysToZero
                                                          : BasinOutcome::Undecided;
  }
  return res;
}

double pump_frequency(const SystemParams& sys) {
  return sys.modes.mode2.omega + sign(sys.rwa.sideband) * 2.0 * sys.modes.mode1.omega +
         sys.rwa.delta;
}

FullState full_state_from_rwa(const RwaState& s, const SystemParams& sys) {
  const auto& m1 = sys.modes.mode1;
  const auto& m2 = sys.modes.mode2;
  const double c = sys.scaling.c_sc;
  const double w2f = pump_frequency(sys) - sign(sys.rwa.sideband) * 2.0 * m1.omega;
  // ωq − iq̇ = (2ωC/m)^{1/2} v at t = 0.
  const double k1 = std::sqrt(2.0 * m1.omega * c / m1.mass);
  const double k2 = std::sqrt(2.0 * w2f * c / m2.mass);
  FullState f;
  f.q1 = k1 * s.v1.real() / m1.omega;
  f.p1 = -k1 * s.v1.imag();
  f.q2 = k2 * s.v2.real() / w2f;
  f.p2 = -k2 * s.v2.imag();
  f.t = 0.0;
  return f;
}

FullTrajectory integrate_full_eom(const FullState& s0, const RawCouplings& raw,
                                  const ModePair& modes, const ScalingConfig& sc, double omega_f,
                                  double horizon, const FullOptions& opt) {
  if (!(horizon > 0.0) || horizon > 0.05)
    throw DomainError("integrate_full_eom: horizon must lie in (0, 0.05] s");
  if (!(opt.steps_per_period >= 50.0))
    throw DomainError("integrate_full_eom: step must not exceed 2*pi/(50*omega2)");
  if (!(opt.sample_dt > 0.0)) throw DomainError("integrate_full_eom: sample_dt must be positive");
  validate(modes);

  const auto& [w1, g1, m1] = modes.mode1;
  const auto& [w2, g2, m2] = modes.mode2;
  const double h_max = two_pi / (w2 * opt.steps_per_period);
  const auto per_sample = static_cast<std::size_t>(std::ceil(opt.sample_dt / h_max));
  const double h = opt.sample_dt / static_cast<double>(per_sample);
  const auto n_samples = static_cast<std::size_t>(std::llround(horizon / opt.sample_dt));
  if (n_samples == 0) throw DomainError("integrate_full_eom: horizon shorter than sample_dt");

  using V = Eigen::Vector4d;  // (q₁, q₂, q̇₁, q̇₂)
  auto rhs = [&](double t, const V& y) {
    const double q1 = y[0], q2 = y[1];
    const double pump = raw.big_f_p * std::cos(omega_f * t);
    V d;
    d[0] = y[2];
    d[1] = y[3];
    d[2] = -w1 * w1 * q1 - 2.0 * g1 * y[2] - (raw.gamma_disp / m1) * q1 * q2 * q2 -
           (raw.gamma1 / m1) * q1 * q1 * q1 + (pump / m1) * 2.0 * q1 * q2;
    d[3] = -w2 * w2 * q2 - 2.0 * g2 * y[3] - (raw.gamma_disp / m2) * q1 * q1 * q2 -
           (raw.gamma2 / m2) * q2 * q2 * q2 + (pump / m2) * q1 * q1;
    return d;
  };

  FullTrajectory out;
  out.states.reserve(n_samples + 1);
  out.v1.reserve(n_samples + 1);
  const double scale1 = std::sqrt(m1 / (2.0 * w1 * sc.c_sc));
  auto observe = [&](double t, const V& y) {
    out.states.push_back({y[0], y[1], y[2], y[3], t});
    out.v1.push_back(scale1 * std::complex<double>(w1 * y[0], -y[2]) *
                     std::polar(1.0, -w1 * t));
  };
  const V y0{s0.q1, s0.q2, s0.p1, s0.p2};
  rk4_fixed(rhs, y0, s0.t, h, n_samples * per_sample, per_sample, observe);
  return out;
}

}  // namespace nlf
