#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>
#include <vector>

#include "pentadrive/errors.hpp"
#include "pentadrive/transforms.hpp"

namespace pentadrive {

/// Electrical and mechanical constants of the five-phase induction machine,
/// plus the DC-link voltage and the discrete-time settings of the drive.
struct MachineParams {
  double Rs = 12.85;     // stator resistance (ohm)
  double Rr = 4.80;      // rotor resistance, referred to stator (ohm)
  double Lls = 0.07993;  // stator leakage inductance (H)
  double Llr = 0.07993;  // rotor leakage inductance (H)
  double LM = 0.6817;    // mutual inductance (H)
  double Jm = 0.02;      // rotational inertia (kg m^2)
  double Bm = 0.001;     // viscous friction (N m s/rad)
  int pole_pairs = 3;
  double Vdc = 300.0;    // DC-link voltage (V)
  double Ts = 100e-6;    // controller sampling period (s)
  int substeps = 10;     // plant integration substeps per Ts

  double Ls() const { return Lls + LM; }
  double Lr() const { return Llr + LM; }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw ConfigError(std::string("machine parameter must be > 0: ") + name);
    };
    positive(Rs, "Rs");
    positive(Rr, "Rr");
    positive(Lls, "Lls");
    positive(Llr, "Llr");
    positive(LM, "LM");
    positive(Jm, "Jm");
    positive(Vdc, "Vdc");
    positive(Ts, "Ts");
    if (Bm < 0.0) throw ConfigError("machine parameter must be >= 0: Bm");
    if (pole_pairs < 1) throw ConfigError("machine parameter must be >= 1: pole_pairs");
    if (substeps < 1) throw ConfigError("machine parameter must be >= 1: substeps");
    if (Ls() * Lr() - LM * LM <= 0.0)
      throw ConfigError("inductance matrix is singular: Ls*Lr <= LM^2");
  }
};

/// Continuous plant state in the stationary frame. Stator currents live in
/// the alpha-beta and x-y subspaces, rotor currents (referred to stator) in
/// alpha-beta only. sigma mirrors the controller flux angle so that a state
/// snapshot is self-contained; the electrical dynamics do not read it.
struct PlantState {
  double is_alpha = 0.0;
  double is_beta = 0.0;
  double is_x = 0.0;
  double is_y = 0.0;
  double ir_alpha = 0.0;
  double ir_beta = 0.0;
  double omega_m = 0.0;  // mechanical speed (rad/s)
  double sigma = 0.0;    // flux angle (rad), wrapped to [0, 2*pi)
  double t = 0.0;        // simulation time (s)

  bool finite() const {
    return std::isfinite(is_alpha) && std::isfinite(is_beta) &&
           std::isfinite(is_x) && std::isfinite(is_y) &&
           std::isfinite(ir_alpha) && std::isfinite(ir_beta) &&
           std::isfinite(omega_m);
  }

  std::string dump() const {
    std::ostringstream os;
    os << "is=(" << is_alpha << "," << is_beta << "," << is_x << "," << is_y
       << ") ir=(" << ir_alpha << "," << ir_beta << ") omega_m=" << omega_m;
    return os.str();
  }
};

/// Opposing load torque source (stands in for the co-axial load machine).
struct LoadSpec {
  enum class Mode { kConstant, kViscous, kProfile };
  Mode mode = Mode::kConstant;
  double t_l0 = 0.0;  // constant term (N m)
  double k_v = 0.0;   // viscous coefficient (N m s/rad), viscous mode only
  std::vector<std::pair<double, double>> profile;  // (t, T_L), strictly increasing t

  void validate() const {
    if (mode == Mode::kProfile) {
      if (profile.empty()) throw ConfigError("load profile must not be empty");
      for (std::size_t i = 1; i < profile.size(); ++i)
        if (!(profile[i].first > profile[i - 1].first))
          throw ConfigError("load profile times must be strictly increasing");
    }
  }
};

/// Load torque at the given speed and time. Profile mode interpolates
/// linearly and clamps outside the breakpoint range.
inline double load_torque(const LoadSpec& load, double omega_m, double t) {
  switch (load.mode) {
    case LoadSpec::Mode::kConstant:
      return load.t_l0;
    case LoadSpec::Mode::kViscous:
      return load.t_l0 + load.k_v * omega_m;
    case LoadSpec::Mode::kProfile: {
      const auto& p = load.profile;
      if (t <= p.front().first) return p.front().second;
      if (t >= p.back().first) return p.back().second;
      for (std::size_t i = 1; i < p.size(); ++i) {
        if (t <= p[i].first) {
          const double f = (t - p[i - 1].first) / (p[i].first - p[i - 1].first);
          return p[i - 1].second + f * (p[i].second - p[i - 1].second);
        }
      }
      return p.back().second;
    }
  }
  return 0.0;
}

/// Electromagnetic torque; bilinear in stator and rotor currents, zero
/// whenever either current pair is zero.
inline double electromagnetic_torque(const PlantState& s, const MachineParams& p) {
  return 2.5 * p.pole_pairs * p.LM *
         (s.is_beta * s.ir_alpha - s.is_alpha * s.ir_beta);
}

/// Time derivative of the continuous states for stator voltage v and load
/// torque t_load. Alpha-beta is the coupled stator/rotor pair with rotor EMF
/// terms at electrical speed pole_pairs*omega_m; x-y is the stator series R-L;
/// the mechanical equation balances electromagnetic torque against friction
/// and load. The sigma slot of the result is 0 and the t slot is 1.
inline PlantState derivative(const PlantState& s, const AlphaBetaXY& v,
                             double t_load, const MachineParams& p) {
  const double ls = p.Ls(), lr = p.Lr(), lm = p.LM;
  const double det = ls * lr - lm * lm;
  const double w = p.pole_pairs * s.omega_m;  // electrical rotor speed

  // Per-axis stator equation: ls*dis + lm*dir = v - Rs*is.
  // Rotor equation: lm*dis + lr*dir = -Rr*ir -/+ w*psi_r(other axis).
  const double fa_s = v.alpha - p.Rs * s.is_alpha;
  const double fb_s = v.beta - p.Rs * s.is_beta;
  const double psi_r_alpha = lr * s.ir_alpha + lm * s.is_alpha;
  const double psi_r_beta = lr * s.ir_beta + lm * s.is_beta;
  const double fa_r = -p.Rr * s.ir_alpha - w * psi_r_beta;
  const double fb_r = -p.Rr * s.ir_beta + w * psi_r_alpha;

  PlantState d;
  d.is_alpha = (lr * fa_s - lm * fa_r) / det;
  d.is_beta = (lr * fb_s - lm * fb_r) / det;
  d.ir_alpha = (ls * fa_r - lm * fa_s) / det;
  d.ir_beta = (ls * fb_r - lm * fb_s) / det;
  d.is_x = (v.x - p.Rs * s.is_x) / p.Lls;
  d.is_y = (v.y - p.Rs * s.is_y) / p.Lls;
  d.omega_m = (electromagnetic_torque(s, p) - p.Bm * s.omega_m - t_load) / p.Jm;
  d.sigma = 0.0;
  d.t = 1.0;
  return d;
}

namespace detail {

inline std::array<double, 7> pack(const PlantState& s) {
  return {s.is_alpha, s.is_beta, s.is_x, s.is_y, s.ir_alpha, s.ir_beta, s.omega_m};
}

inline void unpack(const std::array<double, 7>& x, PlantState& s) {
  s.is_alpha = x[0];
  s.is_beta = x[1];
  s.is_x = x[2];
  s.is_y = x[3];
  s.ir_alpha = x[4];
  s.ir_beta = x[5];
  s.omega_m = x[6];
}

}  // namespace detail

/// Advances the plant by one controller period Ts using classical RK4 with
/// `substeps` equal substeps; the switch state (and hence the voltage) is held
/// constant over the period. Throws SimulationDiverged if the state stops
/// being finite.
inline PlantState step_plant(const PlantState& state, const SwitchState& u,
                             const LoadSpec& load, const MachineParams& p) {
  const AlphaBetaXY v = clarke(phase_voltages(u, p.Vdc).v);
  const double h = p.Ts / p.substeps;

  PlantState s = state;
  auto rhs = [&](const PlantState& at) {
    return detail::pack(derivative(at, v, load_torque(load, at.omega_m, at.t), p));
  };

  for (int n = 0; n < p.substeps; ++n) {
    const std::array<double, 7> x0 = detail::pack(s);
    PlantState tmp = s;

    const std::array<double, 7> k1 = rhs(s);
    std::array<double, 7> xs;
    for (int i = 0; i < 7; ++i) xs[i] = x0[i] + 0.5 * h * k1[i];
    detail::unpack(xs, tmp);
    tmp.t = s.t + 0.5 * h;
    const std::array<double, 7> k2 = rhs(tmp);

    for (int i = 0; i < 7; ++i) xs[i] = x0[i] + 0.5 * h * k2[i];
    detail::unpack(xs, tmp);
    tmp.t = s.t + 0.5 * h;
    const std::array<double, 7> k3 = rhs(tmp);

    for (int i = 0; i < 7; ++i) xs[i] = x0[i] + h * k3[i];
    detail::unpack(xs, tmp);
    tmp.t = s.t + h;
    const std::array<double, 7> k4 = rhs(tmp);

    for (int i = 0; i < 7; ++i)
      xs[i] = x0[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    detail::unpack(xs, s);
    s.t += h;
  }

  s.t = state.t + p.Ts;  // avoid substep accumulation drift
  if (!s.finite()) throw SimulationDiverged(s.t, s.dump());
  return s;
}

/// Discrete one-step model of the measurable stator currents
/// (alpha, beta, x, y): i(k+1) ~= phi * i(k) + vdc * psi * u(k) + rotor bias.
/// phi is the forward-Euler map I + A*Ts at the build speed; psi maps a leg
/// state to a current increment per volt of DC-link voltage.
struct PredictionModel {
  Mat4 phi{};
  Mat45 psi{};
  double omega_used = 0.0;  // electrical speed phi was built at (rad/s)
};

/// Builds the prediction matrices at electrical rotor speed omega_elec
/// (= pole_pairs * omega_m). Deterministic for fixed inputs.
inline PredictionModel build_prediction_model(double omega_elec, const MachineParams& p) {
  const double ls = p.Ls(), lr = p.Lr(), lm = p.LM;
  const double det = ls * lr - lm * lm;

  PredictionModel pm;
  pm.omega_used = omega_elec;

  // Stator-to-stator block of the continuous model.
  const double a_ss_d = -lr * p.Rs / det;            // diagonal
  const double a_ss_o = omega_elec * lm * lm / det;  // off-diagonal (+ for alpha row)
  const double a_xy = -p.Rs / p.Lls;

  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) pm.phi[i][j] = (i == j) ? 1.0 : 0.0;
  pm.phi[0][0] += p.Ts * a_ss_d;
  pm.phi[0][1] += p.Ts * a_ss_o;
  pm.phi[1][0] -= p.Ts * a_ss_o;
  pm.phi[1][1] += p.Ts * a_ss_d;
  pm.phi[2][2] += p.Ts * a_xy;
  pm.phi[3][3] += p.Ts * a_xy;

  // Voltage path: leg state -> phase volts (per volt DC) -> alpha-beta-x-y ->
  // current increment over Ts.
  const Mat55 t1 = phase_voltage_matrix(1.0);
  const Mat55 m = clarke_matrix();
  const double gain[4] = {lr / det, lr / det, 1.0 / p.Lls, 1.0 / p.Lls};
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 5; ++c) {
      double acc = 0.0;
      for (int k = 0; k < 5; ++k) acc += m[r][k] * t1[k][c];
      pm.psi[r][c] = p.Ts * gain[r] * acc;
    }
  }
  return pm;
}

/// Ts-folded alpha-beta increment contributed by the (estimated) rotor
/// currents to a one-step stator prediction.
inline Vec2 rotor_coupling_bias(const Vec2& ir_est, double omega_elec,
                                const MachineParams& p) {
  const double lr = p.Lr(), lm = p.LM;
  const double det = p.Ls() * lr - lm * lm;
  const double d = lm * p.Rr / det;
  const double o = omega_elec * lm * lr / det;
  return {p.Ts * (d * ir_est[0] + o * ir_est[1]),
          p.Ts * (-o * ir_est[0] + d * ir_est[1])};
}

/// Alpha-beta rotor-current time derivative of the machine model; used by the
/// controller-side open-loop estimator.
inline Vec2 rotor_current_derivative(const Vec2& is_ab, const Vec2& ir_ab,
                                     const Vec2& v_ab, double omega_elec,
                                     const MachineParams& p) {
  const double ls = p.Ls(), lr = p.Lr(), lm = p.LM;
  const double det = ls * lr - lm * lm;
  const double fa_s = v_ab[0] - p.Rs * is_ab[0];
  const double fb_s = v_ab[1] - p.Rs * is_ab[1];
  const double fa_r = -p.Rr * ir_ab[0] - omega_elec * (lr * ir_ab[1] + lm * is_ab[1]);
  const double fb_r = -p.Rr * ir_ab[1] + omega_elec * (lr * ir_ab[0] + lm * is_ab[0]);
  return {(ls * fa_r - lm * fa_s) / det, (ls * fb_r - lm * fb_s) / det};
}

/// Advances the rotor-current estimate by h seconds holding the stator
/// current, voltage and speed constant. The rotor block is a decaying
/// rotation (a*I + b*J), so its matrix exponential has a closed form and the
/// update stays stable at any speed, where forward Euler would not: the
/// block's eigenvalues are dominated by the j*omega part once the machine
/// spins.
inline Vec2 observer_rotor_step(const Vec2& ir, const Vec2& is_ab, const Vec2& v_ab,
                                double omega_elec, const MachineParams& p, double h) {
  const double ls = p.Ls(), lr = p.Lr(), lm = p.LM;
  const double det = ls * lr - lm * lm;
  const double a = -ls * p.Rr / det;
  const double b = omega_elec * ls * lr / det;

  // Forcing term w = A_rs * i_s + B_r * v, constant over the step.
  const double w0 =
      (lm * p.Rs * is_ab[0] - omega_elec * ls * lm * is_ab[1] - lm * v_ab[0]) / det;
  const double w1 =
      (omega_elec * ls * lm * is_ab[0] + lm * p.Rs * is_ab[1] - lm * v_ab[1]) / det;

  const double decay = std::exp(a * h);
  const double c = decay * std::cos(b * h);
  const double s = decay * std::sin(b * h);

  // Homogeneous part: E * ir with E = exp((a*I + b*J) * h).
  const double h0 = c * ir[0] - s * ir[1];
  const double h1 = s * ir[0] + c * ir[1];

  // Particular part: A^-1 (E - I) w, with A^-1 = (a*I - b*J) / (a^2 + b^2).
  const double n2 = a * a + b * b;
  const double e0 = (c - 1.0) * w0 - s * w1;
  const double e1 = s * w0 + (c - 1.0) * w1;
  const double p0 = (a * e0 + b * e1) / n2;
  const double p1 = (-b * e0 + a * e1) / n2;

  return {h0 + p0, h1 + p1};
}

/// One-step stator current prediction under switch state u.
inline Vec4 predict_one_step(const PredictionModel& pm, const Vec4& i_s,
                             const SwitchState& u, double vdc,
                             const Vec2& rotor_bias) {
  Vec4 out{};
  for (int r = 0; r < 4; ++r) {
    double acc = 0.0;
    for (int c = 0; c < 4; ++c) acc += pm.phi[r][c] * i_s[c];
    for (int c = 0; c < 5; ++c) acc += vdc * pm.psi[r][c] * u.u[c];
    out[r] = acc;
  }
  out[0] += rotor_bias[0];
  out[1] += rotor_bias[1];
  return out;
}

}  // namespace pentadrive
