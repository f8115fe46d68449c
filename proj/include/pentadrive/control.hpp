#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "pentadrive/errors.hpp"
#include "pentadrive/plant.hpp"
#include "pentadrive/transforms.hpp"

namespace pentadrive {

/// The tuned quantity: speed-loop PI gains and the two cost weights of the
/// predictive current controller.
struct ControllerParams {
  double kp = 0.2;         // A s/rad
  double ki = 1.0;         // A/rad
  double lambda_xy = 0.1;  // weight on x-y tracking error
  double lambda_sc = 0.02; // weight on commutation count

  void validate() const {
    if (kp < 0.0 || ki < 0.0 || lambda_xy < 0.0 || lambda_sc < 0.0)
      throw ConfigError("controller parameters must be >= 0");
  }
};

/// Speed PI integrator state with symmetric output saturation.
struct PiState {
  double integral = 0.0;      // accumulated error (rad)
  double prev_error = 0.0;    // previous error sample, for the trapezoidal rule
  double output_limit = 2.0;  // |i_q*| cap (A)
};

/// One speed-loop update: i_q* = kp*e + ki*integral(e), trapezoidal
/// integration, conditional anti-windup (the integrator freezes while the
/// output is saturated and the error would push it further). The stored
/// integral is clamped so |ki * integral| never exceeds the output limit.
inline double pi_speed_step(double omega_ref, double omega_m, PiState& st,
                            const ControllerParams& theta, double dt) {
  const double e = omega_ref - omega_m;
  double integral_next = st.integral + 0.5 * dt * (e + st.prev_error);
  const double raw = theta.kp * e + theta.ki * integral_next;
  const double lim = st.output_limit;

  const bool saturated = std::abs(raw) > lim;
  const bool pushing = raw * e > 0.0;
  if (!(saturated && pushing)) {
    if (theta.ki > 0.0)
      integral_next = std::clamp(integral_next, -lim / theta.ki, lim / theta.ki);
    st.integral = integral_next;
  }
  st.prev_error = e;

  const double out = theta.kp * e + theta.ki * st.integral;
  return std::clamp(out, -lim, lim);
}

/// Field-orientation state: flux current command, flux angle and the
/// synchronous speed the angle advances at.
struct IfocState {
  double id_ref = 0.5;    // flux-producing current command (A)
  double sigma = 0.0;     // flux angle (rad), in [0, 2*pi)
  double omega_e = 0.0;   // synchronous speed (rad/s)
};

/// Advances the flux angle: slip = (Rr/Lr)*(iq*/id*), omega_e = P*omega_m +
/// slip, sigma += omega_e*dt wrapped to [0, 2*pi). Throws if no flux command
/// is established.
inline void ifoc_update(IfocState& st, double iq_ref, double omega_m,
                        const MachineParams& p, double dt) {
  if (!(st.id_ref > 0.0))
    throw ControllerFault("flux not established: id_ref must be > 0");
  const double slip = (p.Rr / p.Lr()) * (iq_ref / st.id_ref);
  st.omega_e = p.pole_pairs * omega_m + slip;
  st.sigma = wrap_two_pi(st.sigma + st.omega_e * dt);
}

/// Stator current references in the stationary frame at flux angle
/// sigma + lead: the rotation of (id*, iq*), so the alpha-beta pair has norm
/// ||(id*, iq*)|| and sits at angle sigma + lead + atan2(iq*, id*).
/// x and y references are exactly zero.
inline AlphaBetaXY generate_current_refs(const IfocState& st, double iq_ref,
                                         double lead = 0.0) {
  return inverse_park(DqFrame{st.id_ref, iq_ref, 0.0, 0.0}, st.sigma + lead);
}

/// Number of inverter legs that toggle between two states (0..5).
inline int switch_changes(const SwitchState& a, const SwitchState& b) {
  int n = 0;
  for (int i = 0; i < 5; ++i) n += std::abs(int(a.u[i]) - int(b.u[i]));
  return n;
}

/// Outcome of one predictive search over the 32 candidate states.
struct FsmpcDecision {
  SwitchState u_next{};   // state to commit for the next period
  double j_min = 0.0;     // cost of the winner
  double e_ab2 = 0.0;     // squared alpha-beta error term of the winner
  double e_xy2 = 0.0;     // squared x-y error term of the winner
  int sc = 0;             // commutation count of the winner
};

/// Exhaustive minimization of
///   J = ||E_ab(k+2)||^2 + lambda_xy*||E_xy(k+2)||^2 + lambda_sc*SC(k+1)
/// over the 32 candidates for u(k+1). The first prediction advances the
/// measurement under the already-committed u(k); the second one, per
/// candidate, compensates the computation delay. rotor_bias is the Ts-folded
/// alpha-beta contribution of the estimated rotor currents, held constant
/// over the two-step horizon. Ties go to the lowest state index.
inline FsmpcDecision fsmpc_select(const Vec4& i_meas, const SwitchState& u_applied,
                                  const AlphaBetaXY& refs_k2,
                                  const PredictionModel& pm,
                                  const ControllerParams& theta, double vdc,
                                  const Vec2& rotor_bias = {0.0, 0.0}) {
  const Vec4 i_k1 = predict_one_step(pm, i_meas, u_applied, vdc, rotor_bias);
  if (!std::isfinite(i_k1[0]) || !std::isfinite(i_k1[1]) ||
      !std::isfinite(i_k1[2]) || !std::isfinite(i_k1[3]))
    throw ControllerFault("non-finite current prediction");

  FsmpcDecision best;
  bool have_best = false;
  for (int idx = 0; idx < kNumSwitchStates; ++idx) {
    const SwitchState cand = SwitchState::from_index(idx);
    const Vec4 i_k2 = predict_one_step(pm, i_k1, cand, vdc, rotor_bias);

    const double ea = refs_k2.alpha - i_k2[0];
    const double eb = refs_k2.beta - i_k2[1];
    const double ex = refs_k2.x - i_k2[2];
    const double ey = refs_k2.y - i_k2[3];
    const double e_ab2 = ea * ea + eb * eb;
    const double e_xy2 = ex * ex + ey * ey;
    const int sc = switch_changes(u_applied, cand);
    const double j = e_ab2 + theta.lambda_xy * e_xy2 + theta.lambda_sc * sc;

    if (!have_best || j < best.j_min) {
      best = FsmpcDecision{cand, j, e_ab2, e_xy2, sc};
      have_best = true;
    }
  }
  if (!std::isfinite(best.j_min))
    throw ControllerFault("non-finite cost in predictive search");
  return best;
}

/// Fixed (non-tuned) controller settings.
struct ControllerConfig {
  double id_ref = 0.5;        // flux command after ramp-up (A)
  double flux_ramp_s = 0.2;   // flux ramp duration; speed loop engages after it
  double output_limit = 2.0;  // speed PI saturation (A)
  int speed_div = 10;         // speed loop runs every speed_div current-loop ticks

  void validate() const {
    if (!(id_ref > 0.0)) throw ConfigError("control.id_ref must be > 0");
    if (flux_ramp_s < 0.0) throw ConfigError("control.flux_ramp_s must be >= 0");
    if (!(output_limit > 0.0)) throw ConfigError("control.output_limit must be > 0");
    if (speed_div < 1) throw ConfigError("control.speed_div must be >= 1");
  }
};

/// One per-tick record of every intermediate quantity; the CSV trace schema.
struct LogRecord {
  double t = 0.0;
  double omega_ref = 0.0;
  double omega_m = 0.0;
  double id_ref = 0.0;
  double iq_ref = 0.0;
  double i_alpha_ref = 0.0, i_beta_ref = 0.0, i_x_ref = 0.0, i_y_ref = 0.0;
  double i_alpha = 0.0, i_beta = 0.0, i_x = 0.0, i_y = 0.0;
  SwitchState u{};         // state applied during this period
  int sc = 0;              // commutations committed at the end of this period
  double j_total = 0.0, j_ab = 0.0, j_xy = 0.0;
  double torque = 0.0;       // electromagnetic torque (N m)
  double torque_ref = 0.0;   // k_T * iq_ref with the instantaneous flux command
  double torque_load = 0.0;  // opposing load torque (N m)
};

/// Stator current measurement handed to the controller each tick.
struct Measurement {
  Vec4 i_s{};        // (alpha, beta, x, y)
  double omega_m = 0.0;
  double t = 0.0;
};

/// Steady-state torque per ampere of q current at flux command id_ref.
inline double torque_constant(const MachineParams& p, double id_ref) {
  return 2.5 * p.pole_pairs * (p.LM * p.LM / p.Lr()) * id_ref;
}

/// Cascaded drive controller: outer speed PI (decimated), field orientation,
/// and the predictive current loop, plus an open-loop rotor-current estimator
/// feeding the prediction. One call = one current-loop tick. The tick is the
/// exact composition, in order, of: pi_speed_step (on speed-loop ticks),
/// ifoc_update, generate_current_refs, fsmpc_select.
class DriveController {
 public:
  DriveController(const MachineParams& machine, const ControllerParams& theta,
                  const ControllerConfig& cfg)
      : machine_(machine), theta_(theta), cfg_(cfg) {
    machine_.validate();
    theta_.validate();
    cfg_.validate();
    pi_.output_limit = cfg_.output_limit;
    ifoc_.id_ref = flux_command(0.0);
  }

  /// Runs one tick against the measurement and returns the switch state to
  /// apply over the next period. The caller keeps applying the previously
  /// committed state for the current period (one-period actuation delay).
  SwitchState step(double omega_ref, const Measurement& m, LogRecord& log) {
    const double ts = machine_.Ts;

    ifoc_.id_ref = flux_command(m.t);
    if (m.t >= cfg_.flux_ramp_s && tick_ % cfg_.speed_div == 0)
      iq_ref_ = pi_speed_step(omega_ref, m.omega_m, pi_, theta_, cfg_.speed_div * ts);

    ifoc_update(ifoc_, iq_ref_, m.omega_m, machine_, ts);

    const AlphaBetaXY refs_now = generate_current_refs(ifoc_, iq_ref_);
    const AlphaBetaXY refs_k2 =
        generate_current_refs(ifoc_, iq_ref_, 2.0 * ifoc_.omega_e * ts);

    const double omega_elec = machine_.pole_pairs * m.omega_m;
    const PredictionModel pm = build_prediction_model(omega_elec, machine_);
    const Vec2 bias = rotor_coupling_bias(ir_est_, omega_elec, machine_);
    const FsmpcDecision dec =
        fsmpc_select(m.i_s, u_applied_, refs_k2, pm, theta_, machine_.Vdc, bias);

    advance_rotor_estimate(m, omega_elec);

    log.t = m.t;
    log.omega_ref = omega_ref;
    log.omega_m = m.omega_m;
    log.id_ref = ifoc_.id_ref;
    log.iq_ref = iq_ref_;
    log.i_alpha_ref = refs_now.alpha;
    log.i_beta_ref = refs_now.beta;
    log.i_x_ref = refs_now.x;
    log.i_y_ref = refs_now.y;
    log.i_alpha = m.i_s[0];
    log.i_beta = m.i_s[1];
    log.i_x = m.i_s[2];
    log.i_y = m.i_s[3];
    log.u = u_applied_;
    log.sc = dec.sc;
    log.j_total = dec.j_min;
    log.j_ab = dec.e_ab2;
    log.j_xy = dec.e_xy2;
    log.torque_ref = torque_constant(machine_, ifoc_.id_ref) * iq_ref_;

    u_applied_ = dec.u_next;
    ++tick_;
    return dec.u_next;
  }

  void set_params(const ControllerParams& theta) {
    theta.validate();
    theta_ = theta;
  }
  const ControllerParams& params() const { return theta_; }
  const IfocState& ifoc() const { return ifoc_; }
  const PiState& pi() const { return pi_; }
  const SwitchState& applied_state() const { return u_applied_; }
  const Vec2& rotor_estimate() const { return ir_est_; }
  double iq_ref() const { return iq_ref_; }
  long tick() const { return tick_; }

  // Test hooks: place the controller in a known mid-run state.
  void set_internal(const PiState& pi, const IfocState& ifoc, double iq_ref,
                    const SwitchState& u_applied, const Vec2& ir_est, long tick) {
    pi_ = pi;
    ifoc_ = ifoc;
    iq_ref_ = iq_ref;
    u_applied_ = u_applied;
    ir_est_ = ir_est;
    tick_ = tick;
  }

  /// Flux command profile: ramps to the configured command over flux_ramp_s,
  /// floored at 5% so the slip division is always defined.
  double flux_command(double t) const {
    if (cfg_.flux_ramp_s <= 0.0) return cfg_.id_ref;
    const double f = std::clamp(t / cfg_.flux_ramp_s, 0.05, 1.0);
    return cfg_.id_ref * f;
  }

 private:
  void advance_rotor_estimate(const Measurement& m, double omega_elec) {
    const PhaseVoltages ph = phase_voltages(u_applied_, machine_.Vdc);
    const AlphaBetaXY v = clarke(ph.v);
    ir_est_ = observer_rotor_step(ir_est_, {m.i_s[0], m.i_s[1]}, {v.alpha, v.beta},
                                  omega_elec, machine_, machine_.Ts);
  }

  MachineParams machine_;
  ControllerParams theta_;
  ControllerConfig cfg_;
  PiState pi_{};
  IfocState ifoc_{};
  Vec2 ir_est_{0.0, 0.0};
  SwitchState u_applied_{};  // committed for the period being executed
  double iq_ref_ = 0.0;
  long tick_ = 0;
};

}  // namespace pentadrive
