#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace pentadrive {

using Vec2 = std::array<double, 2>;
using Vec4 = std::array<double, 4>;
using Vec5 = std::array<double, 5>;
using Mat2 = std::array<Vec2, 2>;
using Mat4 = std::array<Vec4, 4>;
using Mat45 = std::array<Vec5, 4>;
using Mat55 = std::array<Vec5, 5>;

/// Electrical angle between adjacent phases of the five-phase winding (rad).
inline constexpr double kPhaseStep = 2.0 * std::numbers::pi / 5.0;

inline constexpr int kNumSwitchStates = 32;

/// Wraps an angle to [0, 2*pi).
inline double wrap_two_pi(double angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(angle, two_pi);
  if (w < 0.0) w += two_pi;
  return w;
}

/// On/off state of the five inverter legs. Leg i "on" ties phase i to the
/// positive DC rail. States are indexed 0..31 in binary counting order with
/// leg 1 as the least significant bit; lower index wins cost ties, so the
/// enumeration order is part of the controller contract.
struct SwitchState {
  std::array<std::uint8_t, 5> u{};

  static SwitchState from_index(int idx) {
    SwitchState s;
    for (int i = 0; i < 5; ++i) s.u[i] = static_cast<std::uint8_t>((idx >> i) & 1);
    return s;
  }

  int index() const {
    int idx = 0;
    for (int i = 0; i < 5; ++i) idx |= (u[i] ? 1 : 0) << i;
    return idx;
  }

  bool operator==(const SwitchState&) const = default;
};

/// All 32 leg combinations, index 0 = all off, index 31 = all on.
inline std::array<SwitchState, kNumSwitchStates> enumerate_switch_states() {
  std::array<SwitchState, kNumSwitchStates> all{};
  for (int k = 0; k < kNumSwitchStates; ++k) all[k] = SwitchState::from_index(k);
  return all;
}

/// Stator phase voltages (V). Components always sum to zero: the machine
/// neutral is isolated, so only differences between leg voltages matter.
struct PhaseVoltages {
  Vec5 v{};
};

/// Leg-state to phase-voltage map, scaled by vdc: vdc/5 * (5*I - ones).
inline Mat55 phase_voltage_matrix(double vdc) {
  Mat55 t{};
  const double c = vdc / 5.0;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) t[i][j] = (i == j) ? 4.0 * c : -c;
  return t;
}

/// Phase voltages produced by a switch state at DC-link voltage vdc.
/// Computed from the integer core (5*u_i - sum u) so the component sum is an
/// exact floating-point zero whenever vdc/5 is exact.
inline PhaseVoltages phase_voltages(const SwitchState& u, double vdc) {
  int s = 0;
  for (int i = 0; i < 5; ++i) s += u.u[i];
  PhaseVoltages out;
  const double c = vdc / 5.0;
  for (int i = 0; i < 5; ++i) out.v[i] = static_cast<double>(5 * u.u[i] - s) * c;
  return out;
}

/// Components of a five-phase quantity after the Clarke decomposition:
/// alpha-beta carries the torque-producing fundamental, x-y the low-order
/// harmonic content, z the zero sequence (identically forced with an
/// isolated neutral, kept so the matrix stays square and invertible).
struct AlphaBetaXY {
  double alpha = 0.0;
  double beta = 0.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// Five-phase Clarke matrix, 2/5-scaled. Rows: alpha = cos(h*step),
/// beta = sin(h*step), x = cos(2h*step), y = sin(2h*step), z = 1/2,
/// for phase index h = 0..4.
inline Mat55 clarke_matrix() {
  Mat55 m{};
  const double s = 2.0 / 5.0;
  for (int h = 0; h < 5; ++h) {
    m[0][h] = s * std::cos(h * kPhaseStep);
    m[1][h] = s * std::sin(h * kPhaseStep);
    m[2][h] = s * std::cos(2.0 * h * kPhaseStep);
    m[3][h] = s * std::sin(2.0 * h * kPhaseStep);
    m[4][h] = s * 0.5;
  }
  return m;
}

/// Clarke decomposition of a five-phase vector (voltages or currents).
inline AlphaBetaXY clarke(const Vec5& ph) {
  const Mat55 m = clarke_matrix();
  double out[5];
  for (int r = 0; r < 5; ++r) {
    double acc = 0.0;
    for (int c = 0; c < 5; ++c) acc += m[r][c] * ph[c];
    out[r] = acc;
  }
  return AlphaBetaXY{out[0], out[1], out[2], out[3], out[4]};
}

/// Rotating-frame components. Convention: the d axis coincides with alpha at
/// sigma = 0, i.e. d = cos(sigma)*alpha + sin(sigma)*beta,
/// q = -sin(sigma)*alpha + cos(sigma)*beta. x and y are not rotated.
struct DqFrame {
  double d = 0.0;
  double q = 0.0;
  double x = 0.0;
  double y = 0.0;
};

inline DqFrame park(const AlphaBetaXY& ab, double sigma) {
  const double c = std::cos(sigma), s = std::sin(sigma);
  DqFrame dq;
  dq.d = c * ab.alpha + s * ab.beta;
  dq.q = -s * ab.alpha + c * ab.beta;
  dq.x = ab.x;
  dq.y = ab.y;
  return dq;
}

inline AlphaBetaXY inverse_park(const DqFrame& dq, double sigma) {
  const double c = std::cos(sigma), s = std::sin(sigma);
  AlphaBetaXY ab;
  ab.alpha = c * dq.d - s * dq.q;
  ab.beta = s * dq.d + c * dq.q;
  ab.x = dq.x;
  ab.y = dq.y;
  ab.z = 0.0;
  return ab;
}

}  // namespace pentadrive
