#pragma once

#include <functional>
#include <vector>

#include "pentadrive/control.hpp"
#include "pentadrive/plant.hpp"

namespace pentadrive {

/// Runs the closed loop for t_end seconds and returns one record per
/// controller tick plus a terminal record with the final plant state.
/// omega_ref is sampled at each tick time. The switch state committed at tick
/// k is applied during tick k+1 (one-period actuation delay); tick 0 applies
/// the all-off state. initial sets the plant starting point.
///
/// on_speed_tick, when set, runs just before every speed-loop tick and may
/// retune the controller (the online tuner hook).
inline std::vector<LogRecord> run_closed_loop(
    const MachineParams& machine, const ControllerParams& theta,
    const ControllerConfig& cfg, const LoadSpec& load,
    const std::function<double(double)>& omega_ref, double t_end,
    const PlantState& initial = PlantState{},
    const std::function<void(DriveController&, double /*omega_ref*/,
                             double /*omega_m*/)>& on_speed_tick = {}) {
  machine.validate();
  load.validate();

  DriveController ctrl(machine, theta, cfg);
  PlantState plant = initial;

  const long n_ticks = std::lround(t_end / machine.Ts);
  std::vector<LogRecord> records;
  records.reserve(static_cast<std::size_t>(n_ticks) + 1);

  for (long k = 0; k < n_ticks; ++k) {
    const double w_ref = omega_ref(plant.t);
    if (on_speed_tick && k % cfg.speed_div == 0 && plant.t >= cfg.flux_ramp_s)
      on_speed_tick(ctrl, w_ref, plant.omega_m);

    Measurement m;
    m.i_s = {plant.is_alpha, plant.is_beta, plant.is_x, plant.is_y};
    m.omega_m = plant.omega_m;
    m.t = plant.t;

    LogRecord log;
    const SwitchState u_active = ctrl.applied_state();
    ctrl.step(w_ref, m, log);
    log.torque = electromagnetic_torque(plant, machine);
    log.torque_load = load_torque(load, plant.omega_m, plant.t);

    plant = step_plant(plant, u_active, load, machine);
    plant.sigma = ctrl.ifoc().sigma;
    records.push_back(log);
  }

  // Terminal record: final plant sample, no new control decision.
  LogRecord last = records.empty() ? LogRecord{} : records.back();
  last.t = plant.t;
  last.omega_ref = omega_ref(plant.t);
  last.omega_m = plant.omega_m;
  last.i_alpha = plant.is_alpha;
  last.i_beta = plant.is_beta;
  last.i_x = plant.is_x;
  last.i_y = plant.is_y;
  last.sc = 0;
  last.torque = electromagnetic_torque(plant, machine);
  last.torque_load = load_torque(load, plant.omega_m, plant.t);
  records.push_back(last);
  return records;
}

}  // namespace pentadrive
