#pragma once

#include <stdexcept>
#include <string>

namespace pentadrive {

/// Invalid or inconsistent configuration (bad parameter values, unknown keys).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The plant state stopped being finite. Carries the simulation time and a
/// printout of the offending state.
struct SimulationDiverged : std::runtime_error {
  SimulationDiverged(double t, const std::string& state_dump)
      : std::runtime_error("simulation diverged at t=" + std::to_string(t) +
                           " s: " + state_dump),
        time(t) {}
  double time;
};

/// Controller produced a non-finite prediction or was asked to run from an
/// invalid internal state.
struct ControllerFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// An indicator is not defined for the given trace (e.g. zero speed reference).
struct UndefinedIndicator : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// File parse/serialization failure; message includes position diagnostics.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pentadrive
