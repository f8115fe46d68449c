#pragma once

// Umbrella header for the pentadrive library: a desk-scale simulator and
// auto-tuning toolkit for a five-phase induction motor drive under indirect
// field-oriented control with a finite-state predictive current loop.

#include "pentadrive/ann.hpp"
#include "pentadrive/commands.hpp"
#include "pentadrive/config.hpp"
#include "pentadrive/control.hpp"
#include "pentadrive/errors.hpp"
#include "pentadrive/io.hpp"
#include "pentadrive/metrics.hpp"
#include "pentadrive/plant.hpp"
#include "pentadrive/sim.hpp"
#include "pentadrive/transforms.hpp"
#include "pentadrive/tuner.hpp"

namespace pentadrive {
inline constexpr const char* kVersion = "1.0.0";
}
