#pragma once

// Steady-state initialization of the two-machine system.

#include "hmmsim/emt/system.hpp"

namespace hmmsim::emt {

enum class FrequencyMode {
    /// Speed deviations pinned to 0; G1's governor set-point is the slack unknown.
    pinned,
    /// Common speed deviation is an unknown; set-points stay fixed.
    free,
};

struct Equilibrium {
    StateVector state;
    EmtParams params;          ///< with the solved slack set-point in pinned mode
    double residual = 0.0;     ///< max |f| over every non-angle row
    int iterations = 0;
    double frequency_offset = 0.0;  ///< common speed deviation, rad/s
};

struct EquilibriumOptions {
    int max_iterations = 50;
    double tolerance = 1e-10;
    double fd_step = 1e-7;
};

/// Phasor load-flow estimate of the pinned-frequency equilibrium.
StateVector equilibrium_guess(const EmtParams& params, Topology topology);

/// Damped Newton on f(x) = 0 with G1's rotor angle as the reference.
/// Throws InitializationError after max_iterations.
Equilibrium find_equilibrium(const EmtSystem& system, const StateVector& guess,
                             FrequencyMode mode = FrequencyMode::pinned,
                             const EquilibriumOptions& options = {});

/// max |f_i| over all rows except the rotor-angle rows.
double equilibrium_residual(const EmtSystem& system, const StateVector& x);

}  // namespace hmmsim::emt
