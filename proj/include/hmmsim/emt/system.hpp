#pragma once

// Two-machine EMT system: machine rotor/control blocks plus the network
// block, coupled through subtransient EMFs behind merged series branches.

#include "hmmsim/emt/machine.hpp"
#include "hmmsim/emt/network.hpp"
#include "hmmsim/solver.hpp"

#include <array>
#include <memory>

namespace hmmsim::emt {

struct EmtParams {
    std::array<GeneratorParams, 2> generators{};
    std::array<ControlParams, 2> controls{};
    NetworkParams network{};

    std::vector<std::string> validate() const;
    NetworkModel network_model() const;
};

/// Two machines with these defaults plus the nominal set-points used by the
/// shipped scenario.
EmtParams default_emt_params();

enum class Topology { pre_trip, post_trip };

const char* to_string(Topology t);

/// State names: G1_* and G2_* rotor/control states followed by the network
/// vectors i1, i2, i4, i7, v3, v4 and, pre-trip, iL1; each vector has
/// components _0, _D, _Q.
LayoutPtr emt_layout(Topology topology);

inline constexpr std::size_t kMachineBlock = 2 * GeneratorState::size;

inline constexpr const char* kTripEvent = "trip_load1";

/// Per-machine operating quantities at a state.
struct MachineQuantities {
    double i_d = 0.0, i_q = 0.0;  ///< local-frame stator current
    MutualFlux flux;
    double torque = 0.0;          ///< air-gap torque p.u.
    double speed_pu = 1.0;
    double v_t = 0.0;             ///< terminal voltage magnitude
    Vec3 emf_global = Vec3::Zero();
};

struct PowerBalance {
    double generation = 0.0;  ///< sum of omega_pu * torque
    double emf_power = 0.0;   ///< sum of e'' . i in the network frame
    double losses = 0.0;      ///< stator, line and load resistive dissipation
    double residual() const { return generation - losses; }
};

class EmtSystem final : public OdeSystem {
public:
    /// Throws ValidationError listing every invalid field.
    EmtSystem(EmtParams params, Topology topology);

    LayoutPtr layout() const override { return layout_; }
    void evaluate(std::span<const double> x, double t, std::span<double> dxdt) const override;
    std::string description() const override;
    StateVector apply_event(std::string_view event_id, const StateVector& x, double t) override;
    std::unique_ptr<OdeSystem> clone() const override;

    const EmtParams& params() const noexcept { return params_; }
    Topology topology() const noexcept { return topology_; }

    GeneratorState machine_state(std::span<const double> x, int k) const;
    std::array<MachineQuantities, 2> machine_quantities(std::span<const double> x) const;
    PowerBalance power_balance(std::span<const double> x) const;

private:
    EmtParams params_;
    Topology topology_;
    NetworkModel net_;
    LayoutPtr layout_;
};

/// Assembles the coupled system. Same as constructing EmtSystem directly.
std::unique_ptr<EmtSystem> assemble_emt_system(const EmtParams& params, Topology topology);

}  // namespace hmmsim::emt
