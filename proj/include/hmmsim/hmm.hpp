#pragma once

// Heterogeneous multiscale cycle: reconstruct -> micro-integrate -> kernel
// average -> macro step, and the phase schedule that switches between pure
// micro integration and HMM mode.

#include "hmmsim/kernel.hpp"
#include "hmmsim/solver.hpp"
#include "hmmsim/trace.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hmmsim {

enum class AnchorMode { window_end, evaluation_point };

const char* to_string(AnchorMode mode);
AnchorMode parse_anchor_mode(std::string_view text);

/// Coefficients of the general macro multistep form
///   X^{n+1} = sum_k a_k X^{(k)} + H sum_k b_k f_k + c X*
/// with history depth a.size(). Matrices are multiples of the identity.
/// Only forward Euler (a = {0}, b = {1}, c = 1) is accepted.
struct MacroCoefficients {
    std::vector<double> a{0.0};
    std::vector<double> b{1.0};
    double c = 1.0;

    bool is_forward_euler() const { return a == std::vector<double>{0.0} && b == std::vector<double>{1.0} && c == 1.0; }
};

struct HmmConfig {
    double h_micro = 5e-6;
    double H_macro = 0.012;
    double eta = 0.011;
    std::optional<double> window;   ///< defaults to 2*eta
    std::optional<double> dt_eval;  ///< defaults to eta
    std::optional<double> sigma;    ///< defaults to eta/3
    AnchorMode anchor = AnchorMode::window_end;
    std::string micro_solver = "rk4";
    std::string macro_solver = "forward_euler";
    MacroCoefficients macro;

    double window_length() const { return window.value_or(2.0 * eta); }
    double eval_offset() const { return dt_eval.value_or(eta); }
    double kernel_sigma() const { return sigma.value_or(eta / 3.0); }

    /// Every violated invariant; empty when valid.
    std::vector<std::string> validate() const;
};

/// Integer step counts derived from a validated HmmConfig.
struct HmmPlan {
    HmmConfig config;
    std::int64_t window_steps = 0;  ///< W / h
    std::int64_t macro_steps = 0;   ///< H / h
    std::int64_t eval_steps = 0;    ///< dt_eval / h
    std::int64_t kernel_first = 0;  ///< (dt_eval - eta) / h
    DiscreteKernelWeights kernel;

    /// Tick offset of the anchor from the window start.
    std::int64_t anchor_steps() const;
};

/// Validates cfg (throws ValidationError) and precomputes the kernel.
HmmPlan make_plan(const HmmConfig& cfg);

enum class PhaseMode { micro, hmm };

const char* to_string(PhaseMode mode);

struct Phase {
    std::string name;
    double t_start = 0.0;
    double t_end = 0.0;
    PhaseMode mode = PhaseMode::micro;
};

struct ScheduledEvent {
    double time = 0.0;
    std::string id;
};

struct PhaseSchedule {
    std::vector<Phase> phases;
    std::vector<ScheduledEvent> events;

    double t_start() const { return phases.empty() ? 0.0 : phases.front().t_start; }
    double t_end() const { return phases.empty() ? 0.0 : phases.back().t_end; }
    bool has_hmm_phase() const;

    /// Contiguity, coverage from 0, grid alignment to h and event placement.
    std::vector<std::string> validate(double h) const;
};

/// Single phase over [0, t_end].
PhaseSchedule single_phase_schedule(double t_end, PhaseMode mode, std::string name = "all");

/// Reconstruction R (macro -> micro) and compression Q (micro -> macro).
struct TransferOps {
    std::function<StateVector(const StateVector&)> reconstruct_op;
    std::function<StateVector(const StateVector&)> compress_op;

    static TransferOps identity();
};

StateVector reconstruct(const StateVector& X, const TransferOps& ops);
StateVector compress(const StateVector& x, const TransferOps& ops);

struct HmmCycleResult {
    StateVector X_next;
    double t_next = 0.0;
    MicroTrace micro;
    StateVector effective_force;
};

/// One HMM cycle starting at t_n with the configured H.
HmmCycleResult hmm_cycle(const OdeSystem& system, const StateVector& X_n, double t_n,
                         const HmmConfig& cfg, const TransferOps& ops = TransferOps::identity());

/// Runs a phase schedule. Micro phases record every node; HMM phases record
/// every micro-window node (mode micro) and each macro point (mode macro).
/// Events are applied once, at their tick, through system.apply_event().
SimulationTrace run_schedule(OdeSystem& system, const StateVector& x0, const PhaseSchedule& schedule,
                             const HmmConfig& cfg, const TransferOps& ops = TransferOps::identity());

/// As run_schedule, appending into `trace` so that rows recorded before a
/// DivergenceError survive.
void run_schedule_into(OdeSystem& system, const StateVector& x0, const PhaseSchedule& schedule,
                       const HmmConfig& cfg, const TransferOps& ops, SimulationTrace& trace);

/// Plain RK4 at step h over [0, t_end] with events, every node recorded.
SimulationTrace run_baseline(OdeSystem& system, const StateVector& x0, double t_end, double h,
                             const std::vector<ScheduledEvent>& events = {});
void run_baseline_into(OdeSystem& system, const StateVector& x0, double t_end, double h,
                       const std::vector<ScheduledEvent>& events, SimulationTrace& trace);

}  // namespace hmmsim
