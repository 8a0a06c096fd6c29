#pragma once

// Run orchestration behind the command line: simulate, bench, stiffness and
// kernel-check, plus the JSON manifest and bench report.

#include "hmmsim/diagnostics.hpp"
#include "hmmsim/emt/equilibrium.hpp"
#include "hmmsim/scenario.hpp"

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hmmsim::run {

enum class RunMode { baseline, hmm };

const char* to_string(RunMode mode);
RunMode parse_run_mode(std::string_view text);

/// Model instance and initial state for a scenario.
struct Prepared {
    std::unique_ptr<OdeSystem> system;
    StateVector x0;
    std::optional<emt::Equilibrium> equilibrium;  ///< EMT only
};

/// Builds the system. EMT scenarios start from the pre-trip equilibrium (the
/// G1 set-point is the slack), test scenarios from test_system.x0.
Prepared prepare(const Scenario& scenario);

/// Command-line overrides. hmm_phases switches the named phases to HMM mode
/// and every other phase to micro. The result is re-validated.
void apply_overrides(Scenario& scenario, std::optional<AnchorMode> anchor,
                     const std::optional<std::vector<std::string>>& hmm_phases,
                     std::optional<std::int64_t> decimate);

struct RunResult {
    RunMode mode = RunMode::baseline;
    SimulationTrace trace;
    double wall_seconds = 0.0;
    std::string status = "ok";  ///< ok or diverged
    std::optional<std::string> error;
    std::string csv_path;
    std::string manifest_path;
};

/// Runs one mode and times the integration alone. Divergence is caught:
/// the partial trace is kept and the status set to diverged.
RunResult execute(const Scenario& scenario, const Prepared& prepared, RunMode mode);

/// execute() followed by trace_<mode>.csv and manifest_<mode>.json in out_dir.
RunResult run_simulate(const Scenario& scenario, RunMode mode, const std::string& out_dir);

struct PhaseSteps {
    std::string name;
    std::string mode;
    std::int64_t baseline_micro_steps = 0;
    std::int64_t hmm_micro_steps = 0;
    std::int64_t hmm_macro_steps = 0;
    std::int64_t full_cycles = 0;
    std::int64_t cycle_micro_steps = 0;
    std::int64_t cycle_ticks = 0;
};

struct BenchReport {
    std::string status = "ok";
    std::optional<std::string> error;
    double wall_baseline = 0.0;
    double wall_hmm = 0.0;
    double speedup_pct = 0.0;
    bool serial = true;
    std::string anchor;
    std::vector<PhaseSteps> phases;
    std::int64_t baseline_micro_steps = 0;
    std::int64_t hmm_micro_steps = 0;
    /// Micro steps per cycle over the baseline steps covering the same advance.
    double predicted_cycle_ratio = 0.0;
    double measured_cycle_ratio = 0.0;
    double measured_run_ratio = 0.0;
    std::optional<diag::ErrorMetrics> errors;
    std::vector<std::string> compare;
    std::string scenario_echo;
};

std::string to_json(const BenchReport& report);

/// Baseline then HMM on identical inputs, error metrics over the comparison
/// interval, traces, manifests and bench_report.json in out_dir. Throws
/// ConfigurationError when the schedule has no HMM phase.
BenchReport run_bench(const Scenario& scenario, const std::string& out_dir, bool serial = true);

struct StiffnessResult {
    double time = 0.0;
    emt::Topology topology = emt::Topology::pre_trip;
    diag::StiffnessReport report;
};

/// Eigen-analysis of the model Jacobian at time `at`: the initial state for
/// at = 0, else the baseline state reached at `at`.
StiffnessResult run_stiffness(const Scenario& scenario, double at, double fd_step = 1e-7);
void print_stiffness(const StiffnessResult& result, std::ostream& out);

struct KernelCheckRow {
    double frequency_hz = 0.0;
    double discrete = 0.0;  ///< |sum w cos(omega s) h| of the truncated, renormalized kernel
    double gaussian = 0.0;  ///< exp(-(omega sigma)^2 / 2) of the untruncated Gaussian
};

struct KernelCheck {
    double eta = 0.0, sigma = 0.0, h = 0.0;
    std::size_t samples = 0;
    double rescale_factor = 0.0;
    double moment0 = 0.0, moment1 = 0.0, moment2 = 0.0;
    std::vector<KernelCheckRow> attenuation;
};

KernelCheck run_kernel_check(double eta, double sigma, double h);
void print_kernel_check(const KernelCheck& check, std::ostream& out);

/// Writes the run manifest (config echo, wall time, status, phase stats).
void write_manifest(const Scenario& scenario, const Prepared& prepared, const RunResult& result,
                    const std::string& path);

}  // namespace hmmsim::run
