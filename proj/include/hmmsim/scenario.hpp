#pragma once

// Scenario files (TOML): solver settings, phase plan, model parameters and
// output selection.

#include "hmmsim/diagnostics.hpp"
#include "hmmsim/emt/system.hpp"
#include "hmmsim/hmm.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hmmsim {

enum class SystemKind { emt, test };

const char* to_string(SystemKind kind);

struct Scenario {
    struct Simulation {
        double t_end = 8.0;
        double h_micro = 5e-6;
        bool deterministic = true;
        SystemKind system = SystemKind::emt;
    } simulation;

    /// h_micro mirrors simulation.h_micro.
    HmmConfig hmm;
    PhaseSchedule schedule;

    /// Present when simulation.system is emt.
    std::optional<emt::EmtParams> emt;

    struct TestSystem {
        diag::TestKind kind = diag::TestKind::dissipative;
        double epsilon = 1e-4;
        std::vector<double> x0{1.0, 1.0};
    };
    /// Present when simulation.system is test.
    std::optional<TestSystem> test_system;

    struct Outputs {
        std::vector<std::string> variables;  ///< CSV columns; empty selects every state
        std::int64_t decimate = 1;
        std::vector<std::string> compare;    ///< slow variables for the bench error metrics
        std::optional<std::pair<double, double>> compare_interval;
    } outputs;

    /// Interval used for bench error metrics: outputs.compare_interval, else
    /// the span of the HMM phases, else the whole run.
    std::pair<double, double> comparison_interval() const;

    /// Every violated cross-field invariant; empty when valid.
    std::vector<std::string> validate() const;
};

/// Parses and validates a scenario. Throws ParseError (with the line) on
/// malformed TOML and ValidationError listing every violation otherwise.
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(std::string_view text, const std::string& source = "<string>");

/// Full TOML echo with every default spelled out; parse_scenario(to_toml(s))
/// reproduces s.
std::string to_toml(const Scenario& scenario);

}  // namespace hmmsim
