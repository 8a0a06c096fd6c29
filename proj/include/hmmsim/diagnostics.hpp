#pragma once

// Stiffness analysis, analytic two-scale test problems and trace error
// metrics.

#include "hmmsim/solver.hpp"
#include "hmmsim/trace.hpp"

#include <Eigen/Dense>

#include <complex>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hmmsim::diag {

/// Central-difference Jacobian. Column j uses the step fd_step * max(1, |x_j|).
Eigen::MatrixXd numerical_jacobian(const OdeSystem& system, const StateVector& x, double t,
                                   double fd_step = 1e-7);

struct StiffnessReport {
    std::vector<std::complex<double>> eigenvalues;  ///< sorted by magnitude, ascending
    std::size_t k0 = 0;        ///< number of slow eigenvalues
    bool two_scale = false;    ///< a magnitude gap above the split threshold was found
    double scale_gap = 1.0;    ///< min |lambda_fast| / max |lambda_slow|
    double epsilon_estimate = 0.0;  ///< 1 / max |lambda_fast|, s
    double max_real_part = 0.0;     ///< C1
    double slow_radius = 0.0;       ///< C2 = max |lambda_slow|
    double fast_scaled_min = 0.0;   ///< C3 = epsilon * min |lambda_fast|
    double fast_scaled_max = 0.0;   ///< C4 = epsilon * max |lambda_fast|
    double separation = 0.0;        ///< rho = min |lambda_slow - lambda_fast|
    bool unstable = false;          ///< some Re(lambda) above the instability tolerance

    std::size_t zero_count = 0;     ///< eigenvalues treated as exactly zero
};

/// Dense eigen-analysis of a Jacobian. The slow/fast split sits at the
/// largest ratio between consecutive eigenvalue magnitudes, provided it
/// exceeds split_threshold. Eigenvalues with |lambda| below
/// zero_tol * max|lambda| count as slow and do not enter the gap search.
StiffnessReport stiffness_report(const Eigen::MatrixXd& jacobian, double split_threshold = 10.0,
                                 double instability_tol = 1e-6, double zero_tol = 1e-10);

enum class TestKind { dissipative, oscillatory };

const char* to_string(TestKind kind);
TestKind parse_test_kind(std::string_view text);

struct TestProblem {
    std::unique_ptr<OdeSystem> system;
    /// Slow reference solution given the initial state: the slow-manifold
    /// limit (dissipative) or the averaged solution (oscillatory).
    std::function<StateVector(const StateVector& x0, double t)> reference;
    TestKind kind = TestKind::dissipative;
    double epsilon = 0.0;
    /// Name of the slow variable.
    std::string slow_variable;
};

/// dissipative: eps*x1' = -(x1 - x2), x2' = -x1; slow limit x1 = x2 = x2(0) e^{-t}.
/// oscillatory: w' = -w + sin(t / eps); averaged solution w(0) e^{-t}.
TestProblem make_test_system(TestKind kind, double epsilon);

/// Which candidate rows take part in a comparison. automatic uses the macro
/// rows when the candidate has any inside the interval, otherwise every row.
enum class NodeSelection { automatic, macro_only, all };

struct ErrorMetrics {
    double rel_l2 = 0.0;
    double max_abs = 0.0;
    std::map<std::string, double> per_variable;  ///< rel_l2 per requested spec (vector components pooled)
    std::pair<double, double> compared_interval{0.0, 0.0};
    std::size_t matched_nodes = 0;
};

/// Column names a variable spec resolves to. A spec is either a column name,
/// a vector prefix p (expanding to p_0, p_D, p_Q) or env(p), the DQ
/// envelope sqrt(p_D^2 + p_Q^2).
std::vector<std::string> resolve_variables(const std::vector<std::string>& columns,
                                           const std::vector<std::string>& specs);

/// Relative L2 error of candidate against reference over [t0, t1]. Candidate
/// rows are matched to the nearest reference node within match_tol (default
/// half the smallest reference spacing); no interpolation.
ErrorMetrics trajectory_error(const SimulationTrace& reference, const SimulationTrace& candidate,
                              const std::vector<std::string>& variables,
                              std::pair<double, double> interval,
                              NodeSelection selection = NodeSelection::automatic,
                              std::optional<double> match_tol = std::nullopt);

/// Values of one resolved variable (column or env(p)) at each row; NaN where
/// absent.
std::vector<double> trace_values(const SimulationTrace& trace, const std::string& variable);
std::vector<double> trace_times(const SimulationTrace& trace);
std::vector<NodeMode> trace_modes(const SimulationTrace& trace);

}  // namespace hmmsim::diag
