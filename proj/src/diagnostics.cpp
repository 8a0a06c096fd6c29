#include "hmmsim/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace hmmsim::diag {

Eigen::MatrixXd numerical_jacobian(const OdeSystem& system, const StateVector& x, double t,
                                   double fd_step) {
    if (!(fd_step > 0.0)) throw ParameterError("fd_step must be positive");
    const std::size_t n = system.dimension();
    if (x.size() != n) throw ShapeError("state does not match system dimension");
    Eigen::MatrixXd J(n, n);
    std::vector<double> xp(x.values().begin(), x.values().end());
    std::vector<double> fp(n), fm(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double xj = xp[j];
        const double step = fd_step * std::max(1.0, std::abs(xj));
        xp[j] = xj + step;
        system.evaluate(xp, t, fp);
        check_finite(system, fp, t, 0, "jacobian column");
        xp[j] = xj - step;
        system.evaluate(xp, t, fm);
        check_finite(system, fm, t, 0, "jacobian column");
        xp[j] = xj;
        for (std::size_t i = 0; i < n; ++i) J(i, j) = (fp[i] - fm[i]) / (2.0 * step);
    }
    return J;
}

StiffnessReport stiffness_report(const Eigen::MatrixXd& jacobian, double split_threshold,
                                 double instability_tol, double zero_tol) {
    if (jacobian.rows() != jacobian.cols()) throw ShapeError("jacobian must be square");
    if (jacobian.rows() == 0) throw ShapeError("jacobian is empty");
    Eigen::EigenSolver<Eigen::MatrixXd> solver(jacobian, false);
    if (solver.info() != Eigen::Success) throw DiagnosticError("eigensolver did not converge");

    StiffnessReport rep;
    const auto& ev = solver.eigenvalues();
    rep.eigenvalues.assign(ev.data(), ev.data() + ev.size());
    std::stable_sort(rep.eigenvalues.begin(), rep.eigenvalues.end(),
                     [](auto a, auto b) { return std::abs(a) < std::abs(b); });
    const std::size_t n = rep.eigenvalues.size();

    double max_mag = 0.0;
    for (auto l : rep.eigenvalues) max_mag = std::max(max_mag, std::abs(l));
    rep.max_real_part = rep.eigenvalues.front().real();
    for (auto l : rep.eigenvalues) rep.max_real_part = std::max(rep.max_real_part, l.real());
    rep.unstable = rep.max_real_part > instability_tol;

    while (rep.zero_count < n && std::abs(rep.eigenvalues[rep.zero_count]) <= zero_tol * max_mag) {
        ++rep.zero_count;
    }

    // Largest consecutive magnitude ratio among the non-zero eigenvalues.
    double best = 1.0;
    std::size_t split = n;
    for (std::size_t i = rep.zero_count; i + 1 < n; ++i) {
        const double ratio = std::abs(rep.eigenvalues[i + 1]) / std::abs(rep.eigenvalues[i]);
        if (ratio > best) {
            best = ratio;
            split = i + 1;
        }
    }
    rep.two_scale = best > split_threshold;
    rep.scale_gap = best;
    rep.k0 = rep.two_scale ? split : n;

    if (rep.two_scale) {
        const double slow_max = std::abs(rep.eigenvalues[rep.k0 - 1]);
        const double fast_min = std::abs(rep.eigenvalues[rep.k0]);
        const double fast_max = std::abs(rep.eigenvalues.back());
        rep.epsilon_estimate = 1.0 / fast_max;
        rep.slow_radius = slow_max;
        rep.fast_scaled_min = rep.epsilon_estimate * fast_min;
        rep.fast_scaled_max = rep.epsilon_estimate * fast_max;
        rep.separation = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < rep.k0; ++i) {
            for (std::size_t j = rep.k0; j < n; ++j) {
                rep.separation =
                    std::min(rep.separation, std::abs(rep.eigenvalues[i] - rep.eigenvalues[j]));
            }
        }
    } else {
        rep.slow_radius = max_mag;
        rep.epsilon_estimate = max_mag > 0.0 ? 1.0 / max_mag : 0.0;
    }
    return rep;
}

// -----------------------------------------------------------------------------
// Test problems
// -----------------------------------------------------------------------------

const char* to_string(TestKind kind) {
    return kind == TestKind::dissipative ? "dissipative" : "oscillatory";
}

TestKind parse_test_kind(std::string_view text) {
    if (text == "dissipative") return TestKind::dissipative;
    if (text == "oscillatory") return TestKind::oscillatory;
    throw ParameterError("unknown test system kind '" + std::string(text) +
                         "' (expected dissipative or oscillatory)");
}

TestProblem make_test_system(TestKind kind, double epsilon) {
    if (!(epsilon > 0.0)) throw ParameterError("epsilon must be positive");
    TestProblem p;
    p.kind = kind;
    p.epsilon = epsilon;
    if (kind == TestKind::dissipative) {
        auto layout = make_layout({"x1", "x2"});
        const double inv = 1.0 / epsilon;
        p.system = std::make_unique<FunctionSystem>(
            layout,
            [inv](std::span<const double> x, double, std::span<double> dx) {
                dx[0] = -(x[0] - x[1]) * inv;
                dx[1] = -x[0];
            },
            "dissipative two-scale test system, eps = " + std::to_string(epsilon));
        p.reference = [layout](const StateVector& x0, double t) {
            const double v = x0[1] * std::exp(-t);
            return StateVector(layout, {v, v});
        };
        p.slow_variable = "x2";
    } else {
        auto layout = make_layout({"w"});
        const double inv = 1.0 / epsilon;
        p.system = std::make_unique<FunctionSystem>(
            layout,
            [inv](std::span<const double> x, double t, std::span<double> dx) {
                dx[0] = -x[0] + std::sin(t * inv);
            },
            "oscillatory test system, eps = " + std::to_string(epsilon));
        p.reference = [layout](const StateVector& x0, double t) {
            return StateVector(layout, {x0[0] * std::exp(-t)});
        };
        p.slow_variable = "w";
    }
    return p;
}

// -----------------------------------------------------------------------------
// Trace metrics
// -----------------------------------------------------------------------------

namespace {

constexpr const char* kComponents[] = {"_0", "_D", "_Q"};

bool is_env(const std::string& spec, std::string& prefix) {
    if (spec.size() > 5 && spec.rfind("env(", 0) == 0 && spec.back() == ')') {
        prefix = spec.substr(4, spec.size() - 5);
        return true;
    }
    return false;
}

bool has_column(const std::vector<std::string>& columns, const std::string& name) {
    return std::find(columns.begin(), columns.end(), name) != columns.end();
}

}  // namespace

std::vector<std::string> resolve_variables(const std::vector<std::string>& columns,
                                           const std::vector<std::string>& specs) {
    std::vector<std::string> out;
    for (const auto& spec : specs) {
        std::string prefix;
        if (is_env(spec, prefix)) {
            if (!has_column(columns, prefix + "_D") || !has_column(columns, prefix + "_Q")) {
                throw ComparisonError("envelope '" + spec + "' needs columns " + prefix + "_D and " +
                                      prefix + "_Q");
            }
            out.push_back(spec);
        } else if (has_column(columns, spec)) {
            out.push_back(spec);
        } else {
            bool any = false;
            for (const char* c : kComponents) {
                if (has_column(columns, spec + c)) {
                    out.push_back(spec + c);
                    any = true;
                }
            }
            if (!any) throw ComparisonError("unknown variable '" + spec + "'");
        }
    }
    return out;
}

std::vector<double> trace_values(const SimulationTrace& trace, const std::string& variable) {
    std::vector<double> out;
    out.reserve(trace.size());
    std::string prefix;
    const bool env = is_env(variable, prefix);
    for (const auto& seg : trace.segments()) {
        const auto& lay = *seg.layout;
        std::size_t ia = 0, ib = 0;
        bool ok = false;
        if (env) {
            const auto a = lay.find(prefix + "_D");
            const auto b = lay.find(prefix + "_Q");
            if (a && b) {
                ia = *a;
                ib = *b;
                ok = true;
            }
        } else if (const auto a = lay.find(variable)) {
            ia = *a;
            ok = true;
        }
        const std::size_t n = lay.size();
        for (std::size_t i = 0; i < seg.size(); ++i) {
            if (!ok) {
                out.push_back(std::nan(""));
            } else if (env) {
                out.push_back(std::hypot(seg.values[i * n + ia], seg.values[i * n + ib]));
            } else {
                out.push_back(seg.values[i * n + ia]);
            }
        }
    }
    return out;
}

std::vector<double> trace_times(const SimulationTrace& trace) {
    std::vector<double> out;
    out.reserve(trace.size());
    for (const auto& seg : trace.segments()) out.insert(out.end(), seg.times.begin(), seg.times.end());
    return out;
}

std::vector<NodeMode> trace_modes(const SimulationTrace& trace) {
    std::vector<NodeMode> out;
    out.reserve(trace.size());
    for (const auto& seg : trace.segments()) out.insert(out.end(), seg.modes.begin(), seg.modes.end());
    return out;
}

ErrorMetrics trajectory_error(const SimulationTrace& reference, const SimulationTrace& candidate,
                              const std::vector<std::string>& variables,
                              std::pair<double, double> interval, NodeSelection selection,
                              std::optional<double> match_tol) {
    if (reference.empty() || candidate.empty()) throw ComparisonError("cannot compare empty traces");
    if (variables.empty()) throw ComparisonError("no variables selected for comparison");
    const double t0 = std::max({interval.first, reference.front_time(), candidate.front_time()});
    const double t1 = std::min({interval.second, reference.back_time(), candidate.back_time()});
    if (!(t1 >= t0)) throw ComparisonError("traces do not overlap on the requested interval");

    const auto ref_t = trace_times(reference);
    const auto cand_t = trace_times(candidate);
    const auto cand_modes = trace_modes(candidate);

    double tol = match_tol.value_or(std::numeric_limits<double>::infinity());
    if (!match_tol) {
        for (std::size_t i = 1; i < ref_t.size(); ++i) {
            const double d = ref_t[i] - ref_t[i - 1];
            if (d > 0.0) tol = std::min(tol, 0.5 * d);
        }
        if (!std::isfinite(tol)) tol = 0.0;
    }
    const double edge = 1e-12 * std::max(1.0, std::abs(t1));

    auto in_range = [&](std::size_t i) { return cand_t[i] >= t0 - edge && cand_t[i] <= t1 + edge; };
    bool use_macro = selection == NodeSelection::macro_only;
    if (selection == NodeSelection::automatic) {
        for (std::size_t i = 0; i < cand_t.size() && !use_macro; ++i) {
            use_macro = in_range(i) && cand_modes[i] == NodeMode::macro;
        }
    }

    // Candidate row -> reference row.
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < cand_t.size(); ++i) {
        if (!in_range(i)) continue;
        if (use_macro && cand_modes[i] != NodeMode::macro) continue;
        const auto it = std::lower_bound(ref_t.begin(), ref_t.end(), cand_t[i]);
        std::size_t best = ref_t.size();
        double best_d = std::numeric_limits<double>::infinity();
        if (it != ref_t.end()) {
            best = static_cast<std::size_t>(it - ref_t.begin());
            best_d = *it - cand_t[i];
        }
        if (it != ref_t.begin()) {
            const auto j = static_cast<std::size_t>(it - ref_t.begin()) - 1;
            if (cand_t[i] - ref_t[j] <= best_d) {
                best = j;
                best_d = cand_t[i] - ref_t[j];
            }
        }
        if (best < ref_t.size() && best_d <= tol) pairs.emplace_back(i, best);
    }
    if (pairs.empty()) throw ComparisonError("no candidate node matches a reference node");

    const auto ref_cols = reference.columns();
    const auto cand_cols = candidate.columns();
    ErrorMetrics m;
    m.compared_interval = {t0, t1};
    m.matched_nodes = pairs.size();
    double num = 0.0, den = 0.0;
    for (const auto& spec : variables) {
        const auto ref_names = resolve_variables(ref_cols, {spec});
        const auto cand_names = resolve_variables(cand_cols, {spec});
        if (ref_names != cand_names) {
            throw ComparisonError("variable '" + spec + "' resolves differently in the two traces");
        }
        double vn = 0.0, vd = 0.0;
        for (const auto& name : ref_names) {
            const auto r = trace_values(reference, name);
            const auto c = trace_values(candidate, name);
            for (auto [ci, ri] : pairs) {
                if (std::isnan(r[ri]) || std::isnan(c[ci])) continue;
                const double d = c[ci] - r[ri];
                vn += d * d;
                vd += r[ri] * r[ri];
                m.max_abs = std::max(m.max_abs, std::abs(d));
            }
        }
        num += vn;
        den += vd;
        m.per_variable[spec] = vd > 0.0 ? std::sqrt(vn / vd) : std::sqrt(vn);
    }
    m.rel_l2 = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
    return m;
}

}  // namespace hmmsim::diag
