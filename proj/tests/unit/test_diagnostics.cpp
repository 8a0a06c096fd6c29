#include "hmmsim/diagnostics.hpp"
#include "hmmsim/hmm.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace hmmsim;
using Catch::Approx;

TEST_CASE("jacobian of a linear field", "[diagnostics]") {
    Eigen::Matrix3d A;
    A << -1, 2, 0.5, 0, -3, 4, 1e3, 0, -7;
    FunctionSystem sys(anonymous_layout(3), [A](std::span<const double> x, double, std::span<double> d) {
        Eigen::Map<Eigen::VectorXd>(d.data(), 3) = A * Eigen::Map<const Eigen::Vector3d>(x.data());
    });
    const auto J = diag::numerical_jacobian(sys, StateVector(sys.layout(), {0.3, -1.0, 2.0}), 0.0);
    CHECK((J - A).cwiseAbs().maxCoeff() <= 1e-6);

    FunctionSystem zero(anonymous_layout(2), [](std::span<const double>, double, std::span<double> d) {
        d[0] = d[1] = 0.0;
    });
    CHECK(diag::numerical_jacobian(zero, StateVector(zero.layout(), {1.0, 2.0}), 0.0).isZero(0.0));
}

TEST_CASE("stiffness of a diagonal matrix", "[diagnostics]") {
    Eigen::Matrix2d J;
    J << -1, 0, 0, -1e4;
    const auto r = diag::stiffness_report(J);
    CHECK(r.k0 == 1);
    CHECK(r.two_scale);
    CHECK(r.scale_gap == Approx(1e4).epsilon(1e-12));
    CHECK(r.epsilon_estimate == Approx(1e-4).epsilon(1e-12));
    CHECK(r.slow_radius == Approx(1.0));
    CHECK(r.fast_scaled_max == Approx(1.0));
    CHECK(r.separation == Approx(9999.0));
    CHECK_FALSE(r.unstable);
}

TEST_CASE("rotation block eigenvalues", "[diagnostics]") {
    const double w = 376.99111843077515;
    Eigen::Matrix2d J;
    J << 0, w, -w, 0;
    const auto r = diag::stiffness_report(J);
    REQUIRE(r.eigenvalues.size() == 2);
    for (const auto& l : r.eigenvalues) {
        CHECK(std::abs(l.real()) <= 1e-9);
        CHECK(std::abs(std::abs(l.imag()) - w) <= 1e-9 * w);
    }
    CHECK_FALSE(r.two_scale);
}

TEST_CASE("unstable eigenvalue is flagged", "[diagnostics]") {
    Eigen::Matrix2d J;
    J << 1e-3, 0, 0, -5;
    CHECK(diag::stiffness_report(J).unstable);
}

TEST_CASE("dissipative test system scale gap", "[diagnostics]") {
    const double eps = 1e-3;
    auto p = diag::make_test_system(diag::TestKind::dissipative, eps);
    const auto J = diag::numerical_jacobian(*p.system, StateVector(p.system->layout(), {1.0, 1.0}), 0.0);
    const auto r = diag::stiffness_report(J);
    const auto l = oracle::dissipative_eigenvalues(eps);
    CHECK(r.scale_gap == Approx(l[1] / l[0]).epsilon(1e-6));
    CHECK(std::abs(r.scale_gap - 1.0 / eps) <= 0.2 / eps);
}

TEST_CASE("dissipative test system against the closed form", "[diagnostics]") {
    const double eps = 1e-4;
    auto p = diag::make_test_system(diag::TestKind::dissipative, eps);
    CHECK(p.slow_variable == "x2");
    StateVector x0(p.system->layout(), {1.0, 1.0});
    const auto tr = run_baseline(*p.system, x0, 1.0, 1e-5);
    const auto exact = oracle::dissipative_exact(eps, {1.0, 1.0}, 1.0);
    CHECK(std::abs(tr.back_state().at("x2") - exact[1]) <= 1e-9);
    CHECK(std::abs(tr.back_state().at("x2") - std::exp(-1.0)) <= 2e-4);
    const auto& seg = tr.segments().front();
    double gap = 0.0;
    for (std::size_t i = 0; i < seg.size(); ++i) gap = std::max(gap, std::abs(seg.row(i)[0] - seg.row(i)[1]));
    CHECK(gap <= 2.0 * eps);
    CHECK(p.reference(x0, 1.0).at("x2") == Approx(std::exp(-1.0)));
}

TEST_CASE("oscillatory test system stays near its average", "[diagnostics]") {
    const double eps = 1e-4;
    auto p = diag::make_test_system(diag::TestKind::oscillatory, eps);
    StateVector w0(p.system->layout(), {1.0});
    const auto tr = run_baseline(*p.system, w0, 1.0, 5e-6);
    const auto& seg = tr.segments().front();
    double worst = 0.0, worst_exact = 0.0;
    for (std::size_t i = 0; i < seg.size(); ++i) {
        const double t = seg.times[i];
        worst_exact = std::max(worst_exact, std::abs(seg.row(i)[0] - oracle::oscillatory_exact(eps, 1.0, t)));
        if (t >= 0.1) worst = std::max(worst, std::abs(seg.row(i)[0] - std::exp(-t)));
    }
    CHECK(worst <= 2 * eps);
    CHECK(worst_exact <= 1e-9);
}

TEST_CASE("variable spec resolution", "[diagnostics]") {
    const std::vector<std::string> cols{"i4_0", "i4_D", "i4_Q", "v3_D", "x"};
    CHECK(diag::resolve_variables(cols, {"i4"}) == std::vector<std::string>{"i4_0", "i4_D", "i4_Q"});
    CHECK(diag::resolve_variables(cols, {"x"}) == std::vector<std::string>{"x"});
    CHECK_THROWS_AS(diag::resolve_variables(cols, {"nope"}), ComparisonError);
}

TEST_CASE("trajectory error basics", "[diagnostics]") {
    auto l = make_layout({"a", "b_D", "b_Q"});
    SimulationTrace ref, off;
    for (int i = 0; i <= 100; ++i) {
        const double t = i * 0.01;
        const double r[3] = {1.0, 3.0, 4.0};
        const double o[3] = {1.0 + 1e-3, 3.0, 4.0};
        ref.append(i, t, NodeMode::micro, l, r);
        off.append(i, t, NodeMode::micro, l, o);
    }
    auto same = diag::trajectory_error(ref, ref, {"a", "env(b)"}, {0.0, 1.0});
    CHECK(same.rel_l2 == 0.0);
    CHECK(same.max_abs == 0.0);
    CHECK(same.matched_nodes == 101);
    auto m = diag::trajectory_error(ref, off, {"a", "env(b)"}, {0.0, 1.0});
    CHECK(m.per_variable.at("a") == Approx(1e-3).epsilon(1e-9));
    CHECK(m.per_variable.at("env(b)") == 0.0);
    CHECK(diag::trace_values(ref, "env(b)")[0] == 5.0);
    CHECK_THROWS_AS(diag::trajectory_error(ref, off, {"a"}, {2.0, 3.0}), ComparisonError);
}

TEST_CASE("hmm against fine rk4 on the dissipative problem", "[diagnostics]") {
    const double eps = 1e-4;
    auto p = diag::make_test_system(diag::TestKind::dissipative, eps);
    StateVector x0(p.system->layout(), {1.0, 1.0});
    HmmConfig c;
    c.h_micro = 1e-5;
    c.H_macro = 0.01;
    c.eta = 1e-3;
    const auto base = run_baseline(*p.system, x0, 2.0, 1e-5);
    const auto hmm = run_schedule(*p.system, x0, single_phase_schedule(2.0, PhaseMode::hmm), c);
    const auto m = diag::trajectory_error(base, hmm, {"x2"}, {0.0, 2.0});
    CHECK(m.per_variable.at("x2") <= 1e-2);
    CHECK(m.matched_nodes > 100);
}
