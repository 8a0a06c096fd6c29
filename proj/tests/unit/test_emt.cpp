#include "hmmsim/diagnostics.hpp"
#include "hmmsim/emt/equilibrium.hpp"
#include "hmmsim/emt/machine.hpp"
#include "hmmsim/emt/network.hpp"
#include "hmmsim/emt/park.hpp"
#include "hmmsim/emt/system.hpp"
#include "hmmsim/hmm.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <complex>
#include <random>

using namespace hmmsim;
using namespace hmmsim::emt;
using Catch::Approx;
using cd = std::complex<double>;

namespace {

const Equilibrium& pre_trip_equilibrium() {
    static const Equilibrium eq = [] {
        const auto p = default_emt_params();
        EmtSystem sys(p, Topology::pre_trip);
        return find_equilibrium(sys, equilibrium_guess(p, Topology::pre_trip));
    }();
    return eq;
}

double max_abs(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

// ---------------------------------------------------------------- park

TEST_CASE("park matrix at zero angle", "[emt][park]") {
    const Mat3 P = park_matrix(0.0);
    const double s3 = 1.0 / std::sqrt(3.0);
    Mat3 expect;
    expect << 1.0 / 3, 1.0 / 3, 1.0 / 3, 2.0 / 3, -1.0 / 3, -1.0 / 3, 0.0, s3, -s3;
    CHECK((P - expect).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("park inverse and oracle agreement", "[emt][park]") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> th(-10.0, 10.0), val(-2.0, 2.0);
    for (int k = 0; k < 100; ++k) {
        const double t = th(rng);
        CHECK((park_matrix(t) * inverse_park_matrix(t) - Mat3::Identity()).cwiseAbs().maxCoeff() <= 1e-13);
        const std::array<double, 3> abc{val(rng), val(rng), val(rng)};
        const auto odq = oracle::park(t, abc);
        const Vec3 got = park_matrix(t) * Vec3(abc[0], abc[1], abc[2]);
        for (int i = 0; i < 3; ++i) CHECK(got[i] == Approx(odq[i]).margin(1e-14));
    }
}

TEST_CASE("balanced set maps to the d axis", "[emt][park]") {
    for (double t : {0.0, 0.3, 1.7, -2.5, 100.0}) {
        const double a = 2.0 * oracle::pi / 3.0;
        const Vec3 odq = park_matrix(t) * Vec3(std::cos(t), std::cos(t - a), std::cos(t + a));
        CHECK(std::abs(odq[0]) <= 1e-14);
        CHECK(odq[1] == Approx(1.0).epsilon(1e-14));
        CHECK(std::abs(odq[2]) <= 1e-14);
    }
}

TEST_CASE("park rotation rate", "[emt][park]") {
    const double w = 2 * oracle::pi * 60;
    Mat3 expect = Mat3::Zero();
    expect(1, 2) = w;
    expect(2, 1) = -w;
    for (double t : {0.0, 0.9, 2.2}) {
        CHECK((park_rotation_rate(t, w) - expect).cwiseAbs().maxCoeff() <= 1e-12);
        const Mat3 numeric = w * park_derivative(t) * inverse_park_matrix(t);
        CHECK((numeric - expect).cwiseAbs().maxCoeff() <= 1e-10 * w);
    }
    CHECK(park_rotation_rate(1.0, 0.0).isZero(0.0));
}

TEST_CASE("park derivative against finite differences", "[emt][park]") {
    const double h = 1e-6;
    for (double t : {0.1, 1.3, -0.7}) {
        const Mat3 fd = (park_matrix(t + h) - park_matrix(t - h)) / (2 * h);
        CHECK((fd - park_derivative(t)).cwiseAbs().maxCoeff() <= 1e-6);
    }
}

TEST_CASE("dq envelope", "[emt][park]") {
    CHECK(dq_envelope(1.0, 0.0) == 1.0);
    CHECK(dq_envelope(3.0, 4.0) == 5.0);
    const double xD = 0.8, xQ = -0.35;
    double peak = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double th = 2 * oracle::pi * i / n;
        peak = std::max(peak, std::abs(oracle::inverse_park(th, {0.0, xD, xQ})[0]));
    }
    CHECK(std::abs(peak - dq_envelope(xD, xQ)) <= 1e-9);
}

// ---------------------------------------------------------------- machine

TEST_CASE("mutual flux", "[emt][machine]") {
    GeneratorParams p;
    GeneratorState s;
    auto m = mutual_flux(s, 0.0, 0.0, p);
    CHECK(m.ad == 0.0);
    CHECK(m.aq == 0.0);
    s.psi_fd = p.L_fd;
    s.psi_1d = p.L_1d;
    CHECK(mutual_flux(s, 2.0, 0.0, p).ad == Approx(0.0).margin(1e-15));

    // implicit definition: lambda_ad = L_ad (-i_d + i_fd + i_1d), i_k = (psi_k - lambda_ad) / L_k
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2, 2);
    for (int k = 0; k < 50; ++k) {
        s.psi_fd = u(rng);
        s.psi_1d = u(rng);
        s.psi_1q = u(rng);
        s.psi_2q = u(rng);
        const double id = u(rng), iq = u(rng);
        m = mutual_flux(s, id, iq, p);
        const double ifd = (s.psi_fd - m.ad) / p.L_fd, i1d = (s.psi_1d - m.ad) / p.L_1d;
        const double i1q = (s.psi_1q - m.aq) / p.L_1q, i2q = (s.psi_2q - m.aq) / p.L_2q;
        CHECK(std::abs(m.ad - p.L_ad * (-id + ifd + i1d)) <= 1e-12);
        CHECK(std::abs(m.aq - p.L_aq * (-iq + i1q + i2q)) <= 1e-12);
    }
}

TEST_CASE("subtransient inductance", "[emt][machine]") {
    GeneratorParams p;
    CHECK(p.subtransient_d() == Approx(1.0 / (1.0 / p.L_ad + 1.0 / p.L_fd + 1.0 / p.L_1d)).epsilon(1e-15));
    CHECK(p.subtransient_inductance() == Approx(p.L_l + p.subtransient_d()));
}

TEST_CASE("generator derivative balances", "[emt][machine]") {
    GeneratorParams p;
    ControlParams c;
    GeneratorState s;
    s.psi_fd = 1.1;
    s.psi_1d = 0.9;
    s.psi_1q = -0.4;
    s.psi_2q = -0.35;
    const double id = 0.4, iq = 0.6;
    const auto m = mutual_flux(s, id, iq, p);
    s.pm = electrical_torque(m, id, iq);
    s.dw = 0.0;
    auto d = generator_derivatives(s, id, iq, 1.0, p, c);
    CHECK(d.dw == Approx(0.0).margin(1e-12));
    CHECK(d.delta == 0.0);
    // dpsi_fd is affine in e_fd; solve for its root
    GeneratorState s0 = s, s1 = s;
    s0.efd = 0.0;
    s1.efd = 1.0;
    const double f0 = generator_derivatives(s0, id, iq, 1.0, p, c).psi_fd;
    const double f1 = generator_derivatives(s1, id, iq, 1.0, p, c).psi_fd;
    s.efd = -f0 / (f1 - f0);
    d = generator_derivatives(s, id, iq, 1.0, p, c);
    CHECK(std::abs(d.psi_fd) <= 1e-12);
}

TEST_CASE("generator parameter validation", "[emt][machine]") {
    GeneratorParams p;
    CHECK(p.validate("G1").empty());
    p.H = -1.0;
    p.L_fd = 0.0;
    const auto issues = p.validate("G1");
    CHECK(issues.size() >= 2);
    CHECK(issues[0].find("G1.") == 0);
}

// ---------------------------------------------------------------- network

TEST_CASE("network zero state", "[emt][network]") {
    const auto net = default_emt_params().network_model();
    std::vector<double> x(kNetworkStates + kLoad1States, 0.0), dx(x.size(), 1.0);
    network_derivatives(net, true, x, Vec3::Zero(), Vec3::Zero(), net.omega_b, dx);
    CHECK(max_abs(dx) == 0.0);
}

TEST_CASE("network steady state matches a phasor solve", "[emt][network]") {
    const auto net = default_emt_params().network_model();
    const double wb = net.omega_b;
    const cd j(0.0, 1.0);
    auto Z = [&](const Branch& b) { return cd(b.R, b.L); };
    const cd E1(1.05, 0.1), E2(0.95, -0.3);
    // nodal admittance solve written out by hand
    const cd y1 = 1.0 / Z(net.gen1), y2 = 1.0 / Z(net.gen2), yl1 = 1.0 / Z(net.load1), yl2 = 1.0 / Z(net.load2),
             y7 = 1.0 / Z(net.line);
    const cd a11 = y1 + yl1 + y7 + j * net.shunt3, a12 = -y7;
    const cd a21 = -y7, a22 = y2 + yl2 + y7 + j * net.shunt4;
    const cd b1 = y1 * E1, b2 = y2 * E2;
    const cd det = a11 * a22 - a12 * a21;
    const cd V3 = (b1 * a22 - a12 * b2) / det, V4 = (a11 * b2 - a21 * b1) / det;
    const cd I1 = (E1 - V3) * y1, I2 = (E2 - V4) * y2, I4 = V4 * yl2, I7 = (V3 - V4) * y7, IL1 = V3 * yl1;

    std::vector<double> x(kNetworkStates + kLoad1States, 0.0), dx(x.size());
    auto put = [&](std::size_t off, cd v) {
        x[off + 1] = v.real();
        x[off + 2] = v.imag();
    };
    put(kI1, I1);
    put(kI2, I2);
    put(kI4, I4);
    put(kI7, I7);
    put(kV3, V3);
    put(kV4, V4);
    put(kIL1, IL1);
    network_derivatives(net, true, x, Vec3(0, E1.real(), E1.imag()), Vec3(0, E2.real(), E2.imag()), wb, dx);
    // derivatives scale with omega_b / L; compare against that scale
    CHECK(max_abs(dx) <= 1e-9 * wb / 0.02);
    // KCL at nodes 3 and 4
    CHECK(std::abs(I1 - I7 - IL1 - j * net.shunt3 * V3) <= 1e-12);
    CHECK(std::abs(I2 + I7 - I4 - j * net.shunt4 * V4) <= 1e-12);
}

TEST_CASE("network stored energy balance", "[emt][network]") {
    const auto net = default_emt_params().network_model();
    const double wb = net.omega_b;
    const std::size_t n = kNetworkStates + kLoad1States;
    // fixed-frame (omega_r = 0) run driven by sinusoidal abc-like sources in DQ
    auto e1 = [](double t) { return Vec3(0.02 * std::sin(50 * t), std::cos(300 * t), std::sin(300 * t)); };
    auto e2 = [](double t) { return Vec3(0.0, 0.9 * std::cos(310 * t + 0.4), 0.9 * std::sin(310 * t + 0.4)); };
    FunctionSystem sys(anonymous_layout(n), [&](std::span<const double> x, double t, std::span<double> d) {
        network_derivatives(net, true, x, e1(t), e2(t), 0.0, d);
    });
    // energy in DQ0 with 2/3 scaling: (L/(2 wb)) * (2 i0^2 + iD^2 + iQ^2), likewise for C
    auto energy = [&](std::span<const double> x) {
        auto q = [&](std::size_t off) { return 2 * x[off] * x[off] + x[off + 1] * x[off + 1] + x[off + 2] * x[off + 2]; };
        return (net.gen1.L * q(kI1) + net.gen2.L * q(kI2) + net.load2.L * q(kI4) + net.line.L * q(kI7) +
                net.load1.L * q(kIL1) + net.shunt3 * q(kV3) + net.shunt4 * q(kV4)) /
               (2 * wb);
    };
    auto power = [&](std::span<const double> x, double t) {
        auto dot = [&](const Vec3& a, std::size_t off) { return 2 * a[0] * x[off] + a[1] * x[off + 1] + a[2] * x[off + 2]; };
        auto q = [&](std::size_t off) { return 2 * x[off] * x[off] + x[off + 1] * x[off + 1] + x[off + 2] * x[off + 2]; };
        const double inj = dot(e1(t), kI1) + dot(e2(t), kI2);
        const double loss = net.gen1.R * q(kI1) + net.gen2.R * q(kI2) + net.load2.R * q(kI4) + net.line.R * q(kI7) +
                            net.load1.R * q(kIL1);
        return inj - loss;
    };
    const double h = 1e-6;
    const auto tr = run_baseline(sys, StateVector(sys.layout()), 0.05, h);
    const auto& seg = tr.segments().front();
    double worst = 0.0, scale = 0.0;
    for (std::size_t i = 1000; i + 2 < seg.size(); i += 997) {
        const double dE = (energy(seg.row(i - 2)) - 8 * energy(seg.row(i - 1)) + 8 * energy(seg.row(i + 1)) -
                           energy(seg.row(i + 2))) /
                          (12 * h);
        const double p = power(seg.row(i), seg.times[i]);
        worst = std::max(worst, std::abs(dE - p));
        scale = std::max(scale, std::abs(p));
    }
    CHECK(worst <= 1e-6 * scale);
}

// ---------------------------------------------------------------- assembled system

TEST_CASE("state counts per topology", "[emt][system]") {
    const auto p = default_emt_params();
    const auto pre = assemble_emt_system(p, Topology::pre_trip);
    const auto post = assemble_emt_system(p, Topology::post_trip);
    CHECK(post->dimension() == 2 * 8 + 6 * 3);
    CHECK(pre->dimension() == post->dimension() + 3);
    CHECK(pre->layout()->find("iL1_D").has_value());
    CHECK_FALSE(post->layout()->find("iL1_D").has_value());
    CHECK(pre->layout()->name(0) == "G1_delta");
}

TEST_CASE("parameter validation lists every issue", "[emt][system]") {
    auto p = default_emt_params();
    p.network.C_line = -1.0;
    p.generators[1].D = -2.0;
    p.generators[1].omega0 = 100.0;
    try {
        EmtSystem sys(p, Topology::pre_trip);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(e.issues().size() >= 3);
    }
}

TEST_CASE("equilibrium", "[emt][equilibrium]") {
    const auto& eq = pre_trip_equilibrium();
    const auto sys = assemble_emt_system(eq.params, Topology::pre_trip);
    CHECK(eq.residual <= 1e-9);
    const auto f = sys->field(eq.state, 0.0);
    CHECK(max_abs(f.values()) <= 1e-8);
    // pinned frequency: both speed deviations vanish
    CHECK(eq.state.at("G1_dw") == 0.0);
    CHECK(std::abs(eq.state.at("G2_dw")) <= 1e-12);

    const auto again = find_equilibrium(*sys, eq.state);
    CHECK(again.iterations == 0);
    CHECK(bitwise_equal(again.state, eq.state));
}

TEST_CASE("machine derivatives vanish at the equilibrium", "[emt][equilibrium]") {
    const auto& eq = pre_trip_equilibrium();
    const EmtSystem sys(eq.params, Topology::pre_trip);
    const auto mq = sys.machine_quantities(eq.state.values());
    for (int k = 0; k < 2; ++k) {
        const auto s = sys.machine_state(eq.state.values(), k);
        const auto d = generator_derivatives(s, mq[k].i_d, mq[k].i_q, mq[k].v_t, eq.params.generators[k],
                                             eq.params.controls[k]);
        for (double v : {d.dw, d.psi_fd, d.psi_1d, d.psi_1q, d.psi_2q, d.pm, d.efd}) CHECK(std::abs(v) <= 1e-8);
    }
}

TEST_CASE("one second from the equilibrium stays put", "[emt][equilibrium]") {
    const auto& eq = pre_trip_equilibrium();
    auto sys = assemble_emt_system(eq.params, Topology::pre_trip);
    const auto tr = run_baseline(*sys, eq.state, 1.0, 5e-5);
    const auto end = tr.back_state();
    double worst = 0.0;
    for (std::size_t i = 0; i < end.size(); ++i) worst = std::max(worst, std::abs(end[i] - eq.state[i]));
    CHECK(worst <= 1e-6);
}

TEST_CASE("post-trip equilibrium differs and balances power", "[emt][equilibrium]") {
    const auto& pre = pre_trip_equilibrium();
    const EmtSystem post_sys(pre.params, Topology::post_trip);
    EmtSystem tripped(pre.params, Topology::pre_trip);
    const auto seed = tripped.apply_event(kTripEvent, pre.state, 0.0);
    const auto post = find_equilibrium(post_sys, seed, FrequencyMode::free);
    CHECK(post.residual <= 1e-9);
    CHECK(std::abs(post.state.at("i4_D") - pre.state.at("i4_D")) > 1e-3);
    CHECK(post.frequency_offset > 0.0);  // load removed, machines speed up
    const auto pb = post_sys.power_balance(post.state.values());
    CHECK(std::abs(pb.residual()) <= 1e-6);
    CHECK(std::abs(pb.generation - pb.emf_power) <= 1e-6);
    const EmtSystem pre_sys(pre.params, Topology::pre_trip);
    CHECK(std::abs(pre_sys.power_balance(pre.state.values()).residual()) <= 1e-6);
}

TEST_CASE("trip event remaps by name", "[emt][system]") {
    const auto& eq = pre_trip_equilibrium();
    EmtSystem sys(eq.params, Topology::pre_trip);
    const auto x = sys.apply_event(kTripEvent, eq.state, 3.0);
    CHECK(sys.topology() == Topology::post_trip);
    CHECK(x.size() == 34);
    CHECK(x.at("v3_D") == eq.state.at("v3_D"));
    CHECK_THROWS_AS(sys.apply_event(kTripEvent, x, 3.1), ConfigurationError);
    EmtSystem other(eq.params, Topology::pre_trip);
    CHECK_THROWS_AS(other.apply_event("fault", eq.state, 1.0), ConfigurationError);
}

TEST_CASE("equilibrium jacobian rotation blocks are antisymmetric", "[emt][diagnostics]") {
    const auto& eq = pre_trip_equilibrium();
    const auto sys = assemble_emt_system(eq.params, Topology::pre_trip);
    const auto J = diag::numerical_jacobian(*sys, eq.state, 0.0);
    const auto& l = *sys->layout();
    const double w = eq.params.generators[0].omega0;
    for (const char* v : {"i4", "i7", "v3", "v4", "iL1"}) {
        const auto d = l.index(std::string(v) + "_D"), q = l.index(std::string(v) + "_Q");
        CHECK(J(d, q) == Approx(w).epsilon(1e-6));
        CHECK(J(q, d) == Approx(-w).epsilon(1e-6));
        CHECK(J(d, q) == Approx(-J(q, d)).epsilon(1e-6));
    }
}

TEST_CASE("equilibrium stiffness", "[emt][diagnostics]") {
    const auto& eq = pre_trip_equilibrium();
    const auto sys = assemble_emt_system(eq.params, Topology::pre_trip);
    const auto r = diag::stiffness_report(diag::numerical_jacobian(*sys, eq.state, 0.0));
    CHECK(r.two_scale);
    CHECK(r.scale_gap >= 10.0);
    CHECK(r.max_real_part <= 1e-6);
    CHECK(r.zero_count == 1);
}
