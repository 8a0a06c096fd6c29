#include "hmmsim/emt/network.hpp"

#include <cmath>

namespace hmmsim::emt {

std::vector<std::string> NetworkParams::validate(const std::string& prefix) const {
    std::vector<std::string> issues;
    auto positive = [&](const char* name, double v) {
        if (!(v > 0.0) || !std::isfinite(v)) issues.push_back(prefix + "." + name + " must be positive");
    };
    positive("L_T1", L_T1);
    positive("L_T2", L_T2);
    positive("L_1", L_1);
    positive("R_1", R_1);
    positive("L_2", L_2);
    positive("R_2", R_2);
    positive("L_line", L_line);
    positive("R_line", R_line);
    positive("C_line", C_line);
    return issues;
}

Vec3 rl_branch_derivative(const Vec3& i, const Vec3& v, const Branch& b, double omega_b,
                          double omega_r) {
    const double g = omega_b / b.L;
    return Vec3(g * (v[0] - b.R * i[0]),
                g * (v[1] - b.R * i[1]) + omega_r * i[2],
                g * (v[2] - b.R * i[2]) - omega_r * i[1]);
}

Vec3 shunt_derivative(const Vec3& v, const Vec3& i_in, double C, double omega_b, double omega_r) {
    const double g = omega_b / C;
    return Vec3(g * i_in[0], g * i_in[1] + omega_r * v[2], g * i_in[2] - omega_r * v[1]);
}

namespace {

void store(std::span<double> dx, std::size_t offset, const Vec3& v) {
    dx[offset] = v[0];
    dx[offset + 1] = v[1];
    dx[offset + 2] = v[2];
}

}  // namespace

void network_derivatives(const NetworkModel& net, bool load1, std::span<const double> x,
                         const Vec3& e1, const Vec3& e2, double omega_r, std::span<double> dx) {
    const double wb = net.omega_b;
    const Vec3 i1 = slot(x, kI1), i2 = slot(x, kI2), i4 = slot(x, kI4), i7 = slot(x, kI7);
    const Vec3 v3 = slot(x, kV3), v4 = slot(x, kV4);
    const Vec3 iL1 = load1 ? slot(x, kIL1) : Vec3::Zero();

    store(dx, kI1, rl_branch_derivative(i1, e1 - v3, net.gen1, wb, omega_r));
    store(dx, kI2, rl_branch_derivative(i2, e2 - v4, net.gen2, wb, omega_r));
    store(dx, kI4, rl_branch_derivative(i4, v4, net.load2, wb, omega_r));
    store(dx, kI7, rl_branch_derivative(i7, v3 - v4, net.line, wb, omega_r));
    store(dx, kV3, shunt_derivative(v3, i1 - i7 - iL1, net.shunt3, wb, omega_r));
    store(dx, kV4, shunt_derivative(v4, i2 + i7 - i4, net.shunt4, wb, omega_r));
    if (load1) store(dx, kIL1, rl_branch_derivative(iL1, v3, net.load1, wb, omega_r));
}

}  // namespace hmmsim::emt
