#pragma once

// RLC network in the global 0DQ frame (G1 rotor frame). Inductances and
// capacitance are per unit at the base frequency, so L acts as a reactance.
//
//   G1 --[r_s1, L''1 + L_T1]-- node 3 --[R_line, L_line]-- node 4 --[r_s2, L''2 + L_T2]-- G2
//                                |                           |
//                           load 1 (R_1, L_1)          load 2 (R_2, L_2)
//
// Each node carries half the line charging C_line.

#include "hmmsim/emt/park.hpp"

#include <span>
#include <string>
#include <vector>

namespace hmmsim::emt {

struct NetworkParams {
    double L_T1 = 0.1;
    double L_T2 = 0.1;
    double L_1 = 0.8;
    double R_1 = 4.0;
    double L_2 = 0.2;
    double R_2 = 1.0;
    double L_line = 0.1;
    double R_line = 1.0;
    double C_line = 0.02;

    std::vector<std::string> validate(const std::string& prefix) const;
};

/// Series R-L element.
struct Branch {
    double R = 0.0;
    double L = 0.0;
};

/// Network as seen by the solver: generator branches already merged.
struct NetworkModel {
    double omega_b = 0.0;  ///< base speed, rad/s
    Branch gen1, gen2, load1, load2, line;
    double shunt3 = 0.0;  ///< capacitance at node 3
    double shunt4 = 0.0;  ///< capacitance at node 4
};

/// Offsets of the network vectors inside the network block, 3 entries each.
enum NetworkSlot : std::size_t { kI1 = 0, kI2 = 3, kI4 = 6, kI7 = 9, kV3 = 12, kV4 = 15, kIL1 = 18 };

inline constexpr std::size_t kNetworkStates = 18;
inline constexpr std::size_t kLoad1States = 3;

/// d i/dt for a series R-L element carrying i under voltage drop v in a
/// frame rotating at omega_r: (omega_b / L)(v - R i) + P~ i.
Vec3 rl_branch_derivative(const Vec3& i, const Vec3& v, const Branch& b, double omega_b,
                          double omega_r);

/// d v/dt for a shunt capacitance fed by net current i_in.
Vec3 shunt_derivative(const Vec3& v, const Vec3& i_in, double C, double omega_b, double omega_r);

/// Derivatives of the network block. x holds kNetworkStates entries, plus
/// kLoad1States more when load1 is connected. e1, e2 are the generator
/// internal EMFs in the global frame and omega_r is the frame speed, rad/s.
void network_derivatives(const NetworkModel& net, bool load1, std::span<const double> x,
                         const Vec3& e1, const Vec3& e2, double omega_r, std::span<double> dx);

inline Vec3 slot(std::span<const double> x, std::size_t offset) {
    return Vec3(x[offset], x[offset + 1], x[offset + 2]);
}

}  // namespace hmmsim::emt
