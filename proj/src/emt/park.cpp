#include "hmmsim/emt/park.hpp"

#include <cmath>
#include <numbers>

namespace hmmsim::emt {

namespace {
constexpr double kShift = 2.0 * std::numbers::pi / 3.0;
}

Mat3 park_matrix(double theta) {
    Mat3 P;
    const double a = theta, b = theta - kShift, c = theta + kShift;
    P << 0.5, 0.5, 0.5,
         std::cos(a), std::cos(b), std::cos(c),
         -std::sin(a), -std::sin(b), -std::sin(c);
    return P * (2.0 / 3.0);
}

Mat3 inverse_park_matrix(double theta) {
    Mat3 Pi;
    const double a = theta, b = theta - kShift, c = theta + kShift;
    Pi << 1.0, std::cos(a), -std::sin(a),
          1.0, std::cos(b), -std::sin(b),
          1.0, std::cos(c), -std::sin(c);
    return Pi;
}

Mat3 park_derivative(double theta) {
    Mat3 D;
    const double a = theta, b = theta - kShift, c = theta + kShift;
    D << 0.0, 0.0, 0.0,
         -std::sin(a), -std::sin(b), -std::sin(c),
         -std::cos(a), -std::cos(b), -std::cos(c);
    return D * (2.0 / 3.0);
}

Mat3 park_rotation_rate(double theta, double omega_r) {
    // dP/dtheta * P^{-1} is exactly [[0,0,0],[0,0,1],[0,-1,0]].
    (void)theta;
    Mat3 R = Mat3::Zero();
    R(1, 2) = omega_r;
    R(2, 1) = -omega_r;
    return R;
}

double dq_envelope(double x_D, double x_Q) { return std::hypot(x_D, x_Q); }

}  // namespace hmmsim::emt
