#pragma once

// Park transform with the 2/3 scaling: row 0 is the zero sequence, rows 1-2
// the d and q axes. Balanced cos sets map to (0, 1, 0).

#include <Eigen/Dense>

namespace hmmsim::emt {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

Mat3 park_matrix(double theta);
Mat3 inverse_park_matrix(double theta);
/// dP/dtheta in closed form.
Mat3 park_derivative(double theta);
/// omega_r * dP/dtheta * P^{-1}; independent of theta.
Mat3 park_rotation_rate(double theta, double omega_r);

/// Amplitude of the abc waveform behind a (D, Q) pair.
double dq_envelope(double x_D, double x_Q);

}  // namespace hmmsim::emt
