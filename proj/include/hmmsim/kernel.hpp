#pragma once

// Averaging kernels used to estimate the macro effective force from
// micro-scale force samples.

#include "hmmsim/solver.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace hmmsim {

enum class KernelFamily { gaussian };

/// Continuous kernel with support [-eta, +eta] around the evaluation point.
struct KernelSpec {
    KernelFamily family = KernelFamily::gaussian;
    double eta = 0.0;    ///< half-width of the support, s
    double sigma = 0.0;  ///< Gaussian width, s

    /// Untruncated Gaussian density 1/sqrt(2 pi sigma^2) exp(-s^2 / (2 sigma^2)).
    double density(double s) const;
    /// density() restricted to the support, zero outside.
    double operator()(double s) const;
};

/// sigma defaults to eta/3 when not given.
KernelSpec make_gaussian_kernel(double eta, std::optional<double> sigma = std::nullopt);

/// Kernel sampled on a window of 2*eta/h + 1 nodes and renormalized so that
/// sum(weights) * spacing == 1.
struct DiscreteKernelWeights {
    std::vector<double> sample_offsets;  ///< k*h, relative to the window start
    std::vector<double> centered;        ///< offset - eta, exactly antisymmetric
    std::vector<double> weights;
    double spacing = 0.0;
    double eta = 0.0;
    double raw_mass = 0.0;  ///< sum(raw weights) * h before renormalization

    std::size_t size() const noexcept { return weights.size(); }
    /// Factor applied to the raw samples, 1 / raw_mass.
    double rescale_factor() const noexcept { return 1.0 / raw_mass; }
};

DiscreteKernelWeights discretize_kernel(const KernelSpec& spec, double h);

/// sum w_i (offset_i - eta)^r h.
double kernel_moment(const DiscreteKernelWeights& weights, unsigned r);

/// Componentwise sum w_i f_i h.
StateVector convolve_force(const DiscreteKernelWeights& weights,
                           std::span<const StateVector> force_samples);

/// Same as convolve_force over row-major samples; rows.size() must equal
/// weights.size() * out.size().
void convolve_rows(const DiscreteKernelWeights& weights, std::span<const double> rows,
                   std::span<double> out);

/// Gain of the discrete kernel for a sinusoid of angular frequency omega
/// evaluated at the window midpoint: sum w_i cos(omega (offset_i - eta)) h.
double frequency_response(const DiscreteKernelWeights& weights, double omega);

/// Gain of the untruncated Gaussian, exp(-(omega sigma)^2 / 2).
double gaussian_frequency_response(double sigma, double omega);

}  // namespace hmmsim
