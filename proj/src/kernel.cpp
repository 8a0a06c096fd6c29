#include "hmmsim/kernel.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace hmmsim {

double KernelSpec::density(double s) const {
    const double var = sigma * sigma;
    return std::exp(-s * s / (2.0 * var)) / std::sqrt(2.0 * std::numbers::pi * var);
}

double KernelSpec::operator()(double s) const {
    return std::abs(s) <= eta ? density(s) : 0.0;
}

KernelSpec make_gaussian_kernel(double eta, std::optional<double> sigma) {
    if (!(eta > 0.0) || !std::isfinite(eta)) {
        throw ParameterError("kernel half-width eta must be positive");
    }
    KernelSpec spec;
    spec.family = KernelFamily::gaussian;
    spec.eta = eta;
    spec.sigma = sigma.value_or(eta / 3.0);
    if (!(spec.sigma > 0.0) || !std::isfinite(spec.sigma)) {
        throw ParameterError("kernel sigma must be positive");
    }
    if (spec.sigma > eta) {
        std::ostringstream msg;
        msg << "kernel sigma = " << spec.sigma << " exceeds eta = " << eta
            << "; truncation would destroy the moment conditions";
        throw ParameterError(msg.str());
    }
    return spec;
}

DiscreteKernelWeights discretize_kernel(const KernelSpec& spec, double h) {
    if (!(h > 0.0)) throw ParameterError("kernel sample spacing must be positive");
    const std::int64_t n = whole_steps(2.0 * spec.eta, h, "kernel window 2*eta");
    if (n < 1) throw ConfigurationError("kernel window must contain at least one micro step");

    DiscreteKernelWeights out;
    out.spacing = h;
    out.eta = spec.eta;
    const auto count = static_cast<std::size_t>(n) + 1;
    out.sample_offsets.resize(count);
    out.centered.resize(count);
    out.weights.resize(count);

    // (2k - n) * h / 2 keeps the centered offsets exactly antisymmetric, so
    // the weights come out bitwise symmetric.
    double raw_sum = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
        const double centered = static_cast<double>(2 * static_cast<std::int64_t>(k) - n) * h / 2.0;
        out.sample_offsets[k] = static_cast<double>(k) * h;
        out.centered[k] = centered;
        out.weights[k] = spec.density(centered);
    }
    for (std::size_t k = 0; k < count; ++k) raw_sum += out.weights[k];
    out.raw_mass = raw_sum * h;
    const double scale = 1.0 / out.raw_mass;
    for (auto& w : out.weights) w *= scale;
    return out;
}

double kernel_moment(const DiscreteKernelWeights& weights, unsigned r) {
    // Neumaier summation; the weights span several orders of magnitude.
    double sum = 0.0;
    double comp = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double term = weights.weights[i] * std::pow(weights.centered[i], r) * weights.spacing;
        const double t = sum + term;
        if (std::abs(sum) >= std::abs(term)) {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    return sum + comp;
}

void convolve_rows(const DiscreteKernelWeights& weights, std::span<const double> rows,
                   std::span<double> out) {
    const std::size_t dim = out.size();
    if (rows.size() != weights.size() * dim) {
        std::ostringstream msg;
        msg << "convolution expects " << weights.size() << " samples of dimension " << dim
            << ", got " << rows.size() << " values";
        throw ShapeError(msg.str());
    }
    for (auto& v : out) v = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double w = weights.weights[i] * weights.spacing;
        const double* row = rows.data() + i * dim;
        for (std::size_t j = 0; j < dim; ++j) out[j] += w * row[j];
    }
}

StateVector convolve_force(const DiscreteKernelWeights& weights,
                           std::span<const StateVector> force_samples) {
    if (force_samples.size() != weights.size()) {
        throw ShapeError("convolution expects " + std::to_string(weights.size()) +
                         " force samples, got " + std::to_string(force_samples.size()));
    }
    if (force_samples.empty()) throw ShapeError("convolution requires at least one sample");
    const std::size_t dim = force_samples.front().size();
    StateVector out(force_samples.front().layout_ptr());
    for (std::size_t i = 0; i < force_samples.size(); ++i) {
        const auto& f = force_samples[i];
        if (f.size() != dim) throw ShapeError("force samples have inconsistent dimensions");
        const double w = weights.weights[i] * weights.spacing;
        for (std::size_t j = 0; j < dim; ++j) out[j] += w * f[j];
    }
    return out;
}

double frequency_response(const DiscreteKernelWeights& weights, double omega) {
    double sum = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        sum += weights.weights[i] * std::cos(omega * weights.centered[i]) * weights.spacing;
    }
    return sum;
}

double gaussian_frequency_response(double sigma, double omega) {
    const double x = omega * sigma;
    return std::exp(-0.5 * x * x);
}

}  // namespace hmmsim
