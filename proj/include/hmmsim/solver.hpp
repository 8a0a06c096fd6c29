#pragma once

// Fixed-step integrators and the vector-field abstraction shared by the
// micro (RK4) and macro (forward Euler) levels.

#include "hmmsim/errors.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hmmsim {

// =============================================================================
// State layout and state vectors
// =============================================================================

/// Ordered set of state names with name -> index lookup.
class StateLayout {
public:
    explicit StateLayout(std::vector<std::string> names);

    std::size_t size() const noexcept { return names_.size(); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    const std::string& name(std::size_t i) const { return names_.at(i); }
    std::optional<std::size_t> find(std::string_view name) const;
    /// Throws ShapeError for unknown names.
    std::size_t index(std::string_view name) const;

    bool operator==(const StateLayout& other) const { return names_ == other.names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
};

using LayoutPtr = std::shared_ptr<const StateLayout>;

LayoutPtr make_layout(std::vector<std::string> names);
/// Layout named x0, x1, ... for ad-hoc systems.
LayoutPtr anonymous_layout(std::size_t dimension);

/// Dense real state with a reference to its named layout.
class StateVector {
public:
    StateVector() = default;
    explicit StateVector(LayoutPtr layout);
    StateVector(LayoutPtr layout, std::vector<double> values);

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }
    double at(std::string_view name) const { return values_[layout_->index(name)]; }
    double& at(std::string_view name) { return values_[layout_->index(name)]; }

    std::span<const double> values() const noexcept { return values_; }
    std::span<double> values() noexcept { return values_; }
    const std::vector<double>& data() const noexcept { return values_; }

    const StateLayout& layout() const { return *layout_; }
    const LayoutPtr& layout_ptr() const noexcept { return layout_; }

    /// Index of the first NaN/Inf entry, if any.
    std::optional<std::size_t> first_non_finite() const;
    bool all_finite() const { return !first_non_finite().has_value(); }

private:
    LayoutPtr layout_;
    std::vector<double> values_;
};

/// Exact equality of layouts and of every value's bit pattern.
bool bitwise_equal(const StateVector& a, const StateVector& b);

// =============================================================================
// Vector-field definition
// =============================================================================

/// A vector field f(x, t) with a named layout and optional discrete events.
///
/// Implementations must be deterministic. An instance may mutate its own
/// topology inside apply_event(); independent runs use independent clones.
class OdeSystem {
public:
    virtual ~OdeSystem() = default;

    virtual LayoutPtr layout() const = 0;
    std::size_t dimension() const { return layout()->size(); }

    /// Writes f(x, t) into dxdt. Both spans have dimension() entries.
    virtual void evaluate(std::span<const double> x, double t, std::span<double> dxdt) const = 0;

    virtual std::string description() const { return {}; }

    /// Applies a discrete event at time t and returns the state re-mapped onto
    /// the (possibly changed) layout. The default rejects every event id.
    virtual StateVector apply_event(std::string_view event_id, const StateVector& x, double t);

    virtual std::unique_ptr<OdeSystem> clone() const = 0;

    /// Allocating convenience wrapper around evaluate().
    StateVector field(const StateVector& x, double t) const;
};

/// OdeSystem backed by a callable; handy for analytic test problems.
class FunctionSystem final : public OdeSystem {
public:
    using Field = std::function<void(std::span<const double>, double, std::span<double>)>;

    FunctionSystem(LayoutPtr layout, Field field, std::string description = {});

    LayoutPtr layout() const override { return layout_; }
    void evaluate(std::span<const double> x, double t, std::span<double> dxdt) const override;
    std::string description() const override { return description_; }
    std::unique_ptr<OdeSystem> clone() const override;

private:
    LayoutPtr layout_;
    Field field_;
    std::string description_;
};

// =============================================================================
// Time grid helpers
// =============================================================================

/// Number of steps of size h in span, which must be a whole multiple of h to
/// within rel_tol. Throws ConfigurationError naming `what` otherwise.
std::int64_t whole_steps(double span, double h, std::string_view what, double rel_tol = 1e-9);

// =============================================================================
// Classical RK4
// =============================================================================

/// Generic four-stage update. `field(x, t, dxdt)` evaluates the vector field,
/// `k1` holds f(x, t). Scratch spans must have x.size() entries.
/// The double instantiation is what every production integrator runs; other
/// scalar types are used to study the scheme below double round-off.
template <class Real, class Field>
void rk4_combine(Field&& field, std::span<const Real> x, Real t, Real h, std::span<const Real> k1,
                 std::span<Real> k2, std::span<Real> k3, std::span<Real> k4, std::span<Real> stage,
                 std::span<Real> out) {
    const std::size_t n = x.size();
    const Real half = h / Real(2);
    for (std::size_t i = 0; i < n; ++i) stage[i] = x[i] + half * k1[i];
    field(std::span<const Real>(stage), t + half, k2);
    for (std::size_t i = 0; i < n; ++i) stage[i] = x[i] + half * k2[i];
    field(std::span<const Real>(stage), t + half, k3);
    for (std::size_t i = 0; i < n; ++i) stage[i] = x[i] + h * k3[i];
    field(std::span<const Real>(stage), t + h, k4);
    const Real sixth = h / Real(6);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = x[i] + sixth * (k1[i] + Real(2) * k2[i] + Real(2) * k3[i] + k4[i]);
    }
}

/// Reusable RK4 workspace. The force at the step's starting node is
/// supplied by the caller so it can double as a recorded force sample.
class Rk4Stepper {
public:
    explicit Rk4Stepper(std::size_t dimension);

    /// out = RK4(x, t, h) given k1 = f(x, t). Throws DivergenceError when a
    /// stage or the result is non-finite; `step` is reported in the error.
    void advance(const OdeSystem& system, std::span<const double> x, double t, double h,
                 std::span<const double> k1, std::span<double> out, std::int64_t step = 0);

    std::size_t dimension() const noexcept { return k2_.size(); }

private:
    std::vector<double> k2_, k3_, k4_, stage_;
};

/// Throws DivergenceError if any entry of values is non-finite.
void check_finite(const OdeSystem& system, std::span<const double> values, double t,
                  std::int64_t step, std::string_view where);

/// One classical RK4 step.
StateVector rk4_step(const OdeSystem& system, const StateVector& x, double t, double h);

// =============================================================================
// Micro integration
// =============================================================================

/// States and node forces of one fixed-step micro run, stored row-major.
class MicroTrace {
public:
    MicroTrace() = default;
    MicroTrace(LayoutPtr layout, double h);

    std::size_t size() const noexcept { return times_.size(); }
    std::size_t dimension() const noexcept { return layout_ ? layout_->size() : 0; }
    double spacing() const noexcept { return h_; }
    const LayoutPtr& layout() const noexcept { return layout_; }

    const std::vector<double>& times() const noexcept { return times_; }
    std::span<const double> state_row(std::size_t i) const;
    std::span<const double> force_row(std::size_t i) const;
    std::span<const double> force_data() const noexcept { return forces_; }
    StateVector state(std::size_t i) const;
    StateVector force_sample(std::size_t i) const;

    void reserve(std::size_t nodes);
    void clear();
    void push(double t, std::span<const double> state, std::span<const double> force);

private:
    LayoutPtr layout_;
    double h_ = 0.0;
    std::vector<double> times_;
    std::vector<double> states_;
    std::vector<double> forces_;
};

/// Integrates `steps` RK4 steps starting at node time origin + first_tick*h
/// and appends every node (both endpoints) with its force sample to trace.
/// Node i sits at origin + (first_tick + i) * h. Returns the final state.
void integrate_window(const OdeSystem& system, std::span<const double> x0, double origin,
                      std::int64_t first_tick, std::int64_t steps, double h, Rk4Stepper& stepper,
                      MicroTrace& trace);

/// RK4 over [t0, t0 + window] at step h; window must be a whole number of steps.
MicroTrace integrate_micro(const OdeSystem& system, const StateVector& x0, double t0, double window,
                           double h);

// =============================================================================
// Macro step
// =============================================================================

/// Forward Euler macro update: (X + H f_eff, t + H).
std::pair<StateVector, double> macro_step(const StateVector& x_anchor, double t_anchor,
                                          const StateVector& f_eff, double H);

}  // namespace hmmsim
