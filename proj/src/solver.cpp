#include "hmmsim/solver.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace hmmsim {

// -----------------------------------------------------------------------------
// Layout / state vector
// -----------------------------------------------------------------------------

StateLayout::StateLayout(std::vector<std::string> names) : names_(std::move(names)) {
    index_.reserve(names_.size());
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (!index_.emplace(names_[i], i).second) {
            throw ShapeError("duplicate state name '" + names_[i] + "' in layout");
        }
    }
}

std::optional<std::size_t> StateLayout::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t StateLayout::index(std::string_view name) const {
    if (auto i = find(name)) return *i;
    throw ShapeError("unknown state name '" + std::string(name) + "'");
}

LayoutPtr make_layout(std::vector<std::string> names) {
    return std::make_shared<const StateLayout>(std::move(names));
}

LayoutPtr anonymous_layout(std::size_t dimension) {
    std::vector<std::string> names;
    names.reserve(dimension);
    for (std::size_t i = 0; i < dimension; ++i) names.push_back("x" + std::to_string(i));
    return make_layout(std::move(names));
}

StateVector::StateVector(LayoutPtr layout) : layout_(std::move(layout)) {
    if (!layout_) throw ShapeError("state vector requires a layout");
    values_.assign(layout_->size(), 0.0);
}

StateVector::StateVector(LayoutPtr layout, std::vector<double> values)
    : layout_(std::move(layout)), values_(std::move(values)) {
    if (!layout_) throw ShapeError("state vector requires a layout");
    if (values_.size() != layout_->size()) {
        std::ostringstream msg;
        msg << "state has " << values_.size() << " values but layout has " << layout_->size()
            << " names";
        throw ShapeError(msg.str());
    }
}

std::optional<std::size_t> StateVector::first_non_finite() const {
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) return i;
    }
    return std::nullopt;
}

bool bitwise_equal(const StateVector& a, const StateVector& b) {
    if (a.size() != b.size()) return false;
    if (a.layout_ptr() != b.layout_ptr() && !(a.layout() == b.layout())) return false;
    return a.size() == 0 ||
           std::memcmp(a.values().data(), b.values().data(), a.size() * sizeof(double)) == 0;
}

// -----------------------------------------------------------------------------
// Systems
// -----------------------------------------------------------------------------

StateVector OdeSystem::apply_event(std::string_view event_id, const StateVector&, double) {
    throw ConfigurationError("system does not handle event '" + std::string(event_id) + "'");
}

StateVector OdeSystem::field(const StateVector& x, double t) const {
    if (x.size() != dimension()) {
        throw ShapeError("state dimension " + std::to_string(x.size()) +
                         " does not match system dimension " + std::to_string(dimension()));
    }
    StateVector out(layout());
    evaluate(x.values(), t, out.values());
    return out;
}

FunctionSystem::FunctionSystem(LayoutPtr layout, Field field, std::string description)
    : layout_(std::move(layout)), field_(std::move(field)), description_(std::move(description)) {
    if (!layout_ || layout_->size() == 0) throw ShapeError("system dimension must be positive");
    if (!field_) throw ConfigurationError("system requires a field function");
}

void FunctionSystem::evaluate(std::span<const double> x, double t, std::span<double> dxdt) const {
    field_(x, t, dxdt);
}

std::unique_ptr<OdeSystem> FunctionSystem::clone() const {
    return std::make_unique<FunctionSystem>(*this);
}

// -----------------------------------------------------------------------------
// Time grid
// -----------------------------------------------------------------------------

std::int64_t whole_steps(double span, double h, std::string_view what, double rel_tol) {
    if (!(h > 0.0) || !std::isfinite(h)) {
        throw ParameterError("step size must be positive and finite (" + std::string(what) + ")");
    }
    if (span < 0.0 || !std::isfinite(span)) {
        throw ConfigurationError(std::string(what) + " must be non-negative");
    }
    const double ratio = span / h;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > rel_tol * std::max(1.0, rounded)) {
        std::ostringstream msg;
        msg.precision(17);
        msg << what << " = " << span << " is not a whole number of steps h = " << h
            << " (ratio " << ratio << ")";
        throw ConfigurationError(msg.str());
    }
    return static_cast<std::int64_t>(rounded);
}

// -----------------------------------------------------------------------------
// RK4
// -----------------------------------------------------------------------------

void check_finite(const OdeSystem& system, std::span<const double> values, double t,
                  std::int64_t step, std::string_view where) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            const auto layout = system.layout();
            const std::string name = i < layout->size() ? layout->name(i) : std::to_string(i);
            std::ostringstream msg;
            msg.precision(17);
            msg << "non-finite value in " << where << " at t = " << t << " (step " << step
                << "), state '" << name << "'";
            throw DivergenceError(t, name, step, msg.str());
        }
    }
}

Rk4Stepper::Rk4Stepper(std::size_t dimension)
    : k2_(dimension), k3_(dimension), k4_(dimension), stage_(dimension) {}

void Rk4Stepper::advance(const OdeSystem& system, std::span<const double> x, double t, double h,
                         std::span<const double> k1, std::span<double> out, std::int64_t step) {
    auto field = [&](std::span<const double> s, double ts, std::span<double> d) {
        system.evaluate(s, ts, d);
        check_finite(system, d, ts, step, "RK4 stage");
    };
    rk4_combine<double>(field, x, t, h, k1, k2_, k3_, k4_, stage_, out);
    check_finite(system, out, t + h, step, "RK4 update");
}

StateVector rk4_step(const OdeSystem& system, const StateVector& x, double t, double h) {
    if (!(h > 0.0)) throw ParameterError("RK4 step size must be positive");
    if (x.size() != system.dimension()) throw ShapeError("state does not match system dimension");
    check_finite(system, x.values(), t, 0, "RK4 input");
    std::vector<double> k1(x.size());
    system.evaluate(x.values(), t, k1);
    check_finite(system, k1, t, 0, "RK4 stage");
    Rk4Stepper stepper(x.size());
    StateVector out(x.layout_ptr());
    stepper.advance(system, x.values(), t, h, k1, out.values());
    return out;
}

// -----------------------------------------------------------------------------
// Micro traces
// -----------------------------------------------------------------------------

MicroTrace::MicroTrace(LayoutPtr layout, double h) : layout_(std::move(layout)), h_(h) {}

std::span<const double> MicroTrace::state_row(std::size_t i) const {
    const std::size_t n = dimension();
    return std::span<const double>(states_).subspan(i * n, n);
}

std::span<const double> MicroTrace::force_row(std::size_t i) const {
    const std::size_t n = dimension();
    return std::span<const double>(forces_).subspan(i * n, n);
}

StateVector MicroTrace::state(std::size_t i) const {
    auto row = state_row(i);
    return StateVector(layout_, std::vector<double>(row.begin(), row.end()));
}

StateVector MicroTrace::force_sample(std::size_t i) const {
    auto row = force_row(i);
    return StateVector(layout_, std::vector<double>(row.begin(), row.end()));
}

void MicroTrace::reserve(std::size_t nodes) {
    times_.reserve(nodes);
    states_.reserve(nodes * dimension());
    forces_.reserve(nodes * dimension());
}

void MicroTrace::clear() {
    times_.clear();
    states_.clear();
    forces_.clear();
}

void MicroTrace::push(double t, std::span<const double> state, std::span<const double> force) {
    if (state.size() != dimension() || force.size() != dimension()) {
        throw ShapeError("micro trace row does not match layout dimension");
    }
    times_.push_back(t);
    states_.insert(states_.end(), state.begin(), state.end());
    forces_.insert(forces_.end(), force.begin(), force.end());
}

void integrate_window(const OdeSystem& system, std::span<const double> x0, double origin,
                      std::int64_t first_tick, std::int64_t steps, double h, Rk4Stepper& stepper,
                      MicroTrace& trace) {
    const std::size_t n = x0.size();
    std::vector<double> x(x0.begin(), x0.end());
    std::vector<double> next(n);
    std::vector<double> force(n);
    trace.reserve(trace.size() + static_cast<std::size_t>(steps) + 1);
    for (std::int64_t k = 0; k <= steps; ++k) {
        const double t = origin + static_cast<double>(first_tick + k) * h;
        system.evaluate(x, t, force);
        check_finite(system, force, t, first_tick + k, "force sample");
        trace.push(t, x, force);
        if (k == steps) break;
        stepper.advance(system, x, t, h, force, next, first_tick + k);
        x.swap(next);
    }
}

MicroTrace integrate_micro(const OdeSystem& system, const StateVector& x0, double t0, double window,
                           double h) {
    if (x0.size() != system.dimension()) throw ShapeError("state does not match system dimension");
    const std::int64_t steps = whole_steps(window, h, "micro window");
    check_finite(system, x0.values(), t0, 0, "initial state");
    MicroTrace trace(system.layout(), h);
    Rk4Stepper stepper(x0.size());
    integrate_window(system, x0.values(), t0, 0, steps, h, stepper, trace);
    return trace;
}

// -----------------------------------------------------------------------------
// Macro step
// -----------------------------------------------------------------------------

std::pair<StateVector, double> macro_step(const StateVector& x_anchor, double t_anchor,
                                          const StateVector& f_eff, double H) {
    if (!(H > 0.0)) throw ParameterError("macro step H must be positive");
    if (x_anchor.size() != f_eff.size()) throw ShapeError("effective force dimension mismatch");
    StateVector out(x_anchor.layout_ptr());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x_anchor[i] + H * f_eff[i];
    if (auto bad = out.first_non_finite()) {
        const std::string& name = out.layout().name(*bad);
        throw DivergenceError(t_anchor + H, name, 0,
                              "non-finite macro update for state '" + name + "'");
    }
    return {std::move(out), t_anchor + H};
}

}  // namespace hmmsim
