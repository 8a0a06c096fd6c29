#include "hmmsim/hmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace hmmsim {

const char* to_string(AnchorMode mode) {
    return mode == AnchorMode::window_end ? "window_end" : "evaluation_point";
}

AnchorMode parse_anchor_mode(std::string_view text) {
    if (text == "window_end") return AnchorMode::window_end;
    if (text == "evaluation_point") return AnchorMode::evaluation_point;
    throw ParameterError("unknown anchor mode '" + std::string(text) +
                         "' (expected window_end or evaluation_point)");
}

const char* to_string(PhaseMode mode) { return mode == PhaseMode::micro ? "micro" : "hmm"; }

// -----------------------------------------------------------------------------
// Configuration
// -----------------------------------------------------------------------------

namespace {

bool is_whole_multiple(double span, double h) {
    if (!(h > 0.0)) return false;
    const double r = span / h;
    return std::abs(r - std::round(r)) <= 1e-9 * std::max(1.0, std::round(r));
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(12);
    s << v;
    return s.str();
}

}  // namespace

std::vector<std::string> HmmConfig::validate() const {
    std::vector<std::string> issues;
    auto positive = [&](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            issues.push_back(std::string(name) + " must be positive (got " + fmt(v) + ")");
            return false;
        }
        return true;
    };
    const bool h_ok = positive(h_micro, "hmm.h_micro");
    positive(H_macro, "hmm.H_macro");
    const bool eta_ok = positive(eta, "hmm.eta");
    const double W = window_length();
    const double dt = eval_offset();
    const double sg = kernel_sigma();
    const bool w_ok = positive(W, "hmm.window");
    const bool dt_ok = positive(dt, "hmm.dt_eval");
    const bool sg_ok = positive(sg, "hmm.sigma");
    if (eta_ok && sg_ok && sg > eta) {
        issues.push_back("hmm.sigma = " + fmt(sg) + " exceeds hmm.eta = " + fmt(eta));
    }
    if (w_ok && dt_ok && dt > W) {
        issues.push_back("hmm.dt_eval = " + fmt(dt) + " exceeds hmm.window = " + fmt(W));
    }
    if (w_ok && dt_ok && eta_ok && (dt - eta < -1e-12 * W || dt + eta > W * (1.0 + 1e-12))) {
        issues.push_back("kernel support [dt_eval - eta, dt_eval + eta] = [" + fmt(dt - eta) + ", " +
                         fmt(dt + eta) + "] must lie inside the micro window [0, " + fmt(W) + "]");
    }
    if (h_ok) {
        if (w_ok && !is_whole_multiple(W, h_micro)) {
            issues.push_back("hmm.window = " + fmt(W) + " is not divisible by hmm.h_micro = " +
                             fmt(h_micro));
        }
        if (H_macro > 0.0 && !is_whole_multiple(H_macro, h_micro)) {
            issues.push_back("hmm.H_macro = " + fmt(H_macro) + " is not divisible by hmm.h_micro = " +
                             fmt(h_micro));
        }
        if (dt_ok && !is_whole_multiple(dt, h_micro)) {
            issues.push_back("hmm.dt_eval = " + fmt(dt) + " is not divisible by hmm.h_micro = " +
                             fmt(h_micro));
        }
        if (eta_ok && !is_whole_multiple(eta, h_micro)) {
            issues.push_back("hmm.eta = " + fmt(eta) + " is not divisible by hmm.h_micro = " +
                             fmt(h_micro));
        }
    }
    if (anchor == AnchorMode::evaluation_point && H_macro > 0.0 && w_ok && dt_ok &&
        H_macro + 1e-12 * W < W - dt) {
        issues.push_back("evaluation_point anchoring needs hmm.H_macro >= window - dt_eval so the "
                         "next macro point lies past the micro window");
    }
    if (micro_solver != "rk4") issues.push_back("hmm.micro_solver must be rk4 (got " + micro_solver + ")");
    if (macro_solver != "forward_euler") {
        issues.push_back("hmm.macro_solver must be forward_euler (got " + macro_solver + ")");
    }
    if (!macro.is_forward_euler()) {
        issues.push_back("hmm macro coefficients must be the forward Euler set a={0}, b={1}, c=1");
    }
    return issues;
}

std::int64_t HmmPlan::anchor_steps() const {
    return config.anchor == AnchorMode::window_end ? window_steps : eval_steps;
}

HmmPlan make_plan(const HmmConfig& cfg) {
    if (auto issues = cfg.validate(); !issues.empty()) throw ValidationError(std::move(issues));
    HmmPlan plan;
    plan.config = cfg;
    const double h = cfg.h_micro;
    plan.window_steps = whole_steps(cfg.window_length(), h, "hmm.window");
    plan.macro_steps = whole_steps(cfg.H_macro, h, "hmm.H_macro");
    plan.eval_steps = whole_steps(cfg.eval_offset(), h, "hmm.dt_eval");
    const std::int64_t half = whole_steps(cfg.eta, h, "hmm.eta");
    plan.kernel_first = plan.eval_steps - half;
    plan.kernel = discretize_kernel(make_gaussian_kernel(cfg.eta, cfg.kernel_sigma()), h);
    return plan;
}

// -----------------------------------------------------------------------------
// Schedule
// -----------------------------------------------------------------------------

bool PhaseSchedule::has_hmm_phase() const {
    return std::any_of(phases.begin(), phases.end(),
                       [](const Phase& p) { return p.mode == PhaseMode::hmm; });
}

std::vector<std::string> PhaseSchedule::validate(double h) const {
    std::vector<std::string> issues;
    if (phases.empty()) {
        issues.emplace_back("schedule has no phases");
        return issues;
    }
    const double t0 = phases.front().t_start;
    if (std::abs(t0) > 1e-12) issues.push_back("schedule must start at t = 0 (got " + fmt(t0) + ")");
    const double tol = 1e-9 * std::max(1.0, t_end());
    for (std::size_t i = 0; i < phases.size(); ++i) {
        const auto& p = phases[i];
        const std::string label = "phase '" + (p.name.empty() ? std::to_string(i) : p.name) + "'";
        if (!(p.t_end > p.t_start)) {
            issues.push_back(label + " has t_end <= t_start");
        }
        if (i > 0 && std::abs(p.t_start - phases[i - 1].t_end) > tol) {
            issues.push_back(label + " does not start where the previous phase ends (" +
                             fmt(p.t_start) + " vs " + fmt(phases[i - 1].t_end) + ")");
        }
        if (h > 0.0 && !is_whole_multiple(p.t_end - t0, h)) {
            issues.push_back(label + " boundary t = " + fmt(p.t_end) +
                             " is not on the micro grid h = " + fmt(h));
        }
    }
    for (const auto& ev : events) {
        if (ev.time < t0 - tol || ev.time > t_end() + tol) {
            issues.push_back("event '" + ev.id + "' at t = " + fmt(ev.time) + " is outside the schedule");
            continue;
        }
        if (h > 0.0 && !is_whole_multiple(ev.time - t0, h)) {
            issues.push_back("event '" + ev.id + "' at t = " + fmt(ev.time) +
                             " is not on the micro grid h = " + fmt(h));
        }
        for (const auto& p : phases) {
            if (p.mode == PhaseMode::hmm && ev.time > p.t_start + tol && ev.time < p.t_end - tol) {
                issues.push_back("event '" + ev.id + "' at t = " + fmt(ev.time) +
                                 " falls strictly inside HMM phase '" + p.name +
                                 "' where it would land inside an averaging window");
            }
        }
    }
    return issues;
}

PhaseSchedule single_phase_schedule(double t_end, PhaseMode mode, std::string name) {
    PhaseSchedule s;
    s.phases.push_back(Phase{std::move(name), 0.0, t_end, mode});
    return s;
}

// -----------------------------------------------------------------------------
// Transfer operators
// -----------------------------------------------------------------------------

TransferOps TransferOps::identity() {
    return TransferOps{[](const StateVector& X) { return X; }, [](const StateVector& x) { return x; }};
}

StateVector reconstruct(const StateVector& X, const TransferOps& ops) {
    if (!ops.reconstruct_op) return X;
    return ops.reconstruct_op(X);
}

StateVector compress(const StateVector& x, const TransferOps& ops) {
    if (!ops.compress_op) return x;
    return ops.compress_op(x);
}

// -----------------------------------------------------------------------------
// Cycle
// -----------------------------------------------------------------------------

namespace {

struct CycleOutcome {
    StateVector X_next;
    std::int64_t next_tick = 0;
    StateVector force;
};

/// One cycle from tick `tick` using `H_steps` for the macro jump (may be
/// clamped). The window trace is left in `window` for recording.
CycleOutcome run_cycle(const OdeSystem& system, const StateVector& X_n, double origin,
                       std::int64_t tick, const HmmPlan& plan, std::int64_t H_steps,
                       const TransferOps& ops, Rk4Stepper& stepper, MicroTrace& window) {
    const double h = plan.config.h_micro;
    const StateVector x0 = reconstruct(X_n, ops);
    if (x0.size() != system.dimension()) {
        throw ShapeError("reconstructed micro state does not match system dimension");
    }
    window.clear();
    integrate_window(system, x0.values(), origin, tick, plan.window_steps, h, stepper, window);

    StateVector f_micro(system.layout());
    const std::size_t dim = system.dimension();
    const auto first = static_cast<std::size_t>(plan.kernel_first);
    convolve_rows(plan.kernel, window.force_data().subspan(first * dim, plan.kernel.size() * dim),
                  f_micro.values());

    const auto anchor = static_cast<std::size_t>(plan.anchor_steps());
    const StateVector X_star = compress(window.state(anchor), ops);
    // With non-identity transfer the averaged micro force is mapped like a state increment.
    const StateVector f_eff = compress(f_micro, ops);
    const double t_anchor = origin + static_cast<double>(tick + plan.anchor_steps()) * h;
    auto [X_next, t_next] = macro_step(X_star, t_anchor, f_eff, static_cast<double>(H_steps) * h);
    (void)t_next;
    return CycleOutcome{std::move(X_next), tick + plan.anchor_steps() + H_steps, f_eff};
}

struct EventQueue {
    std::vector<std::pair<std::int64_t, std::string>> items;  // sorted by tick
    std::size_t next = 0;

    EventQueue(const std::vector<ScheduledEvent>& events, double t0, double h) {
        for (const auto& ev : events) {
            items.emplace_back(whole_steps(ev.time - t0, h, "event '" + ev.id + "' time"), ev.id);
        }
        std::stable_sort(items.begin(), items.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; });
    }

    std::int64_t next_tick() const {
        return next < items.size() ? items[next].first : std::numeric_limits<std::int64_t>::max();
    }

    void fire(OdeSystem& system, StateVector& x, std::int64_t tick, double t) {
        while (next < items.size() && items[next].first == tick) {
            x = system.apply_event(items[next].second, x, t);
            ++next;
        }
    }
};

/// Plain RK4 from tick `from` to tick `to`, recording nodes from+1 .. to and
/// firing events whose ticks fall on interior nodes.
std::int64_t advance_micro(OdeSystem& system, StateVector& x, double origin, double h,
                           std::int64_t from, std::int64_t to, EventQueue& events,
                           SimulationTrace& trace) {
    std::int64_t steps = 0;
    std::int64_t tick = from;
    while (tick < to) {
        const std::int64_t stop = std::min(to, std::max(tick + 1, events.next_tick()));
        const auto layout = system.layout();
        const std::size_t n = layout->size();
        std::vector<double> cur(x.values().begin(), x.values().end());
        std::vector<double> nxt(n), force(n);
        Rk4Stepper stepper(n);
        trace.reserve(static_cast<std::size_t>(stop - tick));
        for (; tick < stop; ++tick) {
            const double t = origin + static_cast<double>(tick) * h;
            system.evaluate(cur, t, force);
            check_finite(system, force, t, tick, "force sample");
            stepper.advance(system, cur, t, h, force, nxt, tick);
            cur.swap(nxt);
            trace.append(tick + 1, origin + static_cast<double>(tick + 1) * h, NodeMode::micro, layout,
                         cur);
            ++steps;
        }
        x = StateVector(layout, std::move(cur));
        if (tick < to) events.fire(system, x, tick, origin + static_cast<double>(tick) * h);
    }
    return steps;
}

}  // namespace

HmmCycleResult hmm_cycle(const OdeSystem& system, const StateVector& X_n, double t_n,
                         const HmmConfig& cfg, const TransferOps& ops) {
    const HmmPlan plan = make_plan(cfg);
    Rk4Stepper stepper(system.dimension());
    MicroTrace window(system.layout(), cfg.h_micro);
    auto outcome = run_cycle(system, X_n, t_n, 0, plan, plan.macro_steps, ops, stepper, window);
    const double t_next = t_n + static_cast<double>(outcome.next_tick) * cfg.h_micro;
    return HmmCycleResult{std::move(outcome.X_next), t_next, std::move(window),
                          std::move(outcome.force)};
}

void run_schedule_into(OdeSystem& system, const StateVector& x0, const PhaseSchedule& schedule,
                       const HmmConfig& cfg, const TransferOps& ops, SimulationTrace& trace) {
    const double h = cfg.h_micro;
    if (auto issues = schedule.validate(h); !issues.empty()) throw ValidationError(std::move(issues));
    std::optional<HmmPlan> plan;
    if (schedule.has_hmm_phase()) plan = make_plan(cfg);
    if (x0.size() != system.dimension()) throw ShapeError("initial state does not match system layout");

    const double origin = schedule.t_start();
    EventQueue events(schedule.events, origin, h);
    StateVector x = x0;
    check_finite(system, x.values(), origin, 0, "initial state");
    trace.append(0, origin, NodeMode::micro, system.layout(), x.values());
    std::int64_t tick = 0;
    events.fire(system, x, tick, origin);

    for (const auto& phase : schedule.phases) {
        const std::int64_t end = whole_steps(phase.t_end - origin, h, "phase boundary");
        PhaseStats stats;
        stats.name = phase.name;
        stats.t_start = phase.t_start;
        stats.t_end = phase.t_end;
        stats.mode = to_string(phase.mode);
        stats.span_ticks = end - tick;
        trace.phase_stats().push_back(stats);
        auto& st = trace.phase_stats().back();

        if (phase.mode == PhaseMode::micro) {
            st.micro_steps += advance_micro(system, x, origin, h, tick, end, events, trace);
            tick = end;
        } else {
            Rk4Stepper stepper(system.dimension());
            MicroTrace window(system.layout(), h);
            while (end - tick > plan->window_steps) {
                const std::int64_t room = end - (tick + plan->anchor_steps());
                const std::int64_t H_steps = std::min(plan->macro_steps, room);
                if (window.layout() != system.layout()) {
                    window = MicroTrace(system.layout(), h);
                    stepper = Rk4Stepper(system.dimension());
                }
                auto outcome = run_cycle(system, x, origin, tick, *plan, H_steps, ops, stepper, window);
                const auto layout = system.layout();
                for (std::size_t k = 1; k < window.size(); ++k) {
                    const std::int64_t node = tick + static_cast<std::int64_t>(k);
                    if (node >= outcome.next_tick) break;
                    trace.append(node, window.times()[k], NodeMode::micro, layout, window.state_row(k));
                }
                trace.append(outcome.next_tick, origin + static_cast<double>(outcome.next_tick) * h,
                             NodeMode::macro, outcome.X_next.layout_ptr(), outcome.X_next.values());
                st.micro_steps += plan->window_steps;
                st.macro_steps += 1;
                if (H_steps == plan->macro_steps) {
                    st.full_cycles += 1;
                    st.cycle_micro_steps += plan->window_steps;
                    st.cycle_ticks += outcome.next_tick - tick;
                }
                tick = outcome.next_tick;
                x = reconstruct(outcome.X_next, ops);
            }
            // Remainder too short for a full micro window.
            st.micro_steps += advance_micro(system, x, origin, h, tick, end, events, trace);
            tick = end;
        }
        events.fire(system, x, tick, origin + static_cast<double>(tick) * h);
    }
}

SimulationTrace run_schedule(OdeSystem& system, const StateVector& x0, const PhaseSchedule& schedule,
                             const HmmConfig& cfg, const TransferOps& ops) {
    SimulationTrace trace;
    run_schedule_into(system, x0, schedule, cfg, ops, trace);
    return trace;
}

void run_baseline_into(OdeSystem& system, const StateVector& x0, double t_end, double h,
                       const std::vector<ScheduledEvent>& events, SimulationTrace& trace) {
    const std::int64_t total = whole_steps(t_end, h, "t_end");
    if (x0.size() != system.dimension()) throw ShapeError("initial state does not match system layout");
    EventQueue queue(events, 0.0, h);
    PhaseStats stats;
    stats.name = "baseline";
    stats.t_start = 0.0;
    stats.t_end = t_end;
    stats.mode = "micro";
    stats.span_ticks = total;
    trace.phase_stats().push_back(stats);

    StateVector x = x0;
    check_finite(system, x.values(), 0.0, 0, "initial state");
    trace.append(0, 0.0, NodeMode::micro, system.layout(), x.values());
    queue.fire(system, x, 0, 0.0);

    std::int64_t tick = 0;
    while (tick < total) {
        const std::int64_t stop = std::min(total, std::max(tick + 1, queue.next_tick()));
        const auto layout = system.layout();
        const std::size_t n = layout->size();
        Rk4Stepper stepper(n);
        std::vector<double> cur(x.values().begin(), x.values().end());
        std::vector<double> nxt(n), force(n);
        trace.reserve(static_cast<std::size_t>(stop - tick));
        for (; tick < stop; ++tick) {
            const double t = static_cast<double>(tick) * h;
            system.evaluate(cur, t, force);
            check_finite(system, force, t, tick, "force sample");
            stepper.advance(system, cur, t, h, force, nxt, tick);
            cur.swap(nxt);
            trace.append(tick + 1, static_cast<double>(tick + 1) * h, NodeMode::micro, layout, cur);
            trace.phase_stats().back().micro_steps += 1;
        }
        x = StateVector(layout, std::move(cur));
        queue.fire(system, x, tick, static_cast<double>(tick) * h);
    }
}

SimulationTrace run_baseline(OdeSystem& system, const StateVector& x0, double t_end, double h,
                             const std::vector<ScheduledEvent>& events) {
    SimulationTrace trace;
    run_baseline_into(system, x0, t_end, h, events, trace);
    return trace;
}

}  // namespace hmmsim
