#include "hmmsim/runner.hpp"

#include "hmmsim/kernel.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <thread>

namespace hmmsim::run {

using nlohmann::json;

const char* to_string(RunMode mode) { return mode == RunMode::baseline ? "baseline" : "hmm"; }

RunMode parse_run_mode(std::string_view text) {
    if (text == "baseline") return RunMode::baseline;
    if (text == "hmm") return RunMode::hmm;
    throw ParameterError("unknown mode '" + std::string(text) + "' (expected baseline or hmm)");
}

Prepared prepare(const Scenario& scenario) {
    Prepared p;
    if (scenario.simulation.system == SystemKind::emt) {
        const auto& params = *scenario.emt;
        const emt::EmtSystem seed(params, emt::Topology::pre_trip);
        auto eq = emt::find_equilibrium(seed, emt::equilibrium_guess(params, emt::Topology::pre_trip));
        p.system = emt::assemble_emt_system(eq.params, emt::Topology::pre_trip);
        p.x0 = eq.state;
        p.equilibrium = std::move(eq);
    } else {
        const auto& ts = *scenario.test_system;
        auto problem = diag::make_test_system(ts.kind, ts.epsilon);
        p.x0 = StateVector(problem.system->layout(), ts.x0);
        p.system = std::move(problem.system);
    }
    return p;
}

void apply_overrides(Scenario& scenario, std::optional<AnchorMode> anchor,
                     const std::optional<std::vector<std::string>>& hmm_phases,
                     std::optional<std::int64_t> decimate) {
    std::vector<std::string> issues;
    if (anchor) scenario.hmm.anchor = *anchor;
    if (decimate) scenario.outputs.decimate = *decimate;
    if (hmm_phases) {
        for (const auto& name : *hmm_phases) {
            bool found = false;
            for (const auto& p : scenario.schedule.phases) found = found || p.name == name;
            if (!found) issues.push_back("--hmm-phases: no phase named '" + name + "'");
        }
        for (auto& p : scenario.schedule.phases) {
            const bool on = std::find(hmm_phases->begin(), hmm_phases->end(), p.name) != hmm_phases->end();
            p.mode = on ? PhaseMode::hmm : PhaseMode::micro;
        }
    }
    for (auto& msg : scenario.validate()) issues.push_back(std::move(msg));
    if (!issues.empty()) throw ValidationError(std::move(issues));
}

RunResult execute(const Scenario& scenario, const Prepared& prepared, RunMode mode) {
    RunResult r;
    r.mode = mode;
    auto system = prepared.system->clone();
    const auto start = std::chrono::steady_clock::now();
    try {
        if (mode == RunMode::baseline) {
            run_baseline_into(*system, prepared.x0, scenario.simulation.t_end, scenario.simulation.h_micro,
                              scenario.schedule.events, r.trace);
        } else {
            run_schedule_into(*system, prepared.x0, scenario.schedule, scenario.hmm,
                              TransferOps::identity(), r.trace);
        }
    } catch (const DivergenceError& e) {
        r.status = "diverged";
        r.error = e.what();
        r.trace.failure = e.what();
    }
    r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

namespace {

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
}

json phase_stats_json(const std::vector<PhaseStats>& stats) {
    json arr = json::array();
    for (const auto& s : stats) {
        arr.push_back({{"name", s.name},
                       {"t_start", s.t_start},
                       {"t_end", s.t_end},
                       {"mode", s.mode},
                       {"micro_steps", s.micro_steps},
                       {"macro_steps", s.macro_steps},
                       {"full_cycles", s.full_cycles},
                       {"cycle_micro_steps", s.cycle_micro_steps},
                       {"cycle_ticks", s.cycle_ticks},
                       {"span_ticks", s.span_ticks}});
    }
    return arr;
}

json hmm_json(const HmmConfig& c) {
    return {{"h_micro", c.h_micro},
            {"H_macro", c.H_macro},
            {"eta", c.eta},
            {"window", c.window_length()},
            {"dt_eval", c.eval_offset()},
            {"sigma", c.kernel_sigma()},
            {"anchor", to_string(c.anchor)},
            {"micro_solver", c.micro_solver},
            {"macro_solver", c.macro_solver}};
}

json metrics_json(const diag::ErrorMetrics& m) {
    return {{"rel_l2", m.rel_l2},
            {"max_abs", m.max_abs},
            {"per_variable", m.per_variable},
            {"compared_interval", {m.compared_interval.first, m.compared_interval.second}},
            {"matched_nodes", m.matched_nodes}};
}

std::string file_in(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigurationError("cannot create output directory '" + dir + "': " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ConfigurationError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw ConfigurationError("failed writing '" + path + "'");
}

std::vector<std::string> csv_columns(const Scenario& s) {
    if (s.outputs.variables.empty()) return {};
    std::vector<std::string> cols;
    std::vector<std::string> known = s.simulation.system == SystemKind::emt
                                         ? emt::emt_layout(emt::Topology::pre_trip)->names()
                                         : std::vector<std::string>{};
    if (known.empty()) {
        known = s.test_system->kind == diag::TestKind::dissipative ? std::vector<std::string>{"x1", "x2"}
                                                                   : std::vector<std::string>{"w"};
    }
    return diag::resolve_variables(known, s.outputs.variables);
}

void flush(const Scenario& scenario, const Prepared& prepared, RunResult& r, const std::string& out_dir) {
    r.csv_path = file_in(out_dir, std::string("trace_") + to_string(r.mode) + ".csv");
    r.manifest_path = file_in(out_dir, std::string("manifest_") + to_string(r.mode) + ".json");
    write_csv(r.trace, r.csv_path, scenario.outputs.decimate, csv_columns(scenario));
    write_manifest(scenario, prepared, r, r.manifest_path);
}

}  // namespace

void write_manifest(const Scenario& scenario, const Prepared& prepared, const RunResult& result,
                    const std::string& path) {
    json m;
    m["kind"] = "run_manifest";
    m["mode"] = to_string(result.mode);
    m["status"] = result.status;
    m["error"] = result.error ? json(*result.error) : json(nullptr);
    m["wall_time_s"] = result.wall_seconds;
    m["created_utc"] = utc_now();
    m["system"] = prepared.system->description();
    m["t_end"] = scenario.simulation.t_end;
    m["rows"] = result.trace.size();
    m["last_time"] = result.trace.empty() ? 0.0 : result.trace.back_time();
    m["decimate"] = scenario.outputs.decimate;
    m["csv"] = std::filesystem::path(result.csv_path).filename().string();
    m["columns"] = result.trace.columns();
    m["hmm"] = hmm_json(scenario.hmm);
    json phases = json::array();
    for (const auto& p : scenario.schedule.phases) {
        phases.push_back({{"name", p.name}, {"t_start", p.t_start}, {"t_end", p.t_end}, {"mode", to_string(p.mode)}});
    }
    m["schedule"] = phases;
    json events = json::array();
    for (const auto& e : scenario.schedule.events) events.push_back({{"time", e.time}, {"id", e.id}});
    m["events"] = events;
    m["phase_stats"] = phase_stats_json(result.trace.phase_stats());
    if (prepared.equilibrium) {
        m["equilibrium"] = {{"residual", prepared.equilibrium->residual},
                            {"iterations", prepared.equilibrium->iterations},
                            {"G1_p_ref", prepared.equilibrium->params.controls[0].governor.p_ref}};
    }
    m["scenario"] = to_toml(scenario);
    write_text(path, m.dump(2) + "\n");
}

RunResult run_simulate(const Scenario& scenario, RunMode mode, const std::string& out_dir) {
    ensure_dir(out_dir);
    const Prepared prepared = prepare(scenario);
    RunResult r = execute(scenario, prepared, mode);
    flush(scenario, prepared, r, out_dir);
    return r;
}

std::string to_json(const BenchReport& r) {
    json j;
    j["kind"] = "bench_report";
    j["status"] = r.status;
    j["error"] = r.error ? json(*r.error) : json(nullptr);
    j["wall_baseline_s"] = r.wall_baseline;
    j["wall_hmm_s"] = r.wall_hmm;
    j["speedup_pct"] = r.speedup_pct;
    j["serial"] = r.serial;
    j["anchor"] = r.anchor;
    json phases = json::array();
    for (const auto& p : r.phases) {
        phases.push_back({{"name", p.name},
                          {"mode", p.mode},
                          {"baseline_micro_steps", p.baseline_micro_steps},
                          {"hmm_micro_steps", p.hmm_micro_steps},
                          {"hmm_macro_steps", p.hmm_macro_steps},
                          {"full_cycles", p.full_cycles},
                          {"cycle_micro_steps", p.cycle_micro_steps},
                          {"cycle_ticks", p.cycle_ticks}});
    }
    j["phases"] = phases;
    j["micro_steps"] = {{"baseline", r.baseline_micro_steps}, {"hmm", r.hmm_micro_steps}};
    j["predicted_cycle_ratio"] = r.predicted_cycle_ratio;
    j["measured_cycle_ratio"] = r.measured_cycle_ratio;
    j["measured_run_ratio"] = r.measured_run_ratio;
    j["compare"] = r.compare;
    j["errors"] = r.errors ? metrics_json(*r.errors) : json(nullptr);
    j["scenario"] = r.scenario_echo;
    return j.dump(2) + "\n";
}

BenchReport run_bench(const Scenario& scenario, const std::string& out_dir, bool serial) {
    if (!scenario.schedule.has_hmm_phase()) {
        throw ConfigurationError("bench needs at least one hmm phase in the schedule");
    }
    ensure_dir(out_dir);
    const Prepared prepared = prepare(scenario);
    const HmmPlan plan = make_plan(scenario.hmm);

    RunResult base, hmm;
    if (serial) {
        base = execute(scenario, prepared, RunMode::baseline);
        hmm = execute(scenario, prepared, RunMode::hmm);
    } else {
        std::thread worker([&] { hmm = execute(scenario, prepared, RunMode::hmm); });
        base = execute(scenario, prepared, RunMode::baseline);
        worker.join();
    }

    BenchReport rep;
    rep.serial = serial;
    rep.anchor = to_string(scenario.hmm.anchor);
    rep.wall_baseline = base.wall_seconds;
    rep.wall_hmm = hmm.wall_seconds;
    rep.speedup_pct = 100.0 * (1.0 - hmm.wall_seconds / base.wall_seconds);
    rep.compare = scenario.outputs.compare;
    rep.scenario_echo = to_toml(scenario);
    rep.predicted_cycle_ratio = static_cast<double>(plan.window_steps) /
                                static_cast<double>(plan.anchor_steps() + plan.macro_steps);

    std::int64_t cyc_micro = 0, cyc_ticks = 0;
    for (const auto& st : hmm.trace.phase_stats()) {
        PhaseSteps ps;
        ps.name = st.name;
        ps.mode = st.mode;
        ps.baseline_micro_steps = st.span_ticks;
        ps.hmm_micro_steps = st.micro_steps;
        ps.hmm_macro_steps = st.macro_steps;
        ps.full_cycles = st.full_cycles;
        ps.cycle_micro_steps = st.cycle_micro_steps;
        ps.cycle_ticks = st.cycle_ticks;
        cyc_micro += st.cycle_micro_steps;
        cyc_ticks += st.cycle_ticks;
        rep.hmm_micro_steps += st.micro_steps;
        rep.phases.push_back(ps);
    }
    for (const auto& st : base.trace.phase_stats()) rep.baseline_micro_steps += st.micro_steps;
    if (cyc_ticks > 0) rep.measured_cycle_ratio = static_cast<double>(cyc_micro) / static_cast<double>(cyc_ticks);
    if (rep.baseline_micro_steps > 0) {
        rep.measured_run_ratio =
            static_cast<double>(rep.hmm_micro_steps) / static_cast<double>(rep.baseline_micro_steps);
    }

    if (base.status != "ok" || hmm.status != "ok") {
        rep.status = "failed";
        rep.error = base.error ? "baseline: " + *base.error : "hmm: " + hmm.error.value_or("");
    } else {
        try {
            rep.errors = diag::trajectory_error(base.trace, hmm.trace, scenario.outputs.compare,
                                                scenario.comparison_interval());
        } catch (const ComparisonError& e) {
            rep.status = "failed";
            rep.error = std::string("comparison: ") + e.what();
        }
    }

    flush(scenario, prepared, base, out_dir);
    flush(scenario, prepared, hmm, out_dir);
    write_text(file_in(out_dir, "bench_report.json"), to_json(rep));
    return rep;
}

StiffnessResult run_stiffness(const Scenario& scenario, double at, double fd_step) {
    const Prepared prepared = prepare(scenario);
    auto system = prepared.system->clone();
    StateVector x = prepared.x0;
    if (at < 0.0 || at > scenario.simulation.t_end) {
        throw ParameterError("--at must lie in [0, t_end]");
    }
    if (at > 0.0) {
        std::vector<ScheduledEvent> events;
        for (const auto& e : scenario.schedule.events) {
            if (e.time <= at) events.push_back(e);
        }
        const auto trace = run_baseline(*system, prepared.x0, at, scenario.simulation.h_micro, events);
        x = trace.back_state();
        if (!(x.layout() == *system->layout())) {
            // An event fired at `at` itself; carry the state over by name.
            StateVector mapped(system->layout());
            for (std::size_t i = 0; i < mapped.size(); ++i) mapped[i] = x.at(system->layout()->name(i));
            x = std::move(mapped);
        }
    }
    StiffnessResult res;
    res.time = at;
    if (const auto* e = dynamic_cast<const emt::EmtSystem*>(system.get())) res.topology = e->topology();
    res.report = diag::stiffness_report(diag::numerical_jacobian(*system, x, at, fd_step));
    return res;
}

void print_stiffness(const StiffnessResult& r, std::ostream& out) {
    const auto& s = r.report;
    out << std::setprecision(6);
    out << "stiffness at t = " << r.time << " s (" << s.eigenvalues.size() << " states)\n";
    out << "  two-scale split   " << (s.two_scale ? "yes" : "no") << "\n";
    out << "  k0 (slow count)   " << s.k0 << "  (of which exactly zero: " << s.zero_count << ")\n";
    out << "  scale_gap         " << s.scale_gap << "\n";
    out << "  epsilon_estimate  " << s.epsilon_estimate << " s\n";
    out << "  C1 max Re         " << s.max_real_part << "\n";
    out << "  C2 slow radius    " << s.slow_radius << "\n";
    out << "  C3 eps*min|fast|  " << s.fast_scaled_min << "\n";
    out << "  C4 eps*max|fast|  " << s.fast_scaled_max << "\n";
    out << "  rho separation    " << s.separation << "\n";
    out << "  unstable          " << (s.unstable ? "yes" : "no") << "\n";
    out << "  eigenvalues (ascending magnitude):\n";
    for (std::size_t i = 0; i < s.eigenvalues.size(); ++i) {
        const auto l = s.eigenvalues[i];
        out << "    " << std::setw(3) << i << (i < s.k0 ? " slow " : " fast ") << std::setw(14) << l.real()
            << " " << std::showpos << std::setw(14) << l.imag() << std::noshowpos << "i  |"
            << std::abs(l) << "|\n";
    }
}

KernelCheck run_kernel_check(double eta, double sigma, double h) {
    KernelCheck kc;
    kc.eta = eta;
    kc.sigma = sigma;
    kc.h = h;
    const auto w = discretize_kernel(make_gaussian_kernel(eta, sigma), h);
    kc.samples = w.size();
    kc.rescale_factor = w.rescale_factor();
    kc.moment0 = kernel_moment(w, 0);
    kc.moment1 = kernel_moment(w, 1);
    kc.moment2 = kernel_moment(w, 2);
    for (double f : {60.0, 120.0, 600.0}) {
        const double omega = 2.0 * std::numbers::pi * f;
        kc.attenuation.push_back({f, std::abs(frequency_response(w, omega)),
                                  gaussian_frequency_response(sigma, omega)});
    }
    return kc;
}

void print_kernel_check(const KernelCheck& kc, std::ostream& out) {
    out << std::setprecision(6);
    out << "gaussian kernel eta = " << kc.eta << " s, sigma = " << kc.sigma << " s, h = " << kc.h << " s\n";
    out << "  samples           " << kc.samples << "\n";
    out << "  rescale factor    " << std::setprecision(10) << kc.rescale_factor << "\n";
    out << std::scientific << std::setprecision(6);
    out << "  moment r=0        " << std::setprecision(15) << kc.moment0 << std::setprecision(6) << "\n";
    out << "  moment r=1        " << kc.moment1 << "\n";
    out << "  moment r=2        " << kc.moment2 << "\n";
    out << "  attenuation        freq_hz      discrete      gaussian\n";
    for (const auto& row : kc.attenuation) {
        out << "                    " << std::fixed << std::setprecision(1) << std::setw(7) << row.frequency_hz
            << std::scientific << std::setprecision(6) << "  " << row.discrete << "  " << row.gaussian << "\n";
    }
    out << std::defaultfloat;
}

}  // namespace hmmsim::run
