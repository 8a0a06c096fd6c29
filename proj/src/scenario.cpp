#include "hmmsim/scenario.hpp"

#include <toml.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace hmmsim {

const char* to_string(SystemKind kind) { return kind == SystemKind::emt ? "emt" : "test"; }

namespace {

/// Typed access to one TOML table that records type errors and unknown keys.
class Reader {
public:
    Reader(const toml::table& table, std::string path, std::vector<std::string>& issues)
        : table_(table), path_(std::move(path)), issues_(issues) {}

    std::string key_path(std::string_view key) const {
        return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
    }

    const toml::node* get(std::string_view key) {
        used_.insert(std::string(key));
        return table_.get(key);
    }

    void number(std::string_view key, double& out) {
        if (const auto* n = get(key)) {
            if (auto v = n->value<double>(); v && (n->is_floating_point() || n->is_integer())) {
                out = *v;
            } else {
                issues_.push_back(key_path(key) + " must be a number");
            }
        }
    }

    void optional_number(std::string_view key, std::optional<double>& out) {
        if (get(key) == nullptr) return;
        double v = 0.0;
        number(key, v);
        out = v;
    }

    void integer(std::string_view key, std::int64_t& out) {
        if (const auto* n = get(key)) {
            if (auto v = n->value<std::int64_t>(); v && n->is_integer()) {
                out = *v;
            } else {
                issues_.push_back(key_path(key) + " must be an integer");
            }
        }
    }

    void boolean(std::string_view key, bool& out) {
        if (const auto* n = get(key)) {
            if (auto v = n->value<bool>()) {
                out = *v;
            } else {
                issues_.push_back(key_path(key) + " must be a boolean");
            }
        }
    }

    bool string(std::string_view key, std::string& out) {
        if (const auto* n = get(key)) {
            if (auto v = n->value<std::string>()) {
                out = *v;
                return true;
            }
            issues_.push_back(key_path(key) + " must be a string");
        }
        return false;
    }

    void strings(std::string_view key, std::vector<std::string>& out) {
        const auto* n = get(key);
        if (!n) return;
        const auto* arr = n->as_array();
        if (!arr) {
            issues_.push_back(key_path(key) + " must be an array of strings");
            return;
        }
        out.clear();
        for (const auto& e : *arr) {
            if (auto v = e.value<std::string>()) {
                out.push_back(*v);
            } else {
                issues_.push_back(key_path(key) + " must contain only strings");
            }
        }
    }

    void numbers(std::string_view key, std::vector<double>& out) {
        const auto* n = get(key);
        if (!n) return;
        const auto* arr = n->as_array();
        if (!arr) {
            issues_.push_back(key_path(key) + " must be an array of numbers");
            return;
        }
        out.clear();
        for (const auto& e : *arr) {
            if (auto v = e.value<double>(); v && (e.is_floating_point() || e.is_integer())) {
                out.push_back(*v);
            } else {
                issues_.push_back(key_path(key) + " must contain only numbers");
            }
        }
    }

    const toml::table* table(std::string_view key) {
        const auto* n = get(key);
        if (!n) return nullptr;
        if (const auto* t = n->as_table()) return t;
        issues_.push_back(key_path(key) + " must be a table");
        return nullptr;
    }

    const toml::array* table_array(std::string_view key) {
        const auto* n = get(key);
        if (!n) return nullptr;
        if (const auto* a = n->as_array(); a && a->is_array_of_tables()) return a;
        issues_.push_back(key_path(key) + " must be an array of tables");
        return nullptr;
    }

    void finish() {
        for (const auto& [k, v] : table_) {
            if (!used_.count(std::string(k.str()))) {
                issues_.push_back("unknown key " + key_path(k.str()) + " (line " +
                                  std::to_string(v.source().begin.line) + ")");
            }
        }
    }

private:
    const toml::table& table_;
    std::string path_;
    std::vector<std::string>& issues_;
    std::set<std::string> used_;
};

void read_machine(Reader& r, emt::GeneratorParams& g, emt::ControlParams& c,
                  std::vector<std::string>& issues) {
    r.number("H", g.H);
    r.number("D", g.D);
    r.number("omega0", g.omega0);
    r.number("r_s", g.r_s);
    r.number("r_fd", g.r_fd);
    r.number("r_1d", g.r_1d);
    r.number("r_1q", g.r_1q);
    r.number("r_2q", g.r_2q);
    r.number("L_l", g.L_l);
    r.number("L_ad", g.L_ad);
    r.number("L_aq", g.L_aq);
    r.number("L_fd", g.L_fd);
    r.number("L_1d", g.L_1d);
    r.number("L_1q", g.L_1q);
    r.number("L_2q", g.L_2q);
    if (const auto* t = r.table("governor")) {
        Reader gr(*t, r.key_path("governor"), issues);
        gr.number("gain", c.governor.gain);
        gr.number("time_constant", c.governor.time_constant);
        gr.number("p_ref", c.governor.p_ref);
        gr.finish();
    }
    if (const auto* t = r.table("exciter")) {
        Reader er(*t, r.key_path("exciter"), issues);
        er.number("gain", c.exciter.gain);
        er.number("time_constant", c.exciter.time_constant);
        er.number("v_ref", c.exciter.v_ref);
        er.finish();
    }
    r.finish();
}

Scenario from_table(const toml::table& root, std::vector<std::string>& issues) {
    Scenario s;
    Reader top(root, "", issues);

    if (const auto* t = top.table("simulation")) {
        Reader r(*t, "simulation", issues);
        r.number("t_end", s.simulation.t_end);
        r.number("h_micro", s.simulation.h_micro);
        r.boolean("deterministic", s.simulation.deterministic);
        std::string kind;
        if (r.string("system", kind)) {
            if (kind == "emt") {
                s.simulation.system = SystemKind::emt;
            } else if (kind == "test") {
                s.simulation.system = SystemKind::test;
            } else {
                issues.push_back("simulation.system must be emt or test (got '" + kind + "')");
            }
        }
        r.finish();
    }

    if (const auto* t = top.table("hmm")) {
        Reader r(*t, "hmm", issues);
        r.number("H_macro", s.hmm.H_macro);
        r.number("eta", s.hmm.eta);
        r.optional_number("window", s.hmm.window);
        r.optional_number("dt_eval", s.hmm.dt_eval);
        r.optional_number("sigma", s.hmm.sigma);
        std::string anchor;
        if (r.string("anchor", anchor)) {
            try {
                s.hmm.anchor = parse_anchor_mode(anchor);
            } catch (const ParameterError& e) {
                issues.push_back(std::string("hmm.anchor: ") + e.what());
            }
        }
        r.string("micro_solver", s.hmm.micro_solver);
        r.string("macro_solver", s.hmm.macro_solver);
        if (const auto* m = r.table("macro")) {
            Reader mr(*m, "hmm.macro", issues);
            mr.numbers("a", s.hmm.macro.a);
            mr.numbers("b", s.hmm.macro.b);
            mr.number("c", s.hmm.macro.c);
            mr.finish();
        }
        r.finish();
    }
    s.hmm.h_micro = s.simulation.h_micro;

    bool have_phases = false;
    if (const auto* t = top.table("schedule")) {
        Reader r(*t, "schedule", issues);
        if (const auto* arr = r.table_array("phases")) {
            have_phases = true;
            std::size_t i = 0;
            for (const auto& node : *arr) {
                Reader pr(*node.as_table(), "schedule.phases[" + std::to_string(i++) + "]", issues);
                Phase p;
                pr.string("name", p.name);
                pr.number("t_start", p.t_start);
                pr.number("t_end", p.t_end);
                std::string mode = "micro";
                pr.string("mode", mode);
                if (mode == "micro") {
                    p.mode = PhaseMode::micro;
                } else if (mode == "hmm") {
                    p.mode = PhaseMode::hmm;
                } else {
                    issues.push_back(pr.key_path("mode") + " must be micro or hmm (got '" + mode + "')");
                }
                pr.finish();
                s.schedule.phases.push_back(std::move(p));
            }
        }
        if (const auto* arr = r.table_array("events")) {
            std::size_t i = 0;
            for (const auto& node : *arr) {
                Reader er(*node.as_table(), "schedule.events[" + std::to_string(i++) + "]", issues);
                ScheduledEvent ev;
                er.number("time", ev.time);
                er.string("id", ev.id);
                er.finish();
                s.schedule.events.push_back(std::move(ev));
            }
        }
        r.finish();
    }
    if (!have_phases) s.schedule = single_phase_schedule(s.simulation.t_end, PhaseMode::hmm);

    const bool is_emt = s.simulation.system == SystemKind::emt;
    const auto* gens = top.table("generators");
    const auto* net = top.table("network");
    const auto* test = top.table("test_system");
    if (is_emt) {
        s.emt = emt::default_emt_params();
        if (gens) {
            Reader r(*gens, "generators", issues);
            for (int k = 0; k < 2; ++k) {
                const std::string name = "G" + std::to_string(k + 1);
                if (const auto* g = r.table(name)) {
                    Reader gr(*g, "generators." + name, issues);
                    read_machine(gr, s.emt->generators[k], s.emt->controls[k], issues);
                }
            }
            r.finish();
        }
        if (net) {
            Reader r(*net, "network", issues);
            auto& n = s.emt->network;
            r.number("L_T1", n.L_T1);
            r.number("L_T2", n.L_T2);
            r.number("L_1", n.L_1);
            r.number("R_1", n.R_1);
            r.number("L_2", n.L_2);
            r.number("R_2", n.R_2);
            r.number("L_line", n.L_line);
            r.number("R_line", n.R_line);
            r.number("C_line", n.C_line);
            r.finish();
        }
        if (test) issues.emplace_back("test_system section is only valid with simulation.system = \"test\"");
    } else {
        s.test_system.emplace();
        bool have_x0 = false;
        if (test) {
            Reader r(*test, "test_system", issues);
            std::string kind;
            if (r.string("kind", kind)) {
                try {
                    s.test_system->kind = diag::parse_test_kind(kind);
                } catch (const ParameterError& e) {
                    issues.push_back(std::string("test_system.kind: ") + e.what());
                }
            }
            r.number("epsilon", s.test_system->epsilon);
            have_x0 = r.get("x0") != nullptr;
            r.numbers("x0", s.test_system->x0);
            r.finish();
        }
        if (!have_x0) {
            s.test_system->x0 = s.test_system->kind == diag::TestKind::dissipative
                                    ? std::vector<double>{1.0, 1.0}
                                    : std::vector<double>{1.0};
        }
        if (gens || net) {
            issues.emplace_back("generators/network sections are only valid with simulation.system = \"emt\"");
        }
    }

    bool have_compare = false;
    if (const auto* t = top.table("outputs")) {
        Reader r(*t, "outputs", issues);
        r.strings("variables", s.outputs.variables);
        r.integer("decimate", s.outputs.decimate);
        have_compare = r.get("compare") != nullptr;
        r.strings("compare", s.outputs.compare);
        std::vector<double> iv;
        if (r.get("compare_interval")) {
            r.numbers("compare_interval", iv);
            if (iv.size() == 2) {
                s.outputs.compare_interval = std::make_pair(iv[0], iv[1]);
            } else {
                issues.emplace_back("outputs.compare_interval must have two entries [t0, t1]");
            }
        }
        r.finish();
    }
    if (!have_compare) {
        if (is_emt) {
            s.outputs.compare = {"i4", "v3", "v4", "env(i1)", "env(i2)", "env(i7)"};
        } else {
            s.outputs.compare = {s.test_system->kind == diag::TestKind::dissipative ? "x2" : "w"};
        }
    }
    top.finish();
    return s;
}

std::string fmt_num(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    std::string s(buf, end);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        out += c;
    }
    return out + "\"";
}

std::string string_list(const std::vector<std::string>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + quote(v[i]);
    return out + "]";
}

std::string number_list(const std::vector<double>& v) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt_num(v[i]);
    return out + "]";
}

std::vector<std::string> known_columns(const Scenario& s) {
    if (s.simulation.system == SystemKind::emt) return emt::emt_layout(emt::Topology::pre_trip)->names();
    if (s.test_system && s.test_system->kind == diag::TestKind::oscillatory) return {"w"};
    return {"x1", "x2"};
}

}  // namespace

std::pair<double, double> Scenario::comparison_interval() const {
    if (outputs.compare_interval) return *outputs.compare_interval;
    double a = simulation.t_end, b = 0.0;
    for (const auto& p : schedule.phases) {
        if (p.mode != PhaseMode::hmm) continue;
        a = std::min(a, p.t_start);
        b = std::max(b, p.t_end);
    }
    if (b > a) return {a, b};
    return {0.0, simulation.t_end};
}

std::vector<std::string> Scenario::validate() const {
    std::vector<std::string> issues;
    const double h = simulation.h_micro;
    if (!(simulation.t_end > 0.0)) issues.emplace_back("simulation.t_end must be positive");
    if (!(h > 0.0)) issues.emplace_back("simulation.h_micro must be positive");
    if (h > 0.0 && simulation.t_end > 0.0) {
        const double r = simulation.t_end / h;
        if (std::abs(r - std::round(r)) > 1e-9 * std::max(1.0, r)) {
            issues.push_back("simulation.t_end = " + fmt_num(simulation.t_end) +
                             " is not a whole number of simulation.h_micro steps");
        }
    }
    if (schedule.has_hmm_phase()) {
        for (auto msg : hmm.validate()) {
            for (std::size_t pos; (pos = msg.find("hmm.h_micro")) != std::string::npos;) {
                msg.replace(pos, 11, "simulation.h_micro");
            }
            issues.push_back(std::move(msg));
        }
    }
    for (auto& msg : schedule.validate(h)) issues.push_back("schedule: " + msg);
    if (!schedule.phases.empty() &&
        std::abs(schedule.t_end() - simulation.t_end) > 1e-9 * std::max(1.0, simulation.t_end)) {
        issues.push_back("schedule ends at t = " + fmt_num(schedule.t_end()) +
                         " but simulation.t_end = " + fmt_num(simulation.t_end));
    }
    for (const auto& ev : schedule.events) {
        if (simulation.system == SystemKind::emt) {
            if (ev.id != emt::kTripEvent) {
                issues.push_back("schedule event id '" + ev.id + "' is unknown (expected " +
                                 emt::kTripEvent + ")");
            }
        } else {
            issues.push_back("schedule event '" + ev.id + "': test systems have no events");
        }
    }
    if (simulation.system == SystemKind::emt) {
        if (emt) {
            for (auto& msg : emt->validate()) issues.push_back(std::move(msg));
        }
        int trips = 0;
        for (const auto& ev : schedule.events) trips += ev.id == emt::kTripEvent;
        if (trips > 1) issues.emplace_back("load 1 can only be tripped once");
    } else if (test_system) {
        if (!(test_system->epsilon > 0.0)) issues.emplace_back("test_system.epsilon must be positive");
        const std::size_t dim = test_system->kind == diag::TestKind::dissipative ? 2 : 1;
        if (test_system->x0.size() != dim) {
            issues.push_back("test_system.x0 must have " + std::to_string(dim) + " entries");
        }
    }
    if (outputs.decimate < 1) issues.emplace_back("outputs.decimate must be >= 1");
    const auto cols = known_columns(*this);
    for (const auto& v : outputs.variables) {
        try {
            diag::resolve_variables(cols, {v});
            if (v.rfind("env(", 0) == 0) issues.push_back("outputs.variables: '" + v + "' is not a state name");
        } catch (const ComparisonError&) {
            issues.push_back("outputs.variables: unknown state '" + v + "'");
        }
    }
    if (outputs.compare.empty()) issues.emplace_back("outputs.compare must name at least one variable");
    for (const auto& v : outputs.compare) {
        try {
            diag::resolve_variables(cols, {v});
        } catch (const ComparisonError&) {
            issues.push_back("outputs.compare: unknown variable '" + v + "'");
        }
    }
    if (outputs.compare_interval && !(outputs.compare_interval->second > outputs.compare_interval->first)) {
        issues.emplace_back("outputs.compare_interval must satisfy t0 < t1");
    }
    return issues;
}

Scenario parse_scenario(std::string_view text, const std::string& source) {
    toml::table root;
    try {
        root = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        const int line = static_cast<int>(e.source().begin.line);
        std::ostringstream msg;
        msg << source << ":" << line << ":" << e.source().begin.column << ": " << e.description();
        throw ParseError(msg.str(), line);
    }
    std::vector<std::string> issues;
    Scenario s = from_table(root, issues);
    for (auto& msg : s.validate()) issues.push_back(std::move(msg));
    if (!issues.empty()) throw ValidationError(std::move(issues));
    return s;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigurationError("cannot open scenario '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), path);
}

std::string to_toml(const Scenario& s) {
    std::ostringstream o;
    o << "[simulation]\n"
      << "t_end = " << fmt_num(s.simulation.t_end) << "\n"
      << "h_micro = " << fmt_num(s.simulation.h_micro) << "\n"
      << "deterministic = " << (s.simulation.deterministic ? "true" : "false") << "\n"
      << "system = " << quote(to_string(s.simulation.system)) << "\n\n";

    o << "[hmm]\n"
      << "H_macro = " << fmt_num(s.hmm.H_macro) << "\n"
      << "eta = " << fmt_num(s.hmm.eta) << "\n"
      << "window = " << fmt_num(s.hmm.window_length()) << "\n"
      << "dt_eval = " << fmt_num(s.hmm.eval_offset()) << "\n"
      << "sigma = " << fmt_num(s.hmm.kernel_sigma()) << "\n"
      << "anchor = " << quote(to_string(s.hmm.anchor)) << "\n"
      << "micro_solver = " << quote(s.hmm.micro_solver) << "\n"
      << "macro_solver = " << quote(s.hmm.macro_solver) << "\n\n"
      << "[hmm.macro]\n"
      << "a = " << number_list(s.hmm.macro.a) << "\n"
      << "b = " << number_list(s.hmm.macro.b) << "\n"
      << "c = " << fmt_num(s.hmm.macro.c) << "\n\n";

    for (const auto& p : s.schedule.phases) {
        o << "[[schedule.phases]]\n"
          << "name = " << quote(p.name) << "\n"
          << "t_start = " << fmt_num(p.t_start) << "\n"
          << "t_end = " << fmt_num(p.t_end) << "\n"
          << "mode = " << quote(to_string(p.mode)) << "\n\n";
    }
    for (const auto& ev : s.schedule.events) {
        o << "[[schedule.events]]\n"
          << "time = " << fmt_num(ev.time) << "\n"
          << "id = " << quote(ev.id) << "\n\n";
    }

    if (s.emt) {
        for (int k = 0; k < 2; ++k) {
            const auto& g = s.emt->generators[k];
            const auto& c = s.emt->controls[k];
            const std::string name = "generators.G" + std::to_string(k + 1);
            o << "[" << name << "]\n"
              << "H = " << fmt_num(g.H) << "\nD = " << fmt_num(g.D) << "\nomega0 = " << fmt_num(g.omega0)
              << "\nr_s = " << fmt_num(g.r_s) << "\nr_fd = " << fmt_num(g.r_fd)
              << "\nr_1d = " << fmt_num(g.r_1d) << "\nr_1q = " << fmt_num(g.r_1q)
              << "\nr_2q = " << fmt_num(g.r_2q) << "\nL_l = " << fmt_num(g.L_l)
              << "\nL_ad = " << fmt_num(g.L_ad) << "\nL_aq = " << fmt_num(g.L_aq)
              << "\nL_fd = " << fmt_num(g.L_fd) << "\nL_1d = " << fmt_num(g.L_1d)
              << "\nL_1q = " << fmt_num(g.L_1q) << "\nL_2q = " << fmt_num(g.L_2q) << "\n\n";
            o << "[" << name << ".governor]\n"
              << "gain = " << fmt_num(c.governor.gain)
              << "\ntime_constant = " << fmt_num(c.governor.time_constant)
              << "\np_ref = " << fmt_num(c.governor.p_ref) << "\n\n";
            o << "[" << name << ".exciter]\n"
              << "gain = " << fmt_num(c.exciter.gain)
              << "\ntime_constant = " << fmt_num(c.exciter.time_constant)
              << "\nv_ref = " << fmt_num(c.exciter.v_ref) << "\n\n";
        }
        const auto& n = s.emt->network;
        o << "[network]\n"
          << "L_T1 = " << fmt_num(n.L_T1) << "\nL_T2 = " << fmt_num(n.L_T2)
          << "\nL_1 = " << fmt_num(n.L_1) << "\nR_1 = " << fmt_num(n.R_1)
          << "\nL_2 = " << fmt_num(n.L_2) << "\nR_2 = " << fmt_num(n.R_2)
          << "\nL_line = " << fmt_num(n.L_line) << "\nR_line = " << fmt_num(n.R_line)
          << "\nC_line = " << fmt_num(n.C_line) << "\n\n";
    }
    if (s.test_system) {
        o << "[test_system]\n"
          << "kind = " << quote(diag::to_string(s.test_system->kind)) << "\n"
          << "epsilon = " << fmt_num(s.test_system->epsilon) << "\n"
          << "x0 = " << number_list(s.test_system->x0) << "\n\n";
    }

    o << "[outputs]\n"
      << "variables = " << string_list(s.outputs.variables) << "\n"
      << "decimate = " << s.outputs.decimate << "\n"
      << "compare = " << string_list(s.outputs.compare) << "\n";
    if (s.outputs.compare_interval) {
        o << "compare_interval = ["
          << fmt_num(s.outputs.compare_interval->first) << ", "
          << fmt_num(s.outputs.compare_interval->second) << "]\n";
    }
    return o.str();
}

}  // namespace hmmsim
