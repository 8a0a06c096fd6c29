#include "hmmsim/emt/system.hpp"

#include <cmath>
#include <sstream>

namespace hmmsim::emt {

std::vector<std::string> EmtParams::validate() const {
    std::vector<std::string> issues;
    for (int k = 0; k < 2; ++k) {
        const std::string g = "generators.G" + std::to_string(k + 1);
        for (auto& s : generators[k].validate(g)) issues.push_back(std::move(s));
        for (auto& s : controls[k].validate(g)) issues.push_back(std::move(s));
    }
    for (auto& s : network.validate("network")) issues.push_back(std::move(s));
    if (generators[0].omega0 != generators[1].omega0) {
        issues.emplace_back("generators.G1.omega0 and generators.G2.omega0 must match");
    }
    return issues;
}

NetworkModel EmtParams::network_model() const {
    NetworkModel m;
    m.omega_b = generators[0].omega0;
    m.gen1 = Branch{generators[0].r_s, generators[0].subtransient_inductance() + network.L_T1};
    m.gen2 = Branch{generators[1].r_s, generators[1].subtransient_inductance() + network.L_T2};
    m.load1 = Branch{network.R_1, network.L_1};
    m.load2 = Branch{network.R_2, network.L_2};
    m.line = Branch{network.R_line, network.L_line};
    m.shunt3 = 0.5 * network.C_line;
    m.shunt4 = 0.5 * network.C_line;
    return m;
}

EmtParams default_emt_params() {
    EmtParams p;
    p.controls[0].governor.p_ref = 0.8;
    p.controls[1].governor.p_ref = 0.7;
    return p;
}

const char* to_string(Topology t) { return t == Topology::pre_trip ? "pre_trip" : "post_trip"; }

LayoutPtr emt_layout(Topology topology) {
    std::vector<std::string> names;
    for (const char* g : {"G1", "G2"}) {
        for (const char* s : {"delta", "dw", "psi_fd", "psi_1d", "psi_1q", "psi_2q", "pm", "efd"}) {
            names.push_back(std::string(g) + "_" + s);
        }
    }
    std::vector<const char*> vectors{"i1", "i2", "i4", "i7", "v3", "v4"};
    if (topology == Topology::pre_trip) vectors.push_back("iL1");
    for (const char* v : vectors) {
        for (const char* c : {"_0", "_D", "_Q"}) names.push_back(std::string(v) + c);
    }
    return make_layout(std::move(names));
}

EmtSystem::EmtSystem(EmtParams params, Topology topology)
    : params_(std::move(params)), topology_(topology) {
    if (auto issues = params_.validate(); !issues.empty()) throw ValidationError(std::move(issues));
    net_ = params_.network_model();
    layout_ = emt_layout(topology_);
}

GeneratorState EmtSystem::machine_state(std::span<const double> x, int k) const {
    const std::size_t o = static_cast<std::size_t>(k) * GeneratorState::size;
    return GeneratorState{x[o], x[o + 1], x[o + 2], x[o + 3], x[o + 4], x[o + 5], x[o + 6], x[o + 7]};
}

namespace {

void store(const GeneratorState& d, std::span<double> dx, std::size_t o) {
    dx[o] = d.delta;
    dx[o + 1] = d.dw;
    dx[o + 2] = d.psi_fd;
    dx[o + 3] = d.psi_1d;
    dx[o + 4] = d.psi_1q;
    dx[o + 5] = d.psi_2q;
    dx[o + 6] = d.pm;
    dx[o + 7] = d.efd;
}

struct MachineEval {
    GeneratorState deriv;
    MachineQuantities q;
};

/// Rotor derivatives and global-frame EMF of machine k.
MachineEval eval_machine(const GeneratorState& s, double phi, const Vec3& i_glob, const Vec3& v_node,
                         const GeneratorParams& p, const ControlParams& c, double L_T) {
    MachineEval out;
    const double cp = std::cos(phi), sp = std::sin(phi);
    auto& q = out.q;
    q.i_d = cp * i_glob[1] + sp * i_glob[2];
    q.i_q = -sp * i_glob[1] + cp * i_glob[2];
    q.flux = mutual_flux(s, q.i_d, q.i_q, p);
    q.torque = electrical_torque(q.flux, q.i_d, q.i_q);
    q.speed_pu = 1.0 + s.dw / p.omega0;

    out.deriv = generator_derivatives(s, q.i_d, q.i_q, 0.0, p, c);
    const MutualFlux e = subtransient_emf(s, out.deriv, p);
    q.emf_global = Vec3(0.0, cp * e.ad - sp * e.aq, sp * e.ad + cp * e.aq);

    // Terminal point between L'' and the transformer on the merged branch.
    const double Lpp = p.subtransient_inductance();
    const double Ls = Lpp + L_T;
    const double vD = (L_T * (q.emf_global[1] - p.r_s * i_glob[1]) + Lpp * v_node[1]) / Ls;
    const double vQ = (L_T * (q.emf_global[2] - p.r_s * i_glob[2]) + Lpp * v_node[2]) / Ls;
    q.v_t = std::hypot(vD, vQ);
    out.deriv.efd = (c.exciter.gain * (c.exciter.v_ref - q.v_t) - s.efd) / c.exciter.time_constant;
    return out;
}

}  // namespace

std::array<MachineQuantities, 2> EmtSystem::machine_quantities(std::span<const double> x) const {
    if (x.size() != layout_->size()) throw ShapeError("state does not match the EMT layout");
    const auto net = x.subspan(kMachineBlock);
    const GeneratorState s1 = machine_state(x, 0), s2 = machine_state(x, 1);
    const auto m1 = eval_machine(s1, 0.0, slot(net, kI1), slot(net, kV3), params_.generators[0],
                                 params_.controls[0], params_.network.L_T1);
    const auto m2 = eval_machine(s2, s2.delta - s1.delta, slot(net, kI2), slot(net, kV4),
                                 params_.generators[1], params_.controls[1], params_.network.L_T2);
    return {m1.q, m2.q};
}

void EmtSystem::evaluate(std::span<const double> x, double, std::span<double> dxdt) const {
    const auto net = x.subspan(kMachineBlock);
    const GeneratorState s1 = machine_state(x, 0), s2 = machine_state(x, 1);
    const auto m1 = eval_machine(s1, 0.0, slot(net, kI1), slot(net, kV3), params_.generators[0],
                                 params_.controls[0], params_.network.L_T1);
    const auto m2 = eval_machine(s2, s2.delta - s1.delta, slot(net, kI2), slot(net, kV4),
                                 params_.generators[1], params_.controls[1], params_.network.L_T2);
    store(m1.deriv, dxdt, 0);
    store(m2.deriv, dxdt, GeneratorState::size);
    const double omega_r = params_.generators[0].omega0 + s1.dw;
    network_derivatives(net_, topology_ == Topology::pre_trip, net, m1.q.emf_global,
                        m2.q.emf_global, omega_r, dxdt.subspan(kMachineBlock));
}

PowerBalance EmtSystem::power_balance(std::span<const double> x) const {
    const auto mq = machine_quantities(x);
    const auto net = x.subspan(kMachineBlock);
    auto sq = [](const Vec3& v) { return v[1] * v[1] + v[2] * v[2]; };
    auto dot = [](const Vec3& a, const Vec3& b) { return a[1] * b[1] + a[2] * b[2]; };
    PowerBalance pb;
    for (int k = 0; k < 2; ++k) pb.generation += mq[k].speed_pu * mq[k].torque;
    pb.emf_power = dot(mq[0].emf_global, slot(net, kI1)) + dot(mq[1].emf_global, slot(net, kI2));
    pb.losses = net_.gen1.R * sq(slot(net, kI1)) + net_.gen2.R * sq(slot(net, kI2)) +
                net_.load2.R * sq(slot(net, kI4)) + net_.line.R * sq(slot(net, kI7));
    if (topology_ == Topology::pre_trip) pb.losses += net_.load1.R * sq(slot(net, kIL1));
    return pb;
}

std::string EmtSystem::description() const {
    std::ostringstream s;
    s << "two-machine EMT system (" << to_string(topology_) << ", " << layout_->size() << " states)";
    return s.str();
}

StateVector EmtSystem::apply_event(std::string_view event_id, const StateVector& x, double) {
    if (event_id != kTripEvent) {
        throw ConfigurationError("unknown EMT event '" + std::string(event_id) + "'");
    }
    if (topology_ == Topology::post_trip) throw ConfigurationError("load 1 is already tripped");
    topology_ = Topology::post_trip;
    layout_ = emt_layout(topology_);
    StateVector out(layout_);
    for (std::size_t i = 0; i < layout_->size(); ++i) out[i] = x.at(layout_->name(i));
    return out;
}

std::unique_ptr<OdeSystem> EmtSystem::clone() const { return std::make_unique<EmtSystem>(*this); }

std::unique_ptr<EmtSystem> assemble_emt_system(const EmtParams& params, Topology topology) {
    return std::make_unique<EmtSystem>(params, topology);
}

}  // namespace hmmsim::emt
