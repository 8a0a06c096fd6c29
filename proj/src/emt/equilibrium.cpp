#include "hmmsim/emt/equilibrium.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>

namespace hmmsim::emt {

namespace {

using cd = std::complex<double>;

constexpr std::size_t kDelta = 0, kDw = 1, kPm = 6;
constexpr std::size_t kG2 = GeneratorState::size;

struct PhasorPoint {
    std::array<GeneratorState, 2> machines;
    std::array<double, 2> v_t{};
    std::array<double, 2> torque{};
    cd I1, I2, I4, I7, IL1, V3, V4;
};

/// Steady state behind internal EMFs |E1| at angle 0 and |E2| at angle alpha2.
PhasorPoint phasor_point(const EmtParams& p, Topology topology, double alpha2, double e1, double e2) {
    const NetworkModel m = p.network_model();
    const cd j(0.0, 1.0);
    auto Z = [&](const Branch& b) { return cd(b.R, b.L); };
    const cd E1 = e1, E2 = std::polar(e2, alpha2);
    const cd y1 = 1.0 / Z(m.gen1), y2 = 1.0 / Z(m.gen2), yl = 1.0 / Z(m.line);
    const cd yL1 = topology == Topology::pre_trip ? 1.0 / Z(m.load1) : cd(0.0);
    const cd yL2 = 1.0 / Z(m.load2);
    Eigen::Matrix2cd Y;
    Y << y1 + yL1 + yl + j * m.shunt3, -yl, -yl, y2 + yL2 + yl + j * m.shunt4;
    const Eigen::Vector2cd V = Y.partialPivLu().solve(Eigen::Vector2cd(E1 * y1, E2 * y2));

    PhasorPoint pt;
    pt.V3 = V[0];
    pt.V4 = V[1];
    pt.I1 = (E1 - pt.V3) * y1;
    pt.I2 = (E2 - pt.V4) * y2;
    pt.I7 = (pt.V3 - pt.V4) * yl;
    pt.I4 = pt.V4 * yL2;
    pt.IL1 = pt.V3 * yL1;

    const std::array<cd, 2> E{E1, E2}, I{pt.I1, pt.I2}, Vn{pt.V3, pt.V4};
    const std::array<double, 2> LT{p.network.L_T1, p.network.L_T2};
    std::array<double, 2> theta{};
    for (int k = 0; k < 2; ++k) {
        const auto& g = p.generators[k];
        const double Lpp = g.subtransient_inductance();
        const cd EQ = E[k] + j * (g.L_aq - g.subtransient_q()) * I[k];
        theta[k] = std::arg(EQ) - 0.5 * std::numbers::pi;
        const cd rot = std::polar(1.0, -theta[k]);
        const cd il = I[k] * rot, el = E[k] * rot;
        const double i_d = il.real(), i_q = il.imag();
        GeneratorState s;
        const double lam_aq = -g.L_aq * i_q;
        s.psi_1q = lam_aq;
        s.psi_2q = lam_aq;
        const double lam_ad = el.imag() - g.subtransient_d() * i_d;
        s.psi_1d = lam_ad;
        s.psi_fd = g.L_fd * (el.imag() / g.subtransient_d() - lam_ad / g.L_1d);
        s.efd = g.L_ad * (s.psi_fd - lam_ad) / g.L_fd;
        pt.torque[k] = lam_ad * i_q - lam_aq * i_d;
        s.pm = pt.torque[k];
        const cd vt = (LT[k] * (E[k] - g.r_s * I[k]) + Lpp * Vn[k]) / (Lpp + LT[k]);
        pt.v_t[k] = std::abs(vt);
        pt.machines[k] = s;
    }
    pt.machines[0].delta = 0.0;
    pt.machines[1].delta = theta[1] - theta[0];
    // Network phasors into G1's rotor frame.
    const cd r1 = std::polar(1.0, -theta[0]);
    for (cd* z : {&pt.I1, &pt.I2, &pt.I4, &pt.I7, &pt.IL1, &pt.V3, &pt.V4}) *z *= r1;
    return pt;
}

Eigen::Vector3d outer_residual(const EmtParams& p, Topology topology, const Eigen::Vector3d& u) {
    const PhasorPoint pt = phasor_point(p, topology, u[0], u[1], u[2]);
    Eigen::Vector3d r;
    r[0] = pt.torque[1] - p.controls[1].governor.p_ref;
    for (int k = 0; k < 2; ++k) {
        const auto& ex = p.controls[k].exciter;
        r[1 + k] = pt.machines[k].efd - ex.gain * (ex.v_ref - pt.v_t[k]);
    }
    return r;
}

Eigen::VectorXd field_of(const EmtSystem& sys, const StateVector& x) {
    Eigen::VectorXd f(static_cast<Eigen::Index>(x.size()));
    sys.evaluate(x.values(), 0.0, std::span<double>(f.data(), x.size()));
    return f;
}

}  // namespace

StateVector equilibrium_guess(const EmtParams& params, Topology topology) {
    Eigen::Vector3d u(0.0, 1.0, 1.0);
    Eigen::Vector3d r = outer_residual(params, topology, u);
    for (int it = 0; it < 40 && r.lpNorm<Eigen::Infinity>() > 1e-13; ++it) {
        Eigen::Matrix3d J;
        for (int c = 0; c < 3; ++c) {
            Eigen::Vector3d up = u, um = u;
            up[c] += 1e-7;
            um[c] -= 1e-7;
            J.col(c) = (outer_residual(params, topology, up) - outer_residual(params, topology, um)) / 2e-7;
        }
        const Eigen::Vector3d step = J.fullPivLu().solve(-r);
        double lambda = 1.0;
        Eigen::Vector3d trial = u + step, rt = outer_residual(params, topology, trial);
        while (rt.norm() >= r.norm() && lambda > 1e-4) {
            lambda *= 0.5;
            trial = u + lambda * step;
            rt = outer_residual(params, topology, trial);
        }
        u = trial;
        r = rt;
    }
    const PhasorPoint pt = phasor_point(params, topology, u[0], u[1], u[2]);

    StateVector x(emt_layout(topology));
    for (int k = 0; k < 2; ++k) {
        const std::string g = k == 0 ? "G1_" : "G2_";
        const auto& s = pt.machines[k];
        x.at(g + "delta") = s.delta;
        x.at(g + "dw") = 0.0;
        x.at(g + "psi_fd") = s.psi_fd;
        x.at(g + "psi_1d") = s.psi_1d;
        x.at(g + "psi_1q") = s.psi_1q;
        x.at(g + "psi_2q") = s.psi_2q;
        x.at(g + "pm") = s.pm;
        x.at(g + "efd") = s.efd;
    }
    auto put = [&](const std::string& name, cd z) {
        x.at(name + "_0") = 0.0;
        x.at(name + "_D") = z.real();
        x.at(name + "_Q") = z.imag();
    };
    put("i1", pt.I1);
    put("i2", pt.I2);
    put("i4", pt.I4);
    put("i7", pt.I7);
    put("v3", pt.V3);
    put("v4", pt.V4);
    if (topology == Topology::pre_trip) put("iL1", pt.IL1);
    return x;
}

double equilibrium_residual(const EmtSystem& system, const StateVector& x) {
    const Eigen::VectorXd f = field_of(system, x);
    double r = 0.0;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
        if (i == static_cast<Eigen::Index>(kDelta) || i == static_cast<Eigen::Index>(kG2 + kDelta)) continue;
        r = std::max(r, std::abs(f[i]));
    }
    return r;
}

Equilibrium find_equilibrium(const EmtSystem& system, const StateVector& guess, FrequencyMode mode,
                             const EquilibriumOptions& options) {
    const std::size_t n = system.dimension();
    if (guess.size() != n) throw ShapeError("equilibrium guess does not match the system layout");
    if (!guess.all_finite()) throw InitializationError("equilibrium guess is not finite", NAN);

    // Unknowns: every state except delta_1 and the two speed deviations, plus
    // the slack set-point (pinned) or the common speed deviation (free).
    std::vector<std::size_t> free_states;
    for (std::size_t i = 0; i < n; ++i) {
        if (i == kDelta || i == kDw || i == kG2 + kDw) continue;
        free_states.push_back(i);
    }
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < n; ++i) {
        if (i == kDelta || i == kG2 + kDelta) continue;
        rows.push_back(i);
    }
    const auto m = static_cast<Eigen::Index>(free_states.size() + 1);

    EmtParams params = system.params();
    Eigen::VectorXd u(m);
    for (std::size_t k = 0; k < free_states.size(); ++k) u[static_cast<Eigen::Index>(k)] = guess[free_states[k]];
    if (mode == FrequencyMode::pinned) {
        u[m - 1] = guess[kPm];
    } else {
        u[m - 1] = guess[kDw];
    }

    auto unpack = [&](const Eigen::VectorXd& v, EmtParams& par) {
        StateVector x = guess;
        for (std::size_t k = 0; k < free_states.size(); ++k) x[free_states[k]] = v[static_cast<Eigen::Index>(k)];
        if (mode == FrequencyMode::pinned) {
            x[kDw] = 0.0;
            x[kG2 + kDw] = 0.0;
            par.controls[0].governor.p_ref = v[m - 1];
        } else {
            x[kDw] = v[m - 1];
            x[kG2 + kDw] = v[m - 1];
        }
        return x;
    };
    auto residual_vec = [&](const Eigen::VectorXd& v) {
        EmtParams par = params;
        const StateVector x = unpack(v, par);
        const EmtSystem sys(par, system.topology());
        const Eigen::VectorXd f = field_of(sys, x);
        Eigen::VectorXd g(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t k = 0; k < rows.size(); ++k) g[static_cast<Eigen::Index>(k)] = f[static_cast<Eigen::Index>(rows[k])];
        return g;
    };

    // A guess that already satisfies the tolerance is returned untouched.
    if (mode == FrequencyMode::pinned) {
        const double r0 = equilibrium_residual(system, guess);
        if (r0 <= options.tolerance && guess[kDw] == 0.0 && guess[kG2 + kDw] == 0.0) {
            return Equilibrium{guess, params, r0, 0, 0.0};
        }
    } else {
        const double r0 = equilibrium_residual(system, guess);
        if (r0 <= options.tolerance && guess[kDw] == guess[kG2 + kDw]) {
            return Equilibrium{guess, params, r0, 0, guess[kDw]};
        }
    }

    Eigen::VectorXd g = residual_vec(u);
    int it = 0;
    double res = g.lpNorm<Eigen::Infinity>();
    while (res > options.tolerance) {
        if (it >= options.max_iterations) {
            throw InitializationError("equilibrium Newton iteration did not converge in " +
                                          std::to_string(options.max_iterations) +
                                          " iterations (residual " + std::to_string(res) + ")",
                                      res);
        }
        ++it;
        Eigen::MatrixXd J(g.size(), m);
        for (Eigen::Index c = 0; c < m; ++c) {
            const double step = options.fd_step * std::max(1.0, std::abs(u[c]));
            Eigen::VectorXd up = u, um = u;
            up[c] += step;
            um[c] -= step;
            J.col(c) = (residual_vec(up) - residual_vec(um)) / (2.0 * step);
        }
        const Eigen::VectorXd delta = J.partialPivLu().solve(-g);
        if (!delta.allFinite()) throw InitializationError("singular equilibrium Jacobian", res);
        double lambda = 1.0;
        Eigen::VectorXd trial = u + delta;
        Eigen::VectorXd gt = residual_vec(trial);
        while (!(gt.norm() < g.norm()) && lambda > 1.0 / 1024.0) {
            lambda *= 0.5;
            trial = u + lambda * delta;
            gt = residual_vec(trial);
        }
        u = trial;
        g = gt;
        res = g.lpNorm<Eigen::Infinity>();
    }

    Equilibrium eq;
    eq.params = params;
    eq.state = unpack(u, eq.params);
    eq.iterations = it;
    eq.frequency_offset = eq.state[kDw];
    eq.residual = equilibrium_residual(EmtSystem(eq.params, system.topology()), eq.state);
    return eq;
}

}  // namespace hmmsim::emt
