#include "hmmsim/emt/machine.hpp"

#include <cmath>

namespace hmmsim::emt {

double GeneratorParams::subtransient_d() const { return 1.0 / (1.0 / L_ad + 1.0 / L_fd + 1.0 / L_1d); }

double GeneratorParams::subtransient_q() const { return 1.0 / (1.0 / L_aq + 1.0 / L_1q + 1.0 / L_2q); }

namespace {

void check_positive(std::vector<std::string>& issues, const std::string& name, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) issues.push_back(name + " must be positive");
}

void check_nonnegative(std::vector<std::string>& issues, const std::string& name, double v) {
    if (!(v >= 0.0) || !std::isfinite(v)) issues.push_back(name + " must be non-negative");
}

}  // namespace

std::vector<std::string> GeneratorParams::validate(const std::string& prefix) const {
    std::vector<std::string> issues;
    check_positive(issues, prefix + ".H", H);
    check_nonnegative(issues, prefix + ".D", D);
    check_positive(issues, prefix + ".omega0", omega0);
    check_nonnegative(issues, prefix + ".r_s", r_s);
    check_nonnegative(issues, prefix + ".r_fd", r_fd);
    check_nonnegative(issues, prefix + ".r_1d", r_1d);
    check_nonnegative(issues, prefix + ".r_1q", r_1q);
    check_nonnegative(issues, prefix + ".r_2q", r_2q);
    check_positive(issues, prefix + ".L_l", L_l);
    check_positive(issues, prefix + ".L_ad", L_ad);
    check_positive(issues, prefix + ".L_aq", L_aq);
    check_positive(issues, prefix + ".L_fd", L_fd);
    check_positive(issues, prefix + ".L_1d", L_1d);
    check_positive(issues, prefix + ".L_1q", L_1q);
    check_positive(issues, prefix + ".L_2q", L_2q);
    if (issues.empty()) {
        // The merged series branch needs equal subtransient inductances on both axes.
        const double d = subtransient_d(), q = subtransient_q();
        if (std::abs(d - q) > 1e-9 * std::max(d, q)) {
            issues.push_back(prefix + ".L_1q/" + prefix + ".L_2q: subtransient inductances differ "
                             "between axes (L''_ad != L''_aq)");
        }
    }
    return issues;
}

std::vector<std::string> ControlParams::validate(const std::string& prefix) const {
    std::vector<std::string> issues;
    check_nonnegative(issues, prefix + ".governor.gain", governor.gain);
    check_positive(issues, prefix + ".governor.time_constant", governor.time_constant);
    if (!std::isfinite(governor.p_ref)) issues.push_back(prefix + ".governor.p_ref must be finite");
    check_nonnegative(issues, prefix + ".exciter.gain", exciter.gain);
    check_positive(issues, prefix + ".exciter.time_constant", exciter.time_constant);
    if (!std::isfinite(exciter.v_ref)) issues.push_back(prefix + ".exciter.v_ref must be finite");
    return issues;
}

MutualFlux mutual_flux(const GeneratorState& s, double i_d, double i_q, const GeneratorParams& p) {
    return MutualFlux{p.subtransient_d() * (-i_d + s.psi_fd / p.L_fd + s.psi_1d / p.L_1d),
                      p.subtransient_q() * (-i_q + s.psi_1q / p.L_1q + s.psi_2q / p.L_2q)};
}

double electrical_torque(const MutualFlux& m, double i_d, double i_q) { return m.ad * i_q - m.aq * i_d; }

MutualFlux subtransient_flux(const GeneratorState& s, const GeneratorParams& p) {
    return MutualFlux{p.subtransient_d() * (s.psi_fd / p.L_fd + s.psi_1d / p.L_1d),
                      p.subtransient_q() * (s.psi_1q / p.L_1q + s.psi_2q / p.L_2q)};
}

GeneratorState generator_derivatives(const GeneratorState& s, double i_d, double i_q, double v_t,
                                     const GeneratorParams& p, const ControlParams& c) {
    const double wb = p.omega0;
    const MutualFlux m = mutual_flux(s, i_d, i_q, p);
    const double e_fd = p.r_fd * s.efd / p.L_ad;
    GeneratorState d;
    d.delta = s.dw;
    d.dw = p.omega0 / (2.0 * p.H) * (s.pm - electrical_torque(m, i_d, i_q) - p.D * s.dw / p.omega0);
    d.psi_fd = wb * (e_fd - p.r_fd * (s.psi_fd - m.ad) / p.L_fd);
    d.psi_1d = -wb * p.r_1d * (s.psi_1d - m.ad) / p.L_1d;
    d.psi_1q = -wb * p.r_1q * (s.psi_1q - m.aq) / p.L_1q;
    d.psi_2q = -wb * p.r_2q * (s.psi_2q - m.aq) / p.L_2q;
    d.pm = (c.governor.p_ref - c.governor.gain * s.dw / p.omega0 - s.pm) / c.governor.time_constant;
    d.efd = (c.exciter.gain * (c.exciter.v_ref - v_t) - s.efd) / c.exciter.time_constant;
    return d;
}

MutualFlux subtransient_emf(const GeneratorState& s, const GeneratorState& ds,
                            const GeneratorParams& p) {
    const double wb = p.omega0;
    const double w_pu = 1.0 + s.dw / p.omega0;
    const MutualFlux psi = subtransient_flux(s, p);
    const double dpsi_d = p.subtransient_d() * (ds.psi_fd / p.L_fd + ds.psi_1d / p.L_1d);
    const double dpsi_q = p.subtransient_q() * (ds.psi_1q / p.L_1q + ds.psi_2q / p.L_2q);
    return MutualFlux{dpsi_d / wb - w_pu * psi.aq, dpsi_q / wb + w_pu * psi.ad};
}

}  // namespace hmmsim::emt
