#pragma once

// Sixth-order round-rotor synchronous machine in its own rotor dq frame,
// per-unit quantities, time in seconds. Rotor windings: field fd, dampers
// 1d, 1q, 2q. First-order governor (p_m) and exciter (e_fd).

#include <string>
#include <vector>

namespace hmmsim::emt {

struct GeneratorParams {
    double H = 5.0;        ///< inertia constant, s
    double D = 15.0;       ///< damping, p.u.
    double omega0 = 376.99111843077515;  ///< rated electrical speed, rad/s
    double r_s = 0.003;
    double r_fd = 0.0006;
    double r_1d = 0.015;
    double r_1q = 0.005;
    double r_2q = 0.015;
    double L_l = 0.15;
    double L_ad = 1.65;
    double L_aq = 1.65;
    double L_fd = 0.16;
    double L_1d = 0.18;
    double L_1q = 0.18;
    double L_2q = 0.16;

    double subtransient_d() const;  ///< L''_ad = (1/L_ad + 1/L_fd + 1/L_1d)^-1
    double subtransient_q() const;  ///< L''_aq = (1/L_aq + 1/L_1q + 1/L_2q)^-1
    /// Stator inductance behind the subtransient EMF, L_l + L''_ad.
    double subtransient_inductance() const { return L_l + subtransient_d(); }

    /// Each violated invariant, fields prefixed with `prefix`.
    std::vector<std::string> validate(const std::string& prefix) const;
};

struct GovernorParams {
    double gain = 20.0;          ///< droop gain K_g, p.u. power per p.u. speed
    double time_constant = 0.5;  ///< T_g, s
    double p_ref = 0.8;          ///< p.u.
};

struct ExciterParams {
    double gain = 20.0;          ///< K_e
    double time_constant = 0.2;  ///< T_e, s
    double v_ref = 1.1;          ///< p.u.
};

struct ControlParams {
    GovernorParams governor;
    ExciterParams exciter;

    std::vector<std::string> validate(const std::string& prefix) const;
};

/// Rotor and control states of one machine. dw is the speed deviation in rad/s.
struct GeneratorState {
    double delta = 0.0;
    double dw = 0.0;
    double psi_fd = 0.0;
    double psi_1d = 0.0;
    double psi_1q = 0.0;
    double psi_2q = 0.0;
    double pm = 0.0;
    double efd = 0.0;  ///< exciter output, p.u. of open-circuit voltage

    static constexpr std::size_t size = 8;
};

struct MutualFlux {
    double ad = 0.0;
    double aq = 0.0;
};

/// lambda_ad = L''_ad (-i_d + psi_fd/L_fd + psi_1d/L_1d); q axis likewise.
MutualFlux mutual_flux(const GeneratorState& s, double i_d, double i_q, const GeneratorParams& p);

/// Air-gap torque lambda_ad i_q - lambda_aq i_d, p.u.
double electrical_torque(const MutualFlux& m, double i_d, double i_q);

/// Subtransient flux linkages psi''_d, psi''_q from the rotor windings.
MutualFlux subtransient_flux(const GeneratorState& s, const GeneratorParams& p);

/// Derivatives of every rotor/control state given the local-frame stator
/// current and terminal voltage magnitude.
GeneratorState generator_derivatives(const GeneratorState& s, double i_d, double i_q, double v_t,
                                     const GeneratorParams& p, const ControlParams& c);

/// Subtransient internal EMF (e''_d, e''_q) in the rotor frame:
/// e'' = d psi''/dt / omega_b + j omega_pu psi''.
MutualFlux subtransient_emf(const GeneratorState& s, const GeneratorState& ds,
                            const GeneratorParams& p);

}  // namespace hmmsim::emt
