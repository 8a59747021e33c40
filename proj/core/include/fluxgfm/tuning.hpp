#pragma once

#include "fluxgfm/controller.hpp"
#include "fluxgfm/numerics.hpp"

namespace fluxgfm {

/// Everything the gain design needs: target pole pairs, synchronization
/// bandwidth and damping, and the operating point the gains are computed at.
/// L0_pu is the design inductance; the controller keeps believing it even
/// when the actual grid impedance differs.
struct TuningSpec {
    PolePair sigma_o = PolePair::double_real(-2.5 * 2.0 * std::numbers::pi * 50.0);
    PolePair sigma_v = PolePair::double_real(-2.0 * std::numbers::pi * 50.0);
    double zeta = 0.9;
    double omega_s = 1.5 * 2.0 * std::numbers::pi * 50.0;  ///< rad/s
    double L0_pu = 0.5;
    double p_star = 1.0;   ///< pu
    double V_star = 1.0;   ///< pu
    double U_g = 1.0;      ///< pu
    double omega0 = 2.0 * std::numbers::pi * 50.0;  ///< rad/s, equals the pu base
};

/// The reference design: sigma_o as a double pole at -2.5 omega0, zeta = 0.9,
/// omega_s = 1.5 omega0, sigma_v as a double pole at -omega0, p* = 1 pu,
/// L0 = 0.5 pu.
TuningSpec reference_design(double omega0 = 2.0 * std::numbers::pi * 50.0);

/// Load angle for a power set-point, exact arcsine form:
/// delta* = asin(alpha_p p*), alpha_p = L0_pu / (U_g V*).
/// Throws InfeasibleSetpoint when |alpha_p p*| > 1.
double load_angle_setpoint(const TuningSpec& spec);

/// Small-angle linearization delta* ~= alpha_p p*. Exposed for reference
/// only; the design path always uses the exact form.
double load_angle_linear(const TuningSpec& spec);

/// Steady-state targets for a given load angle.
Setpoints steady_state_targets(const TuningSpec& spec, double delta_star);

/// Observer gain: k_o places eig(-omega0 J - k_o psi_g*^T) = sigma_o and
/// K_o = k_o psi_g*^T. The rank-one shape is what decouples flux estimation
/// from synchronization.
struct ObserverGain {
    Vec2 k_o{};
    Mat2 K_o{};
};

ObserverGain design_K_o(const TuningSpec& spec, const Setpoints& sp);

/// Proportional row gain: solves
///   [psi_g*_q  -psi_g*_d] [kp_d]   [2 zeta omega_s  ]
///   [psi_g*_d   psi_g*_q] [kp_q] = [omega_s^2/omega0]
/// so the synchronization polynomial becomes s^2 + 2 zeta omega_s s + omega_s^2.
/// Throws SingularFlux when ||psi_g*|| < 1e-12.
Vec2 design_k_p(const TuningSpec& spec, const Setpoints& sp);

/// Integral row gain k_i = k_p (omega0 J + K_o); this cancellation removes
/// the flux estimation error from the frequency loop.
Vec2 design_k_i(Vec2 k_p, const Mat2& K_o, double omega0);

/// Voltage gain: k_v places eig(-omega0 J - k_v w) = sigma_v with
/// w = [0, -omega0].
Vec2 design_k_v(const TuningSpec& spec);

struct Design {
    ControllerGains gains;
    Setpoints setpoints;
};

/// Runs the whole recipe once. The gains are computed at (p*, L0) and are
/// meant to stay frozen across operating points and scenarios.
Design full_design(const TuningSpec& spec);

/// Set-point constellation for a different p* under the same spec, used when
/// the power reference changes at runtime while the gains stay frozen.
Setpoints retarget(const TuningSpec& spec, double p_star);

}  // namespace fluxgfm
