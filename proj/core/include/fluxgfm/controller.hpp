#pragma once

#include "fluxgfm/numerics.hpp"
#include "fluxgfm/plant.hpp"

namespace fluxgfm {

/// Feedback gains of the grid-forming control law. K_o is rank one by
/// construction (K_o = k_o psi_g*^T); k_p and k_i act as row vectors, k_v as
/// a column vector. omega0 is the nominal grid frequency fixed at design time.
struct ControllerGains {
    Mat2 K_o{};
    Vec2 k_p{};
    Vec2 k_i{};
    Vec2 k_v{};
    double omega0 = 2.0 * std::numbers::pi * 50.0;
};

/// Set-point constellation for one (p*, V*) operating point. Produced by
/// tuning::steady_state_targets; the vector fields satisfy
///   u_c* = [V*, 0],  u_g* = rot(-delta*) [U_g, 0],
///   psi_g* = (omega0 J)^{-1} u_g*,  psi* = (omega0 J)^{-1} u_c*.
struct Setpoints {
    double p_star = 0.0;
    double V_star = 1.0;
    double delta_star = 0.0;
    Vec2 u_c_star{};
    Vec2 u_g_star{};
    Vec2 psi_g_star{};
    Vec2 psi_star{};
};

/// Controller integrators and frame angle. The same type carries the time
/// derivative of each field. theta_c is kept unwrapped internally; wrap only
/// at output boundaries.
struct ControllerState {
    Vec2 psi_hat{};    ///< flux estimate, pu*s
    Vec2 gamma{};      ///< PI integrator, pu*s*s
    double theta_c = 0.0;

    ControllerState operator+(const ControllerState& o) const {
        return {psi_hat + o.psi_hat, gamma + o.gamma, theta_c + o.theta_c};
    }
    ControllerState operator*(double s) const {
        return {psi_hat * s, gamma * s, theta_c * s};
    }
};

inline ControllerState operator*(double s, const ControllerState& x) { return x * s; }

inline bool all_finite(const ControllerState& x) {
    return all_finite(x.psi_hat) && all_finite(x.gamma) && std::isfinite(x.theta_c);
}

/// Observer innovation e = L_sec i + psi_g* - psi_hat, with i in the
/// controller frame. `nominal` carries the inductance the controller
/// believes in (the design value), not the actual plant inductance.
Vec2 observer_error(Vec2 i_dq, Vec2 psi_hat, const PlantParams& nominal,
                    const Setpoints& sp);

/// PI frequency estimate omega_c = k_i gamma + k_p e.
double estimate_frequency(Vec2 gamma, Vec2 e, const ControllerGains& g);

/// Voltage command u_c = u_c* + k_v (V* - V_hat) with V_hat = omega_c ||psi_hat||.
Vec2 voltage_command(Vec2 psi_hat, double omega_c, const ControllerGains& g,
                     const Setpoints& sp);

/// Continuous-time controller dynamics:
///   d(psi_hat)/dt = -omega_c J psi_hat + u_c + K_o e
///   d(gamma)/dt   = e
///   d(theta_c)/dt = omega_c
ControllerState observer_derivative(const ControllerState& cs, Vec2 i_dq, Vec2 u_c,
                                    double omega_c, const ControllerGains& g,
                                    const PlantParams& nominal, const Setpoints& sp);

/// Algebraic outputs of the control law at a given state and measured current.
struct ControllerOutputs {
    Vec2 i_dq{};
    Vec2 e{};
    double omega_c = 0.0;
    double V_hat = 0.0;
    Vec2 u_c{};    ///< controller frame
    Vec2 u_c_s{};  ///< stationary frame
};

ControllerOutputs controller_outputs(const ControllerState& cs, Vec2 i_s,
                                     const ControllerGains& g, const PlantParams& nominal,
                                     const Setpoints& sp);

/// Forward-Euler advance of the controller states from precomputed outputs.
ControllerState advance_euler(const ControllerState& cs, const ControllerOutputs& out,
                              double dt, const ControllerGains& g);

/// One sampled-mode update: measure, evaluate the law, advance the states by
/// forward Euler over dt, and return the stationary-frame voltage command to
/// hold until the next call.
struct ControllerStepResult {
    ControllerState next;
    Vec2 u_c_s{};
};

ControllerStepResult controller_step(const ControllerState& cs, Vec2 i_s, double dt,
                                     const ControllerGains& g, const PlantParams& nominal,
                                     const Setpoints& sp);

/// Start-up state: frame aligned with delta*, flux estimate at psi_g*, and
/// gamma pre-biased so that k_i gamma = omega0 at t = 0.
ControllerState initial_state(const ControllerGains& g, const Setpoints& sp);

/// Carries the integrator across a set-point change so that omega_c is
/// continuous: the reference step enters the loop through the integral path
/// only, which is what keeps step responses free of proportional kick.
ControllerState rebias_for_setpoint_change(const ControllerState& cs,
                                           const ControllerGains& g,
                                           const Setpoints& old_sp,
                                           const Setpoints& new_sp);

/// Wraps an angle to (-pi, pi].
double wrap_angle(double theta);

}  // namespace fluxgfm
