#include "fluxgfm/controller.hpp"

namespace fluxgfm {

Vec2 observer_error(Vec2 i_dq, Vec2 psi_hat, const PlantParams& nominal,
                    const Setpoints& sp) {
    return nominal.L_sec() * i_dq + sp.psi_g_star - psi_hat;
}

double estimate_frequency(Vec2 gamma, Vec2 e, const ControllerGains& g) {
    return dot(g.k_i, gamma) + dot(g.k_p, e);
}

Vec2 voltage_command(Vec2 psi_hat, double omega_c, const ControllerGains& g,
                     const Setpoints& sp) {
    const double v_hat = omega_c * norm(psi_hat);
    return sp.u_c_star + g.k_v * (sp.V_star - v_hat);
}

ControllerState observer_derivative(const ControllerState& cs, Vec2 i_dq, Vec2 u_c,
                                    double omega_c, const ControllerGains& g,
                                    const PlantParams& nominal, const Setpoints& sp) {
    const Vec2 e = observer_error(i_dq, cs.psi_hat, nominal, sp);
    return {-omega_c * jmul(cs.psi_hat) + u_c + g.K_o * e, e, omega_c};
}

ControllerOutputs controller_outputs(const ControllerState& cs, Vec2 i_s,
                                     const ControllerGains& g, const PlantParams& nominal,
                                     const Setpoints& sp) {
    ControllerOutputs out;
    out.i_dq = to_controller_frame(i_s, cs.theta_c);
    out.e = observer_error(out.i_dq, cs.psi_hat, nominal, sp);
    out.omega_c = estimate_frequency(cs.gamma, out.e, g);
    out.V_hat = out.omega_c * norm(cs.psi_hat);
    out.u_c = sp.u_c_star + g.k_v * (sp.V_star - out.V_hat);
    out.u_c_s = from_controller_frame(out.u_c, cs.theta_c);
    return out;
}

ControllerState advance_euler(const ControllerState& cs, const ControllerOutputs& out,
                              double dt, const ControllerGains& g) {
    ControllerState next;
    next.psi_hat =
        cs.psi_hat + dt * (-out.omega_c * jmul(cs.psi_hat) + out.u_c + g.K_o * out.e);
    next.gamma = cs.gamma + dt * out.e;
    next.theta_c = cs.theta_c + dt * out.omega_c;
    return next;
}

ControllerStepResult controller_step(const ControllerState& cs, Vec2 i_s, double dt,
                                     const ControllerGains& g, const PlantParams& nominal,
                                     const Setpoints& sp) {
    const ControllerOutputs out = controller_outputs(cs, i_s, g, nominal, sp);
    const ControllerState next = advance_euler(cs, out, dt, g);
    if (!all_finite(next) || !all_finite(out.u_c_s))
        throw NonFiniteState("controller_step produced non-finite values");
    return {next, out.u_c_s};
}

ControllerState initial_state(const ControllerGains& g, const Setpoints& sp) {
    ControllerState cs;
    cs.psi_hat = sp.psi_g_star;
    const double ki2 = dot(g.k_i, g.k_i);
    cs.gamma = ki2 > 0.0 ? (g.omega0 / ki2) * g.k_i : Vec2{};
    cs.theta_c = sp.delta_star;
    return cs;
}

ControllerState rebias_for_setpoint_change(const ControllerState& cs,
                                           const ControllerGains& g,
                                           const Setpoints& old_sp,
                                           const Setpoints& new_sp) {
    // e jumps by (psi_g*_new - psi_g*_old); shift gamma along k_i^T so the
    // proportional path's jump cancels out of omega_c.
    const Vec2 de = new_sp.psi_g_star - old_sp.psi_g_star;
    const double ki2 = dot(g.k_i, g.k_i);
    ControllerState next = cs;
    if (ki2 > 0.0) next.gamma = cs.gamma - (dot(g.k_p, de) / ki2) * g.k_i;
    return next;
}

double wrap_angle(double theta) {
    const double two_pi = 2.0 * std::numbers::pi;
    double w = std::remainder(theta, two_pi);
    if (w <= -std::numbers::pi) w += two_pi;
    return w;
}

}  // namespace fluxgfm
