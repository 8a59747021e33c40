#include "fluxgfm/tuning.hpp"

#include <cmath>

namespace fluxgfm {

TuningSpec reference_design(double omega0) {
    TuningSpec spec;
    spec.sigma_o = PolePair::double_real(-2.5 * omega0);
    spec.sigma_v = PolePair::double_real(-omega0);
    spec.zeta = 0.9;
    spec.omega_s = 1.5 * omega0;
    spec.L0_pu = 0.5;
    spec.p_star = 1.0;
    spec.V_star = 1.0;
    spec.U_g = 1.0;
    spec.omega0 = omega0;
    return spec;
}

double load_angle_linear(const TuningSpec& spec) {
    return spec.L0_pu / (spec.U_g * spec.V_star) * spec.p_star;
}

double load_angle_setpoint(const TuningSpec& spec) {
    const double x = load_angle_linear(spec);
    if (std::abs(x) > 1.0)
        throw InfeasibleSetpoint(
            "load_angle_setpoint: power set-point exceeds the static transfer limit");
    return std::asin(x);
}

Setpoints steady_state_targets(const TuningSpec& spec, double delta_star) {
    Setpoints sp;
    sp.p_star = spec.p_star;
    sp.V_star = spec.V_star;
    sp.delta_star = delta_star;
    sp.u_c_star = {spec.V_star, 0.0};
    sp.u_g_star = rot(-delta_star) * Vec2{spec.U_g, 0.0};
    sp.psi_g_star = (-1.0 / spec.omega0) * jmul(sp.u_g_star);
    sp.psi_star = (-1.0 / spec.omega0) * jmul(sp.u_c_star);
    return sp;
}

ObserverGain design_K_o(const TuningSpec& spec, const Setpoints& sp) {
    ObserverGain g;
    g.k_o = place_rank_one(sp.psi_g_star, spec.omega0, spec.sigma_o);
    g.K_o = outer(g.k_o, sp.psi_g_star);
    return g;
}

Vec2 design_k_p(const TuningSpec& spec, const Setpoints& sp) {
    const Vec2 psi = sp.psi_g_star;
    const double det = psi.d * psi.d + psi.q * psi.q;
    if (norm(psi) < 1e-12)
        throw SingularFlux("design_k_p: flux target vector is numerically zero");
    const double c1 = 2.0 * spec.zeta * spec.omega_s;
    const double c2 = spec.omega_s * spec.omega_s / spec.omega0;
    return {(c1 * psi.q + psi.d * c2) / det, (psi.q * c2 - psi.d * c1) / det};
}

Vec2 design_k_i(Vec2 k_p, const Mat2& K_o, double omega0) {
    return premultiply(k_p, omega0 * kJ + K_o);
}

Vec2 design_k_v(const TuningSpec& spec) {
    return place_rank_one({0.0, -spec.omega0}, spec.omega0, spec.sigma_v);
}

Design full_design(const TuningSpec& spec) {
    const double delta_star = load_angle_setpoint(spec);
    Design d;
    d.setpoints = steady_state_targets(spec, delta_star);
    const ObserverGain og = design_K_o(spec, d.setpoints);
    d.gains.K_o = og.K_o;
    d.gains.k_p = design_k_p(spec, d.setpoints);
    d.gains.k_i = design_k_i(d.gains.k_p, og.K_o, spec.omega0);
    d.gains.k_v = design_k_v(spec);
    d.gains.omega0 = spec.omega0;
    return d;
}

Setpoints retarget(const TuningSpec& spec, double p_star) {
    TuningSpec s = spec;
    s.p_star = p_star;
    return steady_state_targets(s, load_angle_setpoint(s));
}

}  // namespace fluxgfm
