#include "fluxgfm/plant.hpp"

namespace fluxgfm {

Vec2 grid_voltage_s(double theta_g, const PlantParams& p) {
    return rot(theta_g) * Vec2{p.U_g, 0.0};
}

PlantState plant_derivative(const PlantState& x, Vec2 u_c_s, const GridState& grid,
                            const PlantParams& p) {
    const Vec2 u_g_s = grid_voltage_s(x.theta_g, p);
    return {(u_c_s - u_g_s) / p.L_sec(), grid.omega_g};
}

Vec2 virtual_flux(Vec2 i, Vec2 u_g, double omega_g, const PlantParams& p) {
    if (std::abs(omega_g) < 1e-6 * p.omega_base)
        throw ZeroFrequency("virtual_flux: grid frequency too close to zero");
    return p.L_sec() * i + (-1.0 / omega_g) * jmul(u_g);
}

}  // namespace fluxgfm
