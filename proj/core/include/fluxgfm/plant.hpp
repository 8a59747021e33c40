#pragma once

#include <cmath>
#include <numbers>

#include "fluxgfm/numerics.hpp"

namespace fluxgfm {

/// Converter-grid circuit parameters in the amplitude-normalized per-unit
/// convention: electrical quantities are per-unit amplitudes, time is in
/// seconds, frequencies and pole locations in rad/s. The inductance entering
/// the current ODE is L_sec = L_pu / omega_base seconds.
struct PlantParams {
    double L_pu = 0.5;         ///< total impedance (filter + grid), pu
    double omega_base = 2.0 * std::numbers::pi * 50.0;  ///< rad/s
    double U_g = 1.0;          ///< grid voltage amplitude, pu

    // rated base quantities; per-unit power is u^T i because the 3/2 factor
    // is absorbed into the amplitude power base kappa*U_base*I_base
    double S_base = 20e3;                          ///< VA
    double U_base = std::sqrt(2.0 / 3.0) * 380.0;  ///< V, amplitude
    double I_base = std::sqrt(2.0) * 30.0;         ///< A, amplitude
    double kappa = 1.5;

    double L_sec() const { return L_pu / omega_base; }
};

/// Grid-side source: phase and angular frequency of the stiff voltage.
struct GridState {
    double theta_g = 0.0;  ///< rad
    double omega_g = 2.0 * std::numbers::pi * 50.0;  ///< rad/s
};

/// Stationary-frame plant state. The same type carries its time derivative.
struct PlantState {
    Vec2 i_s{};            ///< converter current, stationary frame, pu
    double theta_g = 0.0;  ///< grid voltage angle, rad

    PlantState operator+(const PlantState& o) const {
        return {i_s + o.i_s, theta_g + o.theta_g};
    }
    PlantState operator*(double s) const { return {i_s * s, theta_g * s}; }
};

inline PlantState operator*(double s, const PlantState& x) { return x * s; }

inline bool all_finite(const PlantState& x) {
    return all_finite(x.i_s) && std::isfinite(x.theta_g);
}

/// Grid voltage in the stationary frame at angle theta_g.
Vec2 grid_voltage_s(double theta_g, const PlantParams& p);

/// Stationary-frame current dynamics driven by the converter voltage:
/// d(i_s)/dt = (u_c_s - u_g_s) / L_sec, d(theta_g)/dt = omega_g.
PlantState plant_derivative(const PlantState& x, Vec2 u_c_s, const GridState& grid,
                            const PlantParams& p);

/// Stationary -> controller frame (rotation by -theta_c).
inline Vec2 to_controller_frame(Vec2 v_s, double theta_c) { return rot(-theta_c) * v_s; }

/// Controller -> stationary frame.
inline Vec2 from_controller_frame(Vec2 v, double theta_c) { return rot(theta_c) * v; }

/// Per-unit active power u_g^T i; frame invariant, both vectors in one frame.
inline double active_power(Vec2 u_g, Vec2 i) { return dot(u_g, i); }

/// PCC voltage magnitude ||u_c||.
inline double pcc_voltage_mag(Vec2 u_c) { return norm(u_c); }

/// Virtual flux psi = L_sec i + (omega_g J)^{-1} u_g, in pu*s.
/// Throws ZeroFrequency when |omega_g| < 1e-6 * omega_base.
Vec2 virtual_flux(Vec2 i, Vec2 u_g, double omega_g, const PlantParams& p);

}  // namespace fluxgfm
