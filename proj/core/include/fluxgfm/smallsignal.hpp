#pragma once

#include <array>
#include <string>
#include <vector>

#include "fluxgfm/controller.hpp"
#include "fluxgfm/numerics.hpp"
#include "fluxgfm/plant.hpp"
#include "fluxgfm/tuning.hpp"

namespace fluxgfm {

// ---------------------------------------------------------------------------
// Closed-loop nonlinear model in the controller dq frame
// ---------------------------------------------------------------------------

/// State ordering of the 7-state closed loop; omega_c and u_c are eliminated
/// as algebraic functions of the state.
inline constexpr std::array<const char*, 7> kClosedLoopLabels = {
    "i_d", "i_q", "delta", "psi_hat_d", "psi_hat_q", "gamma_d", "gamma_q"};

using ClosedLoopState = StateVec<7>;

ClosedLoopState pack_state(Vec2 i, double delta, Vec2 psi_hat, Vec2 gamma);

struct UnpackedState {
    Vec2 i{};
    double delta = 0.0;
    Vec2 psi_hat{};
    Vec2 gamma{};
};

UnpackedState unpack_state(const ClosedLoopState& x);

/// Autonomous dq-frame closed-loop vector field for constant grid frequency.
/// `plant` is the actual circuit; `nominal` is the model the controller
/// believes in (its L_pu is the design inductance).
ClosedLoopState closed_loop_field(const ControllerGains& g, const Setpoints& sp,
                                  const PlantParams& plant, const PlantParams& nominal,
                                  double omega_g, const ClosedLoopState& x);

// ---------------------------------------------------------------------------
// Equilibrium
// ---------------------------------------------------------------------------

/// Steady operating point of the closed loop. For mismatched parameters the
/// innovation e settles to a constant that is annihilated by k_i; gamma then
/// drifts along the unobservable integrator direction without moving any
/// output, so steadiness is measured on the observable quotient
/// [i, delta, psi_hat, k_i gamma].
struct Equilibrium {
    Vec2 i{};
    double delta = 0.0;
    Vec2 psi_hat{};
    Vec2 gamma{};

    Vec2 e{};
    double omega_c = 0.0;
    Vec2 u_c{};
    Vec2 u_g{};
    double p = 0.0;
    double V = 0.0;
    double residual = 0.0;  ///< dimensionless quotient-field residual

    ClosedLoopState state() const { return pack_state(i, delta, psi_hat, gamma); }
};

/// Finds the operating point by damped Newton iteration on the quotient
/// field, seeded from the design targets, with a simulate-then-polish
/// fallback. Throws NoEquilibrium if neither route converges.
Equilibrium find_equilibrium(const ControllerGains& g, const Setpoints& sp,
                             const PlantParams& plant, const PlantParams& nominal,
                             double omega_g);

// ---------------------------------------------------------------------------
// Linearization
// ---------------------------------------------------------------------------

/// Linearized closed loop: A is the exact analytic Jacobian of
/// closed_loop_field at the stored equilibrium, in rad/s scale.
struct ClosedLoopModel {
    SmallMatrix A;
    std::array<const char*, 7> labels = kClosedLoopLabels;
    Equilibrium equilibrium;
    double L_pu = 0.0;    ///< actual plant inductance the model was built at
    double omega_g = 0.0;
};

ClosedLoopModel closed_loop_matrix(const ControllerGains& g, const Setpoints& sp,
                                   const PlantParams& plant, const PlantParams& nominal,
                                   double omega_g);

/// Central-difference Jacobian with per-state step 1e-6 * max(1, |x0_j|).
/// Kept as the independent oracle for the analytic matrix.
template <std::size_t N, typename F>
SmallMatrix numeric_jacobian(F&& f, const StateVec<N>& x0) {
    SmallMatrix j(static_cast<int>(N));
    for (std::size_t k = 0; k < N; ++k) {
        const double h = 1e-6 * std::max(1.0, std::abs(x0[k]));
        StateVec<N> xp = x0;
        StateVec<N> xm = x0;
        xp[k] += h;
        xm[k] -= h;
        const StateVec<N> fp = f(xp);
        const StateVec<N> fm = f(xm);
        for (std::size_t r = 0; r < N; ++r)
            j(static_cast<int>(r), static_cast<int>(k)) = (fp[r] - fm[r]) / (2.0 * h);
    }
    return j;
}

/// Max elementwise deviation between the analytic A and the numeric Jacobian
/// of the same field at the model's equilibrium.
double jacobian_deviation(const ClosedLoopModel& model, const ControllerGains& g,
                          const Setpoints& sp, const PlantParams& plant,
                          const PlantParams& nominal);

// ---------------------------------------------------------------------------
// Synchronization transfer coefficients
// ---------------------------------------------------------------------------

/// Coefficients of the synchronization characteristic polynomial
/// D1(s) = s^2 - a1 s - a2, with a1 = k_p J psi_g* and a2 = -omega0 k_p psi_g*.
struct SyncCoeffs {
    double a1 = 0.0;  ///< rad/s
    double a2 = 0.0;  ///< (rad/s)^2
};

SyncCoeffs sync_tf_coeffs(Vec2 k_p, const Setpoints& sp, double omega0);

// ---------------------------------------------------------------------------
// Design-point error model
// ---------------------------------------------------------------------------

/// Small-signal model in error coordinates
/// [psi~ (2), theta~ (1), omega~ (1), psi_hat (2), nu (1)], assembled
/// analytically at the design operating point (valid for L = L0 and
/// omega_g = omega0). The gain identities make it block lower-triangular:
/// the flux-error block carries sigma_o, the (theta~, omega~) block carries
/// the roots of D1, the psi_hat block carries sigma_v, and nu is the
/// unobservable integrator direction at eigenvalue zero. The cancellations
/// are computed in their factored forms, so the decoupling entries are
/// exact zeros rather than roundoff leftovers.
struct DesignPointErrorModel {
    SmallMatrix A;
    Mat2 flux_block{};       ///< -(omega0 J + K_o)
    Vec2 flux_to_angle{};    ///< psi~ rows, theta~ column: -k_o (psi_g*^T J psi_g*)
    Vec2 omega_from_flux{};  ///< omega~ row, psi~ columns: k_i - k_p(omega0 J + K_o)
    SyncCoeffs sync{};
    Mat2 voltage_block{};    ///< -(omega0 J + k_v w)
};

DesignPointErrorModel design_point_error_model(const ControllerGains& g,
                                               const Setpoints& sp);

// ---------------------------------------------------------------------------
// Pole sweep over grid strength
// ---------------------------------------------------------------------------

struct SweepSample {
    double L_pu = 0.0;
    Spectrum spectrum;
    bool ok = false;
    std::string error;
};

/// One spectrum per inductance sample; failed samples are recorded and the
/// sweep continues. Samples are independent and may be computed in parallel
/// (capped by the FLUXGFM_THREADS environment variable); output order is
/// deterministic either way.
struct PoleSweepResult {
    std::vector<SweepSample> samples;
};

PoleSweepResult pole_sweep(const ControllerGains& g, const Setpoints& sp,
                           const PlantParams& plant_template, const PlantParams& nominal,
                           const std::vector<double>& L_values);

/// Index of the structural zero mode in a sorted spectrum, -1 if absent.
int structural_zero_index(const Spectrum& s, double zero_tol);

/// Largest real part among eigenvalues excluding the structural zero mode.
Complex dominant_pole(const Spectrum& s, double zero_tol);

}  // namespace fluxgfm
