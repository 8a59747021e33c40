#include "fluxgfm/smallsignal.hpp"

#include <algorithm>
#include <limits>
#include <atomic>
#include <cstdlib>
#include <thread>

namespace fluxgfm {

ClosedLoopState pack_state(Vec2 i, double delta, Vec2 psi_hat, Vec2 gamma) {
    ClosedLoopState x;
    x[0] = i.d;
    x[1] = i.q;
    x[2] = delta;
    x[3] = psi_hat.d;
    x[4] = psi_hat.q;
    x[5] = gamma.d;
    x[6] = gamma.q;
    return x;
}

UnpackedState unpack_state(const ClosedLoopState& x) {
    return {{x[0], x[1]}, x[2], {x[3], x[4]}, {x[5], x[6]}};
}

ClosedLoopState closed_loop_field(const ControllerGains& g, const Setpoints& sp,
                                  const PlantParams& plant, const PlantParams& nominal,
                                  double omega_g, const ClosedLoopState& x) {
    const UnpackedState s = unpack_state(x);
    const Vec2 e = observer_error(s.i, s.psi_hat, nominal, sp);
    const double wc = estimate_frequency(s.gamma, e, g);
    const Vec2 u_c = voltage_command(s.psi_hat, wc, g, sp);
    const Vec2 u_g = rot(-s.delta) * Vec2{plant.U_g, 0.0};
    const Vec2 di = -wc * jmul(s.i) + (u_c - u_g) / plant.L_sec();
    const Vec2 dpsih = -wc * jmul(s.psi_hat) + u_c + g.K_o * e;
    return pack_state(di, wc - omega_g, dpsih, e);
}

// ---------------------------------------------------------------------------
// Equilibrium solve
// ---------------------------------------------------------------------------

namespace {

// Unknowns of the quotient problem: [i_d, i_q, delta, psih_d, psih_q, mu]
// with mu = k_i gamma; the unobservable gamma direction carries no dynamics.
using QuotientVec = StateVec<6>;

struct QuotientContext {
    const ControllerGains& g;
    const Setpoints& sp;
    const PlantParams& plant;
    const PlantParams& nominal;
    double omega_g;
    double ki2;      // ||k_i||^2
    double flux0;    // flux magnitude scale V*/omega0
    // residual weights making the components dimensionless
    double wi, wdelta, wpsih, wmu;

    QuotientContext(const ControllerGains& g_, const Setpoints& sp_,
                    const PlantParams& plant_, const PlantParams& nominal_, double wg)
        : g(g_), sp(sp_), plant(plant_), nominal(nominal_), omega_g(wg) {
        ki2 = dot(g.k_i, g.k_i);
        flux0 = std::max(1e-9, sp.V_star / g.omega0);
        wi = 1.0 / g.omega0;
        wdelta = 1.0 / g.omega0;
        wpsih = 1.0 / std::max(1e-12, g.omega0 * flux0);
        wmu = 1.0 / std::max(1e-12, std::sqrt(std::max(ki2, 1e-24)) * flux0);
    }

    Vec2 gamma_of(double mu) const { return ki2 > 0.0 ? (mu / ki2) * g.k_i : Vec2{}; }

    ClosedLoopState full_state(const QuotientVec& z) const {
        return pack_state({z[0], z[1]}, z[2], {z[3], z[4]}, gamma_of(z[5]));
    }

    QuotientVec residual(const QuotientVec& z) const {
        QuotientVec r;
        try {
            const ClosedLoopState f =
                closed_loop_field(g, sp, plant, nominal, omega_g, full_state(z));
            r[0] = f[0];
            r[1] = f[1];
            r[2] = f[2];
            r[3] = f[3];
            r[4] = f[4];
            r[5] = g.k_i.d * f[5] + g.k_i.q * f[6];
        } catch (const std::exception&) {
            // non-finite trial state: report an unusable residual so the
            // line search backs off
            for (int k = 0; k < 6; ++k)
                r[static_cast<std::size_t>(k)] = std::numeric_limits<double>::infinity();
        }
        return r;
    }

    double weighted_norm(const QuotientVec& r) const {
        double m = 0.0;
        m = std::max(m, std::abs(r[0]) * wi);
        m = std::max(m, std::abs(r[1]) * wi);
        m = std::max(m, std::abs(r[2]) * wdelta);
        m = std::max(m, std::abs(r[3]) * wpsih);
        m = std::max(m, std::abs(r[4]) * wpsih);
        m = std::max(m, std::abs(r[5]) * wmu);
        return m;
    }
};

// Gaussian elimination with partial pivoting; returns false when singular.
bool solve_dense(int n, std::vector<double>& a, std::vector<double>& b) {
    for (int k = 0; k < n; ++k) {
        int piv = k;
        double best = std::abs(a[static_cast<std::size_t>(k) * n + k]);
        for (int i = k + 1; i < n; ++i) {
            const double v = std::abs(a[static_cast<std::size_t>(i) * n + k]);
            if (v > best) {
                best = v;
                piv = i;
            }
        }
        if (best == 0.0) return false;
        if (piv != k) {
            for (int j = 0; j < n; ++j)
                std::swap(a[static_cast<std::size_t>(piv) * n + j],
                          a[static_cast<std::size_t>(k) * n + j]);
            std::swap(b[piv], b[k]);
        }
        const double d = a[static_cast<std::size_t>(k) * n + k];
        for (int i = k + 1; i < n; ++i) {
            const double f = a[static_cast<std::size_t>(i) * n + k] / d;
            if (f == 0.0) continue;
            for (int j = k; j < n; ++j)
                a[static_cast<std::size_t>(i) * n + j] -= f * a[static_cast<std::size_t>(k) * n + j];
            b[i] -= f * b[k];
        }
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int j = i + 1; j < n; ++j) s -= a[static_cast<std::size_t>(i) * n + j] * b[j];
        b[i] = s / a[static_cast<std::size_t>(i) * n + i];
    }
    return true;
}

bool newton_descend(const QuotientContext& ctx, QuotientVec& z, int max_iters, double tol) {
    const std::array<double, 6> typ = {1.0, 1.0, 1.0, ctx.flux0, ctx.flux0, ctx.g.omega0};
    for (int it = 0; it < max_iters; ++it) {
        const QuotientVec f = ctx.residual(z);
        const double r0 = ctx.weighted_norm(f);
        if (r0 < tol) return true;

        // finite-difference Jacobian of the residual
        std::vector<double> jac(36);
        for (int c = 0; c < 6; ++c) {
            const double h = 1e-7 * std::max(std::abs(z[static_cast<std::size_t>(c)]),
                                             typ[static_cast<std::size_t>(c)]);
            QuotientVec zp = z, zm = z;
            zp[static_cast<std::size_t>(c)] += h;
            zm[static_cast<std::size_t>(c)] -= h;
            const QuotientVec fp = ctx.residual(zp);
            const QuotientVec fm = ctx.residual(zm);
            for (int r = 0; r < 6; ++r)
                jac[static_cast<std::size_t>(r) * 6 + c] =
                    (fp[static_cast<std::size_t>(r)] - fm[static_cast<std::size_t>(r)]) /
                    (2.0 * h);
        }
        std::vector<double> rhs(6);
        for (int r = 0; r < 6; ++r) rhs[static_cast<std::size_t>(r)] = -f[static_cast<std::size_t>(r)];
        if (!solve_dense(6, jac, rhs)) return false;

        // backtracking line search on the weighted residual norm
        double lambda = 1.0;
        bool improved = false;
        while (lambda > 1e-6) {
            QuotientVec trial = z;
            for (int c = 0; c < 6; ++c)
                trial[static_cast<std::size_t>(c)] += lambda * rhs[static_cast<std::size_t>(c)];
            if (ctx.weighted_norm(ctx.residual(trial)) < r0) {
                z = trial;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!improved) return ctx.weighted_norm(ctx.residual(z)) < tol;
    }
    return ctx.weighted_norm(ctx.residual(z)) < tol;
}

QuotientVec design_seed(const QuotientContext& ctx) {
    const Vec2 i_seed = (ctx.sp.psi_star - ctx.sp.psi_g_star) / ctx.nominal.L_sec();
    QuotientVec z;
    z[0] = i_seed.d;
    z[1] = i_seed.q;
    z[2] = ctx.sp.delta_star;
    z[3] = ctx.sp.psi_star.d;
    z[4] = ctx.sp.psi_star.q;
    z[5] = ctx.omega_g;
    return z;
}

Equilibrium assemble(const QuotientContext& ctx, const QuotientVec& z) {
    Equilibrium eq;
    eq.i = {z[0], z[1]};
    eq.delta = z[2];
    eq.psi_hat = {z[3], z[4]};
    eq.gamma = ctx.gamma_of(z[5]);
    eq.e = observer_error(eq.i, eq.psi_hat, ctx.nominal, ctx.sp);
    eq.omega_c = estimate_frequency(eq.gamma, eq.e, ctx.g);
    eq.u_c = voltage_command(eq.psi_hat, eq.omega_c, ctx.g, ctx.sp);
    eq.u_g = rot(-eq.delta) * Vec2{ctx.plant.U_g, 0.0};
    eq.p = active_power(eq.u_g, eq.i);
    eq.V = pcc_voltage_mag(eq.u_c);
    eq.residual = ctx.weighted_norm(ctx.residual(z));
    return eq;
}

}  // namespace

Equilibrium find_equilibrium(const ControllerGains& g, const Setpoints& sp,
                             const PlantParams& plant, const PlantParams& nominal,
                             double omega_g) {
    const QuotientContext ctx(g, sp, plant, nominal, omega_g);
    constexpr double kNewtonTol = 1e-11;
    constexpr double kFallbackTol = 1e-8;

    QuotientVec z = design_seed(ctx);
    if (newton_descend(ctx, z, 60, kNewtonTol)) return assemble(ctx, z);

    // Fallback: ride the nonlinear system toward its attractor, then polish.
    ClosedLoopState x = ctx.full_state(design_seed(ctx));
    const double h = 1e-5;
    const int steps = static_cast<int>(2.0 / h);
    try {
        for (int k = 0; k < steps; ++k) {
            x = rk4_step(
                [&](double, const ClosedLoopState& s) {
                    return closed_loop_field(g, sp, plant, nominal, omega_g, s);
                },
                x, k * h, h);
        }
    } catch (const NonFiniteState&) {
        throw NoEquilibrium("find_equilibrium: trajectory diverged during fallback");
    } catch (const std::invalid_argument&) {
        throw NoEquilibrium("find_equilibrium: trajectory diverged during fallback");
    }
    const UnpackedState s = unpack_state(x);
    z[0] = s.i.d;
    z[1] = s.i.q;
    z[2] = s.delta;
    z[3] = s.psi_hat.d;
    z[4] = s.psi_hat.q;
    z[5] = dot(g.k_i, s.gamma);
    newton_descend(ctx, z, 60, kNewtonTol);
    if (ctx.weighted_norm(ctx.residual(z)) < kFallbackTol) return assemble(ctx, z);
    throw NoEquilibrium("find_equilibrium: residual did not settle below 1e-8");
}

// ---------------------------------------------------------------------------
// Analytic linearization
// ---------------------------------------------------------------------------

ClosedLoopModel closed_loop_matrix(const ControllerGains& g, const Setpoints& sp,
                                   const PlantParams& plant, const PlantParams& nominal,
                                   double omega_g) {
    ClosedLoopModel model{SmallMatrix(7), kClosedLoopLabels,
                          find_equilibrium(g, sp, plant, nominal, omega_g), plant.L_pu,
                          omega_g};
    const Equilibrium& eq = model.equilibrium;
    const double L = plant.L_sec();
    const double L0 = nominal.L_sec();
    const double n0 = norm(eq.psi_hat);
    if (n0 <= 0.0)
        throw NoEquilibrium("closed_loop_matrix: flux estimate vanishes at equilibrium");
    const Vec2 hhat = eq.psi_hat / n0;
    const Vec2 j_i0 = jmul(eq.i);
    const Vec2 j_psih0 = jmul(eq.psi_hat);
    const Vec2 j_ug0 = jmul(eq.u_g);

    // d(omega_c)/dx and d(V_hat)/dx as rows over the 7 states
    std::array<double, 7> dwc = {L0 * g.k_p.d, L0 * g.k_p.q, 0.0, -g.k_p.d,
                                 -g.k_p.q,     g.k_i.d,      g.k_i.q};
    std::array<double, 7> dvh{};
    for (int c = 0; c < 7; ++c) dvh[static_cast<std::size_t>(c)] = n0 * dwc[static_cast<std::size_t>(c)];
    dvh[3] += eq.omega_c * hhat.d;
    dvh[4] += eq.omega_c * hhat.q;

    SmallMatrix& A = model.A;
    for (int c = 0; c < 7; ++c) {
        const double duc_d = -g.k_v.d * dvh[static_cast<std::size_t>(c)];
        const double duc_q = -g.k_v.q * dvh[static_cast<std::size_t>(c)];
        const double w = dwc[static_cast<std::size_t>(c)];
        A(0, c) = -j_i0.d * w + duc_d / L;
        A(1, c) = -j_i0.q * w + duc_q / L;
        A(2, c) = w;
        A(3, c) = -j_psih0.d * w + duc_d;
        A(4, c) = -j_psih0.q * w + duc_q;
    }
    // -omega_c J acting on the current and flux-estimate columns
    A(0, 1) += eq.omega_c;
    A(1, 0) -= eq.omega_c;
    A(3, 4) += eq.omega_c;
    A(4, 3) -= eq.omega_c;
    // grid voltage depends on delta: d(u_g)/d(delta) = -J u_g
    A(0, 2) += j_ug0.d / L;
    A(1, 2) += j_ug0.q / L;
    // K_o e with de/di = L0 I, de/dpsi_hat = -I
    A(3, 0) += g.K_o.m00 * L0;
    A(3, 1) += g.K_o.m01 * L0;
    A(4, 0) += g.K_o.m10 * L0;
    A(4, 1) += g.K_o.m11 * L0;
    A(3, 3) -= g.K_o.m00;
    A(3, 4) -= g.K_o.m01;
    A(4, 3) -= g.K_o.m10;
    A(4, 4) -= g.K_o.m11;
    // gamma rows integrate e
    A(5, 0) = L0;
    A(5, 3) = -1.0;
    A(6, 1) = L0;
    A(6, 4) = -1.0;
    return model;
}

double jacobian_deviation(const ClosedLoopModel& model, const ControllerGains& g,
                          const Setpoints& sp, const PlantParams& plant,
                          const PlantParams& nominal) {
    const SmallMatrix numeric = numeric_jacobian(
        [&](const ClosedLoopState& x) {
            return closed_loop_field(g, sp, plant, nominal, model.omega_g, x);
        },
        model.equilibrium.state());
    double worst = 0.0;
    for (int r = 0; r < 7; ++r)
        for (int c = 0; c < 7; ++c)
            worst = std::max(worst, std::abs(model.A(r, c) - numeric(r, c)));
    return worst;
}

SyncCoeffs sync_tf_coeffs(Vec2 k_p, const Setpoints& sp, double omega0) {
    return {dot(k_p, jmul(sp.psi_g_star)), -omega0 * dot(k_p, sp.psi_g_star)};
}

DesignPointErrorModel design_point_error_model(const ControllerGains& g,
                                               const Setpoints& sp) {
    const double w0 = g.omega0;
    const Vec2 psi = sp.psi_g_star;
    const double p2 = dot(psi, psi);
    if (p2 <= 0.0) throw SingularFlux("design_point_error_model: psi_g* is zero");
    const Vec2 k_o = (g.K_o * psi) / p2;  // K_o psi_g* = k_o ||psi_g*||^2

    DesignPointErrorModel m{SmallMatrix(7), {}, {}, {}, {}, {}};
    m.flux_block = (-1.0) * (w0 * kJ + g.K_o);
    // K_o J psi_g* in factored form: the skew product psi^T J psi is an exact
    // zero in floating point, so the decoupling entry is exactly zero.
    m.flux_to_angle = (-dot(psi, jmul(psi))) * k_o;
    m.omega_from_flux = g.k_i - design_k_i(g.k_p, g.K_o, w0);
    m.sync = sync_tf_coeffs(g.k_p, sp, w0);

    const double nv = norm(sp.psi_star);
    if (nv <= 0.0) throw SingularFlux("design_point_error_model: psi* is zero");
    const Vec2 vhat = sp.psi_star / nv;
    m.voltage_block = (-w0) * kJ - outer(g.k_v, w0 * vhat);

    SmallMatrix& A = m.A;
    // rows 0-1: flux estimation error
    A.set_block(0, 0, m.flux_block);
    A(0, 2) = m.flux_to_angle.d;
    A(1, 2) = m.flux_to_angle.q;
    // row 2: angle error integrates the frequency error
    A(2, 3) = 1.0;
    // row 3: frequency error; the flux coupling is the exact cancellation
    A(3, 0) = m.omega_from_flux.d;
    A(3, 1) = m.omega_from_flux.q;
    A(3, 2) = dot(g.k_i, jmul(psi));
    A(3, 3) = dot(g.k_p, jmul(psi));
    // rows 4-5: flux estimate driven by the errors, voltage loop on the diagonal
    A.set_block(4, 0, g.K_o);
    const Vec2 theta_col = g.K_o * jmul(psi);
    A(4, 2) = theta_col.d;
    A(5, 2) = theta_col.q;
    const Vec2 omega_col = -jmul(sp.psi_star) - nv * g.k_v;
    A(4, 3) = omega_col.d;
    A(5, 3) = omega_col.q;
    A.set_block(4, 4, m.voltage_block);
    // row 6: unobservable integrator direction, eigenvalue zero
    const double kin = std::sqrt(dot(g.k_i, g.k_i));
    if (kin > 0.0) {
        const Vec2 gperp = Vec2{-g.k_i.q, g.k_i.d} / kin;
        A(6, 0) = gperp.d;
        A(6, 1) = gperp.q;
        A(6, 2) = dot(gperp, jmul(psi));
    }
    return m;
}

// ---------------------------------------------------------------------------
// Pole sweep
// ---------------------------------------------------------------------------

PoleSweepResult pole_sweep(const ControllerGains& g, const Setpoints& sp,
                           const PlantParams& plant_template, const PlantParams& nominal,
                           const std::vector<double>& L_values) {
    PoleSweepResult result;
    result.samples.resize(L_values.size());

    unsigned cap = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("FLUXGFM_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) cap = static_cast<unsigned>(v);
    }
    const unsigned nthreads =
        std::min<unsigned>(cap, static_cast<unsigned>(std::max<std::size_t>(1, L_values.size())));

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t k = next.fetch_add(1);
            if (k >= L_values.size()) return;
            SweepSample& s = result.samples[k];
            s.L_pu = L_values[k];
            try {
                PlantParams actual = plant_template;
                actual.L_pu = L_values[k];
                const ClosedLoopModel m =
                    closed_loop_matrix(g, sp, actual, nominal, g.omega0);
                s.spectrum = eig_small(m.A);
                s.ok = true;
            } catch (const Error& ex) {
                s.ok = false;
                s.error = ex.what();
            }
        }
    };

    std::vector<std::thread> pool;
    for (unsigned t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();
    return result;
}

int structural_zero_index(const Spectrum& s, double zero_tol) {
    int best = -1;
    double best_mag = zero_tol;
    for (std::size_t k = 0; k < s.values.size(); ++k) {
        const double mag = std::abs(s.values[k]);
        if (mag <= best_mag) {
            best_mag = mag;
            best = static_cast<int>(k);
        }
    }
    return best;
}

Complex dominant_pole(const Spectrum& s, double zero_tol) {
    const int skip = structural_zero_index(s, zero_tol);
    for (std::size_t k = 0; k < s.values.size(); ++k) {
        if (static_cast<int>(k) == skip) continue;
        return s.values[k];  // sorted by descending real part
    }
    return {0.0, 0.0};
}

}  // namespace fluxgfm
