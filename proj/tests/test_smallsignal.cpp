#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "fluxgfm/smallsignal.hpp"

using namespace fluxgfm;

namespace {

struct Rig {
    TuningSpec spec = reference_design();
    Design design = full_design(reference_design());
    PlantParams plant;
    PlantParams nominal;
    Rig() {
        plant.L_pu = 0.5;
        nominal = plant;
        nominal.L_pu = spec.L0_pu;
    }
    double w0() const { return spec.omega0; }
};

bool spectrum_contains(const Spectrum& s, Complex lambda, double tol) {
    for (const Complex& v : s.values)
        if (std::abs(v - lambda) <= tol) return true;
    return false;
}

}  // namespace

TEST_CASE("sync_tf_coeffs worked examples") {
    Setpoints sp;
    sp.psi_g_star = {0.0, -1.0};
    const SyncCoeffs c = sync_tf_coeffs({-2.7, -2.25}, sp, 1.0);
    CHECK(c.a1 == doctest::Approx(-2.7).epsilon(1e-15));
    CHECK(c.a2 == doctest::Approx(-2.25).epsilon(1e-15));

    const SyncCoeffs z = sync_tf_coeffs({0.0, 0.0}, sp, 1.0);
    CHECK(z.a1 == 0.0);
    CHECK(z.a2 == 0.0);

    // tuned designs satisfy (-a1, -a2) = (2 zeta omega_s, omega_s^2)
    const Rig rig;
    const SyncCoeffs t = sync_tf_coeffs(rig.design.gains.k_p, rig.design.setpoints, rig.w0());
    CHECK(-t.a1 == doctest::Approx(2.0 * 0.9 * 1.5 * rig.w0()).epsilon(1e-12));
    CHECK(-t.a2 == doctest::Approx(2.25 * rig.w0() * rig.w0()).epsilon(1e-12));
}

TEST_CASE("numeric_jacobian unit oracles") {
    // linear field recovers its matrix
    SmallMatrix m(3);
    m(0, 0) = -1.0;
    m(0, 2) = 2.0;
    m(1, 0) = 0.5;
    m(1, 1) = -3.0;
    m(2, 1) = 4.0;
    StateVec<3> x0;
    x0[0] = 0.3;
    x0[1] = -0.8;
    x0[2] = 1.7;
    const SmallMatrix j = numeric_jacobian(
        [&](const StateVec<3>& x) {
            StateVec<3> d;
            for (int r = 0; r < 3; ++r)
                d[static_cast<std::size_t>(r)] = m(r, 0) * x[0] + m(r, 1) * x[1] + m(r, 2) * x[2];
            return d;
        },
        x0);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) CHECK(std::abs(j(r, c) - m(r, c)) < 1e-9);

    // f(x) = [x2^2, x1] at [1, 1] -> [[0, 2], [1, 0]]
    StateVec<2> one;
    one[0] = 1.0;
    one[1] = 1.0;
    const SmallMatrix h = numeric_jacobian(
        [](const StateVec<2>& x) {
            StateVec<2> d;
            d[0] = x[1] * x[1];
            d[1] = x[0];
            return d;
        },
        one);
    CHECK(std::abs(h(0, 0)) < 1e-9);
    CHECK(h(0, 1) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(h(1, 0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(h(1, 1)) < 1e-9);
}

TEST_CASE("matched equilibrium equals the design targets") {
    const Rig rig;
    const Equilibrium eq =
        find_equilibrium(rig.design.gains, rig.design.setpoints, rig.plant, rig.nominal, rig.w0());
    const Setpoints& sp = rig.design.setpoints;
    CHECK(std::abs(eq.delta - sp.delta_star) < 1e-9);
    CHECK(std::abs(eq.p - sp.p_star) < 1e-9);
    CHECK(std::abs(eq.V - sp.V_star) < 1e-9);
    CHECK(norm(eq.e) < 1e-12);
    CHECK(std::abs(eq.omega_c - rig.w0()) < 1e-9);
    CHECK(eq.residual < 1e-10);
}

TEST_CASE("mismatched equilibria: strong grid raises power, weak grid lowers it") {
    const Rig rig;
    PlantParams strong = rig.plant;
    strong.L_pu = 0.1;
    const Equilibrium eq_strong = find_equilibrium(rig.design.gains, rig.design.setpoints,
                                                   strong, rig.nominal, rig.w0());
    CHECK(eq_strong.p > 1.0);
    CHECK(eq_strong.p < 1.5);
    CHECK(eq_strong.residual < 1e-8);

    PlantParams weak = rig.plant;
    weak.L_pu = 1.0;
    const Equilibrium eq_weak = find_equilibrium(rig.design.gains, rig.design.setpoints,
                                                 weak, rig.nominal, rig.w0());
    CHECK(eq_weak.p < 1.0);
    CHECK(eq_weak.p > 0.5);
    CHECK(eq_weak.residual < 1e-8);
}

TEST_CASE("off-nominal frequency shifts the power by the droop action") {
    const Rig rig;
    const Setpoints sp = retarget(rig.spec, 0.5);
    const Equilibrium eq = find_equilibrium(rig.design.gains, sp, rig.plant, rig.nominal,
                                            0.9 * rig.w0());
    CHECK(eq.p > 0.6);       // power rises when the grid slows down
    CHECK(eq.p < 0.9);
    CHECK(std::abs(eq.omega_c - 0.9 * rig.w0()) < 1e-9);
}

TEST_CASE("analytic Jacobian matches the numeric oracle at the design point") {
    const Rig rig;
    const ClosedLoopModel m = closed_loop_matrix(rig.design.gains, rig.design.setpoints,
                                                 rig.plant, rig.nominal, rig.w0());
    const double dev = jacobian_deviation(m, rig.design.gains, rig.design.setpoints,
                                          rig.plant, rig.nominal);
    CHECK(dev < 1e-6 * std::max(1.0, m.A.norm_inf()));
}

TEST_CASE("analytic Jacobian matches the numeric oracle off-design") {
    const Rig rig;
    std::mt19937 rng(71);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 8; ++trial) {
        PlantParams actual = rig.plant;
        actual.L_pu = 0.1 + 0.9 * u(rng);
        const double wg = (0.9 + 0.2 * u(rng)) * rig.w0();
        const ClosedLoopModel m = closed_loop_matrix(rig.design.gains, rig.design.setpoints,
                                                     actual, rig.nominal, wg);
        const double dev = jacobian_deviation(m, rig.design.gains, rig.design.setpoints,
                                              actual, rig.nominal);
        CHECK(dev < 1e-6 * std::max(1.0, m.A.norm_inf()));
    }
}

TEST_CASE("matched closed-loop spectrum carries the designed poles") {
    const Rig rig;
    const double w0 = rig.w0();
    const ClosedLoopModel m = closed_loop_matrix(rig.design.gains, rig.design.setpoints,
                                                 rig.plant, rig.nominal, w0);
    const Spectrum s = eig_small(m.A);

    // sigma_o as a repeated real pair
    CHECK(spectrum_contains(s, {-2.5 * w0, 0.0}, 1e-6 * 2.5 * w0));
    // roots of D1 = s^2 + 2 zeta omega_s s + omega_s^2
    const double ws = 1.5 * w0;
    const Complex d1{-0.9 * ws, ws * std::sqrt(1.0 - 0.81)};
    CHECK(spectrum_contains(s, d1, 1e-6 * std::abs(d1)));
    CHECK(spectrum_contains(s, std::conj(d1), 1e-6 * std::abs(d1)));
    // sigma_v appears exactly at the matched design point
    CHECK(spectrum_contains(s, {-w0, 0.0}, 1e-6 * w0));
    // one structural zero mode
    CHECK(structural_zero_index(s, 1e-9 * w0) >= 0);
}

TEST_CASE("design-point error model is block triangular with exact zeros") {
    const Rig rig;
    const double w0 = rig.w0();
    const DesignPointErrorModel m =
        design_point_error_model(rig.design.gains, rig.design.setpoints);

    // exact cancellations
    CHECK(m.flux_to_angle.d == 0.0);
    CHECK(m.flux_to_angle.q == 0.0);
    CHECK(m.omega_from_flux.d == 0.0);
    CHECK(m.omega_from_flux.q == 0.0);
    CHECK(m.A(0, 2) == 0.0);
    CHECK(m.A(1, 2) == 0.0);
    CHECK(m.A(3, 0) == 0.0);
    CHECK(m.A(3, 1) == 0.0);
    // the flux-error block never sees anything downstream
    for (int c = 3; c < 7; ++c) {
        CHECK(m.A(0, c) == 0.0);
        CHECK(m.A(1, c) == 0.0);
    }

    // block eigenvalues by trace/determinant
    CHECK(m.flux_block.trace() == doctest::Approx(-5.0 * w0).epsilon(1e-12));
    CHECK(m.flux_block.det() == doctest::Approx(6.25 * w0 * w0).epsilon(1e-12));
    CHECK(m.voltage_block.trace() == doctest::Approx(-2.0 * w0).epsilon(1e-12));
    CHECK(m.voltage_block.det() == doctest::Approx(w0 * w0).epsilon(1e-12));
    CHECK(-m.sync.a1 == doctest::Approx(2.0 * 0.9 * 1.5 * w0).epsilon(1e-12));
    CHECK(-m.sync.a2 == doctest::Approx(2.25 * w0 * w0).epsilon(1e-12));

    // whole-matrix spectrum: sigma_o, D1 roots, sigma_v, zero
    const Spectrum s = eig_small(m.A);
    CHECK(spectrum_contains(s, {-2.5 * w0, 0.0}, 1e-6 * w0));
    CHECK(spectrum_contains(s, {-w0, 0.0}, 1e-6 * w0));
    const double ws = 1.5 * w0;
    CHECK(spectrum_contains(s, {-0.9 * ws, ws * std::sqrt(0.19)}, 1e-6 * w0));
    CHECK(structural_zero_index(s, 1e-9 * w0) >= 0);
}

TEST_CASE("the zero mode lives in the unobservable integrator direction") {
    const Rig rig;
    const ClosedLoopModel m = closed_loop_matrix(rig.design.gains, rig.design.setpoints,
                                                 rig.plant, rig.nominal, rig.w0());
    // A applied to [0,0,0,0,0, gperp] vanishes identically
    const Vec2 ki = rig.design.gains.k_i;
    const Vec2 gperp = Vec2{-ki.q, ki.d} / norm(ki);
    for (int r = 0; r < 7; ++r) {
        const double v = m.A(r, 5) * gperp.d + m.A(r, 6) * gperp.q;
        CHECK(std::abs(v) < 1e-12 * std::max(1.0, m.A.norm_inf()));
    }
}

TEST_CASE("pole sweep across grid strengths stays stable") {
    const Rig rig;
    std::vector<double> Ls;
    for (int k = 1; k <= 10; ++k) Ls.push_back(0.1 * k);
    const PoleSweepResult sweep =
        pole_sweep(rig.design.gains, rig.design.setpoints, rig.plant, rig.nominal, Ls);
    REQUIRE(sweep.samples.size() == Ls.size());
    for (const SweepSample& s : sweep.samples) {
        REQUIRE(s.ok);
        const int zi = structural_zero_index(s.spectrum, 1e-6 * rig.w0());
        CHECK(zi >= 0);
        int zero_count = 0;
        for (const Complex& lam : s.spectrum.values) {
            if (std::abs(lam) < 1e-6 * rig.w0()) {
                ++zero_count;
                continue;
            }
            CHECK(lam.real() < 0.0);
        }
        CHECK(zero_count == 1);
    }
    // dominant pole sits at -omega0 when matched
    const Complex dom = dominant_pole(sweep.samples[4].spectrum, 1e-6 * rig.w0());
    CHECK(dom.real() == doctest::Approx(-rig.w0()).epsilon(1e-6));
}

TEST_CASE("sweep records failures without aborting") {
    // destabilized voltage poles blow up the equilibrium search for large L
    Rig rig;
    TuningSpec bad = rig.spec;
    bad.sigma_v = PolePair::double_real(+0.5 * rig.w0());
    const Design d = full_design(bad);
    const PoleSweepResult sweep =
        pole_sweep(d.gains, d.setpoints, rig.plant, rig.nominal, {0.5, 1.0});
    REQUIRE(sweep.samples.size() == 2);
    bool any_failed_or_unstable = false;
    for (const SweepSample& s : sweep.samples) {
        if (!s.ok) {
            any_failed_or_unstable = true;
            CHECK(!s.error.empty());
        } else {
            for (const Complex& lam : s.spectrum.values)
                if (lam.real() > 1e-6 * rig.w0()) any_failed_or_unstable = true;
        }
    }
    CHECK(any_failed_or_unstable);
}

TEST_CASE("synchronization statics in nonlinear simulation") {
    // constant grid-frequency offset with the flux reference built at the
    // actual frequency: omega_c settles on omega_g and delta on delta*
    const Rig rig;
    const double w0 = rig.w0();
    for (double ratio : {0.95, 1.05}) {
        const double wg = ratio * w0;
        TuningSpec matched = rig.spec;
        matched.omega0 = wg;  // set-point constellation at the true frequency
        matched.p_star = 0.6;
        const Setpoints sp = steady_state_targets(matched, load_angle_setpoint(matched));

        ClosedLoopState x = pack_state((sp.psi_star - sp.psi_g_star) / rig.nominal.L_sec(),
                                       sp.delta_star + 0.05, sp.psi_star,
                                       (wg / dot(rig.design.gains.k_i, rig.design.gains.k_i)) *
                                           rig.design.gains.k_i);
        const double h = 1e-5;
        for (int k = 0; k < 50000; ++k)
            x = rk4_step(
                [&](double, const ClosedLoopState& s) {
                    return closed_loop_field(rig.design.gains, sp, rig.plant, rig.nominal, wg, s);
                },
                x, k * h, h);
        const UnpackedState us = unpack_state(x);
        const Vec2 e = observer_error(us.i, us.psi_hat, rig.nominal, sp);
        const double wc = estimate_frequency(us.gamma, e, rig.design.gains);
        CHECK(std::abs(wc - wg) < 1e-6);
        CHECK(std::abs(us.delta - sp.delta_star) < 1e-6);
    }
}
