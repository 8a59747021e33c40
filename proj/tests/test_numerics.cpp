#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include "fluxgfm/numerics.hpp"

using namespace fluxgfm;

namespace {

// Test-only oracle: relative characteristic-polynomial residual
// |det(A - lambda I)| / ||A||_F^n, computed by complex LU with partial
// pivoting and log-scaled magnitudes. Independent of the QR path.
double charpoly_residual(const SmallMatrix& a, Complex lambda) {
    const int n = a.dim();
    std::vector<Complex> m(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            m[static_cast<std::size_t>(i) * n + j] =
                Complex(a(i, j), 0.0) - (i == j ? lambda : Complex(0.0, 0.0));

    double log_det = 0.0;
    for (int k = 0; k < n; ++k) {
        int piv = k;
        double best = std::abs(m[static_cast<std::size_t>(k) * n + k]);
        for (int i = k + 1; i < n; ++i) {
            const double v = std::abs(m[static_cast<std::size_t>(i) * n + k]);
            if (v > best) {
                best = v;
                piv = i;
            }
        }
        if (best == 0.0) return 0.0;  // exact root
        if (piv != k)
            for (int j = 0; j < n; ++j)
                std::swap(m[static_cast<std::size_t>(piv) * n + j],
                          m[static_cast<std::size_t>(k) * n + j]);
        log_det += std::log(best);
        const Complex pivot = m[static_cast<std::size_t>(k) * n + k];
        for (int i = k + 1; i < n; ++i) {
            const Complex f = m[static_cast<std::size_t>(i) * n + k] / pivot;
            for (int j = k; j < n; ++j)
                m[static_cast<std::size_t>(i) * n + j] -= f * m[static_cast<std::size_t>(k) * n + j];
        }
    }
    const double nf = std::max(a.norm_fro(), 1e-300);
    return std::exp(log_det - n * std::log(nf));
}

SmallMatrix embed2(const Mat2& m) {
    SmallMatrix a(2);
    a.set_block(0, 0, m);
    return a;
}

Mat2 closed_loop_2x2(Vec2 v, double omega0, Vec2 k) {
    return (-omega0) * kJ - outer(k, v);
}

}  // namespace

TEST_CASE("rot basics") {
    const Mat2 r0 = rot(0.0);
    CHECK(r0.m00 == 1.0);
    CHECK(r0.m01 == 0.0);
    CHECK(r0.m10 == 0.0);
    CHECK(r0.m11 == 1.0);

    const Mat2 rj = rot(M_PI / 2.0);
    CHECK(std::abs(rj.m00 - kJ.m00) < 1e-15);
    CHECK(std::abs(rj.m01 - kJ.m01) < 1e-15);
    CHECK(std::abs(rj.m10 - kJ.m10) < 1e-15);
    CHECK(std::abs(rj.m11 - kJ.m11) < 1e-15);

    // independent oracle: sqrt(3)/2 and 1/2 for a 30-degree turn
    const Vec2 u = rot(M_PI / 6.0) * Vec2{1.0, 0.0};
    CHECK(std::abs(u.d - std::sqrt(3.0) / 2.0) < 1e-15);
    CHECK(std::abs(u.q - 0.5) < 1e-15);
}

TEST_CASE("rot group and transpose properties") {
    std::mt19937 rng(20240501);
    std::uniform_real_distribution<double> ang(-10.0, 10.0);
    for (int trial = 0; trial < 1000; ++trial) {
        const double a = ang(rng);
        const double b = ang(rng);
        const Mat2 lhs = rot(a) * rot(b);
        const Mat2 rhs = rot(a + b);
        CHECK(std::abs(lhs.m00 - rhs.m00) < 1e-12);
        CHECK(std::abs(lhs.m01 - rhs.m01) < 1e-12);
        CHECK(std::abs(lhs.m10 - rhs.m10) < 1e-12);
        CHECK(std::abs(lhs.m11 - rhs.m11) < 1e-12);

        const Mat2 inv = rot(-a);
        const Mat2 tr = rot(a).transpose();
        CHECK(std::abs(inv.m01 - tr.m01) < 1e-15);
        CHECK(std::abs(inv.m10 - tr.m10) < 1e-15);
        CHECK(rot(a).det() == doctest::Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("place_rank_one matches the worked examples") {
    // double real pole at -2.5: trace -5, det 6.25
    const Vec2 k = place_rank_one({0.0, -1.0}, 1.0, PolePair::double_real(-2.5));
    CHECK(k.d == doctest::Approx(5.25).epsilon(1e-12));
    CHECK(k.q == doctest::Approx(-5.0).epsilon(1e-12));
    const Mat2 acl = closed_loop_2x2({0.0, -1.0}, 1.0, k);
    CHECK(acl.trace() == doctest::Approx(-5.0).epsilon(1e-12));
    CHECK(acl.det() == doctest::Approx(6.25).epsilon(1e-12));

    // open-loop poles requested: zero gain
    const Vec2 k0 = place_rank_one({0.0, -1.0}, 1.0, PolePair::conjugate(0.0, 1.0));
    CHECK(std::abs(k0.d) < 1e-15);
    CHECK(std::abs(k0.q) < 1e-15);

    // the voltage-gain instance: w = [0, -1] at unit frequency, s^2+2s+1
    const Vec2 kv = place_rank_one({0.0, -1.0}, 1.0, PolePair::double_real(-1.0));
    CHECK(kv.d == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(kv.q == doctest::Approx(-2.0).epsilon(1e-12));
    const Mat2 av = closed_loop_2x2({0.0, -1.0}, 1.0, kv);
    CHECK(av.trace() == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(av.det() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("place_rank_one rejects bad input") {
    CHECK_THROWS_AS(place_rank_one({0.0, 1e-13}, 1.0, PolePair::double_real(-1.0)),
                    ZeroDirection);
    CHECK_THROWS_AS(place_rank_one({0.0, -1.0}, 1.0, PolePair{{-1.0, 1.0}, {-1.0, 0.5}}),
                    NonConjugatePair);
}

TEST_CASE("place_rank_one reproduces random pole pairs through eig_small") {
    std::mt19937 rng(77);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_real_distribution<double> wdist(0.5, 400.0);
    for (int trial = 0; trial < 500; ++trial) {
        Vec2 v{u(rng), u(rng)};
        if (norm(v) < 0.1) v = Vec2{1.0, 0.3};
        const double w0 = wdist(rng);
        PolePair sigma;
        if (trial % 2 == 0) {
            const double re = -w0 * (0.2 + 2.0 * std::abs(u(rng)));
            const double im = w0 * (0.1 + std::abs(u(rng)));
            sigma = PolePair::conjugate(re, im);
        } else {
            double a = -w0 * (0.2 + std::abs(u(rng)));
            double b = -w0 * (0.2 + std::abs(u(rng)));
            if (std::abs(a - b) < 1e-3 * w0) b = a - 0.1 * w0;
            sigma = PolePair::real_pair(a, b);
        }
        const Vec2 k = place_rank_one(v, w0, sigma);
        const Spectrum sp = eig_small(embed2(closed_loop_2x2(v, w0, k)));
        std::vector<Complex> want{sigma.s1, sigma.s2};
        sort_spectrum(want);
        const double scale = std::max({1.0, std::abs(want[0]), std::abs(want[1])});
        CHECK(std::abs(sp.values[0] - want[0]) < 1e-9 * scale);
        CHECK(std::abs(sp.values[1] - want[1]) < 1e-9 * scale);
    }
}

TEST_CASE("eig_small on known matrices") {
    SmallMatrix d(3);
    d(0, 0) = -1.0;
    d(1, 1) = -2.0;
    d(2, 2) = -3.0;
    const Spectrum sd = eig_small(d);
    CHECK(sd.values[0] == Complex(-1.0, 0.0));
    CHECK(sd.values[1] == Complex(-2.0, 0.0));
    CHECK(sd.values[2] == Complex(-3.0, 0.0));

    const double w0 = 2.0 * M_PI * 50.0;
    const Spectrum sj = eig_small(embed2(w0 * kJ));
    CHECK(sj.values[0].real() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(sj.values[0].imag() == doctest::Approx(w0).epsilon(1e-12));
    CHECK(sj.values[1] == std::conj(sj.values[0]));

    // from the placement example: char poly s^2 + 5 s + 6.25 = (s + 2.5)^2
    SmallMatrix pl(2);
    pl(0, 0) = 0.0;
    pl(0, 1) = 6.25;
    pl(1, 0) = -1.0;
    pl(1, 1) = -5.0;
    const Spectrum spl = eig_small(pl);
    CHECK(spl.values[0].real() == doctest::Approx(-2.5).epsilon(1e-12));
    CHECK(spl.values[0].imag() == 0.0);
    CHECK(spl.values[0] == spl.values[1]);  // clamped double root, bit-equal
}

TEST_CASE("eig_small random property: char-poly residual and conjugate pairing") {
    std::mt19937 rng(123456);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::uniform_int_distribution<int> ndist(1, 8);
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = ndist(rng);
        SmallMatrix a(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) a(i, j) = u(rng);
        const Spectrum sp = eig_small(a);
        REQUIRE(sp.values.size() == static_cast<std::size_t>(n));
        for (const Complex& lam : sp.values) {
            CHECK(charpoly_residual(a, lam) < 1e-8);
            if (lam.imag() != 0.0) {
                const Complex partner = std::conj(lam);
                bool found = false;
                for (const Complex& other : sp.values)
                    if (other == partner) found = true;
                CHECK(found);
            }
        }
        // sort contract: descending real part
        for (std::size_t i = 1; i < sp.values.size(); ++i)
            CHECK(sp.values[i - 1].real() >= sp.values[i].real());
    }
}

TEST_CASE("eig_small recovers a planted spectrum under orthogonal similarity") {
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 7;
        std::vector<double> planted(n);
        for (double& x : planted) x = 400.0 * u(rng);
        std::sort(planted.rbegin(), planted.rend());
        SmallMatrix a(n);
        for (int i = 0; i < n; ++i) a(i, i) = planted[i];
        // apply a chain of random Givens similarities
        for (int rep = 0; rep < 3 * n; ++rep) {
            const int p = std::uniform_int_distribution<int>(0, n - 1)(rng);
            int q = std::uniform_int_distribution<int>(0, n - 2)(rng);
            if (q >= p) ++q;
            const double th = 3.0 * u(rng);
            const double c = std::cos(th), s = std::sin(th);
            for (int j = 0; j < n; ++j) {
                const double ap = a(p, j), aq = a(q, j);
                a(p, j) = c * ap - s * aq;
                a(q, j) = s * ap + c * aq;
            }
            for (int i = 0; i < n; ++i) {
                const double ap = a(i, p), aq = a(i, q);
                a(i, p) = c * ap - s * aq;
                a(i, q) = s * ap + c * aq;
            }
        }
        const Spectrum sp = eig_small(a);
        for (int i = 0; i < n; ++i) {
            CHECK(std::abs(sp.values[i].imag()) < 1e-7 * 400.0);
            CHECK(std::abs(sp.values[i].real() - planted[i]) < 1e-9 * 400.0);
        }
    }
}

TEST_CASE("sort_spectrum puts conjugate pairs adjacent, positive imag first") {
    std::vector<Complex> v{{-1.0, -2.0}, {-3.0, 0.0}, {-1.0, 2.0}, {0.5, 0.0}};
    sort_spectrum(v);
    CHECK(v[0] == Complex(0.5, 0.0));
    CHECK(v[1] == Complex(-1.0, 2.0));
    CHECK(v[2] == Complex(-1.0, -2.0));
    CHECK(v[3] == Complex(-3.0, 0.0));
}

TEST_CASE("SmallMatrix dimension limits") {
    CHECK_THROWS_AS(SmallMatrix(0), std::invalid_argument);
    CHECK_THROWS_AS(SmallMatrix(17), std::invalid_argument);
    CHECK_NOTHROW(SmallMatrix(16));
}

TEST_CASE("rk4_step worked examples") {
    auto zero = [](double, double) { return 0.0; };
    CHECK(rk4_step(zero, 3.25, 0.0, 0.1) == 3.25);

    auto decay = [](double, double x) { return -x; };
    const double one_step = rk4_step(decay, 1.0, 0.0, 0.1);
    CHECK(std::abs(one_step - 0.904837418) < 1e-7);

    auto tsq = [](double t, double) { return t * t; };
    CHECK(rk4_step(tsq, 0.0, 0.0, 1.0) == 1.0 / 3.0);
}

TEST_CASE("rk4_step global error is fourth order") {
    auto decay = [](double, double x) { return -x; };
    auto endpoint_error = [&](int steps) {
        double x = 1.0;
        const double h = 1.0 / steps;
        for (int i = 0; i < steps; ++i) x = rk4_step(decay, x, i * h, h);
        return std::abs(x - std::exp(-1.0));
    };
    const double e1 = endpoint_error(64);
    const double e2 = endpoint_error(128);
    const double ratio = e1 / e2;
    CHECK(ratio > 16.0 * 0.8);
    CHECK(ratio < 16.0 * 1.2);
}

TEST_CASE("rk4_step flags non-finite stages") {
    auto blowup = [](double, double) { return std::numeric_limits<double>::infinity(); };
    CHECK_THROWS_AS(rk4_step(blowup, 1.0, 0.0, 0.1), NonFiniteState);
}

TEST_CASE("StateVec arithmetic round trip through rk4") {
    auto field = [](double, const StateVec<3>& s) {
        StateVec<3> d;
        d[0] = s[1];
        d[1] = -s[0];
        d[2] = 1.0;
        return d;
    };
    StateVec<3> x;
    x[0] = 1.0;
    const double h = 1e-3;
    StateVec<3> y = x;
    for (int i = 0; i < 1000; ++i) y = rk4_step(field, y, i * h, h);
    CHECK(y[0] == doctest::Approx(std::cos(1.0)).epsilon(1e-9));
    CHECK(y[1] == doctest::Approx(-std::sin(1.0)).epsilon(1e-9));
    CHECK(y[2] == doctest::Approx(1.0).epsilon(1e-12));
}
