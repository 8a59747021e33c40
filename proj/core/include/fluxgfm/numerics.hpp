#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

#include "fluxgfm/errors.hpp"

namespace fluxgfm {

using Complex = std::complex<double>;

// ---------------------------------------------------------------------------
// 2-D vectors and matrices
// ---------------------------------------------------------------------------

/// Two-axis real vector. Holds dq- or alpha/beta-frame electrical quantities;
/// the frame is a convention of the call site, not of the type.
struct Vec2 {
    double d = 0.0;
    double q = 0.0;

    constexpr Vec2 operator+(Vec2 o) const { return {d + o.d, q + o.q}; }
    constexpr Vec2 operator-(Vec2 o) const { return {d - o.d, q - o.q}; }
    constexpr Vec2 operator-() const { return {-d, -q}; }
    constexpr Vec2 operator*(double s) const { return {d * s, q * s}; }
    constexpr Vec2 operator/(double s) const { return {d / s, q / s}; }
    constexpr Vec2& operator+=(Vec2 o) {
        d += o.d;
        q += o.q;
        return *this;
    }
};

constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }

constexpr double dot(Vec2 a, Vec2 b) { return a.d * b.d + a.q * b.q; }

inline double norm(Vec2 v) { return std::hypot(v.d, v.q); }

inline bool all_finite(Vec2 v) { return std::isfinite(v.d) && std::isfinite(v.q); }

/// 2x2 real matrix, row-major: [[m00, m01], [m10, m11]].
struct Mat2 {
    double m00 = 0.0, m01 = 0.0;
    double m10 = 0.0, m11 = 0.0;

    constexpr Vec2 operator*(Vec2 v) const {
        return {m00 * v.d + m01 * v.q, m10 * v.d + m11 * v.q};
    }
    constexpr Mat2 operator*(const Mat2& o) const {
        return {m00 * o.m00 + m01 * o.m10, m00 * o.m01 + m01 * o.m11,
                m10 * o.m00 + m11 * o.m10, m10 * o.m01 + m11 * o.m11};
    }
    constexpr Mat2 operator+(const Mat2& o) const {
        return {m00 + o.m00, m01 + o.m01, m10 + o.m10, m11 + o.m11};
    }
    constexpr Mat2 operator-(const Mat2& o) const {
        return {m00 - o.m00, m01 - o.m01, m10 - o.m10, m11 - o.m11};
    }
    constexpr Mat2 operator*(double s) const { return {m00 * s, m01 * s, m10 * s, m11 * s}; }
    constexpr Mat2 transpose() const { return {m00, m10, m01, m11}; }
    constexpr double trace() const { return m00 + m11; }
    constexpr double det() const { return m00 * m11 - m01 * m10; }
};

constexpr Mat2 operator*(double s, const Mat2& m) { return m * s; }

/// Outer product u v^T.
constexpr Mat2 outer(Vec2 u, Vec2 v) {
    return {u.d * v.d, u.d * v.q, u.q * v.d, u.q * v.q};
}

/// Row-vector times matrix: returns r^T M as a vector.
constexpr Vec2 premultiply(Vec2 r, const Mat2& m) {
    return {r.d * m.m00 + r.q * m.m10, r.d * m.m01 + r.q * m.m11};
}

/// The 90-degree counter-clockwise rotation generator, J^2 = -I.
inline constexpr Mat2 kJ{0.0, -1.0, 1.0, 0.0};

inline constexpr Mat2 kIdentity2{1.0, 0.0, 0.0, 1.0};

/// J*v without forming the matrix product.
constexpr Vec2 jmul(Vec2 v) { return {-v.q, v.d}; }

/// Rotation by theta: exp(theta*J) = [[cos, -sin], [sin, cos]].
Mat2 rot(double theta);

// ---------------------------------------------------------------------------
// Pole pairs and rank-one placement
// ---------------------------------------------------------------------------

/// A pair of complex poles, required to be closed under conjugation
/// (two reals, or a complex-conjugate pair) wherever a real gain is solved for.
struct PolePair {
    Complex s1{};
    Complex s2{};

    static constexpr PolePair real_pair(double a, double b) { return {{a, 0.0}, {b, 0.0}}; }
    static PolePair conjugate(double re, double im) { return {{re, im}, {re, -im}}; }
    static constexpr PolePair double_real(double a) { return {{a, 0.0}, {a, 0.0}}; }

    Complex sum() const { return s1 + s2; }
    Complex product() const { return s1 * s2; }

    /// True when sum and product are real to roundoff, i.e. the pair admits
    /// a real characteristic polynomial.
    bool conjugate_closed(double rel_tol = 1e-9) const;
};

/// Solves the 2x2 pole placement eig(-omega0*J - k v^T) = sigma for the
/// column gain k. Closed form from matching trace and determinant:
///   v^T k     = -(s1 + s2)
///   v^T (J k) = (omega0^2 - s1 s2) / omega0
/// Throws ZeroDirection when ||v|| < 1e-12 and NonConjugatePair when sigma
/// does not admit a real gain.
Vec2 place_rank_one(Vec2 v, double omega0, const PolePair& sigma);

// ---------------------------------------------------------------------------
// Small dense matrices and their spectra
// ---------------------------------------------------------------------------

/// Dense square real matrix of dimension n <= 16.
class SmallMatrix {
public:
    static constexpr int kMaxDim = 16;

    explicit SmallMatrix(int n);
    static SmallMatrix identity(int n);

    int dim() const { return n_; }
    double& operator()(int r, int c) { return a_[static_cast<std::size_t>(r) * n_ + c]; }
    double operator()(int r, int c) const { return a_[static_cast<std::size_t>(r) * n_ + c]; }

    double norm_inf() const;   ///< max absolute row sum
    double norm_fro() const;

    /// Writes a 2x2 block with its top-left corner at (r, c).
    void set_block(int r, int c, const Mat2& m);

private:
    int n_;
    std::vector<double> a_;
};

/// Eigenvalues sorted by descending real part, ties broken by descending
/// |imag| and then descending imag, so conjugate pairs sit adjacent with the
/// positive-imaginary member first. The order is a stable public contract.
struct Spectrum {
    std::vector<Complex> values;
};

void sort_spectrum(std::vector<Complex>& values);

/// All eigenvalues of a real matrix via balancing, Householder reduction to
/// Hessenberg form and Francis double-shift QR iteration. Conjugate symmetry
/// of complex pairs is exact by construction. Throws NoConvergence if any
/// block exceeds its iteration budget.
Spectrum eig_small(const SmallMatrix& a);

/// Eigenvalues of [[a, b], [c, d]]. Discriminants below roundoff scale are
/// treated as exact double roots, so designed repeated poles come back as
/// repeated values instead of a spurious sqrt(eps) split.
std::array<Complex, 2> eig2(double a, double b, double c, double d);

// ---------------------------------------------------------------------------
// Fixed-size state vectors and RK4
// ---------------------------------------------------------------------------

/// Fixed-length state vector for ODE integration.
template <std::size_t N>
struct StateVec {
    std::array<double, N> x{};

    double& operator[](std::size_t i) { return x[i]; }
    double operator[](std::size_t i) const { return x[i]; }

    StateVec operator+(const StateVec& o) const {
        StateVec r;
        for (std::size_t i = 0; i < N; ++i) r.x[i] = x[i] + o.x[i];
        return r;
    }
    StateVec operator-(const StateVec& o) const {
        StateVec r;
        for (std::size_t i = 0; i < N; ++i) r.x[i] = x[i] - o.x[i];
        return r;
    }
    StateVec operator*(double s) const {
        StateVec r;
        for (std::size_t i = 0; i < N; ++i) r.x[i] = x[i] * s;
        return r;
    }
};

template <std::size_t N>
StateVec<N> operator*(double s, const StateVec<N>& v) {
    return v * s;
}

template <std::size_t N>
bool all_finite(const StateVec<N>& v) {
    for (double c : v.x)
        if (!std::isfinite(c)) return false;
    return true;
}

inline bool all_finite(double x) { return std::isfinite(x); }

/// One classical 4th-order Runge-Kutta step for dx/dt = f(t, x).
/// Throws NonFiniteState if any stage evaluates to non-finite values.
template <typename State, typename Field>
State rk4_step(Field&& f, const State& x, double t, double h) {
    const State k1 = f(t, x);
    const State k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
    const State k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
    const State k4 = f(t + h, x + h * k3);
    if (!all_finite(k1) || !all_finite(k2) || !all_finite(k3) || !all_finite(k4))
        throw NonFiniteState("rk4_step stage produced non-finite values", t);
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace fluxgfm
