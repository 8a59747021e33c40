#include "fluxgfm/numerics.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace fluxgfm {

namespace {
constexpr double kEps = std::numeric_limits<double>::epsilon();
}

Mat2 rot(double theta) {
    if (!std::isfinite(theta)) throw std::invalid_argument("rot: non-finite angle");
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    return {c, -s, s, c};
}

bool PolePair::conjugate_closed(double rel_tol) const {
    const double mag = std::abs(s1) + std::abs(s2);
    const double im_sum = std::abs((s1 + s2).imag());
    const double im_prod = std::abs((s1 * s2).imag());
    return im_sum <= rel_tol * std::max(1.0, mag) &&
           im_prod <= rel_tol * std::max(1.0, mag * mag);
}

Vec2 place_rank_one(Vec2 v, double omega0, const PolePair& sigma) {
    if (!std::isfinite(omega0) || omega0 == 0.0)
        throw std::invalid_argument("place_rank_one: omega0 must be finite and nonzero");
    if (norm(v) < 1e-12)
        throw ZeroDirection("place_rank_one: direction vector is numerically zero");
    if (!sigma.conjugate_closed())
        throw NonConjugatePair("place_rank_one: pole pair is not closed under conjugation");

    // Trace and determinant of -omega0*J - k v^T matched against the target pair:
    //   v^T k     = -(s1 + s2)
    //   v^T (J k) = (omega0^2 - s1*s2) / omega0
    const double rhs1 = -sigma.sum().real();
    const double rhs2 = (omega0 * omega0 - sigma.product().real()) / omega0;
    const double det = -(v.d * v.d + v.q * v.q);
    const double kd = (rhs1 * (-v.d) - v.q * rhs2) / det;
    const double kq = (v.d * rhs2 - v.q * rhs1) / det;
    return {kd, kq};
}

// ---------------------------------------------------------------------------
// SmallMatrix
// ---------------------------------------------------------------------------

SmallMatrix::SmallMatrix(int n) : n_(n) {
    if (n < 1 || n > kMaxDim)
        throw std::invalid_argument("SmallMatrix: dimension must be in [1, 16]");
    a_.assign(static_cast<std::size_t>(n) * n, 0.0);
}

SmallMatrix SmallMatrix::identity(int n) {
    SmallMatrix m(n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

double SmallMatrix::norm_inf() const {
    double best = 0.0;
    for (int i = 0; i < n_; ++i) {
        double row = 0.0;
        for (int j = 0; j < n_; ++j) row += std::abs((*this)(i, j));
        best = std::max(best, row);
    }
    return best;
}

double SmallMatrix::norm_fro() const {
    double s = 0.0;
    for (double x : a_) s += x * x;
    return std::sqrt(s);
}

void SmallMatrix::set_block(int r, int c, const Mat2& m) {
    (*this)(r, c) = m.m00;
    (*this)(r, c + 1) = m.m01;
    (*this)(r + 1, c) = m.m10;
    (*this)(r + 1, c + 1) = m.m11;
}

// ---------------------------------------------------------------------------
// Eigenvalues
// ---------------------------------------------------------------------------

std::array<Complex, 2> eig2(double a, double b, double c, double d) {
    const double mid = 0.5 * (a + d);
    const double p = 0.5 * (a - d);
    const double w = b * c;
    const double disc = p * p + w;
    const double scale = p * p + std::abs(w);
    // A discriminant at roundoff level is an exact double root: resolving it
    // as +-sqrt(eps) noise would split designed repeated poles.
    if (scale == 0.0 || std::abs(disc) <= 1e-12 * scale)
        return {Complex(mid, 0.0), Complex(mid, 0.0)};
    if (disc > 0.0) {
        const double z = std::sqrt(disc);
        const double big = mid + std::copysign(z, mid);
        const double other = (a * d - b * c) / big;
        return {Complex(big, 0.0), Complex(other, 0.0)};
    }
    const double z = std::sqrt(-disc);
    return {Complex(mid, z), Complex(mid, -z)};
}

namespace {

// Similarity scaling by powers of two to even out row/column norms.
void balance(int n, std::vector<double>& h) {
    constexpr double radix = 2.0;
    bool done = false;
    while (!done) {
        done = true;
        for (int i = 0; i < n; ++i) {
            double c = 0.0, r = 0.0;
            for (int j = 0; j < n; ++j) {
                if (j == i) continue;
                c += std::abs(h[static_cast<std::size_t>(j) * n + i]);
                r += std::abs(h[static_cast<std::size_t>(i) * n + j]);
            }
            if (c == 0.0 || r == 0.0) continue;
            const double s = c + r;
            double g = r / radix;
            double f = 1.0;
            while (c < g) {
                f *= radix;
                c *= radix * radix;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= radix * radix;
            }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                const double ginv = 1.0 / f;
                for (int j = 0; j < n; ++j) h[static_cast<std::size_t>(i) * n + j] *= ginv;
                for (int j = 0; j < n; ++j) h[static_cast<std::size_t>(j) * n + i] *= f;
            }
        }
    }
}

// Householder reduction to upper Hessenberg form, eigenvalues preserved.
void hessenberg(int n, std::vector<double>& a) {
    auto h = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * n + j]; };
    std::vector<double> v(static_cast<std::size_t>(n));
    for (int k = 0; k + 2 < n; ++k) {
        double scale = 0.0;
        for (int i = k + 1; i < n; ++i) scale = std::max(scale, std::abs(h(i, k)));
        if (scale == 0.0) continue;
        double nrm2 = 0.0;
        for (int i = k + 1; i < n; ++i) {
            v[i] = h(i, k) / scale;
            nrm2 += v[i] * v[i];
        }
        double sig = std::sqrt(nrm2);
        if (v[k + 1] < 0.0) sig = -sig;
        v[k + 1] += sig;
        const double beta = 1.0 / (sig * v[k + 1]);

        // left: H <- (I - beta v v^T) H on rows k+1..n-1
        for (int j = k; j < n; ++j) {
            double t = 0.0;
            for (int i = k + 1; i < n; ++i) t += v[i] * h(i, j);
            t *= beta;
            for (int i = k + 1; i < n; ++i) h(i, j) -= t * v[i];
        }
        // right: H <- H (I - beta v v^T) on cols k+1..n-1
        for (int i = 0; i < n; ++i) {
            double t = 0.0;
            for (int j = k + 1; j < n; ++j) t += h(i, j) * v[j];
            t *= beta;
            for (int j = k + 1; j < n; ++j) h(i, j) -= t * v[j];
        }
        h(k + 1, k) = -sig * scale;
        for (int i = k + 2; i < n; ++i) h(i, k) = 0.0;
    }
}

// Francis double-shift QR on an upper Hessenberg matrix; eigenvalues only.
void francis_qr(int n, std::vector<double>& a, std::vector<Complex>& out) {
    auto h = [&](int i, int j) -> double& { return a[static_cast<std::size_t>(i) * n + j]; };
    out.clear();
    out.reserve(static_cast<std::size_t>(n));

    double anorm = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = std::max(0, i - 1); j < n; ++j) anorm += std::abs(h(i, j));
    if (anorm == 0.0) {
        out.assign(static_cast<std::size_t>(n), Complex(0.0, 0.0));
        return;
    }

    int hi = n - 1;
    int its = 0;
    while (hi >= 0) {
        // Scan for a negligible subdiagonal entry bounding the active block.
        int lo = hi;
        while (lo > 0) {
            double s = std::abs(h(lo - 1, lo - 1)) + std::abs(h(lo, lo));
            if (s == 0.0) s = anorm;
            if (std::abs(h(lo, lo - 1)) <= kEps * s) {
                h(lo, lo - 1) = 0.0;
                break;
            }
            --lo;
        }

        if (lo == hi) {
            out.emplace_back(h(hi, hi), 0.0);
            --hi;
            its = 0;
            continue;
        }
        if (lo == hi - 1) {
            const auto pair = eig2(h(hi - 1, hi - 1), h(hi - 1, hi), h(hi, hi - 1), h(hi, hi));
            out.push_back(pair[0]);
            out.push_back(pair[1]);
            hi -= 2;
            its = 0;
            continue;
        }

        if (its >= 30)
            throw NoConvergence("eig_small: QR iteration exceeded 30 sweeps for one block");

        // Shift sum/product from the trailing 2x2, or ad hoc values to break cycles.
        double ssum, sprod;
        if (its == 10 || its == 20) {
            const double s = std::abs(h(hi, hi - 1)) + std::abs(h(hi - 1, hi - 2));
            ssum = 1.5 * s;
            sprod = s * s;
        } else {
            ssum = h(hi - 1, hi - 1) + h(hi, hi);
            sprod = h(hi - 1, hi - 1) * h(hi, hi) - h(hi - 1, hi) * h(hi, hi - 1);
        }
        ++its;

        // Find the sweep start: the lowest m where the bulge can be introduced
        // without disturbing what is already negligible above it.
        int m;
        double x = 0.0, y = 0.0, z = 0.0;
        for (m = hi - 2; m >= lo; --m) {
            x = h(m, m) * h(m, m) + h(m, m + 1) * h(m + 1, m) - ssum * h(m, m) + sprod;
            y = h(m + 1, m) * (h(m, m) + h(m + 1, m + 1) - ssum);
            z = h(m + 2, m + 1) * h(m + 1, m);
            const double s = std::abs(x) + std::abs(y) + std::abs(z);
            if (s != 0.0) {
                x /= s;
                y /= s;
                z /= s;
            }
            if (m == lo) break;
            const double u = std::abs(h(m, m - 1)) * (std::abs(y) + std::abs(z));
            const double v = std::abs(x) * (std::abs(h(m - 1, m - 1)) + std::abs(h(m, m)) +
                                            std::abs(h(m + 1, m + 1)));
            if (u <= kEps * v) break;
        }
        for (int i = m + 2; i <= hi; ++i) {
            h(i, i - 2) = 0.0;
            if (i > m + 2) h(i, i - 3) = 0.0;
        }

        // Chase the bulge with 3x3 (2x2 at the end) Householder reflectors.
        for (int k = m; k <= hi - 1; ++k) {
            const bool has_r = (k != hi - 1);
            double p, q, r;
            if (k == m) {
                p = x;
                q = y;
                r = z;
            } else {
                p = h(k, k - 1);
                q = h(k + 1, k - 1);
                r = has_r ? h(k + 2, k - 1) : 0.0;
            }
            double sc = std::abs(p) + std::abs(q) + std::abs(r);
            if (sc == 0.0) continue;
            p /= sc;
            q /= sc;
            r /= sc;
            double s = std::copysign(std::sqrt(p * p + q * q + r * r), p);
            if (s == 0.0) continue;
            if (k == m) {
                if (lo != m) h(k, k - 1) = -h(k, k - 1);
            } else {
                h(k, k - 1) = -s * sc;
            }
            p += s;
            const double xx = p / s;
            const double yy = q / s;
            const double zz = r / s;
            q /= p;
            r /= p;
            // left transform, rows k..k+2
            for (int j = k; j <= hi; ++j) {
                double t = h(k, j) + q * h(k + 1, j);
                if (has_r) {
                    t += r * h(k + 2, j);
                    h(k + 2, j) -= t * zz;
                }
                h(k + 1, j) -= t * yy;
                h(k, j) -= t * xx;
            }
            // right transform, cols k..k+2
            const int imax = std::min(hi, k + 3);
            for (int i = lo; i <= imax; ++i) {
                double t = xx * h(i, k) + yy * h(i, k + 1);
                if (has_r) {
                    t += zz * h(i, k + 2);
                    h(i, k + 2) -= t * r;
                }
                h(i, k + 1) -= t * q;
                h(i, k) -= t;
            }
        }
    }
}

}  // namespace

void sort_spectrum(std::vector<Complex>& values) {
    std::sort(values.begin(), values.end(), [](const Complex& a, const Complex& b) {
        if (a.real() != b.real()) return a.real() > b.real();
        const double ia = std::abs(a.imag());
        const double ib = std::abs(b.imag());
        if (ia != ib) return ia > ib;
        return a.imag() > b.imag();
    });
}

Spectrum eig_small(const SmallMatrix& a) {
    const int n = a.dim();
    std::vector<double> work(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) work[static_cast<std::size_t>(i) * n + j] = a(i, j);
    for (double v : work)
        if (!std::isfinite(v)) throw std::invalid_argument("eig_small: non-finite entry");

    Spectrum spec;
    if (n == 1) {
        spec.values = {Complex(work[0], 0.0)};
        return spec;
    }
    if (n == 2) {
        const auto p = eig2(work[0], work[1], work[2], work[3]);
        spec.values = {p[0], p[1]};
        sort_spectrum(spec.values);
        return spec;
    }

    balance(n, work);
    hessenberg(n, work);
    francis_qr(n, work, spec.values);
    sort_spectrum(spec.values);
    return spec;
}

}  // namespace fluxgfm
