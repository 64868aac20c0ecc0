#pragma once

// Discrete spacetime torus and its dual lattice. All kernel identities
// are exact finite sums here; integrals carry cell-volume weights.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace fermirg {

using cplx = std::complex<double>;

struct TorusGrid {
    int n0 = 8, n1 = 8, n2 = 8;       // points per axis
    double a0 = 1.0, a1 = 1.0, a2 = 1.0;  // lattice spacings

    int volume() const { return n0 * n1 * n2; }
    double cell() const { return a0 * a1 * a2; }
    double len0() const { return n0 * a0; }
    double len1() const { return n1 * a1; }
    double len2() const { return n2 * a2; }
    double total_volume() const { return len0() * len1() * len2(); }

    int site(int i0, int i1, int i2) const {
        auto m = [](int i, int n) { int r = i % n; return r < 0 ? r + n : r; };
        return (m(i0, n0) * n1 + m(i1, n1)) * n2 + m(i2, n2);
    }
    std::array<int, 3> coords(int s) const {
        return {s / (n1 * n2), (s / n2) % n1, s % n2};
    }
    int add(int s, int t) const {
        auto a = coords(s), b = coords(t);
        return site(a[0] + b[0], a[1] + b[1], a[2] + b[2]);
    }
    int sub(int s, int t) const {
        auto a = coords(s), b = coords(t);
        return site(a[0] - b[0], a[1] - b[1], a[2] - b[2]);
    }
    int neg(int s) const {
        auto a = coords(s);
        return site(-a[0], -a[1], -a[2]);
    }

    /// Minimal-image displacement (x0,x1,x2) of a site difference.
    std::array<double, 3> displacement(int s) const {
        auto c = coords(s);
        auto fold = [](int i, int n) { return i >= (n + 1) / 2 ? i - n : i; };
        return {fold(c[0], n0) * a0, fold(c[1], n1) * a1, fold(c[2], n2) * a2};
    }

    /// Dual momentum of mode index (same site indexing), components
    /// 2*pi*m_i/L_i with m_i folded into the symmetric window.
    std::array<double, 3> momentum(int mode) const {
        auto c = coords(mode);
        auto fold = [](int i, int n) { return i >= (n + 1) / 2 ? i - n : i; };
        return {2.0 * M_PI * fold(c[0], n0) / len0(),
                2.0 * M_PI * fold(c[1], n1) / len1(),
                2.0 * M_PI * fold(c[2], n2) / len2()};
    }
    int negate_mode(int mode) const { return neg(mode); }
    /// Mode with reversed temporal component only (k0 -> -k0).
    int reverse_k0(int mode) const {
        auto c = coords(mode);
        return site(-c[0], c[1], c[2]);
    }

    /// The Minkowski-style pairing <k,x>_- = -k0*x0 + k1*x1 + k2*x2.
    double pairing(int mode, int site_idx) const {
        auto k = momentum(mode);
        auto c = coords(site_idx);
        return -k[0] * (c[0] * a0) + k[1] * (c[1] * a1) + k[2] * (c[2] * a2);
    }

    friend bool operator==(const TorusGrid& a, const TorusGrid& b) {
        return a.n0 == b.n0 && a.n1 == b.n1 && a.n2 == b.n2 && a.a0 == b.a0 &&
               a.a1 == b.a1 && a.a2 == b.a2;
    }
};

/// Forward transform of a translation-invariant one-difference kernel:
/// g_hat(k) = sum_z cell * exp(-i <k,z>_-) g(z).
std::vector<cplx> torus_forward(const TorusGrid& g, const std::vector<cplx>& pos);
/// Inverse: g(z) = (1/Vol) sum_k exp(+i <k,z>_-) g_hat(k).
std::vector<cplx> torus_inverse(const TorusGrid& g, const std::vector<cplx>& mom);

}  // namespace fermirg
