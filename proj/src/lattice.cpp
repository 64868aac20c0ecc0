#include "fermirg/lattice.hpp"

namespace fermirg {

namespace {

// One-axis DFT: layout index = (o * n + m) * inner + i; replaces the axis
// content by sum_m e^{i*sign*k(m)*x(z)} d[m].
void axis_dft(std::vector<cplx>& d, int n, double length, double spacing,
              double sign, int outer, int inner) {
    std::vector<cplx> tw(static_cast<std::size_t>(n) * n);
    for (int m = 0; m < n; ++m) {
        int mm = m >= (n + 1) / 2 ? m - n : m;
        double k = 2.0 * M_PI * mm / length;
        for (int z = 0; z < n; ++z)
            tw[static_cast<std::size_t>(m) * n + z] =
                std::polar(1.0, sign * k * (z * spacing));
    }
    std::vector<cplx> tmp(n);
    for (int o = 0; o < outer; ++o)
        for (int i = 0; i < inner; ++i) {
            cplx* base = d.data() + (static_cast<std::size_t>(o) * n) * inner + i;
            for (int z = 0; z < n; ++z) {
                cplx acc = 0.0;
                for (int m = 0; m < n; ++m)
                    acc += tw[static_cast<std::size_t>(m) * n + z] *
                           base[static_cast<std::size_t>(m) * inner];
                tmp[z] = acc;
            }
            for (int z = 0; z < n; ++z)
                base[static_cast<std::size_t>(z) * inner] = tmp[z];
        }
}

// overall sign s applies to <k,x>_- = -k0 x0 + k1 x1 + k2 x2,
// i.e. axis 0 gets -s, axes 1 and 2 get +s.
void transform(const TorusGrid& g, std::vector<cplx>& d, double s) {
    axis_dft(d, g.n0, g.len0(), g.a0, -s, 1, g.n1 * g.n2);
    axis_dft(d, g.n1, g.len1(), g.a1, +s, g.n0, g.n2);
    axis_dft(d, g.n2, g.len2(), g.a2, +s, g.n0 * g.n1, 1);
}

}  // namespace

std::vector<cplx> torus_forward(const TorusGrid& g, const std::vector<cplx>& pos) {
    if (pos.size() != static_cast<std::size_t>(g.volume()))
        throw std::invalid_argument("torus_forward: size mismatch");
    std::vector<cplx> out = pos;
    transform(g, out, -1.0);  // g_hat(k) = cell * sum_z e^{-i<k,z>_-} g(z)
    for (auto& v : out) v *= g.cell();
    return out;
}

std::vector<cplx> torus_inverse(const TorusGrid& g, const std::vector<cplx>& mom) {
    if (mom.size() != static_cast<std::size_t>(g.volume()))
        throw std::invalid_argument("torus_inverse: size mismatch");
    std::vector<cplx> out = mom;
    transform(g, out, +1.0);  // g(z) = (1/Vol) sum_k e^{+i<k,z>_-} g_hat(k)
    for (auto& v : out) v /= g.total_volume();
    return out;
}

}  // namespace fermirg
