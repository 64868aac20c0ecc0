#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <bit>
#include <cmath>

#include "fermirg/grassmann.hpp"
#include "fermirg/random.hpp"

using namespace fermirg;

namespace {

GrassmannFunction monomial(AlgebraShape shape, std::uint32_t mask, cplx c = 1.0) {
    GrassmannFunction f(shape);
    f[mask] = c;
    return f;
}

Pairing random_pairing(CounterRng& rng, int n, double scale = 1.0) {
    Pairing p = Pairing::zero(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            p.set(i, j, scale * cplx(rng.uniform(-1, 1), rng.uniform(-1, 1)));
    return p;
}

/// Independent oracle: recursive Wick pairing enumeration of the
/// integral of an ascending zeta monomial (list of zeta block indices).
cplx pairing_oracle(const std::vector<int>& idx, const Pairing& c) {
    if (idx.empty()) return 1.0;
    if (idx.size() % 2) return 0.0;
    cplx acc = 0.0;
    // pair idx[0] with idx[j]; sign (-1)^{j-1}
    for (std::size_t j = 1; j < idx.size(); ++j) {
        std::vector<int> rest;
        for (std::size_t t = 1; t < idx.size(); ++t)
            if (t != j) rest.push_back(idx[t]);
        double sign = (j % 2 == 1) ? 1.0 : -1.0;
        acc += sign * c.at(idx[0], idx[j]) * pairing_oracle(rest, c);
    }
    return acc;
}

GrassmannFunction random_even_quartic(CounterRng& rng, AlgebraShape shape) {
    GrassmannFunction w(shape);
    std::uint32_t psi_lo = shape.n_phi;
    for (int t = 0; t < 6; ++t) {
        // random psi quartic + quadratic terms
        std::uint32_t mask = 0;
        int want = (t % 2 == 0) ? 4 : 2;
        while (std::popcount(mask) < want)
            mask |= 1u << (psi_lo + rng.next_below(shape.n_psi));
        w[mask] += cplx(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3));
    }
    return w;
}

}  // namespace

TEST_CASE("multiplication: anticommutation and nilpotence") {
    AlgebraShape sh{0, 3};
    auto p1 = monomial(sh, 1u << sh.psi(0));
    auto p2 = monomial(sh, 1u << sh.psi(1));
    auto a = gr_mul(p1, p2);
    auto b = gr_mul(p2, p1);
    CHECK(a.at((1u << sh.psi(0)) | (1u << sh.psi(1))) == cplx(1.0));
    CHECK(b.at((1u << sh.psi(0)) | (1u << sh.psi(1))) == cplx(-1.0));
    CHECK(gr_mul(p1, p1).max_abs() == 0.0);
}

TEST_CASE("multiplication matches hand expansion") {
    AlgebraShape sh{0, 4};
    GrassmannFunction f(sh), g(sh);
    f[0] = 1.0;
    f[(1u << sh.psi(0)) | (1u << sh.psi(1))] = 1.0;
    g[0] = 1.0;
    g[(1u << sh.psi(2)) | (1u << sh.psi(3))] = 1.0;
    auto prod = gr_mul(f, g);
    CHECK(prod.at(0) == cplx(1.0));
    CHECK(prod.at((1u << sh.psi(0)) | (1u << sh.psi(1))) == cplx(1.0));
    CHECK(prod.at((1u << sh.psi(2)) | (1u << sh.psi(3))) == cplx(1.0));
    CHECK(prod.at((1u << sh.psi(0)) | (1u << sh.psi(1)) | (1u << sh.psi(2)) |
                  (1u << sh.psi(3))) == cplx(1.0));
}

TEST_CASE("associativity on random sparse functions, up to 5 generators") {
    AlgebraShape sh{1, 2};  // 5 generators total
    CounterRng rng(51);
    for (int trial = 0; trial < 40; ++trial) {
        GrassmannFunction f(sh), g(sh), h(sh);
        for (int t = 0; t < 6; ++t) {
            f[rng.next_below(f.term_count())] += cplx(rng.uniform(-1, 1), 0);
            g[rng.next_below(g.term_count())] += cplx(rng.uniform(-1, 1), 0);
            h[rng.next_below(h.term_count())] += cplx(0, rng.uniform(-1, 1));
        }
        auto lhs = gr_mul(gr_mul(f, g), h);
        auto rhs = gr_mul(f, gr_mul(g, h));
        lhs -= rhs;
        CHECK(lhs.max_abs() < 1e-12);
    }
}

TEST_CASE("gaussian integral equals the pairing enumeration oracle") {
    AlgebraShape sh{0, 6};
    CounterRng rng(52);
    Pairing c = random_pairing(rng, 6);

    // normalization and the single pairing
    GrassmannFunction one(sh);
    one[0] = 1.0;
    CHECK(gaussian_integral_zeta(one, c).at(0) == cplx(1.0));

    auto z = [&](int i) { return 1u << sh.zeta(i); };
    auto z12 = monomial(sh, z(0) | z(1));
    CHECK(std::abs(gaussian_integral_zeta(z12, c).at(0) - c.at(0, 1)) < 1e-14);

    auto z1234 = monomial(sh, z(0) | z(1) | z(2) | z(3));
    cplx expect = c.at(0, 1) * c.at(2, 3) - c.at(0, 2) * c.at(1, 3) +
                  c.at(0, 3) * c.at(1, 2);
    CHECK(std::abs(gaussian_integral_zeta(z1234, c).at(0) - expect) < 1e-13);

    // all monomials to degree 6 against the recursive oracle
    for (std::uint32_t zm = 0; zm < 64u; ++zm) {
        std::vector<int> idx;
        for (int i = 0; i < 6; ++i)
            if (zm & (1u << i)) idx.push_back(i);
        GrassmannFunction mono = monomial(sh, zm << sh.zeta(0));
        cplx got = gaussian_integral_zeta(mono, c).at(0);
        CHECK(std::abs(got - pairing_oracle(idx, c)) < 1e-12);
    }

    // odd degrees vanish, spectators pass through with their sign
    GrassmannFunction mixed(sh);
    std::uint32_t spect = 1u << sh.psi(0);
    mixed[spect | z(1) | z(4)] = 2.0;
    auto out = gaussian_integral_zeta(mixed, c);
    CHECK(std::abs(out.at(spect) - 2.0 * c.at(1, 4)) < 1e-14);
}

TEST_CASE("gaussian convolution") {
    AlgebraShape sh{0, 4};
    CounterRng rng(53);
    Pairing c = random_pairing(rng, 4);

    // zero covariance is the identity
    GrassmannFunction w = random_even_quartic(rng, sh);
    auto same = gaussian_convolve(w, Pairing::zero(4));
    same -= w;
    CHECK(same.max_abs() < 1e-14);

    // psi1 psi2 -> psi1 psi2 + C(1,2)
    auto p12 = monomial(sh, (1u << sh.psi(0)) | (1u << sh.psi(1)));
    auto conv = gaussian_convolve(p12, c);
    CHECK(std::abs(conv.at(0) - c.at(0, 1)) < 1e-14);
    CHECK(conv.at((1u << sh.psi(0)) | (1u << sh.psi(1))) == cplx(1.0));

    // linearity
    GrassmannFunction w2 = random_even_quartic(rng, sh);
    auto lin = gaussian_convolve(w, c);
    lin += gaussian_convolve(w2, c);
    auto sum = w;
    sum += w2;
    auto both = gaussian_convolve(sum, c);
    both -= lin;
    CHECK(both.max_abs() < 1e-13);
}

TEST_CASE("wick ordering inverts gaussian convolution") {
    AlgebraShape sh{2, 4};
    CounterRng rng(54);
    for (int trial = 0; trial < 20; ++trial) {
        Pairing c = random_pairing(rng, 4);
        GrassmannFunction w(sh);
        for (int t = 0; t < 10; ++t) {
            std::uint32_t mask = 0;
            int deg = 2 + 2 * static_cast<int>(rng.next_below(2));
            while (std::popcount(mask) < deg) {
                if (rng.next_below(3) == 0)
                    mask |= 1u << rng.next_below(sh.n_phi);
                else
                    mask |= 1u << sh.psi(rng.next_below(sh.n_psi));
            }
            w[mask] += cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
        }
        auto back = wick_order(gaussian_convolve(w, c), c);
        back -= w;
        CHECK(back.max_abs() < 1e-12);

        // :psi1 psi2: = psi1 psi2 - C(1,2)
        auto p12 = monomial(sh, (1u << sh.psi(0)) | (1u << sh.psi(1)));
        auto wick = wick_order(p12, c);
        CHECK(std::abs(wick.at(0) + c.at(0, 1)) < 1e-14);
    }
}

TEST_CASE("log and exp invert each other on even elements") {
    AlgebraShape sh{0, 6};
    CounterRng rng(55);
    GrassmannFunction one(sh);
    one[0] = 1.0;
    CHECK(gr_log(one).max_abs() == 0.0);

    for (int trial = 0; trial < 15; ++trial) {
        GrassmannFunction w = random_even_quartic(rng, sh);
        w[0] = cplx(rng.uniform(0.2, 1.5), rng.uniform(-0.3, 0.3));
        auto back = gr_log(gr_exp(w));
        back -= w;
        CHECK(back.max_abs() < 1e-12);
    }

    GrassmannFunction zero_scalar(sh);
    CHECK_THROWS_AS(gr_log(zero_scalar), std::domain_error);
}

TEST_CASE("quadratic interaction has the closed-form log") {
    AlgebraShape sh{0, 2};
    Pairing c = Pairing::zero(2);
    c.set(0, 1, cplx(0.35, -0.2));
    double lambda = 0.6;
    GrassmannFunction w(sh);
    w[(1u << sh.psi(0)) | (1u << sh.psi(1))] = lambda;
    SourceCoupling none;
    auto om = omega_tilde(w, c, none, ZNormalization::Scalar);
    // integral of exp(lambda psi1 psi2 + ...) with the zeta shift gives
    // scalar 1 + lambda C(1,2); the scalar normalization removes it, and
    // the quadratic coefficient is lambda / (1 + lambda C(1,2)).
    cplx denom = 1.0 + lambda * c.at(0, 1);
    CHECK(std::abs(om.at((1u << sh.psi(0)) | (1u << sh.psi(1))) - lambda / denom) <
          1e-13);
}

TEST_CASE("semigroup property of the source-coupled integration map") {
    AlgebraShape sh{2, 3};
    CounterRng rng(56);
    SourceCoupling j;
    j.terms.push_back({0, 0, cplx(1.0, 0.0)});
    j.terms.push_back({1, 2, cplx(0.5, 0.25)});
    for (int trial = 0; trial < 50; ++trial) {
        Pairing c1 = random_pairing(rng, 3, 0.7);
        Pairing c2 = random_pairing(rng, 3, 0.4);
        GrassmannFunction w(sh);
        // random even quartics and quadratics over the physical block
        auto physical_bit = [&]() {
            std::uint32_t r = rng.next_below(sh.n_phi + sh.n_psi);
            return r < static_cast<std::uint32_t>(sh.n_phi)
                       ? (1u << r)
                       : (1u << sh.psi(r - sh.n_phi));
        };
        for (int t = 0; t < 5; ++t) {
            std::uint32_t mask = 0;
            while (std::popcount(mask) < 4) mask |= physical_bit();
            w[mask] += cplx(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4));
            std::uint32_t qmask = 0;
            while (std::popcount(qmask) < 2) qmask |= physical_bit();
            w[qmask] += cplx(rng.uniform(-0.4, 0.4), 0.0);
        }
        auto once = omega_tilde(w, c1 + c2, j, ZNormalization::Scalar);
        auto first = omega_tilde(w, c1, j, ZNormalization::Scalar);
        auto twice = omega_tilde(first, c2, j, ZNormalization::Scalar);
        twice -= once;
        CHECK(twice.max_abs() < 1e-10);
    }
}

TEST_CASE("omega with zero input and zero source vanishes") {
    AlgebraShape sh{1, 2};
    Pairing c = Pairing::zero(2);
    c.set(0, 1, cplx(0.3, 0.1));
    GrassmannFunction w(sh);
    SourceCoupling none;
    auto om = omega_tilde(w, c, none, ZNormalization::Scalar);
    CHECK(om.max_abs() == 0.0);
}

TEST_CASE("extraction and rebuild round trip") {
    TorusGrid g{4, 4, 4, 1.0, 1.0, 1.0};
    GeneratorLabels labels;
    labels.phi = {Leg{0, 0, 0, -1}, Leg{5, 0, 1, -1}};
    labels.psi = {Leg{0, 0, 1, 0}, Leg{9, 0, 0, 0}, Leg{3, 1, 1, 1},
                  Leg{30, 1, 0, 1}};
    AlgebraShape sh = labels.shape();
    CounterRng rng(57);

    GrassmannFunction w(sh);
    for (int t = 0; t < 8; ++t) {
        std::uint32_t mask = 0;
        while (std::popcount(mask) < 2)
            mask |= 1u << sh.psi(rng.next_below(sh.n_psi));
        w[mask] += cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
    }
    SectorizedKernel k = extract_wmn(w, labels, g, 0, 2);
    GrassmannFunction back = rebuild_wmn(k, labels);
    back -= w.component(0, 2);
    CHECK(back.max_abs() < 1e-12);

    // phi1 phi2: antisymmetric two-tensor with +-1/2 entries
    GrassmannFunction pp(sh);
    pp[(1u << 0) | (1u << 1)] = 1.0;
    SectorizedKernel k20 = extract_wmn(pp, labels, g, 2, 0);
    LegTuple t{labels.phi[0], labels.phi[1]};
    CHECK(std::abs(k20.at(t) - cplx(0.5)) < 1e-14);
    LegTuple ts{labels.phi[1], labels.phi[0]};
    CHECK(std::abs(k20.at(ts) + cplx(0.5)) < 1e-14);

    // even function without psi content has no w_{0,n>0} blocks
    SectorizedKernel none = extract_wmn(pp, labels, g, 0, 2);
    CHECK(none.empty());
}

TEST_CASE("json round trip") {
    GeneratorLabels labels;
    labels.phi = {Leg{0, 0, 0, -1}};
    labels.psi = {Leg{1, 0, 1, 2}, Leg{2, 1, 0, 3}};
    GrassmannFunction w(labels.shape());
    w[0b101] = cplx(0.25, -1.5);
    w[0b011] = cplx(2.0, 0.0);
    GeneratorLabels back_labels;
    GrassmannFunction back = grassmann_from_json(grassmann_to_json(w, labels),
                                                 &back_labels);
    back -= w;
    CHECK(back.max_abs() == 0.0);
    CHECK(back_labels.psi[1].sector == 3);
}

TEST_CASE("phi-only norm weights") {
    KernelNormConfig cfg;
    cfg.lambda0 = 0.01;
    cfg.upsilon = 0.2;
    AlgebraShape sh{3, 0};
    GrassmannFunction g(sh);
    g[(1u << 0) | (1u << 1)] = 2.0;  // m = 2 block, sup = 2/2! = 1
    double expect = std::pow(0.01, -(1.0 - 0.2));
    CHECK(n_norm(g, cfg) == doctest::Approx(expect));
}
