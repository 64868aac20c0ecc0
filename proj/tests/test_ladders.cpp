#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fermirg/ladders.hpp"
#include "fermirg/random.hpp"

using namespace fermirg;

namespace {

Propagator random_prop(CounterRng& rng, int n) {
    Propagator p(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            p.ref(i, j) = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
    return p;
}

/// Propagator pairing opposite creation bits only (particle number
/// preserving in the bubble sense).
Propagator random_pn_prop(CounterRng& rng, int nud) {
    Propagator p(2 * nud);
    for (int i = 0; i < 2 * nud; ++i)
        for (int j = 0; j < 2 * nud; ++j)
            if (b_of(i) != b_of(j))
                p.ref(i, j) = cplx(rng.uniform(-1, 1), rng.uniform(-1, 1));
    return p;
}

FourKernel random_four(CounterRng& rng, int nx, int ns, int entries) {
    FourKernel f(nx, ns);
    for (int e = 0; e < entries; ++e)
        f.add({static_cast<int>(rng.next_below(nx)), static_cast<int>(rng.next_below(ns))},
              {static_cast<int>(rng.next_below(nx)), static_cast<int>(rng.next_below(ns))},
              {static_cast<int>(rng.next_below(nx)), static_cast<int>(rng.next_below(ns))},
              {static_cast<int>(rng.next_below(nx)), static_cast<int>(rng.next_below(ns))},
              cplx(rng.uniform(-1, 1), rng.uniform(-1, 1)));
    return f;
}

/// Antisymmetric in the first two and last two arguments.
FourKernel pair_antisym(const FourKernel& f) {
    FourKernel out(f.nx(), f.ns());
    for (const auto& [k, c] : f.entries()) {
        out.add(k[0], k[1], k[2], k[3], 0.25 * c);
        out.add(k[1], k[0], k[2], k[3], -0.25 * c);
        out.add(k[0], k[1], k[3], k[2], -0.25 * c);
        out.add(k[1], k[0], k[3], k[2], 0.25 * c);
    }
    return out;
}

/// Keep only particle-number-preserving entries.
FourKernel pn_filter(const FourKernel& f) {
    FourKernel out(f.nx(), f.ns());
    for (const auto& [k, c] : f.entries()) {
        int total = b_of(k[0].x) + b_of(k[1].x) + b_of(k[2].x) + b_of(k[3].x);
        if (total == 2) out.add(k[0], k[1], k[2], k[3], c);
    }
    return out;
}

/// Brute-force chain contraction for the oracle.
cplx ladder_oracle_entry(const FourKernel& f1, const Bubble& p,
                         const FourKernel& f2, const MeasureSpace& x, ZLeg z1,
                         ZLeg z2, ZLeg z3, ZLeg z4, int ns) {
    cplx acc = 0.0;
    const int nx = x.size();
    for (int xa = 0; xa < nx; ++xa)
        for (int xb = 0; xb < nx; ++xb)
            for (int xc = 0; xc < nx; ++xc)
                for (int xd = 0; xd < nx; ++xd)
                    for (int sa = 0; sa < ns; ++sa)
                        for (int sb = 0; sb < ns; ++sb)
                            for (int sc = 0; sc < ns; ++sc)
                                for (int sd = 0; sd < ns; ++sd)
                                    acc += f1.at(z1, z2, {xa, sa}, {xb, sb}) *
                                           x.w[xa] * x.w[xb] * p.at(xa, xb, xc, xd) *
                                           x.w[xc] * x.w[xd] *
                                           f2.at({xc, sc}, {xd, sd}, z3, z4);
    return acc;
}

}  // namespace

TEST_CASE("tensor product and bubble combination") {
    CounterRng rng(61);
    int n = 3;
    Propagator id(n);
    for (int i = 0; i < n; ++i) id.ref(i, i) = 1.0;
    Bubble t = tensor_prod(id, id);
    for (int x1 = 0; x1 < n; ++x1)
        for (int x2 = 0; x2 < n; ++x2)
            for (int x3 = 0; x3 < n; ++x3)
                for (int x4 = 0; x4 < n; ++x4) {
                    cplx expect = (x1 == x3 && x2 == x4) ? 1.0 : 0.0;
                    CHECK(t.at(x1, x2, x3, x4) == expect);
                }

    Propagator a = random_prop(rng, n);
    Propagator zero(n);
    Bubble caz = bubble_cc(a, zero);
    Bubble taa = tensor_prod(a, a);
    for (int x1 = 0; x1 < n; ++x1)
        for (int x3 = 0; x3 < n; ++x3)
            CHECK(std::abs(caz.at(x1, x1, x3, x3) - taa.at(x1, x1, x3, x3)) < 1e-15);
    CHECK(bubble_cc(zero, a).max_abs() == 0.0);

    // bilinearity of the tensor product in the first slot
    Propagator b = random_prop(rng, n);
    Propagator apb(n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) apb.ref(i, j) = a.at(i, j) + b.at(i, j);
    Bubble lhs = tensor_prod(apb, a);
    Bubble t1 = tensor_prod(a, a), t2 = tensor_prod(b, a);
    for (int x1 = 0; x1 < n; ++x1)
        CHECK(std::abs(lhs.at(x1, 0, 1, 2) - t1.at(x1, 0, 1, 2) - t2.at(x1, 0, 1, 2)) <
              1e-14);

    // the pair-exchange symmetry used by the decomposition lemma
    Bubble cab = bubble_cc(a, b);
    for (int x1 = 0; x1 < n; ++x1)
        for (int x2 = 0; x2 < n; ++x2)
            for (int x3 = 0; x3 < n; ++x3)
                for (int x4 = 0; x4 < n; ++x4)
                    CHECK(std::abs(cab.at(x1, x2, x3, x4) - cab.at(x2, x1, x4, x3)) <
                          1e-15);
}

TEST_CASE("bullet contraction against the nested-loop oracle") {
    CounterRng rng(62);
    MeasureSpace x{std::vector<double>{0.7, 1.3}};
    int ns = 1;
    FourKernel f1 = random_four(rng, 2, ns, 10);
    FourKernel f2 = random_four(rng, 2, ns, 10);
    Propagator a = random_prop(rng, 2), b = random_prop(rng, 2);
    Bubble p = bubble_cc(a, b);

    FourKernel got = bullet2(bullet(f1, p, x), f2, x);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k)
                for (int l = 0; l < 2; ++l) {
                    cplx expect = ladder_oracle_entry(f1, p, f2, x, {i, 0}, {j, 0},
                                                      {k, 0}, {l, 0}, ns);
                    CHECK(std::abs(got.at({i, 0}, {j, 0}, {k, 0}, {l, 0}) - expect) <
                          1e-12);
                }

    // zero bubble annihilates
    Bubble zero(2);
    CHECK(bullet2(bullet(f1, zero, x), f2, x).max_abs() == 0.0);
}

TEST_CASE("ladder chains: associativity of the alternating product") {
    CounterRng rng(63);
    MeasureSpace x = MeasureSpace::counting(2);
    FourKernel r = random_four(rng, 2, 2, 14);
    Propagator a = random_prop(rng, 2), b = random_prop(rng, 2);
    Bubble p = bubble_cc(a, b);

    // (r.P.r).P.r == ladder with 3 rungs
    FourKernel l2 = ladder({r, r, r}, {p, p}, x);
    FourKernel l1 = ladder({r, r}, {p}, x);
    FourKernel l2b = bullet2(bullet(l1, p, x), r, x);
    CHECK(FourKernel::distance(l2, l2b) < 1e-11);

    // linearity in one rung
    FourKernel r2 = random_four(rng, 2, 2, 14);
    FourKernel sum = r;
    sum += r2;
    FourKernel lhs = ladder({sum, r}, {p}, x);
    FourKernel rhs = ladder({r, r}, {p}, x);
    rhs += ladder({r2, r}, {p}, x);
    CHECK(FourKernel::distance(lhs, rhs) < 1e-11);

    // ladder_l with b = 0 equals the pure-a ladder
    Propagator zero(2);
    FourKernel la = ladder_l(r, a, zero, 1, x);
    FourKernel laa = bullet2(bullet(r, tensor_prod(a, a), x), r, x);
    CHECK(FourKernel::distance(la, laa) < 1e-12);
}

TEST_CASE("reductions, values and the sign pattern") {
    CounterRng rng(64);
    FourKernel fud = random_four(rng, 2, 2, 12);  // over Xud x S

    // v_ph sign pattern: the (1,0,1,0) block carries -f'(u2,u1,u3,u4)
    FourKernel emb = v_ph(fud);
    for (int w1 = 0; w1 < 2; ++w1)
        for (int w2 = 0; w2 < 2; ++w2)
            for (int w3 = 0; w3 < 2; ++w3)
                for (int w4 = 0; w4 < 2; ++w4) {
                    ZLeg z1{iota(w1, 1), 0}, z2{iota(w2, 0), 1};
                    ZLeg z3{iota(w3, 1), 1}, z4{iota(w4, 0), 0};
                    cplx direct =
                        -fud.at({w2, 1}, {w1, 0}, {w3, 1}, {w4, 0});
                    CHECK(std::abs(emb.at(z1, z2, z3, z4) - direct) < 1e-13);
                }

    // slice-then-embed: reduce_pp(v_pp(f')) = f'
    FourKernel back = reduce_pp(v_pp(fud));
    CHECK(FourKernel::distance(back, fud) < 1e-13);
    FourKernel back_ph = reduce_ph(v_ph(fud));
    CHECK(FourKernel::distance(back_ph, fud) < 1e-13);

    // mixed a-patterns outside the pp slice vanish under reduce_pp
    FourKernel mixed(4, 1);
    mixed.add({iota(0, 0), 0}, {iota(1, 1), 0}, {iota(0, 1), 0}, {iota(1, 0), 0},
              2.0);
    CHECK(reduce_pp(mixed).empty());

    // linearity of the reduction
    FourKernel f2 = random_four(rng, 4, 2, 12);
    FourKernel f3 = random_four(rng, 4, 2, 12);
    FourKernel s = f2;
    s += f3;
    FourKernel lhs = reduce_ph(s);
    FourKernel rhs = reduce_ph(f2);
    rhs += reduce_ph(f3);
    CHECK(FourKernel::distance(lhs, rhs) < 1e-13);
}

TEST_CASE("pair decomposition of antisymmetric number-preserving kernels") {
    CounterRng rng(65);
    for (int trial = 0; trial < 100; ++trial) {
        int nud = 1 + static_cast<int>(rng.next_below(2));
        int ns = 1 + static_cast<int>(rng.next_below(2));
        FourKernel f =
            antisymmetrize4(pn_filter(random_four(rng, 2 * nud, ns, 25)));
        DecomposeReport rep = decompose_check(f);
        CHECK(rep.antisymmetric);
        CHECK(rep.number_preserving);
        CHECK(rep.residual <= 1e-12);
    }
    // zero kernel decomposes trivially
    CHECK(decompose_check(FourKernel(2, 1)).residual == 0.0);
}

TEST_CASE("ladder reductions commute with the chain (pp and ph with 2^l)") {
    CounterRng rng(66);
    for (int trial = 0; trial < 30; ++trial) {
        int nud = 1 + static_cast<int>(rng.next_below(2));
        int ns = 1 + static_cast<int>(rng.next_below(2));
        int nx = 2 * nud;
        MeasureSpace x = MeasureSpace::counting(nx);
        MeasureSpace xud = MeasureSpace::counting(nud);

        int ell = 1 + static_cast<int>(rng.next_below(2));
        std::vector<FourKernel> rungs;
        for (int i = 0; i <= ell; ++i)
            rungs.push_back(pair_antisym(pn_filter(random_four(rng, nx, ns, 20))));
        std::vector<Bubble> bubbles;
        std::vector<Bubble> bubbles_pp, bubbles_ph;
        for (int i = 0; i < ell; ++i) {
            Propagator a = random_pn_prop(rng, nud), b = random_pn_prop(rng, nud);
            Bubble p = bubble_cc(a, b);
            bubbles.push_back(p);
            bubbles_pp.push_back(bubble_pp(p));
            bubbles_ph.push_back(bubble_ph(p));
        }

        FourKernel full = ladder(rungs, bubbles, x);

        // pp: straight reduction of every factor
        std::vector<FourKernel> rungs_pp, rungs_ph;
        for (const auto& r : rungs) {
            rungs_pp.push_back(reduce_pp(r));
            rungs_ph.push_back(reduce_ph(r));
        }
        FourKernel lhs_pp = reduce_pp(full);
        FourKernel rhs_pp = ladder(rungs_pp, bubbles_pp, xud);
        CHECK(FourKernel::distance(lhs_pp, rhs_pp) < 1e-12);

        // ph: the chain of reductions picks up 2^l
        FourKernel lhs_ph = reduce_ph(full);
        FourKernel rhs_ph =
            ladder(rungs_ph, bubbles_ph, xud).scaled(std::pow(2.0, ell));
        CHECK(FourKernel::distance(lhs_ph, rhs_ph) < 1e-12);
    }
}

TEST_CASE("iterated particle-hole ladders") {
    CHECK(iterated_series_coefficient(1) == doctest::Approx(-288.0));
    CHECK(iterated_series_coefficient(2) == doctest::Approx(2.0 * 12.0 * 12.0 * 12.0));

    CounterRng rng(67);
    IterPhInputs in;
    in.ell_max = 2;
    in.x = MeasureSpace::counting(4);  // 2 ud points x 2 bits
    in.sector_count = [](int) { return 2; };
    in.refine = [](int, int, int s) { return s; };
    in.covariances = [&](int) {
        CounterRng local(99);
        return std::make_pair(random_pn_prop(local, 2), random_pn_prop(local, 2));
    };

    // all inputs zero: ladder vanishes at every scale
    in.f_input = [](int, int) { return FourKernel(4, 2); };
    for (int j = 0; j <= 5; ++j)
        CHECK(iterated_ph_ladder(in, j).value.max_abs() == 0.0);

    // nonzero F at scale 3 feeds scales >= 4 but not j <= 3
    in.f_input = [&](int i, int) {
        FourKernel f(4, 2);
        if (i == 3)
            f = pair_antisym(pn_filter(random_four(rng, 4, 2, 16)));
        return f;
    };
    CHECK(iterated_ph_ladder(in, 2).value.max_abs() == 0.0);
    CHECK(iterated_ph_ladder(in, 3).value.max_abs() == 0.0);
    CHECK(iterated_ph_ladder(in, 4).value.max_abs() > 0.0);
}
