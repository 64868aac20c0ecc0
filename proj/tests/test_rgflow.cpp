#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "fermirg/rgflow.hpp"
#include "fermirg/random.hpp"

using namespace fermirg;

namespace {

RGConfig toy_config() {
    RGConfig cfg;
    cfg.sp.M = 1.5;
    cfg.sp.aleph = 0.55;
    cfg.sp.j0 = 2;
    cfg.sp.jbar = 6;
    cfg.norms.lambda0 = 1e-3;
    cfg.norms.upsilon = 0.2;
    cfg.norms.alpha = 10.0;
    cfg.jmax = 5;
    return cfg;
}

const FlowContext& toy_context() {
    static FlowContext ctx(toy_config());
    return ctx;
}

/// Real, particle-number-conserving quartic on the sampled algebra:
/// coefficient lambda for each balanced four-generator monomial.
std::function<GrassmannFunction(const GeneratorLabels&)> quartic_builder(
    double lambda) {
    return [lambda](const GeneratorLabels& labels) {
        AlgebraShape sh = labels.shape();
        GrassmannFunction v(sh);
        const int q = sh.n_psi;
        for (std::uint32_t mask = 0; mask < (1u << q); ++mask) {
            if (std::popcount(mask) != 4) continue;
            int creation = 0;
            for (int i = 0; i < q; ++i)
                if (mask & (1u << i)) creation += labels.psi[i].a;
            if (creation != 2) continue;
            v[mask << sh.n_phi] = lambda;
        }
        return v;
    };
}

CountertermK admissible_k(const FlowContext& ctx, int j, double size) {
    const ScaleParams& sp = ctx.cfg().sp;
    return CountertermK::from_profile(ctx, j, [&, size](double k1, double k2) {
        double e = ctx.dispersion()(k1, k2);
        return cplx(size * nu_ge(j + 1, 0.0, e, sp));
    });
}

}  // namespace

TEST_CASE("covariance identities on the lattice") {
    const FlowContext& ctx = toy_context();
    const LatticeGeometry& geo = ctx.geo();
    const int V = geo.volume();

    // a small admissible u and K
    CountertermK k = admissible_k(ctx, 3, 1e-4);
    std::vector<cplx> u(V);
    for (int m = 0; m < V; ++m)
        u[m] = cplx(1e-4, 1e-5 * geo.k0(m)) * geo.nu_ge(3)[m];

    auto cj = cov_cj(geo, 3, u, k.kspat);
    auto cs = cov_single(geo, 3, u);
    auto dj = cov_dj(geo, 3, u, k.kspat);
    double worst = 0.0;
    for (int m = 0; m < V; ++m) worst = std::max(worst, std::abs(cj[m] - cs[m] - dj[m]));
    CHECK(worst <= 1e-12);

    // D_j(u; 0) = C^{(>= j+1)}_u
    auto d0 = cov_dj(geo, 3, u, std::vector<cplx>(V, 0.0));
    auto cge = cov_ge(geo, 4, u);
    worst = 0.0;
    for (int m = 0; m < V; ++m) worst = std::max(worst, std::abs(d0[m] - cge[m]));
    CHECK(worst <= 1e-12);

    // infrared split: C^{IR} = C^{(<= j0)} + C^{(j0, jbar)} pointwise
    int j0 = 2, jbar = 6;
    auto cle = cov_le(geo, j0, u);
    auto win = cov_window(geo, j0, jbar, jbar, u);
    std::vector<double> numer(V);
    const auto& nub = geo.nu_ge(jbar);
    for (int m = 0; m < V; ++m) numer[m] = 1.0 - nub[m];
    std::vector<cplx> du(V);
    for (int m = 0; m < V; ++m) du[m] = u[m] * (1.0 - nub[m]);
    auto cir = guarded_ratio(geo, numer, dressed_denominator(geo, du, {}, 0));
    worst = 0.0;
    for (int m = 0; m < V; ++m)
        worst = std::max(worst, std::abs(cir[m] - cle[m] - win[m]));
    CHECK(worst <= 1e-12);

    // u = 0, K = 0 single-scale covariance has the bare denominator
    auto bare = cov_single(geo, 3, std::vector<cplx>(V, 0.0));
    for (int m = 0; m < V; ++m) {
        double nu = geo.nu_single(3)[m];
        if (nu == 0.0) continue;
        cplx expect = nu / (cplx(0.0, geo.k0(m)) - geo.e(m));
        CHECK(std::abs(bare[m] - expect) < 1e-13);
    }
}

TEST_CASE("counterterm space checks") {
    const FlowContext& ctx = toy_context();
    CHECK(check_frakK(ctx, CountertermK::zero(ctx, 3)).pass());

    CountertermK good = admissible_k(ctx, 3, 1e-7);
    FrakKReport rep = check_frakK(ctx, good);
    CHECK(rep.pass());
    CHECK(rep.real_ok);

    // support violation: constant spatial multiplier leaks outside
    CountertermK bad = CountertermK::from_profile(
        ctx, 3, [](double, double) { return cplx(1e-9); });
    CHECK(!check_frakK(ctx, bad).support_ok);

    // boundary fixture: norm at the bound must fail the strict inequality
    FrakKReport g = check_frakK(ctx, good);
    double scale_up = (1.0 + 1e-9) * g.norm_bound / g.norm_value;
    CountertermK boundary = good.plus_scaled(good, scale_up - 1.0);
    CHECK(!check_frakK(ctx, boundary).norm_ok);
}

TEST_CASE("initialization at the first scale") {
    const FlowContext& ctx = toy_context();
    const int j0 = ctx.cfg().sp.j0;

    // V = 0, K = 0: no interaction, G equals the free reference
    Quadruple free_q = init_j0(ctx, quartic_builder(0.0));
    CountertermK zero = CountertermK::zero(ctx, j0);
    CHECK(free_q.w(zero).max_abs() == 0.0);
    GrassmannFunction diff = free_q.g(zero);
    diff -= free_q.g_free(zero);
    CHECK(diff.max_abs() < 1e-14);
    // and the free phi-quadratic is a genuine Gaussian pairing value
    CHECK(free_q.g_free(zero).component(2, 0).max_abs() > 0.0);

    // u_{j0}(K) multiplier equals -K(k) on the j0-th neighbourhood
    CountertermK k = admissible_k(ctx, j0, 1e-6);
    TwoLeggedKernel uk = free_q.u(k);
    std::vector<cplx> total = uk.total_multiplier();
    const LatticeGeometry& geo = ctx.geo();
    int checked = 0;
    for (int m = 0; m < geo.volume(); ++m) {
        if (geo.nu_ge(j0)[m] >= 1.0 - 1e-12 && std::abs(k.kspat[m]) > 0) {
            CHECK(std::abs(total[m] + k.kspat[m]) < 1e-10);
            ++checked;
        }
    }
    CHECK(checked > 0);

    // first-order perturbation oracle: the lambda-linear part of w
    double l1 = 1e-6, l2 = 2e-6;
    Quadruple q1 = init_j0(ctx, quartic_builder(l1));
    Quadruple q2 = init_j0(ctx, quartic_builder(l2));
    GrassmannFunction w1 = q1.w(zero);
    GrassmannFunction w2 = q2.w(zero);
    // linearity at leading order: w(2 lambda) ~ 2 w(lambda)
    GrassmannFunction resid = w2;
    resid -= w1.scaled(2.0);
    CHECK(resid.max_abs() < 1e3 * l1 * l1);
}

TEST_CASE("omega step: zero interaction stays zero, pass-through") {
    const FlowContext& ctx = toy_context();
    Quadruple q0 = init_j0(ctx, quartic_builder(0.0));
    // promote the output data to input data shape by zeroing nothing;
    // omega applies to any quadruple with the sampled representative
    Quadruple q1 = omega_j_step(ctx, q0);
    CountertermK zero = CountertermK::zero(ctx, q0.j);
    CHECK(q1.w(zero).max_abs() == 0.0);
    CHECK(q1.p_list.size() == q0.p_list.size());

    // G gains exactly the free increment: G' - G'_free stays zero
    GrassmannFunction d = q1.g(zero);
    d -= q1.g_free(zero);
    CHECK(d.max_abs() < 1e-13);
}

TEST_CASE("rewick fixed point on the toy flow") {
    const FlowContext& ctx = toy_context();

    // V = 0: the fixed point is reached immediately at q = 0
    Quadruple free_q = init_j0(ctx, quartic_builder(0.0));
    RewickResult rw0 =
        rewick_fixpoint(ctx, free_q, CountertermK::zero(ctx, free_q.j + 1));
    CHECK(rw0.trace.converged);
    CHECK(rw0.trace.iterations <= 2);
    CHECK(rw0.q0.max_abs() == 0.0);
    CHECK(rw0.dK.max_abs() == 0.0);

    // interacting flow: convergence within the budget, contracting tail
    Quadruple q = init_j0(ctx, quartic_builder(1e-3));
    RewickResult rw =
        rewick_fixpoint(ctx, q, CountertermK::zero(ctx, q.j + 1));
    CHECK(rw.trace.converged);
    CHECK(rw.trace.iterations <= 20);
    CHECK(rw.trace.residual <= 1e-8);
    for (std::size_t i = 2; i < rw.trace.ratios.size(); ++i)
        CHECK(rw.trace.ratios[i] < 1.0);

    // delta K formula: dK(k) = q0((0,k)) nu^{(>=j+1)}((0,k))
    const LatticeGeometry& geo = ctx.geo();
    std::vector<cplx> qtot = rw.q0.total_multiplier();
    const auto& nu_sp = geo.nu_ge_spatial(q.j + 1);
    const TorusGrid& g = ctx.grid();
    for (int m = 0; m < g.volume(); ++m) {
        auto c = g.coords(m);
        cplx expect = qtot[g.site(0, c[1], c[2])] * nu_sp[m];
        CHECK(std::abs(rw.dK.kspat[m] - expect) < 1e-13);
    }
}

TEST_CASE("the re-Wick step kills the quadratic block and builds p") {
    const FlowContext& ctx = toy_context();
    Quadruple q = init_j0(ctx, quartic_builder(1e-3));
    OjResult oj = oj_step(ctx, q);

    CountertermK zero = CountertermK::zero(ctx, q.j + 1);
    GrassmannFunction wnext = oj.next.w(zero);
    CHECK(wnext.component(0, 2).max_abs() == 0.0);  // exact by construction
    CHECK(wnext.component(0, 0).max_abs() == 0.0);
    CHECK(oj.next.j == q.j + 1);
    CHECK(oj.next.p_list.size() == q.p_list.size() + 1);

    // p^{(j)} vanishes at k0 = 0 on the lattice
    std::vector<cplx> ptot = oj.p_new.total_multiplier();
    const TorusGrid& g = ctx.grid();
    double worst = 0.0;
    for (int m = 0; m < g.volume(); ++m) {
        auto c = g.coords(m);
        if (c[0] == 0) worst = std::max(worst, std::abs(ptot[m]));
    }
    CHECK(worst <= 1e-10);

    // k0-reversal reality of p for the real interaction
    CHECK(oj.p_new.k0_reality_defect() <= 1e-10);

    // ren at zero: the one-step map produces an admissible counterterm
    CountertermK k_of = oj.ren(zero);
    CHECK(k_of.j == q.j);
    CHECK(check_frakK(ctx, k_of).norm_ok);
}

TEST_CASE("zero-interaction recursion driver") {
    const FlowContext& ctx = toy_context();
    FlowTrace trace = recursion_driver(ctx, quartic_builder(0.0), 4);
    CHECK(trace.steps.size() == 3);

    // all counterterms stay zero
    for (std::size_t s = 0; s < trace.ren_step.size(); ++s) {
        int jhi = trace.j0 + static_cast<int>(s) + 1;
        CountertermK z = CountertermK::zero(ctx, jhi);
        CHECK(trace.ren_step[s](z).max_abs() == 0.0);
    }
    auto de = trace.delta_e(ctx, 4, CountertermK::zero(ctx, 4));
    double worst = 0.0;
    for (const auto& v : de) worst = std::max(worst, std::abs(v));
    CHECK(worst == 0.0);

    ProjectiveReport rep = projective_audit(ctx, trace);
    CHECK(rep.composition_residual <= 1e-12);
    CHECK(rep.delta_e_residual <= 1e-12);

    LemmaAuditReport lem = lemma_audits(ctx, trace);
    CHECK(lem.dressing_ok);
    CHECK(lem.cj_additivity <= 1e-12);
    CHECK(lem.ir_additivity <= 1e-12);

    // the zero flow passes the displayed data bounds
    const auto& last = trace.steps.back();
    QuadrupleReport qr = check_quadruple(
        ctx, last.quad, CountertermK::zero(ctx, last.j), DataMode::Output);
    CHECK(qr.all_pass());
}

TEST_CASE("interacting two-step driver keeps the structural identities") {
    const FlowContext& ctx = toy_context();
    FlowTrace trace = recursion_driver(ctx, quartic_builder(1e-3), 4);

    // w_{0,2} = 0 after every re-Wick step (checked on input data);
    // the driver stores output data, so re-run one O-step here
    OjResult oj = oj_step(ctx, trace.steps[0].quad);
    CountertermK zero = CountertermK::zero(ctx, trace.steps[0].j + 1);
    CHECK(oj.next.w(zero).component(0, 2).max_abs() == 0.0);

    // projective identities hold exactly for stored chains
    ProjectiveReport rep = projective_audit(ctx, trace);
    CHECK(rep.composition_residual <= 1e-10);
    CHECK(rep.delta_e_residual <= 1e-10);

    // reality of u along the trace at K = 0
    for (const auto& step : trace.steps) {
        CountertermK z = CountertermK::zero(ctx, step.j);
        TwoLeggedKernel u = step.quad.u(z);
        if (!u.empty()) CHECK(u.k0_reality_defect() <= 1e-9);
    }
}

TEST_CASE("re-Wick covariance difference obeys the denominator algebra") {
    const FlowContext& ctx = toy_context();
    Quadruple q = init_j0(ctx, quartic_builder(1e-3));
    const int j = q.j;
    const LatticeGeometry& geo = ctx.geo();
    const TorusGrid& g = ctx.grid();
    const int V = g.volume();

    CountertermK kp = admissible_k(ctx, j + 1, 1e-7);
    // a small admissible two-legged q fixture
    std::vector<cplx> qmult(V);
    for (int m = 0; m < V; ++m)
        qmult[m] = cplx(1e-6, 2e-7 * geo.k0(m)) * geo.nu_ge(j)[m];
    TwoLeggedKernel qk = TwoLeggedKernel::from_multiplier(ctx.sectors(j), qmult);

    EwickData ew = ewick_E(ctx, q, kp, qk);

    // reconstruct E from the two dressed denominators and the signed
    // difference formula, on the support of nu^{(>= j+1)}
    std::vector<cplx> qtot = qk.total_multiplier();
    std::vector<cplx> u_of = q.u(ew.k_of).total_multiplier();
    const auto& nu1 = geo.nu_ge(j + 1);
    const auto& nu2 = geo.nu_ge(j + 2);
    const auto& nu1sp = geo.nu_ge_spatial(j + 1);
    double worst = 0.0;
    int checked = 0;
    for (int m = 0; m < V; ++m) {
        if (nu1[m] <= 0.0) continue;
        auto c = g.coords(m);
        cplx q0k = qtot[g.site(0, c[1], c[2])];
        cplx vsmall = u_of[m] + ew.k_of.kspat[m] * nu2[m];
        cplx b4 = -kp.kspat[m] * (nu2[m] - geo.nu_ge(j + 3)[m]) +
                  qtot[m] * nu1[m] - q0k * nu1sp[m] * nu2[m];
        cplx vbig = vsmall + b4;
        cplx dv = cplx(0.0, geo.k0(m)) - geo.e(m) - vbig;
        cplx ds = cplx(0.0, geo.k0(m)) - geo.e(m) - vsmall;
        cplx expect = nu1[m] * (1.0 / dv - 1.0 / ds);
        worst = std::max(worst, std::abs(ew.e_mult[m] - expect));
        ++checked;
    }
    CHECK(checked > 0);
    CHECK(worst < 1e-10);
}

TEST_CASE("re-Wick covariance difference responds linearly") {
    const FlowContext& ctx = toy_context();
    Quadruple q = init_j0(ctx, quartic_builder(1e-3));
    const int j = q.j;
    const LatticeGeometry& geo = ctx.geo();
    const int V = ctx.grid().volume();
    CountertermK kp = CountertermK::zero(ctx, j + 1);

    std::vector<cplx> qdir(V);
    for (int m = 0; m < V; ++m)
        qdir[m] = cplx(1e-5, 3e-6 * geo.k0(m)) * geo.nu_ge(j)[m];
    TwoLeggedKernel dirk = TwoLeggedKernel::from_multiplier(ctx.sectors(j), qdir);

    auto e_at = [&](double s) {
        return ewick_E(ctx, q, kp, dirk.scaled(s)).e_mult;
    };
    auto diff = [&](double h) {
        auto ep = e_at(h);
        auto em = e_at(-h);
        std::vector<cplx> d(V);
        for (int m = 0; m < V; ++m) d[m] = (ep[m] - em[m]) / (2.0 * h);
        return d;
    };
    auto d1 = diff(0.5);
    auto d2 = diff(0.25);
    // Richardson: central differences converge quadratically, so the two
    // stencils must already agree well; the extrapolated value is better
    double disagreement = 0.0, scale = 0.0;
    for (int m = 0; m < V; ++m) {
        disagreement = std::max(disagreement, std::abs(d1[m] - d2[m]));
        scale = std::max(scale, std::abs(d2[m]));
    }
    CHECK(scale > 0.0);
    CHECK(disagreement < 0.05 * scale);
}

TEST_CASE("quartic decomposition closes along the driver trace") {
    const FlowContext& ctx = toy_context();
    FlowTrace trace = recursion_driver(ctx, quartic_builder(1e-3), 4);
    for (std::size_t s = 0; s < trace.steps.size(); ++s) {
        const FlowStep& step = trace.steps[s];
        CHECK(step.quad.f_list.size() ==
              static_cast<std::size_t>(step.j - 1));  // F^{(2..j)}
        FDecomposition dec =
            f_decomposition(ctx, step.quad, CountertermK::zero(ctx, step.j));
        if (s == 0) {
            // at initialization the F blocks vanish and the remainder is
            // the whole quartic block
            CHECK(SectorizedKernel(dec.delta_f).size() == dec.w04.size());
        } else {
            CHECK(dec.delta_f.max_abs() <= 1e-12);
        }
    }
    // the resectorization growth diagnostic is finite and logged
    LemmaAuditReport rep = lemma_audits(ctx, trace);
    CHECK(rep.resect_ratio > 0.0);
    CHECK(rep.resect_geometry > 1.0);
}

TEST_CASE("bridge covariance: the two denominator dressings coincide") {
    const FlowContext& ctx = toy_context();
    const LatticeGeometry& geo = ctx.geo();
    const int V = geo.volume();
    int j = 3, jbar = 6;
    std::vector<cplx> u(V);
    for (int m = 0; m < V; ++m)
        u[m] = cplx(2e-4, 1e-5 * geo.k0(m)) * geo.nu_ge(j)[m];

    auto s1 = cov_bridge(geo, j, jbar, u);
    // alternative dressing u * (1 - nu^{(>= jbar)}) from the first display
    std::vector<double> numer(V);
    const auto& a = geo.nu_ge(j + 1);
    const auto& b = geo.nu_ge(jbar);
    for (int m = 0; m < V; ++m) numer[m] = a[m] - b[m];
    std::vector<cplx> du(V);
    for (int m = 0; m < V; ++m) du[m] = u[m] * (1.0 - b[m]);
    auto s2 = guarded_ratio(geo, numer, dressed_denominator(geo, du, {}, 0));
    double worst = 0.0;
    for (int m = 0; m < V; ++m) worst = std::max(worst, std::abs(s1[m] - s2[m]));
    CHECK(worst <= 1e-12);
}

TEST_CASE("input-data bound report on the zero flow") {
    const FlowContext& ctx = toy_context();
    Quadruple q = init_j0(ctx, quartic_builder(0.0));
    OjResult oj = oj_step(ctx, q);
    QuadrupleReport rep = check_quadruple(
        ctx, oj.next, CountertermK::zero(ctx, oj.next.j), DataMode::Input);
    CHECK(rep.all_pass());
    bool saw_w02_line = false;
    for (const auto& l : rep.lines)
        if (l.name.find("w_{0,2} = 0") != std::string::npos) saw_w02_line = true;
    CHECK(saw_w02_line);
}
