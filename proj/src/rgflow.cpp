#include "fermirg/rgflow.hpp"

#include <algorithm>
#include <cmath>

namespace fermirg {

void RGConfig::validate() const {
    sp.validate();
    norms.validate();
    if (ell_max < 1) throw std::invalid_argument("config: ell_max must be >= 1");
    if (jmax < sp.j0) throw std::invalid_argument("config: jmax must be >= j0");
    if (n0_asym < 1) throw std::invalid_argument("config: n0 must be >= 1");
    if (sp.jbar < sp.j0 + 2)
        throw std::invalid_argument("config: jbar must be >= j0 + 2");
}

FlowContext::FlowContext(const RGConfig& cfg)
    : cfg_(cfg),
      disp_(Dispersion::builtin(cfg.dispersion)),
      curve_(FermiCurve::trace(disp_, 1024)),
      geo_(cfg.grid, disp_, cfg.sp) {
    cfg_.validate();
    // a dual mode sitting exactly on the Fermi curve at k0 = 0 would make
    // every covariance singular; insist the lattice avoids the curve
    double closest = 1e300;
    for (int m = 0; m < geo_.volume(); ++m)
        closest = std::min(closest, std::hypot(geo_.k0(m), geo_.e(m)));
    if (closest < 1e-6)
        throw std::invalid_argument(
            "flow context: a dual lattice mode lies on the Fermi curve; "
            "adjust the grid spacings");
}

const LatticeSectorData& FlowContext::sectors(int j) const {
    auto it = sectors_.find(j);
    if (it == sectors_.end()) {
        auto data = std::make_shared<LatticeSectorData>(
            cfg_.grid, disp_, curve_, Sectorization::build(j, curve_, cfg_.sp),
            cfg_.sp);
        it = sectors_.emplace(j, std::move(data)).first;
    }
    return *it->second;
}

int FlowContext::refine_sector(int jfrom, int jto, int s) const {
    if (jfrom == jto) return s;
    const Sectorization& from = sectors(jfrom).sectorization();
    const Sectorization& to = sectors(jto).sectorization();
    return static_cast<int>(to.nearest_center(from.sector(s).center));
}

// ---------------------------------------------------------------------------
// counterterms

CountertermK CountertermK::zero(const FlowContext& ctx, int j) {
    return CountertermK{j, std::vector<cplx>(ctx.grid().volume(), 0.0)};
}

CountertermK CountertermK::from_profile(
    const FlowContext& ctx, int j, const std::function<cplx(double, double)>& f) {
    CountertermK k{j, std::vector<cplx>(ctx.grid().volume(), 0.0)};
    const TorusGrid& g = ctx.grid();
    for (int m = 0; m < g.volume(); ++m) {
        auto mom = g.momentum(m);
        k.kspat[m] = f(mom[1], mom[2]);
    }
    return k;
}

CountertermK CountertermK::plus_scaled(const CountertermK& dir, double s) const {
    CountertermK out = *this;
    for (std::size_t i = 0; i < kspat.size(); ++i) out.kspat[i] += s * dir.kspat[i];
    return out;
}

bool CountertermK::is_zero() const {
    for (const auto& v : kspat)
        if (v != cplx(0.0)) return false;
    return true;
}

double CountertermK::max_abs() const {
    double m = 0.0;
    for (const auto& v : kspat) m = std::max(m, std::abs(v));
    return m;
}

TwoLeggedKernel CountertermK::to_kernel(const FlowContext& ctx) const {
    return TwoLeggedKernel::from_spatial_multiplier(ctx.sectors(j), kspat);
}

NormSeries CountertermK::norm_1_sigma(const FlowContext& ctx) const {
    return to_kernel(ctx).norm_1_sigma(ctx.cfg().shape);
}

FrakKReport check_frakK(const FlowContext& ctx, const CountertermK& k) {
    FrakKReport rep;
    const ScaleParams& sp = ctx.cfg().sp;
    const KernelNormConfig& nc = ctx.cfg().norms;
    NormSeries nk = k.norm_1_sigma(ctx);
    rep.norm_value = nk.constant_is_infinite() ? 1e300 : nk.constant_term();
    rep.norm_bound = std::pow(nc.lambda0, 1.0 - nc.upsilon) *
                     sp.sector_length(k.j + 1) / std::pow(sp.M, k.j + 1);
    rep.norm_ok = rep.norm_value < rep.norm_bound;

    const auto& nu_sp = ctx.geo().nu_ge_spatial(k.j + 1);
    double leak = 0.0;
    for (int m = 0; m < ctx.grid().volume(); ++m)
        if (nu_sp[m] == 0.0) leak = std::max(leak, std::abs(k.kspat[m]));
    rep.support_leak = leak;
    rep.support_ok = leak <= 1e-14;

    double imag = 0.0;
    for (const auto& v : k.kspat) imag = std::max(imag, std::abs(v.imag()));
    rep.real_ok = imag <= 1e-14;
    return rep;
}

// ---------------------------------------------------------------------------
// sampled algebra plumbing

GeneratorLabels default_sample(const FlowContext& ctx, int j, double arc_position) {
    const TorusGrid& g = ctx.grid();
    const Sectorization& sec = ctx.sectors(j).sectorization();
    int s0 = static_cast<int>(sec.nearest_center(arc_position));
    int s1 = static_cast<int>((s0 + 1) % sec.size());
    // a purely temporal displacement keeps all sampled kernel values in
    // the reality-even class (spatial reflections of sampled differences
    // stay sampled)
    int xa = g.site(0, 0, 0);
    int xb = g.site(1, 0, 0);
    GeneratorLabels labels;
    labels.phi = {Leg{xa, 0, 0, -1}, Leg{xa, 0, 1, -1}};
    labels.psi = {Leg{xa, 0, 1, s0}, Leg{xa, 0, 0, s0}, Leg{xb, 0, 1, s1},
                  Leg{xb, 0, 0, s1}};
    return labels;
}

GeneratorLabels refine_labels(const FlowContext& ctx, const GeneratorLabels& labels,
                              int jfrom, int jto) {
    GeneratorLabels out = labels;
    for (auto& l : out.psi) l.sector = ctx.refine_sector(jfrom, jto, l.sector);
    return out;
}

SourceCoupling involution_coupling(const GeneratorLabels& labels) {
    SourceCoupling j;
    for (std::size_t p = 0; p < labels.phi.size(); ++p) {
        const Leg& f = labels.phi[p];
        // first psi label with the same position and spin and flipped bit
        for (std::size_t q = 0; q < labels.psi.size(); ++q) {
            const Leg& z = labels.psi[q];
            if (z.site == f.site && z.sigma == f.sigma && z.a == 1 - f.a) {
                j.terms.push_back({static_cast<int>(p), static_cast<int>(q), 1.0});
                break;
            }
        }
    }
    return j;
}

namespace {

/// Effective per-sector-pair multipliers Chi_s c Chi_{s'} with
/// Chi_s = sum of chi_t over sectors t intersecting s.
std::vector<double> chi_hull(const LatticeSectorData& sec, int s) {
    std::vector<double> out(sec.grid().volume(), 0.0);
    for (std::size_t t = 0; t < sec.sector_count(); ++t) {
        if (!sec.sectors_intersect(s, t)) continue;
        for (int m = 0; m < sec.grid().volume(); ++m) out[m] += sec.chi(t, m);
    }
    return out;
}

}  // namespace

Pairing pairing_from_multiplier(const FlowContext& ctx,
                                const GeneratorLabels& labels, int j,
                                const std::vector<cplx>& c) {
    const LatticeSectorData& sec = ctx.sectors(j);
    const TorusGrid& g = ctx.grid();
    const int q = static_cast<int>(labels.psi.size());
    Pairing p = Pairing::zero(q);

    std::map<int, std::vector<double>> hulls;
    auto hull = [&](int s) -> const std::vector<double>& {
        auto it = hulls.find(s);
        if (it == hulls.end()) it = hulls.emplace(s, chi_hull(sec, s)).first;
        return it->second;
    };

    // c_{ss'}(z) = (1/Vol) sum_k e^{i<k,z>_-} Chi_s(k) c(k) Chi_{s'}(k)
    auto position_value = [&](int s, int sp, int zsite) {
        const auto& hs = hull(s);
        const auto& hsp = hull(sp);
        cplx acc = 0.0;
        for (int m = 0; m < g.volume(); ++m) {
            double w = hs[m] * hsp[m];
            if (w == 0.0) continue;
            acc += std::polar(1.0, g.pairing(m, zsite)) * w * c[m];
        }
        return acc / g.total_volume();
    };

    for (int i = 0; i < q; ++i)
        for (int k = i + 1; k < q; ++k) {
            const Leg& a = labels.psi[i];
            const Leg& b = labels.psi[k];
            if (a.sigma != b.sigma || a.a == b.a) continue;
            cplx v;
            if (a.a == 0)  // (0,1): +c_{ss'}(x - x')
                v = position_value(a.sector, b.sector, g.sub(a.site, b.site));
            else  // (1,0): -c_{s's}(x' - x)
                v = -position_value(b.sector, a.sector, g.sub(b.site, a.site));
            p.set(i, k, v);
        }
    return p;
}

TwoLeggedKernel embed_two_legged(const FlowContext& ctx,
                                 const SectorizedKernel& block, int j) {
    const TorusGrid& g = ctx.grid();
    TwoLeggedKernel out(g, j);
    // collect g_{ss'} position values from the (a,a') = (1,0) entries
    std::map<std::pair<int, int>, std::map<int, cplx>> vals;
    for (const auto& [legs, coeff] : block.entries()) {
        if (legs.size() != 2) continue;
        const Leg& l0 = legs[0];
        const Leg& l1 = legs[1];
        if (l0.a != 1 || l1.a != 0 || l0.sigma != l1.sigma) continue;
        // orbit rep has l0 at the origin: value = g_{ss'}(x - x') = g(-z)
        vals[{l0.sector, l1.sector}][g.neg(l1.site)] += coeff;
    }
    for (const auto& [key, m] : vals) {
        auto& b = out.block(key.first, key.second);
        for (int k = 0; k < g.volume(); ++k) {
            cplx acc = 0.0;
            for (const auto& [z, v] : m)
                acc += v * std::polar(1.0, -g.pairing(k, z));
            b[k] = acc * g.cell();
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// shared helpers for the steps

namespace {

std::vector<cplx> resect_multiplier(const FlowContext& ctx, int jto,
                                    const std::vector<cplx>& total) {
    const LatticeSectorData& sec = ctx.sectors(jto);
    std::vector<cplx> out(total.size());
    for (std::size_t m = 0; m < total.size(); ++m) {
        double s = sec.chi_sum(static_cast<int>(m));
        out[m] = total[m] * s * s;
    }
    return out;
}

/// K'_{Sigma_j} + delta K as spatial multipliers.
std::vector<cplx> k_resect_spatial(const FlowContext& ctx, int jto,
                                   const std::vector<cplx>& kspat) {
    const LatticeSectorData& sec = ctx.sectors(jto);
    const TorusGrid& g = ctx.grid();
    std::vector<cplx> out(kspat.size());
    for (int m = 0; m < g.volume(); ++m) {
        auto c = g.coords(m);
        int msp = g.site(0, c[1], c[2]);
        double s = 0.0;
        for (std::size_t t = 0; t < sec.sector_count(); ++t)
            s += sec.chi_spatial(t, msp);
        out[m] = kspat[m] * s * s;
    }
    return out;
}

/// q_check((0,k)) per mode (k0 dropped, spatial part kept).
std::vector<cplx> spatial_slice(const TorusGrid& g, const std::vector<cplx>& f) {
    std::vector<cplx> out(f.size());
    for (int m = 0; m < g.volume(); ++m) {
        auto c = g.coords(m);
        out[m] = f[g.site(0, c[1], c[2])];
    }
    return out;
}



struct OmegaParts {
    GrassmannFunction w_prime;
    GrassmannFunction g_increment;       // w''(phi,0) - w''(0,0)
    GrassmannFunction g_free_increment;  // same with W = 0
};

OmegaParts omega_core(const FlowContext& ctx, const Quadruple& in,
                      const CountertermK& k) {
    const int j = in.j;
    const LatticeGeometry& geo = ctx.geo();
    TwoLeggedKernel uk = in.u(k);
    std::vector<cplx> ucheck = uk.empty()
                                   ? std::vector<cplx>(geo.volume(), 0.0)
                                   : uk.total_multiplier();
    auto cjk = cov_cj(geo, j, ucheck, k.kspat);
    auto cj = cov_single(geo, j, ucheck);
    auto dj = cov_dj(geo, j, ucheck, k.kspat);
    Pairing p_cjk = pairing_from_multiplier(ctx, in.labels, j, cjk);
    Pairing p_cj = pairing_from_multiplier(ctx, in.labels, j, cj);
    Pairing p_dj = pairing_from_multiplier(ctx, in.labels, j, dj);

    GrassmannFunction wk = in.w(k);
    AlgebraShape shape = in.labels.shape();
    GrassmannFunction jbil = in.source.bilinear(shape);

    auto integrate = [&](const GrassmannFunction& a) {
        GrassmannFunction expo = shift_psi_by_zeta(a);
        expo += jbil;
        GrassmannFunction integral = gaussian_integral_zeta(gr_exp(expo), p_cj);
        if (integral.scalar() == cplx(0.0))
            throw std::domain_error("omega step: vanishing partition scalar");
        GrassmannFunction t = gr_log(integral);
        GrassmannFunction wpp = gaussian_convolve(t, p_dj);
        wpp[0] = 0.0;
        return wpp;
    };

    GrassmannFunction a = wick_order(wk, p_cjk);
    GrassmannFunction wpp = integrate(a);
    GrassmannFunction phi_only = wpp.phi_part();

    OmegaParts parts;
    parts.w_prime = wpp;
    parts.w_prime -= phi_only;
    parts.g_increment = phi_only;

    GrassmannFunction wpp_free = integrate(GrassmannFunction(shape));
    parts.g_free_increment = wpp_free.phi_part();
    return parts;
}

}  // namespace

Quadruple omega_j_step(const FlowContext& ctx, const Quadruple& in) {
    auto prev = std::make_shared<Quadruple>(in);
    auto ctxp = &ctx;

    // single-slot cache: closures for w and g are usually evaluated at the
    // same K in sequence
    struct Cache {
        std::optional<std::vector<cplx>> key;
        OmegaParts parts;
    };
    auto cache = std::make_shared<Cache>();
    auto parts_at = [ctxp, prev, cache](const CountertermK& k) -> const OmegaParts& {
        if (!cache->key || *cache->key != k.kspat) {
            cache->parts = omega_core(*ctxp, *prev, k);
            cache->key = k.kspat;
        }
        return cache->parts;
    };

    Quadruple out = in;
    out.w = [parts_at](const CountertermK& k) { return parts_at(k).w_prime; };
    out.g = [parts_at, prev](const CountertermK& k) {
        GrassmannFunction g = prev->g(k);
        g += parts_at(k).g_increment;
        return g;
    };
    out.g_free = [parts_at, prev](const CountertermK& k) {
        GrassmannFunction g = prev->g_free(k);
        g += parts_at(k).g_free_increment;
        return g;
    };
    // u, du, p and F pass through unchanged
    return out;
}

// ---------------------------------------------------------------------------
// re-Wick fixed point

namespace {

EwickData ewick_fields(const FlowContext& ctx, const Quadruple& out_data,
                         const CountertermK& kprime, const TwoLeggedKernel& q) {
    const int j = out_data.j;
    const LatticeGeometry& geo = ctx.geo();
    const TorusGrid& g = ctx.grid();
    const int V = g.volume();

    std::vector<cplx> qtot = q.empty() ? std::vector<cplx>(V, 0.0)
                                       : q.total_multiplier();

    EwickData f;
    // delta K(k) = q((0,k)) nu^{(>=j+1)}((0,k))
    const auto& nu_sp = geo.nu_ge_spatial(j + 1);
    std::vector<cplx> q0k = spatial_slice(g, qtot);
    f.dk_spat.resize(V);
    for (int m = 0; m < V; ++m) f.dk_spat[m] = q0k[m] * nu_sp[m];

    // K(K';q) = K'_{Sigma_j} + delta K
    f.k_of = CountertermK{j, k_resect_spatial(ctx, j, kprime.kspat)};
    for (int m = 0; m < V; ++m) f.k_of.kspat[m] += f.dk_spat[m];

    TwoLeggedKernel u_of = out_data.u(f.k_of);
    std::vector<cplx> ucheck = u_of.empty() ? std::vector<cplx>(V, 0.0)
                                            : u_of.total_multiplier();

    // u'(K';q) = u(K(K';q))_{Sigma_{j+1}} + q_{Sigma_{j+1}} * nu^{(>=j+1)}
    std::vector<cplx> uprime = resect_multiplier(ctx, j + 1, ucheck);
    {
        std::vector<cplx> qres = resect_multiplier(ctx, j + 1, qtot);
        const auto& nu = geo.nu_ge(j + 1);
        for (int m = 0; m < V; ++m) uprime[m] += qres[m] * nu[m];
    }

    auto c_next = cov_cj(geo, j + 1, uprime, kprime.kspat);
    auto d_here = cov_dj(geo, j, ucheck, f.k_of.kspat);
    f.e_mult.resize(V);
    for (int m = 0; m < V; ++m) f.e_mult[m] = c_next[m] - d_here[m];
    return f;
}

GrassmannFunction convolve_with_e(const FlowContext& ctx, const Quadruple& out_data,
                                  const EwickData& f) {
    Pairing pe = pairing_from_multiplier(ctx, out_data.labels, out_data.j, f.e_mult);
    return gaussian_convolve(out_data.w(f.k_of), pe);
}

TwoLeggedKernel extract_q(const FlowContext& ctx, const Quadruple& out_data,
                          const GrassmannFunction& w_tilde) {
    SectorizedKernel block =
        extract_wmn(w_tilde, out_data.labels, ctx.grid(), 0, 2);
    return embed_two_legged(ctx, block, out_data.j).scaled(2.0);
}

}  // namespace

EwickData ewick_E(const FlowContext& ctx, const Quadruple& out_data,
                  const CountertermK& kprime, const TwoLeggedKernel& q) {
    return ewick_fields(ctx, out_data, kprime, q);
}

RewickResult rewick_fixpoint(const FlowContext& ctx, const Quadruple& out_data,
                             const CountertermK& kprime) {
    const int maxit = ctx.cfg().fix_maxit;
    const double tol = ctx.cfg().fix_tol;

    RewickResult res;
    TwoLeggedKernel q(ctx.grid(), out_data.j);
    FixpointTrace& tr = res.trace;
    int bad_ratios = 0;
    for (int n = 1; n <= maxit; ++n) {
        EwickData f = ewick_fields(ctx, out_data, kprime, q);
        GrassmannFunction wt = convolve_with_e(ctx, out_data, f);
        TwoLeggedKernel q_next = extract_q(ctx, out_data, wt);
        double dist = TwoLeggedKernel::multiplier_distance(q_next, q);
        tr.step_norms.push_back(dist);
        if (tr.step_norms.size() >= 2 && tr.step_norms[tr.step_norms.size() - 2] > 0)
            tr.ratios.push_back(dist / tr.step_norms[tr.step_norms.size() - 2]);
        if (!tr.ratios.empty() && tr.ratios.back() >= 1.0) {
            if (++bad_ratios >= 3)
                throw std::runtime_error(
                    "re-Wick iteration is not contracting (3 consecutive "
                    "non-decreasing steps)");
        } else {
            bad_ratios = 0;
        }
        q = q_next;
        tr.iterations = n;
        if (dist < tol) {
            tr.converged = true;
            break;
        }
    }
    // residual of the returned point and the fields at it
    EwickData f = ewick_fields(ctx, out_data, kprime, q);
    res.w_tilde = convolve_with_e(ctx, out_data, f);
    TwoLeggedKernel q_check = extract_q(ctx, out_data, res.w_tilde);
    tr.residual = TwoLeggedKernel::multiplier_distance(q_check, q);
    res.q_residual = q;
    res.q_residual += q_check.scaled(-1.0);
    res.q0 = q;
    res.dK = CountertermK{out_data.j, f.dk_spat};
    res.K_of = f.k_of;
    return res;
}

// ---------------------------------------------------------------------------
// the O_j step

namespace {

/// nu-convolution of a two-legged kernel: multiply every block.
TwoLeggedKernel conv_nu_kernel(const TwoLeggedKernel& u,
                               const std::vector<double>& nu) {
    return u.multiplied(nu);
}

}  // namespace

OjResult oj_step(const FlowContext& ctx, const Quadruple& out_data) {
    const int j = out_data.j;
    auto prev = std::make_shared<Quadruple>(out_data);
    auto ctxp = &ctx;

    // fixpoint at K' = 0, needed for p^{(j)} and the delta-u difference
    CountertermK zero = CountertermK::zero(ctx, j + 1);
    auto rw0 = std::make_shared<RewickResult>(rewick_fixpoint(ctx, out_data, zero));

    // p'^{(j)} = [delta u(dK(0))]_{Sigma_j} * nu^{(>=j)}
    //           + q0(0) * nu^{(>=j+1)} - [dK(0)_ext]_{Sigma_j} * nu^{(>=j)}
    const LatticeGeometry& geo = ctx.geo();
    TwoLeggedKernel p_new(ctx.grid(), j);
    {
        TwoLeggedKernel du_at = prev->du(rw0->dK);
        TwoLeggedKernel du_res = du_at.empty()
                                     ? TwoLeggedKernel(ctx.grid(), j)
                                     : du_at.resectorized(ctx.sectors(j));
        p_new += conv_nu_kernel(du_res, geo.nu_ge(j));
        p_new += conv_nu_kernel(rw0->q0, geo.nu_ge(j + 1));
        // dK(0)_ext resectorized at Sigma_j, times nu^{(>=j)}
        std::vector<cplx> dkext(geo.volume());
        const auto& nuj = geo.nu_ge(j);
        for (int m = 0; m < geo.volume(); ++m)
            dkext[m] = rw0->dK.kspat[m] * nuj[m];
        TwoLeggedKernel dk_kernel =
            TwoLeggedKernel::from_multiplier(ctx.sectors(j), dkext);
        p_new += dk_kernel.scaled(-1.0);
    }

    // single-slot cache over K'
    struct Cache {
        std::optional<std::vector<cplx>> key;
        RewickResult rw;
    };
    auto cache = std::make_shared<Cache>();
    auto rw_at = [ctxp, prev, cache, rw0](const CountertermK& kp) -> const RewickResult& {
        if (kp.is_zero()) return *rw0;
        if (!cache->key || *cache->key != kp.kspat) {
            cache->rw = rewick_fixpoint(*ctxp, *prev, kp);
            cache->key = kp.kspat;
        }
        return cache->rw;
    };

    GeneratorLabels labels_next = refine_labels(ctx, out_data.labels, j, j + 1);

    OjResult out;
    out.fix_at_zero = rw0->trace;
    out.p_new = p_new;
    out.ren = [rw_at](const CountertermK& kp) { return rw_at(kp).K_of; };

    Quadruple next;
    next.j = j + 1;
    next.labels = labels_next;
    next.source = involution_coupling(labels_next);
    next.p_list = out_data.p_list;
    next.p_list.push_back(p_new);
    next.f_list = out_data.f_list;

    next.w = [rw_at](const CountertermK& kp) {
        const RewickResult& rw = rw_at(kp);
        GrassmannFunction wpp = rw.w_tilde;
        GrassmannFunction phi_only = wpp.phi_part();
        wpp -= phi_only;
        GrassmannFunction quad = wpp.component(0, 2);
        wpp -= quad;  // the re-Wick subtraction: w''_{0,2} = 0 exactly
        return wpp;
    };
    next.g = [rw_at, prev](const CountertermK& kp) {
        const RewickResult& rw = rw_at(kp);
        GrassmannFunction g = prev->g(rw.K_of);
        GrassmannFunction phi_only = rw.w_tilde.phi_part();
        phi_only[0] = 0.0;  // w~(phi,0) - w~(0,0)
        g += phi_only;
        return g;
    };
    next.g_free = [rw_at, prev](const CountertermK& kp) {
        return prev->g_free(rw_at(kp).K_of);
    };
    next.u = [ctxp, prev, rw_at, j](const CountertermK& kp) {
        // u'(K') = u(K(K'))_{Sigma_{j+1}} + q0(K')_{Sigma_{j+1}} * nu^{(>=j+1)}
        const RewickResult& rw = rw_at(kp);
        const LatticeGeometry& geo = ctxp->geo();
        const int V = geo.volume();
        TwoLeggedKernel u_of = prev->u(rw.K_of);
        std::vector<cplx> ucheck = u_of.empty() ? std::vector<cplx>(V, 0.0)
                                                : u_of.total_multiplier();
        std::vector<cplx> acc = resect_multiplier(*ctxp, j + 1, ucheck);
        std::vector<cplx> qres =
            resect_multiplier(*ctxp, j + 1, rw.q0.empty()
                                                ? std::vector<cplx>(V, 0.0)
                                                : rw.q0.total_multiplier());
        const auto& nu = geo.nu_ge(j + 1);
        for (int m = 0; m < V; ++m) acc[m] += qres[m] * nu[m];
        return TwoLeggedKernel::from_multiplier(ctxp->sectors(j + 1), acc);
    };
    next.du = [ctxp, prev, rw_at, rw0, j](const CountertermK& kp) {
        // delta u'(K') = [delta u(K(L))_{Sigma_j} + q0(L)*nu^{(>=j+1)}
        //                - dK(L)_ext*nu^{(>=j)}] at L=K' minus at L=0
        const LatticeGeometry& geo = ctxp->geo();
        const int V = geo.volume();
        auto piece = [&](const RewickResult& rw) {
            std::vector<cplx> acc(V, 0.0);
            TwoLeggedKernel du_at = prev->du(rw.K_of);
            if (!du_at.empty()) {
                std::vector<cplx> tot =
                    resect_multiplier(*ctxp, j, du_at.total_multiplier());
                for (int m = 0; m < V; ++m) acc[m] += tot[m];
            }
            const auto& nu1 = geo.nu_ge(j + 1);
            const auto& nuj = geo.nu_ge(j);
            std::vector<cplx> qtot = rw.q0.empty() ? std::vector<cplx>(V, 0.0)
                                                   : rw.q0.total_multiplier();
            for (int m = 0; m < V; ++m)
                acc[m] += qtot[m] * nu1[m] - rw.dK.kspat[m] * nuj[m];
            return acc;
        };
        std::vector<cplx> v = piece(rw_at(kp));
        std::vector<cplx> v0 = piece(*rw0);
        for (int m = 0; m < V; ++m) v[m] -= v0[m];
        return TwoLeggedKernel::from_multiplier(ctxp->sectors(j), v);
    };
    out.next = std::move(next);
    return out;
}

// ---------------------------------------------------------------------------
// initialization

Quadruple init_j0(const FlowContext& ctx,
                  const std::function<GrassmannFunction(const GeneratorLabels&)>&
                      quartic_on_sample) {
    const int j0 = ctx.cfg().sp.j0;
    auto ctxp = &ctx;

    Quadruple q;
    q.j = j0;
    q.labels = default_sample(
        ctx, j0, ctx.cfg().sample_arc_fraction * ctx.curve().length());
    q.source = involution_coupling(q.labels);

    auto labels = q.labels;
    auto source = q.source;

    q.u = [ctxp, j0](const CountertermK& k) {
        std::vector<cplx> mult(ctxp->grid().volume());
        for (int m = 0; m < ctxp->grid().volume(); ++m) mult[m] = -k.kspat[m];
        return TwoLeggedKernel::from_multiplier(ctxp->sectors(j0), mult);
    };
    q.du = [ctxp, j0](const CountertermK&) {
        return TwoLeggedKernel(ctxp->grid(), j0 - 1);
    };

    struct Cache {
        std::optional<std::vector<cplx>> key;
        GrassmannFunction w, g, g_free;
    };
    auto cache = std::make_shared<Cache>();
    auto eval = [ctxp, labels, source, quartic_on_sample, j0,
                 cache](const CountertermK& k) -> const Cache& {
        if (cache->key && *cache->key == k.kspat) return *cache;
        std::vector<cplx> mult(ctxp->grid().volume());
        for (int m = 0; m < ctxp->grid().volume(); ++m) mult[m] = -k.kspat[m];
        TwoLeggedKernel uk =
            TwoLeggedKernel::from_multiplier(ctxp->sectors(j0), mult);
        std::vector<cplx> ucheck = uk.total_multiplier();
        auto cle = cov_le(ctxp->geo(), j0, ucheck);
        Pairing p = pairing_from_multiplier(*ctxp, labels, j0, cle);
        GrassmannFunction v = quartic_on_sample(labels);
        GrassmannFunction psi_part =
            omega_tilde(v, p, source, ZNormalization::PhiDependent, nullptr);
        GrassmannFunction phi_out;
        omega_tilde(v, p, source, ZNormalization::PhiDependent, &phi_out);
        phi_out[0] = 0.0;
        GrassmannFunction free_phi;
        omega_tilde(GrassmannFunction(labels.shape()), p, source,
                    ZNormalization::PhiDependent, &free_phi);
        free_phi[0] = 0.0;
        cache->w = psi_part;
        cache->g = phi_out;
        cache->g_free = free_phi;
        cache->key = k.kspat;
        return *cache;
    };
    q.w = [eval](const CountertermK& k) { return eval(k).w; };
    q.g = [eval](const CountertermK& k) { return eval(k).g; };
    q.g_free = [eval](const CountertermK& k) { return eval(k).g_free; };
    return q;
}

// ---------------------------------------------------------------------------
// driver

CountertermK FlowTrace::ren(const FlowContext& ctx, int i, int j,
                            const CountertermK& k) const {
    if (i > j) throw std::invalid_argument("ren: need i <= j");
    CountertermK cur = k;
    for (int l = j; l > i; --l) cur = ren_step[l - 1 - j0](cur);
    (void)ctx;
    return cur;
}

std::vector<cplx> FlowTrace::delta_e(const FlowContext& ctx, int j,
                                     const CountertermK& k) const {
    CountertermK base = ren(ctx, j0, j, k);
    return base.kspat;
}

FlowTrace recursion_driver(
    const FlowContext& ctx,
    const std::function<GrassmannFunction(const GeneratorLabels&)>& quartic,
    int jmax) {
    const int j0 = ctx.cfg().sp.j0;
    FlowTrace trace;
    trace.j0 = j0;

    Quadruple quad = init_j0(ctx, quartic);  // output data at j0
    trace.steps.push_back(FlowStep{j0, quad, {}, TwoLeggedKernel()});

    // F^{(2..j0)} vanish at initialization
    for (int i = 2; i <= j0; ++i)
        quad.f_list.push_back(SectorizedKernel(ctx.grid(), 0, 4, i));
    trace.steps.back().quad = quad;

    for (int j = j0; j < jmax; ++j) {
        OjResult oj = oj_step(ctx, quad);
        trace.ren_step.push_back(oj.ren);
        trace.steps.back().fix = oj.fix_at_zero;
        trace.steps.back().p_new = oj.p_new;
        Quadruple next_out = omega_j_step(ctx, oj.next);
        // close the quartic decomposition at K = 0: the remainder is
        // absorbed into the newest F block
        FDecomposition dec =
            f_decomposition(ctx, next_out, CountertermK::zero(ctx, j + 1));
        SectorizedKernel f_new = dec.delta_f;
        f_new.set_scale(j + 1);
        next_out.f_list.push_back(f_new);
        trace.steps.push_back(FlowStep{j + 1, next_out, {}, TwoLeggedKernel()});
        quad = trace.steps.back().quad;
    }
    return trace;
}

// ---------------------------------------------------------------------------
// quartic decomposition over the sample carrier

namespace {

/// Map between psi sample labels and the ladder carrier index
/// x = iota(position, a); positions are the distinct (site, sigma) pairs.
struct SampleCarrier {
    std::vector<std::pair<int, int>> positions;  // (site, sigma)
    int pos_of(const Leg& l) const {
        for (std::size_t i = 0; i < positions.size(); ++i)
            if (positions[i].first == l.site && positions[i].second == l.sigma)
                return static_cast<int>(i);
        return -1;
    }
    static SampleCarrier from_labels(const GeneratorLabels& labels) {
        SampleCarrier c;
        for (const Leg& l : labels.psi) {
            bool seen = false;
            for (const auto& p : c.positions)
                if (p.first == l.site && p.second == l.sigma) seen = true;
            if (!seen) c.positions.emplace_back(l.site, l.sigma);
        }
        return c;
    }
    int x_size() const { return 2 * static_cast<int>(positions.size()); }
};

/// Unsectorized covariance propagator over the carrier from a momentum
/// multiplier: pairs opposite creation bits, spin diagonal.
Propagator carrier_propagator(const FlowContext& ctx, const SampleCarrier& c,
                              const std::vector<cplx>& mult) {
    const TorusGrid& g = ctx.grid();
    auto cpos = [&](int site_a, int site_b) {
        int z = g.sub(site_a, site_b);
        cplx acc = 0.0;
        for (int k = 0; k < g.volume(); ++k)
            acc += std::polar(1.0, g.pairing(k, z)) * mult[k];
        return acc / g.total_volume();
    };
    Propagator out(c.x_size());
    for (std::size_t i = 0; i < c.positions.size(); ++i)
        for (std::size_t j = 0; j < c.positions.size(); ++j) {
            if (c.positions[i].second != c.positions[j].second) continue;
            cplx v = cpos(c.positions[i].first, c.positions[j].first);
            out.ref(iota(static_cast<int>(i), 0), iota(static_cast<int>(j), 1)) = v;
            out.ref(iota(static_cast<int>(i), 1), iota(static_cast<int>(j), 0)) =
                -cpos(c.positions[j].first, c.positions[i].first);
        }
    return out;
}

FourKernel four_from_sample(const FlowContext& ctx, const SectorizedKernel& f,
                            const GeneratorLabels& labels,
                            const SampleCarrier& c, int jto) {
    FourKernel out(c.x_size(),
                   static_cast<int>(ctx.sectors(jto).sector_count()));
    const int q = static_cast<int>(labels.psi.size());
    int jfrom = f.scale();
    for (int i1 = 0; i1 < q; ++i1)
        for (int i2 = 0; i2 < q; ++i2)
            for (int i3 = 0; i3 < q; ++i3)
                for (int i4 = 0; i4 < q; ++i4) {
                    LegTuple raw{labels.psi[i1], labels.psi[i2], labels.psi[i3],
                                 labels.psi[i4]};
                    cplx v = f.at(raw);
                    if (v == cplx(0.0)) continue;
                    auto zl = [&](const Leg& l) {
                        return ZLeg{iota(c.pos_of(l), l.a),
                                    ctx.refine_sector(jfrom, jto, l.sector)};
                    };
                    out.add(zl(raw[0]), zl(raw[1]), zl(raw[2]), zl(raw[3]), v);
                }
    return out;
}

SectorizedKernel sample_from_four(const FlowContext& ctx, const FourKernel& f,
                                  const SampleCarrier& c, int scale) {
    SectorizedKernel out(ctx.grid(), 0, 4, scale);
    for (const auto& [k, v] : f.entries()) {
        LegTuple t;
        for (int i = 0; i < 4; ++i) {
            int pos = ud_of(k[i].x);
            t.push_back(Leg{c.positions[pos].first, c.positions[pos].second,
                            b_of(k[i].x), k[i].s});
        }
        out.add(t, v);
    }
    return out;
}

}  // namespace

PHLadderState sample_iterated_ladder(const FlowContext& ctx, const Quadruple& q,
                                     int j_target) {
    SampleCarrier carrier = SampleCarrier::from_labels(q.labels);
    const LatticeGeometry& geo = ctx.geo();
    const int V = geo.volume();

    IterPhInputs in;
    in.ell_max = ctx.cfg().ell_max;
    in.x = MeasureSpace::counting(carrier.x_size());
    in.sector_count = [&ctx](int j) {
        return static_cast<int>(ctx.sectors(j).sector_count());
    };
    in.refine = [&ctx](int jfrom, int jto, int s) {
        return ctx.refine_sector(jfrom, jto, s);
    };
    in.f_input = [&](int i, int jto) {
        int idx = i - 2;
        if (idx < 0 || idx >= static_cast<int>(q.f_list.size()) ||
            q.f_list[idx].empty())
            return FourKernel(carrier.x_size(),
                              static_cast<int>(ctx.sectors(jto).sector_count()));
        return four_from_sample(ctx, q.f_list[idx], q.labels, carrier, jto);
    };
    in.covariances = [&](int j) {
        std::vector<cplx> u(V, 0.0);
        for (const auto& p : q.p_list) {
            if (p.empty() || p.scale() >= j) continue;
            std::vector<cplx> tot = p.total_multiplier();
            const LatticeSectorData& sec = ctx.sectors(j);
            for (int m = 0; m < V; ++m) {
                double cs = sec.chi_sum(m);
                u[m] += tot[m] * cs * cs;
            }
        }
        auto cj = cov_single(geo, j, u);
        auto cge = cov_ge(geo, j + 1, u);
        return std::make_pair(carrier_propagator(ctx, carrier, cj),
                              carrier_propagator(ctx, carrier, cge));
    };
    return iterated_ph_ladder(in, j_target);
}

FDecomposition f_decomposition(const FlowContext& ctx, const Quadruple& q,
                               const CountertermK& k) {
    SampleCarrier carrier = SampleCarrier::from_labels(q.labels);
    FDecomposition out;
    GrassmannFunction w = q.w(k);
    out.w04 = extract_wmn(w, q.labels, ctx.grid(), 0, 4);
    out.w04.set_scale(q.j);

    out.f_sum = SectorizedKernel(ctx.grid(), 0, 4, q.j);
    for (const auto& f : q.f_list) {
        if (f.empty()) continue;
        // resectorize by sector-label refinement to the current scale
        for (const auto& [legs, v] : f.entries()) {
            LegTuple t = legs;
            for (auto& l : t) l.sector = ctx.refine_sector(f.scale(), q.j, l.sector);
            out.f_sum.add(t, v);
        }
    }

    PHLadderState lad = sample_iterated_ladder(ctx, q, q.j + 1);
    out.ladder_term = SectorizedKernel(ctx.grid(), 0, 4, q.j);
    if (!lad.value.empty()) {
        FourKernel emb = antisymmetrize4(v_ph(lad.value)).scaled(1.0 / 8.0);
        out.ladder_term = sample_from_four(ctx, emb, carrier, q.j);
    }

    out.delta_f = out.w04;
    SectorizedKernel neg = out.f_sum.scaled(-1.0);
    out.delta_f += neg;
    neg = out.ladder_term.scaled(-1.0);
    out.delta_f += neg;
    out.delta_f.clear_small(1e-300);
    return out;
}

// ---------------------------------------------------------------------------
// audits

ProjectiveReport projective_audit(const FlowContext& ctx, const FlowTrace& trace) {
    ProjectiveReport rep;
    const int j0 = trace.j0;
    const int jtop = j0 + static_cast<int>(trace.ren_step.size());
    CountertermK k = CountertermK::zero(ctx, jtop);

    // composition: ren_{j0,jtop} vs ren_{j0,mid} o ren_{mid,jtop}
    for (int mid = j0; mid <= jtop; ++mid) {
        CountertermK once = trace.ren(ctx, j0, jtop, k);
        CountertermK stepped = trace.ren(ctx, j0, mid, trace.ren(ctx, mid, jtop, k));
        double d = 0.0;
        for (std::size_t m = 0; m < once.kspat.size(); ++m)
            d = std::max(d, std::abs(once.kspat[m] - stepped.kspat[m]));
        rep.composition_residual = std::max(rep.composition_residual, d);
    }
    // delta_e_i o ren_{i,j} = delta_e_j
    for (int i = j0; i <= jtop; ++i) {
        auto via_i = trace.delta_e(ctx, i, trace.ren(ctx, i, jtop, k));
        auto direct = trace.delta_e(ctx, jtop, k);
        double d = 0.0;
        for (std::size_t m = 0; m < direct.size(); ++m)
            d = std::max(d, std::abs(direct[m] - via_i[m]));
        rep.delta_e_residual = std::max(rep.delta_e_residual, d);
    }
    // Cauchy differences of delta_e_j(0)
    const KernelNormConfig& nc = ctx.cfg().norms;
    std::vector<std::vector<cplx>> de;
    for (int j = j0; j <= jtop; ++j)
        de.push_back(trace.delta_e(ctx, j, CountertermK::zero(ctx, j)));
    for (std::size_t s = 0; s + 1 < de.size(); ++s) {
        double d = 0.0;
        for (std::size_t m = 0; m < de[s].size(); ++m)
            d = std::max(d, std::abs(de[s + 1][m] - de[s][m]));
        rep.cauchy_differences.push_back(d);
        rep.envelope.push_back(std::pow(nc.lambda0, 1.0 - nc.upsilon) /
                               std::pow(2.0, static_cast<double>(j0 + s)));
    }
    return rep;
}

LemmaAuditReport lemma_audits(const FlowContext& ctx, const FlowTrace& trace) {
    LemmaAuditReport rep;
    const LatticeGeometry& geo = ctx.geo();
    const int V = geo.volume();

    for (const auto& step : trace.steps) {
        int j = step.j;
        CountertermK kz = CountertermK::zero(ctx, j);
        TwoLeggedKernel uk = step.quad.u(kz);
        std::vector<cplx> ucheck = uk.empty() ? std::vector<cplx>(V, 0.0)
                                              : uk.total_multiplier();
        const auto& nuj = geo.nu_ge(j);
        const auto& dress = geo.nu_ge(j + 2);
        double worst = 0.0;
        for (int m = 0; m < V; ++m) {
            if (nuj[m] <= 0.0) continue;
            double denom = std::hypot(geo.k0(m), geo.e(m));
            if (denom == 0.0) continue;
            double val = std::abs(ucheck[m] + kz.kspat[m] * dress[m]) / denom;
            worst = std::max(worst, val);
        }
        rep.scales.push_back(j);
        rep.dressing_ratio.push_back(worst);
        if (worst > rep.threshold) rep.dressing_ok = false;

        // covariance additivity: C_j = C^{(j)} + D_j pointwise
        auto cj = cov_cj(geo, j, ucheck, kz.kspat);
        auto cs = cov_single(geo, j, ucheck);
        auto dj = cov_dj(geo, j, ucheck, kz.kspat);
        for (int m = 0; m < V; ++m)
            rep.cj_additivity =
                std::max(rep.cj_additivity, std::abs(cj[m] - cs[m] - dj[m]));
    }

    // resectorization growth of an admissible counterterm fixture
    {
        int j = ctx.cfg().sp.j0 + 1;
        const ScaleParams& sp = ctx.cfg().sp;
        CountertermK fixture = CountertermK::from_profile(
            ctx, j, [&](double k1, double k2) {
                double e = ctx.dispersion()(k1, k2);
                return cplx(1e-8 * fermirg::nu_ge(j + 1, 0.0, e, sp));
            });
        NormSeries coarse = fixture.to_kernel(ctx)
                                .resectorized(ctx.sectors(j - 1))
                                .norm_1_sigma(ctx.cfg().shape);
        NormSeries fine = fixture.norm_1_sigma(ctx);
        if (!fine.constant_is_infinite() && fine.constant_term() > 0)
            rep.resect_ratio = coarse.constant_term() / fine.constant_term();
        rep.resect_geometry = sp.sector_length(j - 1) / sp.sector_length(j);
    }

    // infrared additivity with the flow's final u at K = 0
    {
        const auto& last = trace.steps.back();
        CountertermK kz = CountertermK::zero(ctx, last.j);
        TwoLeggedKernel uk = last.quad.u(kz);
        std::vector<cplx> ucheck = uk.empty() ? std::vector<cplx>(V, 0.0)
                                              : uk.total_multiplier();
        int j0 = ctx.cfg().sp.j0;
        int jbar = ctx.cfg().sp.jbar;
        auto cle = cov_le(geo, j0, ucheck);
        auto win = cov_window(geo, j0, jbar, jbar, ucheck);
        // C^{IR}: (U - nu^{(>=jbar)}) over the window-dressed denominator
        std::vector<double> numer(V);
        const auto& nub = geo.nu_ge(jbar);
        for (int m = 0; m < V; ++m) numer[m] = 1.0 - nub[m];
        std::vector<cplx> du(V, 0.0);
        for (int m = 0; m < V; ++m) du[m] = ucheck[m] * (1.0 - nub[m]);
        auto cir = guarded_ratio(geo, numer, dressed_denominator(geo, du, {}, 0));
        for (int m = 0; m < V; ++m)
            rep.ir_additivity =
                std::max(rep.ir_additivity, std::abs(cir[m] - cle[m] - win[m]));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// bound evaluation

namespace {

BoundLine compare_line(const std::string& name, const NormSeries& lhs,
                       const NormSeries& rhs) {
    BoundLine line;
    line.name = name;
    line.lhs0 = lhs.constant_is_infinite() ? -1.0 : lhs.constant_term();
    line.rhs0 = rhs.constant_is_infinite() ? -1.0 : rhs.constant_term();
    line.verdict = ns_leq(lhs, rhs) ? "PASS" : "FAIL";
    return line;
}

BoundLine exact_zero_line(const std::string& name, double value, double tol) {
    BoundLine line;
    line.name = name;
    line.lhs0 = value;
    line.rhs0 = tol;
    line.verdict = value <= tol ? "PASS" : "FAIL";
    return line;
}

}  // namespace

QuadrupleReport check_quadruple(const FlowContext& ctx, const Quadruple& q,
                                const CountertermK& k, DataMode mode) {
    QuadrupleReport rep;
    const RGConfig& cfg = ctx.cfg();
    const ScaleParams& sp = cfg.sp;
    const KernelNormConfig& nc = cfg.norms;
    const TruncationShape shape = cfg.shape;
    const int j = q.j;
    const double lj = sp.sector_length(j);
    const double mj = std::pow(sp.M, j);
    const std::size_t nsec = ctx.sectors(j).sector_count();

    NormSeries knorm = k.norm_1_sigma(ctx);
    NormSeries ej = ns_ej(j, sp.M, knorm);

    GrassmannFunction w = q.w(k);

    // structural zero blocks
    double wm0 = 0.0;
    for (int m = 0; m <= q.labels.shape().n_phi; ++m)
        wm0 = std::max(wm0, w.component(m, 0).max_abs());
    rep.lines.push_back(exact_zero_line("w_{m,0} = 0", wm0, 1e-13));
    if (mode == DataMode::Input) {
        rep.lines.push_back(exact_zero_line("w_{0,2} = 0 (input data)",
                                            w.component(0, 2).max_abs(), 1e-13));
    } else {
        SectorizedKernel w02 = extract_wmn(w, q.labels, ctx.grid(), 0, 2);
        NormSeries lhs = embed_two_legged(ctx, w02, j).norm_1_sigma(shape);
        NormSeries rhs = ej.scaled(std::pow(nc.lambda0, 1.0 - nc.upsilon) /
                                   std::pow(nc.alpha, 7) * lj / mj);
        rep.lines.push_back(compare_line("|w_{0,2}|_{1,S} bound", lhs, rhs));
    }

    // N_j bound with the mode-dependent alpha weight
    double alpha_used = (mode == DataMode::Input) ? 64.0 * nc.alpha : nc.alpha;
    KernelNormConfig nc_used = nc;
    nc_used.alpha = alpha_used;
    NormSeries njw =
        nj_norm(w, q.labels, ctx.grid(), j, sp, nc_used, knorm, shape, nsec);
    rep.lines.push_back(compare_line("N_j(w) <= e_j(|K|)", njw, ej));

    // G condition relative to the zero-interaction reference
    GrassmannFunction gdiff = q.g(k);
    gdiff -= q.g_free(k);
    double ng = n_norm(gdiff, nc);
    double gbound = 0.0;
    int top = (mode == DataMode::Input) ? j - 1 : j;
    for (int i = 2; i <= top; ++i)
        gbound += 4.0 / std::pow(sp.sector_length(i) * std::pow(sp.M, i), 0.25);
    BoundLine gline;
    gline.name = "N(G - free reference) accumulated bound";
    gline.lhs0 = ng;
    gline.rhs0 = gbound;
    gline.verdict = ng <= gbound ? "PASS" : "FAIL";
    rep.lines.push_back(gline);

    // F^{(i)} bounds
    for (std::size_t idx = 0; idx < q.f_list.size(); ++idx) {
        int i = 2 + static_cast<int>(idx);
        const SectorizedKernel& f = q.f_list[idx];
        NormSeries lhs = norm_p_sigma(f, 3, shape, nsec);
        double li = sp.sector_length(i);
        NormSeries rhs =
            ns_cj(i, sp.M, shape)
                .scaled(std::pow(nc.lambda0, 1.0 - nc.upsilon) /
                        std::pow(nc.alpha, 7) *
                        std::pow(li, 1.0 / cfg.n0_asym));
        rep.lines.push_back(
            compare_line("|F^{(" + std::to_string(i) + ")}|_{3,S} bound", lhs, rhs));
    }

    // derivative bound via central finite differences in a fixed direction
    {
        CountertermK dir = CountertermK::from_profile(
            ctx, j, [&](double k1, double k2) {
                double e = ctx.dispersion()(k1, k2);
                return cplx(0.5 * std::pow(nc.lambda0, 1.0 - nc.upsilon) * lj / mj *
                            fermirg::nu_ge(j + 1, 0.0, e, sp));
            });
        double h = 0.25;
        auto eval_n = [&](double s) {
            GrassmannFunction ws = q.w(k.plus_scaled(dir, s));
            return ws;
        };
        GrassmannFunction wp = eval_n(h);
        GrassmannFunction wm = eval_n(-h);
        wp -= wm;
        GrassmannFunction deriv = wp.scaled(1.0 / (2.0 * h));
        NormSeries nd = nj_norm(deriv, q.labels, ctx.grid(), j, sp, nc_used, knorm,
                                shape, nsec);
        NormSeries dirn = dir.norm_1_sigma(ctx);
        NormSeries rhs = (ej * dirn).scaled(mj);
        rep.lines.push_back(compare_line("N_j(dw/ds) derivative bound", nd, rhs));
    }

    return rep;
}

}  // namespace fermirg
