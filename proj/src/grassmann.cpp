#include "fermirg/grassmann.hpp"

#include <bit>
#include <cmath>

#include "json.hpp"

namespace fermirg {

namespace {

inline int parity_above(std::uint32_t mask, int idx) {
    // number of set bits above idx, mod 2
    return std::popcount(mask >> (idx + 1)) & 1;
}

inline int interleave_sign(std::uint32_t a, std::uint32_t b) {
    // sign to merge the ascending monomials of disjoint masks a, b into
    // one ascending monomial: parity of pairs (x in a, y in b) with x > y
    int par = 0;
    std::uint32_t bb = b;
    while (bb) {
        int y = std::countr_zero(bb);
        par ^= parity_above(a, y);
        bb &= bb - 1;
    }
    return par ? -1 : 1;
}

}  // namespace

bool GrassmannFunction::is_even() const {
    for (std::uint32_t m = 0; m < terms_.size(); ++m)
        if ((std::popcount(m) & 1) && terms_[m] != cplx(0.0)) return false;
    return true;
}

double GrassmannFunction::max_abs() const {
    double mx = 0.0;
    for (const auto& v : terms_) mx = std::max(mx, std::abs(v));
    return mx;
}

GrassmannFunction& GrassmannFunction::operator+=(const GrassmannFunction& o) {
    if (!(o.shape_ == shape_)) throw std::invalid_argument("generator mismatch");
    for (std::size_t i = 0; i < terms_.size(); ++i) terms_[i] += o.terms_[i];
    return *this;
}

GrassmannFunction& GrassmannFunction::operator-=(const GrassmannFunction& o) {
    if (!(o.shape_ == shape_)) throw std::invalid_argument("generator mismatch");
    for (std::size_t i = 0; i < terms_.size(); ++i) terms_[i] -= o.terms_[i];
    return *this;
}

GrassmannFunction GrassmannFunction::scaled(cplx c) const {
    GrassmannFunction out(shape_);
    for (std::size_t i = 0; i < terms_.size(); ++i) out.terms_[i] = c * terms_[i];
    return out;
}

GrassmannFunction GrassmannFunction::component(int dphi, int dpsi) const {
    GrassmannFunction out(shape_);
    std::uint32_t phi_mask = (std::uint32_t(1) << shape_.n_phi) - 1;
    std::uint32_t psi_mask = ((std::uint32_t(1) << shape_.n_psi) - 1)
                             << shape_.n_phi;
    for (std::uint32_t m = 0; m < terms_.size(); ++m) {
        if (terms_[m] == cplx(0.0)) continue;
        if (std::popcount(m & phi_mask) == dphi &&
            std::popcount(m & psi_mask) == dpsi && (m & ~(phi_mask | psi_mask)) == 0)
            out.terms_[m] = terms_[m];
    }
    return out;
}

GrassmannFunction GrassmannFunction::phi_part() const {
    GrassmannFunction out(shape_);
    std::uint32_t phi_mask = (std::uint32_t(1) << shape_.n_phi) - 1;
    for (std::uint32_t m = 0; m < terms_.size(); ++m)
        if ((m & ~phi_mask) == 0) out.terms_[m] = terms_[m];
    return out;
}

GrassmannFunction gr_mul(const GrassmannFunction& f, const GrassmannFunction& g) {
    if (!(f.shape() == g.shape()))
        throw std::invalid_argument("generator mismatch");
    GrassmannFunction out(f.shape());
    std::vector<std::pair<std::uint32_t, cplx>> fa, ga;
    for (std::uint32_t m = 0; m < f.term_count(); ++m)
        if (f.at(m) != cplx(0.0)) fa.emplace_back(m, f.at(m));
    for (std::uint32_t m = 0; m < g.term_count(); ++m)
        if (g.at(m) != cplx(0.0)) ga.emplace_back(m, g.at(m));

    // sparse pair loop when cheap, submask enumeration otherwise
    double pair_cost = static_cast<double>(fa.size()) * ga.size();
    double submask_cost = std::pow(3.0, f.shape().total());
    if (pair_cost <= submask_cost) {
        for (const auto& [ma, ca] : fa)
            for (const auto& [mb, cb] : ga) {
                if (ma & mb) continue;  // nilpotence
                out[ma | mb] +=
                    static_cast<double>(interleave_sign(ma, mb)) * ca * cb;
            }
        return out;
    }
    const std::uint32_t full = static_cast<std::uint32_t>(f.term_count() - 1);
    for (std::uint32_t s = 0; s <= full; ++s) {
        cplx acc = 0.0;
        std::uint32_t a = s;
        while (true) {
            cplx cf = f.at(a);
            if (cf != cplx(0.0)) {
                std::uint32_t b = s & ~a;
                cplx cg = g.at(b);
                if (cg != cplx(0.0))
                    acc += static_cast<double>(interleave_sign(a, b)) * cf * cg;
            }
            if (a == 0) break;
            a = (a - 1) & s;
        }
        out[s] = acc;
    }
    return out;
}

GrassmannFunction gr_exp(const GrassmannFunction& w) {
    cplx s = w.scalar();
    GrassmannFunction n = w;
    n[0] = 0.0;
    GrassmannFunction acc(w.shape());
    acc[0] = 1.0;
    GrassmannFunction power(w.shape());
    power[0] = 1.0;
    int kmax = w.shape().total();
    double fact = 1.0;
    for (int k = 1; k <= kmax; ++k) {
        power = gr_mul(power, n);
        fact *= k;
        if (power.max_abs() == 0.0) break;
        GrassmannFunction term = power.scaled(1.0 / fact);
        acc += term;
    }
    return acc.scaled(std::exp(s));
}

GrassmannFunction gr_log(const GrassmannFunction& g) {
    cplx c = g.scalar();
    if (c == cplx(0.0))
        throw std::domain_error("grassmann log: vanishing scalar part");
    GrassmannFunction n = g.scaled(1.0 / c);
    n[0] = 0.0;
    GrassmannFunction acc(g.shape());
    GrassmannFunction power(g.shape());
    power[0] = 1.0;
    int kmax = g.shape().total();
    for (int k = 1; k <= kmax; ++k) {
        power = gr_mul(power, n);
        if (power.max_abs() == 0.0) break;
        double sign = (k % 2 == 1) ? 1.0 : -1.0;
        acc += power.scaled(sign / k);
    }
    acc[0] += std::log(c);
    return acc;
}

Pairing Pairing::operator+(const Pairing& o) const {
    if (o.n != n) throw std::invalid_argument("pairing size mismatch");
    Pairing out = *this;
    for (std::size_t i = 0; i < c.size(); ++i) out.c[i] += o.c[i];
    return out;
}

Pairing Pairing::negated() const {
    Pairing out = *this;
    for (auto& v : out.c) v = -v;
    return out;
}

namespace {

/// Pfaffian values for every even submask of the zeta block, computed by
/// the first-row expansion.
std::vector<cplx> pfaffian_table(const AlgebraShape& shape, const Pairing& c) {
    const int q = shape.n_psi;
    const std::size_t size = std::size_t(1) << q;
    std::vector<cplx> pf(size, cplx(0.0));
    pf[0] = 1.0;
    for (std::uint32_t m = 1; m < size; ++m) {
        if (std::popcount(m) & 1) continue;
        int i = std::countr_zero(m);
        std::uint32_t rest = m & (m - 1);  // drop lowest bit
        cplx acc = 0.0;
        int pos = 1;  // position of j in the ordered element list (0-based after i)
        std::uint32_t jj = rest;
        while (jj) {
            int j = std::countr_zero(jj);
            double sign = (pos % 2 == 1) ? 1.0 : -1.0;  // (-1)^{pos+1}
            acc += sign * c.at(i, j) * pf[m & ~(1u << i) & ~(1u << j)];
            jj &= jj - 1;
            ++pos;
        }
        pf[m] = acc;
    }
    return pf;
}

}  // namespace

GrassmannFunction gaussian_integral_zeta(const GrassmannFunction& f,
                                         const Pairing& c) {
    const AlgebraShape& shape = f.shape();
    if (c.n != shape.n_psi) throw std::invalid_argument("pairing size mismatch");
    std::vector<cplx> pf = pfaffian_table(shape, c);
    const int zbase = shape.n_phi + shape.n_psi;
    const std::uint32_t zmask_all = ((std::uint32_t(1) << shape.n_psi) - 1) << zbase;
    GrassmannFunction out(shape);
    for (std::uint32_t m = 0; m < f.term_count(); ++m) {
        cplx v = f.at(m);
        if (v == cplx(0.0)) continue;
        std::uint32_t z = m & zmask_all;
        std::uint32_t spect = m & ~zmask_all;
        if (std::popcount(z) & 1) continue;  // odd zeta degree integrates to 0
        // move the zeta factors to the right of the spectators; they are
        // already above every spectator index, so the ascending monomial
        // is spect * zeta and no sign is needed.
        out[spect] += v * pf[z >> zbase];
    }
    return out;
}

GrassmannFunction shift_psi_by_zeta(const GrassmannFunction& f) {
    const AlgebraShape& shape = f.shape();
    GrassmannFunction out(shape);
    const int q = shape.n_psi;
    for (std::uint32_t m = 0; m < f.term_count(); ++m) {
        cplx v = f.at(m);
        if (v == cplx(0.0)) continue;
        // expand each psi factor into psi + zeta; process factors in
        // ascending order, appending with the interleave sign.
        std::vector<std::pair<std::uint32_t, cplx>> cur{{0u, v}};
        std::uint32_t mm = m;
        while (mm) {
            int idx = std::countr_zero(mm);
            mm &= mm - 1;
            bool is_psi = idx >= shape.n_phi && idx < shape.n_phi + q;
            std::vector<std::pair<std::uint32_t, cplx>> next;
            next.reserve(cur.size() * (is_psi ? 2 : 1));
            for (const auto& [mask, coeff] : cur) {
                double s1 = parity_above(mask, idx) ? -1.0 : 1.0;
                next.emplace_back(mask | (1u << idx), s1 * coeff);
                if (is_psi) {
                    int zidx = idx + q;
                    if (!(mask & (1u << zidx))) {
                        double s2 = parity_above(mask, zidx) ? -1.0 : 1.0;
                        next.emplace_back(mask | (1u << zidx), s2 * coeff);
                    }
                }
            }
            cur = std::move(next);
        }
        for (const auto& [mask, coeff] : cur) out[mask] += coeff;
    }
    return out;
}

GrassmannFunction gaussian_convolve(const GrassmannFunction& w, const Pairing& c) {
    return gaussian_integral_zeta(shift_psi_by_zeta(w), c);
}

GrassmannFunction SourceCoupling::bilinear(AlgebraShape shape) const {
    GrassmannFunction out(shape);
    for (const auto& t : terms) {
        int zi = shape.zeta(t.zeta_index);
        std::uint32_t mask = (1u << t.phi_index) | (1u << zi);
        // phi index < zeta index always; monomial phi*zeta is ascending
        out[mask] += t.weight;
    }
    return out;
}

GrassmannFunction omega_tilde(const GrassmannFunction& w, const Pairing& c,
                              const SourceCoupling& j, ZNormalization z,
                              GrassmannFunction* phi_out) {
    if (!w.is_even())
        throw std::invalid_argument("omega_tilde: interaction must be even");
    GrassmannFunction expo = shift_psi_by_zeta(w);
    expo += j.bilinear(w.shape());
    GrassmannFunction integrand = gr_exp(expo);
    GrassmannFunction integral = gaussian_integral_zeta(integrand, c);
    if (integral.scalar() == cplx(0.0))
        throw std::domain_error("omega_tilde: vanishing partition scalar");
    GrassmannFunction logv = gr_log(integral);
    if (z == ZNormalization::Scalar) {
        if (phi_out) {
            *phi_out = GrassmannFunction(w.shape());
            (*phi_out)[0] = logv.scalar();
        }
        logv[0] = 0.0;
        return logv;
    }
    GrassmannFunction phi_only = logv.phi_part();
    if (phi_out) *phi_out = phi_only;
    logv -= phi_only;
    return logv;
}

// ---------------------------------------------------------------------------
// extraction

namespace {
double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}
}  // namespace

SectorizedKernel extract_wmn(const GrassmannFunction& w,
                             const GeneratorLabels& labels, const TorusGrid& grid,
                             int m, int n) {
    const AlgebraShape shape = w.shape();
    if (!(labels.shape() == shape))
        throw std::invalid_argument("extract: labels do not match the algebra");
    SectorizedKernel out(grid, m, n);
    GrassmannFunction block = w.component(m, n);
    double norm = factorial(m) * factorial(n);
    // sample tuples that are torus translates of one another land on the
    // same orbit; average them instead of accumulating
    std::map<LegTuple, std::pair<cplx, int>> orbit_acc;
    for (std::uint32_t mask = 0; mask < block.term_count(); ++mask) {
        cplx v = block.at(mask);
        if (v == cplx(0.0)) continue;
        LegTuple legs;
        std::uint32_t mm = mask;
        while (mm) {
            int idx = std::countr_zero(mm);
            mm &= mm - 1;
            if (idx < shape.n_phi)
                legs.push_back(labels.phi[idx]);
            else
                legs.push_back(labels.psi[idx - shape.n_phi]);
        }
        // sorted-tuple value: v / (m! n!); antisymmetric extension over
        // separate external and internal permutations
        cplx base = v / norm;
        std::vector<int> ext_idx(m), int_idx(n);
        for (int i = 0; i < m; ++i) ext_idx[i] = i;
        for (int i = 0; i < n; ++i) int_idx[i] = m + i;
        std::vector<std::vector<int>> eperms, iperms;
        {
            std::vector<int> p(m);
            for (int i = 0; i < m; ++i) p[i] = i;
            do eperms.push_back(p);
            while (std::next_permutation(p.begin(), p.end()));
        }
        {
            std::vector<int> p(n);
            for (int i = 0; i < n; ++i) p[i] = i;
            do iperms.push_back(p);
            while (std::next_permutation(p.begin(), p.end()));
        }
        auto sign_of = [](const std::vector<int>& p) {
            int s = 1;
            for (std::size_t i = 0; i < p.size(); ++i)
                for (std::size_t k = i + 1; k < p.size(); ++k)
                    if (p[i] > p[k]) s = -s;
            return s;
        };
        for (const auto& ep : eperms)
            for (const auto& ip : iperms) {
                LegTuple t(m + n);
                for (int i = 0; i < m; ++i) t[i] = legs[ep[i]];
                for (int i = 0; i < n; ++i) t[m + i] = legs[m + ip[i]];
                auto& slot = orbit_acc[out.to_representative(t)];
                slot.first += static_cast<double>(sign_of(ep) * sign_of(ip)) * base;
                slot.second += 1;
            }
    }
    for (const auto& [rep, acc] : orbit_acc)
        out.add(rep, acc.first / static_cast<double>(acc.second));
    out.clear_small(0.0);
    return out;
}

GrassmannFunction rebuild_wmn(const SectorizedKernel& f,
                              const GeneratorLabels& labels) {
    AlgebraShape shape = labels.shape();
    GrassmannFunction out(shape);
    const int m = f.external_count(), n = f.internal_count();
    double norm = factorial(m) * factorial(n);
    // enumerate sorted generator tuples and read the kernel there
    for (std::uint32_t mask = 0; mask < out.term_count(); ++mask) {
        std::uint32_t phi_mask = (std::uint32_t(1) << shape.n_phi) - 1;
        std::uint32_t psi_mask = ((std::uint32_t(1) << shape.n_psi) - 1)
                                 << shape.n_phi;
        if (std::popcount(mask & phi_mask) != m ||
            std::popcount(mask & psi_mask) != n || (mask & ~(phi_mask | psi_mask)))
            continue;
        LegTuple legs;
        std::uint32_t mm = mask;
        while (mm) {
            int idx = std::countr_zero(mm);
            mm &= mm - 1;
            if (idx < shape.n_phi)
                legs.push_back(labels.phi[idx]);
            else
                legs.push_back(labels.psi[idx - shape.n_phi]);
        }
        out[mask] = norm * f.at(legs);
    }
    return out;
}

NormSeries nj_norm(const GrassmannFunction& w, const GeneratorLabels& labels,
                   const TorusGrid& grid, int j, const ScaleParams& sp,
                   const KernelNormConfig& cfg, const NormSeries& X,
                   TruncationShape shape, std::size_t sector_count) {
    const double lj = sp.sector_length(j);
    const double Mj = std::pow(sp.M, j);
    NormSeries acc(shape);
    const AlgebraShape ash = w.shape();
    for (int m = 0; m <= ash.n_phi; ++m)
        for (int n = 0; n <= ash.n_psi; ++n) {
            if (m == 0 && n == 0) continue;
            GrassmannFunction block = w.component(m, n);
            if (block.max_abs() == 0.0) continue;
            SectorizedKernel k = extract_wmn(w, labels, grid, m, n);
            NormSeries nk = norm_j(k, j, sp, cfg, shape, sector_count);
            double weight = std::pow(cfg.alpha, n) *
                            std::pow(lj * cfg.B_const / Mj, 0.5 * n);
            acc = acc + nk.scaled(weight);
        }
    return (ns_ej(j, sp.M, X) * acc).scaled(Mj * Mj / lj);
}

double n_norm(const GrassmannFunction& g, const KernelNormConfig& cfg) {
    const AlgebraShape shape = g.shape();
    double acc = 0.0;
    for (int m = 1; m <= shape.n_phi; ++m) {
        GrassmannFunction block = g.component(m, 0);
        double sup = 0.0;
        double fact = factorial(m);
        for (std::uint32_t mask = 0; mask < block.term_count(); ++mask)
            sup = std::max(sup, std::abs(block.at(mask)) / fact);
        if (sup == 0.0) continue;
        double expo = (1.0 - cfg.upsilon) * std::max(m - 2, 2) / 2.0;
        acc += std::pow(cfg.lambda0, -expo) * sup;
    }
    return acc;
}

// ---------------------------------------------------------------------------
// JSON

std::string grassmann_to_json(const GrassmannFunction& w,
                              const GeneratorLabels& labels) {
    nlohmann::json j;
    auto leg_json = [](const Leg& l) {
        return nlohmann::json{{"site", l.site}, {"sigma", l.sigma}, {"a", l.a},
                              {"sector", l.sector}};
    };
    j["phi"] = nlohmann::json::array();
    for (const auto& l : labels.phi) j["phi"].push_back(leg_json(l));
    j["psi"] = nlohmann::json::array();
    for (const auto& l : labels.psi) j["psi"].push_back(leg_json(l));
    auto terms = nlohmann::json::array();
    for (std::uint32_t mask = 0; mask < w.term_count(); ++mask) {
        cplx v = w.at(mask);
        if (v == cplx(0.0)) continue;
        terms.push_back({{"mask", mask}, {"re", v.real()}, {"im", v.imag()}});
    }
    j["terms"] = terms;
    return j.dump();
}

GrassmannFunction grassmann_from_json(const std::string& text,
                                      GeneratorLabels* labels_out) {
    nlohmann::json j = nlohmann::json::parse(text);
    GeneratorLabels labels;
    auto leg_from = [](const nlohmann::json& e) {
        return Leg{e.at("site").get<int>(), e.at("sigma").get<int>(),
                   e.at("a").get<int>(), e.at("sector").get<int>()};
    };
    for (const auto& e : j.at("phi")) labels.phi.push_back(leg_from(e));
    for (const auto& e : j.at("psi")) labels.psi.push_back(leg_from(e));
    GrassmannFunction w(labels.shape());
    for (const auto& e : j.at("terms"))
        w[e.at("mask").get<std::uint32_t>()] =
            cplx(e.at("re").get<double>(), e.at("im").get<double>());
    if (labels_out) *labels_out = labels;
    return w;
}

}  // namespace fermirg
