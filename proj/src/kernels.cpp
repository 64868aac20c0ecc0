#include "fermirg/kernels.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace fermirg {

// ---------------------------------------------------------------------------
// LatticeSectorData

LatticeSectorData::LatticeSectorData(const TorusGrid& grid, const Dispersion& disp,
                                     const FermiCurve& curve,
                                     const Sectorization& sec,
                                     const ScaleParams& sp)
    : grid_(grid), sec_(sec) {
    const int V = grid.volume();
    chi_.assign(sec.size(), std::vector<double>(V, 0.0));
    chi_spatial_.assign(sec.size(), std::vector<double>(V, 0.0));
    const double radius = neighbourhood_radius(sec.scale(), sp);
    for (int mode = 0; mode < V; ++mode) {
        auto k = grid.momentum(mode);
        Vec2 ks{k[1], k[2]};
        double e = disp(ks);
        double rad = smooth_plateau(std::hypot(k[0], e), radius, 2.0 * radius);
        double rad_sp = smooth_plateau(std::abs(e), radius, 2.0 * radius);
        if (rad == 0.0 && rad_sp == 0.0) continue;
        double t = curve.project_arc(ks);  // one projection per mode
        for (std::size_t s = 0; s < sec.size(); ++s) {
            double prof = sec.arc_profile(s, t);
            if (prof == 0.0) continue;
            chi_[s][mode] = prof * rad;
            chi_spatial_[s][mode] = prof * rad_sp;
        }
    }
}

double LatticeSectorData::chi_sum(int mode) const {
    double acc = 0.0;
    for (const auto& c : chi_) acc += c[mode];
    return acc;
}

bool LatticeSectorData::sectors_intersect(std::size_t s, std::size_t t) const {
    double L = sec_.curve_length();
    double d = std::fmod(std::abs(sec_.sector(s).center - sec_.sector(t).center), L);
    d = std::min(d, L - d);
    return d <= sec_.sector_length() + 1e-12;
}

// ---------------------------------------------------------------------------
// SectorizedKernel

LegTuple SectorizedKernel::to_representative(LegTuple legs) const {
    if (legs.empty()) return legs;
    int base = legs[0].site;
    for (auto& l : legs) l.site = grid_.sub(l.site, base);
    return legs;
}

void SectorizedKernel::add(const LegTuple& legs, cplx value) {
    if (static_cast<int>(legs.size()) != m_ + n_)
        throw std::invalid_argument("kernel: wrong leg count");
    if (value == cplx(0.0)) return;
    LegTuple rep = to_representative(legs);
    auto [it, inserted] = data_.try_emplace(std::move(rep), value);
    if (!inserted) {
        it->second += value;
        if (std::abs(it->second) == 0.0) data_.erase(it);
    }
}

cplx SectorizedKernel::at(const LegTuple& legs) const {
    LegTuple rep = to_representative(legs);
    auto it = data_.find(rep);
    return it == data_.end() ? cplx(0.0) : it->second;
}

void SectorizedKernel::clear_small(double eps) {
    for (auto it = data_.begin(); it != data_.end();) {
        if (std::abs(it->second) <= eps)
            it = data_.erase(it);
        else
            ++it;
    }
}

SectorizedKernel& SectorizedKernel::operator+=(const SectorizedKernel& other) {
    if (other.m_ != m_ || other.n_ != n_)
        throw std::invalid_argument("kernel: arity mismatch in +=");
    for (const auto& [k, v] : other.data_) add(k, v);
    return *this;
}

SectorizedKernel SectorizedKernel::scaled(cplx c) const {
    SectorizedKernel out(grid_, m_, n_, scale_);
    if (c == cplx(0.0)) return out;
    for (const auto& [k, v] : data_) out.data_[k] = c * v;
    return out;
}

double SectorizedKernel::max_abs() const {
    double m = 0.0;
    for (const auto& [k, v] : data_) m = std::max(m, std::abs(v));
    return m;
}

// ---------------------------------------------------------------------------
// Fourier

int signed_mode_sum(const TorusGrid& g, const std::vector<MomLeg>& moms) {
    int acc = 0;  // the zero mode
    for (const auto& m : moms) {
        if (m.a == 0)
            acc = g.add(acc, m.mode);
        else
            acc = g.sub(acc, m.mode);
    }
    return acc;
}

cplx fourier_eval(const SectorizedKernel& f, const std::vector<MomLeg>& moms) {
    if (static_cast<int>(moms.size()) != f.legs())
        throw std::invalid_argument("fourier_eval: wrong momentum count");
    const TorusGrid& g = f.grid();
    if (signed_mode_sum(g, moms) != 0) return 0.0;
    const double cell = g.cell();
    double weight = std::pow(cell, f.legs() - 1);
    cplx acc = 0.0;
    for (const auto& [legs, coeff] : f.entries()) {
        cplx phase = 1.0;
        bool match = true;
        for (std::size_t i = 0; i < legs.size(); ++i) {
            const Leg& l = legs[i];
            const MomLeg& m = moms[i];
            if (l.sigma != m.sigma || l.a != m.a ||
                (m.sector >= 0 && l.sector != m.sector)) {
                match = false;
                break;
            }
            double ph = g.pairing(m.mode, l.site);
            if (l.a == 1) ph = -ph;
            phase *= std::polar(1.0, ph);
        }
        if (match) acc += coeff * phase;
    }
    return acc * weight;
}

std::vector<cplx> check_u(const SectorizedKernel& f) {
    if (f.legs() != 2 || f.external_count() != 0)
        throw std::invalid_argument("check_u: needs a two-legged internal kernel");
    const TorusGrid& g = f.grid();
    std::vector<cplx> out(g.volume(), 0.0);
    for (int mode = 0; mode < g.volume(); ++mode) {
        // spin-diagonal value and the off-diagonal defect
        cplx diag = fourier_eval(f, {MomLeg{mode, 0, 1, -1}, MomLeg{mode, 0, 0, -1}});
        diag += fourier_eval(f, {MomLeg{mode, 1, 1, -1}, MomLeg{mode, 1, 0, -1}});
        cplx off = fourier_eval(f, {MomLeg{mode, 0, 1, -1}, MomLeg{mode, 1, 0, -1}});
        off += fourier_eval(f, {MomLeg{mode, 1, 1, -1}, MomLeg{mode, 0, 0, -1}});
        if (std::abs(off) > 1e-12)
            throw std::runtime_error("check_u: spin dependence detected");
        out[mode] = 0.5 * diag;
    }
    return out;
}

std::string kernel_to_json(const SectorizedKernel& f) {
    nlohmann::json j;
    const TorusGrid& g = f.grid();
    j["header"] = {{"scale", f.scale()},
                   {"m", f.external_count()},
                   {"n", f.internal_count()},
                   {"grid", {{"n0", g.n0}, {"n1", g.n1}, {"n2", g.n2},
                             {"a0", g.a0}, {"a1", g.a1}, {"a2", g.a2}}}};
    auto rows = nlohmann::json::array();
    for (const auto& [legs, coeff] : f.entries()) {
        nlohmann::json key = nlohmann::json::array();
        for (const Leg& l : legs) key.push_back({l.site, l.sigma, l.a, l.sector});
        rows.push_back({{"orbit", key}, {"re", coeff.real()}, {"im", coeff.imag()}});
    }
    j["coefficients"] = rows;
    return j.dump();
}

SectorizedKernel kernel_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    const auto& h = j.at("header");
    const auto& gg = h.at("grid");
    TorusGrid g{gg.at("n0").get<int>(), gg.at("n1").get<int>(), gg.at("n2").get<int>(),
                gg.at("a0").get<double>(), gg.at("a1").get<double>(),
                gg.at("a2").get<double>()};
    SectorizedKernel f(g, h.at("m").get<int>(), h.at("n").get<int>(),
                       h.at("scale").get<int>());
    for (const auto& row : j.at("coefficients")) {
        LegTuple legs;
        for (const auto& e : row.at("orbit"))
            legs.push_back(Leg{e[0].get<int>(), e[1].get<int>(), e[2].get<int>(),
                               e[3].get<int>()});
        f.add(legs, cplx(row.at("re").get<double>(), row.at("im").get<double>()));
    }
    return f;
}

// ---------------------------------------------------------------------------
// decay operators

SectorizedKernel decay_apply(const std::vector<DecayFactor>& spec,
                             const SectorizedKernel& f) {
    for (const auto& d : spec) {
        if (d.u == d.v) throw std::invalid_argument("decay operator: u == v");
        if (d.u < 0 || d.v < 0 || d.u >= f.legs() || d.v >= f.legs())
            throw std::invalid_argument("decay operator: leg out of range");
    }
    SectorizedKernel out(f.grid(), f.external_count(), f.internal_count(),
                         f.scale());
    for (const auto& [legs, coeff] : f.entries()) {
        double w = 1.0;
        for (const auto& d : spec) {
            auto disp = f.grid().displacement(
                f.grid().sub(legs[d.u].site, legs[d.v].site));
            w *= std::pow(disp[0], d.delta.d0) * std::pow(disp[1], d.delta.d1) *
                 std::pow(disp[2], d.delta.d2);
        }
        if (w != 0.0) out.add(legs, coeff * w);
    }
    return out;
}

// ---------------------------------------------------------------------------
// norms

void KernelNormConfig::validate() const {
    if (!(lambda0 > 0.0 && lambda0 < 1.0))
        throw std::invalid_argument("norm config: lambda0 must lie in (0,1)");
    if (!(upsilon > 0.0 && upsilon < 0.25))
        throw std::invalid_argument("norm config: upsilon must lie in (0,1/4)");
    if (!(B_const > 0.0)) throw std::invalid_argument("norm config: B must be > 0");
    if (!(alpha > 0.0)) throw std::invalid_argument("norm config: alpha must be > 0");
}

double KernelNormConfig::rho(int m, int n) const {
    double expo = (1.0 - upsilon) * std::max(m + n - 2, 2) / 2.0;
    return std::pow(lambda0, -expo);
}

double KernelNormConfig::rho_scaled(int m, int n, double lj, double Mj) const {
    double r = rho(m, n);
    if (m > 0) r *= std::pow(lj * Mj, 0.25);
    return r;
}

namespace {

// key for grouping entries: packed labels of selected legs
std::vector<int> label_key(const LegTuple& legs, const std::vector<int>& slots,
                           bool with_site) {
    std::vector<int> key;
    key.reserve(slots.size() * 4);
    for (int s : slots) {
        if (with_site) key.push_back(legs[s].site);
        key.push_back(legs[s].sigma);
        key.push_back(legs[s].a);
        key.push_back(legs[s].sector);
    }
    return key;
}

double scalar_l1linf_m0(const SectorizedKernel& f) {
    // max over pinned slot and its label of the weighted absolute sum
    const int N = f.legs();
    const double w = std::pow(f.grid().cell(), N - 1);
    double best = 0.0;
    for (int j0 = 0; j0 < N; ++j0) {
        std::map<std::vector<int>, double> groups;
        for (const auto& [legs, coeff] : f.entries())
            groups[label_key(legs, {j0}, false)] += std::abs(coeff);
        for (const auto& [k, v] : groups) best = std::max(best, w * v);
    }
    return best;
}

double scalar_l1linf_ext(const SectorizedKernel& f) {
    // sup over external variables, integral over internal ones
    const int m = f.external_count();
    const double w = std::pow(f.grid().cell(), f.internal_count());
    std::vector<int> ext(m);
    for (int i = 0; i < m; ++i) ext[i] = i;
    std::map<std::vector<int>, double> groups;
    for (const auto& [legs, coeff] : f.entries())
        groups[label_key(legs, ext, true)] += std::abs(coeff);
    double best = 0.0;
    for (const auto& [k, v] : groups) best = std::max(best, w * v);
    return best;
}

// all ways to write `total` as an ordered sum of `parts` nonnegative ints
void compositions(int total, int parts, std::vector<int>& cur,
                  std::vector<std::vector<int>>& out) {
    if (parts == 1) {
        cur.push_back(total);
        out.push_back(cur);
        cur.pop_back();
        return;
    }
    for (int h = 0; h <= total; ++h) {
        cur.push_back(h);
        compositions(total - h, parts - 1, cur, out);
        cur.pop_back();
    }
}

}  // namespace

double norm_l1linf(const SectorizedKernel& f) {
    if (f.legs() == 0) throw std::invalid_argument("norm: kernel has no legs");
    if (f.empty()) return 0.0;
    return f.external_count() == 0 ? scalar_l1linf_m0(f) : scalar_l1linf_ext(f);
}

NormSeries norm_deriv_l1linf(const SectorizedKernel& f, TruncationShape shape) {
    NormSeries out(shape);
    if (f.external_count() != 0) {
        // the derivative structure applies only to purely internal kernels
        out.set({0, 0, 0}, NormCoeff::finite(f.empty() ? 0.0 : norm_l1linf(f)));
        return out;
    }
    if (f.empty()) return out;

    const int N = f.legs();
    std::vector<std::pair<int, int>> pairs;
    for (int u = 0; u < N; ++u)
        for (int v = u + 1; v < N; ++v) pairs.emplace_back(u, v);
    const int P = static_cast<int>(pairs.size());

    for (MultiIndex d : shape.tracked()) {
        if (d.total_order() == 0) {
            out.set(d, NormCoeff::finite(norm_l1linf(f)));
            continue;
        }
        // distribute every component of d over the leg pairs
        std::vector<std::vector<int>> c0, c1, c2;
        std::vector<int> scratch;
        compositions(d.d0, P, scratch, c0);
        compositions(d.d1, P, scratch, c1);
        compositions(d.d2, P, scratch, c2);
        double best = 0.0;
        for (const auto& a0 : c0)
            for (const auto& a1 : c1)
                for (const auto& a2 : c2) {
                    std::vector<DecayFactor> spec;
                    for (int p = 0; p < P; ++p) {
                        MultiIndex dd{a0[p], a1[p], a2[p]};
                        if (dd.total_order() == 0) continue;
                        spec.push_back({dd, pairs[p].first, pairs[p].second});
                    }
                    best = std::max(best, norm_l1linf(decay_apply(spec, f)));
                }
        double fact = 1.0;
        for (int i = 2; i <= d.d0; ++i) fact *= i;
        for (int i = 2; i <= d.d1; ++i) fact *= i;
        for (int i = 2; i <= d.d2; ++i) fact *= i;
        out.set(d, NormCoeff::finite(best / fact));
    }
    return out;
}

namespace {

// enumerate d0 < d1 < ... combinations of slot indices
void combinations(int n, int p, int start, std::vector<int>& cur,
                  std::vector<std::vector<int>>& out) {
    if (static_cast<int>(cur.size()) == p) {
        out.push_back(cur);
        return;
    }
    for (int i = start; i < n; ++i) {
        cur.push_back(i);
        combinations(n, p, i + 1, cur, out);
        cur.pop_back();
    }
}

SectorizedKernel subkernel(const SectorizedKernel& f,
                           const std::map<LegTuple, cplx>& entries) {
    SectorizedKernel out(f.grid(), f.external_count(), f.internal_count(),
                         f.scale());
    for (const auto& [k, v] : entries) out.add(k, v);
    return out;
}

}  // namespace

NormSeries norm_p_sigma(const SectorizedKernel& f, int p, TruncationShape shape,
                        std::size_t /*sector_count*/) {
    NormSeries zero(shape);
    const int m = f.external_count(), n = f.internal_count();
    if (p <= 0) throw std::invalid_argument("norm_p_sigma: p must be positive");
    if ((m >= 1 && p >= 2) || (m == 0 && p > n)) return zero;
    if (f.empty()) return zero;

    // split entries by full internal sector assignment
    std::map<std::vector<int>, std::map<LegTuple, cplx>> blocks;
    for (const auto& [legs, coeff] : f.entries()) {
        std::vector<int> secs(n);
        for (int i = 0; i < n; ++i) secs[i] = legs[m + i].sector;
        blocks[secs][legs] = coeff;
    }

    if (m >= 1) {
        // p = 1: plain sum over all sector assignments
        NormSeries acc(shape);
        for (const auto& [secs, entries] : blocks)
            acc = acc + norm_deriv_l1linf(subkernel(f, entries), shape);
        return acc;
    }

    // m = 0: max over p pinned slots and their sectors, sum over the rest
    std::vector<std::vector<int>> slot_choices;
    std::vector<int> cur;
    combinations(n, p, 0, cur, slot_choices);

    // cache per-block norms
    std::vector<std::pair<std::vector<int>, NormSeries>> block_norms;
    block_norms.reserve(blocks.size());
    for (const auto& [secs, entries] : blocks)
        block_norms.emplace_back(secs, norm_deriv_l1linf(subkernel(f, entries), shape));

    NormSeries best(shape);
    for (const auto& slots : slot_choices) {
        std::map<std::vector<int>, NormSeries> sums;
        for (const auto& [secs, ns] : block_norms) {
            std::vector<int> pinned(slots.size());
            for (std::size_t i = 0; i < slots.size(); ++i) pinned[i] = secs[slots[i]];
            auto it = sums.find(pinned);
            if (it == sums.end())
                sums.emplace(pinned, ns);
            else
                it->second = it->second + ns;
        }
        for (const auto& [pinned, ns] : sums) best = ns_max(best, ns);
    }
    return best;
}

NormSeries norm_j(const SectorizedKernel& f, int j, const ScaleParams& sp,
                  const KernelNormConfig& cfg, TruncationShape shape,
                  std::size_t sector_count) {
    const int m = f.external_count(), n = f.internal_count();
    const double lj = sp.sector_length(j);
    const double Mj = std::pow(sp.M, j);
    const double rho = cfg.rho_scaled(m, n, lj, Mj);
    if (m == 0) {
        NormSeries acc = norm_p_sigma(f, 1, shape, sector_count);
        acc = acc + norm_p_sigma(f, 3, shape, sector_count).scaled(1.0 / lj);
        acc = acc + norm_p_sigma(f, 5, shape, sector_count).scaled(1.0 / (lj * lj));
        return acc.scaled(rho);
    }
    return norm_p_sigma(f, 1, shape, sector_count).scaled(rho * lj / (Mj * Mj));
}

// ---------------------------------------------------------------------------
// antisymmetrization

namespace {
void permutations(int n, std::vector<std::vector<int>>& out) {
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    do out.push_back(idx);
    while (std::next_permutation(idx.begin(), idx.end()));
}

int perm_sign(const std::vector<int>& p) {
    int sign = 1;
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = i + 1; j < p.size(); ++j)
            if (p[i] > p[j]) sign = -sign;
    return sign;
}
}  // namespace

SectorizedKernel antisymmetrize(const SectorizedKernel& f, AntiMode mode) {
    const int m = f.external_count(), n = f.internal_count();
    SectorizedKernel out(f.grid(), m, n, f.scale());

    auto apply = [&](const std::vector<int>& slots) {
        std::vector<std::vector<int>> perms;
        permutations(static_cast<int>(slots.size()), perms);
        double norm = 1.0 / perms.size();
        for (const auto& [legs, coeff] : f.entries()) {
            for (const auto& pi : perms) {
                LegTuple t = legs;
                for (std::size_t i = 0; i < slots.size(); ++i)
                    t[slots[i]] = legs[slots[pi[i]]];
                out.add(t, static_cast<double>(perm_sign(pi)) * norm * coeff);
            }
        }
    };

    std::vector<int> slots;
    switch (mode) {
        case AntiMode::External:
            for (int i = 0; i < m; ++i) slots.push_back(i);
            break;
        case AntiMode::Internal:
            for (int i = 0; i < n; ++i) slots.push_back(m + i);
            break;
        case AntiMode::FourLegged:
            if (f.legs() != 4)
                throw std::invalid_argument("four-legged antisymmetrization needs 4 legs");
            slots = {0, 1, 2, 3};
            break;
    }
    if (slots.size() < 2) return f;
    apply(slots);
    out.clear_small();
    return out;
}

SectorizedKernel resectorize(const SectorizedKernel& f,
                             const LatticeSectorData& target) {
    if (!(f.grid() == target.grid()))
        throw std::invalid_argument("resectorize: kernel and sector data live on "
                                    "different grids (curve mismatch)");
    if (f.scale() == target.scale()) return f;  // identity at equal scales
    const TorusGrid& g = f.grid();
    const int V = g.volume();
    const int m = f.external_count(), n = f.internal_count();

    // chi-hat position tables per (sector, creation bit):
    // chi_hat_s(xi', xi) = delta_{sigma a} (1/Vol) sum_k e^{(-1)^a i <k, x'-x>_-} chi_s(k)
    std::vector<std::vector<cplx>> table(target.sector_count(),
                                         std::vector<cplx>(V, 0.0));
    for (std::size_t sct = 0; sct < target.sector_count(); ++sct) {
        bool any = false;
        for (int z = 0; z < V; ++z) {
            cplx acc = 0.0;
            for (int k = 0; k < V; ++k) {
                double w = target.chi(sct, k);
                if (w == 0.0) continue;
                acc += std::polar(1.0, g.pairing(k, z)) * w;
            }
            table[sct][z] = acc / g.total_volume();
            if (acc != cplx(0.0)) any = true;
        }
        if (!any) table[sct].clear();
    }

    const std::size_t cap = 2'000'000;
    SectorizedKernel out(g, m, n, target.scale());
    std::map<LegTuple, cplx> acc;
    for (const auto& [legs, coeff] : f.entries()) {
        // expand one internal leg at a time
        std::vector<std::pair<LegTuple, cplx>> cur{{legs, coeff}};
        for (int l = 0; l < n; ++l) {
            int slot = m + l;
            std::vector<std::pair<LegTuple, cplx>> next;
            for (const auto& [t, c] : cur) {
                const Leg& src = t[slot];
                for (std::size_t sct = 0; sct < target.sector_count(); ++sct) {
                    if (table[sct].empty()) continue;
                    for (int x = 0; x < V; ++x) {
                        // phase argument (-1)^a <k, x'-x>: realized through
                        // the difference site with the bit-dependent sign
                        int z = src.a == 0 ? g.sub(src.site, x) : g.sub(x, src.site);
                        cplx w = table[sct][z];
                        if (w == cplx(0.0)) continue;
                        LegTuple nt = t;
                        nt[slot] = Leg{x, src.sigma, src.a, static_cast<int>(sct)};
                        next.emplace_back(std::move(nt), c * w * g.cell());
                    }
                }
            }
            cur = std::move(next);
            if (cur.size() > cap)
                throw std::runtime_error(
                    "resectorize: expansion exceeds the desk-scale size guard");
        }
        for (const auto& [t, c] : cur) {
            LegTuple rep = out.to_representative(t);
            acc[rep] += c;
            if (acc.size() > cap)
                throw std::runtime_error(
                    "resectorize: expansion exceeds the desk-scale size guard");
        }
    }
    for (const auto& [t, c] : acc)
        if (std::abs(c) > 1e-300) out.add(t, c);
    return out;
}

// ---------------------------------------------------------------------------
// TwoLeggedKernel

std::vector<cplx>& TwoLeggedKernel::block(int s, int t) {
    auto key = std::make_pair(s, t);
    auto it = blocks_.find(key);
    if (it == blocks_.end())
        it = blocks_.emplace(key, std::vector<cplx>(grid_.volume(), 0.0)).first;
    return it->second;
}

const std::vector<cplx>* TwoLeggedKernel::find_block(int s, int t) const {
    auto it = blocks_.find(std::make_pair(s, t));
    return it == blocks_.end() ? nullptr : &it->second;
}

std::vector<cplx> TwoLeggedKernel::total_multiplier() const {
    std::vector<cplx> out(grid_.volume(), 0.0);
    for (const auto& [key, vec] : blocks_)
        for (int k = 0; k < grid_.volume(); ++k) out[k] += vec[k];
    return out;
}

TwoLeggedKernel& TwoLeggedKernel::operator+=(const TwoLeggedKernel& other) {
    if (!(other.grid_ == grid_) && !other.blocks_.empty()) {
        if (blocks_.empty()) *this = other;
        else throw std::invalid_argument("two-legged kernel: grid mismatch");
        return *this;
    }
    for (const auto& [key, vec] : other.blocks_) {
        auto& mine = block(key.first, key.second);
        for (int k = 0; k < grid_.volume(); ++k) mine[k] += vec[k];
    }
    return *this;
}

TwoLeggedKernel TwoLeggedKernel::scaled(cplx c) const {
    TwoLeggedKernel out(grid_, scale_);
    for (const auto& [key, vec] : blocks_) {
        auto& b = out.block(key.first, key.second);
        for (int k = 0; k < grid_.volume(); ++k) b[k] = c * vec[k];
    }
    return out;
}

TwoLeggedKernel TwoLeggedKernel::multiplied(const std::vector<double>& mu) const {
    TwoLeggedKernel out(grid_, scale_);
    for (const auto& [key, vec] : blocks_) {
        auto& b = out.block(key.first, key.second);
        for (int k = 0; k < grid_.volume(); ++k) b[k] = mu[k] * vec[k];
    }
    return out;
}

double TwoLeggedKernel::max_abs() const {
    double m = 0.0;
    for (const auto& [key, vec] : blocks_)
        for (const auto& v : vec) m = std::max(m, std::abs(v));
    return m;
}

double TwoLeggedKernel::multiplier_distance(const TwoLeggedKernel& a,
                                            const TwoLeggedKernel& b) {
    std::vector<cplx> ma = a.total_multiplier();
    std::vector<cplx> mb = b.empty() ? std::vector<cplx>(ma.size(), 0.0)
                                     : b.total_multiplier();
    if (ma.size() != mb.size())
        throw std::invalid_argument("multiplier_distance: grid mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < ma.size(); ++i)
        m = std::max(m, std::abs(ma[i] - mb[i]));
    return m;
}

TwoLeggedKernel TwoLeggedKernel::resectorized(const LatticeSectorData& target) const {
    std::vector<cplx> tot = total_multiplier();
    TwoLeggedKernel out(grid_, target.scale());
    const int V = grid_.volume();
    for (std::size_t s = 0; s < target.sector_count(); ++s)
        for (std::size_t t = 0; t < target.sector_count(); ++t) {
            std::vector<cplx> b(V, 0.0);
            double mx = 0.0;
            for (int k = 0; k < V; ++k) {
                b[k] = target.chi(s, k) * tot[k] * target.chi(t, k);
                mx = std::max(mx, std::abs(b[k]));
            }
            if (mx > 0.0) out.block(static_cast<int>(s), static_cast<int>(t)) = b;
        }
    return out;
}

namespace {
NormSeries block_position_norm(const TorusGrid& g, const std::vector<cplx>& mult,
                               TruncationShape shape) {
    std::vector<cplx> pos = torus_inverse(g, mult);
    NormSeries out(shape);
    for (MultiIndex d : shape.tracked()) {
        double acc = 0.0;
        for (int z = 0; z < g.volume(); ++z) {
            auto x = g.displacement(z);
            acc += std::abs(pos[z]) * std::abs(std::pow(x[0], d.d0)) *
                   std::abs(std::pow(x[1], d.d1)) * std::abs(std::pow(x[2], d.d2));
        }
        acc *= g.cell();
        double fact = 1.0;
        for (int i = 2; i <= d.d0; ++i) fact *= i;
        for (int i = 2; i <= d.d1; ++i) fact *= i;
        for (int i = 2; i <= d.d2; ++i) fact *= i;
        out.set(d, NormCoeff::finite(acc / fact));
    }
    return out;
}
}  // namespace

NormSeries TwoLeggedKernel::norm_1_sigma(TruncationShape shape) const {
    NormSeries best(shape);
    if (blocks_.empty()) return best;
    // cache per-block position norms
    std::map<std::pair<int, int>, NormSeries> ns;
    for (const auto& [key, vec] : blocks_)
        ns.emplace(key, block_position_norm(grid_, vec, shape));
    // pinned slot 0 (sector s), sum over t; then pinned slot 1
    std::map<int, NormSeries> by_s, by_t;
    for (const auto& [key, n] : ns) {
        auto [s, t] = key;
        auto it = by_s.find(s);
        if (it == by_s.end()) by_s.emplace(s, n);
        else it->second = it->second + n;
        auto jt = by_t.find(t);
        if (jt == by_t.end()) by_t.emplace(t, n);
        else jt->second = jt->second + n;
    }
    for (const auto& [s, n] : by_s) best = ns_max(best, n);
    for (const auto& [t, n] : by_t) best = ns_max(best, n);
    return best;
}

double TwoLeggedKernel::k0_reality_defect() const {
    std::vector<cplx> tot = total_multiplier();
    double worst = 0.0;
    for (int k = 0; k < grid_.volume(); ++k) {
        int kr = grid_.reverse_k0(k);
        worst = std::max(worst, std::abs(tot[kr] - std::conj(tot[k])));
    }
    return worst;
}

TwoLeggedKernel TwoLeggedKernel::from_multiplier(const LatticeSectorData& sec,
                                                 const std::vector<cplx>& c) {
    TwoLeggedKernel out(sec.grid(), sec.scale());
    const int V = sec.grid().volume();
    for (std::size_t s = 0; s < sec.sector_count(); ++s)
        for (std::size_t t = 0; t < sec.sector_count(); ++t) {
            std::vector<cplx> b(V, 0.0);
            double mx = 0.0;
            for (int k = 0; k < V; ++k) {
                b[k] = sec.chi(s, k) * c[k] * sec.chi(t, k);
                mx = std::max(mx, std::abs(b[k]));
            }
            if (mx > 0.0) out.block(static_cast<int>(s), static_cast<int>(t)) = b;
        }
    return out;
}

TwoLeggedKernel TwoLeggedKernel::from_spatial_multiplier(
    const LatticeSectorData& sec, const std::vector<cplx>& c) {
    TwoLeggedKernel out(sec.grid(), sec.scale());
    const int V = sec.grid().volume();
    for (std::size_t s = 0; s < sec.sector_count(); ++s)
        for (std::size_t t = 0; t < sec.sector_count(); ++t) {
            std::vector<cplx> b(V, 0.0);
            double mx = 0.0;
            for (int k = 0; k < V; ++k) {
                b[k] = sec.chi_spatial(s, k) * c[k] * sec.chi_spatial(t, k);
                mx = std::max(mx, std::abs(b[k]));
            }
            if (mx > 0.0) out.block(static_cast<int>(s), static_cast<int>(t)) = b;
        }
    return out;
}

}  // namespace fermirg
