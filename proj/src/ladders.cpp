#include "fermirg/ladders.hpp"

#include <algorithm>
#include <cmath>

namespace fermirg {

double Propagator::max_abs() const {
    double m = 0.0;
    for (const auto& v : v_) m = std::max(m, std::abs(v));
    return m;
}

double Bubble::max_abs() const {
    double m = 0.0;
    for (const auto& v : v_) m = std::max(m, std::abs(v));
    return m;
}

Bubble tensor_prod(const Propagator& a, const Propagator& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("tensor_prod: size mismatch");
    const int n = a.size();
    Bubble out(n);
    for (int x1 = 0; x1 < n; ++x1)
        for (int x2 = 0; x2 < n; ++x2)
            for (int x3 = 0; x3 < n; ++x3)
                for (int x4 = 0; x4 < n; ++x4)
                    out.ref(x1, x2, x3, x4) = a.at(x1, x3) * b.at(x2, x4);
    return out;
}

Bubble bubble_cc(const Propagator& a, const Propagator& b) {
    if (a.size() != b.size()) throw std::invalid_argument("cc: size mismatch");
    const int n = a.size();
    Bubble out(n);
    for (int x1 = 0; x1 < n; ++x1)
        for (int x2 = 0; x2 < n; ++x2)
            for (int x3 = 0; x3 < n; ++x3)
                for (int x4 = 0; x4 < n; ++x4)
                    out.ref(x1, x2, x3, x4) =
                        a.at(x1, x3) * a.at(x2, x4) + a.at(x1, x3) * b.at(x2, x4) +
                        b.at(x1, x3) * a.at(x2, x4);
    return out;
}

void FourKernel::add(ZLeg z1, ZLeg z2, ZLeg z3, ZLeg z4, cplx c) {
    if (c == cplx(0.0)) return;
    std::array<ZLeg, 4> key{z1, z2, z3, z4};
    auto [it, inserted] = v_.try_emplace(key, c);
    if (!inserted) {
        it->second += c;
        if (it->second == cplx(0.0)) v_.erase(it);
    }
}

cplx FourKernel::at(ZLeg z1, ZLeg z2, ZLeg z3, ZLeg z4) const {
    auto it = v_.find({z1, z2, z3, z4});
    return it == v_.end() ? cplx(0.0) : it->second;
}

FourKernel& FourKernel::operator+=(const FourKernel& o) {
    for (const auto& [k, c] : o.v_) add(k[0], k[1], k[2], k[3], c);
    return *this;
}

FourKernel FourKernel::scaled(cplx c) const {
    FourKernel out(nx_, ns_);
    if (c == cplx(0.0)) return out;
    for (const auto& [k, v] : v_) out.v_[k] = c * v;
    return out;
}

double FourKernel::max_abs() const {
    double m = 0.0;
    for (const auto& [k, v] : v_) m = std::max(m, std::abs(v));
    return m;
}

double FourKernel::distance(const FourKernel& a, const FourKernel& b) {
    double m = 0.0;
    for (const auto& [k, v] : a.entries())
        m = std::max(m, std::abs(v - b.at(k[0], k[1], k[2], k[3])));
    for (const auto& [k, v] : b.entries())
        m = std::max(m, std::abs(v - a.at(k[0], k[1], k[2], k[3])));
    return m;
}

HalfContraction bullet(const FourKernel& f, const Bubble& p, const MeasureSpace& x) {
    const int nx = f.nx();
    if (p.size() != nx || x.size() != nx)
        throw std::invalid_argument("bullet: dimension mismatch");
    HalfContraction out(nx, f.ns());
    for (const auto& [k, c] : f.entries()) {
        const ZLeg& z3 = k[2];
        const ZLeg& z4 = k[3];
        double ww = x.w[z3.x] * x.w[z4.x];
        auto& row = out.rows()[{k[0], k[1]}];
        if (row.empty()) row.assign(static_cast<std::size_t>(nx) * nx, 0.0);
        for (int x3 = 0; x3 < nx; ++x3)
            for (int x4 = 0; x4 < nx; ++x4)
                row[static_cast<std::size_t>(x3) * nx + x4] +=
                    c * ww * p.at(z3.x, z4.x, x3, x4);
    }
    return out;
}

FourKernel bullet2(const HalfContraction& h, const FourKernel& f,
                   const MeasureSpace& x) {
    const int nx = f.nx();
    FourKernel out(nx, f.ns());
    for (const auto& [k, c] : f.entries()) {
        const ZLeg& y1 = k[0];
        const ZLeg& y2 = k[1];
        double ww = x.w[y1.x] * x.w[y2.x];
        for (const auto& [zz, row] : h.rows()) {
            cplx v = row[static_cast<std::size_t>(y1.x) * nx + y2.x];
            if (v == cplx(0.0)) continue;
            out.add(zz[0], zz[1], k[2], k[3], v * ww * c);
        }
    }
    return out;
}

FourKernel ladder(const std::vector<FourKernel>& rungs,
                  const std::vector<Bubble>& bubbles, const MeasureSpace& x) {
    if (rungs.empty() || bubbles.size() + 1 != rungs.size())
        throw std::invalid_argument("ladder: need l+1 rungs and l bubbles, l >= 1");
    FourKernel acc = rungs[0];
    for (std::size_t i = 0; i < bubbles.size(); ++i)
        acc = bullet2(bullet(acc, bubbles[i], x), rungs[i + 1], x);
    return acc;
}

FourKernel ladder_l(const FourKernel& r, const Propagator& a, const Propagator& b,
                    int ell, const MeasureSpace& x) {
    if (ell < 1) throw std::invalid_argument("ladder_l: ell must be >= 1");
    Bubble p = bubble_cc(a, b);
    std::vector<FourKernel> rungs(ell + 1, r);
    std::vector<Bubble> bubbles(ell, p);
    return ladder(rungs, bubbles, x);
}

// ---------------------------------------------------------------------------
// reductions and values

namespace {
FourKernel reduce_with(const FourKernel& f, const std::array<int, 4>& bs) {
    if (f.nx() % 2) throw std::invalid_argument("reduction: X lacks b-structure");
    FourKernel out(f.nx() / 2, f.ns());
    for (const auto& [k, c] : f.entries()) {
        bool match = true;
        for (int i = 0; i < 4; ++i)
            if (b_of(k[i].x) != bs[i]) { match = false; break; }
        if (!match) continue;
        out.add({ud_of(k[0].x), k[0].s}, {ud_of(k[1].x), k[1].s},
                {ud_of(k[2].x), k[2].s}, {ud_of(k[3].x), k[3].s}, c);
    }
    return out;
}
}  // namespace

FourKernel reduce_pp(const FourKernel& f) { return reduce_with(f, {0, 0, 1, 1}); }
FourKernel reduce_ph(const FourKernel& f) { return reduce_with(f, {0, 1, 1, 0}); }

namespace {
Bubble bubble_reduce(const Bubble& p, const std::array<int, 4>& bs) {
    if (p.size() % 2) throw std::invalid_argument("reduction: X lacks b-structure");
    const int nud = p.size() / 2;
    Bubble out(nud);
    for (int x1 = 0; x1 < nud; ++x1)
        for (int x2 = 0; x2 < nud; ++x2)
            for (int x3 = 0; x3 < nud; ++x3)
                for (int x4 = 0; x4 < nud; ++x4)
                    out.ref(x1, x2, x3, x4) =
                        p.at(iota(x1, bs[0]), iota(x2, bs[1]), iota(x3, bs[2]),
                             iota(x4, bs[3]));
    return out;
}
}  // namespace

Bubble bubble_pp(const Bubble& p) { return bubble_reduce(p, {1, 1, 0, 0}); }
Bubble bubble_ph(const Bubble& p) { return bubble_reduce(p, {1, 0, 0, 1}); }

FourKernel v_pp(const FourKernel& fud) {
    FourKernel out(fud.nx() * 2, fud.ns());
    for (const auto& [k, c] : fud.entries()) {
        out.add({iota(k[0].x, 0), k[0].s}, {iota(k[1].x, 0), k[1].s},
                {iota(k[2].x, 1), k[2].s}, {iota(k[3].x, 1), k[3].s}, c);
        out.add({iota(k[2].x, 1), k[2].s}, {iota(k[3].x, 1), k[3].s},
                {iota(k[0].x, 0), k[0].s}, {iota(k[1].x, 0), k[1].s}, c);
    }
    return out;
}

FourKernel v_ph(const FourKernel& fud) {
    FourKernel out(fud.nx() * 2, fud.ns());
    for (const auto& [k, c] : fud.entries()) {
        // (0,1,1,0) pattern: f'(u1,u2,u3,u4)
        out.add({iota(k[0].x, 0), k[0].s}, {iota(k[1].x, 1), k[1].s},
                {iota(k[2].x, 1), k[2].s}, {iota(k[3].x, 0), k[3].s}, c);
        // (1,0,0,1): f'(u2,u1,u4,u3)
        out.add({iota(k[1].x, 1), k[1].s}, {iota(k[0].x, 0), k[0].s},
                {iota(k[3].x, 0), k[3].s}, {iota(k[2].x, 1), k[2].s}, c);
        // -(1,0,1,0): f'(u2,u1,u3,u4)
        out.add({iota(k[1].x, 1), k[1].s}, {iota(k[0].x, 0), k[0].s},
                {iota(k[2].x, 1), k[2].s}, {iota(k[3].x, 0), k[3].s}, -c);
        // -(0,1,0,1): f'(u1,u2,u4,u3)
        out.add({iota(k[0].x, 0), k[0].s}, {iota(k[1].x, 1), k[1].s},
                {iota(k[3].x, 0), k[3].s}, {iota(k[2].x, 1), k[2].s}, -c);
    }
    return out;
}

namespace {
// iterate over all 24 permutations of {0,1,2,3} with signs
const std::array<std::pair<std::array<int, 4>, int>, 24>& s4_table() {
    static const auto table = [] {
        std::array<std::pair<std::array<int, 4>, int>, 24> t{};
        std::array<int, 4> p{0, 1, 2, 3};
        int i = 0;
        do {
            int sign = 1;
            for (int a = 0; a < 4; ++a)
                for (int b = a + 1; b < 4; ++b)
                    if (p[a] > p[b]) sign = -sign;
            t[i++] = {p, sign};
        } while (std::next_permutation(p.begin(), p.end()));
        return t;
    }();
    return table;
}
}  // namespace

FourKernel antisymmetrize4(const FourKernel& f) {
    FourKernel out(f.nx(), f.ns());
    for (const auto& [k, c] : f.entries())
        for (const auto& [p, sign] : s4_table())
            out.add(k[p[0]], k[p[1]], k[p[2]], k[p[3]],
                    static_cast<double>(sign) * c / 24.0);
    return out;
}

bool particle_number_preserving(const FourKernel& f, double tol) {
    for (const auto& [k, c] : f.entries()) {
        int total = b_of(k[0].x) + b_of(k[1].x) + b_of(k[2].x) + b_of(k[3].x);
        if (total != 2 && std::abs(c) > tol) return false;
    }
    return true;
}

DecomposeReport decompose_check(const FourKernel& f, double tol) {
    DecomposeReport rep;
    rep.number_preserving = particle_number_preserving(f, tol);
    FourKernel anti = antisymmetrize4(f);
    rep.antisymmetric = FourKernel::distance(anti, f) <= tol;
    FourKernel rebuilt = v_pp(reduce_pp(f));
    rebuilt += v_ph(reduce_ph(f));
    rep.residual = FourKernel::distance(rebuilt, f);
    return rep;
}

// ---------------------------------------------------------------------------
// iterated particle-hole ladders

namespace {
FourKernel relabel_sectors(const FourKernel& f, int jfrom, int jto,
                           const IterPhInputs& in) {
    FourKernel out(f.nx(), in.sector_count(jto));
    for (const auto& [k, c] : f.entries())
        out.add({k[0].x, in.refine(jfrom, jto, k[0].s)},
                {k[1].x, in.refine(jfrom, jto, k[1].s)},
                {k[2].x, in.refine(jfrom, jto, k[2].s)},
                {k[3].x, in.refine(jfrom, jto, k[3].s)}, c);
    return out;
}
}  // namespace

PHLadderState iterated_ph_ladder(const IterPhInputs& in, int j_target) {
    if (in.ell_max < 1) throw std::invalid_argument("iterated ladder: ell_max >= 1");
    if (in.x.size() % 2)
        throw std::invalid_argument("iterated ladder: X lacks b-structure");
    const int nud = in.x.size() / 2;

    PHLadderState st;
    st.j = 0;
    st.value = FourKernel(nud, 0);
    if (j_target <= 2) {
        // L^{(0)}, L^{(1)}, L^{(2)} all vanish
        st.j = j_target;
        st.value = FourKernel(nud, j_target >= 1 ? in.sector_count(std::max(
                                                       j_target - 1, 2)) : 0);
        return st;
    }
    // start the genuine recursion at j = 2 with L^{(2)} = 0
    FourKernel lj(nud, in.sector_count(2));  // over Sigma_{j-1} with j = 3 next
    double tail = 0.0;
    for (int j = 2; j < j_target; ++j) {
        // resectorize the accumulated ladder from Sigma_{j-1} to Sigma_j
        FourKernel lj_res = (j == 2) ? FourKernel(nud, in.sector_count(2))
                                     : relabel_sectors(lj, j - 1, j, in);
        // rung w_j = sum_i F^{(i)}_{Sigma_j} + (1/8) Ant(V_ph(L^{(j)}))_{Sigma_j}
        FourKernel w(in.x.size(), in.sector_count(j));
        for (int i = 2; i <= j; ++i) w += in.f_input(i, j);
        if (!lj.empty()) {
            FourKernel emb = antisymmetrize4(v_ph(lj));
            w += relabel_sectors(emb, j - 1, j, in).scaled(1.0 / 8.0);
        }
        FourKernel ladder_sum(nud, in.sector_count(j));
        if (!w.empty()) {
            auto [cj, cge] = in.covariances(j);
            for (int ell = 1; ell <= in.ell_max; ++ell) {
                FourKernel ll = ladder_l(w, cj, cge, ell, in.x);
                FourKernel term =
                    reduce_ph(ll).scaled(iterated_series_coefficient(ell));
                tail = term.max_abs();
                ladder_sum += term;
            }
        }
        lj = lj_res;
        lj += ladder_sum;
    }
    st.j = j_target;
    st.value = lj;
    st.tail_estimate = tail;
    return st;
}

}  // namespace fermirg
