#pragma once

// Four-legged kernel algebra over an abstract measure space X times a
// finite sector set S: bubble propagators, the bullet contraction,
// ladders, particle-particle / particle-hole reductions and values, and
// the iterated particle-hole ladder recursion.

#include <array>
#include <functional>
#include <map>

#include "fermirg/lattice.hpp"

namespace fermirg {

/// Finite measure space: points 0..size-1 with quadrature weights.
struct MeasureSpace {
    std::vector<double> w;
    int size() const { return static_cast<int>(w.size()); }
    static MeasureSpace counting(int n) {
        return MeasureSpace{std::vector<double>(n, 1.0)};
    }
};

/// Propagator over X: dense complex matrix.
class Propagator {
public:
    Propagator() = default;
    explicit Propagator(int n) : n_(n), v_(static_cast<std::size_t>(n) * n, 0.0) {}
    int size() const { return n_; }
    cplx at(int i, int j) const { return v_[static_cast<std::size_t>(i) * n_ + j]; }
    cplx& ref(int i, int j) { return v_[static_cast<std::size_t>(i) * n_ + j]; }
    double max_abs() const;

private:
    int n_ = 0;
    std::vector<cplx> v_;
};

/// Bubble propagator over X: dense four-index tensor.
class Bubble {
public:
    Bubble() = default;
    explicit Bubble(int n)
        : n_(n), v_(static_cast<std::size_t>(n) * n * n * n, 0.0) {}
    int size() const { return n_; }
    cplx at(int x1, int x2, int x3, int x4) const {
        return v_[((static_cast<std::size_t>(x1) * n_ + x2) * n_ + x3) * n_ + x4];
    }
    cplx& ref(int x1, int x2, int x3, int x4) {
        return v_[((static_cast<std::size_t>(x1) * n_ + x2) * n_ + x3) * n_ + x4];
    }
    double max_abs() const;

private:
    int n_ = 0;
    std::vector<cplx> v_;
};

/// A(x1,x3) B(x2,x4).
Bubble tensor_prod(const Propagator& a, const Propagator& b);
/// C(A,B) = A (x) A + A (x) B + B (x) A.
Bubble bubble_cc(const Propagator& a, const Propagator& b);

/// Leg over X x S.
struct ZLeg {
    int x = 0;
    int s = 0;
    friend auto operator<=>(const ZLeg&, const ZLeg&) = default;
};

/// Sparse four-legged kernel over X x S.
class FourKernel {
public:
    FourKernel() = default;
    FourKernel(int nx, int ns) : nx_(nx), ns_(ns) {}

    int nx() const { return nx_; }
    int ns() const { return ns_; }
    bool empty() const { return v_.empty(); }
    std::size_t size() const { return v_.size(); }

    void add(ZLeg z1, ZLeg z2, ZLeg z3, ZLeg z4, cplx c);
    cplx at(ZLeg z1, ZLeg z2, ZLeg z3, ZLeg z4) const;
    const std::map<std::array<ZLeg, 4>, cplx>& entries() const { return v_; }

    FourKernel& operator+=(const FourKernel& o);
    FourKernel scaled(cplx c) const;
    double max_abs() const;
    /// Largest absolute entry difference.
    static double distance(const FourKernel& a, const FourKernel& b);

private:
    int nx_ = 0, ns_ = 0;
    std::map<std::array<ZLeg, 4>, cplx> v_;
};

/// Half contraction f . P (two legs contracted against a bubble).
class HalfContraction {
public:
    HalfContraction() = default;
    HalfContraction(int nx, int ns) : nx_(nx), ns_(ns) {}
    int nx() const { return nx_; }
    std::map<std::array<ZLeg, 2>, std::vector<cplx>>& rows() { return v_; }
    const std::map<std::array<ZLeg, 2>, std::vector<cplx>>& rows() const {
        return v_;
    }

private:
    int nx_ = 0, ns_ = 0;
    std::map<std::array<ZLeg, 2>, std::vector<cplx>> v_;
};

HalfContraction bullet(const FourKernel& f, const Bubble& p, const MeasureSpace& x);
FourKernel bullet2(const HalfContraction& h, const FourKernel& f,
                   const MeasureSpace& x);

/// Alternating chain r1 . P1 . r2 ... . Pl . r_{l+1}.
FourKernel ladder(const std::vector<FourKernel>& rungs,
                  const std::vector<Bubble>& bubbles, const MeasureSpace& x);
/// Ladder with l+1 copies of r and l bubbles C(A,B).
FourKernel ladder_l(const FourKernel& r, const Propagator& a, const Propagator& b,
                    int ell, const MeasureSpace& x);

// ---------------------------------------------------------------------------
// creation/annihilation structure: X = Xud x {0,1}, x = xu*2 + b.

inline int iota(int xu, int b) { return xu * 2 + b; }
inline int ud_of(int x) { return x / 2; }
inline int b_of(int x) { return x % 2; }

/// Reductions of rungs (Xud-based kernels index half the points).
FourKernel reduce_pp(const FourKernel& f);
FourKernel reduce_ph(const FourKernel& f);
/// Reductions of bubble propagators.
Bubble bubble_pp(const Bubble& p);
Bubble bubble_ph(const Bubble& p);

/// Embeddings back into B x S.
FourKernel v_pp(const FourKernel& fud);
FourKernel v_ph(const FourKernel& fud);

/// Full four-leg antisymmetrization (1/4! signed sum).
FourKernel antisymmetrize4(const FourKernel& f);

/// Particle-number preservation: entries with unbalanced b-sums vanish.
bool particle_number_preserving(const FourKernel& f, double tol = 0.0);

struct DecomposeReport {
    double residual = 0.0;  // max |f - V_pp(f^pp) - V_ph(f^ph)|
    bool antisymmetric = false;
    bool number_preserving = false;
};
DecomposeReport decompose_check(const FourKernel& f, double tol = 1e-12);

// ---------------------------------------------------------------------------
// iterated particle-hole ladders

/// Series coefficient of the iterated ladder recursion at order l.
inline double iterated_series_coefficient(int ell) {
    double c = 2.0 * std::pow(12.0, ell + 1);
    return (ell % 2 == 1) ? -c : c;
}

struct IterPhInputs {
    int ell_max = 4;
    MeasureSpace x;  // B-sample with b-structure (size even)
    /// F^{(i)} resectorized to the sectorization of scale jto.
    std::function<FourKernel(int i, int jto)> f_input;
    /// Sector-label refinement from scale jfrom to scale jto.
    std::function<int(int jfrom, int jto, int s)> refine;
    std::function<int(int j)> sector_count;
    /// Propagators C^{(j)}_{u_j} and C^{(>= j+1)}_{u_j} over the sample.
    std::function<std::pair<Propagator, Propagator>(int j)> covariances;
};

struct PHLadderState {
    int j = 0;
    FourKernel value;       // over (Xud x Sigma_{j-1})
    double tail_estimate = 0.0;  // magnitude of the last series term kept
};

/// Run the recursion up to scale j (value of the iterated ladder at j).
PHLadderState iterated_ph_ladder(const IterPhInputs& in, int j);

}  // namespace fermirg
