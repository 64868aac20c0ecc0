#pragma once

// Exact finite-dimensional Grassmann algebra over a sampled generator
// set: products, exponentials and logarithms, Gaussian integrals via a
// Pfaffian submask table, Gaussian convolution (Wick ordering and its
// inverse), the source-coupled scale-integration map, and coefficient
// extraction to sectorized kernels.

#include <memory>
#include <vector>

#include "fermirg/kernels.hpp"

namespace fermirg {

/// Generator layout: [phi_0..phi_{p-1} | psi_0..psi_{q-1} | zeta_0..zeta_{q-1}].
/// The zeta block is working space for Gaussian convolutions; physical
/// functions are supported on the phi and psi blocks.
struct AlgebraShape {
    int n_phi = 0;
    int n_psi = 0;
    int total() const { return n_phi + 2 * n_psi; }
    int phi(int i) const { return i; }
    int psi(int i) const { return n_phi + i; }
    int zeta(int i) const { return n_phi + n_psi + i; }
    void validate() const {
        if (n_phi < 0 || n_psi < 0 || total() > 16)
            throw std::invalid_argument(
                "algebra shape: generator budget exceeded (phi + 2*psi <= 16)");
    }
    friend bool operator==(const AlgebraShape&, const AlgebraShape&) = default;
};

/// Labels attaching sampled points to generators. phi labels are
/// B-points (site, sigma, a); psi labels carry a sector as well.
struct GeneratorLabels {
    std::vector<Leg> phi;  // sector = -1
    std::vector<Leg> psi;
    AlgebraShape shape() const {
        return AlgebraShape{static_cast<int>(phi.size()),
                            static_cast<int>(psi.size())};
    }
};

/// Polynomial in anticommuting generators; coefficients stored densely
/// against the ascending-index monomial of each subset mask.
class GrassmannFunction {
public:
    GrassmannFunction() = default;
    explicit GrassmannFunction(AlgebraShape shape)
        : shape_(shape), terms_(std::size_t(1) << shape.total(), cplx(0.0)) {
        shape.validate();
    }

    const AlgebraShape& shape() const { return shape_; }
    std::size_t term_count() const { return terms_.size(); }

    cplx& operator[](std::uint32_t mask) { return terms_[mask]; }
    cplx at(std::uint32_t mask) const { return terms_[mask]; }

    cplx scalar() const { return terms_[0]; }
    bool is_even() const;
    double max_abs() const;

    GrassmannFunction& operator+=(const GrassmannFunction& o);
    GrassmannFunction& operator-=(const GrassmannFunction& o);
    GrassmannFunction scaled(cplx c) const;

    /// Degree filter: keep terms with exactly dphi phi-factors and dpsi
    /// psi-factors (zeta block must be empty).
    GrassmannFunction component(int dphi, int dpsi) const;
    /// Keep only terms with no psi (and no zeta) content.
    GrassmannFunction phi_part() const;

private:
    AlgebraShape shape_;
    std::vector<cplx> terms_;
};

GrassmannFunction gr_mul(const GrassmannFunction& f, const GrassmannFunction& g);
GrassmannFunction gr_exp(const GrassmannFunction& w);
GrassmannFunction gr_log(const GrassmannFunction& g);  // scalar part != 0

/// Antisymmetric pairing over the psi block: integral of zeta_i zeta_j
/// equals C(i,j) for i < j.
struct Pairing {
    int n = 0;
    std::vector<cplx> c;  // row-major n x n, antisymmetric
    cplx at(int i, int j) const { return c[static_cast<std::size_t>(i) * n + j]; }
    void set(int i, int j, cplx v) {
        c[static_cast<std::size_t>(i) * n + j] = v;
        c[static_cast<std::size_t>(j) * n + i] = -v;
    }
    static Pairing zero(int n) {
        return Pairing{n, std::vector<cplx>(static_cast<std::size_t>(n) * n, 0.0)};
    }
    Pairing operator+(const Pairing& o) const;
    Pairing negated() const;
};

/// Integrate out the zeta block of F against the Gaussian measure with
/// the given pairing (monomials of odd zeta degree vanish; even ones
/// produce the Pfaffian of the pairing submatrix).
GrassmannFunction gaussian_integral_zeta(const GrassmannFunction& f,
                                         const Pairing& c);

/// Substitute psi_i -> psi_i + zeta_i.
GrassmannFunction shift_psi_by_zeta(const GrassmannFunction& f);

/// Gaussian convolution: substitute psi -> psi + zeta and integrate
/// zeta. Wick ordering is the same map with the negated pairing.
GrassmannFunction gaussian_convolve(const GrassmannFunction& w, const Pairing& c);
inline GrassmannFunction wick_order(const GrassmannFunction& w, const Pairing& c) {
    return gaussian_convolve(w, c.negated());
}

/// Source coupling sum_p J(p) * phi_p * zeta_{target(p)}.
struct SourceCoupling {
    struct Term {
        int phi_index;
        int zeta_index;  // index inside the psi/zeta block
        cplx weight;
    };
    std::vector<Term> terms;
    GrassmannFunction bilinear(AlgebraShape shape) const;
};

enum class ZNormalization { Scalar, PhiDependent };

/// log (1/Z) integral of exp(phiJzeta + W(phi, psi+zeta)) d mu_C(zeta).
/// Scalar normalization removes the constant term; PhiDependent removes
/// the whole psi-independent part (returning it separately via *phi_out
/// when requested).
GrassmannFunction omega_tilde(const GrassmannFunction& w, const Pairing& c,
                              const SourceCoupling& j, ZNormalization z,
                              GrassmannFunction* phi_out = nullptr);

// ---------------------------------------------------------------------------
// coefficient extraction

/// Extract the antisymmetric kernel block w_{m,n} of a Grassmann
/// function whose generators carry the given labels; entries live on the
/// torus sites of the labels. Convention: the coefficient of a sorted
/// monomial equals m! n! times the kernel at the sorted label tuple.
SectorizedKernel extract_wmn(const GrassmannFunction& w,
                             const GeneratorLabels& labels, const TorusGrid& grid,
                             int m, int n);

/// Rebuild the Grassmann function of a single (m,n) block from a kernel.
GrassmannFunction rebuild_wmn(const SectorizedKernel& f,
                              const GeneratorLabels& labels);

/// Weighted norm of a sectorized Grassmann function: the stated
/// combination of |w_{m,n}|_j block norms. X must be admissible for the
/// scale factor e_j.
NormSeries nj_norm(const GrassmannFunction& w, const GeneratorLabels& labels,
                   const TorusGrid& grid, int j, const ScaleParams& sp,
                   const KernelNormConfig& cfg, const NormSeries& X,
                   TruncationShape shape, std::size_t sector_count);

/// N-norm of a phi-only function: weighted sup-coefficient sum.
double n_norm(const GrassmannFunction& g, const KernelNormConfig& cfg);

/// JSON round trip for golden-file tests.
std::string grassmann_to_json(const GrassmannFunction& w,
                              const GeneratorLabels& labels);
GrassmannFunction grassmann_from_json(const std::string& text,
                                      GeneratorLabels* labels_out = nullptr);

}  // namespace fermirg
