#pragma once

// Translation-invariant kernels on the discrete torus: the generic
// sparse m+n-legged sectorized kernel, the momentum-diagonal two-legged
// kernel used by the flow, sector data sampled on the dual lattice, and
// the L1-Linf / sectorized seminorms valued in the norm domain.

#include <map>
#include <optional>
#include <vector>

#include "fermirg/geometry.hpp"
#include "fermirg/lattice.hpp"
#include "fermirg/normdomain.hpp"

namespace fermirg {

/// One kernel leg: torus site, spin (0=up,1=down), creation bit a,
/// sector index (-1 on external legs and unsectorized kernels).
struct Leg {
    int site = 0;
    int sigma = 0;
    int a = 0;
    int sector = -1;
    friend auto operator<=>(const Leg&, const Leg&) = default;
};

using LegTuple = std::vector<Leg>;

/// Momentum-space leg: dual mode index plus labels.
struct MomLeg {
    int mode = 0;
    int sigma = 0;
    int a = 0;
    int sector = -1;
};

/// Sector cutoff data sampled on the dual lattice of a torus.
class LatticeSectorData {
public:
    LatticeSectorData(const TorusGrid& grid, const Dispersion& disp,
                      const FermiCurve& curve, const Sectorization& sec,
                      const ScaleParams& sp);

    int scale() const { return sec_.scale(); }
    std::size_t sector_count() const { return sec_.size(); }
    const Sectorization& sectorization() const { return sec_; }
    const TorusGrid& grid() const { return grid_; }

    double chi(std::size_t s, int mode) const { return chi_[s][mode]; }
    /// chi_s((0,k_spatial)) evaluated with the mode's spatial part only.
    double chi_spatial(std::size_t s, int mode) const {
        return chi_spatial_[s][mode];
    }
    double chi_sum(int mode) const;
    bool sectors_intersect(std::size_t s, std::size_t t) const;

private:
    TorusGrid grid_;
    Sectorization sec_;
    std::vector<std::vector<double>> chi_;
    std::vector<std::vector<double>> chi_spatial_;
};

/// Sparse translation-invariant kernel on B^m x (B x Sigma)^n, stored
/// one coefficient per translation-orbit representative (first leg at
/// the origin).
class SectorizedKernel {
public:
    SectorizedKernel() = default;
    SectorizedKernel(TorusGrid grid, int m, int n, int scale = -1)
        : grid_(grid), m_(m), n_(n), scale_(scale) {}

    const TorusGrid& grid() const { return grid_; }
    int legs() const { return m_ + n_; }
    int external_count() const { return m_; }
    int internal_count() const { return n_; }
    int scale() const { return scale_; }
    void set_scale(int j) { scale_ = j; }

    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    /// Accumulate a coefficient; the tuple is translated to its orbit
    /// representative first.
    void add(const LegTuple& legs, cplx value);
    cplx at(const LegTuple& legs) const;
    void clear_small(double eps = 1e-300);

    const std::map<LegTuple, cplx>& entries() const { return data_; }

    SectorizedKernel& operator+=(const SectorizedKernel& other);
    SectorizedKernel scaled(cplx c) const;

    double max_abs() const;

    LegTuple to_representative(LegTuple legs) const;

private:
    TorusGrid grid_;
    int m_ = 0, n_ = 0;
    int scale_ = -1;
    std::map<LegTuple, cplx> data_;
};

// ---------------------------------------------------------------------------
// Fourier

/// Total Fourier transform evaluated at a momentum tuple; the momentum
/// sum (-1)^a-weighted must vanish, otherwise the value is 0.
cplx fourier_eval(const SectorizedKernel& f, const std::vector<MomLeg>& moms);

/// Momentum-conservation check: signed mode sum of the tuple.
int signed_mode_sum(const TorusGrid& g, const std::vector<MomLeg>& moms);

/// Diagonal momentum multiplier of a spin-independent, particle-number
/// conserving two-legged kernel (creation leg first), summed over
/// sectors. Throws if a spin off-diagonal block exceeds 1e-12.
std::vector<cplx> check_u(const SectorizedKernel& f);

/// Interchange format: JSON header (scale, m, n, grid spec) plus the
/// orbit coefficient table.
std::string kernel_to_json(const SectorizedKernel& f);
SectorizedKernel kernel_from_json(const std::string& text);

// ---------------------------------------------------------------------------
// decay operators

struct DecayFactor {
    MultiIndex delta;
    int u = 0, v = 1;  // leg slots, 0-based, u != v
};

/// Pointwise multiplication by prod (xi_u - xi_v)^delta with
/// minimal-image torus differences.
SectorizedKernel decay_apply(const std::vector<DecayFactor>& spec,
                             const SectorizedKernel& f);

// ---------------------------------------------------------------------------
// norms

struct KernelNormConfig {
    double lambda0 = 1e-3;
    double upsilon = 0.2;
    double B_const = 1.0;
    double alpha = 10.0;
    void validate() const;
    double rho(int m, int n) const;                       // Def-style weight
    double rho_scaled(int m, int n, double lj, double Mj) const;
};

/// Scalar L1-Linf norm (coefficient at delta = 0).
double norm_l1linf(const SectorizedKernel& f);

/// Norm-domain-valued L1-Linf seminorm: coefficient at delta is
/// (1/delta!) max over decay operators of total order delta. Only
/// defined with the derivative structure for m = 0; for m >= 1 the
/// result is the scalar norm as a constant series.
NormSeries norm_deriv_l1linf(const SectorizedKernel& f, TruncationShape shape);

/// Sectorized seminorm |f|_{p,Sigma}: zero when (m>=1 and p>=2) or
/// (m==0 and p>n); otherwise max over p pinned sector slots, sum over
/// the rest.
NormSeries norm_p_sigma(const SectorizedKernel& f, int p, TruncationShape shape,
                        std::size_t sector_count);

/// Scale-weighted norm |f|_j of a sectorized kernel.
NormSeries norm_j(const SectorizedKernel& f, int j, const ScaleParams& sp,
                  const KernelNormConfig& cfg, TruncationShape shape,
                  std::size_t sector_count);

// ---------------------------------------------------------------------------
// structure operations

/// Antisymmetrization: external legs, internal legs, or full four-legged
/// (the 1/4! signed sum over S4).
enum class AntiMode { External, Internal, FourLegged };
SectorizedKernel antisymmetrize(const SectorizedKernel& f, AntiMode mode);

/// Resectorization of internal legs via chi-hat convolution (momentum
/// multipliers on the dual lattice). External legs untouched.
SectorizedKernel resectorize(const SectorizedKernel& f,
                             const LatticeSectorData& target);

// ---------------------------------------------------------------------------
// two-legged momentum-diagonal kernels

/// Translation-invariant, spin-independent, particle-number-conserving
/// two-legged sectorized kernel, stored as multipliers m_{ss'}(k) with
///   f((k,sigma,1,s),(k,sigma',0,s')) = delta_{sigma sigma'} m_{ss'}(k).
class TwoLeggedKernel {
public:
    TwoLeggedKernel() = default;
    TwoLeggedKernel(TorusGrid grid, int scale) : grid_(grid), scale_(scale) {}

    const TorusGrid& grid() const { return grid_; }
    int scale() const { return scale_; }
    bool empty() const { return blocks_.empty(); }

    std::vector<cplx>& block(int s, int t);
    const std::vector<cplx>* find_block(int s, int t) const;
    const std::map<std::pair<int, int>, std::vector<cplx>>& blocks() const {
        return blocks_;
    }

    /// Total multiplier u_check(k) = sum_{s,s'} m_{ss'}(k).
    std::vector<cplx> total_multiplier() const;

    TwoLeggedKernel& operator+=(const TwoLeggedKernel& other);
    TwoLeggedKernel scaled(cplx c) const;
    TwoLeggedKernel multiplied(const std::vector<double>& mu) const;  // conv_nu
    double max_abs() const;
    /// max_k |u_check(k)| of the difference of total multipliers.
    static double multiplier_distance(const TwoLeggedKernel& a,
                                      const TwoLeggedKernel& b);

    /// Resectorize into the target sector system (chi per leg).
    TwoLeggedKernel resectorized(const LatticeSectorData& target) const;

    /// |.|_{1,Sigma} seminorm (max over pinned slot+sector, sum over the
    /// other sector, position-space norm-series per block).
    NormSeries norm_1_sigma(TruncationShape shape) const;

    /// k0-reversal reality defect: max_k |m(-k0,k) - conj(m(k0,k))|
    /// over the total multiplier.
    double k0_reality_defect() const;

    /// Build from a momentum multiplier c(k): blocks chi_s c chi_{s'}.
    static TwoLeggedKernel from_multiplier(const LatticeSectorData& sec,
                                           const std::vector<cplx>& c);
    /// Spatial counterterm style: c depends on the spatial part only and
    /// blocks use chi((0,k)).
    static TwoLeggedKernel from_spatial_multiplier(const LatticeSectorData& sec,
                                                   const std::vector<cplx>& c);

private:
    TorusGrid grid_;
    int scale_ = -1;
    std::map<std::pair<int, int>, std::vector<cplx>> blocks_;
};

}  // namespace fermirg
