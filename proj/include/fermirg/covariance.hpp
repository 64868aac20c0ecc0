#pragma once

// Scale-decomposed propagators sampled on the dual lattice: the
// single-scale, cumulative, windowed and counterterm-dressed covariance
// multipliers, with denominator diagnostics.

#include <map>

#include "fermirg/geometry.hpp"
#include "fermirg/lattice.hpp"

namespace fermirg {

/// Dispersion, cutoffs and frequently used fields sampled per dual mode.
class LatticeGeometry {
public:
    LatticeGeometry(TorusGrid grid, const Dispersion& disp, ScaleParams sp);

    const TorusGrid& grid() const { return grid_; }
    const ScaleParams& scales() const { return sp_; }
    double e(int mode) const { return e_[mode]; }
    double k0(int mode) const { return k0_[mode]; }
    int volume() const { return grid_.volume(); }

    const std::vector<double>& nu_ge(int j) const;  // cached per scale
    std::vector<double> nu_single(int j) const;
    std::vector<double> nu_le(int j) const;  // U == 1 ultraviolet side
    /// nu^{(>=j)} evaluated at (0, spatial part of the mode).
    const std::vector<double>& nu_ge_spatial(int j) const;

private:
    TorusGrid grid_;
    ScaleParams sp_;
    std::vector<double> e_, k0_;
    mutable std::map<int, std::vector<double>> nu_cache_;
    mutable std::map<int, std::vector<double>> nu_spatial_cache_;
};

/// Largest |1/denominator| allowed before reporting a near-zero
/// denominator on the support of the numerator.
struct CovarianceDiagnostics {
    double min_abs_denominator = 1e300;
    int worst_mode = -1;
};

/// ik0 - e - u - K*nu^{(>=j+2)} evaluated per mode. `kspat` may be empty
/// (treated as zero); it is k0-independent.
std::vector<cplx> dressed_denominator(const LatticeGeometry& geo,
                                      const std::vector<cplx>& u,
                                      const std::vector<cplx>& kspat,
                                      int dress_scale);

/// numerator/denominator with a zero-denominator guard restricted to the
/// numerator's support.
std::vector<cplx> guarded_ratio(const LatticeGeometry& geo,
                                const std::vector<double>& numer,
                                const std::vector<cplx>& denom,
                                CovarianceDiagnostics* diag = nullptr);

// The family. All return multipliers per mode; u is the total
// two-legged multiplier, kspat the spatial counterterm multiplier.
std::vector<cplx> cov_single(const LatticeGeometry& geo, int j,
                             const std::vector<cplx>& u,
                             CovarianceDiagnostics* diag = nullptr);
std::vector<cplx> cov_ge(const LatticeGeometry& geo, int j,
                         const std::vector<cplx>& u,
                         CovarianceDiagnostics* diag = nullptr);
std::vector<cplx> cov_le(const LatticeGeometry& geo, int j,
                         const std::vector<cplx>& u,
                         CovarianceDiagnostics* diag = nullptr);
/// (nu^{(>i)} - nu^{(>=j)}) / (ik0 - e - u [1 - nu^{(>=jbar)}]).
std::vector<cplx> cov_window(const LatticeGeometry& geo, int i, int j, int jbar,
                             const std::vector<cplx>& u,
                             CovarianceDiagnostics* diag = nullptr);
std::vector<cplx> cov_cj(const LatticeGeometry& geo, int j,
                         const std::vector<cplx>& u,
                         const std::vector<cplx>& kspat,
                         CovarianceDiagnostics* diag = nullptr);
std::vector<cplx> cov_dj(const LatticeGeometry& geo, int j,
                         const std::vector<cplx>& u,
                         const std::vector<cplx>& kspat,
                         CovarianceDiagnostics* diag = nullptr);
/// Bridge covariance between the running scale and an infrared cutoff:
/// (nu^{(>=j+1)} - nu^{(>=jbar)}) / (ik0 - e - u [nu^{(>=j)} - nu^{(>=jbar)}]).
std::vector<cplx> cov_bridge(const LatticeGeometry& geo, int j, int jbar,
                             const std::vector<cplx>& u,
                             CovarianceDiagnostics* diag = nullptr);

}  // namespace fermirg
