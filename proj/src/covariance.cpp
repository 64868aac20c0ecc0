#include "fermirg/covariance.hpp"

namespace fermirg {

LatticeGeometry::LatticeGeometry(TorusGrid grid, const Dispersion& disp,
                                 ScaleParams sp)
    : grid_(grid), sp_(sp) {
    const int V = grid_.volume();
    e_.resize(V);
    k0_.resize(V);
    for (int m = 0; m < V; ++m) {
        auto k = grid_.momentum(m);
        k0_[m] = k[0];
        e_[m] = disp(k[1], k[2]);
    }
}

const std::vector<double>& LatticeGeometry::nu_ge(int j) const {
    auto it = nu_cache_.find(j);
    if (it != nu_cache_.end()) return it->second;
    std::vector<double> v(volume());
    for (int m = 0; m < volume(); ++m) v[m] = fermirg::nu_ge(j, k0_[m], e_[m], sp_);
    return nu_cache_.emplace(j, std::move(v)).first->second;
}

std::vector<double> LatticeGeometry::nu_single(int j) const {
    std::vector<double> v = nu_ge(j);
    const std::vector<double>& next = nu_ge(j + 1);
    for (int m = 0; m < volume(); ++m) v[m] -= next[m];
    return v;
}

std::vector<double> LatticeGeometry::nu_le(int j) const {
    std::vector<double> v(volume());
    const std::vector<double>& above = nu_ge(j + 1);
    for (int m = 0; m < volume(); ++m) v[m] = 1.0 - above[m];
    return v;
}

const std::vector<double>& LatticeGeometry::nu_ge_spatial(int j) const {
    auto it = nu_spatial_cache_.find(j);
    if (it != nu_spatial_cache_.end()) return it->second;
    std::vector<double> v(volume());
    for (int m = 0; m < volume(); ++m)
        v[m] = fermirg::nu_ge(j, 0.0, e_[m], sp_);
    return nu_spatial_cache_.emplace(j, std::move(v)).first->second;
}

std::vector<cplx> dressed_denominator(const LatticeGeometry& geo,
                                      const std::vector<cplx>& u,
                                      const std::vector<cplx>& kspat,
                                      int dress_scale) {
    const int V = geo.volume();
    std::vector<cplx> d(V);
    const std::vector<double>* dress =
        kspat.empty() ? nullptr : &geo.nu_ge(dress_scale);
    for (int m = 0; m < V; ++m) {
        cplx val = cplx(0.0, geo.k0(m)) - geo.e(m);
        if (!u.empty()) val -= u[m];
        if (dress) val -= kspat[m] * (*dress)[m];
        d[m] = val;
    }
    return d;
}

std::vector<cplx> guarded_ratio(const LatticeGeometry& geo,
                                const std::vector<double>& numer,
                                const std::vector<cplx>& denom,
                                CovarianceDiagnostics* diag) {
    const int V = geo.volume();
    std::vector<cplx> out(V, 0.0);
    CovarianceDiagnostics local;
    for (int m = 0; m < V; ++m) {
        if (numer[m] == 0.0) continue;
        double ad = std::abs(denom[m]);
        if (ad < local.min_abs_denominator) {
            local.min_abs_denominator = ad;
            local.worst_mode = m;
        }
        if (ad == 0.0)
            throw std::runtime_error(
                "covariance: vanishing denominator on the cutoff support at mode " +
                std::to_string(m));
        out[m] = numer[m] / denom[m];
    }
    if (diag) *diag = local;
    return out;
}

std::vector<cplx> cov_single(const LatticeGeometry& geo, int j,
                             const std::vector<cplx>& u,
                             CovarianceDiagnostics* diag) {
    return guarded_ratio(geo, geo.nu_single(j), dressed_denominator(geo, u, {}, 0),
                         diag);
}

std::vector<cplx> cov_ge(const LatticeGeometry& geo, int j,
                         const std::vector<cplx>& u, CovarianceDiagnostics* diag) {
    return guarded_ratio(geo, geo.nu_ge(j), dressed_denominator(geo, u, {}, 0),
                         diag);
}

std::vector<cplx> cov_le(const LatticeGeometry& geo, int j,
                         const std::vector<cplx>& u, CovarianceDiagnostics* diag) {
    return guarded_ratio(geo, geo.nu_le(j), dressed_denominator(geo, u, {}, 0),
                         diag);
}

std::vector<cplx> cov_window(const LatticeGeometry& geo, int i, int j, int jbar,
                             const std::vector<cplx>& u,
                             CovarianceDiagnostics* diag) {
    const int V = geo.volume();
    std::vector<double> numer(V);
    const auto& above_i = geo.nu_ge(i + 1);
    const auto& above_j = geo.nu_ge(j);
    for (int m = 0; m < V; ++m) numer[m] = above_i[m] - above_j[m];
    std::vector<cplx> dressed_u(V, 0.0);
    if (!u.empty()) {
        const auto& irc = geo.nu_ge(jbar);
        for (int m = 0; m < V; ++m) dressed_u[m] = u[m] * (1.0 - irc[m]);
    }
    return guarded_ratio(geo, numer, dressed_denominator(geo, dressed_u, {}, 0),
                         diag);
}

std::vector<cplx> cov_cj(const LatticeGeometry& geo, int j,
                         const std::vector<cplx>& u, const std::vector<cplx>& kspat,
                         CovarianceDiagnostics* diag) {
    return guarded_ratio(geo, geo.nu_ge(j),
                         dressed_denominator(geo, u, kspat, j + 2), diag);
}

std::vector<cplx> cov_dj(const LatticeGeometry& geo, int j,
                         const std::vector<cplx>& u, const std::vector<cplx>& kspat,
                         CovarianceDiagnostics* diag) {
    return guarded_ratio(geo, geo.nu_ge(j + 1),
                         dressed_denominator(geo, u, kspat, j + 2), diag);
}

std::vector<cplx> cov_bridge(const LatticeGeometry& geo, int j, int jbar,
                             const std::vector<cplx>& u,
                             CovarianceDiagnostics* diag) {
    const int V = geo.volume();
    std::vector<double> numer(V);
    const auto& a = geo.nu_ge(j + 1);
    const auto& b = geo.nu_ge(jbar);
    for (int m = 0; m < V; ++m) numer[m] = a[m] - b[m];
    std::vector<cplx> dressed_u(V, 0.0);
    if (!u.empty()) {
        const auto& lo = geo.nu_ge(j);
        for (int m = 0; m < V; ++m) dressed_u[m] = u[m] * (lo[m] - b[m]);
    }
    return guarded_ratio(geo, numer, dressed_denominator(geo, dressed_u, {}, 0),
                         diag);
}

}  // namespace fermirg
