#pragma once

// Dispersion relations, the Fermi curve, scale cutoff functions,
// sectorizations of the curve and the per-sector partition of unity.

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fermirg {

using Vec2 = std::array<double, 2>;

/// Spatial dispersion e(k1,k2). Builtins:
///   "asymmetric": k1^2 + k2^2 - 1 + 0.3*k1^3   (default)
///   "circle":     k1^2 + k2^2 - 1
/// A tabulated dispersion interpolates samples bilinearly.
class Dispersion {
public:
    static Dispersion builtin(const std::string& name);
    static Dispersion tabulated(Vec2 lo, Vec2 hi, int n1, int n2,
                                std::vector<double> samples);

    double operator()(double k1, double k2) const { return eval_(k1, k2); }
    double operator()(Vec2 k) const { return eval_(k[0], k[1]); }
    const std::string& name() const { return name_; }

private:
    Dispersion(std::string name, std::function<double(double, double)> f)
        : name_(std::move(name)), eval_(std::move(f)) {}
    std::string name_;
    std::function<double(double, double)> eval_;
};

/// Multiscale parameters. Sector length at scale j is l_j = M^{-aleph*j}.
struct ScaleParams {
    double M = 1.5;
    double aleph = 0.55;
    int j0 = 2;
    int jbar = 6;

    double sector_length(int j) const { return std::pow(M, -aleph * j); }
    void validate() const;
};

/// Uniform symmetric grid over a (k0,k1,k2) box, used by the geometry
/// and covariance audits (kernels live on the discrete torus instead).
struct MomentumGrid {
    std::array<double, 3> extent{3.0, 3.0, 3.0};  // half-widths
    std::array<int, 3> n{32, 32, 32};

    double coord(int axis, int i) const {
        return -extent[axis] + 2.0 * extent[axis] * i / n[axis];
    }
    std::size_t size() const {
        return static_cast<std::size_t>(n[0]) * n[1] * n[2];
    }
};

// ---------------------------------------------------------------------------
// scale cutoffs

/// C^2 smoothstep: 1 for u <= a, 0 for u >= b.
double smooth_plateau(double u, double a, double b);

/// nu^{(>=j)}(k) = plateau(M^{2(j-1)}(k0^2 + e^2)) with plateau edges
/// 1/M and 2/M, so that on supp nu^{(j)}:
///   1/(sqrt(M) M^j) <= |i k0 - e| <= sqrt(2M)/M^j.
double nu_ge(int j, double k0, double e_val, const ScaleParams& sp);

/// Single-scale function nu^{(j)} = nu^{(>=j)} - nu^{(>=j+1)}.
double nu_single(int j, double k0, double e_val, const ScaleParams& sp);

/// nu^{(<=j)} = U - nu^{(>=j+1)} with ultraviolet cutoff U == 1.
double nu_le(int j, double k0, double e_val, const ScaleParams& sp);

/// Outer radius of supp nu^{(>=j)} in x = |i k0 - e|.
double neighbourhood_radius(int j, const ScaleParams& sp);

// ---------------------------------------------------------------------------
// Fermi curve

/// Closed polyline approximation of {e = 0}, arc-length parametrized.
class FermiCurve {
public:
    double length() const { return length_; }
    std::size_t size() const { return pts_.size(); }
    Vec2 point(std::size_t i) const { return pts_[i]; }
    double arc(std::size_t i) const { return arcs_[i]; }

    /// Point at arc-length parameter t (mod length).
    Vec2 at_arc(double t) const;
    Vec2 tangent_at_arc(double t) const;
    Vec2 normal_at_arc(double t) const;  // outward

    /// Nearest point: returns arc parameter; dist2 receives the squared
    /// distance when non-null.
    double project_arc(Vec2 k, double* dist2 = nullptr) const;
    Vec2 project(Vec2 k) const { return at_arc(project_arc(k)); }
    /// Projection with the tube precondition enforced.
    Vec2 project_checked(Vec2 k, double tube_width) const;

    static FermiCurve trace(const Dispersion& e, int n_angles = 512,
                            double r_max = 3.0);

private:
    std::vector<Vec2> pts_;
    std::vector<double> arcs_;  // cumulative arc length at pts_
    double length_ = 0.0;
};

// ---------------------------------------------------------------------------
// sectors

struct Sector {
    int j = 0;
    double center = 0.0;  // arc-length position of the interval center
    double len = 0.0;     // interval length l_j
    double lo() const { return center - 0.5 * len; }
    double hi() const { return center + 0.5 * len; }
};

/// Cyclic cover of the curve by N intervals of length l_j, all
/// consecutive overlaps equal to a common value in [l/16, l/8].
class Sectorization {
public:
    static Sectorization build(int j, const FermiCurve& curve,
                               const ScaleParams& sp);

    int scale() const { return j_; }
    double curve_length() const { return curve_length_; }
    double sector_length() const { return len_; }
    double overlap() const { return overlap_; }
    std::size_t size() const { return sectors_.size(); }
    const Sector& sector(std::size_t i) const { return sectors_[i]; }
    const std::vector<Sector>& sectors() const { return sectors_; }

    /// Arc-length membership (interval containment mod curve length).
    bool arc_in_sector(std::size_t i, double t) const;
    /// Sectors whose interval contains arc parameter t (1 or 2 of them).
    std::vector<std::size_t> covering(double t) const;
    /// Index of the sector whose center is nearest to arc parameter t.
    std::size_t nearest_center(double t) const;

    /// Arc-profile of the partition of unity: chi-profiles sum to 1 at
    /// every arc position; profile i is supported in sector i's interval.
    double arc_profile(std::size_t i, double t) const;

private:
    int j_ = 0;
    double curve_length_ = 0.0, len_ = 0.0, overlap_ = 0.0, spacing_ = 0.0;
    std::vector<Sector> sectors_;
};

/// chi_s(k) sampled on arbitrary momenta: arc profile at the projected
/// arc position times a radial plateau that equals 1 on the j-th
/// neighbourhood and vanishes beyond twice its radius.
class SectorPartition {
public:
    SectorPartition(const Dispersion& e, const FermiCurve& curve,
                    Sectorization sec, const ScaleParams& sp)
        : disp_(&e), curve_(&curve), sec_(std::move(sec)), sp_(sp) {}

    const Sectorization& sectorization() const { return sec_; }

    /// chi_s at momentum k = (k0, k1, k2).
    double chi(std::size_t s, double k0, Vec2 k) const;
    /// Sum over sectors (should be 1 on the j-th neighbourhood).
    double chi_sum(double k0, Vec2 k) const;
    /// Purely spatial variant chi_s((0,k)) used for counterterm supports.
    double chi_spatial(std::size_t s, Vec2 k) const { return chi(s, 0.0, k); }

    double radial_factor(double k0, Vec2 k) const;

private:
    const Dispersion* disp_;
    const FermiCurve* curve_;
    Sectorization sec_;
    ScaleParams sp_;
};

}  // namespace fermirg
