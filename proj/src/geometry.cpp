#include "fermirg/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace fermirg {

Dispersion Dispersion::builtin(const std::string& name) {
    if (name == "asymmetric")
        return Dispersion(name, [](double k1, double k2) {
            return k1 * k1 + k2 * k2 - 1.0 + 0.3 * k1 * k1 * k1;
        });
    if (name == "circle")
        return Dispersion(name, [](double k1, double k2) {
            return k1 * k1 + k2 * k2 - 1.0;
        });
    throw std::invalid_argument("unknown dispersion: " + name);
}

Dispersion Dispersion::tabulated(Vec2 lo, Vec2 hi, int n1, int n2,
                                 std::vector<double> samples) {
    if (n1 < 2 || n2 < 2 || samples.size() != static_cast<std::size_t>(n1) * n2)
        throw std::invalid_argument("tabulated dispersion: bad sample table");
    auto f = [=, s = std::move(samples)](double k1, double k2) {
        double u = (k1 - lo[0]) / (hi[0] - lo[0]) * (n1 - 1);
        double v = (k2 - lo[1]) / (hi[1] - lo[1]) * (n2 - 1);
        u = std::clamp(u, 0.0, static_cast<double>(n1 - 1));
        v = std::clamp(v, 0.0, static_cast<double>(n2 - 1));
        int i = std::min(static_cast<int>(u), n1 - 2);
        int jj = std::min(static_cast<int>(v), n2 - 2);
        double a = u - i, b = v - jj;
        auto at = [&](int x, int y) { return s[static_cast<std::size_t>(x) * n2 + y]; };
        return (1 - a) * (1 - b) * at(i, jj) + a * (1 - b) * at(i + 1, jj) +
               (1 - a) * b * at(i, jj + 1) + a * b * at(i + 1, jj + 1);
    };
    return Dispersion("tabulated", f);
}

void ScaleParams::validate() const {
    if (!(M > 1.0)) throw std::invalid_argument("scale params: M must be > 1");
    if (!(aleph > 0.5 && aleph < 2.0 / 3.0))
        throw std::invalid_argument("scale params: aleph must lie in (1/2, 2/3)");
    if (j0 < 2) throw std::invalid_argument("scale params: j0 must be >= 2");
}

double smooth_plateau(double u, double a, double b) {
    if (u <= a) return 1.0;
    if (u >= b) return 0.0;
    double t = (u - a) / (b - a);
    // quintic smoothstep, C^2 at both ends
    double s = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
    return 1.0 - s;
}

double nu_ge(int j, double k0, double e_val, const ScaleParams& sp) {
    if (j < 0) throw std::invalid_argument("nu_ge: j must be >= 0");
    double x2 = k0 * k0 + e_val * e_val;
    double arg = std::pow(sp.M, 2.0 * (j - 1)) * x2;
    return smooth_plateau(arg, 1.0 / sp.M, 2.0 / sp.M);
}

double nu_single(int j, double k0, double e_val, const ScaleParams& sp) {
    return nu_ge(j, k0, e_val, sp) - nu_ge(j + 1, k0, e_val, sp);
}

double nu_le(int j, double k0, double e_val, const ScaleParams& sp) {
    return 1.0 - nu_ge(j + 1, k0, e_val, sp);
}

double neighbourhood_radius(int j, const ScaleParams& sp) {
    return std::sqrt(2.0 * sp.M) / std::pow(sp.M, j);
}

// ---------------------------------------------------------------------------

Vec2 FermiCurve::at_arc(double t) const {
    double tt = std::fmod(t, length_);
    if (tt < 0) tt += length_;
    auto it = std::upper_bound(arcs_.begin(), arcs_.end(), tt);
    std::size_t i = (it == arcs_.begin()) ? 0 : (it - arcs_.begin() - 1);
    std::size_t i1 = (i + 1) % pts_.size();
    double seg = (i1 == 0) ? (length_ - arcs_[i]) : (arcs_[i1] - arcs_[i]);
    double frac = seg > 0 ? (tt - arcs_[i]) / seg : 0.0;
    return {pts_[i][0] + frac * (pts_[i1][0] - pts_[i][0]),
            pts_[i][1] + frac * (pts_[i1][1] - pts_[i][1])};
}

Vec2 FermiCurve::tangent_at_arc(double t) const {
    double h = length_ / (2.0 * pts_.size());
    Vec2 a = at_arc(t - h), b = at_arc(t + h);
    double dx = b[0] - a[0], dy = b[1] - a[1];
    double n = std::hypot(dx, dy);
    if (n == 0) return {1.0, 0.0};
    return {dx / n, dy / n};
}

Vec2 FermiCurve::normal_at_arc(double t) const {
    Vec2 tg = tangent_at_arc(t);
    Vec2 nm{tg[1], -tg[0]};
    Vec2 p = at_arc(t);
    // orient outward (away from the centroid, which is near the origin)
    if (nm[0] * p[0] + nm[1] * p[1] < 0) return {-nm[0], -nm[1]};
    return nm;
}

double FermiCurve::project_arc(Vec2 k, double* dist2) const {
    // coarse pass over vertices, then refine on the two adjacent segments
    std::size_t best = 0;
    double bd = 1e300;
    for (std::size_t i = 0; i < pts_.size(); ++i) {
        double dx = k[0] - pts_[i][0], dy = k[1] - pts_[i][1];
        double d = dx * dx + dy * dy;
        if (d < bd) { bd = d; best = i; }
    }
    double best_t = arcs_[best], best_d = bd;
    for (std::size_t off = 0; off < 2; ++off) {
        std::size_t i = (best + pts_.size() - 1 + off) % pts_.size();
        std::size_t i1 = (i + 1) % pts_.size();
        Vec2 a = pts_[i], b = pts_[i1];
        double vx = b[0] - a[0], vy = b[1] - a[1];
        double vv = vx * vx + vy * vy;
        if (vv == 0) continue;
        double s = std::clamp(((k[0] - a[0]) * vx + (k[1] - a[1]) * vy) / vv, 0.0, 1.0);
        double px = a[0] + s * vx, py = a[1] + s * vy;
        double d = (k[0] - px) * (k[0] - px) + (k[1] - py) * (k[1] - py);
        if (d < best_d) {
            best_d = d;
            double seg = (i1 == 0) ? (length_ - arcs_[i]) : (arcs_[i1] - arcs_[i]);
            best_t = arcs_[i] + s * seg;
        }
    }
    if (dist2) *dist2 = best_d;
    return best_t;
}

Vec2 FermiCurve::project_checked(Vec2 k, double tube_width) const {
    double d2 = 0.0;
    double t = project_arc(k, &d2);
    if (d2 > tube_width * tube_width)
        throw std::domain_error("projection: momentum outside the curve tube");
    return at_arc(t);
}

FermiCurve FermiCurve::trace(const Dispersion& e, int n_angles, double r_max) {
    if (n_angles < 8) throw std::invalid_argument("trace: need at least 8 angles");
    FermiCurve c;
    c.pts_.reserve(n_angles);
    for (int i = 0; i < n_angles; ++i) {
        double th = 2.0 * M_PI * i / n_angles;
        double cx = std::cos(th), cy = std::sin(th);
        // march outward to the first sign change, then bisect
        const int steps = 256;
        double lo = 1e-6, hi = 0.0;
        double elo = e(lo * cx, lo * cy);
        bool bracketed = false;
        for (int s = 1; s <= steps; ++s) {
            double r = r_max * s / steps;
            double er = e(r * cx, r * cy);
            if (elo * er <= 0.0) { hi = r; bracketed = true; break; }
            lo = r;
            elo = er;
        }
        if (!bracketed)
            throw std::runtime_error(
                "fermi curve: no zero crossing along a ray (curve missing or "
                "leaving the box)");
        for (int it = 0; it < 80; ++it) {
            double mid = 0.5 * (lo + hi);
            double em = e(mid * cx, mid * cy);
            if (em == 0.0) { lo = hi = mid; break; }
            if (em * elo < 0) { hi = mid; }
            else { lo = mid; elo = em; }
        }
        double r = 0.5 * (lo + hi);
        c.pts_.push_back({r * cx, r * cy});
    }
    c.arcs_.resize(c.pts_.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < c.pts_.size(); ++i) {
        c.arcs_[i] = acc;
        std::size_t i1 = (i + 1) % c.pts_.size();
        acc += std::hypot(c.pts_[i1][0] - c.pts_[i][0], c.pts_[i1][1] - c.pts_[i][1]);
    }
    c.length_ = acc;
    return c;
}

// ---------------------------------------------------------------------------

Sectorization Sectorization::build(int j, const FermiCurve& curve,
                                   const ScaleParams& sp) {
    if (j < 2) throw std::invalid_argument("sectorization: j must be >= 2");
    double len = sp.sector_length(j);
    double L = curve.length();
    if (!(len < 0.5 * L))
        throw std::invalid_argument("sectorization: sector length must be < length(F)/2");

    // N sectors spaced L/N apart; overlap v = len - L/N must lie in
    // [len/16, len/8], i.e. N in [(16/15)(L/len), (8/7)(L/len)].
    double q = L / len;
    int n_lo = static_cast<int>(std::ceil(16.0 / 15.0 * q));
    int n_hi = static_cast<int>(std::floor(8.0 / 7.0 * q));
    if (n_lo > n_hi) {
        throw std::runtime_error(
            "sectorization: no admissible sector count; feasible overlap range "
            "[" + std::to_string(len / 16) + ", " + std::to_string(len / 8) +
            "] admits no integer N in [" + std::to_string(16.0 / 15.0 * q) + ", " +
            std::to_string(8.0 / 7.0 * q) + "]");
    }
    int N = n_lo;
    Sectorization sec;
    sec.j_ = j;
    sec.curve_length_ = L;
    sec.len_ = len;
    sec.spacing_ = L / N;
    sec.overlap_ = len - sec.spacing_;
    sec.sectors_.reserve(N);
    for (int i = 0; i < N; ++i)
        sec.sectors_.push_back(Sector{j, i * sec.spacing_, len});
    return sec;
}

namespace {
double wrap_delta(double t, double center, double L) {
    double d = std::fmod(t - center, L);
    if (d < -0.5 * L) d += L;
    if (d >= 0.5 * L) d -= L;
    return d;
}
}  // namespace

bool Sectorization::arc_in_sector(std::size_t i, double t) const {
    return std::abs(wrap_delta(t, sectors_[i].center, curve_length_)) <=
           0.5 * len_ + 1e-12;
}

std::vector<std::size_t> Sectorization::covering(double t) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < sectors_.size(); ++i)
        if (arc_in_sector(i, t)) out.push_back(i);
    return out;
}

std::size_t Sectorization::nearest_center(double t) const {
    std::size_t best = 0;
    double bd = 1e300;
    for (std::size_t i = 0; i < sectors_.size(); ++i) {
        double d = std::abs(wrap_delta(t, sectors_[i].center, curve_length_));
        if (d < bd) { bd = d; best = i; }
    }
    return best;
}

double Sectorization::arc_profile(std::size_t i, double t) const {
    // 1 on the non-overlapped core, complementary C^2 ramps over the two
    // overlap windows, 0 outside the sector interval.
    double d = wrap_delta(t, sectors_[i].center, curve_length_);
    double half = 0.5 * len_;
    double v = overlap_;
    double ad = std::abs(d);
    if (ad >= half) return 0.0;
    if (ad <= half - v) return 1.0;
    double u = (ad - (half - v)) / v;  // in (0,1)
    double s = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
    return 1.0 - s;
}

// ---------------------------------------------------------------------------

double SectorPartition::radial_factor(double k0, Vec2 k) const {
    double x = std::hypot(k0, (*disp_)(k));
    double R = neighbourhood_radius(sec_.scale(), sp_);
    return smooth_plateau(x, R, 2.0 * R);
}

double SectorPartition::chi(std::size_t s, double k0, Vec2 k) const {
    double rad = radial_factor(k0, k);
    if (rad == 0.0) return 0.0;
    double t = curve_->project_arc(k);
    return sec_.arc_profile(s, t) * rad;
}

double SectorPartition::chi_sum(double k0, Vec2 k) const {
    double acc = 0.0;
    for (std::size_t s = 0; s < sec_.size(); ++s) acc += chi(s, k0, k);
    return acc;
}

}  // namespace fermirg
