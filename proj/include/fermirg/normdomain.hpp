#pragma once

// Truncated formal power series in t0,t1,t2 with coefficients in
// [0,inf] and saturating arithmetic. Used to track sizes of kernels and
// of all their position-space decay moments at once.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fermirg {

/// Nonnegative extended real with the absorbing convention 0*inf = inf.
/// The infinite element is a tag, not IEEE infinity.
struct NormCoeff {
    double value = 0.0;
    bool infinite = false;

    static NormCoeff inf() { return {0.0, true}; }
    static NormCoeff finite(double v);

    bool is_zero() const { return !infinite && value == 0.0; }

    friend NormCoeff operator+(NormCoeff a, NormCoeff b);
    friend NormCoeff operator*(NormCoeff a, NormCoeff b);
    friend bool operator==(NormCoeff a, NormCoeff b);
    /// Total order with inf maximal.
    friend bool leq(NormCoeff a, NormCoeff b);
};

NormCoeff coeff_max(NormCoeff a, NormCoeff b);
NormCoeff coeff_min(NormCoeff a, NormCoeff b);

/// Multi-index (d0; d1, d2): temporal order d0, spatial orders d1, d2.
struct MultiIndex {
    int d0 = 0, d1 = 0, d2 = 0;
    int spatial_order() const { return d1 + d2; }
    int total_order() const { return d0 + d1 + d2; }
    friend bool operator==(MultiIndex a, MultiIndex b) {
        return a.d0 == b.d0 && a.d1 == b.d1 && a.d2 == b.d2;
    }
};

/// Tracked region: d0 <= r0 and d1+d2 <= r. Everything outside reads
/// as the infinite coefficient.
struct TruncationShape {
    int r = 2;
    int r0 = 1;
    friend bool operator==(TruncationShape a, TruncationShape b) {
        return a.r == b.r && a.r0 == b.r0;
    }
    std::size_t tracked_count() const;
    /// Flat index of a tracked multi-index; throws if outside.
    std::size_t index_of(MultiIndex d) const;
    bool contains(MultiIndex d) const {
        return d.d0 >= 0 && d.d1 >= 0 && d.d2 >= 0 && d.d0 <= r0 &&
               d.d1 + d.d2 <= r;
    }
    std::vector<MultiIndex> tracked() const;
};

/// Element of the norm domain: coefficients stored on the tracked
/// region, implicitly infinite outside.
class NormSeries {
public:
    NormSeries() : NormSeries(TruncationShape{}) {}
    explicit NormSeries(TruncationShape shape);
    /// Constant series c + 0*t + ...
    NormSeries(TruncationShape shape, double constant);

    const TruncationShape& shape() const { return shape_; }

    NormCoeff at(MultiIndex d) const;  // inf outside the tracked region
    void set(MultiIndex d, NormCoeff c);
    void add_at(MultiIndex d, NormCoeff c);

    double constant_term() const;       // throws if infinite
    bool constant_is_infinite() const;

    bool all_finite() const;

    friend NormSeries operator+(const NormSeries& x, const NormSeries& y);
    friend NormSeries operator*(const NormSeries& x, const NormSeries& y);
    NormSeries scaled(double c) const;  // coefficientwise c*x_d

    friend bool operator==(const NormSeries& x, const NormSeries& y);

    std::string to_string() const;

private:
    TruncationShape shape_;
    std::vector<NormCoeff> coeffs_;
    static void require_same_shape(const NormSeries& x, const NormSeries& y);
};

bool ns_leq(const NormSeries& x, const NormSeries& y);
NormSeries ns_max(const NormSeries& x, const NormSeries& y);
NormSeries ns_min(const NormSeries& x, const NormSeries& y);

/// (a - X)^{-1} = 1/(a-X_0) * sum_n ((X-X_0)/(a-X_0))^n, summed to
/// n = r+r0 (the zero-constant part is nilpotent within the truncation).
/// Requires X_0 finite and a - X_0 > 0.
NormSeries ns_geom_inverse(double a, const NormSeries& x);

/// Formal derivative along axis (0,1,2). Coefficients whose source
/// index leaves the tracked region become infinite.
NormSeries ns_partial(const NormSeries& x, int axis);

/// Scale constant: coefficient M^{j*(d0+d1+d2)} on the tracked region.
NormSeries ns_cj(int j, double M, TruncationShape shape);

/// ns_cj(j) / (1 - M^j X); requires X_0 < M^{-j}.
NormSeries ns_ej(int j, double M, const NormSeries& x);

/// JSON round trip, schema {"shape":{"r":..,"r0":..},
/// "coeffs":[{"delta":[d0,d1,d2],"value":number|"inf"},...]}.
std::string ns_to_json(const NormSeries& x);
NormSeries ns_from_json(const std::string& text);

}  // namespace fermirg
