#include "fermirg/normdomain.hpp"

#include <cmath>
#include <sstream>

#include "json.hpp"

namespace fermirg {

NormCoeff NormCoeff::finite(double v) {
    if (!(v >= 0.0) || std::isinf(v) || std::isnan(v))
        throw std::invalid_argument("NormCoeff: value must be finite and >= 0");
    return {v, false};
}

NormCoeff operator+(NormCoeff a, NormCoeff b) {
    if (a.infinite || b.infinite) return NormCoeff::inf();
    return {a.value + b.value, false};
}

NormCoeff operator*(NormCoeff a, NormCoeff b) {
    // 0*inf = inf: the infinite tag absorbs unconditionally.
    if (a.infinite || b.infinite) return NormCoeff::inf();
    return {a.value * b.value, false};
}

bool operator==(NormCoeff a, NormCoeff b) {
    if (a.infinite != b.infinite) return false;
    return a.infinite || a.value == b.value;
}

bool leq(NormCoeff a, NormCoeff b) {
    if (b.infinite) return true;
    if (a.infinite) return false;
    return a.value <= b.value;
}

NormCoeff coeff_max(NormCoeff a, NormCoeff b) { return leq(a, b) ? b : a; }
NormCoeff coeff_min(NormCoeff a, NormCoeff b) { return leq(a, b) ? a : b; }

std::size_t TruncationShape::tracked_count() const {
    std::size_t spatial = 0;
    for (int s = 0; s <= r; ++s) spatial += static_cast<std::size_t>(s + 1);
    return static_cast<std::size_t>(r0 + 1) * spatial;
}

std::size_t TruncationShape::index_of(MultiIndex d) const {
    if (!contains(d)) throw std::out_of_range("multi-index outside tracked region");
    // layout: blocks by d0, then by total spatial order s = d1+d2, then d2.
    std::size_t spatial = 0;
    for (int s = 0; s < d.d1 + d.d2; ++s) spatial += static_cast<std::size_t>(s + 1);
    spatial += static_cast<std::size_t>(d.d2);
    std::size_t per_d0 = 0;
    for (int s = 0; s <= r; ++s) per_d0 += static_cast<std::size_t>(s + 1);
    return static_cast<std::size_t>(d.d0) * per_d0 + spatial;
}

std::vector<MultiIndex> TruncationShape::tracked() const {
    std::vector<MultiIndex> out;
    out.reserve(tracked_count());
    for (int d0 = 0; d0 <= r0; ++d0)
        for (int s = 0; s <= r; ++s)
            for (int d2 = 0; d2 <= s; ++d2) out.push_back({d0, s - d2, d2});
    return out;
}

NormSeries::NormSeries(TruncationShape shape)
    : shape_(shape), coeffs_(shape.tracked_count()) {}

NormSeries::NormSeries(TruncationShape shape, double constant) : NormSeries(shape) {
    set({0, 0, 0}, NormCoeff::finite(constant));
}

NormCoeff NormSeries::at(MultiIndex d) const {
    if (!shape_.contains(d)) return NormCoeff::inf();
    return coeffs_[shape_.index_of(d)];
}

void NormSeries::set(MultiIndex d, NormCoeff c) { coeffs_[shape_.index_of(d)] = c; }

void NormSeries::add_at(MultiIndex d, NormCoeff c) {
    auto& slot = coeffs_[shape_.index_of(d)];
    slot = slot + c;
}

double NormSeries::constant_term() const {
    NormCoeff c = at({0, 0, 0});
    if (c.infinite) throw std::domain_error("constant term is infinite");
    return c.value;
}

bool NormSeries::constant_is_infinite() const { return at({0, 0, 0}).infinite; }

bool NormSeries::all_finite() const {
    for (const auto& c : coeffs_)
        if (c.infinite) return false;
    return true;
}

void NormSeries::require_same_shape(const NormSeries& x, const NormSeries& y) {
    if (!(x.shape_ == y.shape_))
        throw std::invalid_argument("norm series shape mismatch");
}

NormSeries operator+(const NormSeries& x, const NormSeries& y) {
    NormSeries::require_same_shape(x, y);
    NormSeries out(x.shape_);
    for (std::size_t i = 0; i < out.coeffs_.size(); ++i)
        out.coeffs_[i] = x.coeffs_[i] + y.coeffs_[i];
    return out;
}

NormSeries operator*(const NormSeries& x, const NormSeries& y) {
    NormSeries::require_same_shape(x, y);
    NormSeries out(x.shape_);
    // Cauchy product; the tracked region is downward closed, so every
    // beta+gamma=delta split stays inside it.
    for (MultiIndex d : x.shape_.tracked()) {
        NormCoeff acc{0.0, false};
        for (int b0 = 0; b0 <= d.d0; ++b0)
            for (int b1 = 0; b1 <= d.d1; ++b1)
                for (int b2 = 0; b2 <= d.d2; ++b2) {
                    MultiIndex beta{b0, b1, b2};
                    MultiIndex gamma{d.d0 - b0, d.d1 - b1, d.d2 - b2};
                    acc = acc + x.at(beta) * y.at(gamma);
                }
        out.set(d, acc);
    }
    return out;
}

NormSeries NormSeries::scaled(double c) const {
    if (!(c >= 0.0)) throw std::invalid_argument("scale must be >= 0");
    NormSeries out(shape_);
    for (std::size_t i = 0; i < coeffs_.size(); ++i) {
        if (coeffs_[i].infinite)
            out.coeffs_[i] = NormCoeff::inf();
        else
            out.coeffs_[i] = NormCoeff::finite(c * coeffs_[i].value);
    }
    return out;
}

bool operator==(const NormSeries& x, const NormSeries& y) {
    if (!(x.shape_ == y.shape_)) return false;
    for (std::size_t i = 0; i < x.coeffs_.size(); ++i)
        if (!(x.coeffs_[i] == y.coeffs_[i])) return false;
    return true;
}

bool ns_leq(const NormSeries& x, const NormSeries& y) {
    if (!(x.shape() == y.shape()))
        throw std::invalid_argument("norm series shape mismatch");
    for (MultiIndex d : x.shape().tracked())
        if (!leq(x.at(d), y.at(d))) return false;
    return true;
}

NormSeries ns_max(const NormSeries& x, const NormSeries& y) {
    if (!(x.shape() == y.shape()))
        throw std::invalid_argument("norm series shape mismatch");
    NormSeries out(x.shape());
    for (MultiIndex d : x.shape().tracked()) out.set(d, coeff_max(x.at(d), y.at(d)));
    return out;
}

NormSeries ns_min(const NormSeries& x, const NormSeries& y) {
    if (!(x.shape() == y.shape()))
        throw std::invalid_argument("norm series shape mismatch");
    NormSeries out(x.shape());
    for (MultiIndex d : x.shape().tracked()) out.set(d, coeff_min(x.at(d), y.at(d)));
    return out;
}

NormSeries ns_geom_inverse(double a, const NormSeries& x) {
    if (x.constant_is_infinite())
        throw std::domain_error("geom inverse: constant term is infinite");
    double x0 = x.constant_term();
    if (!(a - x0 > 0.0))
        throw std::domain_error("geom inverse: requires a - X_0 > 0");

    NormSeries rest = x;  // X - X_0: constant term removed
    rest.set({0, 0, 0}, NormCoeff::finite(0.0));
    NormSeries ratio = rest.scaled(1.0 / (a - x0));

    TruncationShape sh = x.shape();
    NormSeries acc(sh, 1.0);                 // running power of ratio
    NormSeries sum(sh, 1.0);
    int nmax = sh.r + sh.r0;
    for (int n = 1; n <= nmax; ++n) {
        acc = acc * ratio;
        sum = sum + acc;
    }
    return sum.scaled(1.0 / (a - x0));
}

NormSeries ns_partial(const NormSeries& x, int axis) {
    if (axis < 0 || axis > 2) throw std::invalid_argument("axis must be 0, 1 or 2");
    NormSeries out(x.shape());
    for (MultiIndex d : x.shape().tracked()) {
        MultiIndex up = d;
        int factor = 0;
        switch (axis) {
            case 0: up.d0 += 1; factor = d.d0 + 1; break;
            case 1: up.d1 += 1; factor = d.d1 + 1; break;
            case 2: up.d2 += 1; factor = d.d2 + 1; break;
        }
        NormCoeff src = x.at(up);  // inf when `up` leaves the region
        if (src.infinite)
            out.set(d, NormCoeff::inf());
        else
            out.set(d, NormCoeff::finite(static_cast<double>(factor) * src.value));
    }
    return out;
}

NormSeries ns_cj(int j, double M, TruncationShape shape) {
    if (j < 0) throw std::invalid_argument("ns_cj: j must be >= 0");
    if (!(M > 1.0)) throw std::invalid_argument("ns_cj: M must be > 1");
    NormSeries out(shape);
    for (MultiIndex d : shape.tracked())
        out.set(d, NormCoeff::finite(std::pow(M, static_cast<double>(j) * d.total_order())));
    return out;
}

NormSeries ns_ej(int j, double M, const NormSeries& x) {
    if (x.constant_is_infinite() || !(x.constant_term() < std::pow(M, -j)))
        throw std::domain_error("ns_ej: requires X_0 < M^{-j}");
    NormSeries mx = x.scaled(std::pow(M, j));
    return ns_cj(j, M, x.shape()) * ns_geom_inverse(1.0, mx);
}

std::string NormSeries::to_string() const {
    std::ostringstream os;
    bool first = true;
    for (MultiIndex d : shape_.tracked()) {
        NormCoeff c = at(d);
        if (c.is_zero()) continue;
        if (!first) os << " + ";
        first = false;
        if (c.infinite)
            os << "inf";
        else
            os << c.value;
        if (d.total_order() > 0)
            os << "*t^(" << d.d0 << "," << d.d1 << "," << d.d2 << ")";
    }
    if (first) os << "0";
    return os.str();
}

std::string ns_to_json(const NormSeries& x) {
    nlohmann::json j;
    j["shape"] = {{"r", x.shape().r}, {"r0", x.shape().r0}};
    auto coeffs = nlohmann::json::array();
    for (MultiIndex d : x.shape().tracked()) {
        NormCoeff c = x.at(d);
        nlohmann::json e;
        e["delta"] = {d.d0, d.d1, d.d2};
        if (c.infinite)
            e["value"] = "inf";
        else
            e["value"] = c.value;
        coeffs.push_back(e);
    }
    j["coeffs"] = coeffs;
    return j.dump();
}

NormSeries ns_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    TruncationShape sh{j.at("shape").at("r").get<int>(),
                       j.at("shape").at("r0").get<int>()};
    NormSeries out(sh);
    for (const auto& e : j.at("coeffs")) {
        MultiIndex d{e.at("delta")[0].get<int>(), e.at("delta")[1].get<int>(),
                     e.at("delta")[2].get<int>()};
        if (e.at("value").is_string())
            out.set(d, NormCoeff::inf());
        else
            out.set(d, NormCoeff::finite(e.at("value").get<double>()));
    }
    return out;
}

}  // namespace fermirg
