#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "poly.hpp"
#include "types.hpp"

namespace c2dyn {

/// Point of the line at infinity, stored as its canonical unit
/// representative: the larger-modulus coordinate is real and positive.
class ProjectivePoint {
public:
    ProjectivePoint() : u_(make_vec(1.0, 0.0)) {}

    explicit ProjectivePoint(const Vec2& v) {
        double n = norm(v);
        if (!(n > 0.0) || !std::isfinite(n)) throw Error(ErrorCode::OriginInput, "zero or non-finite vector");
        Vec2 u = v / n;
        int k = std::abs(u(1)) > std::abs(u(0)) ? 1 : 0;
        cplx ph = std::conj(u(k)) / std::abs(u(k));
        u_ = u * ph;
        u_(k) = std::abs(u(k));
    }

    /// [1 : zeta]; infinite zeta gives [0 : 1].
    static ProjectivePoint from_chart(cplx zeta) {
        if (!std::isfinite(zeta.real()) || !std::isfinite(zeta.imag())) return ProjectivePoint(make_vec(0.0, 1.0));
        return ProjectivePoint(make_vec(1.0, zeta));
    }

    const Vec2& rep() const { return u_; }

    /// zeta = z2/z1, infinite at [0:1].
    cplx zeta() const {
        if (u_(0) == cplx(0.0)) return {std::numeric_limits<double>::infinity(), 0.0};
        return u_(1) / u_(0);
    }

    struct ChartValue {
        int chart; // 0: zeta = z2/z1, 1: xi = z1/z2
        cplx value;
    };

    ChartValue chart() const {
        if (std::abs(u_(1)) <= 2.0 * std::abs(u_(0))) return {0, u_(1) / u_(0)};
        return {1, u_(0) / u_(1)};
    }

private:
    Vec2 u_;
};

/// Chordal distance (sine of the Fubini-Study angle), in [0,1].
inline double chordal(const ProjectivePoint& a, const ProjectivePoint& b) {
    const Vec2& u = a.rep();
    const Vec2& v = b.rep();
    return std::abs(u(0) * v(1) - u(1) * v(0));
}

inline double chordal(const Vec2& u, const Vec2& v) {
    return std::abs(u(0) * v(1) - u(1) * v(0)) / (norm(u) * norm(v));
}

/// Polynomial self-map of C^2 of degree d. Immutable.
class MapSpec {
public:
    using Table = std::map<std::pair<int, int>, cplx>;

    MapSpec(int degree, Table comp1, Table comp2, std::string label = "")
        : d_(degree), tables_{std::move(comp1), std::move(comp2)}, label_(std::move(label)) {
        if (d_ < 2) throw Error(ErrorCode::Config, "degree must be at least 2");
        if (label_.find('\n') != std::string::npos) throw Error(ErrorCode::Config, "label contains a newline");
        for (int k = 0; k < 2; ++k) {
            full_[k] = BiPoly(d_);
            top_[k] = BiPoly(d_);
            low_[k] = BiPoly(d_);
            bool has_top = false;
            for (const auto& [ij, c] : tables_[k]) {
                auto [i, j] = ij;
                if (i < 0 || j < 0 || i + j > d_)
                    throw Error(ErrorCode::Config, "exponent pair out of range in component " + std::to_string(k + 1));
                if (!std::isfinite(c.real()) || !std::isfinite(c.imag()))
                    throw Error(ErrorCode::Config, "non-finite coefficient");
                full_[k].at(i, j) = c;
                if (i + j == d_) {
                    top_[k].at(i, j) = c;
                    if (c != cplx(0.0)) has_top = true;
                } else {
                    low_[k].at(i, j) = c;
                    lower_norm_ += std::abs(c);
                }
                scale_ = std::max(scale_, std::abs(c));
            }
            if (!has_top)
                throw Error(ErrorCode::Config, "component " + std::to_string(k + 1) + " has no term of top degree");
            dfull_[k][0] = full_[k].dx();
            dfull_[k][1] = full_[k].dy();
            dtop_[k][0] = top_[k].dx();
            dtop_[k][1] = top_[k].dy();
            dlow_[k][0] = low_[k].dx();
            dlow_[k][1] = low_[k].dy();
        }
        compute_sphere_bounds();
    }

    int degree() const { return d_; }
    const Table& table(int k) const { return tables_[k]; }
    const std::string& label() const { return label_; }

    const BiPoly& poly(int k) const { return full_[k]; }
    const BiPoly& top(int k) const { return top_[k]; }
    const BiPoly& lower(int k) const { return low_[k]; }

    bool is_homogeneous() const { return lower_norm_ == 0.0; }

    /// Largest coefficient modulus.
    double coefficient_scale() const { return scale_; }
    /// Sum of moduli of coefficients below top degree.
    double lower_norm() const { return lower_norm_; }
    /// Lower/upper bounds of |f_h| on the unit sphere (grid search with a
    /// 5% safety margin).
    double top_min() const { return top_min_; }
    double top_max() const { return top_max_; }

    Vec2 eval(const Vec2& p) const { return make_vec(full_[0](p(0), p(1)), full_[1](p(0), p(1))); }
    Vec2 eval_top(const Vec2& p) const { return make_vec(top_[0](p(0), p(1)), top_[1](p(0), p(1))); }
    Vec2 eval_lower(const Vec2& p) const { return make_vec(low_[0](p(0), p(1)), low_[1](p(0), p(1))); }

    Mat2 jac(const Vec2& p) const { return jac_of(dfull_, p); }
    Mat2 jac_top(const Vec2& p) const { return jac_of(dtop_, p); }
    Mat2 jac_lower(const Vec2& p) const { return jac_of(dlow_, p); }

    bool operator==(const MapSpec& o) const {
        return d_ == o.d_ && label_ == o.label_ && tables_[0] == o.tables_[0] && tables_[1] == o.tables_[1];
    }

private:
    static Mat2 jac_of(const BiPoly (&dp)[2][2], const Vec2& p) {
        Mat2 m;
        for (int k = 0; k < 2; ++k)
            for (int l = 0; l < 2; ++l) m(k, l) = dp[k][l](p(0), p(1));
        return m;
    }

    double top_abs(double t, double phi) const {
        Vec2 u = make_vec(std::cos(t), std::sin(t) * cplx(std::cos(phi), std::sin(phi)));
        return norm(eval_top(u));
    }

    void compute_sphere_bounds() {
        // |f_h(u)| depends only on [u]; parametrize by (t, phi).
        const int nt = 65, np = 128;
        double best = std::numeric_limits<double>::infinity(), worst = 0.0;
        double bt = 0.0, bp = 0.0;
        for (int a = 0; a < nt; ++a) {
            double t = 0.5 * kPi * a / (nt - 1);
            for (int b = 0; b < np; ++b) {
                double phi = kTwoPi * b / np;
                double v = top_abs(t, phi);
                if (v < best) {
                    best = v;
                    bt = t;
                    bp = phi;
                }
                worst = std::max(worst, v);
            }
        }
        // pattern search around the grid minimum
        double st = 0.5 * kPi / (nt - 1), sp = kTwoPi / np;
        while (st > 1e-10) {
            bool moved = false;
            for (int dt = -1; dt <= 1; ++dt)
                for (int dp = -1; dp <= 1; ++dp) {
                    double t = std::clamp(bt + dt * st, 0.0, 0.5 * kPi), phi = bp + dp * sp;
                    double v = top_abs(t, phi);
                    if (v < best) {
                        best = v;
                        bt = t;
                        bp = phi;
                        moved = true;
                    }
                }
            if (!moved) {
                st *= 0.5;
                sp *= 0.5;
            }
        }
        top_min_ = 0.95 * best;
        top_max_ = 1.05 * worst;
    }

    int d_;
    Table tables_[2];
    std::string label_;
    BiPoly full_[2], top_[2], low_[2];
    BiPoly dfull_[2][2], dtop_[2][2], dlow_[2][2];
    double scale_ = 0.0;
    double lower_norm_ = 0.0;
    double top_min_ = 0.0;
    double top_max_ = 0.0;
};

/// f_tau = f_h + tau (f - f_h).
struct HomotopySlice {
    const MapSpec* base;
    cplx tau;
};

struct Jacobian {
    Mat2 matrix;
    cplx det;
    double log_abs_det() const { return std::log(std::abs(det)); }
};

inline Vec2 evaluate(const MapSpec& f, const Vec2& p) { return f.eval(p); }

inline Vec2 evaluate(const HomotopySlice& s, const Vec2& p) {
    return s.base->eval_top(p) + s.tau * s.base->eval_lower(p);
}

inline Jacobian make_jacobian(const Mat2& m) { return {m, m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)}; }

inline Jacobian jacobian(const MapSpec& f, const Vec2& p) { return make_jacobian(f.jac(p)); }

inline Jacobian jacobian(const HomotopySlice& s, const Vec2& p) {
    return make_jacobian(s.base->jac_top(p) + s.tau * s.base->jac_lower(p));
}

inline MapSpec homogeneous_part(const MapSpec& f) {
    MapSpec::Table t[2];
    for (int k = 0; k < 2; ++k)
        for (const auto& [ij, c] : f.table(k))
            if (ij.first + ij.second == f.degree()) t[k][ij] = c;
    return MapSpec(f.degree(), t[0], t[1], f.label());
}

struct RegularityCheck {
    bool regular;
    double resultant; // |Res(f_h1, f_h2)| of the binary forms
};

inline RegularityCheck check_regular(const MapSpec& f) {
    const int d = f.degree();
    Poly a = f.top(0).dehomogenize(d);
    Poly b = f.top(1).dehomogenize(d);
    double scale = 0.0;
    for (auto& c : a) scale = std::max(scale, std::abs(c));
    for (auto& c : b) scale = std::max(scale, std::abs(c));
    double r = std::abs(sylvester_resultant(a, b));
    return {r > 1e-12 * std::pow(scale, 2.0 * d), r};
}

inline void require_regular(const MapSpec& f) {
    if (!check_regular(f).regular) throw Error(ErrorCode::NonRegularMap, "top-degree parts have a common zero");
}

/// The map induced on the line at infinity, [u] -> [f_h(u)].
class RationalMap {
public:
    explicit RationalMap(const MapSpec& f) : d_(f.degree()) {
        for (int k = 0; k < 2; ++k) {
            top_[k] = f.top(k);
            dtop_[k][0] = top_[k].dx();
            dtop_[k][1] = top_[k].dy();
        }
        den_ = top_[0].dehomogenize(d_);
        num_ = top_[1].dehomogenize(d_);
    }

    int degree() const { return d_; }

    /// Chart zeta = z2/z1: f_Pi(zeta) = numerator(zeta)/denominator(zeta).
    const Poly& numerator() const { return num_; }
    const Poly& denominator() const { return den_; }

    Vec2 lift(const Vec2& u) const { return make_vec(top_[0](u(0), u(1)), top_[1](u(0), u(1))); }

    Mat2 lift_jac(const Vec2& u) const {
        Mat2 m;
        for (int k = 0; k < 2; ++k)
            for (int l = 0; l < 2; ++l) m(k, l) = dtop_[k][l](u(0), u(1));
        return m;
    }

    ProjectivePoint operator()(const ProjectivePoint& a) const { return ProjectivePoint(lift(a.rep())); }

    /// Unnormalized image direction f_h(u)/|f_h(u)| of a unit vector u, keeping phase.
    Vec2 step(const Vec2& u) const {
        Vec2 v = lift(u);
        return v / norm(v);
    }

    /// Value in the zeta chart; infinite at the pole.
    cplx apply_chart(cplx zeta) const {
        if (!std::isfinite(zeta.real()) || !std::isfinite(zeta.imag())) return (*this)(ProjectivePoint::from_chart(zeta)).zeta();
        cplx den = horner(den_, zeta);
        cplx num = horner(num_, zeta);
        if (den == cplx(0.0)) {
            if (num == cplx(0.0)) throw Error(ErrorCode::DegenerateChart, "0/0 in chart");
            return {std::numeric_limits<double>::infinity(), 0.0};
        }
        return num / den;
    }

    /// Spherical derivative |g'| (1+|x|^2)/(1+|g|^2), computed in whichever
    /// charts keep source and image coordinates bounded by 2.
    double sph_derivative(const ProjectivePoint& a) const {
        auto cv = a.chart();
        Vec2 U, dU;
        if (cv.chart == 0) {
            U = make_vec(1.0, cv.value);
            dU = make_vec(0.0, 1.0);
        } else {
            U = make_vec(cv.value, 1.0);
            dU = make_vec(1.0, 0.0);
        }
        Vec2 F = lift(U);
        Vec2 dF = lift_jac(U) * dU;
        cplx g, dg;
        if (std::abs(F(1)) <= 2.0 * std::abs(F(0))) {
            g = F(1) / F(0);
            dg = (dF(1) * F(0) - F(1) * dF(0)) / (F(0) * F(0));
        } else {
            g = F(0) / F(1);
            dg = (dF(0) * F(1) - F(0) * dF(1)) / (F(1) * F(1));
        }
        return std::abs(dg) * (1.0 + std::norm(cv.value)) / (1.0 + std::norm(g));
    }

    double log_sph_derivative(const ProjectivePoint& a) const { return std::log(sph_derivative(a)); }

    /// Critical points: zeros of the binary form det Df_h (degree 2(d-1)).
    std::vector<ProjectivePoint> critical_points() const {
        BiPoly det = dtop_[0][0] * dtop_[1][1] - dtop_[0][1] * dtop_[1][0];
        const int n = 2 * (d_ - 1);
        Poly q = det.dehomogenize(n);
        std::vector<ProjectivePoint> out;
        // roots at infinity of the zeta chart show up as a degree drop
        Poly t = trimmed(q, 1e-14);
        int deficit = n - (static_cast<int>(t.size()) - 1);
        for (cplx r : roots(t)) out.push_back(ProjectivePoint::from_chart(r));
        for (int i = 0; i < deficit; ++i) out.push_back(ProjectivePoint(make_vec(0.0, 1.0)));
        return out;
    }

private:
    int d_;
    BiPoly top_[2];
    BiPoly dtop_[2][2];
    Poly num_, den_;
};

inline RationalMap induced_pi(const MapSpec& f) {
    require_regular(f);
    return RationalMap(f);
}

} // namespace c2dyn
