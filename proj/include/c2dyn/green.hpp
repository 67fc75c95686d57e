#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "map.hpp"

namespace c2dyn {

struct GreenValue {
    double value = 0.0;       // nats
    double error_bound = 0.0;
    int iterations = 0;
    bool escaped = false;
};

/// Escape radius and the constants that go with it.
///
/// For |z| >= radius:  (2/3) m |z|^d <= |f(z)| <= (M + m/3) |z|^d, where m, M
/// bound |f_h| on the unit sphere. Hence orbits leaving the ball at least
/// double in norm each step, and log|f(z)| - d log|z| lies in [c_lo, c_hi].
struct EscapeData {
    double radius;
    double log_radius;
    double c_lo, c_hi;
    double c0;        // max(|c_lo|, |c_hi|)
    double h_bound;   // bound on |log|f_h(u)|| over unit u
    double rho_lo, rho_hi; // bounds on G_h over the unit sphere
};

inline EscapeData escape_data(const MapSpec& f) {
    const int d = f.degree();
    const double m = f.top_min(), M = f.top_max(), L = f.lower_norm();
    if (!(m > 0.0)) throw Error(ErrorCode::NonRegularMap, "f_h vanishes on the unit sphere");
    EscapeData e{};
    e.radius = std::max({2.0, 3.0 * L / m, std::pow(3.0 / m, 1.0 / (d - 1))});
    e.log_radius = std::log(e.radius);
    e.c_lo = std::log(2.0 * m / 3.0);
    e.c_hi = std::log(M + m / 3.0);
    e.c0 = std::max(std::abs(e.c_lo), std::abs(e.c_hi));
    e.h_bound = std::max(std::abs(std::log(m)), std::abs(std::log(M)));
    e.rho_lo = std::log(m) / (d - 1);
    e.rho_hi = std::log(M) / (d - 1);
    return e;
}

namespace detail {

inline constexpr double kLogDomain = 1e100;

// G_h on the unit sphere: sum_j d^-(j+1) log|f_h(u_j)| along normalized
// f_h-orbit, truncated once the remaining tail is below tol.
inline double robin_series(const MapSpec& f, Vec2 u, double h_bound, double tol, int& iters) {
    const double d = f.degree();
    double w = 1.0 / d, s = 0.0;
    iters = 0;
    while (true) {
        // remaining tail after adding this term is at most w * h_bound / (d - 1)
        Vec2 v = f.eval_top(u);
        double nv = norm(v);
        s += w * std::log(nv);
        u = v / nv;
        ++iters;
        if (w * h_bound / (d - 1.0) < tol || iters > 4000) break;
        w /= d;
    }
    return s;
}

} // namespace detail

/// G(p) = lim d^-n log+|f^n(p)|.
inline GreenValue green(const MapSpec& f, const EscapeData& e, const Vec2& p, int budget = 1000) {
    const double d = f.degree();
    Vec2 x = p;
    int n = 0;
    double scale = 1.0; // d^-n
    double r = norm(x);
    while (r <= e.radius) {
        if (n >= budget) {
            GreenValue g;
            g.value = 0.0;
            g.escaped = false;
            g.iterations = n;
            g.error_bound = scale * (e.log_radius + std::max(0.0, e.c_hi) / (d - 1.0));
            return g;
        }
        x = f.eval(x);
        ++n;
        scale /= d;
        r = norm(x);
        if (!std::isfinite(r)) break;
    }
    // exact iteration until the lower-order terms drop below double precision
    while (r <= detail::kLogDomain) {
        x = f.eval(x);
        ++n;
        scale /= d;
        r = norm(x);
    }
    if (!std::isfinite(r)) throw Error(ErrorCode::NumericalFailure, "overflow in Green iteration");
    int hi = 0;
    double tol = 1e-17 / scale;
    double rho = detail::robin_series(f, x / r, e.h_bound, tol, hi);
    GreenValue g;
    g.escaped = true;
    g.iterations = n + hi;
    g.value = scale * (std::log(r) + rho);
    // Tail estimate: |G - G_h| <= (4 L/m)/|x| d/(d-1) at |x| >= 1e100, the
    // truncated Robin series, and a few ulps of rounding.
    double tail = 4.0 * f.lower_norm() / f.top_min() / r * d / (d - 1.0);
    g.error_bound = scale * (tail + tol) + 8.0 * 2.2e-16 * std::abs(g.value);
    return g;
}

inline GreenValue green(const MapSpec& f, const Vec2& p, int budget = 1000) {
    return green(f, escape_data(f), p, budget);
}

/// Homogeneous Green function G_h(p) = log|p| + rho_G([p]).
inline GreenValue green_h(const MapSpec& f, const EscapeData& e, const Vec2& p, int /*budget*/ = 1000) {
    double r = norm(p);
    if (!(r > 0.0)) throw Error(ErrorCode::OriginInput, "G_h is undefined at the origin");
    int it = 0;
    double rho = detail::robin_series(f, p / r, e.h_bound, 1e-17, it);
    GreenValue g;
    g.value = std::log(r) + rho;
    g.escaped = true;
    g.iterations = it;
    g.error_bound = 1e-17 + 4.0 * 2.2e-16 * (std::abs(std::log(r)) + std::abs(rho));
    return g;
}

inline GreenValue green_h(const MapSpec& f, const Vec2& p, int budget = 1000) {
    return green_h(f, escape_data(f), p, budget);
}

/// Robin function rho_G(a) = G_h(unit representative of a).
inline double robin(const MapSpec& f, const EscapeData& e, const ProjectivePoint& a) {
    return green_h(f, e, a.rep()).value;
}

inline double robin(const MapSpec& f, const ProjectivePoint& a) { return robin(f, escape_data(f), a); }

/// Holomorphic gradient (dG/dz, dG/dw) of d^-n log|f^n(p)|. Past |x| = 1e100
/// the orbit is continued with f_h in normalized form.
inline Vec2 green_gradient_complex(const MapSpec& f, const EscapeData& e, const Vec2& p, int n) {
    const double d = f.degree();
    std::vector<Vec2> orbit;
    orbit.reserve(64);
    Vec2 x = p;
    bool escaped = norm(x) > e.radius;
    int m = 0;
    while (m < n && norm(x) <= detail::kLogDomain) {
        orbit.push_back(x);
        x = f.eval(x);
        ++m;
        if (norm(x) > e.radius) escaped = true;
    }
    if (!escaped) throw Error(ErrorCode::NotEscaped, "orbit did not leave the escape ball within the horizon");
    double r = norm(x);
    if (!std::isfinite(r)) throw Error(ErrorCode::NumericalFailure, "overflow in gradient orbit");
    Eigen::Matrix<cplx, 1, 2> w;
    if (m == n) {
        w = x.adjoint() / (2.0 * r) / r;
    } else {
        // normalized homogeneous tail of length k
        const int k = n - m;
        std::vector<Vec2> us;
        std::vector<double> scales;
        us.reserve(static_cast<std::size_t>(k) + 1);
        Vec2 u = x / r;
        for (int j = 0; j < k; ++j) {
            us.push_back(u);
            Vec2 v = f.eval_top(u);
            double nv = norm(v);
            scales.push_back(nv);
            u = v / nv;
        }
        Eigen::Matrix<cplx, 1, 2> v = u.adjoint();
        for (int j = k - 1; j >= 0; --j)
            v = v * f.jac_top(us[static_cast<std::size_t>(j)]) / (d * scales[static_cast<std::size_t>(j)]);
        w = v / (2.0 * r);
    }
    // divide by d at every step so long orbits cannot overflow
    for (int j = m - 1; j >= 0; --j) w = w * f.jac(orbit[static_cast<std::size_t>(j)]) / d;
    return w.transpose();
}

struct GreenJet {
    double value = 0.0;
    Vec2 grad = Vec2::Zero(); // holomorphic gradient (dG/dz, dG/dw)
    bool escaped = false;
};

/// G and its gradient in one pass. Points that do not escape within the
/// budget get value 0 and zero gradient.
inline GreenJet green_jet(const MapSpec& f, const EscapeData& e, const Vec2& p, int budget = 1000) {
    const double d = f.degree();
    GreenJet out;
    thread_local std::vector<Vec2> orbit;
    orbit.clear();
    Vec2 x = p;
    double r = norm(x);
    int n = 0;
    while (r <= e.radius) {
        if (n >= budget) return out;
        orbit.push_back(x);
        x = f.eval(x);
        ++n;
        r = norm(x);
    }
    while (r <= detail::kLogDomain) {
        orbit.push_back(x);
        x = f.eval(x);
        ++n;
        r = norm(x);
    }
    if (!std::isfinite(r)) throw Error(ErrorCode::NumericalFailure, "overflow in Green iteration");
    int hi = 0;
    double scale = std::pow(d, -double(n));
    double rho = detail::robin_series(f, x / r, e.h_bound, 1e-17 / scale, hi);
    out.value = scale * (std::log(r) + rho);
    out.escaped = true;
    Eigen::Matrix<cplx, 1, 2> w = x.adjoint() / (2.0 * r) / r;
    for (int j = n - 1; j >= 0; --j) w = w * f.jac(orbit[static_cast<std::size_t>(j)]) / d;
    out.grad = w.transpose();
    return out;
}

/// Real gradient (d/dRe z, d/dIm z, d/dRe w, d/dIm w) of the horizon-n approximant.
inline std::array<double, 4> green_gradient(const MapSpec& f, const EscapeData& e, const Vec2& p, int n) {
    Vec2 g = green_gradient_complex(f, e, p, n);
    return {2.0 * g(0).real(), -2.0 * g(0).imag(), 2.0 * g(1).real(), -2.0 * g(1).imag()};
}

inline std::array<double, 4> green_gradient(const MapSpec& f, const Vec2& p, int n) {
    return green_gradient(f, escape_data(f), p, n);
}

/// Smallest level where cone points are deep in the escape region.
inline double model_level(const EscapeData& e) {
    return e.log_radius + std::max(std::abs(e.rho_lo), std::abs(e.rho_hi)) + 1.0;
}

} // namespace c2dyn
