#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Eigenvalues>

#include "types.hpp"

namespace c2dyn {

// Univariate polynomials are coefficient vectors, lowest degree first.
using Poly = std::vector<cplx>;

inline cplx horner(const Poly& p, cplx x) {
    cplx acc = 0.0;
    for (auto it = p.rbegin(); it != p.rend(); ++it) acc = acc * x + *it;
    return acc;
}

inline void horner_d(const Poly& p, cplx x, cplx& val, cplx& der) {
    val = 0.0;
    der = 0.0;
    for (auto it = p.rbegin(); it != p.rend(); ++it) {
        der = der * x + val;
        val = val * x + *it;
    }
}

/// Drops leading coefficients that are zero relative to the largest one.
inline Poly trimmed(Poly p, double rel = 0.0) {
    double scale = 0.0;
    for (auto& c : p) scale = std::max(scale, std::abs(c));
    while (!p.empty() && std::abs(p.back()) <= rel * scale) p.pop_back();
    return p;
}

namespace detail {

// Aberth-Ehrlich refinement of a full set of approximate roots.
inline void aberth(const Poly& p, std::vector<cplx>& z, int max_iter = 50) {
    const std::size_t n = z.size();
    if (n == 0) return;
    for (int it = 0; it < max_iter; ++it) {
        double max_rel = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            cplx v, d;
            horner_d(p, z[i], v, d);
            if (v == cplx(0.0)) continue;
            cplx ratio = v / d;
            cplx s = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) {
                    cplx diff = z[i] - z[j];
                    if (diff != cplx(0.0)) s += 1.0 / diff;
                }
            cplx denom = 1.0 - ratio * s;
            cplx w = (denom == cplx(0.0)) ? ratio : ratio / denom;
            if (!std::isfinite(w.real()) || !std::isfinite(w.imag())) continue;
            z[i] -= w;
            max_rel = std::max(max_rel, std::abs(w) / (1.0 + std::abs(z[i])));
        }
        if (max_rel < 1e-15) break;
    }
}

} // namespace detail

/// All complex roots of p (degree after trimming exact zeros), via
/// companion-matrix eigenvalues followed by Aberth refinement.
inline std::vector<cplx> roots(const Poly& coeffs) {
    Poly p = trimmed(coeffs);
    if (p.size() <= 1) return {};
    const int n = static_cast<int>(p.size()) - 1;
    if (n == 1) return {-p[0] / p[1]};
    if (n == 2) {
        cplx a = p[2], b = p[1], c = p[0];
        cplx disc = std::sqrt(b * b - 4.0 * a * c);
        cplx q = (std::real(std::conj(b) * disc) >= 0.0) ? -0.5 * (b + disc) : -0.5 * (b - disc);
        std::vector<cplx> r;
        if (q == cplx(0.0)) {
            r = {0.0, 0.0};
        } else {
            r = {q / a, c / q};
        }
        return r;
    }
    Eigen::MatrixXcd comp = Eigen::MatrixXcd::Zero(n, n);
    for (int i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
    for (int i = 0; i < n; ++i) comp(i, n - 1) = -p[i] / p[n];
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(comp, false);
    std::vector<cplx> z(n);
    for (int i = 0; i < n; ++i) z[i] = es.eigenvalues()(i);
    detail::aberth(p, z);
    return z;
}

/// Dense bivariate polynomial sum c(i,j) x^i y^j with i+j <= deg.
class BiPoly {
public:
    BiPoly() = default;
    explicit BiPoly(int deg) : deg_(deg), c_(static_cast<std::size_t>((deg + 1) * (deg + 2) / 2), cplx(0.0)) {}

    int degree() const { return deg_; }

    static std::size_t index(int i, int j) {
        int k = i + j;
        return static_cast<std::size_t>(k * (k + 1) / 2 + j);
    }

    cplx& at(int i, int j) { return c_[index(i, j)]; }
    cplx at(int i, int j) const {
        if (i < 0 || j < 0 || i + j > deg_) return 0.0;
        return c_[index(i, j)];
    }

    cplx operator()(cplx x, cplx y) const {
        // Horner in y of polynomials in x
        cplx acc = 0.0;
        for (int j = deg_; j >= 0; --j) {
            cplx px = 0.0;
            for (int i = deg_ - j; i >= 0; --i) px = px * x + c_[index(i, j)];
            acc = acc * y + px;
        }
        return acc;
    }

    BiPoly dx() const {
        BiPoly r(std::max(deg_ - 1, 0));
        for (int i = 1; i <= deg_; ++i)
            for (int j = 0; i + j <= deg_; ++j) r.at(i - 1, j) += double(i) * at(i, j);
        return r;
    }

    BiPoly dy() const {
        BiPoly r(std::max(deg_ - 1, 0));
        for (int i = 0; i <= deg_; ++i)
            for (int j = 1; i + j <= deg_; ++j) r.at(i, j - 1) += double(j) * at(i, j);
        return r;
    }

    BiPoly operator*(const BiPoly& o) const {
        BiPoly r(deg_ + o.deg_);
        for (int i = 0; i <= deg_; ++i)
            for (int j = 0; i + j <= deg_; ++j) {
                cplx a = at(i, j);
                if (a == cplx(0.0)) continue;
                for (int k = 0; k <= o.deg_; ++k)
                    for (int l = 0; k + l <= o.deg_; ++l) r.at(i + k, j + l) += a * o.at(k, l);
            }
        return r;
    }

    BiPoly operator+(const BiPoly& o) const {
        BiPoly r(std::max(deg_, o.deg_));
        for (int i = 0; i <= r.deg_; ++i)
            for (int j = 0; i + j <= r.deg_; ++j) r.at(i, j) = at(i, j) + o.at(i, j);
        return r;
    }

    BiPoly operator-(const BiPoly& o) const {
        BiPoly r(std::max(deg_, o.deg_));
        for (int i = 0; i <= r.deg_; ++i)
            for (int j = 0; i + j <= r.deg_; ++j) r.at(i, j) = at(i, j) - o.at(i, j);
        return r;
    }

    /// p(m00 s + m01 t, m10 s + m11 t) as a polynomial in (s, t).
    BiPoly compose_linear(const Mat2& m) const {
        BiPoly lx(1), ly(1);
        lx.at(1, 0) = m(0, 0);
        lx.at(0, 1) = m(0, 1);
        ly.at(1, 0) = m(1, 0);
        ly.at(0, 1) = m(1, 1);
        std::vector<BiPoly> px(deg_ + 1), py(deg_ + 1);
        px[0] = BiPoly(0);
        px[0].at(0, 0) = 1.0;
        py[0] = px[0];
        for (int k = 1; k <= deg_; ++k) {
            px[k] = px[k - 1] * lx;
            py[k] = py[k - 1] * ly;
        }
        BiPoly r(deg_);
        for (int i = 0; i <= deg_; ++i)
            for (int j = 0; i + j <= deg_; ++j) {
                cplx a = at(i, j);
                if (a == cplx(0.0)) continue;
                BiPoly term = px[i] * py[j];
                for (int k = 0; k <= term.deg_; ++k)
                    for (int l = 0; k + l <= term.deg_; ++l) r.at(k, l) += a * term.at(k, l);
            }
        return r;
    }

    /// Coefficients in y (lowest first) at fixed x.
    Poly in_y(cplx x) const {
        Poly r(static_cast<std::size_t>(deg_ + 1), cplx(0.0));
        for (int j = 0; j <= deg_; ++j) {
            cplx px = 0.0;
            for (int i = deg_ - j; i >= 0; --i) px = px * x + c_[index(i, j)];
            r[static_cast<std::size_t>(j)] = px;
        }
        return r;
    }

    /// Homogeneous binary form of degree n as a polynomial in y at x = 1.
    Poly dehomogenize(int n) const {
        Poly r(static_cast<std::size_t>(n + 1), cplx(0.0));
        for (int j = 0; j <= n; ++j) r[static_cast<std::size_t>(j)] = at(n - j, j);
        return r;
    }

    double max_abs() const {
        double m = 0.0;
        for (auto& c : c_) m = std::max(m, std::abs(c));
        return m;
    }

private:
    int deg_ = 0;
    std::vector<cplx> c_{cplx(0.0)};
};

/// Sylvester resultant of two polynomials of formal degrees m and n.
inline cplx sylvester_resultant(const Poly& a, const Poly& b) {
    const int m = static_cast<int>(a.size()) - 1;
    const int n = static_cast<int>(b.size()) - 1;
    const int sz = m + n;
    if (sz <= 0) return 1.0;
    Eigen::MatrixXcd s = Eigen::MatrixXcd::Zero(sz, sz);
    for (int r = 0; r < n; ++r)
        for (int k = 0; k <= m; ++k) s(r, r + k) = a[static_cast<std::size_t>(m - k)];
    for (int r = 0; r < m; ++r)
        for (int k = 0; k <= n; ++k) s(n + r, r + k) = b[static_cast<std::size_t>(n - k)];
    return s.partialPivLu().determinant();
}

/// Coefficients of the polynomial of degree < n interpolating values at
/// rho * exp(2 pi i k / n).
inline Poly interpolate_circle(const std::vector<cplx>& values, double rho) {
    const std::size_t n = values.size();
    Poly c(n, cplx(0.0));
    for (std::size_t k = 0; k < n; ++k) {
        cplx acc = 0.0;
        for (std::size_t m = 0; m < n; ++m) {
            double ang = -kTwoPi * double((k * m) % n) / double(n);
            acc += values[m] * cplx(std::cos(ang), std::sin(ang));
        }
        c[k] = acc / (double(n) * std::pow(rho, double(k)));
    }
    return c;
}

} // namespace c2dyn
