#pragma once

// Independent reference computations used by the tests. They share no code
// with the library beyond MapSpec evaluation.

#include <cmath>
#include <complex>

#include <c2dyn/map.hpp>

namespace oracles {

using c2dyn::cplx;
using c2dyn::Vec2;

/// d^-n log|f_h^n(p)| by plain iteration with periodic rescaling.
inline double brute_force_green_h(const c2dyn::MapSpec& f, Vec2 x, int n) {
    const double d = f.degree();
    double offset = 0.0; // f^k = e^offset * x
    for (int k = 0; k < n; ++k) {
        x = f.eval_top(x);
        offset *= d;
        double r = c2dyn::norm(x);
        if (r > 1e100 || r < 1e-100) {
            offset += std::log(r);
            x /= r;
        }
    }
    return (offset + std::log(c2dyn::norm(x))) / std::pow(d, n);
}

/// Green function of z^2 + c by escape time, long double, radius 1e150.
inline double green_1d(cplx c, cplx z, int budget = 5000) {
    std::complex<long double> x(z.real(), z.imag()), cc(c.real(), c.imag());
    long double scale = 1.0L;
    for (int n = 0; n < budget; ++n) {
        long double r = std::abs(x);
        if (r > 1e150L) return static_cast<double>(scale * std::log(r));
        x = x * x + cc;
        scale *= 0.5L;
    }
    return 0.0;
}

} // namespace oracles
