#pragma once

#include <cmath>
#include <cstdint>

#include "measures.hpp"

namespace c2dyn {

/// log|det Df| averaged over mu samples.
inline Estimate lambda_f(const MapSpec& f, const WeightedSampleSet& mu) {
    if (mu.empty()) throw Error(ErrorCode::EmptySampleSet, "no mu samples");
    return integrate(mu, [&](const WeightedSample& s) { return std::log(std::abs(jacobian(f, s.x).det)); });
}

/// log of the spherical derivative of f_Pi averaged over mu_Pi samples.
inline Estimate lambda_pi(const RationalMap& g, const WeightedSampleSet& mu_pi) {
    if (mu_pi.empty()) throw Error(ErrorCode::EmptySampleSet, "no mu_pi samples");
    return integrate(mu_pi, [&](const WeightedSample& s) { return g.log_sph_derivative(ProjectivePoint(s.x)); });
}

inline Estimate lambda_pi(const MapSpec& f, const WeightedSampleSet& mu_pi) { return lambda_pi(induced_pi(f), mu_pi); }

/// | |det Df(p)| - d (|f(p)|/|p|)^2 |det Df_Pi([p])| | for homogeneous f,
/// the Pi-side Jacobian taken in the Fubini-Study metric.
inline double jacobian_identity_check(const MapSpec& f, const Vec2& p) {
    if (!f.is_homogeneous()) throw Error(ErrorCode::Config, "jacobian identity needs a homogeneous map");
    const double r = norm(p);
    if (!(r > 0.0)) throw Error(ErrorCode::OriginInput, "p = 0");
    const double det = std::abs(jacobian(f, p).det);
    const double scale = std::pow(r, 2.0 * (f.degree() - 1));
    if (det <= 1e-13 * scale * f.top_max() * f.top_max()) throw Error(ErrorCode::CriticalInput, "p lies on the critical set");
    RationalMap g(f);
    const double q = norm(f.eval(p)) / r;
    return std::abs(det - f.degree() * q * q * g.sph_derivative(ProjectivePoint(p)));
}

struct LyapunovConfig {
    std::size_t n_mu = 100000;
    std::size_t n_mu_pi = 100000;
    std::uint64_t seed = 1;
    SamplerOptions sampler;
    MuCOptions mu_c;
};

struct LyapunovReport {
    double lambda_f = 0.0, stderr_lambda_f = 0.0;
    double lambda_pi = 0.0, stderr_lambda_pi = 0.0;
    double int_G_muc = 0.0;
    double stderr_int_G_muc = 0.0; // quadrature error bound, not a standard error
    double log_d = 0.0;
    double residual = 0.0;
    double band = 0.0;             // 3 sigma of the sampled terms plus the quadrature bound
    double mu_c_mass = 0.0;
    std::size_t n_mu = 0, n_mu_pi = 0, mu_c_cells = 0;

    bool within_band() const { return std::abs(residual) <= band; }
};

inline LyapunovReport exponent_identity_residual(const MapSpec& f, const LyapunovConfig& cfg = {}) {
    require_regular(f);
    LyapunovReport r;
    auto mu = sample_mu(f, cfg.n_mu, cfg.seed, cfg.sampler);
    auto mu_pi = sample_mu_pi(f, cfg.n_mu_pi, cfg.seed ^ 0x9E3779B97F4A7C15ULL, cfg.sampler);
    Estimate lf = lambda_f(f, mu);
    Estimate lp = lambda_pi(f, mu_pi);
    MuCOptions mo = cfg.mu_c;
    if (mo.seed == 0) mo.seed = cfg.seed;
    auto mc = sample_mu_c(f, mo);
    r.lambda_f = lf.value;
    r.stderr_lambda_f = lf.stderr_;
    r.lambda_pi = lp.value;
    r.stderr_lambda_pi = lp.stderr_;
    r.int_G_muc = mc.integral_G;
    r.stderr_int_G_muc = mc.quadrature_error;
    r.log_d = std::log(static_cast<double>(f.degree()));
    r.residual = r.lambda_f - r.log_d - r.lambda_pi - r.int_G_muc;
    r.band = std::hypot(3.0 * lf.stderr_, 3.0 * lp.stderr_) + mc.quadrature_error;
    r.mu_c_mass = mc.total_mass;
    r.n_mu = mu.size();
    r.n_mu_pi = mu_pi.size();
    r.mu_c_cells = mc.size();
    return r;
}

} // namespace c2dyn
