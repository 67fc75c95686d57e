#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <utility>
#include <vector>

#include "model.hpp"

namespace c2dyn {

struct RayId {
    ProjectivePoint base;
    double theta = 0.0; // turns, in [0,1)

    RayId() = default;
    RayId(const ProjectivePoint& a, double t) : base(a), theta(t - std::floor(t)) {
        if (theta >= 1.0) theta = 0.0;
    }
};

struct RayNode {
    double r;
    Vec2 x;
};

enum class RayStatus { Landed, Obstructed, Truncated };

inline const char* to_string(RayStatus s) {
    switch (s) {
    case RayStatus::Landed: return "landed";
    case RayStatus::Obstructed: return "obstructed";
    case RayStatus::Truncated: return "truncated";
    }
    return "?";
}

struct RayTrace {
    std::vector<RayNode> nodes; // r strictly decreasing
    RayStatus status = RayStatus::Truncated;
    double stop_level = 0.0;    // lowest level reached, or where it stopped
    double tail_diameter = 0.0; // over the last decade of r
};

struct RayOptions {
    double r_min = 1e-7; // the trace ends at the first level <= r_min
    int substeps = 8;    // nodes per factor d in r, raised where the top block needs it
    int max_levels = 64;
    int psi_depth = 12;
    int tau_steps = 16;
    int alpha_terms = 40;
};

/// sigma(a, theta) = (f_Pi a, d theta + arg eta(a) / 2 pi).
inline RayId sigma(const MapSpec& f, const ModelData& md, const RayId& ray) {
    if (md.N != 1) throw Error(ErrorCode::Config, "sigma needs the linear section");
    cplx c = chi(f, md, ray.base);
    RationalMap g(f);
    return RayId(g(ray.base), f.degree() * ray.theta + std::arg(c) / kTwoPi);
}

/// Point of the homogeneous model on the ray at level r: e^(r + 2 pi i theta) alpha(a) s(a).
inline Vec2 model_point(const MapSpec& f, const ModelData& md, const RayId& ray, double r, int alpha_terms = 40) {
    AlphaValue al = alpha(f, md, ray.base, alpha_terms);
    return std::polar(std::exp(r + al.log_value), kTwoPi * ray.theta) * section_s(md, ray.base);
}

namespace detail {

// Preimage of y1 continuing x0 (f(x0) = y0). One predictor-corrector step,
// falling back to the adaptive tracker on the straight segment.
inline Vec2 pull_node(const MapSpec& f, const Vec2& x0, const Vec2& y0, const Vec2& y1) {
    Jacobian J = jacobian(f, x0);
    Vec2 dx;
    if (std::abs(J.det) > 1e-10 && solve2(J.matrix, y1 - y0, dx)) {
        Vec2 x = x0 + dx;
        const double tol = 1e-12 * (1.0 + norm(y1));
        double prev = -1.0;
        for (int it = 0; it < 8; ++it) {
            Vec2 r = f.eval(x) - y1;
            if (norm(r) <= tol) return x;
            Vec2 c;
            if (!solve2(f.jac(x), r, c)) break;
            double cn = norm(c);
            if (prev < 0.0 ? cn > 0.25 * norm(dx) + 1e-9 * (1.0 + norm(x)) : cn > 0.5 * prev) break;
            prev = cn;
            x -= c;
        }
    }
    return track_preimage(f, [&](double t) -> Vec2 { return y0 + t * (y1 - y0); }, x0);
}

} // namespace detail

/// Descends the ray from the model anchor to r_min by pullback: the piece of
/// the ray between levels r/d and r is the preimage of the piece of sigma(ray)
/// between r and d r, continued from the node above.
inline RayTrace trace_ray(const MapSpec& f, const ModelData& md, const RayId& ray, const RayOptions& opt = {}) {
    if (!(opt.r_min > 0.0)) throw Error(ErrorCode::Config, "r_min must be positive");
    if (opt.substeps < 1) throw Error(ErrorCode::Config, "substeps must be positive");
    const double d = f.degree();
    EscapeData e = escape_data(f);
    const double R0 = model_level(e);
    const double r_top = d * R0;
    int K = std::max(1, static_cast<int>(std::ceil(std::log(r_top / opt.r_min) / std::log(d))));
    RayTrace out;
    bool truncated = false;
    if (K > opt.max_levels) {
        K = opt.max_levels;
        truncated = true;
    }
    // keep consecutive nodes within a relative distance of 1/2 near the top
    const int s = std::max(opt.substeps, static_cast<int>(std::ceil(r_top * std::log(d) / 0.4)));
    auto level = [&](int j, int i) { return r_top * std::pow(d, -(j + static_cast<double>(i) / s)); };

    std::vector<RayId> orbit{ray};
    for (int k = 1; k < K; ++k) orbit.push_back(sigma(f, md, orbit.back()));

    // Unit anchors U_k on the model cone with f_h(U_k) = U_{k+1} exactly. The
    // formula only picks the branch; forward orbits of J_Pi points drift, so
    // the deepest anchor alone is taken from it.
    auto anchor = [&](const RayId& g, int m) {
        try {
            return model_point(f, md, g, 0.0, m);
        } catch (const Error& err) {
            // drifted onto the pole after j terms: keep the partial sum
            if (err.code() != ErrorCode::SectionPole || !(err.param() >= 0.0)) throw;
            return model_point(f, md, g, 0.0, static_cast<int>(err.param()));
        }
    };
    std::vector<Vec2> U(static_cast<std::size_t>(K));
    U.back() = anchor(orbit.back(), opt.alpha_terms);
    for (int k = K - 2; k >= 0; --k) {
        const auto ku = static_cast<std::size_t>(k);
        Vec2 guess = anchor(orbit[ku], std::min(opt.alpha_terms, 20));
        Vec2 x = guess;
        for (int it = 0; it < 30; ++it) {
            Vec2 dx;
            if (!solve2(f.jac_top(x), f.eval_top(x) - U[ku + 1], dx)) break;
            x -= dx;
            if (norm(dx) <= 1e-15 * norm(x)) break;
        }
        if (!(norm(f.eval_top(x) - U[ku + 1]) <= 1e-12 * norm(U[ku + 1])) || norm(x - guess) > 0.1 * norm(guess))
            throw Error(ErrorCode::NumericalFailure, "model anchor lost its branch", k);
        U[ku] = x;
    }
    const bool homogeneous = f.is_homogeneous();
    std::vector<std::vector<Vec2>> seg(static_cast<std::size_t>(K), std::vector<Vec2>(static_cast<std::size_t>(s + 1)));
    for (int k = 0; k < K; ++k) {
        for (int i = 0; i <= s; ++i) {
            Vec2 x = std::exp(level(0, i)) * U[static_cast<std::size_t>(k)];
            if (!homogeneous) {
                int lv = 0, st = 0;
                x = detail::psi_depth(f, x, opt.psi_depth, opt.tau_steps, lv, st);
            }
            seg[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] = x;
        }
    }
    for (int i = 0; i <= s; ++i) out.nodes.push_back({level(0, i), seg[0][static_cast<std::size_t>(i)]});

    out.status = truncated ? RayStatus::Truncated : RayStatus::Landed;
    int reach = K; // blocks of the original ray that can still be computed
    for (int j = 1; j < reach; ++j) {
        const int live = reach - j;
        std::vector<std::vector<Vec2>> next(static_cast<std::size_t>(live));
        for (int k = 0; k < live; ++k) {
            const auto& up = seg[static_cast<std::size_t>(k) + 1];
            auto& dst = next[static_cast<std::size_t>(k)];
            dst.resize(static_cast<std::size_t>(s + 1));
            dst[0] = seg[static_cast<std::size_t>(k)].back();
            try {
                for (int i = 1; i <= s; ++i) {
                    const auto iu = static_cast<std::size_t>(i);
                    dst[iu] = detail::pull_node(f, dst[iu - 1], up[iu - 1], up[iu]);
                }
            } catch (const Error& err) {
                if (err.code() != ErrorCode::NearCriticalValue && err.code() != ErrorCode::StepUnderflow) throw;
                // this piece feeds block j + k of the original ray
                out.status = RayStatus::Obstructed;
                reach = j + k;
                next.resize(static_cast<std::size_t>(k));
                break;
            }
        }
        if (next.empty()) break;
        seg = std::move(next);
        for (int i = 1; i <= s; ++i) out.nodes.push_back({level(j, i), seg[0][static_cast<std::size_t>(i)]});
    }
    out.stop_level = out.nodes.back().r;
    const double floor_r = 10.0 * out.nodes.back().r;
    for (std::size_t a = 0; a < out.nodes.size(); ++a) {
        if (out.nodes[a].r > floor_r) continue;
        for (std::size_t b = a + 1; b < out.nodes.size(); ++b)
            out.tail_diameter = std::max(out.tail_diameter, norm(out.nodes[a].x - out.nodes[b].x));
    }
    return out;
}

struct Landing {
    bool landed = false;
    Vec2 point = Vec2::Zero();
};

/// Landed if the trace reached r_min and its last decade has diameter below tail_tol.
inline Landing land_ray(const RayTrace& t, double tail_tol = 1e-5) {
    Landing l;
    if (t.status != RayStatus::Landed || t.nodes.empty()) return l;
    if (!(t.tail_diameter < tail_tol)) return l;
    l.landed = true;
    l.point = t.nodes.back().x;
    return l;
}

/// n rays with base drawn from the mu_Pi cloud and uniform angle.
inline std::vector<RayId> sample_nu(const WeightedSampleSet& mu_pi, std::size_t n, std::uint64_t seed) {
    std::vector<RayId> out;
    if (n == 0) return out;
    if (mu_pi.empty()) throw Error(ErrorCode::EmptySampleSet, "no mu_pi samples");
    out.reserve(n);
    Philox rng(seed, 0x7A1);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& s = mu_pi.samples[static_cast<std::size_t>(rng.below(mu_pi.size()))];
        double t = rng.uniform();
        out.emplace_back(ProjectivePoint(s.x), t);
    }
    return out;
}

/// Two-sample energy distance 2E|X-Y| - E|X-X'| - E|Y-Y'| (U-statistics).
inline double energy_distance(const std::vector<Vec2>& X, const std::vector<Vec2>& Y) {
    if (X.size() < 2 || Y.size() < 2) throw Error(ErrorCode::EmptySampleSet, "energy distance needs two points per cloud");
    auto mean_cross = [](const std::vector<Vec2>& A, const std::vector<Vec2>& B) {
        double s = 0.0;
        for (const auto& a : A)
            for (const auto& b : B) s += norm(a - b);
        return s / (static_cast<double>(A.size()) * static_cast<double>(B.size()));
    };
    auto mean_self = [](const std::vector<Vec2>& A) {
        double s = 0.0;
        for (std::size_t i = 0; i < A.size(); ++i)
            for (std::size_t j = i + 1; j < A.size(); ++j) s += norm(A[i] - A[j]);
        return 2.0 * s / (static_cast<double>(A.size()) * (A.size() - 1.0));
    };
    return 2.0 * mean_cross(X, Y) - mean_self(X) - mean_self(Y);
}

struct TransportReport {
    double energy = 0.0;
    double unresolved_fraction = 0.0;
    std::size_t rays = 0, landed = 0, obstructed = 0;
    std::vector<Vec2> landings;
};

struct TransportOptions {
    RayOptions ray;
    double tail_tol = 1e-5;
    std::size_t n_mu_pi = 4000;
    unsigned threads = 0;
};

/// Lands n_rays nu-sampled rays and compares the landing cloud with an
/// independent mu cloud of the same size.
inline TransportReport pushforward_check(const MapSpec& f, const ModelData& md, std::size_t n_rays, std::uint64_t seed,
                                         const TransportOptions& opt = {}) {
    if (n_rays == 0) throw Error(ErrorCode::EmptySampleSet, "n_rays = 0");
    auto mu_pi = sample_mu_pi(f, opt.n_mu_pi, seed ^ 0xB5ULL);
    auto rays = sample_nu(mu_pi, n_rays, seed);
    std::vector<Landing> land(n_rays);
    std::vector<char> obstructed(n_rays, 0);
    parallel_for(n_rays, opt.threads, [&](std::size_t i) {
        RayTrace t = trace_ray(f, md, rays[i], opt.ray);
        obstructed[i] = t.status == RayStatus::Obstructed;
        land[i] = land_ray(t, opt.tail_tol);
    });
    TransportReport rep;
    rep.rays = n_rays;
    for (std::size_t i = 0; i < n_rays; ++i) {
        rep.obstructed += static_cast<std::size_t>(obstructed[i]);
        if (land[i].landed) rep.landings.push_back(land[i].point);
    }
    rep.landed = rep.landings.size();
    rep.unresolved_fraction = 1.0 - static_cast<double>(rep.landed) / static_cast<double>(n_rays);
    if (rep.landed < 2) throw Error(ErrorCode::EmptySampleSet, "fewer than two rays landed");
    auto mu = sample_mu(f, rep.landed, seed ^ 0xC3ULL);
    std::vector<Vec2> Y;
    Y.reserve(mu.size());
    for (const auto& s : mu.samples) Y.push_back(s.x);
    rep.energy = energy_distance(rep.landings, Y);
    return rep;
}

/// Distance on rays: max of the chordal base distance and the circular angle gap.
inline double ray_distance(const RayId& a, const RayId& b) {
    double dt = std::abs(a.theta - b.theta);
    dt = std::min(dt, 1.0 - dt);
    return std::max(chordal(a.base, b.base), dt);
}

struct HolderFit {
    double exponent = 0.0;
    std::size_t pairs = 0;
};

/// Least-squares slope of log |e(g) - e(g')| against log dist(g, g').
inline HolderFit holder_probe(const MapSpec& f, const ModelData& md, const std::vector<std::pair<RayId, RayId>>& pairs,
                              const RayOptions& opt = {}, double tail_tol = 1e-5) {
    std::vector<double> xs, ys;
    for (const auto& [a, b] : pairs) {
        double dr = ray_distance(a, b);
        if (!(dr > 0.0)) continue;
        Landing la = land_ray(trace_ray(f, md, a, opt), tail_tol);
        Landing lb = land_ray(trace_ray(f, md, b, opt), tail_tol);
        if (!la.landed || !lb.landed) continue;
        double de = norm(la.point - lb.point);
        if (!(de > 0.0)) continue;
        xs.push_back(std::log(dr));
        ys.push_back(std::log(de));
    }
    if (xs.size() < 20) throw Error(ErrorCode::InsufficientPairs, "fewer than 20 resolved pairs", static_cast<double>(xs.size()));
    const double n = static_cast<double>(xs.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sxy += (xs[i] - mx) * (ys[i] - my);
        sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    HolderFit h;
    h.pairs = xs.size();
    h.exponent = sxx > 0.0 ? sxy / sxx : 0.0;
    return h;
}

inline void write_csv(std::ostream& os, const RayTrace& t) {
    os << "r,re1,im1,re2,im2,status\n";
    char buf[256];
    for (const auto& n : t.nodes) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g,%.17g,%s\n", n.r, n.x(0).real(), n.x(0).imag(), n.x(1).real(),
                      n.x(1).imag(), to_string(t.status));
        os << buf;
    }
}

/// Landing cloud in the layout of the sample-set export.
inline void write_landings_csv(std::ostream& os, const std::vector<Vec2>& pts, std::uint64_t seed) {
    WeightedSampleSet s;
    s.kind = SampleKind::Nu;
    s.seed = seed;
    for (const auto& p : pts) s.samples.push_back({p, 1.0 / static_cast<double>(pts.size())});
    write_csv(os, s);
}

} // namespace c2dyn
