#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "cycles.hpp"
#include "green.hpp"
#include "measures.hpp"

namespace c2dyn {

enum class SectionRoute {
    Linear,      // g(z,w) = a2 z - a1 w, N = 1
    Determinant, // g = det Df_h, N = 2(d-1)
};

/// Normal-form data: the form g with its pole a0, the exponent N and a table
/// of log|chi^N| over J_Pi samples.
struct ModelData {
    ProjectivePoint a0;
    BiPoly g{1};
    int N = 1;
    SectionRoute route = SectionRoute::Linear;
    double g_norm = 1.0;          // sum of |coefficients| of g
    std::vector<ProjectivePoint> jpi;
    std::vector<double> log_chi;  // log|chi^N| at the jpi samples
    double sup_log_chi = 0.0;
};

namespace detail {

inline BiPoly linear_form(const ProjectivePoint& a0) {
    BiPoly g(1);
    const Vec2& a = a0.rep();
    g.at(1, 0) = a(1);
    g.at(0, 1) = -a(0);
    return g;
}

inline double coeff_sum(const BiPoly& g) {
    double s = 0.0;
    for (int i = 0; i <= g.degree(); ++i) s += std::abs(g.at(i, g.degree() - i));
    return s;
}

} // namespace detail

/// chi^N(a) = g(f_h(u)) / g(u)^d for any representative u.
inline cplx chi(const MapSpec& f, const ModelData& md, const ProjectivePoint& a) {
    const Vec2& u = a.rep();
    cplx gu = md.g(u(0), u(1));
    if (std::abs(gu) <= 1e-12 * md.g_norm) throw Error(ErrorCode::SectionPole, "a is the pole of the section");
    Vec2 v = f.eval_top(u);
    cplx gv = md.g(v(0), v(1));
    if (std::abs(gv) <= 1e-12 * md.g_norm * std::pow(norm(v), md.N))
        throw Error(ErrorCode::SectionPole, "f_Pi(a) is the pole of the section");
    return gv / std::pow(gu, f.degree());
}

/// Builds the model. a0 defaults to the candidate chart point farthest from
/// the J_Pi samples; [0:1] is tried first.
inline ModelData make_model(const MapSpec& f, std::size_t n_samples = 2000, std::uint64_t seed = 1,
                            SectionRoute route = SectionRoute::Linear, const ProjectivePoint* a0 = nullptr) {
    require_regular(f);
    ModelData md;
    md.route = route;
    auto s = sample_mu_pi(f, n_samples, seed);
    md.jpi.reserve(s.size());
    for (const auto& w : s.samples) md.jpi.emplace_back(w.x);
    if (a0) {
        md.a0 = *a0;
    } else {
        std::vector<ProjectivePoint> cand{ProjectivePoint(make_vec(0.0, 1.0)), ProjectivePoint(make_vec(1.0, 0.0))};
        for (double r : {0.25, 0.5, 1.0, 2.0, 4.0})
            for (int k = 0; k < 8; ++k) cand.push_back(ProjectivePoint::from_chart(std::polar(r, kTwoPi * k / 8.0)));
        double best = -1.0;
        for (const auto& c : cand) {
            double dmin = 2.0;
            for (const auto& p : md.jpi) dmin = std::min(dmin, chordal(c, p));
            if (dmin > best + 1e-12) {
                best = dmin;
                md.a0 = c;
            }
        }
    }
    if (route == SectionRoute::Linear) {
        md.g = detail::linear_form(md.a0);
        md.N = 1;
    } else {
        md.g = f.top(0).dx() * f.top(1).dy() - f.top(0).dy() * f.top(1).dx();
        md.N = 2 * (f.degree() - 1);
    }
    md.g_norm = detail::coeff_sum(md.g);
    md.log_chi.reserve(md.jpi.size());
    for (const auto& p : md.jpi) {
        try {
            double l = std::log(std::abs(chi(f, md, p)));
            md.log_chi.push_back(l);
            md.sup_log_chi = std::max(md.sup_log_chi, std::abs(l));
        } catch (const Error&) {
            md.log_chi.push_back(std::numeric_limits<double>::quiet_NaN());
        }
    }
    return md;
}

/// s(a) = u / g(u)^(1/N), principal root when N > 1.
inline Vec2 section_s(const ModelData& md, const ProjectivePoint& a) {
    const Vec2& u = a.rep();
    cplx gu = md.g(u(0), u(1));
    if (std::abs(gu) <= 1e-12 * md.g_norm) throw Error(ErrorCode::SectionPole, "a is the pole of the section");
    return u / (md.N == 1 ? gu : std::pow(gu, 1.0 / md.N));
}

struct AlphaValue {
    double value = 1.0;
    double log_value = 0.0;
    double error_bound = 0.0; // on log alpha
};

/// alpha(a) = exp(-sum_{j<m} d^-(j+1) log|chi^N(f_Pi^j a)|).
inline AlphaValue alpha(const MapSpec& f, const ModelData& md, const ProjectivePoint& a, int m) {
    if (m < 0) throw Error(ErrorCode::Config, "negative truncation");
    RationalMap g(f);
    const double d = f.degree();
    double s = 0.0, w = 1.0 / d, sup = md.sup_log_chi;
    ProjectivePoint x = a;
    for (int j = 0; j < m; ++j) {
        double l;
        try {
            l = std::log(std::abs(chi(f, md, x)));
        } catch (const Error& e) {
            throw Error(ErrorCode::SectionPole, std::string("orbit meets the pole at j = ") + std::to_string(j), j);
        }
        s += w * l;
        sup = std::max(sup, std::abs(l));
        w /= d;
        x = g(x);
    }
    AlphaValue out;
    out.log_value = -s;
    out.value = std::exp(-s);
    out.error_bound = sup * std::pow(d, -m) / (d - 1.0);
    return out;
}

/// |alpha(a)^d alpha(f_Pi a)^-1 |chi^N(a)| - 1|.
inline double alpha_conjugacy_residual(const MapSpec& f, const ModelData& md, const ProjectivePoint& a, int m = 40) {
    RationalMap g(f);
    AlphaValue x = alpha(f, md, a, m);
    AlphaValue y = alpha(f, md, g(a), m);
    double l = f.degree() * x.log_value - y.log_value + std::log(std::abs(chi(f, md, a)));
    return std::abs(std::expm1(l));
}

/// Counterclockwise loop [1 : e^{i theta}] on the unit circle.
inline std::vector<ProjectivePoint> unit_circle_loop(int n) {
    std::vector<ProjectivePoint> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) out.push_back(ProjectivePoint::from_chart(std::polar(1.0, kTwoPi * k / n)));
    return out;
}

/// Winding number of eta = chi^N/|chi^N| along a closed ordered loop.
inline long winding_number_eta(const MapSpec& f, const ModelData& md, const std::vector<ProjectivePoint>& loop) {
    if (loop.size() < 3) throw Error(ErrorCode::LoopNotClosed, "loop needs at least 3 points");
    const std::size_t n = loop.size();
    for (std::size_t i = 0; i < n; ++i) {
        double gap = 2.0 * std::asin(std::min(1.0, chordal(loop[i], loop[(i + 1) % n])));
        if (gap >= 0.1) throw Error(ErrorCode::LoopNotClosed, "gap of " + std::to_string(gap) + " rad", static_cast<double>(i));
    }
    std::vector<cplx> eta(n);
    for (std::size_t i = 0; i < n; ++i) {
        cplx c = chi(f, md, loop[i]);
        eta[i] = c / std::abs(c);
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double step = std::arg(eta[(i + 1) % n] / eta[i]);
        if (std::abs(step) > kPi / 2) throw Error(ErrorCode::LoopNotClosed, "loop too coarse for eta", static_cast<double>(i));
        total += step;
    }
    return std::lround(total / kTwoPi);
}

struct PsiResult {
    Vec2 value;
    double increment = 0.0;  // |Psi_{n+1}(x) - Psi_n(x)|
    int depth = 0;
    int levels = 0;          // pullbacks actually performed; the chain is cut at |y| > 1e20
    int tau_steps = 0;
    bool hyperbolic = false; // critical-orbit heuristic for f_Pi
};

namespace detail {

// Top of the chain where f and f_h agree to double precision.
inline constexpr double kChainTop = 1e20;

inline Vec2 psi_depth(const MapSpec& f, const Vec2& x, int n, int tau_steps, int& levels, int& steps_taken) {
    std::vector<Vec2> chain{x};
    for (int k = 0; k < n && norm(chain.back()) <= kChainTop; ++k) chain.push_back(f.eval_top(chain.back()));
    const int top = static_cast<int>(chain.size()) - 1;
    levels = top;
    steps_taken = 0;
    if (top == 0) return x;
    const double scale = f.top_max() * f.top_max();
    const double min_step = 1.0 / (256.0 * std::max(1, tau_steps / 16));
    double tau = 0.0, step = 1.0 / tau_steps;
    while (tau < 1.0) {
        const double t1 = std::min(1.0, tau + step);
        HomotopySlice hs{&f, cplx(t1)};
        auto trial = chain;
        bool ok = true;
        for (int k = top - 1; k >= 0 && ok; --k) {
            const auto ku = static_cast<std::size_t>(k);
            Vec2 z = trial[ku];
            bool conv = false;
            for (int it = 0; it < 20; ++it) {
                auto J = jacobian(hs, z);
                if (std::abs(J.det) <= 1e-10 * scale * std::pow(norm(z), 2.0 * (f.degree() - 1))) break;
                Vec2 dz;
                if (!solve2(J.matrix, evaluate(hs, z) - trial[ku + 1], dz)) break;
                z -= dz;
                if (norm(dz) <= 1e-15 * norm(z)) {
                    conv = true;
                    break;
                }
            }
            // a jump this large means the branch was lost
            if (!conv || norm(z - chain[ku]) > 0.25 * norm(chain[ku])) ok = false;
            else trial[ku] = z;
        }
        if (ok) {
            chain = std::move(trial);
            tau = t1;
            ++steps_taken;
        } else {
            step /= 2.0;
            if (step < min_step) throw Error(ErrorCode::NearCriticalValue, "tau continuation obstructed", tau);
        }
    }
    return chain[0];
}

} // namespace detail

/// Depth-n approximant of Psi = lim f^-n o f_h^n, branches continued in tau
/// from the identity at f_0 = f_h.
inline PsiResult psi(const MapSpec& f, const Vec2& x, int n = 12, int tau_steps = 16) {
    require_regular(f);
    if (n < 0 || tau_steps < 1) throw Error(ErrorCode::Config, "bad depth or tau steps");
    EscapeData e = escape_data(f);
    if (green_h(f, e, x).value < model_level(e))
        throw Error(ErrorCode::Config, "G_h(x) is below the model level");
    PsiResult r;
    r.depth = n;
    r.hyperbolic = attracting_cycles(RationalMap(f)).hyperbolic;
    if (f.is_homogeneous()) {
        r.value = x;
        return r;
    }
    int lv1 = 0, st1 = 0;
    r.value = detail::psi_depth(f, x, n, tau_steps, r.levels, r.tau_steps);
    Vec2 next = detail::psi_depth(f, x, n + 1, tau_steps, lv1, st1);
    r.increment = norm(next - r.value);
    return r;
}

} // namespace c2dyn
