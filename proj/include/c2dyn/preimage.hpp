#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "map.hpp"
#include "rng.hpp"

namespace c2dyn {

struct PreimagePoint {
    Vec2 x;
    int multiplicity;
};

struct PreimageSet {
    std::vector<PreimagePoint> points;
    Vec2 target;
    double residual = 0.0;

    int total_multiplicity() const {
        int s = 0;
        for (const auto& p : points) s += p.multiplicity;
        return s;
    }
};

/// Newton iteration for F(x) = y where F is a MapSpec or HomotopySlice.
/// Keeps the best iterate; returns its residual.
template <class F>
double newton_polish(const F& f, Vec2& x, const Vec2& y, int max_iter = 100) {
    Vec2 best = x;
    double best_res = norm(evaluate(f, x) - y);
    Vec2 cur = x;
    int stall = 0;
    for (int it = 0; it < max_iter && best_res > 0.0; ++it) {
        Vec2 r = evaluate(f, cur) - y;
        Vec2 dx;
        if (!solve2(jacobian(f, cur).matrix, r, dx)) break;
        cur -= dx;
        double res = norm(evaluate(f, cur) - y);
        if (!std::isfinite(res)) break;
        if (res < best_res) {
            best_res = res;
            best = cur;
            stall = 0;
        } else if (++stall > 3) {
            break;
        }
        if (norm(dx) <= 1e-17 * (1.0 + norm(cur))) break;
    }
    x = best;
    return best_res;
}

namespace detail {

inline Mat2 default_rotation() {
    // fixed generic unitary, so results do not depend on the caller's seed
    Philox g(0xC2D7A11ULL, 7);
    return random_unitary(g);
}

inline bool try_preimages(const MapSpec& f, const Vec2& y, const Mat2& V, PreimageSet& out) {
    const int d = f.degree();
    const int n = d * d;
    BiPoly h[2] = {f.poly(0).compose_linear(V), f.poly(1).compose_linear(V)};
    double sc = std::max(h[0].max_abs(), h[1].max_abs());
    cplx lead0 = h[0].at(0, d), lead1 = h[1].at(0, d);
    if (std::abs(lead0) < 1e-6 * sc || std::abs(lead1) < 1e-6 * sc) return false;

    const double ynorm = norm(y);
    const double rho = std::max(1.0, std::pow(ynorm / std::max(f.top_min(), 1e-300), 1.0 / d));
    const int N = n + 1;
    std::vector<cplx> vals(static_cast<std::size_t>(N));
    for (int m = 0; m < N; ++m) {
        double ang = kTwoPi * m / N;
        cplx s = rho * cplx(std::cos(ang), std::sin(ang));
        Poly a = h[0].in_y(s), b = h[1].in_y(s);
        a[0] -= y(0);
        b[0] -= y(1);
        vals[static_cast<std::size_t>(m)] = sylvester_resultant(a, b);
    }
    Poly res = interpolate_circle(vals, rho);
    double rmax = 0.0;
    for (int k = 0; k <= n; ++k) rmax = std::max(rmax, std::abs(res[static_cast<std::size_t>(k)]) * std::pow(rho, k));
    if (!(rmax > 0.0) || std::abs(res[static_cast<std::size_t>(n)]) * std::pow(rho, n) < 1e-10 * rmax) return false;
    res.resize(static_cast<std::size_t>(n + 1));
    std::vector<cplx> sr = roots(res);
    if (static_cast<int>(sr.size()) != n) return false;

    struct Cand {
        Vec2 x;
        cplx s;
    };
    std::vector<Cand> cands;
    for (cplx s : sr) {
        Poly a = h[0].in_y(s), b = h[1].in_y(s);
        a[0] -= y(0);
        b[0] -= y(1);
        std::vector<cplx> tr = roots(a);
        if (tr.empty()) return false;
        cplx best_t = tr[0];
        double best_v = std::abs(horner(b, tr[0]));
        for (std::size_t k = 1; k < tr.size(); ++k) {
            double v = std::abs(horner(b, tr[k]));
            if (v < best_v) {
                best_v = v;
                best_t = tr[k];
            }
        }
        Vec2 x = V * make_vec(s, best_t);
        newton_polish(f, x, y);
        if (!finite(x)) return false;
        cands.push_back({x, s});
    }

    // cluster into distinct points with multiplicity
    std::vector<int> owner(cands.size(), -1);
    std::vector<PreimagePoint> pts;
    std::vector<std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < cands.size(); ++i) {
        if (owner[i] >= 0) continue;
        owner[i] = static_cast<int>(pts.size());
        pts.push_back({cands[i].x, 1});
        members.push_back({i});
        for (std::size_t j = i + 1; j < cands.size(); ++j)
            if (owner[j] < 0 && norm(cands[j].x - cands[i].x) <= 1e-7 * (1.0 + norm(cands[i].x))) {
                owner[j] = owner[i];
                pts.back().multiplicity++;
                members.back().push_back(j);
            }
    }
    double tol = 1e-10 * (1.0 + ynorm);
    double worst = 0.0;
    for (std::size_t c = 0; c < pts.size(); ++c) {
        double r = norm(f.eval(pts[c].x) - y);
        worst = std::max(worst, r);
        if (pts[c].multiplicity > 1) {
            // a merged cluster must be a genuinely multiple root: either the
            // Jacobian is (nearly) singular there or the s-roots coincide
            Jacobian J = jacobian(f, pts[c].x);
            double js = std::abs(J.det) / (1e-300 + J.matrix.cwiseAbs2().sum());
            double spread = 0.0;
            for (std::size_t a : members[c])
                for (std::size_t b : members[c]) spread = std::max(spread, std::abs(cands[a].s - cands[b].s));
            if (js > 1e-6 && spread > 1e-6 * (1.0 + std::abs(cands[members[c][0]].s))) return false;
        }
    }
    if (!(worst <= tol)) return false;
    out.points = std::move(pts);
    out.target = y;
    out.residual = worst;
    return true;
}

} // namespace detail

/// All solutions of f(x) = y with multiplicities.
inline PreimageSet preimages(const MapSpec& f, const Vec2& y, std::uint64_t seed = 0) {
    static const Mat2 V0 = detail::default_rotation();
    PreimageSet out;
    if (detail::try_preimages(f, y, V0, out)) return out;
    Philox g(seed ^ 0x9E3779B97F4A7C15ULL, 0xA11);
    for (int attempt = 0; attempt < 3; ++attempt) {
        Mat2 V = random_unitary(g);
        if (detail::try_preimages(f, y, V, out)) return out;
    }
    throw Error(ErrorCode::ResultantDegenerate, "elimination failed after 3 random changes of variables");
}

/// Predictor-corrector continuation of one preimage along a target path.
class PathTracker {
public:
    enum class State { Running, Done, NearCriticalValue, StepUnderflow };

    PathTracker(const MapSpec& f, std::function<Vec2(double)> path, const Vec2& seed, double step = 0.05)
        : f_(&f), path_(std::move(path)), point_(seed), step_(std::clamp(step, kMinStep, kMaxStep)) {
        Vec2 y0 = path_(0.0);
        if (!(norm(f.eval(seed) - y0) <= 1e-10 * (1.0 + norm(y0))))
            throw Error(ErrorCode::NumericalFailure, "seed is not a preimage of the path start");
    }

    static constexpr double kMinStep = 1e-6;
    static constexpr double kMaxStep = 0.25;

    const Vec2& point() const { return point_; }
    double parameter() const { return t_; }
    double step() const { return step_; }
    State state() const { return state_; }

    /// One attempted step; returns false once finished or failed.
    bool advance() {
        if (state_ != State::Running) return false;
        if (t_ >= 1.0) {
            state_ = State::Done;
            return false;
        }
        double t1 = std::min(1.0, t_ + step_);
        Vec2 y0 = path_(t_), y1 = path_(t1);
        Jacobian J = jacobian(*f_, point_);
        if (std::abs(J.det) < 1e-10) {
            state_ = State::NearCriticalValue;
            return false;
        }
        Vec2 dx;
        solve2(J.matrix, y1 - y0, dx);
        Vec2 x = point_ + dx;
        const double tol = 1e-12 * (1.0 + norm(y1));
        bool ok = false;
        double first = -1.0, prev = -1.0;
        for (int it = 0; it < 10; ++it) {
            Vec2 r = f_->eval(x) - y1;
            double rn = norm(r);
            if (rn <= tol) {
                ok = true;
                break;
            }
            Jacobian Jx = jacobian(*f_, x);
            if (std::abs(Jx.det) < 1e-10) {
                state_ = State::NearCriticalValue;
                return false;
            }
            Vec2 c;
            if (!solve2(Jx.matrix, r, c)) break;
            double cn = norm(c);
            if (first < 0.0) {
                first = cn;
                // a large first correction means the predictor left the branch
                if (cn > 0.25 * norm(dx) + 1e-9 * (1.0 + norm(x))) break;
            } else if (cn > 0.5 * prev) {
                break;
            }
            prev = cn;
            x -= c;
        }
        if (ok) {
            point_ = x;
            t_ = t1;
            if (++good_ >= 2) {
                step_ = std::min(kMaxStep, 2.0 * step_);
                good_ = 0;
            }
            if (t_ >= 1.0) state_ = State::Done;
        } else {
            good_ = 0;
            step_ *= 0.5;
            if (step_ < kMinStep) {
                // stuck next to a fold? sigma_min^2 / |D^2 f| estimates how far
                // the target is from a critical value
                state_ = near_fold(path_(t1) - y0, t1 - t_) ? State::NearCriticalValue : State::StepUnderflow;
            }
        }
        return state_ == State::Running;
    }

private:
    bool near_fold(const Vec2& dy, double dt) const {
        Mat2 J = jacobian(*f_, point_).matrix;
        Eigen::JacobiSVD<Mat2> svd(J);
        double smin = svd.singularValues()(1);
        double h = 1e-6 * (1.0 + norm(point_)), hess = 0.0;
        for (int k = 0; k < 2; ++k) {
            Vec2 e = Vec2::Zero();
            e(k) = h;
            hess = std::max(hess, (jacobian(*f_, point_ + e).matrix - J).norm() / h);
        }
        double dist = smin * smin / (1e-300 + hess);
        return dist < 4.0 * norm(dy) * std::max(1.0, kMinStep / dt);
    }

    const MapSpec* f_;
    std::function<Vec2(double)> path_;
    Vec2 point_;
    double t_ = 0.0;
    double step_;
    int good_ = 0;
    State state_ = State::Running;
};

inline Vec2 track_preimage(const MapSpec& f, const std::function<Vec2(double)>& path, const Vec2& seed) {
    PathTracker tr(f, path, seed);
    while (tr.advance()) {
    }
    switch (tr.state()) {
    case PathTracker::State::Done: return tr.point();
    case PathTracker::State::NearCriticalValue:
        throw Error(ErrorCode::NearCriticalValue, "path approaches a critical value", tr.parameter());
    default: throw Error(ErrorCode::StepUnderflow, "step size fell below 1e-6", tr.parameter());
    }
}

struct ProjectivePreimage {
    ProjectivePoint point;
    int multiplicity;
};

/// Preimages of a point of the line at infinity under f_Pi.
inline std::vector<ProjectivePreimage> preimages_pi(const RationalMap& g, const ProjectivePoint& target) {
    static const Mat2 W = detail::default_rotation();
    const int d = g.degree();
    const Vec2& t = target.rep();
    // h(u) = t2 F1(u) - t1 F2(u) in the rotated chart u = W (1, eta)
    // sample on a circle and interpolate: cheaper than composing the forms
    std::vector<cplx> vals(static_cast<std::size_t>(d + 1));
    for (int m = 0; m <= d; ++m) {
        double ang = kTwoPi * m / (d + 1);
        Vec2 u = W * make_vec(1.0, cplx(std::cos(ang), std::sin(ang)));
        Vec2 F = g.lift(u);
        vals[static_cast<std::size_t>(m)] = t(1) * F(0) - t(0) * F(1);
    }
    Poly h = interpolate_circle(vals, 1.0);
    std::vector<cplx> r = roots(trimmed(h, 1e-13));
    std::vector<ProjectivePoint> pts;
    for (cplx eta : r) pts.emplace_back(W * make_vec(1.0, eta));
    while (static_cast<int>(pts.size()) < d) pts.emplace_back(W * make_vec(0.0, 1.0));
    std::vector<ProjectivePreimage> out;
    std::vector<bool> used(pts.size(), false);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (used[i]) continue;
        ProjectivePreimage pp{pts[i], 1};
        for (std::size_t j = i + 1; j < pts.size(); ++j)
            if (!used[j] && chordal(pts[i], pts[j]) < 1e-7) {
                used[j] = true;
                pp.multiplicity++;
            }
        out.push_back(pp);
    }
    return out;
}

} // namespace c2dyn
