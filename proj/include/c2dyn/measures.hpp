#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "green.hpp"
#include "parallel.hpp"
#include "preimage.hpp"

namespace c2dyn {

enum class SampleKind { Mu, MuPi, MuC, Nu };

inline const char* to_string(SampleKind k) {
    switch (k) {
    case SampleKind::Mu: return "mu";
    case SampleKind::MuPi: return "mu_pi";
    case SampleKind::MuC: return "mu_c";
    case SampleKind::Nu: return "nu";
    }
    return "?";
}

/// One weighted point. For mu_pi and nu the point is the canonical unit
/// representative of the base; theta is used by nu only.
struct WeightedSample {
    Vec2 x;
    double weight;
    double theta = 0.0;
};

struct WeightedSampleSet {
    SampleKind kind = SampleKind::Mu;
    std::vector<WeightedSample> samples;
    std::uint64_t seed = 0;
    int burn_in = 0;
    int chains = 1; // samples are stored chain by chain

    // mu_c only
    double total_mass = 0.0;
    double integral_G = 0.0;     // quadrature for the integral of G, signed masses
    double quadrature_error = 0.0;
    double negative_mass = 0.0;  // clipped away
    double dropped_mass = 0.0;   // in cells dropped for branch crossing
    int branch_crossings = 0;
    double boundary_flux = 0.0;  // flux through the window edge (mass check)

    bool empty() const { return samples.empty(); }
    std::size_t size() const { return samples.size(); }
};

struct SamplerOptions {
    int burn_in = 64;
    int chains = 32;
    unsigned threads = 0;
};

namespace detail {

// A point is exceptional when its backward orbit is finite; for degree >= 2
// this means one preimage of full multiplicity whose own preimage is again
// a single point.
inline bool exceptional_pi(const RationalMap& g, const ProjectivePoint& a) {
    auto p = preimages_pi(g, a);
    if (p.size() != 1) return false;
    auto q = preimages_pi(g, p[0].point);
    return q.size() == 1;
}

template <class T>
std::size_t pick_weighted(Philox& rng, const std::vector<T>& pts, int total) {
    auto r = static_cast<int>(rng.below(static_cast<std::uint64_t>(total)));
    for (std::size_t i = 0; i < pts.size(); ++i) {
        r -= pts[i].multiplicity;
        if (r < 0) return i;
    }
    return pts.size() - 1;
}

inline std::vector<std::size_t> chain_sizes(std::size_t n, int chains) {
    std::vector<std::size_t> out(static_cast<std::size_t>(chains), n / static_cast<std::size_t>(chains));
    for (std::size_t i = 0; i < n % static_cast<std::size_t>(chains); ++i) out[i]++;
    return out;
}

} // namespace detail

/// mu_Pi by random inverse iteration of f_Pi.
inline WeightedSampleSet sample_mu_pi(const MapSpec& f, std::size_t n, std::uint64_t seed, const SamplerOptions& opt = {}) {
    RationalMap g = induced_pi(f);
    WeightedSampleSet out;
    out.kind = SampleKind::MuPi;
    out.seed = seed;
    out.burn_in = opt.burn_in;
    out.chains = std::max(1, opt.chains);
    if (n == 0) return out;
    auto sizes = detail::chain_sizes(n, out.chains);
    std::vector<std::vector<WeightedSample>> parts(sizes.size());
    parallel_for(sizes.size(), opt.threads, [&](std::size_t c) {
        Philox rng(seed, c);
        ProjectivePoint a;
        int reseeds = 0;
        for (;;) {
            a = ProjectivePoint(make_vec(rng.complex_normal(), rng.complex_normal()));
            if (!detail::exceptional_pi(g, a)) break;
            if (++reseeds > 5) throw Error(ErrorCode::ExceptionalStart, "start points keep landing on exceptional set");
        }
        auto& out_c = parts[c];
        out_c.reserve(sizes[c]);
        const double w = 1.0 / static_cast<double>(n);
        for (std::size_t k = 0; k < sizes[c] + static_cast<std::size_t>(opt.burn_in); ++k) {
            auto pre = preimages_pi(g, a);
            a = pre[detail::pick_weighted(rng, pre, g.degree())].point;
            if (k >= static_cast<std::size_t>(opt.burn_in)) out_c.push_back({a.rep(), w});
        }
    });
    for (auto& p : parts) out.samples.insert(out.samples.end(), p.begin(), p.end());
    return out;
}

/// mu by random inverse iteration in C^2.
inline WeightedSampleSet sample_mu(const MapSpec& f, std::size_t n, std::uint64_t seed, const SamplerOptions& opt = {}) {
    require_regular(f);
    WeightedSampleSet out;
    out.kind = SampleKind::Mu;
    out.seed = seed;
    out.burn_in = opt.burn_in;
    out.chains = std::max(1, opt.chains);
    if (n == 0) return out;
    const int dd = f.degree() * f.degree();
    auto sizes = detail::chain_sizes(n, out.chains);
    std::vector<std::vector<WeightedSample>> parts(sizes.size());
    parallel_for(sizes.size(), opt.threads, [&](std::size_t c) {
        Philox rng(seed, 0x100 + c);
        Vec2 x = make_vec(rng.complex_normal(), rng.complex_normal()) * 0.5;
        PreimageSet prev; // preimages of the parent of x
        bool have_prev = false;
        auto& out_c = parts[c];
        out_c.reserve(sizes[c]);
        const double w = 1.0 / static_cast<double>(n);
        std::size_t k = 0;
        int failures = 0;
        while (k < sizes[c] + static_cast<std::size_t>(opt.burn_in)) {
            PreimageSet s;
            try {
                s = preimages(f, x, rng.next_u64());
            } catch (const Error&) {
                if (++failures >= 10) throw;
                // retry from a different branch of the parent
                if (have_prev) x = prev.points[detail::pick_weighted(rng, prev.points, dd)].x;
                else x = make_vec(rng.complex_normal(), rng.complex_normal()) * 0.5;
                continue;
            }
            failures = 0;
            x = s.points[detail::pick_weighted(rng, s.points, s.total_multiplicity())].x;
            prev = std::move(s);
            have_prev = true;
            if (k >= static_cast<std::size_t>(opt.burn_in)) out_c.push_back({x, w});
            ++k;
        }
    });
    for (auto& p : parts) out.samples.insert(out.samples.end(), p.begin(), p.end());
    return out;
}

struct Estimate {
    double value = 0.0;
    double stderr_ = 0.0;
};

/// Weighted mean with a 32-block jackknife standard error. For mu_c the
/// weights are masses and the value is the unnormalized sum.
inline Estimate integrate(const WeightedSampleSet& s, const std::function<double(const WeightedSample&)>& fn, int blocks = 32) {
    if (s.empty()) throw Error(ErrorCode::EmptySampleSet, "integrate over an empty sample set");
    const std::size_t n = s.size();
    const std::size_t B = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, blocks)), n);
    std::vector<double> bw(B, 0.0), bf(B, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t b = i * B / n;
        double w = s.samples[i].weight;
        bw[b] += w;
        bf[b] += w * fn(s.samples[i]);
    }
    double W = 0.0, F = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        W += bw[b];
        F += bf[b];
    }
    const bool mass = s.kind == SampleKind::MuC;
    Estimate e;
    if (!(W > 0.0)) {
        if (mass) return e;
        throw Error(ErrorCode::EmptySampleSet, "sample weights sum to zero");
    }
    e.value = mass ? F : F / W;
    if (B < 2) return e;
    std::vector<double> loo(B);
    double mean = 0.0;
    for (std::size_t b = 0; b < B; ++b) {
        double w = W - bw[b], f = F - bf[b];
        loo[b] = mass ? f * static_cast<double>(B) / (B - 1.0) : (w > 0.0 ? f / w : e.value);
        mean += loo[b];
    }
    mean /= static_cast<double>(B);
    double ss = 0.0;
    for (double v : loo) ss += (v - mean) * (v - mean);
    e.stderr_ = std::sqrt((B - 1.0) / static_cast<double>(B) * ss);
    return e;
}

inline void write_csv(std::ostream& os, const WeightedSampleSet& s) {
    os << "kind,re1,im1,re2,im2,theta,weight,seed,burn_in\n";
    char buf[256];
    for (const auto& p : s.samples) {
        std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%llu,%d\n", to_string(s.kind), p.x(0).real(),
                      p.x(0).imag(), p.x(1).real(), p.x(1).imag(), p.theta, p.weight,
                      static_cast<unsigned long long>(s.seed), s.burn_in);
        os << buf;
    }
}

// ---------------------------------------------------------------------------
// Critical measure

struct MuCOptions {
    double window = 0.0;       // half-width in the curve parameter; 0 = automatic
    int base = 16;             // base grid cells per side
    int max_level = 24;        // refinement levels below the base grid
    double tol = 5e-4;         // target for the pairing error bound
    std::size_t max_cells = 300000;
    double edge_tol = 1e-4;    // Gauss/Kronrod agreement on cell edges
    int edge_depth = 10;
    int budget = 1000;         // Green iteration budget
    std::uint64_t seed = 0;    // picks the parametrizing rotation
    unsigned threads = 0;
};

namespace detail {

/*
 * The critical curve {det Df = 0} is parametrized through a unitary change
 * of variables x = V (s, t): for each s the equation det Df(V(s,t)) = 0 has
 * n = 2(d-1) roots t_b(s), and each branch is a holomorphic graph away from
 * finitely many branch points. On a branch u_b(s) = G(V(s, t_b(s))) is
 * subharmonic and mu_c restricted to it is Laplacian(u_b)/2pi ds. Cell masses
 * come from the flux of grad u_b through the cell boundary.
 */
class CriticalCurve {
public:
    CriticalCurve(const MapSpec& f, const EscapeData& e, const Mat2& V, int budget)
        : f_(&f), e_(&e), V_(V), budget_(budget) {
        const BiPoly* p[2] = {&f.poly(0), &f.poly(1)};
        BiPoly det = p[0]->dx() * p[1]->dy() - p[0]->dy() * p[1]->dx();
        D_ = det.compose_linear(V);
        Ds_ = D_.dx();
        Dt_ = D_.dy();
        n_ = 2 * (f.degree() - 1);
    }

    int branches() const { return n_; }
    const Mat2& rotation() const { return V_; }

    std::vector<cplx> roots_at(cplx s) const {
        Poly q = D_.in_y(s);
        q.resize(static_cast<std::size_t>(n_ + 1));
        return roots(q);
    }

    // dt/ds along the branch through (s, t)
    cplx slope(cplx s, cplx t) const { return -Ds_(s, t) / Dt_(s, t); }
    double dt_scale(cplx s, cplx t) const { return std::abs(Dt_(s, t)); }

    Vec2 point(cplx s, cplx t) const { return V_ * make_vec(s, t); }

    // real gradient (du/dRe s, du/dIm s) and value of u at (s, t)
    void jet(cplx s, cplx t, double& u, double& gx, double& gy) const {
        Vec2 X = point(s, t);
        GreenJet j = green_jet(*f_, *e_, X, budget_);
        u = j.value;
        Vec2 dX = V_ * make_vec(1.0, slope(s, t));
        cplx ds = j.grad(0) * dX(0) + j.grad(1) * dX(1);
        gx = 2.0 * ds.real();
        gy = -2.0 * ds.imag();
    }

    double value(cplx s, cplx t) const { return green(*f_, *e_, point(s, t), budget_).value; }

private:
    const MapSpec* f_;
    const EscapeData* e_;
    Mat2 V_;
    int budget_;
    BiPoly D_, Ds_, Dt_;
    int n_;
};

struct Cell {
    int level;
    long i, j; // integer position at this level
};

inline bool operator<(const Cell& a, const Cell& b) {
    if (a.level != b.level) return a.level < b.level;
    if (a.i != b.i) return a.i < b.i;
    return a.j < b.j;
}

// Per-cell data for each branch: flux mass, first moment and the paired
// value of G at the mass centroid.
struct CellEval {
    bool ambiguous = false;
    std::vector<cplx> t;          // branch roots at the centre
    std::vector<double> mass;
    std::vector<cplx> centroid;
    std::vector<Vec2> point;      // curve point over the centroid
    std::vector<double> g_pair;   // G at that point
    std::vector<double> osc;      // spread of G over boundary nodes and centre
    double total_flux = 0.0;      // sum over all roots, needs no matching
    double residual = 0.0;        // mass times the drop from the centroid value to a minimum of G
    double g_hi = 0.0;

    double pairing() const {
        double s = 0.0;
        for (std::size_t b = 0; b < mass.size(); ++b) s += mass[b] * g_pair[b];
        return s;
    }
    double crude_error() const {
        double s = 0.0;
        for (std::size_t b = 0; b < mass.size(); ++b) s += std::abs(mass[b]) * osc[b];
        return s;
    }
    double abs_mass() const {
        double s = 0.0;
        for (double m : mass) s += std::abs(m);
        return s;
    }
};

} // namespace detail

/*
 * mu_c by adaptive flux quadrature on the critical curve.
 *
 * Per cell and branch the mass is the flux of grad u through the boundary
 * and the first moment comes from Green's identity with the harmonic
 * coordinate s, both from the same boundary nodes. G is paired at the
 * midpoint of its value at the mass centroid and at the end of a short
 * descent towards the cell's minimum (half the gap is kept as a residual).
 * The error estimate extrapolates the change between a cell's pairing and
 * the sum over its four children; cells never split use sum |m| * osc(G).
 */
inline WeightedSampleSet sample_mu_c(const MapSpec& f, const MuCOptions& opt = {}) {
    require_regular(f);
    EscapeData e = escape_data(f);
    Mat2 V;
    {
        Philox g(opt.seed ^ 0x5EEDC0FFEEULL, 3);
        V = random_unitary(g);
    }
    detail::CriticalCurve cc(f, e, V, opt.budget);
    const int nb = cc.branches();
    const double W = opt.window > 0.0 ? opt.window : 2.0 * e.radius;
    const double h0 = 2.0 * W / opt.base;

    auto cell_size = [&](int level) { return h0 / std::ldexp(1.0, level); };
    auto corner = [&](const detail::Cell& c) {
        double h = cell_size(c.level);
        return cplx(-W + static_cast<double>(c.i) * h, -W + static_cast<double>(c.j) * h);
    };

    std::set<detail::Cell> internal;
    auto is_internal = [&](int level, long i, long j) { return internal.count({level, i, j}) > 0; };


    // boundary segments of a cell, split wherever the neighbour is finer
    std::function<void(int, long, long, int, std::vector<std::pair<cplx, cplx>>&)> segments;
    segments = [&](int level, long i, long j, int side, std::vector<std::pair<cplx, cplx>>& out) {
        static const long di[4] = {0, 1, 0, -1}, dj[4] = {-1, 0, 1, 0};
        static const int kids[4][2][2] = {{{0, 0}, {1, 0}}, {{1, 0}, {1, 1}}, {{1, 1}, {0, 1}}, {{0, 1}, {0, 0}}};
        double h = cell_size(level);
        cplx a(-W + static_cast<double>(i) * h, -W + static_cast<double>(j) * h);
        cplx pts[4] = {a, a + h, a + cplx(h, h), a + cplx(0, h)};
        if (level < opt.max_level + 1 && is_internal(level, i + di[side], j + dj[side])) {
            for (int k = 0; k < 2; ++k)
                segments(level + 1, 2 * i + kids[side][k][0], 2 * j + kids[side][k][1], side, out);
        } else {
            out.emplace_back(pts[side], pts[(side + 1) % 4]);
        }
    };

    // Boundary quadrature: Gauss 3 nested in Kronrod 7 on each segment,
    // bisected where they disagree. The test uses only symmetric functions
    // of the roots, so two neighbours always pick the same nodes and the
    // shared fluxes cancel exactly.
    struct EdgeNode {
        cplx s;
        cplx nrm;
        double w; // includes the segment length
        std::vector<cplx> t;
        std::vector<double> u, dn;
    };
    static const double kx[7] = {-0.9604912687080203, -0.7745966692414834, -0.4342437493468026, 0.0,
                                 0.4342437493468026,  0.7745966692414834,  0.9604912687080203};
    static const double kw[7] = {0.1046562260264672, 0.2684880898683334, 0.4013974147759622, 0.4509165386584741,
                                 0.4013974147759622, 0.2684880898683334, 0.1046562260264672};
    static const double g3w[7] = {0.0, 5.0 / 9.0, 0.0, 8.0 / 9.0, 0.0, 5.0 / 9.0, 0.0};
    std::function<void(cplx, cplx, int, std::vector<EdgeNode>&)> edge_rule;
    edge_rule = [&](cplx p0, cplx p1, int depth, std::vector<EdgeNode>& out) {
        cplx mid = 0.5 * (p0 + p1), half = 0.5 * (p1 - p0);
        double hl = std::abs(half);
        cplx tang = half / hl;
        cplx nrm(tang.imag(), -tang.real()); // outward for a counterclockwise boundary
        EdgeNode nd[7];
        double K[3] = {0, 0, 0}, G[3] = {0, 0, 0}, S[3] = {0, 0, 0};
        for (int q = 0; q < 7; ++q) {
            nd[q].s = mid + kx[q] * half;
            nd[q].nrm = nrm;
            nd[q].w = kw[q] * hl;
            nd[q].t = cc.roots_at(nd[q].s);
            double a[3] = {0, 0, 0}, sa[3] = {0, 0, 0};
            for (cplx t : nd[q].t) {
                double u, ux, uy;
                cc.jet(nd[q].s, t, u, ux, uy);
                double dn = ux * nrm.real() + uy * nrm.imag();
                nd[q].u.push_back(u);
                nd[q].dn.push_back(dn);
                a[0] += dn;
                a[1] += dn * dn;
                a[2] += u * dn;
                sa[0] += std::abs(dn);
                sa[1] += dn * dn;
                sa[2] += std::abs(u * dn);
            }
            for (int k = 0; k < 3; ++k) {
                K[k] += kw[q] * a[k];
                G[k] += g3w[q] * a[k];
                S[k] += kw[q] * sa[k];
            }
        }
        bool split = false;
        for (int k = 0; k < 3; ++k)
            if (std::abs(K[k] - G[k]) > 1e-12 + opt.edge_tol * S[k]) split = true;
        if (split && depth < opt.edge_depth) {
            edge_rule(p0, mid, depth + 1, out);
            edge_rule(mid, p1, depth + 1, out);
            return;
        }
        for (auto& x : nd) out.push_back(std::move(x));
    };

    auto evaluate_cell = [&](const detail::Cell& c) {
        detail::CellEval ev;
        const double h = cell_size(c.level);
        const cplx c0 = corner(c);
        const cplx centre = c0 + cplx(h / 2, h / 2);
        ev.t = cc.roots_at(centre);
        if (static_cast<int>(ev.t.size()) != nb) {
            ev.ambiguous = true;
            ev.t.resize(static_cast<std::size_t>(nb));
        }
        const auto n = static_cast<std::size_t>(nb);
        std::vector<cplx> slope(n);
        for (std::size_t b = 0; b < n; ++b) {
            slope[b] = cc.slope(centre, ev.t[b]);
            if (!std::isfinite(std::abs(slope[b]))) ev.ambiguous = true;
        }
        ev.mass.assign(n, 0.0);
        ev.centroid.assign(n, cplx(0.0));
        std::vector<cplx> moment(n, cplx(0.0));
        std::vector<double> lo(n, 1e300), hi(n, -1e300);
        std::vector<std::pair<cplx, cplx>> segs;
        for (int side = 0; side < 4; ++side) segments(c.level, c.i, c.j, side, segs);
        std::vector<EdgeNode> nodes;
        for (auto [p0, p1] : segs) edge_rule(p0, p1, 0, nodes);
        for (const auto& nd : nodes) {
            const cplx s = nd.s;
            for (std::size_t k = 0; k < nd.t.size(); ++k) {
                const double u = nd.u[k];
                const double dn = nd.dn[k];
                const double wq = nd.w / kTwoPi;
                ev.total_flux += wq * dn;
                if (ev.ambiguous) continue;
                std::size_t best = n;
                double d1 = 1e300, d2 = 1e300;
                for (std::size_t b = 0; b < n; ++b) {
                    double dist = std::abs(nd.t[k] - (ev.t[b] + slope[b] * (s - centre)));
                    if (dist < d1) {
                        d2 = d1;
                        d1 = dist;
                        best = b;
                    } else if (dist < d2) {
                        d2 = dist;
                    }
                }
                if (best == n || (n > 1 && d1 > 0.25 * d2)) {
                    ev.ambiguous = true;
                    continue;
                }
                ev.mass[best] += wq * dn;
                // Green's identity with the harmonic function s - centre
                moment[best] += wq * ((s - centre) * dn - u * nd.nrm);
                lo[best] = std::min(lo[best], u);
                hi[best] = std::max(hi[best], u);
            }
        }
        ev.point.resize(n);
        ev.g_pair.resize(n);
        ev.osc.resize(n);
        ev.g_hi = -1e300;
        for (std::size_t b = 0; b < n; ++b) {
            cplx off(0.0);
            if (!ev.ambiguous && std::abs(ev.mass[b]) > 1e-14) {
                off = moment[b] / ev.mass[b];
                off = cplx(std::clamp(off.real(), -h / 2, h / 2), std::clamp(off.imag(), -h / 2, h / 2));
            }
            cplx s = centre + off;
            cplx tp = ev.t[b] + slope[b] * off;
            if (off != cplx(0.0)) {
                // nearest root at the centroid
                cplx pred = tp;
                double best = 1e300;
                for (cplx x : cc.roots_at(s))
                    if (std::abs(x - pred) < best) {
                        best = std::abs(x - pred);
                        tp = x;
                    }
            }
            double u = cc.value(s, tp);
            double u0 = off == cplx(0.0) ? u : cc.value(centre, ev.t[b]);
            lo[b] = std::min({lo[b], u, u0});
            hi[b] = std::max({hi[b], u, u0});
            // u is subharmonic and harmonic off the support, so from a
            // centroid in a gap of a Cantor-like piece it decreases towards
            // the non-escaping part, where G = 0
            if (!ev.ambiguous && u > 0.0 && std::abs(ev.mass[b]) > 1e-14) {
                cplx sd = s, td = tp;
                double ud = u;
                bool ok = false, floor = false;
                // follow the branch from (sd, td) to z; false if it leaves the
                // cell or the root match is unclear
                bool blocked = false;
                auto follow = [&](cplx z, cplx& tz, double& uz) {
                    if (std::abs(z.real() - centre.real()) > h / 2 || std::abs(z.imag() - centre.imag()) > h / 2) {
                        blocked = true;
                        return false;
                    }
                    cplx pred = td + cc.slope(sd, td) * (z - sd);
                    double d1 = 1e300, d2 = 1e300;
                    for (cplx x : cc.roots_at(z)) {
                        double dist = std::abs(x - pred);
                        if (dist < d1) {
                            d2 = d1;
                            d1 = dist;
                            tz = x;
                        } else if (dist < d2) {
                            d2 = dist;
                        }
                    }
                    if (d1 == 1e300 || (n > 1 && d1 > 0.25 * d2)) {
                        blocked = true;
                        return false;
                    }
                    uz = cc.value(z, tz);
                    return true;
                };
                for (int it = 0; it < 80 && ud > 1e-12; ++it) {
                    double uu, gx, gy;
                    cc.jet(sd, td, uu, gx, gy);
                    double g2 = gx * gx + gy * gy;
                    cplx tn;
                    double un;
                    bool moved = false;
                    double probe = h / 8;
                    if (g2 > 0.0) {
                        // u ~ dist^a gives dist ~ a u / |grad u|
                        for (double k : {0.5, 0.25, 0.1}) {
                            cplx next = sd - k * uu / g2 * cplx(gx, gy);
                            if (follow(next, tn, un) && un < ud) {
                                sd = next;
                                moved = true;
                                break;
                            }
                        }
                        probe = std::min(probe, uu / std::sqrt(g2));
                    }
                    // near a saddle of u the gradient step is useless; probe around
                    blocked = false;
                    for (int shrink = 0; !moved && shrink < 5; ++shrink, probe /= 4) {
                        cplx bs;
                        cplx bt;
                        double bu = ud;
                        for (int k = 0; k < 8; ++k) {
                            cplx z = sd + std::polar(probe, k * kTwoPi / 8);
                            cplx tz;
                            double uz;
                            if (follow(z, tz, uz) && uz < bu) {
                                bu = uz;
                                bs = z;
                                bt = tz;
                            }
                        }
                        if (bu < ud) {
                            sd = bs;
                            tn = bt;
                            un = bu;
                            moved = true;
                        }
                    }
                    if (!moved) {
                        // a local minimum of u lies on the support: u is
                        // harmonic elsewhere
                        if (!blocked) floor = true;
                        break;
                    }
                    td = tn;
                    ud = un;
                    ok = ok || (ud <= 1e-3 * u);
                }
                // A drop to a minimum inside the cell means part of the mass
                // may sit that low. The centroid value is near the top of the
                // range (exact on both sides of a kink, too high over a
                // Cantor-like piece), so pair with the midpoint.
                if (ok || floor) {
                    ev.residual += 0.5 * std::abs(ev.mass[b]) * (u - ud);
                    u = 0.5 * (u + ud);
                }
            }
            ev.centroid[b] = s;
            ev.point[b] = cc.point(s, tp);
            ev.g_pair[b] = u;
            ev.osc[b] = hi[b] - lo[b];
            ev.g_hi = std::max(ev.g_hi, hi[b]);
        }
        return ev;
    };

    std::set<detail::Cell> leaves;
    for (long i = 0; i < opt.base; ++i)
        for (long j = 0; j < opt.base; ++j) leaves.insert({0, i, j});

    std::map<detail::Cell, detail::CellEval> cache;
    std::map<detail::Cell, double> leaf_err;  // Richardson estimate, once known
    std::map<detail::Cell, double> leaf_rate; // parent-children difference per unit mass
    struct Pending {
        double pairing;
        double rate; // of the parent itself, negative if unknown
        double err;  // the parent's own estimate, inherited when a split tells nothing
    };
    std::map<detail::Cell, Pending> pending;

    auto error_of = [&](const detail::Cell& c, const detail::CellEval& ev) {
        if (ev.ambiguous) return 1e300;
        auto it = leaf_err.find(c);
        return ev.residual + (it != leaf_err.end() ? it->second : ev.crude_error());
    };

    for (int round = 0; round < 400; ++round) {
        std::vector<detail::Cell> fresh;
        for (auto& c : leaves)
            if (!cache.count(c)) fresh.push_back(c);
        std::vector<detail::CellEval> fe(fresh.size());
        parallel_for(fresh.size(), opt.threads, [&](std::size_t k) { fe[k] = evaluate_cell(fresh[k]); });
        for (std::size_t k = 0; k < fresh.size(); ++k) cache[fresh[k]] = std::move(fe[k]);

        // Richardson estimates for parents whose children are all evaluated
        for (auto it = pending.begin(); it != pending.end();) {
            const detail::Cell& p = it->first;
            double sum = 0.0, am = 0.0;
            std::vector<double> bm(static_cast<std::size_t>(nb), 0.0), btop(static_cast<std::size_t>(nb), 0.0);
            bool amb = false;
            detail::Cell kid[4];
            for (int a = 0; a < 4; ++a) {
                kid[a] = {p.level + 1, 2 * p.i + (a & 1), 2 * p.j + (a >> 1)};
                const auto& ev = cache.at(kid[a]);
                amb |= ev.ambiguous;
                sum += ev.pairing();
                am += ev.abs_mass();
                if (ev.ambiguous) continue;
                for (std::size_t b = 0; b < bm.size(); ++b) {
                    bm[b] += std::abs(ev.mass[b]);
                    btop[b] = std::max(btop[b], std::abs(ev.mass[b]));
                }
            }
            bool spread = true;
            for (std::size_t b = 0; b < bm.size(); ++b)
                if (bm[b] > 1e-3 * am && btop[b] > 0.9 * bm[b]) spread = false;
            // a split that leaves nearly all of a branch's mass in one child
            // says nothing: the pairing barely moves while the support is
            // still unresolved
            if (!amb && spread) {
                // second order gives a ratio of 1/4 per level; slower observed
                // decay (Hoelder potentials on Cantor-like supports) widens the tail
                double raw = std::abs(it->second.pairing - sum);
                double rate = am > 0.0 ? raw / am : 0.0;
                double q = 0.25;
                if (it->second.rate > 0.0) q = std::clamp(rate / it->second.rate, 0.25, 0.9);
                double diff = raw * q / (1.0 - q);
                for (auto& k : kid) {
                    const auto& ev = cache.at(k);
                    leaf_err[k] = am > 0.0 ? diff * ev.abs_mass() / am : 0.0;
                    leaf_rate[k] = rate;
                }
            } else if (!amb) {
                for (auto& k : kid) {
                    const auto& ev = cache.at(k);
                    leaf_err[k] = am > 0.0 ? it->second.err * ev.abs_mass() / am : 0.0;
                    if (it->second.rate > 0.0) leaf_rate[k] = it->second.rate;
                }
            }
            it = pending.erase(it);
        }

        std::vector<std::pair<double, detail::Cell>> cand;
        double err = 0.0;
        bool ambiguous_left = false;
        for (auto& c : leaves) {
            const auto& ev = cache.at(c);
            double p = error_of(c, ev);
            bool can = c.level < opt.max_level;
            if (ev.ambiguous) {
                if (can) {
                    cand.push_back({p, c});
                    ambiguous_left = true;
                }
                continue;
            }
            err += p;
            if (can && p > 0.0) cand.push_back({p, c});
        }
        if ((err <= opt.tol && !ambiguous_left) || cand.empty() || leaves.size() + 3 > opt.max_cells) break;
        std::sort(cand.begin(), cand.end(), [](auto& a, auto& b) { return a.first > b.first; });
        double acc = 0.0;
        std::size_t limit = std::max<std::size_t>(16, leaves.size() / 8);
        std::size_t split = 0;
        for (auto& [p, c] : cand) {
            if (split >= limit || leaves.size() + 3 > opt.max_cells) break;
            if (p < 1e300 && acc > 0.5 * (err - opt.tol)) break;
            if (p < 1e300) acc += p;
            auto lr = leaf_rate.find(c);
            const auto& pev = cache.at(c);
            pending[c] = {pev.pairing(), lr != leaf_rate.end() ? lr->second : -1.0, error_of(c, pev) - pev.residual};
            leaves.erase(c);
            cache.erase(c);
            leaf_err.erase(c);
            leaf_rate.erase(c);
            internal.insert(c);
            for (int a = 0; a < 2; ++a)
                for (int b = 0; b < 2; ++b) leaves.insert({c.level + 1, 2 * c.i + a, 2 * c.j + b});
            ++split;
        }
    }

    // final pass with the final neighbour structure, so interior fluxes cancel
    std::vector<detail::Cell> lv(leaves.begin(), leaves.end());
    std::vector<detail::CellEval> evs(lv.size());
    parallel_for(lv.size(), opt.threads, [&](std::size_t k) { evs[k] = evaluate_cell(lv[k]); });

    WeightedSampleSet out;
    out.kind = SampleKind::MuC;
    out.seed = opt.seed;
    for (std::size_t k = 0; k < lv.size(); ++k) {
        const auto& ev = evs[k];
        out.boundary_flux += ev.total_flux;
        if (ev.ambiguous) {
            out.branch_crossings++;
            out.dropped_mass += ev.total_flux;
            out.quadrature_error += std::abs(ev.total_flux) * std::max(ev.g_hi, 0.0);
            continue;
        }
        auto it = leaf_err.find(lv[k]);
        out.quadrature_error += ev.residual + (it != leaf_err.end() ? it->second : ev.crude_error());
        for (std::size_t b = 0; b < ev.mass.size(); ++b) {
            double m = ev.mass[b];
            // the integral keeps signed masses; only the exported weights are clipped
            out.integral_G += m * ev.g_pair[b];
            if (m <= 0.0) {
                out.negative_mass += -m;
                continue;
            }
            out.samples.push_back({ev.point[b], m});
        }
    }
    for (auto& s : out.samples) out.total_mass += s.weight;
    return out;
}

// ---------------------------------------------------------------------------
// Equidistribution on the line at infinity

/// Mean of phi over the depth-j preimage tree of a, each leaf weighted by
/// multiplicity / d^j. Exact tree while d^j <= 2^20, otherwise 2^20 random
/// root-to-leaf paths.
inline double tree_average(const RationalMap& g, const ProjectivePoint& a, int j,
                           const std::function<double(const ProjectivePoint&)>& phi, std::uint64_t seed = 0,
                           unsigned threads = 1) {
    const int d = g.degree();
    if (j * std::log2(static_cast<double>(d)) > 30.0 + 1e-12)
        throw Error(ErrorCode::DepthExceeded, "tree depth exceeds the 2^30 preimage cap");
    if (j == 0) return phi(a);
    const double full = std::pow(static_cast<double>(d), j);
    if (full <= 1048576.0) {
        // expand level by level until the frontier is wide enough to split
        std::vector<std::pair<ProjectivePoint, double>> front{{a, 1.0}};
        int level = 0;
        while (level < j && front.size() < 256) {
            std::vector<std::pair<ProjectivePoint, double>> next;
            for (auto& [p, w] : front)
                for (auto& q : preimages_pi(g, p)) next.push_back({q.point, w * q.multiplicity / d});
            front = std::move(next);
            ++level;
        }
        const int rest = j - level;
        std::vector<double> part(front.size(), 0.0);
        std::function<double(const ProjectivePoint&, int)> rec = [&](const ProjectivePoint& p, int k) -> double {
            if (k == 0) return phi(p);
            double s = 0.0;
            for (auto& q : preimages_pi(g, p)) s += q.multiplicity * rec(q.point, k - 1);
            return s / d;
        };
        parallel_for(front.size(), threads, [&](std::size_t i) { part[i] = front[i].second * rec(front[i].first, rest); });
        double s = 0.0;
        for (double v : part) s += v;
        return s;
    }
    const std::size_t paths = 1u << 20;
    const std::size_t blocks = 64;
    std::vector<double> part(blocks, 0.0);
    parallel_for(blocks, threads, [&](std::size_t b) {
        Philox rng(seed, 0xE0 + b);
        double s = 0.0;
        for (std::size_t k = 0; k < paths / blocks; ++k) {
            ProjectivePoint p = a;
            for (int l = 0; l < j; ++l) {
                auto pre = preimages_pi(g, p);
                p = pre[detail::pick_weighted(rng, pre, d)].point;
            }
            s += phi(p);
        }
        part[b] = s;
    });
    double s = 0.0;
    for (double v : part) s += v;
    return s / static_cast<double>(paths);
}

/// |<nu'_{a,j}, phi> - reference| where reference is the mu_Pi integral of phi.
inline double equidistribution_stat(const RationalMap& g, const ProjectivePoint& a, int j,
                                    const std::function<double(const ProjectivePoint&)>& phi, double reference,
                                    std::uint64_t seed = 0) {
    return std::abs(tree_average(g, a, j, phi, seed) - reference);
}

inline double equidistribution_stat(const RationalMap& g, const ProjectivePoint& a, int j,
                                    const std::function<double(const ProjectivePoint&)>& phi,
                                    const WeightedSampleSet& mu_pi, std::uint64_t seed = 0) {
    double ref = integrate(mu_pi, [&](const WeightedSample& s) { return phi(ProjectivePoint(s.x)); }).value;
    return equidistribution_stat(g, a, j, phi, ref, seed);
}

/// Deviation averaged over a set of base points (same bases at every depth).
inline std::vector<double> equidistribution_profile(const RationalMap& g, const std::vector<ProjectivePoint>& bases,
                                                    const std::vector<int>& depths,
                                                    const std::function<double(const ProjectivePoint&)>& phi,
                                                    double reference, unsigned threads = 0) {
    std::vector<double> out;
    for (int j : depths) {
        std::vector<double> dev(bases.size());
        parallel_for(bases.size(), threads, [&](std::size_t i) { dev[i] = std::abs(tree_average(g, bases[i], j, phi) - reference); });
        double s = 0.0;
        for (double v : dev) s += v;
        out.push_back(s / static_cast<double>(bases.size()));
    }
    return out;
}

} // namespace c2dyn
