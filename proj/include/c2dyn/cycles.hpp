#pragma once

#include <cmath>
#include <vector>

#include "map.hpp"

namespace c2dyn {

struct AttractingCycle {
    std::vector<ProjectivePoint> points;
    double multiplier = 0.0; // |(f^p)'| along the cycle
};

/// Result of following every critical orbit of f_Pi. `hyperbolic` is only a
/// heuristic: all critical orbits were seen to settle on attracting cycles.
struct CycleReport {
    std::vector<AttractingCycle> cycles;
    int critical_total = 0;
    int critical_captured = 0;
    bool hyperbolic = false;
};

inline CycleReport attracting_cycles(const RationalMap& g, int budget = 4000, int max_period = 64) {
    CycleReport rep;
    auto crit = g.critical_points();
    rep.critical_total = static_cast<int>(crit.size());
    for (const auto& c : crit) {
        ProjectivePoint a = c;
        for (int i = 0; i < budget; ++i) a = g(a);
        ProjectivePoint b = a;
        int period = 0;
        for (int p = 1; p <= max_period; ++p) {
            b = g(b);
            if (chordal(a, b) < 1e-9) {
                period = p;
                break;
            }
        }
        if (period == 0) continue;
        AttractingCycle cyc;
        double mult = 1.0;
        ProjectivePoint x = a;
        for (int k = 0; k < period; ++k) {
            cyc.points.push_back(x);
            mult *= g.sph_derivative(x);
            x = g(x);
        }
        cyc.multiplier = mult;
        if (!(mult < 1.0)) continue;
        rep.critical_captured++;
        bool known = false;
        for (const auto& o : rep.cycles)
            for (const auto& q : o.points)
                if (chordal(q, a) < 1e-6) known = true;
        if (!known) rep.cycles.push_back(std::move(cyc));
    }
    rep.hyperbolic = rep.critical_captured == rep.critical_total;
    return rep;
}

/// Index of the stored cycle within `radius` (chordal) of a, or -1.
inline int nearest_cycle(const CycleReport& rep, const ProjectivePoint& a, double radius) {
    for (std::size_t i = 0; i < rep.cycles.size(); ++i)
        for (const auto& q : rep.cycles[i].points)
            if (chordal(q, a) < radius) return static_cast<int>(i);
    return -1;
}

} // namespace c2dyn
