#include <gtest/gtest.h>

#include <c2dyn/config.hpp>
#include <c2dyn/green.hpp>
#include <c2dyn/rng.hpp>

#include "oracles.hpp"

using namespace c2dyn;

namespace {

Vec2 v(cplx a, cplx b) { return make_vec(a, b); }

MapSpec squares() { return maps::product_quadratic(0.0, 0.0); }

} // namespace

TEST(Green, Examples) {
    MapSpec f = squares();
    GreenValue g = green(f, v(2, 1));
    EXPECT_TRUE(g.escaped);
    EXPECT_NEAR(g.value, std::log(2.0), 1e-10);
    EXPECT_NEAR(green(f, v(0, 3)).value, std::log(3.0), 1e-10);
    GreenValue k = green(f, v(0.5, cplx(0, 0.5)));
    EXPECT_FALSE(k.escaped);
    EXPECT_EQ(k.value, 0.0);
    EXPECT_GE(k.error_bound, 0.0);
    EXPECT_LT(k.error_bound, 1e-100);
}

TEST(Green, NonEscapeBudgetReportsUncertainty) {
    GreenValue g = green(squares(), v(0.5, 0.5), 3);
    EXPECT_FALSE(g.escaped);
    EXPECT_EQ(g.iterations, 3);
    EXPECT_GT(g.error_bound, 0.0);
}

TEST(Green, EscapeDataIsConsistent) {
    for (const MapSpec& f : {squares(), maps::basilica_skew(), maps::product_quadratic(3.0, 0.0)}) {
        EscapeData e = escape_data(f);
        EXPECT_GE(e.radius, 2.0);
        Philox rng(1);
        // on |z| = R the growth bounds hold
        for (int i = 0; i < 2000; ++i) {
            Vec2 u = v(rng.complex_normal(), rng.complex_normal());
            Vec2 z = u / norm(u) * e.radius * (1.0 + 3.0 * rng.uniform());
            double q = std::log(norm(f.eval(z))) - f.degree() * std::log(norm(z));
            EXPECT_GE(q, e.c_lo - 1e-12);
            EXPECT_LE(q, e.c_hi + 1e-12);
            EXPECT_GT(norm(f.eval(z)), 2.0 * norm(z));
        }
    }
}

TEST(GreenH, Examples) {
    MapSpec f = squares();
    EXPECT_NEAR(green_h(f, v(1, 1)).value, 0.0, 1e-14);
    EXPECT_NEAR(green_h(f, v(0.5, 0.25)).value, std::log(0.5), 1e-14);
    EXPECT_THROW(green_h(f, v(0, 0)), Error);
}

TEST(GreenH, MatchesLongIteration) {
    MapSpec f(2, {{{2, 0}, 1.0}}, {{{0, 2}, 1.0}, {{2, 0}, -1.0}});
    double oracle = oracles::brute_force_green_h(f, v(1, 0), 40);
    EXPECT_NEAR(green_h(f, v(1, 0)).value, oracle, 1e-9);
}

TEST(GreenH, LogarithmicHomogeneity) {
    MapSpec f = maps::basilica_skew();
    Philox rng(2);
    for (int i = 0; i < 200; ++i) {
        Vec2 p = v(rng.complex_normal(), rng.complex_normal());
        cplx lam = rng.complex_normal() * std::exp(6.0 * rng.normal());
        double a = green_h(f, lam * p).value;
        double b = std::log(std::abs(lam)) + green_h(f, p).value;
        EXPECT_NEAR(a, b, 1e-10);
    }
}

TEST(Robin, Examples) {
    MapSpec f = squares();
    EXPECT_NEAR(robin(f, ProjectivePoint(v(1, 0))), 0.0, 1e-15);
    EXPECT_NEAR(robin(f, ProjectivePoint(v(1, 1))), -0.5 * std::log(2.0), 1e-14);
}

TEST(Robin, GreenAsymptotics) {
    MapSpec f = maps::basilica_skew();
    EscapeData e = escape_data(f);
    for (cplx z : {cplx(0.3, 0.2), cplx(-1.5, 0.7), cplx(4.0, -2.0)}) {
        ProjectivePoint a = ProjectivePoint::from_chart(z);
        double prev = 1e300;
        for (double t : {1e2, 1e4, 1e6, 1e8}) {
            double dev = std::abs(green(f, e, t * a.rep()).value - std::log(t) - robin(f, e, a));
            EXPECT_LT(dev, prev + 1e-14);
            prev = dev;
        }
        EXPECT_LT(prev, 1e-7);
    }
}

TEST(Green, FunctionalEquation) {
    Philox rng(7);
    for (const MapSpec& f : {squares(), maps::product_quadratic(0.3, cplx(0, -0.2)), maps::basilica_skew()}) {
        EscapeData e = escape_data(f);
        int escaping = 0, good = 0;
        for (int i = 0; i < 2000; ++i) {
            Vec2 p = v(cplx(rng.uniform(-2, 2), rng.uniform(-2, 2)), cplx(rng.uniform(-2, 2), rng.uniform(-2, 2)));
            GreenValue g0 = green(f, e, p);
            GreenValue g1 = green(f, e, f.eval(p));
            if (!g0.escaped) continue;
            ++escaping;
            if (std::abs(g1.value - f.degree() * g0.value) <= g1.error_bound + f.degree() * g0.error_bound) ++good;
        }
        ASSERT_GT(escaping, 100);
        EXPECT_GE(good, 0.999 * escaping);
    }
}

TEST(Green, ApproximantErrorWithinC0Bound) {
    MapSpec f = maps::basilica_skew();
    EscapeData e = escape_data(f);
    Philox rng(4);
    for (int i = 0; i < 200; ++i) {
        Vec2 p = v(rng.complex_normal() * 5.0, rng.complex_normal() * 5.0);
        if (norm(p) <= e.radius) continue;
        double G = green(f, e, p).value;
        Vec2 x = p;
        double scale = 1.0;
        for (int n = 0; n < 6; ++n) {
            double approx = scale * std::log(norm(x));
            EXPECT_LE(std::abs(approx - G), scale * e.c0 / (f.degree() - 1.0) + 1e-12);
            x = f.eval(x);
            scale /= f.degree();
        }
    }
}

TEST(Green, ProductMapMatchesOneVariableOracle) {
    Philox rng(8);
    const cplx c1(-0.12, 0.75), c2(0.28, -0.01);
    MapSpec f = maps::product_quadratic(c1, c2);
    EscapeData e = escape_data(f);
    for (int i = 0; i < 2000; ++i) {
        cplx z(rng.uniform(-2, 2), rng.uniform(-2, 2)), w(rng.uniform(-2, 2), rng.uniform(-2, 2));
        double oracle = std::max(oracles::green_1d(c1, z), oracles::green_1d(c2, w));
        GreenValue g = green(f, e, v(z, w), 2000);
        EXPECT_NEAR(g.value, oracle, 1e-8);
    }
}

TEST(Green, HarmonicOnInvariantDisks) {
    const double h = 1e-2;
    MapSpec f = squares();
    EscapeData e = escape_data(f);
    MapSpec g = maps::product_quadratic(0.3, cplx(0, -0.2));
    EscapeData eg = escape_data(g);
    for (double r : {4.0, 5.5, 8.0})
        for (double th = 0.0; th < kTwoPi; th += 0.7) {
            cplx z = std::polar(r, th);
            auto lap = [&](const MapSpec& m, const EscapeData& ed, auto point) {
                double c = green(m, ed, point(z)).value;
                double s = green(m, ed, point(z + h)).value + green(m, ed, point(z - h)).value +
                           green(m, ed, point(z + cplx(0, h))).value + green(m, ed, point(z - cplx(0, h))).value;
                return (s - 4.0 * c) / (h * h);
            };
            EXPECT_LT(std::abs(lap(f, e, [](cplx t) { return make_vec(t, 0.0); })), 1e-6);
            // the disk (t, zeta t) with |zeta| < 1 lies in the stable set of [1:0]
            EXPECT_LT(std::abs(lap(f, e, [](cplx t) { return make_vec(t, cplx(0.3, 0.4) * t); })), 1e-6);
            EXPECT_LT(std::abs(lap(g, eg, [](cplx t) { return make_vec(t, 0.0); })), 1e-6);
        }
}

TEST(GreenGradient, Examples) {
    MapSpec f = squares();
    auto g = green_gradient(f, v(2, 1), 30);
    EXPECT_EQ(g[2], 0.0);
    EXPECT_EQ(g[3], 0.0);
    EXPECT_NEAR(g[0], 0.5, 1e-12); // d/dx log|x| at x = 2
    EXPECT_THROW(green_gradient(f, v(0.5, 0.5), 30), Error);
}

TEST(GreenGradient, MatchesFiniteDifferences) {
    MapSpec f = maps::basilica_skew();
    EscapeData e = escape_data(f);
    Philox rng(12);
    const int n = 5;
    auto approx = [&](const Vec2& p) {
        Vec2 x = p;
        for (int k = 0; k < n; ++k) x = f.eval(x);
        return std::log(norm(x)) / std::pow(2.0, n);
    };
    int tested = 0;
    while (tested < 100) {
        Vec2 p = v(cplx(rng.uniform(-8, 8), rng.uniform(-8, 8)), cplx(rng.uniform(-8, 8), rng.uniform(-8, 8)));
        if (norm(p) <= e.radius) continue;
        auto g = green_gradient(f, e, p, n);
        const double h = 1e-5;
        double gnorm = std::sqrt(g[0] * g[0] + g[1] * g[1] + g[2] * g[2] + g[3] * g[3]);
        for (int k = 0; k < 4; ++k) {
            Vec2 dp = Vec2::Zero();
            dp(k / 2) = (k % 2 == 0) ? cplx(h, 0) : cplx(0, h);
            double fd = (approx(p + dp) - approx(p - dp)) / (2 * h);
            EXPECT_NEAR(g[k], fd, 1e-6 * gnorm);
        }
        ++tested;
    }
}

TEST(GreenGradient, LongHorizonMatchesGreenDifferences) {
    MapSpec f = maps::basilica_skew();
    EscapeData e = escape_data(f);
    Vec2 p = v(cplx(1.3, 0.2), cplx(-0.4, 1.1));
    auto g = green_gradient(f, e, p, 200);
    const double h = 1e-5;
    for (int k = 0; k < 4; ++k) {
        Vec2 dp = Vec2::Zero();
        dp(k / 2) = (k % 2 == 0) ? cplx(h, 0) : cplx(0, h);
        double fd = (green(f, e, p + dp).value - green(f, e, p - dp).value) / (2 * h);
        EXPECT_NEAR(g[k], fd, 1e-7);
    }
}

TEST(GreenGradient, HomogeneousScaling) {
    MapSpec fh = homogeneous_part(maps::basilica_skew());
    Vec2 p = 5.0 * v(cplx(0.7, 0.1), cplx(-0.2, 0.9));
    auto g1 = green_gradient(fh, p, 200);
    for (double t : {2.0, 10.0, 1e3}) {
        auto gt = green_gradient(fh, t * p, 200);
        for (int k = 0; k < 4; ++k) EXPECT_NEAR(gt[k], g1[k] / t, 1e-12 * (1 + std::abs(g1[k])));
    }
}
