#include <gtest/gtest.h>

#include <c2dyn/config.hpp>
#include <c2dyn/model.hpp>

using namespace c2dyn;

namespace {

MapSpec f1() { return maps::product_quadratic(0.0, 0.0); }
MapSpec f2() { return maps::swap_squares(); }
MapSpec basilica() { return MapSpec(2, {{{2, 0}, 1.0}}, {{{0, 2}, 1.0}, {{2, 0}, -1.0}}, "basilica"); }

const ProjectivePoint kInf(make_vec(0.0, 1.0));

// Boettcher coordinate of z^2 + c: z prod (1 + c/z_k^2)^(2^-(k+1))
cplx boettcher_1d(cplx c, cplx z) {
    cplx out = z, x = z;
    double e = 0.5;
    for (int k = 0; k < 60 && std::abs(x) < 1e100; ++k) {
        out *= std::pow(1.0 + c / (x * x), e);
        x = x * x + c;
        e *= 0.5;
    }
    return out;
}

// cone points with |z| = |w| at level G_h = lvl
std::vector<Vec2> cone_points(double lvl, int n, std::uint64_t seed) {
    Philox rng(seed, 5);
    std::vector<Vec2> out;
    for (int i = 0; i < n; ++i) {
        double r = std::exp(lvl);
        out.push_back(make_vec(std::polar(r, rng.uniform(0, kTwoPi)), std::polar(r, rng.uniform(0, kTwoPi))));
    }
    return out;
}

} // namespace

TEST(Section, Examples) {
    ModelData md = make_model(f1(), 200, 1);
    EXPECT_LT(chordal(md.a0, kInf), 1e-15);
    Vec2 s = section_s(md, ProjectivePoint::from_chart(cplx(0.3, -2.0)));
    EXPECT_NEAR(std::abs(s(0) - 1.0), 0.0, 1e-14);
    EXPECT_NEAR(std::abs(s(1) - cplx(0.3, -2.0)), 0.0, 1e-14);
    EXPECT_THROW(section_s(md, kInf), Error);
}

TEST(Section, ProjectsBack) {
    ModelData md = make_model(basilica(), 200, 2);
    Philox rng(9, 0);
    for (int i = 0; i < 1000; ++i) {
        ProjectivePoint a(make_vec(cplx(rng.normal(), rng.normal()), cplx(rng.normal(), rng.normal())));
        if (chordal(a, md.a0) < 1e-6) continue;
        EXPECT_LT(chordal(ProjectivePoint(section_s(md, a)), a), 1e-12);
    }
}

TEST(Chi, Examples) {
    ModelData m1 = make_model(f1(), 200, 1), m2 = make_model(f2(), 200, 1);
    for (cplx z : {cplx(0.2, 0.1), cplx(-3.0, 1.0), cplx(1.0, 0.0)})
        EXPECT_NEAR(std::abs(chi(f1(), m1, ProjectivePoint::from_chart(z)) - 1.0), 0.0, 1e-13);
    for (int k = 0; k < 16; ++k)
        EXPECT_NEAR(std::abs(chi(f2(), m2, ProjectivePoint::from_chart(std::polar(1.0, 0.4 * k)))), 1.0, 1e-13);
    // f_Pi([1:0]) = [0:1] = a0 for the swap
    EXPECT_THROW(chi(f2(), m2, ProjectivePoint::from_chart(0.0)), Error);
}

TEST(Alpha, Examples) {
    ModelData m1 = make_model(f1(), 200, 1), m2 = make_model(f2(), 200, 1);
    AlphaValue a = alpha(f1(), m1, ProjectivePoint::from_chart(cplx(0.4, 0.7)), 40);
    EXPECT_NEAR(a.value, 1.0, 1e-14);
    AlphaValue z = alpha(basilica(), make_model(basilica(), 300, 1), ProjectivePoint::from_chart(0.5), 0);
    EXPECT_EQ(z.value, 1.0);
    EXPECT_GE(z.error_bound, 0.0);
    for (const auto& p : m2.jpi) EXPECT_NEAR(alpha(f2(), m2, p, 40).value, 1.0, 1e-12);
    EXPECT_THROW(alpha(f1(), m1, ProjectivePoint::from_chart(0.5), -1), Error);
    try {
        // [1:0] -> [0:1] after one step of the swap
        alpha(f2(), m2, ProjectivePoint::from_chart(0.0), 5);
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SectionPole);
        EXPECT_EQ(e.param(), 0.0);
    }
}

TEST(Alpha, TruncationBoundShrinks) {
    MapSpec f = basilica();
    ModelData md = make_model(f, 300, 3);
    const ProjectivePoint& a = md.jpi[5];
    double prev = alpha(f, md, a, 4).error_bound;
    AlphaValue full = alpha(f, md, a, 50);
    for (int m : {8, 16, 30}) {
        AlphaValue v = alpha(f, md, a, m);
        EXPECT_LT(v.error_bound, prev);
        EXPECT_LE(std::abs(v.log_value - full.log_value), v.error_bound + 1e-14);
        prev = v.error_bound;
    }
}

TEST(Alpha, ConjugacyResidual) {
    for (const MapSpec& f : {f1(), f2(), basilica(), maps::basilica_skew()}) {
        ModelData md = make_model(f, 1000, 4);
        double worst = 0;
        for (const auto& p : md.jpi) worst = std::max(worst, alpha_conjugacy_residual(f, md, p, 40));
        EXPECT_LT(worst, 1e-8) << f.label();
    }
    ModelData m1 = make_model(f1(), 300, 4);
    for (cplx z : {cplx(0.1, 0.0), cplx(0.0, 0.5), std::polar(1.0, 1.0)}) EXPECT_LT(alpha_conjugacy_residual(f1(), m1, ProjectivePoint::from_chart(z)), 1e-12);
}

TEST(Winding, Examples) {
    ModelData m1 = make_model(f1(), 200, 1), m2 = make_model(f2(), 200, 1);
    EXPECT_EQ(winding_number_eta(f1(), m1, unit_circle_loop(720)), 0);
    EXPECT_EQ(std::abs(winding_number_eta(f2(), m2, unit_circle_loop(720))), 2);
    std::vector<ProjectivePoint> small;
    for (int k = 0; k < 200; ++k) small.push_back(ProjectivePoint::from_chart(cplx(2.0, 0.0) + std::polar(0.1, kTwoPi * k / 200)));
    EXPECT_EQ(winding_number_eta(f1(), m1, small), 0);
    try {
        winding_number_eta(f1(), m1, unit_circle_loop(10));
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::LoopNotClosed);
    }
}

TEST(Model, DeterminantRoute) {
    ModelData md = make_model(basilica(), 300, 1, SectionRoute::Determinant);
    EXPECT_EQ(md.N, 2);
    double worst = 0;
    for (const auto& p : md.jpi) worst = std::max(worst, alpha_conjugacy_residual(basilica(), md, p, 40));
    EXPECT_LT(worst, 1e-8);
}

TEST(Psi, HomogeneousIsIdentity) {
    Vec2 x = make_vec(cplx(30.0, 1.0), cplx(-20.0, 4.0));
    PsiResult r = psi(f1(), x);
    EXPECT_EQ(r.value, x);
    EXPECT_EQ(r.increment, 0.0);
}

TEST(Psi, ProductMapAgainstBoettcher) {
    const cplx c = 0.05;
    MapSpec f = maps::product_quadratic(c, 0.0);
    EscapeData e = escape_data(f);
    const double lvl = model_level(e) + 0.25;
    for (const Vec2& x : cone_points(lvl, 100, 1)) {
        PsiResult p = psi(f, x, 12, 16);
        PsiResult q = psi(f, f.eval_top(x), 12, 16);
        EXPECT_LE(norm(f.eval(p.value) - q.value), 1e-6 * (1.0 + norm(q.value)));
        EXPECT_LE(std::abs(green(f, e, p.value).value - green_h(f, e, x).value), 1e-6);
        EXPECT_LT(std::abs(boettcher_1d(c, p.value(0)) - x(0)), 1e-9 * std::abs(x(0)));
        EXPECT_LT(std::abs(p.value(1) - x(1)), 1e-12 * std::abs(x(1)));
        EXPECT_TRUE(p.hyperbolic);
    }
}

TEST(Psi, BasilicaSkewMap) {
    MapSpec f = maps::basilica_skew();
    EscapeData e = escape_data(f);
    ModelData md = make_model(f, 500, 2);
    const double lvl = model_level(e) + 0.5;
    for (std::size_t i = 0; i < 30; ++i) {
        Vec2 u = md.jpi[i * 7].rep();
        Vec2 x = u * std::exp(lvl - green_h(f, e, u).value);
        PsiResult p = psi(f, x), q = psi(f, f.eval_top(x));
        EXPECT_LE(norm(f.eval(p.value) - q.value), 1e-6 * (1.0 + norm(q.value)));
        EXPECT_LE(std::abs(green(f, e, p.value).value - lvl), 1e-6);
    }
}

TEST(Psi, BelowModelLevelIsRejected) {
    MapSpec f = maps::basilica_skew();
    EXPECT_THROW(psi(f, make_vec(1.0, 1.0)), Error);
    EXPECT_THROW(psi(f, make_vec(1e6, 1e6), -1), Error);
}
