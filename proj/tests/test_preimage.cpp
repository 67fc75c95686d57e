#include <gtest/gtest.h>

#include <algorithm>

#include <c2dyn/config.hpp>
#include <c2dyn/preimage.hpp>

using namespace c2dyn;

namespace {

Vec2 v(cplx a, cplx b) { return make_vec(a, b); }

bool contains(const PreimageSet& s, const Vec2& x, double tol) {
    return std::any_of(s.points.begin(), s.points.end(), [&](const PreimagePoint& p) { return norm(p.x - x) < tol; });
}

} // namespace

TEST(Preimages, Squares) {
    MapSpec f = maps::product_quadratic(0.0, 0.0);
    PreimageSet s = preimages(f, v(4, 9));
    ASSERT_EQ(s.points.size(), 4u);
    for (auto& p : s.points) EXPECT_EQ(p.multiplicity, 1);
    for (double a : {2.0, -2.0})
        for (double b : {3.0, -3.0}) EXPECT_TRUE(contains(s, v(a, b), 1e-12));
}

TEST(Preimages, CriticalValueMultiplicityFour) {
    MapSpec f = maps::product_quadratic(1.0, 0.0);
    PreimageSet s = preimages(f, v(1, 0));
    ASSERT_EQ(s.points.size(), 1u);
    EXPECT_EQ(s.points[0].multiplicity, 4);
    EXPECT_LT(norm(s.points[0].x), 1e-7);
}

TEST(Preimages, SubstitutionExample) {
    MapSpec f(2, {{{2, 0}, 1.0}, {{0, 1}, -1.0}}, {{{0, 2}, 1.0}});
    PreimageSet s = preimages(f, v(0, 1));
    ASSERT_EQ(s.total_multiplicity(), 4);
    for (Vec2 x : {v(1, 1), v(-1, 1), v(cplx(0, 1), -1), v(cplx(0, -1), -1)}) EXPECT_TRUE(contains(s, x, 1e-10));
}

TEST(Preimages, BezoutCountAndResiduals) {
    Philox rng(21);
    for (const MapSpec& f : {maps::basilica_skew(), maps::swap_squares(), maps::product_quadratic(cplx(-0.1, 0.6), 0.25),
                             MapSpec(3, {{{3, 0}, 1.0}, {{1, 1}, 0.5}}, {{{0, 3}, 1.0}, {{2, 1}, 0.3}, {{0, 0}, 0.1}})}) {
        const int d = f.degree();
        for (int i = 0; i < 250; ++i) {
            Vec2 y = v(rng.complex_normal() * 3.0, rng.complex_normal() * 3.0);
            PreimageSet s = preimages(f, y, static_cast<std::uint64_t>(i));
            bool off_critical = std::all_of(s.points.begin(), s.points.end(),
                                            [&](const PreimagePoint& p) { return std::abs(jacobian(f, p.x).det) > 1e-6; });
            if (!off_critical) continue;
            EXPECT_EQ(static_cast<int>(s.points.size()), d * d);
            for (auto& p : s.points) {
                EXPECT_EQ(p.multiplicity, 1);
                EXPECT_LE(norm(f.eval(p.x) - y), 1e-10 * (1 + norm(y)));
            }
            EXPECT_LE(s.residual, 1e-10 * (1 + norm(y)));
        }
    }
}

TEST(TrackPreimage, LoopSwapsBranch) {
    MapSpec f = maps::product_quadratic(0.0, 0.0);
    auto path = [](double t) { return make_vec(4.0, 9.0 * std::polar(1.0, kTwoPi * t)); };
    Vec2 end = track_preimage(f, path, v(2, 3));
    EXPECT_LT(norm(end - v(2, -3)), 1e-10);
}

TEST(TrackPreimage, ConstantPath) {
    MapSpec f = maps::basilica_skew();
    Vec2 seed = v(cplx(0.3, 0.4), cplx(1.2, -0.5));
    Vec2 y = f.eval(seed);
    Vec2 end = track_preimage(f, [&](double) { return y; }, seed);
    EXPECT_LT(norm(end - seed), 1e-12);
}

TEST(TrackPreimage, CriticalValueAborts) {
    MapSpec f = maps::product_quadratic(1.0, 0.0);
    // y(t) = (1 + 3(1-t), 4(1-t)^2): ends at the critical value (1, 0)
    auto path = [](double t) { return make_vec(1.0 + 3.0 * (1 - t), 4.0 * (1 - t) * (1 - t)); };
    try {
        track_preimage(f, path, v(std::sqrt(3.0), 2.0));
        FAIL() << "expected NearCriticalValue";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NearCriticalValue);
        EXPECT_GT(e.param(), 0.5);
        EXPECT_LT(e.param(), 1.0);
    }
}

TEST(TrackPreimage, MonodromyPermutesFibre) {
    MapSpec f = maps::basilica_skew();
    Vec2 y0 = v(cplx(1.0, 0.5), cplx(-0.7, 0.2));
    PreimageSet s = preimages(f, y0);
    ASSERT_EQ(s.points.size(), 4u);
    auto loop = [&](double t) { return make_vec(y0(0) + 0.8 * (std::polar(1.0, kTwoPi * t) - 1.0), y0(1)); };
    std::vector<Vec2> ends;
    for (auto& p : s.points) ends.push_back(track_preimage(f, loop, p.x));
    for (auto& e : ends) EXPECT_TRUE(contains(s, e, 1e-8));
    for (std::size_t i = 0; i < ends.size(); ++i)
        for (std::size_t j = i + 1; j < ends.size(); ++j) EXPECT_GT(norm(ends[i] - ends[j]), 1e-6);
}

TEST(PreimagesPi, Examples) {
    RationalMap sq = induced_pi(maps::product_quadratic(0.0, 0.0));
    auto a = preimages_pi(sq, ProjectivePoint::from_chart(4.0));
    ASSERT_EQ(a.size(), 2u);
    for (cplx z : {cplx(2.0), cplx(-2.0)}) {
        bool found = false;
        for (auto& p : a) found |= chordal(p.point, ProjectivePoint::from_chart(z)) < 1e-12;
        EXPECT_TRUE(found);
    }
    RationalMap f3 = induced_pi(maps::basilica_skew());
    auto b = preimages_pi(f3, ProjectivePoint::from_chart(-1.0));
    ASSERT_EQ(b.size(), 1u);
    EXPECT_EQ(b[0].multiplicity, 2);
    EXPECT_LT(chordal(b[0].point, ProjectivePoint::from_chart(0.0)), 1e-7);
    RationalMap sw = induced_pi(maps::swap_squares());
    auto c = preimages_pi(sw, ProjectivePoint::from_chart(1.0));
    ASSERT_EQ(c.size(), 2u);
    for (cplx z : {cplx(1.0), cplx(-1.0)}) {
        bool found = false;
        for (auto& p : c) found |= chordal(p.point, ProjectivePoint::from_chart(z)) < 1e-12;
        EXPECT_TRUE(found);
    }
}
