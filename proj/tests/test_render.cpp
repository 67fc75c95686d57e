#include <gtest/gtest.h>

#include <sstream>

#include <c2dyn/config.hpp>
#include <c2dyn/render.hpp>

using namespace c2dyn;

namespace {

MapSpec squares() { return maps::product_quadratic(0.0, 0.0); }

Classification classify_one(const MapSpec& f, const Vec2& p, ClassifyOptions opt = {}) {
    RationalMap g(f);
    return classify(f, escape_data(f), g, attracting_cycles(g), p, opt);
}

} // namespace

TEST(Classify, Examples) {
    MapSpec f = squares();
    EXPECT_EQ(classify_one(f, make_vec(0.5, 0.5)).cls, PointClass::Bounded);
    EXPECT_EQ(classify_one(f, make_vec(3.0, 0.1)).cls, PointClass::EscapingToPiAttractor);
    EXPECT_EQ(classify_one(f, make_vec(3.0, 3.0)).cls, PointClass::EscapingNearJPi);
}

TEST(Classify, AttractorIdsAreDistinct) {
    MapSpec f = squares();
    auto a = classify_one(f, make_vec(3.0, 0.1)), b = classify_one(f, make_vec(0.1, 3.0));
    EXPECT_EQ(a.cls, PointClass::EscapingToPiAttractor);
    EXPECT_EQ(b.cls, PointClass::EscapingToPiAttractor);
    EXPECT_NE(a.cycle, b.cycle);
}

TEST(Cycles, SquaringAndBasilica) {
    auto sq = attracting_cycles(RationalMap(squares()));
    EXPECT_EQ(sq.cycles.size(), 2u);
    EXPECT_TRUE(sq.hyperbolic);
    MapSpec basil(2, {{{2, 0}, 1.0}}, {{{0, 2}, 1.0}, {{2, 0}, -1.0}});
    auto b = attracting_cycles(RationalMap(basil));
    EXPECT_EQ(b.cycles.size(), 2u); // infinity and {0, -1}
    std::size_t periods = 0;
    for (const auto& c : b.cycles) periods += c.points.size();
    EXPECT_EQ(periods, 3u);
}

TEST(Slice, SquaresCircleBand) {
    // on {z = 2} the direction is w/2, so the band is |w| = 2
    SliceSpec s = slice_z_equals(2.0, 3.0, 200);
    s.classify.direction_budget = 8;
    Image img = slice_render(squares(), s);
    ASSERT_EQ(img.px.size(), 200u * 200u);
    std::size_t band = 0;
    for (int i = 0; i < 200; ++i)
        for (int j = 0; j < 200; ++j) {
            double w = std::abs(s.param(i, j));
            std::uint16_t v = img.at(i, j);
            if (v == kPixelNearJPi) {
                ++band;
                EXPECT_NEAR(w, 2.0, 0.25);
            } else {
                EXPECT_GT(std::abs(w - 2.0), 0.01);
                EXPECT_TRUE(v >= 64 && v < 255);
            }
        }
    EXPECT_GT(band, 0u);
}

TEST(Slice, BasilicaSkewHasABand) {
    SliceSpec s = slice_z_equals(2.0, 3.0, 128);
    Image a = slice_render(maps::basilica_skew(), s), b = slice_render(maps::basilica_skew(), s);
    EXPECT_GT(count_value(a, kPixelNearJPi), 0u);
    EXPECT_EQ(a.px, b.px);
}

TEST(Slice, ValidationAndEmpty) {
    Image img = slice_render(squares(), slice_z_equals(2.0, 1.0, 0));
    EXPECT_TRUE(img.empty());
    EXPECT_THROW(slice_render(squares(), slice_z_equals(2.0, 1.0, 9000)), Error);
    EXPECT_THROW(slice_render(squares(), slice_z_equals(2.0, 0.0, 10)), Error);
}

TEST(Heatmap, RadialRampForSquares) {
    SliceSpec s;
    s.base = make_vec(0.0, 0.0);
    s.dir = make_vec(1.0, 0.0);
    s.half_width = 2.0;
    s.resolution = 101;
    Image img = green_heatmap(squares(), s);
    EXPECT_EQ(img.maxval, 65535);
    const int mid = 50;
    for (int i = 0; i < 101; ++i)
        for (int j = 0; j < 101; ++j)
            if (std::abs(s.param(i, j)) < 0.99) {
                EXPECT_EQ(img.at(i, j), 0);
            }
    // nondecreasing along the four axes
    for (int k = mid + 1; k < 101; ++k) {
        EXPECT_GE(img.at(mid, k), img.at(mid, k - 1));
        EXPECT_GE(img.at(k, mid), img.at(k - 1, mid));
        EXPECT_GE(img.at(mid, 100 - k), img.at(mid, 101 - k));
    }
    EXPECT_EQ(img.at(mid, 0), img.at(mid, 100));
}

TEST(Heatmap, BasilicaSkewFinite) {
    Image img = green_heatmap(maps::basilica_skew(), slice_z_equals(2.0, 3.0, 64));
    EXPECT_EQ(img.px.size(), 64u * 64u);
    EXPECT_EQ(*std::max_element(img.px.begin(), img.px.end()), 65535);
}

TEST(Pgm, Header) {
    Image img;
    img.width = 3;
    img.height = 2;
    img.px = {0, 1, 2, 3, 4, 255};
    std::ostringstream os;
    write_pgm(os, img);
    EXPECT_EQ(os.str(), std::string("P5\n3 2\n255\n") + std::string("\x00\x01\x02\x03\x04\xff", 6));
    img.maxval = 65535;
    img.px[0] = 0x1234;
    std::ostringstream o16;
    write_pgm(o16, img);
    EXPECT_EQ(o16.str().substr(0, 15), std::string("P5\n3 2\n65535\n\x12\x34", 15));
}

TEST(PixelDistance, Basics) {
    Image a, b;
    a.width = b.width = 2;
    a.height = b.height = 2;
    a.px = {255, 0, 255, 0};
    b.px = {255, 255, 0, 0};
    EXPECT_DOUBLE_EQ(pixel_set_distance(a, b), 0.5);
    EXPECT_DOUBLE_EQ(pixel_set_distance(a, a), 0.0);
    b.width = 1;
    EXPECT_THROW(pixel_set_distance(a, b), Error);
}
