#include <gtest/gtest.h>

#include <random>

#include <sstream>

#include <c2dyn/config.hpp>
#include <c2dyn/measures.hpp>

#include "oracles.hpp"

using namespace c2dyn;

namespace {

MapSpec squares() { return maps::product_quadratic(0.0, 0.0); }

double mean_of(const WeightedSampleSet& s, const std::function<double(const WeightedSample&)>& fn, double& se) {
    Estimate e = integrate(s, fn);
    se = e.stderr_;
    return e.value;
}

// 1-D inverse iteration for z^2 + c, independent of the library samplers
std::vector<cplx> inverse_iteration_1d(cplx c, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    cplx z = 1.7;
    for (int i = 0; i < 200; ++i) z = (rng() & 1 ? 1.0 : -1.0) * std::sqrt(z - c);
    std::vector<cplx> out;
    for (std::size_t i = 0; i < n; ++i) {
        z = (rng() & 1 ? 1.0 : -1.0) * std::sqrt(z - c);
        out.push_back(z);
    }
    return out;
}

// plain V-statistic form of the energy distance on C
double energy_1d(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    double ab = 0, aa = 0, bb = 0;
    for (auto x : a)
        for (auto y : b) ab += std::abs(x - y);
    for (auto x : a)
        for (auto y : a) aa += std::abs(x - y);
    for (auto x : b)
        for (auto y : b) bb += std::abs(x - y);
    double n = a.size(), m = b.size();
    return 2 * ab / (n * m) - aa / (n * n) - bb / (m * m);
}

} // namespace

TEST(MuPi, SquaringSamplesAreOnTheCircle) {
    auto s = sample_mu_pi(squares(), 4000, 7);
    ASSERT_EQ(s.size(), 4000u);
    EXPECT_EQ(s.kind, SampleKind::MuPi);
    double se_re, se_im, se_log;
    double re = mean_of(s, [](const WeightedSample& w) { return ProjectivePoint(w.x).zeta().real(); }, se_re);
    double im = mean_of(s, [](const WeightedSample& w) { return ProjectivePoint(w.x).zeta().imag(); }, se_im);
    double lg = mean_of(s, [](const WeightedSample& w) { return std::log(std::abs(ProjectivePoint(w.x).zeta())); }, se_log);
    EXPECT_LE(std::abs(re), 3 * se_re + 1e-12);
    EXPECT_LE(std::abs(im), 3 * se_im + 1e-12);
    EXPECT_LE(std::abs(lg), 3 * se_log + 1e-9);
    for (const auto& w : s.samples) EXPECT_NEAR(std::abs(ProjectivePoint(w.x).zeta()), 1.0, 1e-9);
}

TEST(MuPi, EmptyAndDeterministic) {
    EXPECT_TRUE(sample_mu_pi(squares(), 0, 1).empty());
    auto a = sample_mu_pi(maps::basilica_skew(), 300, 11), b = sample_mu_pi(maps::basilica_skew(), 300, 11);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.samples[i].x, b.samples[i].x);
}

TEST(Mu, SquaringSamplesAreOnTheTorus) {
    auto s = sample_mu(squares(), 2000, 3);
    ASSERT_EQ(s.size(), 2000u);
    double worst = 0;
    for (const auto& w : s.samples)
        worst = std::max({worst, std::abs(std::abs(w.x(0)) - 1.0), std::abs(std::abs(w.x(1)) - 1.0)});
    EXPECT_LT(worst, 1e-6);
    EXPECT_TRUE(sample_mu(squares(), 0, 3).empty());
}

TEST(Mu, ProductMarginalMatchesOneDimensionalInverseIteration) {
    const cplx c1(-0.6, 0.2);
    auto s = sample_mu(maps::product_quadratic(c1, cplx(0.1, 0.1)), 1500, 5);
    std::vector<cplx> z;
    for (const auto& w : s.samples) z.push_back(w.x(0));
    auto ref = inverse_iteration_1d(c1, 1500, 99);
    EXPECT_LT(energy_1d(z, ref), 0.05);
}

TEST(Mu, InvarianceOfMoments) {
    MapSpec f = maps::product_quadratic(cplx(-0.2, 0.1), -0.5);
    auto s = sample_mu(f, 4000, 21);
    WeightedSampleSet t = s;
    for (auto& w : t.samples) w.x = f.eval(w.x);
    for (int k = 0; k < 2; ++k) {
        auto m1 = [k](const WeightedSample& w) { return std::norm(w.x(k)); };
        auto m2 = [k](const WeightedSample& w) { return w.x(k).real(); };
        for (auto fn : {std::function<double(const WeightedSample&)>(m1), std::function<double(const WeightedSample&)>(m2)}) {
            Estimate a = integrate(s, fn), b = integrate(t, fn);
            EXPECT_LE(std::abs(a.value - b.value), 3 * std::hypot(a.stderr_, b.stderr_) + 1e-9);
        }
    }
}

TEST(Integrate, Examples) {
    auto s = sample_mu(squares(), 500, 1);
    Estimate one = integrate(s, [](const WeightedSample&) { return 1.0; });
    EXPECT_NEAR(one.value, 1.0, 1e-12);
    EXPECT_NEAR(one.stderr_, 0.0, 1e-12);
    MapSpec f = squares();
    Estimate g = integrate(s, [&](const WeightedSample& w) { return green(f, w.x).value; });
    EXPECT_NEAR(g.value, 0.0, 1e-9);
    Estimate l = integrate(s, [&](const WeightedSample& w) { return std::log(std::abs(jacobian(f, w.x).det)); });
    EXPECT_LE(std::abs(l.value - 2 * std::log(2.0)), 3 * l.stderr_ + 1e-9);
    EXPECT_THROW(integrate(WeightedSampleSet{}, [](const WeightedSample&) { return 1.0; }), Error);
}

TEST(Integrate, CsvHeader) {
    auto s = sample_mu_pi(squares(), 3, 1);
    std::ostringstream os;
    write_csv(os, s);
    std::string text = os.str();
    EXPECT_EQ(text.substr(0, text.find('\n')), "kind,re1,im1,re2,im2,theta,weight,seed,burn_in");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 4);
}

TEST(MuC, SquaresHaveZeroIntegral) {
    auto s = sample_mu_c(squares());
    EXPECT_EQ(s.kind, SampleKind::MuC);
    EXPECT_NEAR(s.integral_G, 0.0, 1e-6);
    EXPECT_NEAR(s.total_mass, 2.0, 0.2);
    for (const auto& w : s.samples) EXPECT_GE(w.weight, 0.0);
}

TEST(MuC, EscapingCriticalLineGivesOneDimensionalGreen) {
    MuCOptions o;
    o.tol = 2e-3;
    auto s = sample_mu_c(maps::product_quadratic(3.0, 0.0), o);
    const double ref = oracles::green_1d(3.0, 0.0);
    EXPECT_LE(std::abs(s.integral_G - ref), s.quadrature_error);
    EXPECT_NEAR(s.total_mass, 2.0, 0.2);
}

TEST(MuC, BoundedCriticalOrbitsGiveZero) {
    MuCOptions o;
    o.tol = 2e-3;
    auto s = sample_mu_c(maps::product_quadratic(-0.5, cplx(0.1, 0.2)), o);
    EXPECT_LE(std::abs(s.integral_G), s.quadrature_error);
    EXPECT_NEAR(s.total_mass, 2.0, 0.2);
}

TEST(Equidistribution, SquaringTreeSymmetrizes) {
    RationalMap g(squares());
    ProjectivePoint a = ProjectivePoint::from_chart(2.0);
    auto re = [](const ProjectivePoint& p) { return p.zeta().real(); };
    EXPECT_NEAR(equidistribution_stat(g, a, 0, re, 0.0), 2.0, 1e-12);
    double prev = 10;
    for (int j = 1; j <= 8; ++j) {
        double dev = equidistribution_stat(g, a, j, re, 0.0);
        EXPECT_LE(dev, prev + 1e-12);
        prev = dev;
    }
    EXPECT_LT(prev, 1e-9);
}

TEST(Equidistribution, BasilicaDeviationDecreases) {
    MapSpec basil(2, {{{2, 0}, 1.0}}, {{{0, 2}, 1.0}, {{2, 0}, -1.0}}, "basilica");
    RationalMap g(basil);
    auto mu = sample_mu_pi(basil, 200000, 4);
    auto bump = [](const ProjectivePoint& p) {
        cplx z = p.zeta();
        return std::exp(-std::norm(z - cplx(0.8, 0.2)));
    };
    double ref = integrate(mu, [&](const WeightedSample& w) { return bump(ProjectivePoint(w.x)); }).value;
    ProjectivePoint a = ProjectivePoint::from_chart(0.3);
    std::vector<double> dev;
    for (int j = 2; j <= 12; ++j) dev.push_back(equidistribution_stat(g, a, j, bump, ref));
    EXPECT_LT(dev.back(), dev.front());
    EXPECT_LT(dev.back(), 5e-3);
}

TEST(Equidistribution, DepthCap) {
    RationalMap g(squares());
    EXPECT_THROW(tree_average(g, ProjectivePoint::from_chart(2.0), 31, [](const ProjectivePoint&) { return 0.0; }), Error);
}
