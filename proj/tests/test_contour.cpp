#include <gtest/gtest.h>

#include "descent/contour.hpp"
#include "descent/randomfeatures.hpp"

using namespace descent;

namespace {

double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0;
    for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]) / std::max(1.0, std::abs(b[k])));
    return m;
}

}  // namespace

TEST(Rectangle, Crossings) {
    auto c = build_rectangle(4.0, 0.01);
    EXPECT_DOUBLE_EQ(c.left, -0.005);
    EXPECT_DOUBLE_EQ(c.right, 4.8);
    auto d = build_rectangle(0.0, 1.0);
    EXPECT_DOUBLE_EQ(d.left, -0.5);
    EXPECT_DOUBLE_EQ(d.right, 1.2);
    EXPECT_THROW(build_rectangle(1.0, 0.1, 0.0, 7), ValidationError);
    EXPECT_THROW(build_rectangle(1.0, 0.0), ValidationError);
    EXPECT_THROW(build_rectangle(-1.0, 0.1), ValidationError);
}

TEST(Rectangle, ClosedAndConjugateSymmetric) {
    for (int n : {8, 33, 400, 1000}) {
        auto c = build_rectangle(3.0, 0.1, 0.0, n);
        cplx s = 0;
        for (auto w : c.weights) s += w;
        EXPECT_LT(std::abs(s), 1e-12) << n;
        const std::size_t m = c.nodes.size();
        for (std::size_t k = 0; k < m; ++k) EXPECT_EQ(c.nodes[m - 1 - k], std::conj(c.nodes[k]));
    }
}

TEST(ContourIntegral, Residues) {
    auto c = build_rectangle(3.0, 0.1, 0.0, 400);
    cplx a(1.3, 0.2);
    EXPECT_LT(std::abs(contour_integral(c, [&](cplx z) { return 1.0 / (z - a); }) - cplx(0, 2 * pi)), 1e-8);
    EXPECT_LT(std::abs(contour_integral(c, [](cplx z) { return z * z; })), 1e-10);
    cplx count = contour_integral(c, [](cplx z) { return 1.0 / (1.0 - z) + 1.0 / (2.0 - z) + 1.0 / (3.0 - z); });
    EXPECT_LT(std::abs(-count / cplx(0, 2 * pi) - 3.0), 1e-8);
}

TEST(ContourIntegral, RejectsNonFinite) {
    auto c = build_rectangle(1.0, 0.1, 0.0, 16);
    cplx bad = c.nodes[5];
    EXPECT_THROW(contour_integral(c, [&](cplx z) { return z == bad ? cplx(NAN) : z; }), NumericalError);
}

TEST(Evolution, InitialValues) {
    AtomProvider p(nonisotropic_spectrum(2, 4.0, 0.7));
    auto r = evolution_curves(p, 1e-2, 0.8, {0.0, 1.0});
    EXPECT_EQ(r.B1[0], 0.0);
    EXPECT_EQ(r.H1[0], 0.0);
    EXPECT_NEAR(r.B0[0], atoms_mean_u(p.spectrum()), 1e-6);
    EXPECT_NEAR(r.gen[0], p.c0() + 0.64 * p.mean_u(), 1e-6);
    for (std::size_t k = 0; k < r.times.size(); ++k) {
        EXPECT_DOUBLE_EQ(r.gen[k], r.c0 + 0.64 * r.B0[k] + r.B1[k]);
        EXPECT_DOUBLE_EQ(r.train[k], r.c0 + 0.64 * r.H0[k] + r.H1[k]);
    }
}

TEST(Evolution, LargeTimeLimit) {
    for (double phi : {0.25, 1.0}) {
        AtomProvider p(ridgeless_spectrum(1.0, 0.5, 0.5, phi));
        const double lambda = 1e-2;
        auto r = evolution_curves(p, lambda, 1.0, {20 / lambda, 100 / lambda});
        auto inf = infinite_time_errors(p, lambda);
        EXPECT_NEAR(r.gen.back(), inf.gen, 1e-3);
        EXPECT_NEAR(r.train.back(), inf.train, 1e-3);
        EXPECT_NEAR(r.train.back() / r.gen.back(), inf.eta * inf.eta, 1e-6);
    }
}

TEST(Evolution, NodeDoublingIsStable) {
    AtomProvider p(ridgeless_spectrum(1.0, 0.5, 0.5, 1.0));
    auto t = default_time_grid(20, 1e-1, 1e4);
    auto a = evolution_curves(p, 1e-3, 1.0, t, 400), b = evolution_curves(p, 1e-3, 1.0, t, 800);
    EXPECT_LT(max_rel_diff(a.gen, b.gen), 1e-6);
    EXPECT_LT(max_rel_diff(a.train, b.train), 1e-6);
}

TEST(Evolution, NonnegativeAndDampedOnZoo) {
    std::vector<AtomProvider> zoo{AtomProvider(ridgeless_spectrum(1, 0.5, 0.5, 0.25)),
                                  AtomProvider(mismatched_spectrum(1, 0.2, 0.6, 0.4, 0.3)),
                                  AtomProvider(nonisotropic_spectrum(3, 100.0, 0.5)),
                                  AtomProvider(kernel_spectrum({1.0, 0.5, 0.1}, {0.4, 0.3, 0.2}, 1.3))};
    auto t = default_time_grid(25, 1e-2, 1e5);
    for (const auto& p : zoo) {
        auto r = evolution_curves(p, 1e-2, 1.0, t);
        EXPECT_LT(r.max_imag, 1e-6);
        for (std::size_t k = 0; k < t.size(); ++k) {
            EXPECT_GE(r.gen[k], -1e-8);
            EXPECT_GE(r.train[k], -1e-8);
            if (k) EXPECT_LE(r.B0[k], r.B0[k - 1] + 1e-9);
        }
    }
}

TEST(Evolution, RejectsZeroLambda) {
    AtomProvider p(ridgeless_spectrum(1.0, 0.5, 0.5, 1.0));
    EXPECT_THROW(evolution_curves(p, 0.0, 1.0, {1.0}), ValidationError);
    EXPECT_THROW(h1_variant_from_string("eta"), ValidationError);
}

TEST(Evolution, RandomFeaturesLargeTime) {
    RFProvider p(RandomFeatures{0.5, 0.3, 1.0, 0.3, 3.0, 2.0, 0.2});
    const double lambda = 1e-2;
    auto r = evolution_curves(p, lambda, 1.0, {20 / lambda});
    auto inf = infinite_time_errors(p, lambda);
    EXPECT_NEAR(r.gen.back(), inf.gen, 1e-3);
    EXPECT_NEAR(r.train.back(), inf.train, 1e-3);
}

TEST(Serialization, CsvAndJsonRoundTrip) {
    AtomProvider p(ridgeless_spectrum(1.0, 0.5, 0.5, 1.0));
    auto r = evolution_curves(p, 1e-2, 1.0, default_time_grid(10, 1e-1, 1e3));
    auto back = curves_from_csv(curves_to_csv(r));
    EXPECT_EQ(back.times, r.times);
    EXPECT_EQ(back.gen, r.gen);
    EXPECT_EQ(back.H1, r.H1);
    auto j = curve_from_json(to_json(r));
    EXPECT_EQ(j.train, r.train);
    EXPECT_EQ(j.lambda, r.lambda);
    EXPECT_EQ(to_json(j), to_json(r));
    EXPECT_THROW(curves_from_csv("t,gen\n1,2\n"), ValidationError);
    EXPECT_THROW(curves_from_csv(std::string(curve_csv_header()) + "\n1,2,3\n"), ValidationError);
}

TEST(TimeGrid, Default) {
    auto t = default_time_grid();
    ASSERT_EQ(t.size(), 60u);
    EXPECT_DOUBLE_EQ(t.front(), 1e-2);
    EXPECT_NEAR(t.back(), 1e6, 1e-6);
    EXPECT_THROW(default_time_grid(1), ValidationError);
}
