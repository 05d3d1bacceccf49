#include <gtest/gtest.h>

#include <random>

#include "descent/pencil.hpp"
#include "descent/selfconsistent.hpp"

using namespace descent;

TEST(Profile, MarchenkoPasturPairing) {
    auto s = mp_pencil(0.5, cplx(-1.0), 1500);
    auto pr = derive_profile(s);
    const double gamma0 = double(s.dims[0]) / (s.dims[0] + s.dims[1]);
    EXPECT_NEAR(pr(0, 1, 1, 0), 1.0 / gamma0, 1e-12);
    EXPECT_NEAR(pr(1, 0, 0, 1), 1.0 / gamma0, 1e-12);
    EXPECT_EQ(pr(0, 1, 0, 1), 0.0);
    EXPECT_EQ(pr(1, 0, 1, 0), 0.0);
    EXPECT_EQ(pr(0, 0, 0, 0), 0.0);
}

TEST(Profile, WignerEtaIsIdentity) {
    auto s = wigner_pencil(cplx(0, 2), 800);
    auto pr = derive_profile(s);
    Eigen::MatrixXcd g(1, 1);
    g(0, 0) = cplx(0.3, -0.7);
    EXPECT_LT(std::abs(eta_map(s, pr, g)(0, 0) - g(0, 0)), 1e-14);
}

TEST(Profile, NoRandomBlocks) {
    PencilSpec s;
    s.dims = {2, 2};
    s.blocks.push_back({0, 0, BlockKind::identity_scalar, 1.0});
    s.blocks.push_back({1, 1, BlockKind::identity_scalar, 2.0});
    auto pr = derive_profile(s);
    for (double v : pr.sigma) EXPECT_EQ(v, 0.0);
}

TEST(Profile, EtaIsLinear) {
    AtomSpectrum sp = ridgeless_spectrum(1.0, 0.5, 0.5, 1.0);
    auto s = m1_pencil(sp, 40, cplx(-0.3), cplx(-0.5));
    auto pr = derive_profile(s);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> N;
    auto rnd = [&] {
        Eigen::MatrixXcd g(6, 6);
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 6; ++j) g(i, j) = cplx(N(rng), N(rng));
        return g;
    };
    auto g1 = rnd(), g2 = rnd();
    cplx a(0.7, -0.2), b(-1.3, 0.5);
    Eigen::MatrixXcd lhs = eta_map(s, pr, a * g1 + b * g2);
    Eigen::MatrixXcd rhs = a * eta_map(s, pr, g1) + b * eta_map(s, pr, g2);
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SolvePencil, WignerSemicircle) {
    auto g = solve_pencil(wigner_pencil(cplx(0, 2))).g(0, 0);
    EXPECT_NEAR(g.real(), 0.0, 1e-9);
    EXPECT_NEAR(g.imag(), std::sqrt(2.0) - 1, 1e-9);
    for (cplx z : {cplx(0.5, 0.3), cplx(-1.5, 1.0), cplx(3.0, 0.2)}) {
        auto w = solve_pencil(wigner_pencil(z)).g(0, 0);
        EXPECT_LT(std::abs(-z * w - 1.0 - w * w), 1e-8) << z;
    }
}

TEST(SolvePencil, MarchenkoPasturQuadratic) {
    for (double phi : {0.5, 1.5, 3.0})
        for (cplx z : {cplx(-1.0), cplx(0.5, 0.5), cplx(2.0, -0.3)}) {
            auto sol = solve_pencil(mp_pencil(phi, z));
            cplx g = sol.g(0, 0);
            EXPECT_LT(std::abs(z * g * g + (z + 1.0 - 1.0 / phi) * g + 1.0), 1e-8) << phi << " " << z;
            EXPECT_EQ(sol.g(0, 1), cplx(0.0));
        }
}

TEST(SolvePencil, NoRandomBlocksInvertsConstant) {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> N;
    PencilSpec s;
    s.dims = {3, 3};
    Eigen::MatrixXcd full(6, 6);
    for (int bi = 0; bi < 2; ++bi)
        for (int bj = 0; bj < 2; ++bj) {
            Eigen::MatrixXcd m(3, 3);
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) m(r, c) = cplx(N(rng), N(rng)) + (bi == bj && r == c ? 3.0 : 0.0);
            full.block(3 * bi, 3 * bj, 3, 3) = m;
            BlockSpec b{bi, bj, BlockKind::constant};
            b.dense = m;
            s.blocks.push_back(b);
        }
    auto sol = solve_pencil(s);
    Eigen::MatrixXcd inv = full.inverse();
    for (int bi = 0; bi < 2; ++bi)
        for (int bj = 0; bj < 2; ++bj)
            EXPECT_LT(std::abs(sol.g(bi, bj) - inv.block(3 * bi, 3 * bj, 3, 3).trace() / 3.0), 1e-12);
}

TEST(SolvePencil, M2MatchesF2) {
    for (double phi : {0.5, 2.0}) {
        AtomSpectrum sp = ridgeless_spectrum(1.0, 0.5, 0.5, phi);
        AtomProvider p(sp);
        for (cplx z : {cplx(-0.2), cplx(0.4, 0.6)}) {
            auto s = solve_zeta(p, z);
            auto g = solve_pencil(m2_pencil(sp, 400, z)).g;
            EXPECT_LT(std::abs(p.c0() + g(1, 0) - p.f2_of(s.zeta)), 1e-6) << phi << " " << z;
        }
    }
}

TEST(SolvePencil, M1MatchesF1TildeAndF0) {
    AtomSpectrum sp = nonisotropic_spectrum(2, 4.0, 0.8);
    AtomProvider p(sp);
    cplx x(-0.3), y(0.2, 0.5);
    auto sx = solve_zeta(p, x), sy = solve_zeta(p, y);
    auto g = solve_pencil(m1_pencil(sp, 400, x, y)).g;
    cplx ft = f1_tilde(p, sx.zeta, sy.zeta);
    EXPECT_LT(std::abs(g(0, 0) - ft), 1e-6 * std::abs(ft));
    EXPECT_LT(std::abs(-g(0, 4) - sx.f0), 1e-6 * std::abs(sx.f0));
}

TEST(SolvePencil, AmplificationReproducesBlocks) {
    auto s = mp_pencil(1.5, cplx(0.5, 0.4), 500);
    auto g = solve_pencil(s).g;
    auto a = solve_pencil(amplify(s)).g;
    const int n = int(s.dims.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) EXPECT_LT(std::abs(a(n + i, j) - g(i, j)), 1e-8);
}

TEST(FinitePencil, MarchenkoPasturOracle) {
    for (cplx z : {cplx(-1.0), cplx(-0.2)}) {
        auto limit = solve_pencil(mp_pencil(0.8, z, 3000)).g(0, 0);
        auto mc = sample_finite_pencil(mp_pencil(0.8, z, 3000), 17).g(0, 0);
        EXPECT_LT(std::abs(mc - limit), 0.03 * std::abs(limit)) << z;
    }
}

TEST(FinitePencil, M1Oracle) {
    AtomSpectrum sp = ridgeless_spectrum(1.0, 0.5, 0.5, 1.0);
    AtomProvider p(sp);
    cplx x(-0.3), y(-0.6);
    cplx ft = f1_tilde(p, solve_zeta(p, x).zeta, solve_zeta(p, y).zeta);
    auto mc = sample_finite_pencil(m1_pencil(sp, 300, x, y), 3).g;
    EXPECT_LT(std::abs(mc(0, 0) - ft), 0.03 * std::abs(ft));
}

TEST(FinitePencil, Deterministic) {
    auto s = wigner_pencil(cplx(0.3, 1.0), 200);
    auto a = sample_finite_pencil(s, 5), b = sample_finite_pencil(s, 5), c = sample_finite_pencil(s, 6);
    EXPECT_EQ(a.g(0, 0), b.g(0, 0));
    EXPECT_NE(a.g(0, 0), c.g(0, 0));
}

TEST(PencilJson, BuildersAndFullSpec) {
    auto w = pencil_from_json({{"builder", "wigner"}, {"z", {0.0, 2.0}}, {"N", 300}});
    EXPECT_NEAR(solve_pencil(w).g(0, 0).imag(), std::sqrt(2.0) - 1, 1e-9);
    nlohmann::json spec = {{"dims", {400, 600}},
                           {"symbols", {{{"name", "X"}, {"rows", 600}, {"cols", 400}, {"variance", 1.0 / 400}}}},
                           {"blocks",
                            {{{"i", 0}, {"j", 0}, {"kind", "identity_scalar"}, {"coeff", {1.0, 0.0}}},
                             {{"i", 1}, {"j", 1}, {"kind", "identity_scalar"}, {"coeff", -1.0}},
                             {{"i", 1}, {"j", 0}, {"kind", "random"}, {"symbol", "X"}},
                             {{"i", 0}, {"j", 1}, {"kind", "random"}, {"symbol", "X"}, {"transposed", true}}}}};
    auto a = solve_pencil(pencil_from_json(spec)).g(0, 0);
    auto b = solve_pencil(mp_pencil(400.0 / 600.0, cplx(-1.0), 1000)).g(0, 0);
    EXPECT_LT(std::abs(a - b), 1e-9);
    auto sol = to_json(solve_pencil(pencil_from_json(spec)));
    EXPECT_EQ(sol["g"].size(), 2u);
    EXPECT_EQ(sol["g"][0][0].size(), 2u);
}

TEST(PencilJson, RejectsBadSpecs) {
    EXPECT_THROW(pencil_from_json({{"builder", "circle"}, {"z", 1.0}}), ValidationError);
    EXPECT_THROW(pencil_from_json({{"dims", {2}}, {"blocks", {{{"i", 0}, {"j", 0}, {"kind", "ghost"}}}}}),
                 ValidationError);
    EXPECT_THROW(pencil_from_json({{"dims", {2}}, {"blocks", {{{"i", 0}, {"j", 3}, {"kind", "zero"}}}}}),
                 ValidationError);
    EXPECT_THROW(pencil_from_json({{"dims", {2}}, {"blocks", {{{"i", 0}, {"j", 0}, {"kind", "random"}, {"symbol", "Q"}}}}}),
                 ValidationError);
    EXPECT_THROW(pencil_from_json({{"blocks", nlohmann::json::array()}}), ValidationError);
    PencilSpec s;
    s.dims = {3};
    s.symbols = {{"A", 3, 3, 1.0, false}, {"B", 3, 3, 1.0, false}};
    s.blocks.push_back({0, 0, BlockKind::random, 1.0, {}, {}, "A", false});
    s.blocks.push_back({0, 0, BlockKind::random, 1.0, {}, {}, "B", false});
    EXPECT_THROW(derive_profile(s), ValidationError);
}
