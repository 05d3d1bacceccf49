#include <gtest/gtest.h>

#include <random>

#include "descent/spectra.hpp"

using namespace descent;

namespace {

void expect_atoms(const AtomSpectrum& s, const std::vector<Atom>& want) {
    ASSERT_EQ(s.atoms.size(), want.size());
    for (std::size_t k = 0; k < want.size(); ++k) {
        EXPECT_NEAR(s.atoms[k].weight, want[k].weight, 1e-14) << "atom " << k;
        EXPECT_NEAR(s.atoms[k].u, want[k].u, 1e-14) << "atom " << k;
        EXPECT_NEAR(s.atoms[k].v, want[k].v, 1e-14) << "atom " << k;
    }
}

}  // namespace

TEST(Ridgeless, TwoAtoms) {
    expect_atoms(ridgeless_spectrum(1.0, 0.5, 0.5, 1.0), {{0.5, 2.0, 2.0}, {0.5, 0.0, 0.5}});
}

TEST(Ridgeless, ZeroTargetHasZeroV) {
    auto s = ridgeless_spectrum(0.0, 0.0, 0.5, 1.0);
    for (const auto& a : s.atoms) EXPECT_EQ(a.v, 0.0);
    EXPECT_EQ(atoms_c0(s), 0.0);
}

TEST(Ridgeless, C0IsSignalPlusNoise) {
    for (double psi : {0.1, 0.3, 0.5, 0.9})
        EXPECT_NEAR(atoms_c0(ridgeless_spectrum(1.3, 0.7, psi, 2.0)), 1.3 * 1.3 + 0.7 * 0.7, 1e-14);
    EXPECT_NEAR(atoms_c0(ridgeless_spectrum(1.0, 0.5, 0.5, 1.0)), 1.25, 1e-15);
}

TEST(Ridgeless, RejectsPsiOutOfRange) {
    EXPECT_THROW(ridgeless_spectrum(1, 0.5, 0.0, 1), ValidationError);
    EXPECT_THROW(ridgeless_spectrum(1, 0.5, 1.0, 1), ValidationError);
    EXPECT_THROW(ridgeless_spectrum(1, 0.5, 0.5, 0), ValidationError);
}

TEST(Mismatched, FullStudentIsRidgeless) {
    for (double psi : {0.2, 0.5, 0.8}) {
        auto a = mismatched_spectrum(1.1, 0.4, 1.0, psi, 1.5);
        auto b = ridgeless_spectrum(1.1, 0.4, psi, 1.5);
        expect_atoms(a, b.atoms);
    }
}

TEST(Mismatched, ThreeAtoms) {
    expect_atoms(mismatched_spectrum(1.0, 0.0, 0.5, 0.5, 1.0), {{0.25, 4.0, 2.0}, {0.25, 0.0, 2.0}, {0.5, 0.0, 0.0}});
}

TEST(Mismatched, RejectsGamma) {
    EXPECT_THROW(mismatched_spectrum(1, 0, 0.0, 0.5, 1), ValidationError);
    EXPECT_THROW(mismatched_spectrum(1, 0, 1.5, 0.5, 1), ValidationError);
}

TEST(Nonisotropic, SingleLevel) { expect_atoms(nonisotropic_spectrum(1, 7.0, 0.5), {{1.0, 1.0, 1.0}}); }

TEST(Nonisotropic, ThreeLevels) {
    expect_atoms(nonisotropic_spectrum(3, 100.0, 0.5), {{1.0 / 3, 1.0, 1.0}, {1.0 / 3, 0.01, 1.0}, {1.0 / 3, 1e-4, 1.0}});
    for (int p : {1, 2, 5, 9}) EXPECT_NEAR(atoms_c0(nonisotropic_spectrum(p, 10.0, 0.5)), 1.0, 1e-14);
}

TEST(Nonisotropic, Asymptote) {
    EXPECT_NEAR(nonisotropic_asymptote(2, 0.25), 1.25, 1e-14);
    EXPECT_NEAR(nonisotropic_asymptote(1, 0.5), 0.5, 1e-14);
    EXPECT_GT(nonisotropic_asymptote(3, 1.0 / 3 + 1e-9), 1e6);
    EXPECT_THROW(nonisotropic_asymptote(2, 0.5), ValidationError);
    EXPECT_THROW(nonisotropic_asymptote(2, 1.5), ValidationError);
}

TEST(Kernel, FlatSpectrumIsIsotropic) {
    std::vector<double> omega(50, 1.0), theta(50, 0.8);
    auto s = kernel_spectrum(omega, theta, 2.0);
    expect_atoms(s, {{1.0, 1.0, 0.64}});
}

TEST(Kernel, NullTarget) {
    auto s = kernel_spectrum({1.0, 0.5, 0.25}, {0, 0, 0}, 1.0);
    EXPECT_EQ(atoms_c0(s), 0.0);
    EXPECT_NEAR(atoms_mean_u(s), 1.75 / 3, 1e-15);
}

TEST(Kernel, RejectsLengthMismatch) {
    EXPECT_THROW(kernel_spectrum({1.0, 2.0}, {1.0}, 1.0), ValidationError);
    EXPECT_THROW(kernel_spectrum({-1.0}, {1.0}, 1.0), ValidationError);
}

TEST(Hermite, Identity) {
    auto h = hermite_equivalents([](double x) { return x; });
    EXPECT_NEAR(h.mu, 1.0, 1e-12);
    EXPECT_NEAR(h.nu_sq, 0.0, 1e-12);
    EXPECT_TRUE(h.centered);
}

TEST(Hermite, CenteredRelu) {
    auto h = hermite_equivalents([](double x) { return std::max(x, 0.0) - 1.0 / std::sqrt(2.0 * pi); });
    EXPECT_NEAR(h.mu, 0.5, 1e-4);
    EXPECT_NEAR(h.nu_sq, 0.25 - 1.0 / (2.0 * pi), 1e-4);
    EXPECT_NEAR(h.he0, 0.0, 1e-4);
}

TEST(Hermite, SecondHermite) {
    auto h = hermite_equivalents([](double x) { return x * x - 1.0; });
    EXPECT_NEAR(h.mu, 0.0, 1e-10);
    EXPECT_NEAR(h.nu_sq, 2.0, 1e-10);
}

TEST(Hermite, NonCenteredIsFlaggedNotRejected) {
    auto h = hermite_equivalents([](double x) { return std::max(x, 0.0); });
    EXPECT_FALSE(h.centered);
    EXPECT_NEAR(h.he0, 1.0 / std::sqrt(2.0 * pi), 1e-4);
}

TEST(Hermite, BesselInequality) {
    for (auto f : std::vector<std::function<double(double)>>{
             [](double x) { return std::tanh(x); }, [](double x) { return std::sin(2 * x); },
             [](double x) { return x * x * x - 3 * x + 0.5 * x; }}) {
        auto h = hermite_equivalents(f);
        EXPECT_GE(h.nu_sq, -1e-12);
        EXPECT_GE(h.norm_sq + 1e-12, h.mu * h.mu + h.nu_sq - 1e-12);
    }
    EXPECT_THROW(hermite_equivalents([](double x) { return x; }, 16), ValidationError);
}

TEST(Spectrum, MergesCoincidingAtoms) {
    auto s = make_spectrum({{0.25, 1.0, 2.0}, {0.5, 3.0, 1.0}, {0.25, 1.0, 2.0}}, 1.0);
    expect_atoms(s, {{0.5, 1.0, 2.0}, {0.5, 3.0, 1.0}});
    EXPECT_THROW(make_spectrum({{0.5, 1.0, 1.0}}, 1.0), ValidationError);
    EXPECT_THROW(make_spectrum({{0.5, -1.0, 1.0}, {0.5, 1.0, 1.0}}, 1.0), ValidationError);
}

TEST(Spectrum, RandomConstructorsSatisfyInvariants) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> U(0.01, 0.99);
    for (int trial = 0; trial < 200; ++trial) {
        const double psi = U(rng), gamma = U(rng), phi = 3 * U(rng);
        for (const auto& s : {ridgeless_spectrum(2 * U(rng), U(rng), psi, phi),
                              mismatched_spectrum(U(rng), U(rng), gamma, psi, phi),
                              nonisotropic_spectrum(1 + trial % 6, 1.0 + 100 * U(rng), phi)}) {
            double total = 0;
            for (const auto& a : s.atoms) {
                EXPECT_GT(a.weight, 0);
                EXPECT_GE(a.u, 0);
                EXPECT_GE(a.v, 0);
                total += a.weight;
            }
            EXPECT_NEAR(total, 1.0, 1e-12);
        }
    }
}

TEST(ModelJson, RoundTripsEveryVariant) {
    std::vector<ModelParams> zoo{Ridgeless{1.0, 0.5, 0.5, 1.0}, Mismatched{1.0, 0.2, 0.5, 0.4, 0.8},
                                Nonisotropic{3, 100.0, 0.6}, Kernel{{1.0, 0.5}, {0.3, 0.2}, 1.5},
                                RandomFeatures{0.5, 0.3, 1.0, 0.3, 2.0, 2.0, 0.2}};
    for (const auto& m : zoo) {
        auto back = model_from_json(to_json(m));
        EXPECT_EQ(back.index(), m.index());
        EXPECT_EQ(to_json(back), to_json(m));
    }
}

TEST(ModelJson, Phi0IsConvertedThroughPsi) {
    auto m = model_from_json({{"model", "ridgeless"}, {"r", 1.0}, {"sigma", 0.5}, {"psi", 0.5}, {"phi0", 2.0}});
    EXPECT_DOUBLE_EQ(std::get<Ridgeless>(m).phi, 1.0);
    EXPECT_THROW(model_from_json({{"model", "ridgeless"}, {"psi", 0.5}, {"phi0", 2.0}, {"phi", 1.0}}), ValidationError);
}

TEST(ModelJson, ActivationMapsToHermiteCoefficients) {
    auto m = model_from_json(
        {{"model", "random_features"}, {"activation", "relu"}, {"phi0", 2.0}, {"psi0", 2.0}, {"psi", 0.2}});
    const auto& rf = std::get<RandomFeatures>(m);
    EXPECT_NEAR(rf.mu, 0.5, 1e-4);
    EXPECT_NEAR(rf.nu * rf.nu, 0.25 - 1.0 / (2.0 * pi), 1e-4);
}

TEST(ModelJson, RejectsBadInput) {
    EXPECT_THROW(model_from_json({{"model", "spline"}}), ValidationError);
    EXPECT_THROW(model_from_json({{"r", 1.0}}), ValidationError);
    EXPECT_THROW(model_from_json({{"model", "ridgeless"}, {"psi", "half"}, {"phi", 1.0}}), ValidationError);
    EXPECT_THROW(model_from_json({{"model", "random_features"}, {"mu", 1.0}, {"nu", 0.0}, {"phi0", 1.0}, {"psi0", 4.0},
                                  {"psi", 0.25}}),
                 ValidationError);
}

TEST(ModelJson, WithPhiTargetsTheSampleRatio) {
    EXPECT_DOUBLE_EQ(std::get<Ridgeless>(with_phi(Ridgeless{}, 0.7)).phi, 0.7);
    EXPECT_DOUBLE_EQ(std::get<RandomFeatures>(with_phi(RandomFeatures{}, 0.7)).phi0, 0.7);
    EXPECT_THROW(atom_spectrum(RandomFeatures{}), ValidationError);
}
