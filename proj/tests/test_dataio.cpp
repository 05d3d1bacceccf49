#include <gtest/gtest.h>
#include <zlib.h>

#include <filesystem>
#include <fstream>

#include "descent/dataio.hpp"

using namespace descent;
namespace fs = std::filesystem;

namespace {

std::string be(std::uint32_t v) {
    return {char(v >> 24), char((v >> 16) & 0xff), char((v >> 8) & 0xff), char(v & 0xff)};
}

std::string idx_images(int n, int rows, int cols, int salt = 0) {
    std::string b = be(0x803) + be(n) + be(rows) + be(cols);
    for (int i = 0; i < n * rows * cols; ++i) b.push_back(char((i * 37 + salt) % 256));
    return b;
}

std::string idx_labels(int n) {
    std::string b = be(0x801) + be(n);
    for (int i = 0; i < n; ++i) b.push_back(char(i % 10));
    return b;
}

class TempDir : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() / ("descent_dataio_" + std::to_string(::getpid()) + "_" +
                                           ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir);
    }
    void TearDown() override { fs::remove_all(dir); }
    std::string put(const std::string& name, const std::string& bytes, bool gz = false) {
        const std::string path = (dir / name).string();
        if (gz) {
            gzFile f = gzopen(path.c_str(), "wb");
            gzwrite(f, bytes.data(), unsigned(bytes.size()));
            gzclose(f);
        } else {
            std::ofstream(path, std::ios::binary) << bytes;
        }
        return path;
    }
    fs::path dir;
};

using Idx = TempDir;
using Curves = TempDir;

}  // namespace

TEST_F(Idx, ParsesPlainAndGzip) {
    for (bool gz : {false, true}) {
        auto raw = load_idx_dataset(put("img", idx_images(12, 28, 28), gz), put("lab", idx_labels(12), gz));
        EXPECT_EQ(raw.images.rows(), 12);
        EXPECT_EQ(raw.images.cols(), 784);
        EXPECT_EQ(raw.shape, (std::vector<int>{28, 28}));
        EXPECT_EQ(raw.labels[7], 7);
        EXPECT_EQ(raw.images(0, 1), 37.0);
        EXPECT_EQ(raw.images(1, 0), double((784 * 37) % 256));
    }
}

TEST_F(Idx, RejectsBadFiles) {
    auto lab = put("lab", idx_labels(5));
    auto swapped = put("swapped", idx_labels(5));
    EXPECT_THROW(load_idx_dataset(swapped, lab), ValidationError);
    std::string img = idx_images(5, 4, 4);
    EXPECT_THROW(load_idx_dataset(put("short", img.substr(0, img.size() - 3)), lab), ValidationError);
    EXPECT_THROW(load_idx_dataset(put("six", idx_images(6, 4, 4)), lab), ValidationError);
    EXPECT_THROW(load_idx_dataset((dir / "missing").string(), lab), ValidationError);
    EXPECT_THROW(load_idx_dataset(put("tiny", "ab"), lab), ValidationError);
}

TEST(Preprocess, CentersAndScales) {
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> U(0, 255);
    Eigen::MatrixXd img(50, 16);
    for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = U(rng);
    auto X = preprocess(img);
    EXPECT_LT(X.colwise().mean().cwiseAbs().maxCoeff(), 1e-10);
    Eigen::MatrixXd s = X * 4.0;
    EXPECT_NEAR(s.squaredNorm() / double(s.size()), 1.0, 1e-10);
    EXPECT_THROW(preprocess(Eigen::MatrixXd::Constant(5, 4, 3.0)), ValidationError);
    EXPECT_THROW(preprocess(Eigen::MatrixXd(0, 4)), ValidationError);
}

TEST(Labels, ParityAndCustomMap) {
    auto y = parity_labels({4, 7, 0, 9});
    EXPECT_EQ(y, (Eigen::VectorXd(4) << 1, -1, 1, -1).finished());
    EXPECT_EQ(parity_labels({2, 4, 6, 8}), Eigen::VectorXd::Ones(4));
    auto w = parity_labels({0, 1, 3, 9}, above_waist);
    EXPECT_EQ(w, (Eigen::VectorXd(4) << 1, -1, 1, -1).finished());
}

TEST(Dual, ZeroTargetAndPsd) {
    std::mt19937_64 rng(2);
    Eigen::MatrixXd X = detail::gaussian(400, 20, 1.0, rng);
    auto dual = estimate_dual(X, Eigen::VectorXd::Zero(400), 30);
    for (double c : dual.coeffs) EXPECT_EQ(c, 0.0);
    for (double e : dual.eigvals) EXPECT_GE(e, 0.0);
    EXPECT_EQ(dual.c0, 0.0);
    DualProvider p(dual);
    auto s = solve_zeta(p, cplx(-0.1));
    EXPECT_EQ(p.f2_of(s.zeta), cplx(p.c0()));
    EXPECT_THROW(estimate_dual(X, Eigen::VectorXd::Zero(3), 30), ValidationError);
}

TEST(Dual, RidgeDominatedLimit) {
    std::mt19937_64 rng(3);
    Eigen::MatrixXd X = detail::gaussian(500, 10, 0.1, rng);
    Eigen::VectorXd Y = X.col(0);
    auto dual = estimate_dual(X, Y, 10);
    const double lambda = 0.3;
    double prev = INFINITY;
    for (int n : {10, 1000, 100000, 10000000}) {
        double gap = std::abs(solve_zeta(dual_provider(dual, n, dual.c0), cplx(-lambda)).zeta.real() - lambda);
        EXPECT_LT(gap, prev);
        prev = gap;
    }
    EXPECT_LT(prev, 1e-5);
}

TEST(Dual, MatchesPrimalOnSyntheticData) {
    Ridgeless m{1.0, 0.5, 0.5, 1.0};
    const int d = 500, ntot = 50 * d;
    auto inst = sample_instance(m, d, 0.0, 11);
    std::mt19937_64 rng(5);
    Eigen::MatrixXd Z = detail::gaussian(ntot, d, 1.0 / std::sqrt(double(d)), rng);
    Eigen::MatrixXd X = Z * inst.A;
    Eigen::VectorXd Y = Z * (inst.B * Eigen::VectorXd::Ones(d));
    DualProvider D(estimate_dual(X, Y, d));
    AtomProvider P(atom_spectrum(m));
    EXPECT_NEAR(D.c0(), P.c0(), 0.02 * P.c0());
    EXPECT_NEAR(D.phi(), P.phi() / 0.5, 1e-12);  // n / p on the dual side
    for (cplx z : {cplx(-1e-2), cplx(-0.5), cplx(-2.0)}) {
        auto a = solve_zeta(P, z), b = solve_zeta(D, z);
        EXPECT_LT(std::abs(a.zeta - b.zeta), 0.02 * std::abs(a.zeta)) << z;
        EXPECT_LT(std::abs(P.f2_of(a.zeta) - D.f2_of(b.zeta)), 0.02 * std::abs(P.f2_of(a.zeta))) << z;
        cplx ta = f1_tilde(P, a.zeta, a.zeta), tb = f1_tilde(D, b.zeta, b.zeta);
        EXPECT_LT(std::abs(ta - tb), 0.02 * std::abs(ta)) << z;
    }
}

TEST(DatasetDescent, TracksClosedFormFlow) {
    std::mt19937_64 rng(4);
    Eigen::MatrixXd X = detail::gaussian(600, 20, 0.2, rng);
    Eigen::VectorXd Y = X * Eigen::VectorXd::LinSpaced(20, -1, 1) + 0.1 * detail::gaussian(600, 1, 1.0, rng).col(0);
    auto r = dataset_descent(X, Y, 100, 1e-2, 0.01, {0.0, 1.0, 10.0, 1000.0}, 7);
    ASSERT_EQ(r.times.size(), 4u);
    EXPECT_NEAR(r.train_errors[0], Y.squaredNorm() / 600, 0.5);  // beta0 = 0
    EXPECT_LT(r.train_errors.back(), r.train_errors[0]);
    EXPECT_LT(r.gen_errors.back(), r.gen_errors[0]);
    auto again = dataset_descent(X, Y, 100, 1e-2, 0.01, {0.0, 1.0, 10.0, 1000.0}, 7);
    EXPECT_EQ(r.gen_errors, again.gen_errors);
    EXPECT_THROW(dataset_descent(X, Y, 100, 1e-2, 100.0, {1.0}, 7), ValidationError);
    EXPECT_THROW(dataset_descent(X, Y, 100, 1e-2, 0.01, {2.0, 1.0}, 7), ValidationError);
}

TEST_F(Curves, CsvWithSidecarAndJsonRoundTrip) {
    CurveResult r;
    r.times = {0.0, 1.5};
    r.gen = {1.0, 0.75}, r.train = {1.0, 0.5};
    r.B0 = {1, 0.5}, r.B1 = {0, 0.1}, r.H0 = {1, 0.2}, r.H1 = {0, 0.3};
    r.lambda = 0.01, r.r0 = 1, r.c0 = 0.25, r.mean_u = 1;
    r.provider = {{"provider", "atoms"}, {"phi", 1.0}};
    nlohmann::json cfg = {{"command", "theory"}, {"model", {{"model", "ridgeless"}}}};
    const std::string csv = (dir / "c.csv").string();
    write_curves(r, csv, "", cfg);
    std::ifstream f(csv);
    std::string header;
    std::getline(f, header);
    EXPECT_EQ(header, "t,gen_error,train_error,B0,B1,H0,H1");
    auto meta = nlohmann::json::parse(std::ifstream(meta_path(csv)));
    EXPECT_EQ(meta["config"], cfg);
    EXPECT_EQ(meta["provider"], r.provider);
    auto back = read_curves(csv);
    EXPECT_EQ(back.gen, r.gen);
    EXPECT_EQ(back.lambda, r.lambda);
    const std::string js = (dir / "c.json").string();
    write_curves(r, js, "", cfg);
    auto jb = read_curves(js);
    EXPECT_EQ(to_json(jb), to_json(r));
    EXPECT_EQ(nlohmann::json::parse(std::ifstream(js))["config"], cfg);
    EXPECT_THROW(write_curves(r, csv, "xml"), ValidationError);
    EXPECT_THROW(write_curves(r, (dir / "no" / "such" / "x.csv").string()), ValidationError);
    EXPECT_THROW(read_curves((dir / "absent.csv").string()), ValidationError);
}
