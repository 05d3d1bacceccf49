#pragma once

#include <zlib.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "contour.hpp"
#include "core.hpp"
#include "json.hpp"
#include "selfconsistent.hpp"
#include "simulate.hpp"

namespace descent {

struct RawDataset {
    Eigen::MatrixXd images;  // one flattened image per row
    std::vector<int> labels;
    std::vector<int> shape;  // per-image dimensions, e.g. {28, 28}
};

namespace detail {

// Reads plain or gzip-compressed files alike.
inline std::string read_maybe_gz(const std::string& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw ValidationError("cannot open '" + path + "'");
    std::string out;
    char buf[1 << 16];
    int got;
    while ((got = gzread(f, buf, sizeof buf)) > 0) out.append(buf, std::size_t(got));
    int err = 0;
    const char* msg = gzerror(f, &err);
    const bool bad = got < 0 || (err != Z_OK && err != Z_STREAM_END);
    const std::string why = bad && msg ? msg : "";
    gzclose(f);
    if (bad) throw ValidationError("'" + path + "': read failed: " + why);
    return out;
}

inline std::uint32_t be32(const std::string& b, std::size_t at) {
    return (std::uint32_t(std::uint8_t(b[at])) << 24) | (std::uint32_t(std::uint8_t(b[at + 1])) << 16) |
           (std::uint32_t(std::uint8_t(b[at + 2])) << 8) | std::uint32_t(std::uint8_t(b[at + 3]));
}

struct Idx {
    std::vector<std::uint32_t> dims;
    std::string payload;
};

inline Idx parse_idx(const std::string& bytes, std::uint32_t magic, const std::string& path) {
    require(bytes.size() >= 4, "'" + path + "': too short for an IDX header");
    const std::uint32_t got = be32(bytes, 0);
    char hex[16];
    std::snprintf(hex, sizeof hex, "0x%08x", got);
    char want[16];
    std::snprintf(want, sizeof want, "0x%08x", magic);
    require(got == magic, "'" + path + "': magic " + hex + ", expected " + want);
    const std::size_t nd = magic & 0xff;
    require(bytes.size() >= 4 + 4 * nd, "'" + path + "': truncated IDX header");
    Idx idx;
    std::size_t count = 1;
    for (std::size_t k = 0; k < nd; ++k) {
        idx.dims.push_back(be32(bytes, 4 + 4 * k));
        count *= idx.dims.back();
    }
    const std::size_t start = 4 + 4 * nd;
    require(bytes.size() - start >= count,
            "'" + path + "': truncated payload (" + std::to_string(bytes.size() - start) + " of " +
                std::to_string(count) + " bytes)");
    idx.payload = bytes.substr(start, count);
    return idx;
}

}  // namespace detail

inline RawDataset load_idx_dataset(const std::string& images_path, const std::string& labels_path) {
    const auto img = detail::parse_idx(detail::read_maybe_gz(images_path), 0x00000803, images_path);
    const auto lab = detail::parse_idx(detail::read_maybe_gz(labels_path), 0x00000801, labels_path);
    require(img.dims[0] == lab.dims[0], "image count " + std::to_string(img.dims[0]) + " does not match label count " +
                                            std::to_string(lab.dims[0]));
    const Eigen::Index n = img.dims[0], d = Eigen::Index(img.dims[1]) * img.dims[2];
    RawDataset raw;
    raw.shape = {int(img.dims[1]), int(img.dims[2])};
    raw.images.resize(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < d; ++k) raw.images(i, k) = double(std::uint8_t(img.payload[i * d + k]));
    raw.labels.reserve(n);
    for (Eigen::Index i = 0; i < n; ++i) raw.labels.push_back(int(std::uint8_t(lab.payload[i])));
    return raw;
}

// Center columns, scale to unit global variance, then divide by sqrt(d).
inline Eigen::MatrixXd preprocess(const Eigen::MatrixXd& images) {
    require(images.rows() > 0 && images.cols() > 0, "preprocess: empty dataset");
    Eigen::MatrixXd X = images.rowwise() - images.colwise().mean();
    const double sd = std::sqrt(X.squaredNorm() / double(X.size()));
    require(sd > 0, "preprocess: zero global standard deviation (constant images)");
    X /= sd * std::sqrt(double(X.cols()));
    return X;
}

inline Eigen::MatrixXd preprocess(const RawDataset& raw) { return preprocess(raw.images); }

// Even -> +1, odd -> -1, or any custom map.
inline Eigen::VectorXd parity_labels(const std::vector<int>& labels,
                                     const std::function<double(int)>& map = [](int k) { return k % 2 == 0 ? 1.0 : -1.0; }) {
    Eigen::VectorXd y(Eigen::Index(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i) y(Eigen::Index(i)) = map(labels[i]);
    return y;
}

// Fashion-MNIST split: tops and dresses (0 T-shirt, 2 pullover, 3 dress, 4 coat, 6 shirt) vs the rest.
inline double above_waist(int k) { return (k == 0 || k == 2 || k == 3 || k == 4 || k == 6) ? 1.0 : -1.0; }

struct EmpiricalDual {
    std::vector<double> eigvals;  // spectrum of X^T X / n_tot
    std::vector<double> coeffs;   // X^T Y / n_tot in that eigenbasis
    int n_train = 0;
    int n_total = 0;
    double c0 = 0;  // mean of y^2
};

inline EmpiricalDual estimate_dual(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y, int n_train) {
    require(X.rows() == Y.size() && X.rows() > 0, "estimate_dual: X and Y row counts differ");
    require(n_train >= 1, "estimate_dual: n_train must be positive");
    if (n_train > X.rows() / 10)
        std::cerr << "warning: n_train = " << n_train << " exceeds a tenth of the " << X.rows()
                  << " rows used to estimate the dual operators\n";
    const double nt = double(X.rows());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X.transpose() * X / nt);
    if (es.info() != Eigen::Success) throw NumericalError("estimate_dual: eigendecomposition failed");
    const Eigen::VectorXd v = es.eigenvectors().transpose() * (X.transpose() * Y / nt);
    EmpiricalDual dual;
    dual.n_train = n_train;
    dual.n_total = int(X.rows());
    dual.c0 = Y.squaredNorm() / nt;
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        double e = es.eigenvalues()(k);
        require(e >= -1e-10 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff()),
                "estimate_dual: covariance is not positive semidefinite");
        dual.eigvals.push_back(std::max(e, 0.0));
        dual.coeffs.push_back(v(k));
    }
    return dual;
}

// Functionals from the n-normalized dual operators: l = n eig, c = n coeff.
class DualProvider {
public:
    struct Node {
        cplx zeta;
        cplx f2;
        std::vector<cplx> g;  // c sqrt(l) / (sqrt(n) (l + zeta))
        std::vector<cplx> q;  // l / (sqrt(n) (l + zeta))
    };

    DualProvider(const EmpiricalDual& dual, int n_train, double c0) : n_(n_train), c0_(c0) {
        require(n_train >= 1, "dual provider: n_train must be positive");
        require(dual.eigvals.size() == dual.coeffs.size() && !dual.eigvals.empty(),
                "dual provider: eigvals and coeffs must be nonempty and of equal length");
        require(c0 >= 0, "dual provider: c0 must be nonnegative");
        for (std::size_t k = 0; k < dual.eigvals.size(); ++k) {
            require(dual.eigvals[k] >= 0, "dual provider: negative eigenvalue");
            l_.push_back(n_ * dual.eigvals[k]);
            c_.push_back(n_ * dual.coeffs[k]);
            lmax_ = std::max(lmax_, l_.back());
            sum_l_ += l_.back();
        }
    }
    explicit DualProvider(const EmpiricalDual& dual) : DualProvider(dual, dual.n_train, dual.c0) {}

    double phi() const { return n_ / double(l_.size()); }
    double c0() const { return c0_; }
    double mean_u() const { return sum_l_ / n_; }
    double spectrum_bound() const {
        const double r = 1.0 + std::sqrt(double(l_.size()) / n_);
        return std::max(lmax_ * r * r, 1e-12);
    }

    cplx zeta_rhs(cplx zeta) const {
        cplx s = 0.0;
        for (double l : l_) s += zeta * l / (l + zeta);
        return s / n_;
    }
    cplx zeta_rhs_derivative(cplx zeta) const {
        cplx s = 0.0;
        for (double l : l_) {
            const cplx den = l + zeta;
            s += l * l / (den * den);
        }
        return s / n_;
    }
    cplx f2_of(cplx zeta) const {
        cplx s = 0.0;
        for (std::size_t k = 0; k < l_.size(); ++k) s += c_[k] * c_[k] / (l_[k] + zeta);
        return s / n_;
    }

    Node node(cplx zeta) const {
        Node nd{zeta, f2_of(zeta), {}, {}};
        nd.g.reserve(l_.size());
        nd.q.reserve(l_.size());
        const double rn = 1.0 / std::sqrt(n_);
        for (std::size_t k = 0; k < l_.size(); ++k) {
            const cplx r = rn / (l_[k] + zeta);
            nd.g.push_back(c_[k] * std::sqrt(l_[k]) * r);
            nd.q.push_back(l_[k] * r);
        }
        return nd;
    }
    F1Parts f1_parts(const Node& x, const Node& y) const {
        double ar = 0, ai = 0, br = 0, bi = 0;
        for (std::size_t k = 0; k < x.g.size(); ++k) {
            const double gxr = x.g[k].real(), gxi = x.g[k].imag(), gyr = y.g[k].real(), gyi = y.g[k].imag();
            const double qxr = x.q[k].real(), qxi = x.q[k].imag(), qyr = y.q[k].real(), qyi = y.q[k].imag();
            ar += gxr * gyr - gxi * gyi;
            ai += gxr * gyi + gxi * gyr;
            br += qxr * qyr - qxi * qyi;
            bi += qxr * qyi + qxi * qyr;
        }
        return {cplx(ar, ai) + c0_ - x.f2 - y.f2, {br, bi}};
    }

    nlohmann::json describe() const {
        return {{"provider", "dual"}, {"n_train", n_}, {"c0", c0_}, {"features", l_.size()}, {"mean_u", mean_u()}};
    }

private:
    double n_;
    double c0_;
    std::vector<double> l_, c_;
    double lmax_ = 0, sum_l_ = 0;
};

inline DualProvider dual_provider(const EmpiricalDual& dual, int n_train, double c0) {
    return DualProvider(dual, n_train, c0);
}

// Full-batch gradient descent on a random training subsample; gen is the
// held-out mean squared error, train the subsample one.
inline TrajectoryResult dataset_descent(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y, int n_train, double lambda,
                                        double dt, const std::vector<double>& times, std::uint64_t seed) {
    require(n_train >= 1 && n_train < X.rows(), "dataset_descent: need 1 <= n_train < rows");
    require(dt > 0, "dataset_descent: dt must be positive");
    std::vector<Eigen::Index> idx(std::size_t(X.rows()));
    std::iota(idx.begin(), idx.end(), Eigen::Index(0));
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    Eigen::MatrixXd Xt(n_train, X.cols());
    Eigen::VectorXd Yt(n_train);
    for (int i = 0; i < n_train; ++i) Xt.row(i) = X.row(idx[i]), Yt(i) = Y(idx[i]);
    const Eigen::Index held = X.rows() - n_train;
    Eigen::MatrixXd Xh(held, X.cols());
    Eigen::VectorXd Yh(held);
    for (Eigen::Index i = 0; i < held; ++i) Xh.row(i) = X.row(idx[n_train + i]), Yh(i) = Y(idx[n_train + i]);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Xt.transpose() * Xt);
    if (es.info() != Eigen::Success) throw NumericalError("dataset_descent: eigendecomposition failed");
    const Eigen::MatrixXd& Q = es.eigenvectors();
    const Eigen::VectorXd s = (es.eigenvalues().cwiseMax(0.0).array() + lambda).matrix();
    require(dt * s.maxCoeff() < 2.0, "dataset_descent: dt exceeds the stability bound " + std::to_string(2.0 / s.maxCoeff()));
    const Eigen::VectorXd b = Q.transpose() * (Xt.transpose() * Yt);
    const Eigen::MatrixXd XhQ = Xh * Q, XtQ = Xt * Q;

    TrajectoryResult out;
    out.seed = seed;
    out.lambda = lambda;
    Eigen::VectorXd c = Eigen::VectorXd::Zero(b.size());
    long step = 0;
    for (double t : times) {
        const long target = long(std::llround(t / dt));
        require(target >= step, "dataset_descent: times must be increasing");
        // each mode follows c <- (1 - dt s) c + dt b, so jumps are closed form
        const long jump = target - step;
        for (Eigen::Index k = 0; k < c.size(); ++k) {
            const double a = 1.0 - dt * s(k);
            const double ak = std::pow(a, double(jump));
            c(k) = ak * c(k) + (s(k) > 0 ? (1.0 - ak) * b(k) / s(k) : double(jump) * dt * b(k));
        }
        step = target;
        out.times.push_back(double(step) * dt);
        out.gen_errors.push_back((XhQ * c - Yh).squaredNorm() / double(held));
        const double fit = (XtQ * c - Yt).squaredNorm();
        out.train_errors.push_back(fit / n_train);
        out.train_errors_regularized.push_back((fit + lambda * c.squaredNorm()) / n_train);
        out.beta_norms.push_back(c.norm());
    }
    return out;
}

// ---- curve files ------------------------------------------------------------

namespace detail {
inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot write '" + path + "'");
    f << text;
    if (!f) throw ValidationError("write failed for '" + path + "'");
}
inline std::string read_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot read '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}
inline std::string format_of(const std::string& path, const std::string& format) {
    if (!format.empty()) {
        require(format == "csv" || format == "json", "format must be csv or json, got '" + format + "'");
        return format;
    }
    return std::filesystem::path(path).extension() == ".json" ? "json" : "csv";
}
}  // namespace detail

inline std::string meta_path(const std::string& csv_path) { return csv_path + ".meta.json"; }

// CSV keeps the fixed column schema; everything else goes to a sidecar.
inline void write_curves(const CurveResult& r, const std::string& path, const std::string& format = "",
                         const nlohmann::json& config = {}) {
    nlohmann::json j = to_json(r);
    if (!config.is_null()) j["config"] = config;
    if (detail::format_of(path, format) == "json") {
        detail::write_text(path, j.dump(2) + "\n");
        return;
    }
    detail::write_text(path, curves_to_csv(r));
    for (const char* k : {"times", "gen_error", "train_error", "B0", "B1", "H0", "H1"}) j.erase(k);
    detail::write_text(meta_path(path), j.dump(2) + "\n");
}

inline CurveResult read_curves(const std::string& path, const std::string& format = "") {
    if (detail::format_of(path, format) == "json") {
        try {
            return curve_from_json(nlohmann::json::parse(detail::read_text(path)));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError("'" + path + "': " + e.what());
        }
    }
    CurveResult r = curves_from_csv(detail::read_text(path));
    if (std::filesystem::exists(meta_path(path))) {
        try {
            nlohmann::json j = nlohmann::json::parse(detail::read_text(meta_path(path)));
            r.lambda = j.value("lambda", 0.0), r.r0 = j.value("r0", 0.0), r.c0 = j.value("c0", 0.0);
            r.mean_u = j.value("mean_u", 0.0), r.max_imag = j.value("max_imag", 0.0);
            r.provider = j.value("provider", nlohmann::json());
            r.contour = j.value("contour", nlohmann::json());
            r.h1_variant = j.value("h1_variant", std::string("eta_f1_tilde"));
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError("'" + meta_path(path) + "': " + e.what());
        }
    }
    return r;
}

}  // namespace descent
