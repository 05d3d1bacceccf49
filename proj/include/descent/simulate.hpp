#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "core.hpp"
#include "json.hpp"
#include "spectra.hpp"

namespace descent {

// Gaussian covariate model at finite d: student X^ = Z A, target Y = Z B beta*.
struct FiniteInstance {
    Eigen::SparseMatrix<double> A;  // d x p_A
    Eigen::SparseMatrix<double> B;  // d x p_B
    Eigen::VectorXd beta_star;      // p_B
    Eigen::MatrixXd Z;              // n x d, entries of variance 1/d
    double lambda = 0;
    std::uint64_t seed = 0;
    nlohmann::json model;

    Eigen::Index d() const { return Z.cols(); }
    Eigen::Index n() const { return Z.rows(); }
    Eigen::Index p() const { return A.cols(); }
};

struct TrajectoryResult {
    std::vector<double> times, train_errors, train_errors_regularized, gen_errors, beta_norms;
    std::uint64_t seed = 0;
    double lambda = 0, r0 = 0;
};

namespace detail {

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, double sd, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd M(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) M(r, c) = sd * normal(rng);
    return M;
}

inline int rounded_size(double exact, const std::string& what) {
    const int k = int(std::lround(exact));
    require(k >= 1, what + " rounds to zero at this d");
    require(std::abs(k - exact) <= 0.05 * exact, what + " rounding moves the ratio by more than 5%");
    return k;
}

// Atom models: one z-coordinate per row, grouped by atom. A keeps only the
// coordinates with u > 0, B is diag(sqrt v).
inline void atom_blocks(const AtomSpectrum& sp, int d, FiniteInstance& inst) {
    std::vector<int> counts;
    for (const auto& a : sp.atoms) counts.push_back(rounded_size(a.weight * d, "an atom block"));
    int total = 0;
    for (int c : counts) total += c;
    counts.back() += d - total;
    require(counts.back() >= 1 && std::abs(counts.back() - sp.atoms.back().weight * d) <=
                                      0.05 * sp.atoms.back().weight * d + 1.0,
            "atom block sizes do not add up to d within 5%");
    std::vector<Eigen::Triplet<double>> ta, tb;
    int row = 0, col = 0;
    for (std::size_t k = 0; k < sp.atoms.size(); ++k)
        for (int c = 0; c < counts[k]; ++c, ++row) {
            if (sp.atoms[k].u > 0) ta.emplace_back(row, col++, std::sqrt(sp.atoms[k].u));
            if (sp.atoms[k].v > 0) tb.emplace_back(row, row, std::sqrt(sp.atoms[k].v));
        }
    require(col >= 1, "model has no student features");
    inst.A.resize(d, col);
    inst.A.setFromTriplets(ta.begin(), ta.end());
    inst.B.resize(d, d);
    inst.B.setFromTriplets(tb.begin(), tb.end());
}

// Random features: z = (X | Omega | xi) with sizes (p, N, q).
inline void rf_blocks(const RandomFeatures& m, int d, std::mt19937_64& rng, FiniteInstance& inst) {
    validate(m);
    const int p = rounded_size(m.psi * d, "p = psi d");
    const int N = rounded_size(m.psi0 * p, "N = psi0 p");
    const int q = d - p - N;
    require(q >= 1, "random features: noise block is empty at this d");
    Eigen::MatrixXd W = gaussian(p, N, 1.0 / std::sqrt(double(p)), rng);
    const double s = std::sqrt(double(d) / p);
    std::vector<Eigen::Triplet<double>> ta, tb;
    if (m.mu != 0)
        for (int c = 0; c < N; ++c)
            for (int r = 0; r < p; ++r) ta.emplace_back(r, c, m.mu * s * W(r, c));
    if (m.nu != 0)
        for (int c = 0; c < N; ++c) ta.emplace_back(p + c, c, m.nu * s);
    for (int r = 0; r < p; ++r) tb.emplace_back(r, r, m.r * s);
    const double sq = std::sqrt(double(d) / q);
    for (int r = 0; r < q; ++r) tb.emplace_back(p + N + r, p + r, m.sigma * sq);
    inst.A.resize(d, N);
    inst.A.setFromTriplets(ta.begin(), ta.end());
    inst.B.resize(d, p + q);
    inst.B.setFromTriplets(tb.begin(), tb.end());
}

}  // namespace detail

// beta* is a fresh standard normal draw (averaged prior), so v-atoms carry the
// target energy through B.
inline FiniteInstance sample_instance(const ModelParams& model, int d, double lambda, std::uint64_t seed) {
    require(d >= 2, "sample_instance: d must be at least 2");
    require(lambda >= 0, "sample_instance: lambda must be nonnegative");
    FiniteInstance inst;
    inst.lambda = lambda;
    inst.seed = seed;
    inst.model = to_json(model);
    std::mt19937_64 rng(seed);
    double phi;
    if (const auto* rf = std::get_if<RandomFeatures>(&model)) {
        detail::rf_blocks(*rf, d, rng, inst);
        phi = rf->phi0 * rf->psi;
    } else {
        AtomSpectrum sp = atom_spectrum(model);
        detail::atom_blocks(sp, d, inst);
        phi = sp.phi;
    }
    const int n = detail::rounded_size(phi * d, "n = phi d");
    inst.beta_star = detail::gaussian(inst.B.cols(), 1, 1.0, rng).col(0);
    inst.Z = detail::gaussian(n, d, 1.0 / std::sqrt(double(d)), rng);
    return inst;
}

// Eigendecomposition of X^T X shared by every time point.
struct FlowBasis {
    Eigen::VectorXd eig;     // eigenvalues of X^T X, clamped at 0
    Eigen::MatrixXd AQ;      // A Q
    Eigen::VectorXd target;  // B beta*
    Eigen::VectorXd b;       // Q^T X^T Y
    double yy = 0;           // |Y|^2
    Eigen::MatrixXd Q;
};

inline FlowBasis flow_basis(const FiniteInstance& inst) {
    Eigen::MatrixXd X = inst.Z * inst.A;
    Eigen::VectorXd target = inst.B * inst.beta_star;
    Eigen::VectorXd Y = inst.Z * target;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X.transpose() * X);
    if (es.info() != Eigen::Success) throw NumericalError("flow_basis: eigendecomposition failed");
    FlowBasis f;
    f.Q = es.eigenvectors();
    f.eig = es.eigenvalues().cwiseMax(0.0);
    f.AQ = inst.A * f.Q;
    f.target = std::move(target);
    f.b = f.Q.transpose() * (X.transpose() * Y);
    f.yy = Y.squaredNorm();
    return f;
}

namespace detail {
inline Eigen::VectorXd draw_beta0(Eigen::Index p, double r0, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return gaussian(p, 1, r0, rng).col(0);
}

// Errors for a coefficient vector in the eigenbasis.
inline void record(const FiniteInstance& inst, const FlowBasis& f, double t, const Eigen::VectorXd& c,
                   TrajectoryResult& out) {
    const double d = double(inst.d()), n = double(inst.n());
    const double gen = (f.AQ * c - f.target).squaredNorm() / d;
    const double fit = c.dot(f.eig.cwiseProduct(c)) - 2.0 * c.dot(f.b) + f.yy;
    const double norm2 = c.squaredNorm();
    out.times.push_back(t);
    out.gen_errors.push_back(gen);
    out.train_errors.push_back(std::max(fit, 0.0) / n);
    out.train_errors_regularized.push_back((std::max(fit, 0.0) + inst.lambda * norm2) / n);
    out.beta_norms.push_back(std::sqrt(norm2));
}
}  // namespace detail

// beta_t = Q e^{-t(L + lambda)} Q^T beta0 + Q diag((1 - e^{-t(l + lambda)}) / (l + lambda)) Q^T X^T Y
inline TrajectoryResult exact_flow_errors(const FiniteInstance& inst, const FlowBasis& f, const std::vector<double>& times,
                                          double r0, std::uint64_t seed_beta0) {
    require(r0 >= 0, "exact_flow_errors: r0 must be nonnegative");
    TrajectoryResult out;
    out.seed = inst.seed;
    out.lambda = inst.lambda;
    out.r0 = r0;
    const Eigen::VectorXd c0 = f.Q.transpose() * detail::draw_beta0(inst.p(), r0, seed_beta0);
    Eigen::VectorXd c(c0.size());
    for (double t : times) {
        require(t >= 0 && std::isfinite(t), "exact_flow_errors: times must be finite and nonnegative");
        for (Eigen::Index k = 0; k < c.size(); ++k) {
            const double s = f.eig(k) + inst.lambda;
            const double gain = s > 0 ? -std::expm1(-t * s) / s : t;
            c(k) = std::exp(-t * s) * c0(k) + gain * f.b(k);
        }
        detail::record(inst, f, t, c, out);
    }
    return out;
}

inline TrajectoryResult exact_flow_errors(const FiniteInstance& inst, const std::vector<double>& times, double r0,
                                          std::uint64_t seed_beta0) {
    return exact_flow_errors(inst, flow_basis(inst), times, r0, seed_beta0);
}

// Errors of the Tikhonov estimator (X^T X + lambda)^+ X^T Y.
inline TrajectoryResult tikhonov_errors(const FiniteInstance& inst, const FlowBasis& f) {
    TrajectoryResult out;
    out.seed = inst.seed;
    out.lambda = inst.lambda;
    Eigen::VectorXd c(f.b.size());
    const double cut = 1e-12 * std::max(1.0, f.eig.maxCoeff());
    for (Eigen::Index k = 0; k < c.size(); ++k) {
        const double s = f.eig(k) + inst.lambda;
        c(k) = s > cut ? f.b(k) / s : 0.0;
    }
    detail::record(inst, f, INFINITY, c, out);
    return out;
}

// Log-spaced step indices in [0, steps], always including both ends.
inline std::vector<long> log_steps(long steps, int points) {
    std::vector<long> out{0};
    if (steps <= 0) return out;
    for (int k = 0; k < points; ++k) {
        const double e = double(k) / std::max(1, points - 1);
        out.push_back(std::max(1L, long(std::llround(std::pow(double(steps), e)))));
    }
    out.push_back(steps);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// Explicit Euler on d beta / dt = -(X^T X + lambda) beta + X^T Y, flow time t = k dt.
inline TrajectoryResult gradient_descent_errors(const FiniteInstance& inst, double dt, long steps, double r0,
                                                std::uint64_t seed_beta0, int record_points = 40) {
    require(dt > 0 && steps >= 0, "gradient_descent_errors: need dt > 0 and steps >= 0");
    const FlowBasis f = flow_basis(inst);
    const double top = f.eig.maxCoeff() + inst.lambda;
    require(dt * top < 2.0, "gradient_descent_errors: dt = " + std::to_string(dt) +
                                " exceeds the stability bound 2 / lambda_max = " + std::to_string(2.0 / top));
    // iterate in the eigenbasis: each mode is an independent scalar recursion
    TrajectoryResult out;
    out.seed = inst.seed;
    out.lambda = inst.lambda;
    out.r0 = r0;
    Eigen::VectorXd c = f.Q.transpose() * detail::draw_beta0(inst.p(), r0, seed_beta0);
    const Eigen::VectorXd s = (f.eig.array() + inst.lambda).matrix();
    const auto marks = log_steps(steps, record_points);
    std::size_t next = 0;
    double first = -1;
    for (long k = 0; k <= steps; ++k) {
        if (next < marks.size() && marks[next] == k) {
            detail::record(inst, f, double(k) * dt, c, out);
            const double e = out.train_errors_regularized.back();
            if (first < 0) first = std::max(e, 1e-300);
            if (!(e <= 1e6 * first)) throw NumericalError("gradient_descent_errors: diverged at step " + std::to_string(k), e);
            ++next;
        }
        if (k == steps) break;
        c.array() += dt * (f.b.array() - s.array() * c.array());
    }
    return out;
}

struct IdentityReport {
    double trace_zzv;      // (1/d) tr(Z^T Z V*), V* = B B^T
    double yy_over_d;      // (1/d) |Y|^2
    double phi_c0;         // n/d * (1/d) tr(B B^T)
    cplx resolvent_trace;  // (1/n) tr (X^ X^T - z)^{-1}
    cplx z;
};

inline IdentityReport empirical_identities(const FiniteInstance& inst, cplx z = -1.0) {
    const double d = double(inst.d()), n = double(inst.n());
    IdentityReport rep;
    rep.z = z;
    const Eigen::MatrixXd ZB = inst.Z * inst.B;
    rep.trace_zzv = ZB.squaredNorm() / d;
    rep.yy_over_d = (ZB * inst.beta_star).squaredNorm() / d;
    rep.phi_c0 = (n / d) * inst.B.squaredNorm() / d;
    // n-side trace from the p-side spectrum; the n - p extra zero modes give -1/z each
    const Eigen::MatrixXd X = inst.Z * inst.A;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X.transpose() * X, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericalError("empirical_identities: eigendecomposition failed");
    cplx acc = 0.0;
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) acc += 1.0 / (std::max(es.eigenvalues()(k), 0.0) - z);
    acc += double(inst.n() - inst.p()) * (-1.0 / z);
    rep.resolvent_trace = acc / n;
    return rep;
}

// Pointwise mean and sample standard deviation over seeds.
struct TrajectoryAggregate {
    std::vector<double> times, gen_mean, gen_std, train_mean, train_std;
};

inline TrajectoryAggregate aggregate(const std::vector<TrajectoryResult>& runs) {
    require(!runs.empty(), "aggregate: no runs");
    TrajectoryAggregate a;
    a.times = runs.front().times;
    const std::size_t T = a.times.size();
    for (const auto& r : runs) require(r.times.size() == T, "aggregate: runs use different time grids");
    auto stats = [&](auto field, std::vector<double>& mean, std::vector<double>& sd) {
        mean.assign(T, 0.0);
        sd.assign(T, 0.0);
        for (std::size_t k = 0; k < T; ++k) {
            double m = 0, v = 0;
            for (const auto& r : runs) m += (r.*field)[k];
            m /= double(runs.size());
            for (const auto& r : runs) v += ((r.*field)[k] - m) * ((r.*field)[k] - m);
            mean[k] = m;
            sd[k] = runs.size() > 1 ? std::sqrt(v / double(runs.size() - 1)) : 0.0;
        }
    };
    stats(&TrajectoryResult::gen_errors, a.gen_mean, a.gen_std);
    stats(&TrajectoryResult::train_errors, a.train_mean, a.train_std);
    return a;
}

inline std::string trajectory_csv_header() {
    return "t,gen_error,train_error,B0,B1,H0,H1,seed,train_error_regularized,beta_norm";
}

inline std::string trajectory_to_csv(const TrajectoryResult& r) {
    std::string out = trajectory_csv_header() + "\n";
    char buf[512];
    for (std::size_t k = 0; k < r.times.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,nan,nan,nan,nan,%llu,%.17g,%.17g\n", r.times[k],
                      r.gen_errors[k], r.train_errors[k], (unsigned long long)r.seed, r.train_errors_regularized[k],
                      r.beta_norms[k]);
        out += buf;
    }
    return out;
}

inline nlohmann::json to_json(const TrajectoryResult& r) {
    return {{"times", r.times},
            {"gen_error", r.gen_errors},
            {"train_error", r.train_errors},
            {"train_error_regularized", r.train_errors_regularized},
            {"beta_norm", r.beta_norms},
            {"seed", r.seed},
            {"lambda", r.lambda},
            {"r0", r.r0}};
}

inline nlohmann::json to_json(const TrajectoryAggregate& a) {
    return {{"times", a.times},
            {"gen_mean", a.gen_mean},
            {"gen_std", a.gen_std},
            {"train_mean", a.train_mean},
            {"train_std", a.train_std}};
}

}  // namespace descent
