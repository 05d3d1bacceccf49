#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <vector>

#include "core.hpp"

namespace descent {

struct Rule {
    std::vector<double> x, w;
};

// Gauss-Legendre on [-1, 1].
inline Rule gauss_legendre(int n) {
    require(n >= 1, "gauss_legendre: n must be positive");
    Rule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        dp = n * (x * p1 - p0) / (x * x - 1.0);
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        r.x[i] = -x;
        r.x[n - 1 - i] = x;
        r.w[i] = r.w[n - 1 - i] = w;
    }
    if (n % 2 == 1) r.x[n / 2] = 0.0;
    return r;
}

// Probabilists' Gauss-Hermite (weight e^{-x^2/2}/sqrt(2 pi)); weights sum to 1.
// Golub-Welsch on the Jacobi matrix of He_n.
inline Rule gauss_hermite_prob(int n) {
    require(n >= 1, "gauss_hermite_prob: n must be positive");
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd sub(std::max(n - 1, 0));
    for (int k = 1; k < n; ++k) sub(k - 1) = std::sqrt(double(k));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, sub, Eigen::ComputeEigenvectors);
    if (es.info() != Eigen::Success) throw NumericalError("gauss_hermite_prob: eigensolver failed");
    Rule r;
    r.x.resize(n);
    r.w.resize(n);
    for (int i = 0; i < n; ++i) {
        r.x[i] = es.eigenvalues()(i);
        double v = es.eigenvectors()(0, i);
        r.w[i] = v * v;
    }
    return r;
}

// Coefficients c_k of the Legendre expansion interpolating values at the
// n-point Gauss-Legendre nodes. Used to judge panel resolution.
class LegendreTail {
public:
    explicit LegendreTail(int n) : rule_(gauss_legendre(n)), n_(n), P_(n, n) {
        for (int j = 0; j < n; ++j) {
            double x = rule_.x[j];
            double p0 = 1.0, p1 = x;
            P_(0, j) = 1.0;
            if (n > 1) P_(1, j) = x;
            for (int k = 2; k < n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
                P_(k, j) = p2;
            }
        }
        for (int k = 0; k < n; ++k)
            for (int j = 0; j < n; ++j) P_(k, j) *= 0.5 * (2.0 * k + 1.0) * rule_.w[j];
    }

    const Rule& rule() const { return rule_; }
    int order() const { return n_; }

    // |c_{n-1}| + |c_{n-2}| of the interpolant through the given samples.
    template <class V>
    double tail(const V& values) const {
        cplx a = 0.0, b = 0.0;
        for (int j = 0; j < n_; ++j) {
            a += P_(n_ - 1, j) * values[j];
            if (n_ > 1) b += P_(n_ - 2, j) * values[j];
        }
        return std::abs(a) + std::abs(b);
    }

private:
    Rule rule_;
    int n_;
    Eigen::MatrixXd P_;
};

}  // namespace descent
