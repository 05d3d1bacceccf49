#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "core.hpp"
#include "selfconsistent.hpp"
#include "spectra.hpp"

namespace descent {

using RFParams = RandomFeatures;

// Random features as a functional provider. The inner variable gamma solves
//   mu^2 psi0 w gamma^2 + (mu^2 - mu^2 psi0 + w) gamma - 1 = 0,  w = zeta/phi0 + nu^2,
// on the branch that is a Stieltjes transform evaluated at -w.
class RFProvider {
public:
    struct Node {
        cplx zeta, gamma, delta, rhs, drhs;
    };

    explicit RFProvider(RFParams p) : p_(p) {
        validate(p_);
        mu2_ = p_.mu * p_.mu;
        nu2_ = p_.nu * p_.nu;
    }

    const RFParams& params() const { return p_; }
    double phi() const { return p_.phi0 * p_.psi; }
    double c0() const { return p_.r * p_.r + p_.sigma * p_.sigma; }
    double mean_u() const { return p_.psi0 * (mu2_ + nu2_); }
    double spectrum_bound() const {
        double a = std::abs(p_.mu) * (1.0 + std::sqrt(p_.psi0)) + std::abs(p_.nu);
        double b = 1.0 + std::sqrt(phi());
        return a * a * b * b / p_.psi;
    }

    cplx gamma_of(cplx zeta) const {
        cplx w = zeta / p_.phi0 + nu2_;
        if (mu2_ == 0.0) return 1.0 / w;
        const double tiny = 1e-13 * (1.0 + std::abs(w));
        if (std::abs(w.imag()) > tiny) return herglotz_root(w);
        if (w.real() > 0) {
            auto [g1, g2] = roots(w.real());
            return g1.real() > 0 ? g1 : g2;
        }
        // real w <= 0: continue from just off the axis
        cplx shifted = w - cplx(0.0, 1e-7 * (1.0 + std::abs(w)));
        cplx ref = herglotz_root(shifted);
        auto [g1, g2] = roots(w.real());
        return std::abs(g1 - ref) <= std::abs(g2 - ref) ? g1 : g2;
    }
    cplx delta_of(cplx gamma) const { return 1.0 / (1.0 + gamma * mu2_ * p_.psi0); }

    cplx zeta_rhs(cplx zeta) const { return rhs(zeta, gamma_of(zeta)); }
    cplx zeta_rhs_derivative(cplx zeta) const { return drhs(zeta, gamma_of(zeta)); }
    cplx f2_of(cplx zeta) const { return p_.r * p_.r * (1.0 - delta_of(gamma_of(zeta))); }

    Node node(cplx zeta) const {
        cplx g = gamma_of(zeta);
        return {zeta, g, delta_of(g), rhs(zeta, g), drhs(zeta, g)};
    }
    cplx kappa1(const Node& x, const Node& y) const {
        cplx dd = x.delta * y.delta, gg = x.gamma * y.gamma;
        cplx den = 1.0 - mu2_ * mu2_ * p_.psi0 * dd * gg;
        if (std::abs(den) < 1e-13) throw NumericalError("random features: kappa1 denominator vanishes");
        return dd * (1.0 + nu2_ * mu2_ * p_.psi0 * gg) / den;
    }
    F1Parts f1_parts(const Node& x, const Node& y) const {
        cplx a = p_.r * p_.r * kappa1(x, y) + p_.sigma * p_.sigma;
        cplx b = divided_difference(x.zeta, y.zeta, x.rhs, y.rhs, x.drhs, y.drhs);
        return {a, b};
    }

    nlohmann::json describe() const {
        return {{"provider", "random_features"}, {"mu", p_.mu},   {"nu", p_.nu},     {"r", p_.r},
                {"sigma", p_.sigma},             {"phi0", p_.phi0}, {"psi0", p_.psi0}, {"psi", p_.psi}};
    }

private:
    cplx rhs(cplx zeta, cplx g) const { return (p_.psi0 / p_.phi0) * zeta * (1.0 - zeta * g / p_.phi0); }
    cplx drhs(cplx zeta, cplx g) const {
        cplx w = zeta / p_.phi0 + nu2_;
        cplx A = mu2_ * p_.psi0 * w, B = mu2_ * (1.0 - p_.psi0) + w;
        cplx dg = -(mu2_ * p_.psi0 * g * g + g) / (2.0 * A * g + B) / p_.phi0;
        return (p_.psi0 / p_.phi0) * (1.0 - 2.0 * zeta * g / p_.phi0 - zeta * zeta * dg / p_.phi0);
    }
    std::pair<cplx, cplx> roots(cplx w) const {
        cplx A = mu2_ * p_.psi0 * w, B = mu2_ * (1.0 - p_.psi0) + w;
        cplx disc = std::sqrt(B * B + 4.0 * A);
        cplx q = std::abs(B + disc) >= std::abs(B - disc) ? -0.5 * (B + disc) : -0.5 * (B - disc);
        // q/A is the large root when A is small; -1/q is always finite
        cplx r2 = -1.0 / q;
        cplx r1 = std::abs(A) > 0 ? q / A : cplx(INFINITY, 0.0);
        return {r1, r2};
    }
    // Root with Im(gamma) Im(-w) > 0.
    cplx herglotz_root(cplx w) const {
        auto [g1, g2] = roots(w);
        double s = -w.imag() > 0 ? 1.0 : -1.0;
        if (!finite(g1)) return g2;
        return s * g1.imag() >= s * g2.imag() ? g1 : g2;
    }

    RFParams p_;
    double mu2_ = 0, nu2_ = 0;
};

struct RFState {
    cplx z, zeta, gamma_z, delta_z;
    double residual = 0;
};

// Joint damped iteration delta <- gamma, gamma <- (delta, zeta), zeta <- gamma,
// followed by a Newton polish of zeta on the reduced scalar equation.
inline RFState rf_solve_state(const RFParams& params, cplx z, std::optional<RFState> warm = std::nullopt,
                              int joint_iterations = 2000) {
    RFProvider prov(params);
    const double mu2 = params.mu * params.mu, nu2 = params.nu * params.nu;
    const double psi0 = params.psi0, phi0 = params.phi0;
    cplx zeta, gamma, delta;
    if (warm) {
        zeta = warm->zeta, gamma = warm->gamma_z, delta = warm->delta_z;
    } else {
        zeta = (z.imag() == 0 && z.real() < 0) ? -z + std::abs(z) + 1.0 : -z;
        gamma = 1.0 / (mu2 + zeta / phi0 + nu2);
        delta = 1.0 / (1.0 + gamma * mu2 * psi0);
    }
    const double omega = 0.5;
    for (int it = 0; it < joint_iterations; ++it) {
        cplx dn = 1.0 / (1.0 + gamma * mu2 * psi0);
        cplx gn = 1.0 / (mu2 * dn + zeta / phi0 + nu2);
        cplx zn = -z + (psi0 / phi0) * zeta * (1.0 - zeta * gn / phi0);
        if (!finite(dn) || !finite(gn) || !finite(zn)) break;
        double res = std::abs(zn - zeta) / std::max(std::abs(zeta), 1e-300) + std::abs(gn - gamma) / std::abs(gn) +
                     std::abs(dn - delta) / std::abs(dn);
        delta = (1.0 - omega) * delta + omega * dn;
        gamma = (1.0 - omega) * gamma + omega * gn;
        zeta = (1.0 - omega) * zeta + omega * zn;
        if (res < 1e-9) break;
    }
    std::optional<cplx> start;
    if (finite(zeta) && zeta != cplx(0.0) && detail::herglotz_ok(z, zeta) && !(z.imag() == 0 && zeta.real() <= 0))
        start = z.imag() == 0 ? cplx(zeta.real()) : zeta;
    ZetaSolution s = solve_zeta(prov, z, start);
    RFState st;
    st.z = z;
    st.zeta = s.zeta;
    st.gamma_z = prov.gamma_of(s.zeta);
    st.delta_z = prov.delta_of(st.gamma_z);
    cplx rel = (st.gamma_z / phi0) * st.zeta - 1.0 + (phi0 / psi0) * (1.0 + z / st.zeta);
    st.residual = std::max(s.residual, std::abs(rel));
    return st;
}

struct RFFunctionals {
    cplx f1_tilde;
    cplx f2_x;
    double c0;
};

inline RFFunctionals rf_functionals(const RFParams& params, const RFState& x, const RFState& y) {
    RFProvider prov(params);
    cplx kappa2;
    const double h = 1e-6 * (1.0 + std::abs(x.z));
    if (std::abs(y.z - x.z) > h) {
        kappa2 = -(y.zeta - x.zeta) / (y.z - x.z);
    } else {
        // step along the real axis when off it, otherwise across it (conjugate pair)
        const cplx dir = std::abs(x.z.imag()) > 2.0 * h ? cplx(1.0) : cplx(0.0, 1.0);
        auto at = [&](cplx zz) {
            std::optional<cplx> w;
            if (zz.imag() * x.z.imag() >= 0) w = x.zeta;
            return solve_zeta(prov, zz, w).zeta;
        };
        kappa2 = -(at(x.z + h * dir) - at(x.z - h * dir)) / (2.0 * h * dir);
    }
    RFProvider::Node nx{x.zeta, x.gamma_z, x.delta_z, 0.0, 0.0};
    RFProvider::Node ny{y.zeta, y.gamma_z, y.delta_z, 0.0, 0.0};
    const double r2 = params.r * params.r, s2 = params.sigma * params.sigma;
    cplx ft = kappa2 * (r2 * prov.kappa1(nx, ny) + s2);
    return {ft, r2 + s2 - (r2 * x.delta_z + s2), r2 + s2};
}

}  // namespace descent
