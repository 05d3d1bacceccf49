#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "json.hpp"
#include "spectra.hpp"

namespace descent {

// Coefficients of the linear equation f1~ = a + b f1~.
struct F1Parts {
    cplx a;
    cplx b;
};

// Anything that can feed the self-consistent machinery. `node(zeta)` returns a
// per-point cache so pair quantities on a contour grid can reuse work.
template <class P>
concept FunctionalProvider = requires(const P& p, cplx z) {
    { p.phi() } -> std::convertible_to<double>;
    { p.c0() } -> std::convertible_to<double>;
    { p.mean_u() } -> std::convertible_to<double>;
    { p.spectrum_bound() } -> std::convertible_to<double>;
    { p.zeta_rhs(z) } -> std::convertible_to<cplx>;
    { p.zeta_rhs_derivative(z) } -> std::convertible_to<cplx>;
    { p.f2_of(z) } -> std::convertible_to<cplx>;
    { p.f1_parts(p.node(z), p.node(z)) } -> std::convertible_to<F1Parts>;
    { p.describe() } -> std::convertible_to<nlohmann::json>;
};

// Divided difference of a holomorphic g between two points, falling back to
// the averaged derivative when the points nearly coincide.
inline cplx divided_difference(cplx x, cplx y, cplx gx, cplx gy, cplx dgx, cplx dgy) {
    if (std::abs(y - x) <= 1e-6 * (1.0 + std::abs(x))) return 0.5 * (dgx + dgy);
    return (gy - gx) / (y - x);
}

class AtomProvider {
public:
    struct Node {
        cplx zeta;
        std::vector<cplx> g;  // sqrt(w v) zeta / (phi u + zeta)
        std::vector<cplx> q;  // sqrt(w phi) u / (phi u + zeta)
    };

    explicit AtomProvider(AtomSpectrum s) : s_(std::move(s)) {
        validate(s_);
        c0_ = atoms_c0(s_);
        mean_u_ = atoms_mean_u(s_);
        for (const auto& a : s_.atoms) umax_ = std::max(umax_, a.u);
    }

    const AtomSpectrum& spectrum() const { return s_; }
    double phi() const { return s_.phi; }
    double c0() const { return c0_; }
    double mean_u() const { return mean_u_; }
    // Operator-norm bound for the limiting spectrum of X^T X.
    double spectrum_bound() const {
        double r = 1.0 + std::sqrt(s_.phi);
        return umax_ * r * r;
    }

    cplx zeta_rhs(cplx zeta) const {
        cplx s = 0.0;
        for (const auto& a : s_.atoms)
            if (a.u > 0) s += a.weight * a.u * zeta / (s_.phi * a.u + zeta);
        return s;
    }
    cplx zeta_rhs_derivative(cplx zeta) const {
        cplx s = 0.0;
        for (const auto& a : s_.atoms) {
            if (a.u == 0) continue;
            cplx den = s_.phi * a.u + zeta;
            s += a.weight * s_.phi * a.u * a.u / (den * den);
        }
        return s;
    }
    cplx f2_of(cplx zeta) const {
        cplx s = 0.0;
        for (const auto& a : s_.atoms) s += a.weight * a.v * zeta / (s_.phi * a.u + zeta);
        return c0_ - s;
    }

    Node node(cplx zeta) const {
        Node n{zeta, {}, {}};
        n.g.reserve(s_.atoms.size());
        n.q.reserve(s_.atoms.size());
        for (const auto& a : s_.atoms) {
            cplx den = s_.phi * a.u + zeta;
            n.g.push_back(std::sqrt(a.weight * a.v) * zeta / den);
            n.q.push_back(std::sqrt(a.weight * s_.phi) * a.u / den);
        }
        return n;
    }
    F1Parts f1_parts(const Node& x, const Node& y) const {
        // spelled out: std::complex operator* goes through __muldc3
        double ar = 0, ai = 0, br = 0, bi = 0;
        for (std::size_t k = 0; k < x.g.size(); ++k) {
            const double gxr = x.g[k].real(), gxi = x.g[k].imag(), gyr = y.g[k].real(), gyi = y.g[k].imag();
            const double qxr = x.q[k].real(), qxi = x.q[k].imag(), qyr = y.q[k].real(), qyi = y.q[k].imag();
            ar += gxr * gyr - gxi * gyi;
            ai += gxr * gyi + gxi * gyr;
            br += qxr * qyr - qxi * qyi;
            bi += qxr * qyi + qxi * qyr;
        }
        return {{ar, ai}, {br, bi}};
    }

    nlohmann::json describe() const {
        nlohmann::json atoms = nlohmann::json::array();
        for (const auto& a : s_.atoms) atoms.push_back({a.weight, a.u, a.v});
        return {{"provider", "atoms"}, {"phi", s_.phi}, {"atoms", atoms}};
    }

private:
    AtomSpectrum s_;
    double c0_ = 0, mean_u_ = 0, umax_ = 0;
};

template <FunctionalProvider P>
F1Parts f1_parts(const P& p, cplx zeta_x, cplx zeta_y) {
    return p.f1_parts(p.node(zeta_x), p.node(zeta_y));
}

// ---- zeta solver ----------------------------------------------------------

struct ZetaSolution {
    cplx z;
    cplx zeta;
    cplx eta;
    cplx f0;
    double residual = 0;
    int iterations = 0;
};

struct SolveOptions {
    double tol = 1e-12;
    int max_iter = 100000;
    double damping = 0.5;
    bool newton = true;  // Newton steps, with damped fixed point as fallback
};

namespace detail {
template <class P>
double zeta_residual(const P& p, cplx z, cplx zeta) {
    cplx F = zeta + z - p.zeta_rhs(zeta);
    double scale = std::max({std::abs(zeta), std::abs(z), 1e-300});
    return std::abs(F) / scale;
}
// Im(1/zeta) must share the sign of Im(z) off the real axis.
inline bool herglotz_ok(cplx z, cplx zeta) {
    if (z.imag() == 0) return true;
    return zeta.imag() * z.imag() <= 0;
}
}  // namespace detail

template <FunctionalProvider P>
ZetaSolution solve_zeta(const P& p, cplx z, std::optional<cplx> warm = std::nullopt, const SolveOptions& opt = {}) {
    require(finite(z), "solve_zeta: z must be finite");
    if (z == cplx(0.0)) throw NumericalError("solve_zeta: z = 0 lies on the spectrum support");
    const bool real_axis = z.imag() == 0.0;
    cplx zeta;
    if (warm && finite(*warm) && *warm != cplx(0.0))
        zeta = *warm;
    else if (!real_axis && std::abs(z.imag()) < std::max(p.spectrum_bound(), std::abs(z.real()))) {
        // cold start near the support: walk down from far above the axis
        const double sgn = z.imag() > 0 ? 1.0 : -1.0;
        std::optional<cplx> w;
        for (double y = 4 * std::max({p.spectrum_bound(), std::abs(z.real()), 1.0}); y > std::abs(z.imag()); y *= 0.25)
            w = solve_zeta(p, cplx(z.real(), sgn * y), w, opt).zeta;
        zeta = *w;
    }
    else if (real_axis && z.real() < 0)
        zeta = -z + std::abs(z) + 1.0;
    else
        zeta = -z;
    if (real_axis) zeta = zeta.real();
    if (!detail::herglotz_ok(z, zeta)) zeta = std::conj(zeta);

    double omega = opt.damping;
    double res = detail::zeta_residual(p, z, zeta);
    int it = 0;
    while (res > opt.tol && it < opt.max_iter) {
        ++it;
        cplx F = zeta + z - p.zeta_rhs(zeta);
        bool stepped = false;
        if (opt.newton) {
            cplx J = 1.0 - p.zeta_rhs_derivative(zeta);
            if (std::abs(J) > 0) {
                cplx cand = zeta - F / J;
                if (real_axis) cand = cand.real();
                if (finite(cand) && cand != cplx(0.0) && detail::herglotz_ok(z, cand)) {
                    double r = detail::zeta_residual(p, z, cand);
                    if (r < res) {
                        zeta = cand;
                        res = r;
                        stepped = true;
                    }
                }
            }
        }
        if (!stepped) {
            while (true) {
                cplx cand = (1.0 - omega) * zeta + omega * (-z + p.zeta_rhs(zeta));
                if (real_axis) cand = cand.real();
                double r = finite(cand) ? detail::zeta_residual(p, z, cand) : INFINITY;
                if (r <= res || omega < 1e-6) {
                    if (!finite(cand)) throw NumericalError("solve_zeta: iterate diverged", res);
                    zeta = cand;
                    res = r;
                    omega = std::min(opt.damping, 2.0 * omega);
                    break;
                }
                omega *= 0.5;
            }
        }
    }
    if (res > opt.tol)
        throw NumericalError("solve_zeta: no convergence at z = (" + std::to_string(z.real()) + ", " +
                                 std::to_string(z.imag()) + ") after " + std::to_string(it) + " iterations",
                             res);
    if (real_axis && z.real() < 0 && !(zeta.real() > 0))
        throw NumericalError("solve_zeta: real negative z produced a non-positive root", res);
    return {z, zeta, -z / zeta, -(1.0 + zeta / z), res, it};
}

// ---- functionals ------------------------------------------------------------

template <FunctionalProvider P>
cplx f2(const P& p, const ZetaSolution& s) {
    return p.f2_of(s.zeta);
}

inline cplx f1_tilde_from_parts(const F1Parts& parts) {
    cplx den = 1.0 - parts.b;
    if (std::abs(den) < 1e-13) throw NumericalError("f1_tilde: 1 - b vanishes (interpolation-threshold pole)");
    return parts.a / den;
}

template <FunctionalProvider P>
cplx f1_tilde(const P& p, cplx zeta_x, cplx zeta_y) {
    return f1_tilde_from_parts(f1_parts(p, zeta_x, zeta_y));
}

template <FunctionalProvider P>
cplx f1(const P& p, cplx zeta_x, cplx zeta_y) {
    return p.f2_of(zeta_x) + p.f2_of(zeta_y) + f1_tilde(p, zeta_x, zeta_y) - p.c0();
}

struct InfiniteTime {
    double gen;
    double train;
    double eta;
    double zeta;
};

template <FunctionalProvider P>
InfiniteTime infinite_time_errors(const P& p, double lambda, const SolveOptions& opt = {}) {
    require(lambda > 0, "infinite_time_errors: lambda must be positive (extrapolate with a small lambda)");
    ZetaSolution s = solve_zeta(p, cplx(-lambda), std::nullopt, opt);
    double gen = f1_tilde(p, s.zeta, s.zeta).real();
    double eta = s.eta.real();
    return {gen, eta * eta * gen, eta, s.zeta.real()};
}

struct HValues {
    cplx h1_tilde;
    cplx h2_x;
    cplx h2_y;
    cplx h0_x;
    cplx h1;
};

template <FunctionalProvider P>
HValues h_functions(const P& p, const ZetaSolution& x, const ZetaSolution& y) {
    cplx ft = f1_tilde(p, x.zeta, y.zeta);
    const double c0 = p.c0();
    HValues h;
    h.h1_tilde = x.eta * y.eta * ft;
    h.h2_x = x.eta * (c0 * x.f0 + p.f2_of(x.zeta));
    h.h2_y = y.eta * (c0 * y.f0 + p.f2_of(y.zeta));
    h.h0_x = x.eta * x.f0;
    h.h1 = h.h2_x + h.h2_y + h.h1_tilde - c0;
    return h;
}

// Solve at x + i eps by walking down from far above the axis, which keeps the
// iterate on the Herglotz branch.
template <FunctionalProvider P>
ZetaSolution solve_zeta_descending(const P& p, double x, double eps, const SolveOptions& opt = {}) {
    require(eps > 0, "eps must be positive");
    double top = std::max({std::abs(x), p.spectrum_bound(), eps, 1e-12});
    std::optional<cplx> warm;
    ZetaSolution s{};
    for (double y = top; y > eps; y *= 0.25) {
        s = solve_zeta(p, cplx(x, y), warm, opt);
        warm = s.zeta;
    }
    return solve_zeta(p, cplx(x, eps), warm, opt);
}

template <FunctionalProvider P>
double spectral_density_log(const P& p, double x, double eps = 1e-6) {
    require(x > 0, "spectral_density_log: x must be positive");
    ZetaSolution s = solve_zeta_descending(p, x, eps);
    return std::max(0.0, -s.eta.imag() / pi);
}

// Right edge of the limiting spectrum: scan the log-density downward from the
// operator-norm bound and stop at the first grid point carrying mass.
template <FunctionalProvider P>
double estimate_spectrum_max(const P& p, int points = 321, double threshold = 1e-8) {
    const double bound = p.spectrum_bound();
    if (!(bound > 0)) return 0.0;
    const double eps = 1e-10 * bound;
    const double ratio = std::pow(10.0, 8.0 / (points - 1));
    double x = bound;
    for (int k = 0; k < points; ++k, x /= ratio) {
        double rho;
        try {
            rho = spectral_density_log(p, x, eps);
        } catch (const NumericalError&) {
            return bound;
        }
        if (rho > threshold) return std::min(bound, x * ratio);
    }
    return bound * std::pow(10.0, -8.0);
}

}  // namespace descent
