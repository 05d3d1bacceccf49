#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "core.hpp"
#include "json.hpp"
#include "quadrature.hpp"

namespace descent {

// Joint eigenvalue law of commuting (U, V*): P(u, v*) = weight.
struct Atom {
    double weight;
    double u;
    double v;
};

struct AtomSpectrum {
    std::vector<Atom> atoms;
    double phi = 1.0;  // n / d
};

inline void validate(const AtomSpectrum& s) {
    require(!s.atoms.empty(), "spectrum has no atoms");
    require(s.phi > 0 && std::isfinite(s.phi), "phi must be positive");
    double total = 0.0;
    for (const auto& a : s.atoms) {
        require(a.weight > 0 && std::isfinite(a.weight), "atom weights must be positive");
        require(a.u >= 0 && std::isfinite(a.u), "atom u must be nonnegative");
        require(a.v >= 0 && std::isfinite(a.v), "atom v* must be nonnegative");
        total += a.weight;
    }
    require(std::abs(total - 1.0) <= 1e-12, "atom weights must sum to 1");
}

// Merges atoms with coinciding (u, v*) and validates.
inline AtomSpectrum make_spectrum(std::vector<Atom> atoms, double phi) {
    std::vector<Atom> merged;
    for (const auto& a : atoms) {
        auto same = [&](const Atom& b) {
            return std::abs(a.u - b.u) <= 1e-14 * std::max(1.0, std::abs(a.u)) &&
                   std::abs(a.v - b.v) <= 1e-14 * std::max(1.0, std::abs(a.v));
        };
        auto it = std::find_if(merged.begin(), merged.end(), same);
        if (it == merged.end())
            merged.push_back(a);
        else
            it->weight += a.weight;
    }
    AtomSpectrum s{std::move(merged), phi};
    validate(s);
    return s;
}

inline double atoms_c0(const AtomSpectrum& s) {
    double c = 0.0;
    for (const auto& a : s.atoms) c += a.weight * a.v;
    return c;
}

inline double atoms_mean_u(const AtomSpectrum& s) {
    double m = 0.0;
    for (const auto& a : s.atoms) m += a.weight * a.u;
    return m;
}

inline AtomSpectrum ridgeless_spectrum(double r, double sigma, double psi, double phi) {
    require(psi > 0 && psi < 1, "ridgeless: psi must lie in (0, 1)");
    require(phi > 0, "ridgeless: phi must be positive");
    return make_spectrum({{psi, 1.0 / psi, r * r / psi}, {1.0 - psi, 0.0, sigma * sigma / (1.0 - psi)}}, phi);
}

inline AtomSpectrum mismatched_spectrum(double r, double sigma, double gamma, double psi, double phi) {
    require(gamma > 0 && gamma <= 1, "mismatched: gamma must lie in (0, 1]");
    require(psi > 0 && psi < 1, "mismatched: psi must lie in (0, 1)");
    require(phi > 0, "mismatched: phi must be positive");
    std::vector<Atom> atoms{{gamma * psi, 1.0 / (gamma * psi), r * r / psi}};
    if (gamma < 1) atoms.push_back({(1.0 - gamma) * psi, 0.0, r * r / psi});
    atoms.push_back({1.0 - psi, 0.0, sigma * sigma / (1.0 - psi)});
    return make_spectrum(std::move(atoms), phi);
}

inline AtomSpectrum nonisotropic_spectrum(int p_levels, double alpha, double phi) {
    require(p_levels >= 1, "nonisotropic: p_levels must be >= 1");
    require(alpha > 1, "nonisotropic: alpha must exceed 1");
    require(phi > 0, "nonisotropic: phi must be positive");
    std::vector<Atom> atoms;
    for (int i = 0; i < p_levels; ++i) atoms.push_back({1.0 / p_levels, std::pow(alpha, -double(i)), 1.0});
    return make_spectrum(std::move(atoms), phi);
}

// Large-alpha limit of the infinite-time test error of the non-isotropic model.
inline double nonisotropic_asymptote(int p_levels, double phi) {
    require(p_levels >= 1, "nonisotropic_asymptote: p_levels must be >= 1");
    require(phi > 0 && phi < 1, "nonisotropic_asymptote: phi must lie in (0, 1)");
    const double p = p_levels;
    double k = std::floor(phi * p);
    require(std::abs(phi * p - std::round(phi * p)) > 1e-12, "nonisotropic_asymptote: phi sits on a pole k/p");
    double lo = k / p, hi = (k + 1) / p;
    return phi * (1.0 - phi) / (p * (phi - lo) * (hi - phi)) - phi;
}

inline AtomSpectrum kernel_spectrum(const std::vector<double>& omega, const std::vector<double>& theta0, double phi) {
    require(!omega.empty(), "kernel: omega is empty");
    require(omega.size() == theta0.size(), "kernel: omega and theta0 lengths differ");
    require(phi > 0, "kernel: phi must be positive");
    const double w = 1.0 / double(omega.size());
    std::vector<Atom> atoms;
    atoms.reserve(omega.size());
    for (std::size_t i = 0; i < omega.size(); ++i) {
        require(omega[i] >= 0, "kernel: omega must be nonnegative");
        atoms.push_back({w, omega[i], theta0[i] * theta0[i] * omega[i]});
    }
    // weights of 1/d summed d times may drift from 1 by a few ulps
    double total = 0.0;
    for (const auto& a : atoms) total += a.weight;
    for (auto& a : atoms) a.weight /= total;
    return make_spectrum(std::move(atoms), phi);
}

struct HermiteEquivalents {
    double mu;
    double nu_sq;
    double he0;      // <f, He_0>; nonzero means the activation is not centered
    double norm_sq;  // <f, f>
    bool centered;
};

// Composite Gauss-Legendre against the Gaussian density on [-12, 12]. Gauss-Hermite
// converges too slowly on kinked activations such as ReLU.
inline HermiteEquivalents hermite_equivalents(const std::function<double(double)>& f, int order = 200) {
    require(order >= 32, "hermite_equivalents: order must be >= 32");
    const Rule gl = gauss_legendre(16);
    const int panels = 8 * order;
    const double L = 12.0, h = 2 * L / panels;
    double m0 = 0, m1 = 0, m2 = 0;
    for (int k = 0; k < panels; ++k) {
        const double mid = -L + (k + 0.5) * h;
        for (std::size_t i = 0; i < gl.x.size(); ++i) {
            const double x = mid + 0.5 * h * gl.x[i];
            const double w = 0.5 * h * gl.w[i] * std::exp(-0.5 * x * x) / std::sqrt(2 * pi);
            const double y = f(x);
            m0 += w * y, m1 += w * y * x, m2 += w * y * y;
        }
    }
    return {m1, m2 - m1 * m1, m0, m2, std::abs(m0) <= 1e-8};
}

// ---- model parameter sets -------------------------------------------------

struct Ridgeless {
    double r = 1, sigma = 0, psi = 0.5, phi = 1;
};
struct Mismatched {
    double r = 1, sigma = 0, gamma = 1, psi = 0.5, phi = 1;
};
struct Nonisotropic {
    int p_levels = 1;
    double alpha = 2, phi = 1;
};
struct Kernel {
    std::vector<double> omega, theta0;
    double phi = 1;
};
struct RandomFeatures {
    double mu = 1, nu = 0, r = 1, sigma = 0, phi0 = 1, psi0 = 1, psi = 0.25;
};

using ModelParams = std::variant<Ridgeless, Mismatched, Nonisotropic, Kernel, RandomFeatures>;

inline void validate(const RandomFeatures& p) {
    require(std::isfinite(p.mu) && std::isfinite(p.nu), "random_features: mu and nu must be finite");
    require(p.phi0 > 0 && p.psi0 > 0, "random_features: phi0 and psi0 must be positive");
    require(p.psi > 0 && (1.0 + p.psi0) * p.psi < 1.0, "random_features: need (1 + psi0) * psi < 1");
}

inline AtomSpectrum atom_spectrum(const ModelParams& m) {
    return std::visit(
        [](const auto& p) -> AtomSpectrum {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Ridgeless>)
                return ridgeless_spectrum(p.r, p.sigma, p.psi, p.phi);
            else if constexpr (std::is_same_v<T, Mismatched>)
                return mismatched_spectrum(p.r, p.sigma, p.gamma, p.psi, p.phi);
            else if constexpr (std::is_same_v<T, Nonisotropic>)
                return nonisotropic_spectrum(p.p_levels, p.alpha, p.phi);
            else if constexpr (std::is_same_v<T, Kernel>)
                return kernel_spectrum(p.omega, p.theta0, p.phi);
            else
                throw ValidationError("random_features has no commuting atom representation");
        },
        m);
}

inline std::string model_name(const ModelParams& m) {
    static const char* names[] = {"ridgeless", "mismatched", "nonisotropic", "kernel", "random_features"};
    return names[m.index()];
}

// Sample-ratio knob used by sweeps: n/d for atom models, phi0 = n/p for random features.
inline ModelParams with_phi(ModelParams m, double phi) {
    std::visit(
        [phi](auto& p) {
            if constexpr (std::is_same_v<std::decay_t<decltype(p)>, RandomFeatures>)
                p.phi0 = phi;
            else
                p.phi = phi;
        },
        m);
    return m;
}

inline nlohmann::json to_json(const ModelParams& m) {
    nlohmann::json j;
    j["model"] = model_name(m);
    std::visit(
        [&j](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, Ridgeless>) {
                j["r"] = p.r, j["sigma"] = p.sigma, j["psi"] = p.psi, j["phi"] = p.phi;
            } else if constexpr (std::is_same_v<T, Mismatched>) {
                j["r"] = p.r, j["sigma"] = p.sigma, j["gamma"] = p.gamma, j["psi"] = p.psi, j["phi"] = p.phi;
            } else if constexpr (std::is_same_v<T, Nonisotropic>) {
                j["p_levels"] = p.p_levels, j["alpha"] = p.alpha, j["phi"] = p.phi;
            } else if constexpr (std::is_same_v<T, Kernel>) {
                j["omega"] = p.omega, j["theta0"] = p.theta0, j["phi"] = p.phi;
            } else {
                j["mu"] = p.mu, j["nu"] = p.nu, j["r"] = p.r, j["sigma"] = p.sigma;
                j["phi0"] = p.phi0, j["psi0"] = p.psi0, j["psi"] = p.psi;
            }
        },
        m);
    return j;
}

namespace detail {
inline double num(const nlohmann::json& j, const char* key, double fallback) {
    if (!j.contains(key)) return fallback;
    require(j.at(key).is_number(), std::string("model field '") + key + "' must be a number");
    return j.at(key).get<double>();
}
inline double need(const nlohmann::json& j, const char* key) {
    require(j.contains(key), std::string("model field '") + key + "' is required");
    return num(j, key, 0.0);
}
// phi (n/d) directly, or phi0 (n/p) converted through psi.
inline double sample_ratio(const nlohmann::json& j, double psi) {
    require(!(j.contains("phi") && j.contains("phi0")), "give either phi (n/d) or phi0 (n/p), not both");
    if (j.contains("phi0")) return need(j, "phi0") * psi;
    return need(j, "phi");
}
inline std::vector<double> vec(const nlohmann::json& j, const char* key) {
    require(j.contains(key) && j.at(key).is_array(), std::string("model field '") + key + "' must be an array");
    return j.at(key).get<std::vector<double>>();
}
}  // namespace detail

// Accepts {"model": "...", ...}; see README for the per-variant fields.
inline ModelParams model_from_json(const nlohmann::json& j) {
    require(j.is_object() && j.contains("model") && j.at("model").is_string(), "model spec needs a string 'model' field");
    const std::string kind = j.at("model").get<std::string>();
    using detail::need;
    using detail::num;
    if (kind == "ridgeless") {
        Ridgeless p;
        p.r = num(j, "r", 1.0), p.sigma = num(j, "sigma", 0.0), p.psi = need(j, "psi");
        p.phi = detail::sample_ratio(j, p.psi);
        ridgeless_spectrum(p.r, p.sigma, p.psi, p.phi);
        return p;
    }
    if (kind == "mismatched") {
        Mismatched p;
        p.r = num(j, "r", 1.0), p.sigma = num(j, "sigma", 0.0), p.gamma = need(j, "gamma"), p.psi = need(j, "psi");
        p.phi = detail::sample_ratio(j, p.psi);
        mismatched_spectrum(p.r, p.sigma, p.gamma, p.psi, p.phi);
        return p;
    }
    if (kind == "nonisotropic") {
        Nonisotropic p;
        double levels = j.contains("p_levels") ? need(j, "p_levels") : need(j, "p");
        require(levels >= 1 && levels == std::floor(levels), "nonisotropic: p_levels must be a positive integer");
        p.p_levels = int(levels), p.alpha = need(j, "alpha"), p.phi = need(j, "phi");
        nonisotropic_spectrum(p.p_levels, p.alpha, p.phi);
        return p;
    }
    if (kind == "kernel") {
        Kernel p;
        p.omega = detail::vec(j, "omega"), p.theta0 = detail::vec(j, "theta0"), p.phi = need(j, "phi");
        kernel_spectrum(p.omega, p.theta0, p.phi);
        return p;
    }
    if (kind == "random_features") {
        RandomFeatures p;
        if (j.contains("activation")) {
            require(!j.contains("mu") && !j.contains("nu"), "give either an activation or (mu, nu)");
            const std::string act = j.at("activation").get<std::string>();
            std::function<double(double)> f;
            if (act == "relu")
                f = [](double x) { return std::max(x, 0.0) - 1.0 / std::sqrt(2.0 * pi); };
            else if (act == "tanh")
                f = [](double x) { return std::tanh(x); };
            else if (act == "identity")
                f = [](double x) { return x; };
            else
                throw ValidationError("unknown activation '" + act + "' (relu, tanh, identity)");
            auto he = hermite_equivalents(f);
            p.mu = he.mu, p.nu = std::sqrt(std::max(he.nu_sq, 0.0));
        } else {
            p.mu = need(j, "mu"), p.nu = need(j, "nu");
        }
        p.r = num(j, "r", 1.0), p.sigma = num(j, "sigma", 0.0);
        p.phi0 = need(j, "phi0"), p.psi0 = need(j, "psi0"), p.psi = need(j, "psi");
        validate(p);
        return p;
    }
    throw ValidationError("unknown model '" + kind + "'");
}

}  // namespace descent
