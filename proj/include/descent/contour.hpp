#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "core.hpp"
#include "json.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"
#include "selfconsistent.hpp"

namespace descent {

// Closed rectangle around [0, spectrum_max], counterclockwise, symmetric under
// conjugation. The upper half path runs right -> top -> left; the lower half is
// its mirror image traversed in reverse.
struct Contour {
    std::vector<cplx> nodes;
    std::vector<cplx> weights;
    double left = 0, right = 0, half_height = 0;
};

namespace detail {

struct Panel {
    cplx a, b;
};

inline void append_panel(Contour& c, const Rule& gl, cplx a, cplx b) {
    const cplx mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (std::size_t k = 0; k < gl.x.size(); ++k) {
        c.nodes.push_back(mid + half * gl.x[k]);
        c.weights.push_back(half * gl.w[k]);
    }
}

inline void mirror_lower(Contour& c) {
    const std::size_t n = c.nodes.size();
    for (std::size_t k = 0; k < n; ++k) {
        c.nodes.push_back(std::conj(c.nodes[n - 1 - k]));
        c.weights.push_back(-std::conj(c.weights[n - 1 - k]));
    }
}

inline std::vector<Panel> split(cplx a, cplx b, int pieces) {
    std::vector<Panel> out;
    for (int k = 0; k < pieces; ++k) out.push_back({a + (b - a) * (double(k) / pieces), a + (b - a) * (double(k + 1) / pieces)});
    return out;
}

// Panels of the upper half path, right side first.
inline std::vector<Panel> upper_panels(double L, double R, double H, int top, int side) {
    std::vector<Panel> out;
    for (auto p : split(cplx(R, 0), cplx(R, H), side)) out.push_back(p);
    for (auto p : split(cplx(R, H), cplx(L, H), top)) out.push_back(p);
    for (auto p : split(cplx(L, H), cplx(L, 0), side)) out.push_back(p);
    return out;
}

// Evolution path: the left side is a 45 degree edge into the left crossing,
// so e^{-tz} decays along it as fast as it oscillates.
inline std::vector<Panel> evolution_panels(double L, double R, double H, int top, int side) {
    std::vector<Panel> out;
    const double corner = std::min(L + H, 0.5 * (L + R));
    for (auto p : split(cplx(R, 0), cplx(R, H), side)) out.push_back(p);
    for (auto p : split(cplx(R, H), cplx(corner, H), top)) out.push_back(p);
    for (auto p : split(cplx(corner, H), cplx(L, 0), side)) out.push_back(p);
    return out;
}

}  // namespace detail

inline std::pair<double, double> contour_crossings(double spectrum_max, double lambda) {
    return {-0.5 * lambda, 1.2 * std::max(spectrum_max, lambda)};
}

// Composite Gauss-Legendre rectangle. half_height <= 0 picks 0.5 (right - left).
inline Contour build_rectangle(double spectrum_max, double lambda, double half_height = 0.0, int nodes_per_side = 400) {
    require(spectrum_max >= 0 && std::isfinite(spectrum_max), "build_rectangle: spectrum_max must be >= 0");
    require(lambda > 0 && std::isfinite(lambda), "build_rectangle: lambda must be positive");
    require(nodes_per_side >= 8, "build_rectangle: nodes_per_side must be >= 8");
    auto [L, R] = contour_crossings(spectrum_max, lambda);
    const double H = half_height > 0 ? half_height : 0.5 * (R - L);
    const int order = std::min(16, nodes_per_side);
    const int per_side = (nodes_per_side + order - 1) / order;
    const int half_side = (per_side + 1) / 2;
    Rule gl = gauss_legendre(order);
    Contour c;
    c.left = L, c.right = R, c.half_height = H;
    for (const auto& p : detail::upper_panels(L, R, H, per_side, half_side)) detail::append_panel(c, gl, p.a, p.b);
    detail::mirror_lower(c);
    return c;
}

inline cplx contour_integral(const Contour& c, const std::function<cplx(cplx)>& f) {
    cplx s = 0.0;
    for (std::size_t k = 0; k < c.nodes.size(); ++k) {
        cplx v = f(c.nodes[k]);
        if (!finite(v)) {
            std::ostringstream os;
            os << "contour_integral: integrand not finite at node " << k << " z = (" << c.nodes[k].real() << ", "
               << c.nodes[k].imag() << ")";
            throw NumericalError(os.str());
        }
        s += v * c.weights[k];
    }
    return s;
}

struct ContinuationOptions {
    double jump_threshold = 1e4;  // allowed |dzeta| / |dz| between neighbours
    double loop_tol = 1e-9;
    SolveOptions solve{};
};

// Serial continuation around the loop. The first node is reached by walking
// down the vertical line through it from far above the axis.
template <FunctionalProvider P>
std::vector<ZetaSolution> zeta_on_contour(const P& p, const Contour& c, const ContinuationOptions& opt = {}) {
    require(!c.nodes.empty(), "zeta_on_contour: empty contour");
    std::vector<ZetaSolution> out;
    out.reserve(c.nodes.size());
    const cplx z0 = c.nodes.front();
    ZetaSolution first = z0.imag() > 0 ? solve_zeta_descending(p, z0.real(), z0.imag(), opt.solve)
                                       : solve_zeta(p, z0, std::nullopt, opt.solve);
    out.push_back(first);
    for (std::size_t k = 1; k < c.nodes.size(); ++k) {
        ZetaSolution s = solve_zeta(p, c.nodes[k], out.back().zeta, opt.solve);
        const double dz = std::abs(c.nodes[k] - c.nodes[k - 1]);
        const double dzeta = std::abs(s.zeta - out.back().zeta);
        if (dzeta > opt.jump_threshold * std::max(dz, 1e-300)) {
            std::ostringstream os;
            os << "zeta_on_contour: branch jump at node " << k << " (|dzeta| = " << dzeta << ", |dz| = " << dz
               << "); use a finer contour";
            throw NumericalError(os.str());
        }
        out.push_back(s);
    }
    ZetaSolution back = solve_zeta(p, z0, out.back().zeta, opt.solve);
    if (std::abs(back.zeta - first.zeta) > opt.loop_tol * std::max(1.0, std::abs(first.zeta)))
        throw NumericalError("zeta_on_contour: continuation does not close around the loop; use a finer contour");
    return out;
}

// ---- time evolution ----------------------------------------------------------

enum class H1Variant {
    eta_f1_tilde,  // h1~ = eta_x eta_y f1~(x, y)
    eta_f1,        // h1~ = eta_x eta_y f1(x, y)
};

inline std::string to_string(H1Variant v) { return v == H1Variant::eta_f1 ? "eta_f1" : "eta_f1_tilde"; }
inline H1Variant h1_variant_from_string(const std::string& s) {
    if (s == "eta_f1_tilde") return H1Variant::eta_f1_tilde;
    if (s == "eta_f1") return H1Variant::eta_f1;
    throw ValidationError("unknown h1 variant '" + s + "' (eta_f1_tilde, eta_f1)");
}

struct CurveResult {
    std::vector<double> times, gen, train, B0, B1, H0, H1;
    double lambda = 0, r0 = 0, c0 = 0, mean_u = 0;
    nlohmann::json provider;
    nlohmann::json contour;  // left, right, half_height, node count, spectrum_max
    std::string h1_variant = "eta_f1_tilde";
    double max_imag = 0;  // largest imaginary residue seen before truncation
};

struct EvolutionOptions {
    int nodes_per_side = 400;
    double half_height = 0;       // <= 0: 0.5 (R - L)
    double panel_tol = 1e-9;
    int max_depth = 48;
    double spectrum_max = -1;     // < 0: estimate from the provider
    H1Variant h1_variant = H1Variant::eta_f1_tilde;
    int threads = 0;              // 0: DESCENT_THREADS or hardware
    double imag_tol = 1e-6;
    ContinuationOptions continuation{};
};

inline std::vector<double> default_time_grid(int points = 60, double lo = 1e-2, double hi = 1e6) {
    require(points >= 2 && lo > 0 && hi > lo, "time grid: need points >= 2 and 0 < lo < hi");
    std::vector<double> t(points);
    for (int k = 0; k < points; ++k) t[k] = lo * std::pow(hi / lo, double(k) / (points - 1));
    return t;
}

template <class P>
double provider_spectrum_max(const P& p) {
    if constexpr (requires { p.spectrum_max(); })
        return p.spectrum_max();
    else
        return estimate_spectrum_max(p);
}

namespace detail {

// Adaptive refinement of the upper path. Each panel is bisected until the
// Legendre tails of a handful of representative integrands are small.
template <FunctionalProvider P>
class PanelRefiner {
public:
    PanelRefiner(const P& p, double lambda, const std::vector<double>& times, const EvolutionOptions& opt)
        : p_(p), lambda_(lambda), opt_(opt), tail_(16) {
        c0_ = p.c0();
        ref_ = solve_zeta(p, cplx(-lambda), std::nullopt, opt.continuation.solve);
        ref_node_.emplace(p.node(ref_.zeta));
        scale_ = 1.0 + c0_ + p.mean_u();
        std::vector<double> ts;
        for (double t : times)
            if (t > 0 && t * lambda <= 60.0) ts.push_back(t);
        const std::size_t keep = 8;
        if (ts.size() > keep) {
            std::vector<double> sub;
            for (std::size_t k = 0; k < keep; ++k) sub.push_back(ts[k * (ts.size() - 1) / (keep - 1)]);
            ts = sub;
        }
        for (double c : {2.0, 5.0, 10.0, 20.0, 40.0}) ts.push_back(c / lambda);
        probe_times_ = ts;
    }

    // Returns accepted panels in path order and the zeta at their nodes.
    std::vector<Panel> refine(const std::vector<Panel>& initial, cplx warm) {
        std::vector<Panel> done;
        for (const auto& pan : initial) warm = visit(pan, 0, warm, done);
        return done;
    }

    int unresolved() const { return unresolved_; }

private:
    cplx visit(const Panel& pan, int depth, cplx warm, std::vector<Panel>& done) {
        const Rule& gl = tail_.rule();
        const int n = tail_.order();
        const cplx mid = 0.5 * (pan.a + pan.b), half = 0.5 * (pan.b - pan.a);
        std::vector<cplx> z(n), zeta(n);
        cplx w = warm;
        for (int k = 0; k < n; ++k) {
            z[k] = mid + half * gl.x[k];
            w = solve_zeta(p_, z[k], w, opt_.continuation.solve).zeta;
            zeta[k] = w;
        }
        const double len = std::abs(pan.b - pan.a);
        const bool can_split = depth < opt_.max_depth && len > 1e-6 * lambda_;
        if (can_split && !resolved(z, zeta, len)) {
            const Panel left{pan.a, mid}, right{mid, pan.b};
            cplx next = visit(left, depth + 1, warm, done);
            return visit(right, depth + 1, next, done);
        }
        if (!can_split && !resolved(z, zeta, len)) ++unresolved_;
        done.push_back(pan);
        return zeta.back();
    }

    bool resolved(const std::vector<cplx>& z, const std::vector<cplx>& zeta, double len) const {
        const int n = tail_.order();
        const double bound = opt_.panel_tol * scale_ / len;
        std::vector<std::vector<cplx>> probes(8, std::vector<cplx>(n));
        std::vector<cplx> zl(n), ft_ref(n), f2v(n);
        for (int k = 0; k < n; ++k) {
            const cplx zk = z[k], ze = zeta[k];
            const cplx f0 = -(1.0 + ze / zk), eta = -zk / ze;
            const cplx f2 = p_.f2_of(ze);
            const cplx s = zk + lambda_;
            auto node = p_.node(ze);
            const cplx fx_ref = f1_tilde_from_parts(p_.f1_parts(node, *ref_node_));
            const cplx fxx = f1_tilde_from_parts(p_.f1_parts(node, node));
            const cplx fxc = f1_tilde_from_parts(p_.f1_parts(node, p_.node(std::conj(ze))));
            probes[0][k] = f0;
            probes[1][k] = eta * f0;
            probes[2][k] = f2 / s;
            probes[3][k] = eta * (c0_ * f0 + f2) / s;
            probes[4][k] = fx_ref / s;
            probes[5][k] = eta * fx_ref / s;
            probes[6][k] = fxx / s;
            probes[7][k] = fxc / s;
            zl[k] = s;
            ft_ref[k] = fx_ref;
            f2v[k] = f2;
        }
        for (const auto& v : probes)
            if (!(tail_.tail(v) <= bound)) return false;
        std::vector<cplx> a(n), b(n), c(n);
        for (double t : probe_times_) {
            for (int k = 0; k < n; ++k) {
                const cplx e = std::exp(-t * zl[k]);
                a[k] = e * e * (-(1.0 + zeta[k] / z[k]));
                b[k] = e * ft_ref[k] / zl[k];
                c[k] = e * f2v[k] / zl[k];
            }
            if (!(tail_.tail(a) <= bound) || !(tail_.tail(b) <= bound) || !(tail_.tail(c) <= bound)) return false;
        }
        return true;
    }

    const P& p_;
    double lambda_;
    EvolutionOptions opt_;
    LegendreTail tail_;
    double c0_ = 0, scale_ = 1;
    ZetaSolution ref_{};
    std::optional<typename P::Node> ref_node_;
    std::vector<double> probe_times_;
    int unresolved_ = 0;
};

inline void check_real(const char* what, double t, cplx v, double tol, double& max_imag) {
    const double im = std::abs(v.imag());
    max_imag = std::max(max_imag, im);
    if (!(im <= tol * std::max(1.0, std::abs(v.real())))) {
        std::ostringstream os;
        os << "evolution_curves: imaginary residue " << im << " in " << what << " at t = " << t
           << "; quadrature is under-resolved";
        throw NumericalError(os.str(), im);
    }
}

}  // namespace detail

// Curves on an explicit contour with zeta already solved at every node.
template <FunctionalProvider P>
CurveResult evolution_curves_on(const P& p, const Contour& c, const std::vector<ZetaSolution>& zs, double lambda,
                                double r0, const std::vector<double>& times, const EvolutionOptions& opt = {}) {
    require(lambda > 0, "evolution_curves: lambda must be positive; use infinite_time_errors to extrapolate to 0");
    require(zs.size() == c.nodes.size(), "evolution_curves: zeta count does not match the contour");
    for (double t : times) require(t >= 0 && std::isfinite(t), "evolution_curves: times must be finite and >= 0");
    const std::size_t N = c.nodes.size(), T = times.size();
    const double c0 = p.c0();

    std::vector<cplx> f0(N), eta(N), f2v(N), h0(N), h2(N);
    std::vector<typename P::Node> nodes;
    nodes.reserve(N);
    for (std::size_t i = 0; i < N; ++i) {
        f0[i] = zs[i].f0;
        eta[i] = zs[i].eta;
        f2v[i] = p.f2_of(zs[i].zeta);
        h0[i] = eta[i] * f0[i];
        h2[i] = eta[i] * (c0 * f0[i] + f2v[i]);
        nodes.push_back(p.node(zs[i].zeta));
    }

    // K[t][j] = w_j (1 - e^{-t(z_j + lambda)}) / (z_j + lambda), split into re/im rows
    std::vector<double> Kr(T * N), Ki(T * N), KEr(T * N), KEi(T * N);
    std::vector<cplx> S1(T, 0.0), Sf2(T, 0.0), Sh2(T, 0.0), Seta(T, 0.0), Setaf2(T, 0.0), B0(T, 0.0), H0(T, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < N; ++j) {
            const cplx s = c.nodes[j] + lambda;
            const cplx k = times[t] == 0 ? cplx(0.0) : -expm1(-times[t] * s) / s * c.weights[j];
            const cplx ke = k * eta[j];
            Kr[t * N + j] = k.real(), Ki[t * N + j] = k.imag();
            KEr[t * N + j] = ke.real(), KEi[t * N + j] = ke.imag();
            S1[t] += k;
            Sf2[t] += k * f2v[j];
            Sh2[t] += k * h2[j];
            Seta[t] += ke;
            Setaf2[t] += ke * f2v[j];
            const cplx e = std::exp(-2.0 * times[t] * s) * c.weights[j];
            B0[t] += e * f0[j];
            H0[t] += e * h0[j];
        }
    }

    // Double sums over the symmetric node-pair grid, one row at a time.
    std::vector<cplx> rowF(N * T), rowH(N * T);
    parallel_for(
        N,
        [&](std::size_t i) {
            const std::size_t m = N - i;
            std::vector<double> Fr(m), Fi(m);
            for (std::size_t j = i; j < N; ++j) {
                cplx f = f1_tilde_from_parts(p.f1_parts(nodes[i], nodes[j]));
                Fr[j - i] = f.real(), Fi[j - i] = f.imag();
            }
            for (std::size_t t = 0; t < T; ++t) {
                const double* kr = &Kr[t * N + i];
                const double* ki = &Ki[t * N + i];
                const double* er = &KEr[t * N + i];
                const double* ei = &KEi[t * N + i];
                double sr = 0, si = 0, hr = 0, hi = 0;
                for (std::size_t j = 0; j < m; ++j) {
                    sr += Fr[j] * kr[j] - Fi[j] * ki[j];
                    si += Fr[j] * ki[j] + Fi[j] * kr[j];
                    hr += Fr[j] * er[j] - Fi[j] * ei[j];
                    hi += Fr[j] * ei[j] + Fi[j] * er[j];
                }
                const cplx Fii(Fr[0], Fi[0]), ki0(kr[0], ki[0]), ke0(er[0], ei[0]);
                rowF[i * T + t] = ki0 * (2.0 * cplx(sr, si) - Fii * ki0);
                rowH[i * T + t] = ke0 * (2.0 * cplx(hr, hi) - Fii * ke0);
            }
        },
        opt.threads);

    CurveResult res;
    res.times = times;
    res.lambda = lambda, res.r0 = r0, res.c0 = c0, res.mean_u = p.mean_u();
    res.provider = p.describe();
    res.h1_variant = to_string(opt.h1_variant);
    res.contour = {{"left", c.left}, {"right", c.right}, {"half_height", c.half_height}, {"nodes", N}};
    const cplx two_pi_i(0.0, 2.0 * pi), i_pi(0.0, pi);
    const double inv4pi2 = 1.0 / (4.0 * pi * pi);
    for (std::size_t t = 0; t < T; ++t) {
        cplx Df = 0.0, Dh = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            Df += rowF[i * T + t];
            Dh += rowH[i * T + t];
        }
        if (opt.h1_variant == H1Variant::eta_f1) Dh += 2.0 * Setaf2[t] * Seta[t] - c0 * Seta[t] * Seta[t];
        const cplx b0 = -B0[t] / two_pi_i;
        const cplx h0v = -H0[t] / two_pi_i;
        const cplx b1 = -inv4pi2 * (Df + 2.0 * Sf2[t] * S1[t] - c0 * S1[t] * S1[t]) + Sf2[t] / i_pi;
        const cplx h1 = -inv4pi2 * (Dh + 2.0 * Sh2[t] * S1[t] - c0 * S1[t] * S1[t]) + Sh2[t] / i_pi;
        detail::check_real("B0", times[t], b0, opt.imag_tol, res.max_imag);
        detail::check_real("B1", times[t], b1, opt.imag_tol, res.max_imag);
        detail::check_real("H0", times[t], h0v, opt.imag_tol, res.max_imag);
        detail::check_real("H1", times[t], h1, opt.imag_tol, res.max_imag);
        res.B0.push_back(b0.real());
        res.B1.push_back(times[t] == 0 ? 0.0 : b1.real());
        res.H0.push_back(h0v.real());
        res.H1.push_back(times[t] == 0 ? 0.0 : h1.real());
        res.gen.push_back(c0 + r0 * r0 * res.B0.back() + res.B1.back());
        res.train.push_back(c0 + r0 * r0 * res.H0.back() + res.H1.back());
    }
    return res;
}

// Pentagon around the spectrum, refined panel by panel for the requested times.
template <FunctionalProvider P>
Contour build_evolution_contour(const P& p, double lambda, const std::vector<double>& times,
                                const EvolutionOptions& opt = {}, double* spectrum_max_out = nullptr) {
    require(lambda > 0, "evolution_curves: lambda must be positive; use infinite_time_errors to extrapolate to 0");
    require(opt.nodes_per_side >= 8, "evolution_curves: nodes_per_side must be >= 8");
    const double smax = opt.spectrum_max >= 0 ? opt.spectrum_max : provider_spectrum_max(p);
    if (spectrum_max_out) *spectrum_max_out = smax;
    auto [L, R] = contour_crossings(smax, lambda);
    const double H = opt.half_height > 0 ? opt.half_height : 0.5 * (R - L);
    const int top = (opt.nodes_per_side + 15) / 16;
    const int side = (top + 1) / 2;
    auto initial = detail::evolution_panels(L, R, H, top, side);
    detail::PanelRefiner<P> refiner(p, lambda, times, opt);
    const cplx first = 0.5 * (initial.front().a + initial.front().b);
    cplx warm = solve_zeta_descending(p, R, std::max(first.imag(), 1e-300), opt.continuation.solve).zeta;
    auto panels = refiner.refine(initial, warm);
    Rule gl = gauss_legendre(16);
    Contour c;
    c.left = L, c.right = R, c.half_height = H;
    for (const auto& pan : panels) detail::append_panel(c, gl, pan.a, pan.b);
    detail::mirror_lower(c);
    return c;
}

template <FunctionalProvider P>
CurveResult evolution_curves(const P& p, double lambda, double r0, const std::vector<double>& times,
                             int nodes_per_side = 400, EvolutionOptions opt = {}) {
    require(lambda > 0, "evolution_curves: lambda must be positive; use infinite_time_errors to extrapolate to 0");
    opt.nodes_per_side = nodes_per_side;
    double smax = 0;
    Contour c = build_evolution_contour(p, lambda, times, opt, &smax);
    auto zs = zeta_on_contour(p, c, opt.continuation);
    CurveResult res = evolution_curves_on(p, c, zs, lambda, r0, times, opt);
    res.contour["spectrum_max"] = smax;
    res.contour["nodes_per_side"] = nodes_per_side;
    return res;
}

// ---- serialization -------------------------------------------------------------

inline const char* curve_csv_header() { return "t,gen_error,train_error,B0,B1,H0,H1"; }

inline std::string curves_to_csv(const CurveResult& r) {
    std::string out = std::string(curve_csv_header()) + "\n";
    char buf[512];
    for (std::size_t k = 0; k < r.times.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.times[k], r.gen[k], r.train[k],
                      r.B0[k], r.B1[k], r.H0[k], r.H1[k]);
        out += buf;
    }
    return out;
}

inline CurveResult curves_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    require(bool(std::getline(in, line)), "curve csv: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    require(line == curve_csv_header(), "curve csv: unexpected header '" + line + "'");
    CurveResult r;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::istringstream row(line);
        std::string cell;
        std::vector<double> v;
        while (std::getline(row, cell, ',')) {
            try {
                v.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw ValidationError("curve csv: bad number '" + cell + "'");
            }
        }
        require(v.size() == 7, "curve csv: expected 7 columns, got " + std::to_string(v.size()));
        r.times.push_back(v[0]), r.gen.push_back(v[1]), r.train.push_back(v[2]);
        r.B0.push_back(v[3]), r.B1.push_back(v[4]), r.H0.push_back(v[5]), r.H1.push_back(v[6]);
    }
    return r;
}

inline nlohmann::json to_json(const CurveResult& r) {
    return {{"times", r.times},       {"gen_error", r.gen}, {"train_error", r.train}, {"B0", r.B0},
            {"B1", r.B1},             {"H0", r.H0},         {"H1", r.H1},             {"lambda", r.lambda},
            {"r0", r.r0},             {"c0", r.c0},         {"mean_u", r.mean_u},     {"provider", r.provider},
            {"contour", r.contour},   {"h1_variant", r.h1_variant}, {"max_imag", r.max_imag}};
}

inline CurveResult curve_from_json(const nlohmann::json& j) {
    CurveResult r;
    try {
        r.times = j.at("times").get<std::vector<double>>();
        r.gen = j.at("gen_error").get<std::vector<double>>();
        r.train = j.at("train_error").get<std::vector<double>>();
        r.B0 = j.at("B0").get<std::vector<double>>();
        r.B1 = j.at("B1").get<std::vector<double>>();
        r.H0 = j.at("H0").get<std::vector<double>>();
        r.H1 = j.at("H1").get<std::vector<double>>();
        r.lambda = j.at("lambda").get<double>();
        r.r0 = j.at("r0").get<double>();
        r.c0 = j.value("c0", 0.0);
        r.mean_u = j.value("mean_u", 0.0);
        r.provider = j.value("provider", nlohmann::json::object());
        r.contour = j.value("contour", nlohmann::json::object());
        r.h1_variant = j.value("h1_variant", std::string("eta_f1_tilde"));
        r.max_imag = j.value("max_imag", 0.0);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("curve json: ") + e.what());
    }
    const std::size_t n = r.times.size();
    for (auto* v : {&r.gen, &r.train, &r.B0, &r.B1, &r.H0, &r.H1})
        require(v->size() == n, "curve json: column lengths differ");
    return r;
}

}  // namespace descent
