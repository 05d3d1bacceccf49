#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "core.hpp"
#include "json.hpp"
#include "spectra.hpp"

namespace descent {

// A Gaussian matrix shared by one or more blocks. Entries are iid with the
// given variance; a symmetric symbol is a Wigner matrix.
struct SymbolSpec {
    std::string name;
    int rows = 0, cols = 0;
    double variance = 1.0;
    bool symmetric = false;
};

enum class BlockKind { zero, identity_scalar, constant, random };

struct BlockSpec {
    int i = 0, j = 0;
    BlockKind kind = BlockKind::zero;
    cplx coeff = 1.0;
    std::vector<cplx> diag;   // constant: diagonal entries, or
    Eigen::MatrixXcd dense;   // constant: full matrix (used when diag is empty)
    std::string symbol;       // random
    bool transposed = false;  // random
};

struct PencilSpec {
    std::vector<int> dims;
    std::vector<SymbolSpec> symbols;
    std::vector<BlockSpec> blocks;
};

struct GSolution {
    Eigen::MatrixXcd g;  // normalized block traces, zero outside equal-size pairs
    double residual = 0;
    int iterations = 0;
};

// sigma[((i n + j) n + k) n + l] = E[H^{ij}_{uv} H^{kl}_{vu}]
struct Profile {
    int n = 0;
    std::vector<double> sigma;
    double operator()(int i, int j, int k, int l) const { return sigma[((std::size_t(i) * n + j) * n + k) * n + l]; }
    double& at(int i, int j, int k, int l) { return sigma[((std::size_t(i) * n + j) * n + k) * n + l]; }
};

namespace detail {

inline const SymbolSpec& find_symbol(const PencilSpec& s, const std::string& name) {
    for (const auto& sym : s.symbols)
        if (sym.name == name) return sym;
    throw ValidationError("pencil: unknown symbol '" + name + "'");
}

inline std::size_t total_dim(const PencilSpec& s) {
    std::size_t t = 0;
    for (int p : s.dims) t += std::size_t(p);
    return t;
}

inline std::vector<std::size_t> offsets(const PencilSpec& s) {
    std::vector<std::size_t> off(s.dims.size() + 1, 0);
    for (std::size_t k = 0; k < s.dims.size(); ++k) off[k + 1] = off[k] + std::size_t(s.dims[k]);
    return off;
}

}  // namespace detail

inline void validate(const PencilSpec& s) {
    const int n = int(s.dims.size());
    require(n >= 1, "pencil: no blocks declared");
    for (int p : s.dims) require(p >= 1, "pencil: block sizes must be positive");
    for (const auto& sym : s.symbols) {
        require(sym.rows >= 1 && sym.cols >= 1, "pencil: symbol '" + sym.name + "' has an empty shape");
        require(sym.variance >= 0, "pencil: symbol '" + sym.name + "' has negative variance");
        require(!sym.symmetric || sym.rows == sym.cols, "pencil: symmetric symbol '" + sym.name + "' must be square");
    }
    std::map<std::pair<int, int>, std::string> random_at;
    for (const auto& b : s.blocks) {
        require(b.i >= 0 && b.i < n && b.j >= 0 && b.j < n, "pencil: block index out of range");
        const int pi = s.dims[b.i], pj = s.dims[b.j];
        const std::string where = "pencil: block (" + std::to_string(b.i) + "," + std::to_string(b.j) + ")";
        switch (b.kind) {
            case BlockKind::zero:
                break;
            case BlockKind::identity_scalar:
                require(pi == pj, where + " is not square; identity needs equal sizes");
                break;
            case BlockKind::constant:
                if (!b.diag.empty())
                    require(pi == pj && int(b.diag.size()) == pi, where + ": diagonal length does not match the block");
                else
                    require(b.dense.rows() == pi && b.dense.cols() == pj, where + ": matrix shape does not match the block");
                break;
            case BlockKind::random: {
                const auto& sym = detail::find_symbol(s, b.symbol);
                const int r = b.transposed ? sym.cols : sym.rows, c = b.transposed ? sym.rows : sym.cols;
                require(r == pi && c == pj, where + ": symbol '" + b.symbol + "' does not fit");
                require(b.coeff.imag() == 0, where + ": random coefficients must be real");
                auto [it, fresh] = random_at.emplace(std::make_pair(b.i, b.j), b.symbol);
                require(fresh || it->second == b.symbol, where + " mixes symbols '" + it->second + "' and '" + b.symbol + "'");
                break;
            }
        }
    }
}

// Covariance profile from the symbol placements. Two placements pair when
// they hold the same symbol mutually transposed, or the symbol is symmetric.
inline Profile derive_profile(const PencilSpec& s) {
    validate(s);
    const int n = int(s.dims.size());
    const double N = double(detail::total_dim(s));
    Profile pr;
    pr.n = n;
    pr.sigma.assign(std::size_t(n) * n * n * n, 0.0);
    for (const auto& a : s.blocks) {
        if (a.kind != BlockKind::random) continue;
        for (const auto& b : s.blocks) {
            if (b.kind != BlockKind::random || b.symbol != a.symbol) continue;
            const auto& sym = detail::find_symbol(s, a.symbol);
            if (!sym.symmetric && a.transposed == b.transposed) continue;
            pr.at(a.i, a.j, b.i, b.j) += a.coeff.real() * b.coeff.real() * N * sym.variance;
        }
    }
    return pr;
}

// [eta(g)]_{ij} = sum_{kl, p_k = p_l} gamma_k sigma_{ik}^{lj} g^{kl}
inline Eigen::MatrixXcd eta_map(const PencilSpec& s, const Profile& pr, const Eigen::MatrixXcd& g) {
    const int n = pr.n;
    const double N = double(detail::total_dim(s));
    Eigen::MatrixXcd e = Eigen::MatrixXcd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (s.dims[i] != s.dims[j]) continue;
            cplx acc = 0.0;
            for (int k = 0; k < n; ++k)
                for (int l = 0; l < n; ++l) {
                    if (s.dims[k] != s.dims[l]) continue;
                    const double sg = pr(i, k, l, j);
                    if (sg != 0.0) acc += (s.dims[k] / N) * sg * g(k, l);
                }
            e(i, j) = acc;
        }
    return e;
}

namespace detail {

inline bool diagonal_structure(const PencilSpec& s) {
    for (const auto& b : s.blocks)
        if (b.kind == BlockKind::constant && b.diag.empty()) return false;
    return true;
}

// Constant part at entry t of a diagonal-structured block (i, j).
inline cplx diag_entry(const PencilSpec& s, int i, int j, int t) {
    cplx v = 0.0;
    for (const auto& b : s.blocks) {
        if (b.i != i || b.j != j) continue;
        if (b.kind == BlockKind::identity_scalar) v += b.coeff;
        if (b.kind == BlockKind::constant) v += b.coeff * b.diag[t];
    }
    return v;
}

// Block traces of (M0 - eta x I)^{-1}. With only diagonal constants the matrix
// splits into one small system per (size class, index).
inline Eigen::MatrixXcd block_traces(const PencilSpec& s, const Eigen::MatrixXcd& eta) {
    const int n = int(s.dims.size());
    Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(n, n);
    if (diagonal_structure(s)) {
        std::map<int, std::vector<int>> classes;
        for (int i = 0; i < n; ++i) classes[s.dims[i]].push_back(i);
        for (const auto& [p, members] : classes) {
            const int m = int(members.size());
            Eigen::MatrixXcd small(m, m);
            for (int t = 0; t < p; ++t) {
                for (int a = 0; a < m; ++a)
                    for (int b = 0; b < m; ++b)
                        small(a, b) = diag_entry(s, members[a], members[b], t) - eta(members[a], members[b]);
                Eigen::PartialPivLU<Eigen::MatrixXcd> lu(small);
                if (!(std::abs(lu.determinant()) > 1e-300))
                    throw NumericalError("pencil: singular block system at index " + std::to_string(t));
                Eigen::MatrixXcd inv = lu.inverse();
                for (int a = 0; a < m; ++a)
                    for (int b = 0; b < m; ++b) g(members[a], members[b]) += inv(a, b);
            }
            for (int a = 0; a < m; ++a)
                for (int b = 0; b < m; ++b) g(members[a], members[b]) /= double(p);
        }
        return g;
    }
    const auto off = offsets(s);
    const Eigen::Index N = Eigen::Index(off.back());
    Eigen::MatrixXcd Pi = Eigen::MatrixXcd::Zero(N, N);
    for (const auto& b : s.blocks) {
        auto blk = Pi.block(off[b.i], off[b.j], s.dims[b.i], s.dims[b.j]);
        if (b.kind == BlockKind::identity_scalar)
            blk.diagonal().array() += b.coeff;
        else if (b.kind == BlockKind::constant && !b.diag.empty())
            for (int t = 0; t < s.dims[b.i]; ++t) blk(t, t) += b.coeff * b.diag[t];
        else if (b.kind == BlockKind::constant)
            blk += b.coeff * b.dense;
    }
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (s.dims[i] == s.dims[j] && eta(i, j) != cplx(0.0))
                Pi.block(off[i], off[j], s.dims[i], s.dims[j]).diagonal().array() -= eta(i, j);
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(Pi);
    Eigen::MatrixXcd G = lu.inverse();
    if (!G.allFinite()) throw NumericalError("pencil: singular block system");
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (s.dims[i] == s.dims[j])
                g(i, j) = G.block(off[i], off[j], s.dims[i], s.dims[j]).diagonal().sum() / double(s.dims[i]);
    return g;
}

}  // namespace detail

struct PencilOptions {
    double damping = 0.5;
    double tol = 1e-10;
    int max_iter = 20000;
};

inline GSolution solve_pencil(const PencilSpec& s, const std::optional<Eigen::MatrixXcd>& init = std::nullopt,
                              const PencilOptions& opt = {}) {
    const Profile pr = derive_profile(s);
    const int n = int(s.dims.size());
    require(opt.damping > 0 && opt.damping <= 1, "solve_pencil: damping must lie in (0, 1]");
    Eigen::MatrixXcd g = init ? *init : Eigen::MatrixXcd::Zero(n, n);
    require(g.rows() == n && g.cols() == n, "solve_pencil: init has the wrong shape");
    GSolution out;
    for (int it = 1; it <= opt.max_iter; ++it) {
        Eigen::MatrixXcd next = detail::block_traces(s, eta_map(s, pr, g));
        const double res = (next - g).cwiseAbs().maxCoeff();
        g = (1.0 - opt.damping) * g + opt.damping * next;
        out.iterations = it;
        out.residual = res;
        if (res <= opt.tol) {
            out.g = next;
            return out;
        }
    }
    throw NumericalError("solve_pencil: no convergence after " + std::to_string(opt.max_iter) + " iterations",
                         out.residual);
}

// One draw of every symbol, assembled and inverted densely.
inline GSolution sample_finite_pencil(const PencilSpec& s, std::uint64_t seed) {
    validate(s);
    const int n = int(s.dims.size());
    const auto off = detail::offsets(s);
    const Eigen::Index N = Eigen::Index(off.back());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::map<std::string, Eigen::MatrixXd> draws;
    for (const auto& sym : s.symbols) {
        Eigen::MatrixXd X(sym.rows, sym.cols);
        const double sd = std::sqrt(sym.variance);
        for (Eigen::Index c = 0; c < X.cols(); ++c)
            for (Eigen::Index r = 0; r < X.rows(); ++r) X(r, c) = sd * normal(rng);
        if (sym.symmetric) X = (X.triangularView<Eigen::Upper>().toDenseMatrix() +
                                X.triangularView<Eigen::StrictlyUpper>().transpose().toDenseMatrix())
                                   .eval();
        draws.emplace(sym.name, std::move(X));
    }
    bool real = true;
    for (const auto& b : s.blocks) {
        if (b.coeff.imag() != 0) real = false;
        for (const auto& v : b.diag)
            if (v.imag() != 0) real = false;
        if (b.kind == BlockKind::constant && b.diag.empty() && b.dense.imag().cwiseAbs().maxCoeff() != 0) real = false;
    }
    auto fill = [&](auto& M) {
        using Scalar = typename std::decay_t<decltype(M)>::Scalar;
        auto cast = [](cplx v) -> Scalar {
            if constexpr (std::is_same_v<Scalar, double>)
                return v.real();
            else
                return v;
        };
        for (const auto& b : s.blocks) {
            auto blk = M.block(off[b.i], off[b.j], s.dims[b.i], s.dims[b.j]);
            switch (b.kind) {
                case BlockKind::zero:
                    break;
                case BlockKind::identity_scalar:
                    blk.diagonal().array() += cast(b.coeff);
                    break;
                case BlockKind::constant:
                    if (!b.diag.empty())
                        for (int t = 0; t < s.dims[b.i]; ++t) blk(t, t) += cast(b.coeff * b.diag[t]);
                    else if constexpr (std::is_same_v<Scalar, double>)
                        blk += b.coeff.real() * b.dense.real();
                    else
                        blk += b.coeff * b.dense;
                    break;
                case BlockKind::random: {
                    const auto& X = draws.at(b.symbol);
                    if (b.transposed)
                        blk += (b.coeff.real() * X.transpose()).template cast<Scalar>();
                    else
                        blk += (b.coeff.real() * X).template cast<Scalar>();
                    break;
                }
            }
        }
    };
    auto traces = [&](const auto& G) {
        Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (s.dims[i] == s.dims[j])
                    g(i, j) = cplx(G.block(off[i], off[j], s.dims[i], s.dims[j]).diagonal().sum()) / double(s.dims[i]);
        return g;
    };
    GSolution out;
    if (real) {
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(N, N);
        fill(M);
        Eigen::MatrixXd G = Eigen::PartialPivLU<Eigen::MatrixXd>(M).inverse();
        if (!G.allFinite()) throw NumericalError("sample_finite_pencil: singular matrix");
        out.g = traces(G);
    } else {
        Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(N, N);
        fill(M);
        Eigen::MatrixXcd G = Eigen::PartialPivLU<Eigen::MatrixXcd>(M).inverse();
        if (!G.allFinite()) throw NumericalError("sample_finite_pencil: singular matrix");
        out.g = traces(G);
    }
    return out;
}

// ---- builders ----------------------------------------------------------------

// H / sqrt(N) - z I with H a Wigner matrix.
inline PencilSpec wigner_pencil(cplx z, int N = 1000) {
    require(N >= 1, "wigner_pencil: N must be positive");
    PencilSpec s;
    s.dims = {N};
    s.symbols = {{"H", N, N, 1.0 / N, true}};
    s.blocks.push_back({0, 0, BlockKind::identity_scalar, -z});
    s.blocks.push_back({0, 0, BlockKind::random, 1.0, {}, {}, "H", false});
    return s;
}

// [[-z I_N, X^T / sqrt N], [X / sqrt N, -I_d]] with phi = N / d.
inline PencilSpec mp_pencil(double phi, cplx z, int total = 1500) {
    require(phi > 0, "mp_pencil: phi must be positive");
    const int N = int(std::lround(total * phi / (1.0 + phi)));
    const int d = total - N;
    require(N >= 1 && d >= 1, "mp_pencil: total too small for this phi");
    PencilSpec s;
    s.dims = {N, d};
    s.symbols = {{"X", d, N, 1.0 / N, false}};
    s.blocks.push_back({0, 0, BlockKind::identity_scalar, -z});
    s.blocks.push_back({1, 1, BlockKind::identity_scalar, -1.0});
    s.blocks.push_back({1, 0, BlockKind::random, 1.0, {}, {}, "X", false});
    s.blocks.push_back({0, 1, BlockKind::random, 1.0, {}, {}, "X", true});
    return s;
}

namespace detail {
// Diagonal entries of U and V* at dimension d, atom counts rounded.
inline std::pair<std::vector<cplx>, std::vector<cplx>> atom_diagonals(const AtomSpectrum& sp, int d) {
    std::vector<int> counts;
    int used = 0;
    for (const auto& a : sp.atoms) {
        counts.push_back(int(std::lround(a.weight * d)));
        used += counts.back();
    }
    counts.back() += d - used;
    require(counts.back() >= 0, "pencil: dimension too small for the atom weights");
    std::vector<cplx> U, V;
    for (std::size_t k = 0; k < sp.atoms.size(); ++k)
        for (int c = 0; c < counts[k]; ++c) {
            U.push_back(sp.atoms[k].u);
            V.push_back(sp.atoms[k].v);
        }
    return {U, V};
}
}  // namespace detail

// Test-error pencil: f1~(x, y) = +g^{00}, f0(x) = -g^{04}. Block sizes (d, n, d, d, d, n).
inline PencilSpec m1_pencil(const AtomSpectrum& sp, int d, cplx x, cplx y) {
    require(d >= 1, "m1_pencil: d must be positive");
    const int n = int(std::lround(sp.phi * d));
    require(n >= 1, "m1_pencil: n = phi d rounds to zero");
    auto [U, V] = detail::atom_diagonals(sp, d);
    std::vector<cplx> xyV(V.size());
    for (std::size_t k = 0; k < V.size(); ++k) xyV[k] = -x * y * V[k];
    PencilSpec s;
    s.dims = {d, n, d, d, d, n};
    s.symbols = {{"Z", n, d, 1.0 / d, false}};
    auto id = [&](int i, int j, cplx c) { s.blocks.push_back({i, j, BlockKind::identity_scalar, c}); };
    auto dg = [&](int i, int j, std::vector<cplx> v) { s.blocks.push_back({i, j, BlockKind::constant, 1.0, std::move(v)}); };
    auto rnd = [&](int i, int j, bool t) { s.blocks.push_back({i, j, BlockKind::random, 1.0, {}, {}, "Z", t}); };
    id(0, 3, -y), rnd(0, 5, true);
    rnd(1, 4, false), id(1, 5, 1.0);
    dg(2, 3, U), id(2, 4, 1.0);
    id(3, 0, -x), dg(3, 2, U), dg(3, 3, xyV);
    rnd(4, 1, true), id(4, 2, 1.0);
    rnd(5, 0, false), id(5, 1, 1.0);
    return s;
}

// f2 pencil with the last two block columns ordered so every diagonal block is
// square: f2(z) = c0 + g^{10}. Block sizes (d, d, d, n).
inline PencilSpec m2_pencil(const AtomSpectrum& sp, int d, cplx z) {
    require(d >= 1, "m2_pencil: d must be positive");
    const int n = int(std::lround(sp.phi * d));
    require(n >= 1, "m2_pencil: n = phi d rounds to zero");
    auto [U, V] = detail::atom_diagonals(sp, d);
    std::vector<cplx> zV(V.size());
    for (std::size_t k = 0; k < V.size(); ++k) zV[k] = -z * V[k];
    PencilSpec s;
    s.dims = {d, d, d, n};
    s.symbols = {{"Z", n, d, 1.0 / d, false}};
    s.blocks.push_back({0, 0, BlockKind::identity_scalar, 1.0});
    s.blocks.push_back({1, 0, BlockKind::constant, 1.0, zV});
    s.blocks.push_back({1, 1, BlockKind::identity_scalar, -z});
    s.blocks.push_back({1, 2, BlockKind::constant, 1.0, U});
    s.blocks.push_back({2, 2, BlockKind::identity_scalar, 1.0});
    s.blocks.push_back({2, 3, BlockKind::random, 1.0, {}, {}, "Z", true});
    s.blocks.push_back({3, 1, BlockKind::random, 1.0, {}, {}, "Z", false});
    s.blocks.push_back({3, 3, BlockKind::identity_scalar, 1.0});
    return s;
}

// [[0, M], [M^H, 0]]: the inverse of M sits in the lower-left quadrant.
inline PencilSpec amplify(const PencilSpec& s) {
    validate(s);
    const int n = int(s.dims.size());
    PencilSpec a;
    a.dims = s.dims;
    a.dims.insert(a.dims.end(), s.dims.begin(), s.dims.end());
    a.symbols = s.symbols;
    for (const auto& b : s.blocks) {
        BlockSpec top = b;
        top.j = b.j + n;
        a.blocks.push_back(top);
        BlockSpec low = b;
        low.i = b.j + n;
        low.j = b.i;
        low.coeff = std::conj(b.coeff);
        for (auto& v : low.diag) v = std::conj(v);
        if (b.kind == BlockKind::constant && b.diag.empty()) low.dense = b.dense.adjoint();
        if (b.kind == BlockKind::random) low.transposed = !b.transposed;
        a.blocks.push_back(low);
    }
    return a;
}

// ---- json ----------------------------------------------------------------------

namespace detail {
inline cplx cplx_from_json(const nlohmann::json& j) {
    if (j.is_number()) return j.get<double>();
    require(j.is_array() && j.size() == 2, "complex values are a number or [re, im]");
    return {j[0].get<double>(), j[1].get<double>()};
}
inline nlohmann::json cplx_to_json(cplx v) { return nlohmann::json::array({v.real(), v.imag()}); }
}  // namespace detail

inline PencilSpec pencil_from_json(const nlohmann::json& j) {
    try {
        if (j.contains("builder")) {
            const std::string b = j.at("builder").get<std::string>();
            const cplx z = detail::cplx_from_json(j.at("z"));
            if (b == "wigner") return wigner_pencil(z, j.value("N", 1000));
            if (b == "mp") return mp_pencil(j.at("phi").get<double>(), z, j.value("total", 1500));
            if (b == "m1" || b == "m2") {
                AtomSpectrum sp = atom_spectrum(model_from_json(j.at("model")));
                const int d = j.value("d", 500);
                if (b == "m2") return m2_pencil(sp, d, z);
                return m1_pencil(sp, d, z, j.contains("y") ? detail::cplx_from_json(j.at("y")) : z);
            }
            throw ValidationError("pencil: unknown builder '" + b + "' (wigner, mp, m1, m2)");
        }
        PencilSpec s;
        s.dims = j.at("dims").get<std::vector<int>>();
        for (const auto& sj : j.value("symbols", nlohmann::json::array()))
            s.symbols.push_back({sj.at("name").get<std::string>(), sj.at("rows").get<int>(), sj.at("cols").get<int>(),
                                 sj.value("variance", 1.0), sj.value("symmetric", false)});
        for (const auto& bj : j.at("blocks")) {
            BlockSpec b;
            b.i = bj.at("i").get<int>();
            b.j = bj.at("j").get<int>();
            const std::string kind = bj.at("kind").get<std::string>();
            b.coeff = bj.contains("coeff") ? detail::cplx_from_json(bj.at("coeff")) : cplx(1.0);
            if (kind == "zero") {
                b.kind = BlockKind::zero;
            } else if (kind == "identity_scalar") {
                b.kind = BlockKind::identity_scalar;
            } else if (kind == "constant") {
                b.kind = BlockKind::constant;
                if (bj.contains("diag")) {
                    for (const auto& v : bj.at("diag")) b.diag.push_back(detail::cplx_from_json(v));
                } else {
                    const auto& rows = bj.at("matrix");
                    require(rows.is_array() && !rows.empty(), "pencil: constant matrix must be a nested array");
                    b.dense.resize(Eigen::Index(rows.size()), Eigen::Index(rows[0].size()));
                    for (std::size_t r = 0; r < rows.size(); ++r) {
                        require(rows[r].size() == rows[0].size(), "pencil: ragged constant matrix");
                        for (std::size_t c = 0; c < rows[r].size(); ++c)
                            b.dense(Eigen::Index(r), Eigen::Index(c)) = detail::cplx_from_json(rows[r][c]);
                    }
                }
            } else if (kind == "random") {
                b.kind = BlockKind::random;
                b.symbol = bj.at("symbol").get<std::string>();
                b.transposed = bj.value("transposed", false);
            } else {
                throw ValidationError("pencil: unknown block kind '" + kind + "'");
            }
            s.blocks.push_back(std::move(b));
        }
        validate(s);
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("pencil json: ") + e.what());
    }
}

inline nlohmann::json to_json(const GSolution& g) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < g.g.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index k = 0; k < g.g.cols(); ++k) row.push_back(detail::cplx_to_json(g.g(i, k)));
        rows.push_back(row);
    }
    return {{"g", rows}, {"residual", g.residual}, {"iterations", g.iterations}};
}

}  // namespace descent
