#pragma once

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "contour.hpp"
#include "core.hpp"
#include "dataio.hpp"
#include "json.hpp"
#include "parallel.hpp"
#include "pencil.hpp"
#include "randomfeatures.hpp"
#include "selfconsistent.hpp"
#include "simulate.hpp"
#include "spectra.hpp"

namespace descent {
namespace cli {

// "lo:hi:count" -> count points, log-spaced or linear.
inline std::vector<double> parse_grid(const std::string& s, bool log_spaced, const char* what) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ':')) parts.push_back(item);
    require(parts.size() == 3, std::string(what) + " grid must look like lo:hi:count, got '" + s + "'");
    double lo, hi;
    long count;
    try {
        lo = std::stod(parts[0]), hi = std::stod(parts[1]), count = std::stol(parts[2]);
    } catch (const std::exception&) {
        throw ValidationError(std::string(what) + " grid has a malformed number: '" + s + "'");
    }
    require(count >= 1, std::string(what) + " grid needs at least one point");
    require(hi >= lo, std::string(what) + " grid needs lo <= hi");
    if (log_spaced) require(lo > 0, std::string(what) + " grid is log-spaced; lo must be positive");
    std::vector<double> out;
    for (long k = 0; k < count; ++k) {
        const double f = count == 1 ? 0.0 : double(k) / double(count - 1);
        out.push_back(log_spaced ? lo * std::pow(hi / lo, f) : lo + (hi - lo) * f);
    }
    return out;
}

// A path to a JSON file, or the JSON text itself.
inline nlohmann::json load_json_arg(const std::string& arg, const char* what) {
    std::string text = arg;
    const auto first = arg.find_first_not_of(" \t\n");
    if (first == std::string::npos || arg[first] != '{') {
        std::ifstream f(arg);
        if (!f) throw ValidationError(std::string("cannot read ") + what + " file '" + arg + "'");
        std::stringstream ss;
        ss << f.rdbuf();
        text = ss.str();
    }
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string(what) + ": " + e.what());
    }
}

template <class F>
decltype(auto) with_provider(const ModelParams& m, F&& f) {
    if (const auto* rf = std::get_if<RandomFeatures>(&m)) return f(RFProvider(*rf));
    return f(AtomProvider(atom_spectrum(m)));
}

inline void write_file(const std::string& path, const std::string& text) { detail::write_text(path, text); }

// Sidecar layout shared with write_curves: the command echo sits under "config".
inline void write_meta(const std::string& path, const nlohmann::json& cfg, nlohmann::json extra = nlohmann::json::object()) {
    extra["config"] = cfg;
    write_file(meta_path(path), extra.dump(2) + "\n");
}

struct Common {
    std::string model;
    double lambda = 1e-3;
    double r0 = 1.0;
    std::string times;
    int nodes = 400;
    std::string h1 = "eta_f1_tilde";
    std::string out;
    std::string format;
};

inline std::vector<double> times_or_default(const std::string& spec) {
    return spec.empty() ? default_time_grid() : parse_grid(spec, true, "time");
}

inline nlohmann::json base_config(const std::string& sub, const std::vector<std::string>& argv) {
    return {{"subcommand", sub}, {"argv", argv}};
}

inline int theory(const Common& c, const std::vector<std::string>& argv) {
    const ModelParams m = model_from_json(load_json_arg(c.model, "model"));
    const auto times = times_or_default(c.times);
    EvolutionOptions opt;
    opt.h1_variant = h1_variant_from_string(c.h1);
    CurveResult r = with_provider(m, [&](const auto& p) { return evolution_curves(p, c.lambda, c.r0, times, c.nodes, opt); });
    nlohmann::json cfg = base_config("theory", argv);
    cfg["model"] = to_json(m), cfg["lambda"] = c.lambda, cfg["r0"] = c.r0, cfg["nodes"] = c.nodes;
    cfg["h1_variant"] = c.h1;
    write_curves(r, c.out, c.format, cfg);
    return 0;
}

inline int sweep(const Common& c, const std::string& phi_spec, bool infinite, const std::vector<std::string>& argv) {
    nlohmann::json mj = load_json_arg(c.model, "model");
    // the grid supplies the ratio, so the model may leave it out
    const bool rf = mj.value("model", "") == "random_features";
    if (!mj.contains("phi") && !mj.contains("phi0")) mj[rf ? "phi0" : "phi"] = 1.0;
    const ModelParams base = model_from_json(mj);
    const auto phis = parse_grid(phi_spec, false, "phi");
    for (double v : phis) require(v > 0, "phi values must be positive");
    const auto times = times_or_default(c.times);
    EvolutionOptions opt;
    opt.h1_variant = h1_variant_from_string(c.h1);
    opt.threads = 1;  // the pool runs over phi
    std::vector<std::string> rows(phis.size());
    parallel_for(phis.size(), [&](std::size_t i) {
        const ModelParams m = with_phi(base, phis[i]);
        char buf[256];
        std::string block;
        if (infinite) {
            auto r = with_provider(m, [&](const auto& p) { return infinite_time_errors(p, c.lambda); });
            std::snprintf(buf, sizeof buf, "%.17g,inf,%.17g,%.17g\n", phis[i], r.gen, r.train);
            block = buf;
        } else {
            auto r = with_provider(m, [&](const auto& p) { return evolution_curves(p, c.lambda, c.r0, times, c.nodes, opt); });
            for (std::size_t k = 0; k < times.size(); ++k) {
                std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", phis[i], times[k], r.gen[k], r.train[k]);
                block += buf;
            }
        }
        rows[i] = std::move(block);
    });
    std::string text = "phi,t,gen_error,train_error\n";
    for (const auto& r : rows) text += r;
    write_file(c.out, text);
    nlohmann::json cfg = base_config("sweep", argv);
    cfg["model"] = to_json(base), cfg["phi"] = phis, cfg["lambda"] = c.lambda, cfg["r0"] = c.r0;
    cfg["infinite"] = infinite, cfg["nodes"] = c.nodes, cfg["h1_variant"] = c.h1;
    if (!infinite) cfg["times"] = times;
    write_meta(c.out, cfg);
    return 0;
}

inline int eigdist(const Common& c, const std::string& x_spec, double eps, const std::vector<std::string>& argv) {
    const ModelParams m = model_from_json(load_json_arg(c.model, "model"));
    std::string text = "x,density\n";
    std::vector<double> xs;
    with_provider(m, [&](const auto& p) {
        xs = x_spec.empty() ? parse_grid("1e-3:" + std::to_string(p.spectrum_bound()) + ":400", true, "x")
                            : parse_grid(x_spec, true, "x");
        char buf[128];
        for (double x : xs) {
            std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", x, spectral_density_log(p, x, eps));
            text += buf;
        }
        return 0;
    });
    write_file(c.out, text);
    nlohmann::json cfg = base_config("eigdist", argv);
    cfg["model"] = to_json(m), cfg["x"] = xs, cfg["eps"] = eps;
    write_meta(c.out, cfg);
    return 0;
}

struct SimArgs {
    int d = 2000;
    int seeds = 10;
    std::uint64_t seed = 1;
    double dt = 0;  // 0 selects the exact flow
    std::string out_dir;
};

inline int simulate(const Common& c, const SimArgs& s, const std::vector<std::string>& argv) {
    const ModelParams m = model_from_json(load_json_arg(c.model, "model"));
    require(s.seeds >= 1, "--seeds must be at least 1");
    require(!s.out_dir.empty(), "--out-dir is required");
    const auto times = times_or_default(c.times);
    if (s.dt > 0)
        for (std::size_t k = 1; k < times.size(); ++k) require(times[k] >= times[k - 1], "times must be increasing");
    std::filesystem::create_directories(s.out_dir);
    std::vector<TrajectoryResult> runs(std::size_t(s.seeds));
    parallel_for(runs.size(), [&](std::size_t k) {
        const FiniteInstance inst = sample_instance(m, s.d, c.lambda, s.seed + k);
        const std::uint64_t bseed = s.seed + 1000003 + k;
        if (s.dt > 0) {
            const long steps = long(std::llround(times.back() / s.dt));
            TrajectoryResult gd = gradient_descent_errors(inst, s.dt, steps, c.r0, bseed);
            runs[k] = gd;
        } else {
            runs[k] = exact_flow_errors(inst, times, c.r0, bseed);
        }
    });
    nlohmann::json cfg = base_config("simulate", argv);
    cfg["model"] = to_json(m), cfg["d"] = s.d, cfg["seeds"] = s.seeds, cfg["seed"] = s.seed;
    cfg["lambda"] = c.lambda, cfg["r0"] = c.r0, cfg["dt"] = s.dt, cfg["times"] = times;
    for (const auto& r : runs) {
        const std::string path = (std::filesystem::path(s.out_dir) / ("trajectory_seed" + std::to_string(r.seed) + ".csv")).string();
        write_file(path, trajectory_to_csv(r));
        nlohmann::json meta = cfg;
        meta["seed_run"] = r.seed;
        write_meta(path, meta);
    }
    const TrajectoryAggregate a = aggregate(runs);
    std::string text = "t,gen_mean,gen_std,train_mean,train_std\n";
    char buf[256];
    for (std::size_t k = 0; k < a.times.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", a.times[k], a.gen_mean[k], a.gen_std[k],
                      a.train_mean[k], a.train_std[k]);
        text += buf;
    }
    const std::string agg = (std::filesystem::path(s.out_dir) / "aggregate.csv").string();
    write_file(agg, text);
    write_meta(agg, cfg);
    return 0;
}

struct DataArgs {
    std::string images, labels;
    int n_train = 700;
    int runs = 10;
    double dt = 0.01;
    std::string label_map = "parity";
    std::uint64_t seed = 1;
};

inline std::string find_data_file(const std::string& given, const char* stem) {
    if (!given.empty()) return given;
    const char* dir = std::getenv("DESCENT_DATA_DIR");
    require(dir != nullptr, std::string("no --") + (std::string(stem).find("images") != std::string::npos ? "images" : "labels") +
                                " path and DESCENT_DATA_DIR is unset");
    for (const std::string suffix : {"", ".gz"}) {
        auto p = std::filesystem::path(dir) / (std::string(stem) + suffix);
        if (std::filesystem::exists(p)) return p.string();
    }
    throw ValidationError(std::string("DESCENT_DATA_DIR has no ") + stem + "[.gz]");
}

inline int dataset(const Common& c, const DataArgs& a, const std::vector<std::string>& argv) {
    const std::string img = find_data_file(a.images, "train-images-idx3-ubyte");
    const std::string lab = find_data_file(a.labels, "train-labels-idx1-ubyte");
    require(a.label_map == "parity" || a.label_map == "waist", "--label-map must be parity or waist");
    const RawDataset raw = load_idx_dataset(img, lab);
    const Eigen::MatrixXd X = preprocess(raw);
    const Eigen::VectorXd Y =
        a.label_map == "parity" ? parity_labels(raw.labels) : parity_labels(raw.labels, above_waist);
    const EmpiricalDual dual = estimate_dual(X, Y, a.n_train);
    const DualProvider prov(dual);
    const auto times = times_or_default(c.times.empty() ? "0.1:10000:40" : c.times);
    EvolutionOptions opt;
    opt.h1_variant = h1_variant_from_string(c.h1);
    CurveResult r = evolution_curves(prov, c.lambda, c.r0, times, c.nodes, opt);
    nlohmann::json cfg = base_config("dataset", argv);
    cfg["images"] = img, cfg["labels"] = lab, cfg["n_train"] = a.n_train, cfg["lambda"] = c.lambda;
    cfg["r0"] = c.r0, cfg["label_map"] = a.label_map, cfg["runs"] = a.runs, cfg["dt"] = a.dt, cfg["seed"] = a.seed;
    if (a.runs > 0) {
        require(c.r0 == 0, "empirical runs start from beta = 0; pass --r0 0");
        std::vector<TrajectoryResult> runs(std::size_t(a.runs));
        parallel_for(runs.size(),
                     [&](std::size_t k) { runs[k] = dataset_descent(X, Y, a.n_train, c.lambda, a.dt, times, a.seed + k); });
        const TrajectoryAggregate agg = aggregate(runs);
        std::size_t inside = 0;
        std::string text = "t,gen_mean,gen_std,train_mean,train_std,theory_gen\n";
        char buf[256];
        for (std::size_t k = 0; k < agg.times.size(); ++k) {
            if (std::abs(r.gen[k] - agg.gen_mean[k]) <= 2.0 * agg.gen_std[k]) ++inside;
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", agg.times[k], agg.gen_mean[k],
                          agg.gen_std[k], agg.train_mean[k], agg.train_std[k], r.gen[k]);
            text += buf;
        }
        const std::string emp = c.out + ".empirical.csv";
        write_file(emp, text);
        write_meta(emp, cfg, {{"band_coverage", double(inside) / double(agg.times.size())}});
    }
    write_curves(r, c.out, c.format, cfg);
    return 0;
}

inline int pencil(const std::string& spec, long mc_seed, const std::string& out, const std::vector<std::string>& argv) {
    const nlohmann::json sj = load_json_arg(spec, "pencil spec");
    const PencilSpec s = pencil_from_json(sj);
    nlohmann::json j = to_json(mc_seed >= 0 ? sample_finite_pencil(s, std::uint64_t(mc_seed)) : solve_pencil(s));
    j["mode"] = mc_seed >= 0 ? "finite_sample" : "fixed_point";
    j["config"] = base_config("pencil", argv);
    j["config"]["spec"] = sj;
    if (mc_seed >= 0) j["config"]["mc_seed"] = mc_seed;
    if (out.empty())
        std::cout << j.dump(2) << "\n";
    else
        write_file(out, j.dump(2) + "\n");
    return 0;
}

}  // namespace cli

// Exit codes: 0 success, 1 bad input, 2 numerical failure.
inline int run_command(const std::vector<std::string>& args, std::ostream& err = std::cerr) {
    CLI::App app{"Gradient-flow learning curves for the Gaussian covariate model"};
    app.require_subcommand(1);
    cli::Common c;
    auto common = [&c](CLI::App* s, bool curves) {
        s->add_option("--model", c.model, "model JSON file or inline JSON")->required();
        s->add_option("--lambda", c.lambda, "ridge parameter")->capture_default_str();
        s->add_option("--out", c.out, "output path")->required();
        if (!curves) return;
        s->add_option("--r0", c.r0, "initialization scale")->capture_default_str();
        s->add_option("--times", c.times, "log time grid lo:hi:count (default 1e-2:1e6:60)");
        s->add_option("--nodes", c.nodes, "contour nodes per side")->capture_default_str();
        s->add_option("--h1-variant", c.h1, "eta_f1_tilde or eta_f1")->capture_default_str();
    };

    auto* th = app.add_subcommand("theory", "learning curves from the contour formulas");
    common(th, true);
    th->add_option("--format", c.format, "csv or json (default from extension)");

    auto* sw = app.add_subcommand("sweep", "long-format (phi, t) grid");
    common(sw, true);
    std::string phi_spec;
    bool infinite = false;
    sw->add_option("--phi", phi_spec, "linear grid lo:hi:count over n/d (phi0 for random features)")->required();
    sw->add_flag("--infinite", infinite, "infinite-time errors only");

    auto* ed = app.add_subcommand("eigdist", "log-scale eigenvalue density");
    common(ed, false);
    std::string x_spec;
    double eps = 1e-6;
    ed->add_option("--x", x_spec, "log grid lo:hi:count");
    ed->add_option("--eps", eps, "imaginary offset")->capture_default_str();

    auto* si = app.add_subcommand("simulate", "finite-d Monte Carlo trajectories");
    cli::SimArgs sa;
    si->add_option("--model", c.model, "model JSON file or inline JSON")->required();
    si->add_option("--lambda", c.lambda)->capture_default_str();
    si->add_option("--r0", c.r0)->capture_default_str();
    si->add_option("--times", c.times, "log time grid lo:hi:count");
    si->add_option("--d", sa.d)->capture_default_str();
    si->add_option("--seeds", sa.seeds)->capture_default_str();
    si->add_option("--seed", sa.seed, "first seed")->capture_default_str();
    si->add_option("--dt", sa.dt, "gradient-descent step; 0 uses the exact flow")->capture_default_str();
    si->add_option("--out-dir", sa.out_dir)->required();

    auto* ds = app.add_subcommand("dataset", "theory from an IDX dataset, optionally against descent runs");
    cli::DataArgs da;
    ds->add_option("--lambda", c.lambda)->capture_default_str();
    double ds_r0 = 0.0;  // descent runs start from beta = 0
    ds->add_option("--r0", ds_r0)->capture_default_str();
    ds->add_option("--times", c.times, "log time grid lo:hi:count (default 0.1:1e4:40)");
    ds->add_option("--nodes", c.nodes)->capture_default_str();
    ds->add_option("--h1-variant", c.h1)->capture_default_str();
    ds->add_option("--out", c.out)->required();
    ds->add_option("--format", c.format);
    ds->add_option("--images", da.images, "IDX image file (default from DESCENT_DATA_DIR)");
    ds->add_option("--labels", da.labels, "IDX label file (default from DESCENT_DATA_DIR)");
    ds->add_option("--n-train", da.n_train)->capture_default_str();
    ds->add_option("--runs", da.runs, "gradient-descent runs; 0 skips")->capture_default_str();
    ds->add_option("--dt", da.dt)->capture_default_str();
    ds->add_option("--label-map", da.label_map, "parity or waist")->capture_default_str();
    ds->add_option("--seed", da.seed)->capture_default_str();

    auto* pe = app.add_subcommand("pencil", "solve a linear pencil");
    std::string spec, pout;
    long mc_seed = -1;
    pe->add_option("--spec", spec, "pencil JSON file or inline JSON")->required();
    pe->add_option("--mc-seed", mc_seed, "sample one finite matrix with this seed instead of the fixed point");
    pe->add_option("--out", pout, "output JSON (default stdout)");

    std::vector<std::string> argv_store{"descent"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& a : argv_store) argv.push_back(a.data());
    try {
        app.parse(int(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    try {
        if (*th) return cli::theory(c, args);
        if (*sw) return cli::sweep(c, phi_spec, infinite, args);
        if (*ed) return cli::eigdist(c, x_spec, eps, args);
        if (*si) return cli::simulate(c, sa, args);
        if (*ds) {
            c.r0 = ds_r0;
            return cli::dataset(c, da, args);
        }
        if (*pe) return cli::pencil(spec, mc_seed, pout, args);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << "\n";
        return 2;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace descent
