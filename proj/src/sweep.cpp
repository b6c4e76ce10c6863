#include "ioncav/sweep.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "ioncav/gaussian.hpp"
#include "ioncav/manifest.hpp"
#include "ioncav/metastability.hpp"
#include "ioncav/parallel.hpp"
#include "ioncav/qoracle.hpp"
#include "ioncav/sde.hpp"
#include "ioncav/semiclassical.hpp"

namespace fs = std::filesystem;

namespace ioncav {

namespace {

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::string join(const std::vector<std::string>& cells) {
    std::string s;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        s += (i ? "," : "") + cells[i];
    }
    return s;
}

struct Table {
    std::vector<std::string> units;  // comment lines
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

void write_table(const fs::path& path, const Table& t, const std::string& hash) {
    std::ofstream os(path, std::ios::binary);
    if (!os) {
        throw Error("cannot write '" + path.string() + "'");
    }
    os << "# manifest: manifest.json config_hash=" << hash << "\n";
    os << "# units: omega = 1; rates in omega, times in 1/omega, x in x_omega, p in p_omega\n";
    for (const auto& u : t.units) {
        os << "# " << u << "\n";
    }
    os << join(t.header) << "\n";
    for (const auto& r : t.rows) {
        os << join(r) << "\n";
    }
}

// Runs `fn` for every point on the worker pool; rows come back in point order.
using PointFn = std::function<std::vector<std::vector<std::string>>(std::size_t, const ModelParams&, unsigned)>;

std::vector<std::vector<std::string>> map_points(const RunConfig& c, const PointFn& fn,
                                                 std::size_t n_status_cols) {
    const auto pts = c.points();
    const auto etas = c.eta_eff_values();
    std::vector<std::vector<std::vector<std::string>>> rows(pts.size());
    const unsigned threads = c.options.threads;
    const bool across = pts.size() > 1 && threads > 1;
    const unsigned inner = across ? 1u : threads;
    parallel_chunks(pts.size(), across ? threads : 1u, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            try {
                rows[i] = fn(i, pts[i], inner);
            } catch (const std::exception& e) {
                if (!c.options.record_errors) {
                    throw PointError(i, etas[i],
                                     "sweep point " + std::to_string(i) + " (eta_eff = " + num(etas[i]) +
                                         "): " + error_name(e) + ": " + e.what());
                }
                std::vector<std::string> r{num(etas[i])};
                r.resize(n_status_cols, "nan");
                r.back() = error_name(e);
                rows[i] = {r};
            }
        }
    });
    std::vector<std::vector<std::string>> flat;
    for (auto& r : rows) {
        for (auto& x : r) {
            flat.push_back(std::move(x));
        }
    }
    return flat;
}

EvolveOptions evolve_options(const RunOptions& o, unsigned threads) {
    EvolveOptions e;
    e.dt = o.dt;
    e.integrator = o.integrator;
    e.threads = threads;
    e.escape = o.escape_policy;
    e.escape_radius_factor = o.escape_radius;
    return e;
}

SteadyStateOptions steady_options(const RunOptions& o, unsigned threads) {
    SteadyStateOptions s;
    s.evolve = evolve_options(o, threads);
    s.window = o.window;
    s.t_cap = o.t_cap;
    s.min_time = o.min_time;
    return s;
}

std::vector<std::string> estimate_cells(const ObservableRecord& r) {
    return {num(r.n_cav.value), num(r.n_cav.stderr_), num(r.x_sq.value), num(r.x_sq.stderr_),
            num(r.p_sq.value),  num(r.p_sq.stderr_),  num(r.delta_eff_mean.value),
            num(r.delta_eff_mean.stderr_)};
}

std::vector<double> marker_grid(const RunOptions& o) {
    return linspace(o.marker_eta_max / static_cast<double>(o.marker_points), o.marker_eta_max,
                    o.marker_points);
}

Table semiclassical_table(const RunConfig& c) {
    Table t;
    t.units = {"x_bar in x_omega; photons dimensionless; v_total and curvature in hbar omega (per x_omega^2)",
               "stability: local minimum of the total effective potential only"};
    t.header = {"eta_eff", "branch", "x_bar", "photons", "v_total", "curvature", "stable", "marginal"};
    const auto etas = c.eta_eff_values();
    t.rows = map_points(c, [&](std::size_t i, const ModelParams& q, unsigned) {
        std::vector<std::vector<std::string>> rows;
        const auto br = find_equilibria(q);
        for (std::size_t k = 0; k < br.size(); ++k) {
            rows.push_back({num(etas[i]), std::to_string(k), num(br[k].x_bar), num(br[k].photons),
                            num(br[k].v_total), num(br[k].curvature), br[k].stable ? "1" : "0",
                            br[k].marginal ? "1" : "0"});
        }
        return rows;
    }, 8);
    return t;
}

Table markers_table(const RunConfig& c) {
    Table t;
    t.units = {"bistability markers in eta_eff"};
    t.header = {"present", "eta_eff_low", "eta_eff_gm", "eta_eff_high"};
    const auto m = bistability_markers(c.base, marker_grid(c.options));
    if (m) {
        t.rows.push_back({"1", num(m->eta_eff_low), num(m->eta_eff_gm), num(m->eta_eff_high)});
    } else {
        t.rows.push_back({"0", "nan", "nan", "nan"});
    }
    return t;
}

Table gaussian_table(const RunConfig& c) {
    Table t;
    t.units = {"localized Gaussian approximation per semiclassical branch; errors are zero by construction"};
    t.header = {"eta_eff", "branch", "x_bar", "potential_stable", "gaussian_stable", "n_cav", "x_sq", "p_sq",
                "delta_eff", "status"};
    const auto etas = c.eta_eff_values();
    GaussianOptions go;
    go.self_consistent = c.options.self_consistent;
    go.include_gamma = c.options.include_gamma;
    t.rows = map_points(c, [&](std::size_t i, const ModelParams& q, unsigned) {
        std::vector<std::vector<std::string>> rows;
        const auto br = find_equilibria(q);
        for (std::size_t k = 0; k < br.size(); ++k) {
            const auto model = build_fluctuation_model(br[k], q, go);
            std::vector<std::string> r{num(etas[i]), std::to_string(k), num(br[k].x_bar),
                                       br[k].stable ? "1" : "0", gaussian_stable(model) ? "1" : "0"};
            try {
                const auto s = gaussian_steady_state(br[k], q, go);
                const auto o = gaussian_observables(s, q);
                r.insert(r.end(), {num(o.n_cav.value), num(o.x_sq.value), num(o.p_sq.value),
                                   num(o.delta_eff_mean.value), "ok"});
            } catch (const NoSteadyState&) {
                r.insert(r.end(), {"nan", "nan", "nan", "nan", "NoSteadyState"});
            }
            rows.push_back(r);
        }
        return rows;
    }, 10);
    return t;
}

Table sweep_table(const RunConfig& c, const fs::path& out_dir, std::vector<std::string>& extra) {
    Table t;
    t.units = {"truncated Wigner steady state; *_err are standard errors; convergence_time in 1/omega",
               "n_escaped: trajectories removed under escape_policy = condition"};
    t.header = {"eta_eff", "n_cav", "n_cav_err", "x_sq", "x_sq_err", "p_sq", "p_sq_err", "delta_eff",
                "delta_eff_err", "convergence_time", "n_escaped", "status"};
    const auto etas = c.eta_eff_values();
    if (c.options.dump_ensemble) {
        fs::create_directories(out_dir / "ensembles");
        for (std::size_t i = 0; i < etas.size(); ++i) {
            extra.push_back((fs::path("ensembles") / ("point_" + std::to_string(i) + ".txt")).string());
        }
    }
    t.rows = map_points(c, [&](std::size_t i, const ModelParams& q, unsigned threads) {
        const auto r = steady_state_ensemble(q, c.options.n_traj, point_seed(c.options.seed, i),
                                             steady_options(c.options, threads));
        if (c.options.dump_ensemble) {
            std::ofstream os(out_dir / "ensembles" / ("point_" + std::to_string(i) + ".txt"));
            write_ensemble(os, r.ensemble);
        }
        std::vector<std::string> row{num(etas[i])};
        const auto cells = estimate_cells(r.observables);
        row.insert(row.end(), cells.begin(), cells.end());
        row.push_back(num(r.convergence_time));
        row.push_back(std::to_string(r.ensemble.n_escaped()));
        row.push_back("ok");
        return std::vector<std::vector<std::string>>{row};
    }, 12);
    return t;
}

Table rates_table(const RunConfig& c) {
    Table t;
    t.units = {"two-state rates from mean first passage times; band_* span gamma_t over n_sigmas",
               "gamma_1 out of the centre state, gamma_2 out of the side states"};
    t.header = {"eta_eff", "gamma_1", "gamma_1_err", "gamma_2", "gamma_2_err", "gamma_t", "gamma_t_err",
                "band_low", "band_high", "timeout_fraction", "regions_overlap", "status"};
    const auto etas = c.eta_eff_values();
    if (!c.options.ensemble_in.empty() && etas.size() != 1) {
        throw ConfigError("ensemble_in requires a single sweep point");
    }
    t.rows = map_points(c, [&](std::size_t i, const ModelParams& q, unsigned threads) {
        Ensemble steady;
        if (!c.options.ensemble_in.empty()) {
            std::ifstream is(c.options.ensemble_in);
            if (!is) {
                throw ConfigError("cannot open ensemble_in '" + c.options.ensemble_in + "'");
            }
            steady = read_ensemble(is);
        } else {
            steady = steady_state_ensemble(q, c.options.n_traj, point_seed(c.options.seed, i),
                                           steady_options(c.options, threads))
                         .ensemble;
        }
        RateOptions ro;
        ro.n_traj = c.options.mfpt_n_traj;
        ro.n_sigmas = c.options.n_sigmas;
        ro.cavity_membership = c.options.cavity_membership;
        ro.passage.evolve = evolve_options(c.options, threads);
        ro.passage.t_cap = c.options.mfpt_t_cap;
        const auto a = compute_rates(q, steady, point_seed(c.options.seed, i) ^ 0x5bd1e995u, ro);
        const auto& r = a.rates;
        return std::vector<std::vector<std::string>>{
            {num(etas[i]), num(r.gamma_1), num(r.gamma_1_err), num(r.gamma_2), num(r.gamma_2_err),
             num(r.gamma_t), num(r.gamma_t_err), num(r.band_low), num(r.band_high), num(r.timeout_fraction),
             a.regions_overlap ? "1" : "0", "ok"}};
    }, 12);
    return t;
}

Table oracle_table(const RunConfig& c) {
    Table t;
    t.units = {"TWA versus truncated master-equation steady state; pct_err = 100 (twa - oracle) / oracle",
               "top_cav/top_ion: populations of the two highest retained Fock levels"};
    t.header = {"eta_eff", "twa_n_cav", "twa_n_cav_err", "oracle_n_cav", "pct_err_n_cav",
                "twa_x_sq", "twa_x_sq_err", "oracle_x_sq", "pct_err_x_sq",
                "twa_p_sq", "twa_p_sq_err", "oracle_p_sq", "pct_err_p_sq",
                "twa_delta_eff", "twa_delta_eff_err", "oracle_delta_eff", "pct_err_delta_eff",
                "top_cav", "top_ion", "status"};
    const auto etas = c.eta_eff_values();
    TruncationSpec spec;
    spec.n_cav_max = c.options.n_cav_max;
    spec.n_ion_max = c.options.n_ion_max;
    spec.even_parity = c.options.even_parity;
    OracleOptions oo;
    oo.method = c.options.oracle_method;
    t.rows = map_points(c, [&](std::size_t i, const ModelParams& q, unsigned threads) {
        const auto twa = steady_state_ensemble(q, c.options.n_traj, point_seed(c.options.seed, i),
                                               steady_options(c.options, threads));
        const auto orc = evolve_to_steady(spec, q, oo);
        const Estimate tw[4] = {twa.observables.n_cav, twa.observables.x_sq, twa.observables.p_sq,
                                twa.observables.delta_eff_mean};
        const Estimate oc[4] = {orc.observables.n_cav, orc.observables.x_sq, orc.observables.p_sq,
                                orc.observables.delta_eff_mean};
        std::vector<std::string> row{num(etas[i])};
        for (int k = 0; k < 4; ++k) {
            row.push_back(num(tw[k].value));
            row.push_back(num(tw[k].stderr_));
            row.push_back(num(oc[k].value));
            row.push_back(num(100.0 * (tw[k].value - oc[k].value) / oc[k].value));
        }
        row.push_back(num(orc.truncation.top_cav));
        row.push_back(num(orc.truncation.top_ion));
        row.push_back("ok");
        return std::vector<std::vector<std::string>>{row};
    }, 20);
    return t;
}

}  // namespace

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"semiclassical", "gaussian", "sweep", "rates",
                                                "oracle-compare"};
    return names;
}

std::string error_name(const std::exception& e) {
    if (dynamic_cast<const NoSteadyState*>(&e)) return "NoSteadyState";
    if (dynamic_cast<const NoConvergence*>(&e)) return "NoConvergence";
    if (dynamic_cast<const NonFiniteError*>(&e)) return "NonFinite";
    if (dynamic_cast<const DegenerateComponent*>(&e)) return "DegenerateComponent";
    if (dynamic_cast<const TimeoutError*>(&e)) return "Timeout";
    if (dynamic_cast<const TruncationInadequate*>(&e)) return "TruncationInadequate";
    if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
    if (dynamic_cast<const std::invalid_argument*>(&e)) return "InvalidArgument";
    return "Error";
}

std::uint64_t point_seed(std::uint64_t seed, std::size_t index) {
    // splitmix64 finalizer of (seed, index)
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(index) + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

std::vector<std::string> run_subcommand(const std::string& name, const RunConfig& config,
                                        const std::string& out_dir) {
    const auto start = std::chrono::steady_clock::now();
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    const std::string hash = config_hash(config);
    std::vector<std::pair<std::string, Table>> tables;
    std::vector<std::string> extra;
    if (name == "semiclassical") {
        tables.emplace_back("semiclassical.csv", semiclassical_table(config));
        tables.emplace_back("markers.csv", markers_table(config));
    } else if (name == "gaussian") {
        tables.emplace_back("gaussian.csv", gaussian_table(config));
    } else if (name == "sweep") {
        tables.emplace_back("sweep.csv", sweep_table(config, dir, extra));
    } else if (name == "rates") {
        tables.emplace_back("rates.csv", rates_table(config));
    } else if (name == "oracle-compare") {
        tables.emplace_back("oracle_compare.csv", oracle_table(config));
    } else {
        throw ConfigError("unknown subcommand '" + name + "'");
    }
    RunManifest m;
    m.subcommand = name;
    m.config = config;
    for (const auto& [file, table] : tables) {
        write_table(dir / file, table, hash);
        m.outputs.push_back(file);
    }
    m.outputs.insert(m.outputs.end(), extra.begin(), extra.end());
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ofstream(dir / "manifest.json") << m.to_json();
    std::vector<std::string> written;
    for (const auto& o : m.outputs) {
        written.push_back((dir / o).string());
    }
    written.push_back((dir / "manifest.json").string());
    return written;
}

}  // namespace ioncav
