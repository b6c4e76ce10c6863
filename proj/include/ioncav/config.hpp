#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ioncav/model.hpp"
#include "ioncav/qoracle.hpp"
#include "ioncav/sde.hpp"

namespace ioncav {

/// Run options shared by the subcommands; every field has a config key of the
/// same name.
struct RunOptions {
    std::uint64_t seed = 1;
    std::size_t n_traj = 10000;
    double dt = 0.0;  ///< 0 selects the default step
    Integrator integrator = Integrator::Taylor15;
    unsigned threads = 1;
    EscapePolicy escape_policy = EscapePolicy::Abort;
    double escape_radius = 2.5;  ///< in units of xeq

    double t_cap = 2000.0;
    double window = 0.0;
    double min_time = 0.0;
    bool dump_ensemble = false;

    bool self_consistent = false;
    bool include_gamma = true;
    std::size_t marker_points = 400;  ///< eta_eff grid used to locate the markers
    double marker_eta_max = 3.0;

    int n_cav_max = 12;
    int n_ion_max = 24;
    bool even_parity = false;
    SteadyMethod oracle_method = SteadyMethod::Krylov;

    std::size_t mfpt_n_traj = 2000;
    double mfpt_t_cap = 1e5;
    std::vector<double> n_sigmas{2.5, 3.0, 3.5};
    bool cavity_membership = false;
    std::string ensemble_in;
    bool record_errors = false;  ///< write a status column instead of aborting on a failed point
};

struct RunConfig {
    ModelParams base;                    ///< pump left at zero; see points()
    std::vector<double> pump_values;     ///< eta_eff or eta_ratio values
    bool pump_is_eta_eff = true;
    RunOptions options;

    /// Parameter set of every sweep point, in order.
    std::vector<ModelParams> points() const;
    std::vector<double> eta_eff_values() const;

    /// Canonical "key = value" text of every resolved setting, sorted by key.
    std::map<std::string, std::string> resolved() const;
};

/// Parses "key = value" lines ('#' starts a comment). Pump values accept a
/// single number, a comma list, or lo:hi:n. Throws ConfigError naming the key.
RunConfig parse_config_text(const std::string& text);

/// Reads a config file, or the "config" object of a manifest (*.json).
RunConfig parse_config(const std::string& path);

/// Parses one value list (a number, a comma list, or lo:hi:n).
std::vector<double> parse_value_list(const std::string& key, const std::string& value);

}  // namespace ioncav
