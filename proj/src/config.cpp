#include "ioncav/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "ioncav/errors.hpp"
#include "ioncav/semiclassical.hpp"

namespace ioncav {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (trim(v.substr(pos)).empty() && std::isfinite(d)) {
            return d;
        }
    } catch (const std::exception&) {
    }
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        if (!v.empty() && v[0] != '-') {
            const unsigned long long u = std::stoull(v, &pos);
            if (trim(v.substr(pos)).empty()) {
                return u;
            }
        }
    } catch (const std::exception&) {
    }
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no") {
        return false;
    }
    throw ConfigError("config key '" + key + "': expected true|false, got '" + v + "'");
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        s += (i ? "," : "") + fmt(v[i]);
    }
    return s;
}

}  // namespace

std::vector<double> parse_value_list(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    std::vector<double> out;
    if (v.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(v);
        std::string item;
        while (std::getline(ss, item, ':')) {
            parts.push_back(trim(item));
        }
        if (parts.size() != 3) {
            throw ConfigError("config key '" + key + "': range must be lo:hi:n");
        }
        const double lo = to_double(key, parts[0]);
        const double hi = to_double(key, parts[1]);
        const auto n = to_uint(key, parts[2]);
        if (n < 1 || hi < lo) {
            throw ConfigError("config key '" + key + "': range needs n >= 1 and hi >= lo");
        }
        return linspace(lo, hi, n);
    }
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(to_double(key, trim(item)));
    }
    if (out.empty()) {
        throw ConfigError("config key '" + key + "': empty value");
    }
    return out;
}

RunConfig parse_config_text(const std::string& text) {
    std::map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw ConfigError("config line " + std::to_string(lineno) + ": empty key or value");
        }
        if (!kv.emplace(key, value).second) {
            throw ConfigError("config key '" + key + "' given twice");
        }
    }

    RunConfig c;
    std::set<std::string> used;
    auto take = [&](const std::string& k) -> const std::string* {
        auto it = kv.find(k);
        if (it == kv.end()) {
            return nullptr;
        }
        used.insert(k);
        return &it->second;
    };
    auto num = [&](const std::string& k, double& dst) {
        if (auto v = take(k)) dst = to_double(k, *v);
    };
    auto uint = [&](const std::string& k, auto& dst) {
        if (auto v = take(k)) dst = static_cast<std::remove_reference_t<decltype(dst)>>(to_uint(k, *v));
    };
    auto flag = [&](const std::string& k, bool& dst) {
        if (auto v = take(k)) dst = to_bool(k, *v);
    };
    auto exactly_one = [&](const std::string& a, const std::string& b) {
        const bool ha = kv.count(a) > 0, hb = kv.count(b) > 0;
        if (ha == hb) {
            throw ConfigError("config: exactly one of '" + a + "' or '" + b + "' must be given");
        }
        return ha ? a : b;
    };

    ModelParams& p = c.base;
    num("omega", p.omega);
    const std::string* kappa = take("kappa_ratio");
    if (!kappa) {
        throw ConfigError("config: missing required key 'kappa_ratio'");
    }
    p.kappa = to_double("kappa_ratio", *kappa);
    num("delta_c_ratio", p.delta_c);
    num("gamma_ratio", p.gamma);
    const std::string* xeq = take("xeq_scale");
    if (!xeq) {
        throw ConfigError("config: missing required key 'xeq_scale'");
    }
    p.xeq = to_double("xeq_scale", *xeq);
    if (exactly_one("u0_ratio", "cooperativity") == "u0_ratio") {
        p.u0 = to_double("u0_ratio", *take("u0_ratio"));
    } else {
        p.u0 = to_double("cooperativity", *take("cooperativity")) * p.kappa;
    }
    const std::string pump = exactly_one("eta_eff", "eta_ratio");
    c.pump_is_eta_eff = pump == "eta_eff";
    c.pump_values = parse_value_list(pump, *take(pump));
    for (double v : c.pump_values) {
        if (v < 0.0) {
            throw ConfigError("config key '" + pump + "': values must be >= 0");
        }
    }
    try {
        p.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    RunOptions& o = c.options;
    uint("seed", o.seed);
    uint("n_traj", o.n_traj);
    num("dt", o.dt);
    if (auto v = take("integrator")) {
        try {
            o.integrator = parse_integrator(*v);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config key 'integrator': ") + e.what());
        }
    }
    uint("threads", o.threads);
    if (auto v = take("escape_policy")) {
        try {
            o.escape_policy = parse_escape_policy(*v);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config key 'escape_policy': ") + e.what());
        }
    }
    num("escape_radius", o.escape_radius);
    num("t_cap", o.t_cap);
    num("window", o.window);
    num("min_time", o.min_time);
    flag("dump_ensemble", o.dump_ensemble);
    flag("self_consistent", o.self_consistent);
    flag("include_gamma", o.include_gamma);
    uint("marker_points", o.marker_points);
    num("marker_eta_max", o.marker_eta_max);
    uint("n_cav_max", o.n_cav_max);
    uint("n_ion_max", o.n_ion_max);
    flag("even_parity", o.even_parity);
    if (auto v = take("oracle_method")) {
        if (*v == "krylov") {
            o.oracle_method = SteadyMethod::Krylov;
        } else if (*v == "time") {
            o.oracle_method = SteadyMethod::TimeEvolution;
        } else {
            throw ConfigError("config key 'oracle_method': expected krylov|time, got '" + *v + "'");
        }
    }
    uint("mfpt_n_traj", o.mfpt_n_traj);
    num("mfpt_t_cap", o.mfpt_t_cap);
    if (auto v = take("n_sigmas")) {
        o.n_sigmas = parse_value_list("n_sigmas", *v);
    }
    flag("cavity_membership", o.cavity_membership);
    if (auto v = take("ensemble_in")) {
        o.ensemble_in = *v;
    }
    flag("record_errors", o.record_errors);

    for (const auto& [k, v] : kv) {
        if (!used.count(k)) {
            throw ConfigError("config: unknown key '" + k + "'");
        }
    }
    if (o.n_traj < 1 || o.mfpt_n_traj < 1) {
        throw ConfigError("config: n_traj and mfpt_n_traj must be >= 1");
    }
    if (o.threads < 1) {
        throw ConfigError("config key 'threads': must be >= 1");
    }
    if (o.dt < 0.0 || o.t_cap <= 0.0 || o.mfpt_t_cap <= 0.0 || o.escape_radius <= 1.0) {
        throw ConfigError("config: dt must be >= 0, caps > 0 and escape_radius > 1");
    }
    if (std::find(o.n_sigmas.begin(), o.n_sigmas.end(), 3.0) == o.n_sigmas.end()) {
        throw ConfigError("config key 'n_sigmas': must contain 3");
    }
    return c;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file '" + path + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    const bool is_json = path.size() > 5 && path.substr(path.size() - 5) == ".json";
    if (!is_json) {
        return parse_config_text(text);
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("manifest '" + path + "': " + e.what());
    }
    if (!j.contains("config") || !j["config"].is_object()) {
        throw ConfigError("manifest '" + path + "' has no 'config' object");
    }
    std::string rebuilt;
    for (const auto& [k, v] : j["config"].items()) {
        rebuilt += k + " = " + v.get<std::string>() + "\n";
    }
    return parse_config_text(rebuilt);
}

std::vector<ModelParams> RunConfig::points() const {
    std::vector<ModelParams> out;
    for (double v : pump_values) {
        ModelParams q = base;
        q.eta = pump_is_eta_eff ? eta_from_eta_eff(v, base) : v;
        out.push_back(q);
    }
    return out;
}

std::vector<double> RunConfig::eta_eff_values() const {
    std::vector<double> out;
    for (const auto& q : points()) {
        out.push_back(pump_is_eta_eff ? 0.0 : eta_eff(q));
    }
    if (pump_is_eta_eff) {
        out = pump_values;
    }
    return out;
}

std::map<std::string, std::string> RunConfig::resolved() const {
    const RunOptions& o = options;
    std::map<std::string, std::string> m;
    m["omega"] = fmt(base.omega);
    m["kappa_ratio"] = fmt(base.kappa);
    m["delta_c_ratio"] = fmt(base.delta_c);
    m["u0_ratio"] = fmt(base.u0);
    m["gamma_ratio"] = fmt(base.gamma);
    m["xeq_scale"] = fmt(base.xeq);
    m[pump_is_eta_eff ? "eta_eff" : "eta_ratio"] = join(pump_values);
    m["seed"] = std::to_string(o.seed);
    m["n_traj"] = std::to_string(o.n_traj);
    m["dt"] = fmt(o.dt);
    m["integrator"] = to_string(o.integrator);
    m["threads"] = std::to_string(o.threads);
    m["escape_policy"] = to_string(o.escape_policy);
    m["escape_radius"] = fmt(o.escape_radius);
    m["t_cap"] = fmt(o.t_cap);
    m["window"] = fmt(o.window);
    m["min_time"] = fmt(o.min_time);
    m["dump_ensemble"] = o.dump_ensemble ? "true" : "false";
    m["self_consistent"] = o.self_consistent ? "true" : "false";
    m["include_gamma"] = o.include_gamma ? "true" : "false";
    m["marker_points"] = std::to_string(o.marker_points);
    m["marker_eta_max"] = fmt(o.marker_eta_max);
    m["n_cav_max"] = std::to_string(o.n_cav_max);
    m["n_ion_max"] = std::to_string(o.n_ion_max);
    m["even_parity"] = o.even_parity ? "true" : "false";
    m["oracle_method"] = o.oracle_method == SteadyMethod::Krylov ? "krylov" : "time";
    m["mfpt_n_traj"] = std::to_string(o.mfpt_n_traj);
    m["mfpt_t_cap"] = fmt(o.mfpt_t_cap);
    m["n_sigmas"] = join(o.n_sigmas);
    m["cavity_membership"] = o.cavity_membership ? "true" : "false";
    if (!o.ensemble_in.empty()) {
        m["ensemble_in"] = o.ensemble_in;
    }
    m["record_errors"] = o.record_errors ? "true" : "false";
    return m;
}

}  // namespace ioncav
