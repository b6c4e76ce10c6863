#include "ioncav/manifest.hpp"

#include <cstdio>

#include <json.hpp>
#include <openssl/sha.h>

namespace ioncav {

bool is_scheduling_key(const std::string& key) { return key == "threads"; }

std::string canonical_config_text(const RunConfig& c) {
    std::string s;
    for (const auto& [k, v] : c.resolved()) {
        if (!is_scheduling_key(k)) {
            s += k + " = " + v + "\n";
        }
    }
    return s;
}

std::string git_blob_hash(const std::string& content) {
    std::string blob = "blob " + std::to_string(content.size());
    blob.push_back('\0');
    blob += content;
    unsigned char digest[SHA_DIGEST_LENGTH];
    SHA1(reinterpret_cast<const unsigned char*>(blob.data()), blob.size(), digest);
    std::string hex;
    char buf[3];
    for (unsigned char b : digest) {
        std::snprintf(buf, sizeof buf, "%02x", b);
        hex += buf;
    }
    return hex;
}

std::string config_hash(const RunConfig& c) { return git_blob_hash(canonical_config_text(c)); }

std::string RunManifest::to_json() const {
    nlohmann::ordered_json j;
    j["subcommand"] = subcommand;
    j["config_hash"] = config_hash(config);
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& [k, v] : config.resolved()) {
        cfg[k] = v;
    }
    j["config"] = cfg;
    j["seed"] = config.options.seed;
    j["dt"] = config.options.dt;
    j["n_traj"] = config.options.n_traj;
    j["integrator"] = to_string(config.options.integrator);
    j["outputs"] = outputs;
    j["wall_clock_seconds"] = wall_seconds;
    return j.dump(2) + "\n";
}

}  // namespace ioncav
