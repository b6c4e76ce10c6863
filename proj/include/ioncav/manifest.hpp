#pragma once

#include <map>
#include <string>
#include <vector>

#include "ioncav/config.hpp"

namespace ioncav {

/// Settings that never influence results and are therefore left out of the hash.
bool is_scheduling_key(const std::string& key);

/// "key = value" lines of the resolved configuration, sorted by key.
std::string canonical_config_text(const RunConfig& c);

/// Git blob hash (SHA-1 of "blob <size>\0" + content) as lowercase hex.
std::string git_blob_hash(const std::string& content);

/// Hash of the canonical configuration, excluding scheduling keys.
std::string config_hash(const RunConfig& c);

struct RunManifest {
    std::string subcommand;
    RunConfig config;
    std::vector<std::string> outputs;
    double wall_seconds = 0.0;

    std::string to_json() const;
};

}  // namespace ioncav
