#pragma once

#include <string>
#include <vector>

#include "ioncav/config.hpp"
#include "ioncav/errors.hpp"

namespace ioncav {

/// A module error annotated with the sweep point that raised it.
class PointError : public Error {
public:
    PointError(std::size_t index, double eta_eff, const std::string& what)
        : Error(what), index_(index), eta_eff_(eta_eff) {}

    std::size_t index() const noexcept { return index_; }
    double eta_eff() const noexcept { return eta_eff_; }

private:
    std::size_t index_;
    double eta_eff_;
};

const std::vector<std::string>& subcommands();

/// Short class name of a module error, e.g. "NoSteadyState".
std::string error_name(const std::exception& e);

/// Runs one subcommand over every sweep point of `config`, writes its CSV
/// files plus manifest.json into `out_dir` and returns the written paths.
std::vector<std::string> run_subcommand(const std::string& name, const RunConfig& config,
                                        const std::string& out_dir);

/// Seed of sweep point `index`, derived from the master seed.
std::uint64_t point_seed(std::uint64_t seed, std::size_t index);

}  // namespace ioncav
