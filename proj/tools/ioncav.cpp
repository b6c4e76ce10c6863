#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ioncav/config.hpp"
#include "ioncav/sweep.hpp"

namespace {

struct Overrides {
    std::string config;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n_traj;
    std::optional<double> dt;
    std::optional<std::string> integrator;
    std::optional<unsigned> threads;
};

void add_common(CLI::App* sub, Overrides& o) {
    sub->add_option("--config", o.config, "config file (key = value) or a manifest.json")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory")->required();
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--n-traj", o.n_traj, "trajectories per sweep point");
    sub->add_option("--dt", o.dt, "integration step in 1/omega");
    sub->add_option("--integrator", o.integrator, "taylor15|euler")
        ->check(CLI::IsMember({"taylor15", "euler"}));
    sub->add_option("--threads", o.threads, "worker threads (results do not depend on it)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ion-cavity phase-space simulator"};
    app.require_subcommand(1);
    Overrides o;
    for (const auto& name : ioncav::subcommands()) {
        add_common(app.add_subcommand(name, "run the " + name + " pipeline"), o);
    }
    CLI11_PARSE(app, argc, argv);
    const std::string name = app.get_subcommands().front()->get_name();

    try {
        ioncav::RunConfig cfg = ioncav::parse_config(o.config);
        auto& opt = cfg.options;
        if (o.seed) opt.seed = *o.seed;
        if (o.n_traj) opt.n_traj = *o.n_traj;
        if (o.dt) opt.dt = *o.dt;
        if (o.integrator) opt.integrator = ioncav::parse_integrator(*o.integrator);
        if (o.threads) opt.threads = *o.threads;
        if (opt.n_traj < 1 || opt.threads < 1 || opt.dt < 0.0) {
            throw ioncav::ConfigError("--n-traj and --threads must be >= 1 and --dt >= 0");
        }
        for (const auto& f : ioncav::run_subcommand(name, cfg, o.out)) {
            std::cout << f << "\n";
        }
    } catch (const ioncav::PointError& e) {
        std::cerr << "ioncav " << name << ": " << e.what() << "\n";
        return 3;
    } catch (const ioncav::ConfigError& e) {
        std::cerr << "ioncav " << name << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "ioncav " << name << ": " << ioncav::error_name(e) << ": " << e.what() << "\n";
        return 1;
    }
    return 0;
}
