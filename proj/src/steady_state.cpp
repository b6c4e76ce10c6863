#include <cmath>
#include <deque>
#include <stdexcept>

#include "ioncav/errors.hpp"
#include "ioncav/sde.hpp"
#include "ioncav/semiclassical.hpp"

namespace ioncav {

namespace {

GaussianState cloud_at(double x, const ModelParams& p) {
    GaussianState g;
    const auto a = mean_field(x, p);
    g.mean << std::sqrt(2.0) * a.real(), std::sqrt(2.0) * a.imag(), x, 0.0;
    return g;
}

double value(const ObservableRecord& r, int k) {
    switch (k) {
        case 0: return r.n_cav.value;
        case 1: return r.x_sq.value;
        case 2: return r.p_sq.value;
        default: return r.delta_eff_mean.value;
    }
}

double error(const ObservableRecord& r, int k) {
    switch (k) {
        case 0: return r.n_cav.stderr_;
        case 1: return r.x_sq.stderr_;
        case 2: return r.p_sq.stderr_;
        default: return r.delta_eff_mean.stderr_;
    }
}

}  // namespace

InitialDistribution steady_state_initial(const ModelParams& p) {
    double x_u = 0.0;
    for (const auto& b : find_equilibria(p)) {
        if (b.x_bar > 0.0 && !b.stable && !b.marginal) {
            x_u = b.x_bar;
            break;
        }
    }
    InitialDistribution init;
    init.components.push_back(cloud_at(x_u, p));
    if (x_u > 0.0) {
        init.components.push_back(cloud_at(-x_u, p));
    }
    return init;
}

SteadyStateResult steady_state_ensemble(const ModelParams& p, std::size_t n_traj,
                                        std::uint64_t seed, const SteadyStateOptions& opts) {
    const double window = opts.window > 0.0 ? opts.window : 10.0 / p.kappa;
    if (opts.samples_per_window < 1) {
        throw std::invalid_argument("samples_per_window must be >= 1");
    }
    EnsembleRunner runner(p, steady_state_initial(p), n_traj, seed, opts.evolve);
    const double interval = window / opts.samples_per_window;
    const std::size_t per = static_cast<std::size_t>(opts.samples_per_window);

    std::deque<ObservableRecord> history;
    while (true) {
        runner.advance(interval);
        const double t = runner.ensemble().t;
        history.push_back(estimate_observables(runner.ensemble(), p));
        if (history.size() > 2 * per) {
            history.pop_front();
        }
        if (history.size() == 2 * per && t >= opts.min_time) {
            bool settled = true;
            const ObservableRecord& now = history.back();
            for (int k = 0; k < 4 && settled; ++k) {
                double older = 0.0, newer = 0.0;
                for (std::size_t i = 0; i < per; ++i) {
                    older += value(history[i], k);
                    newer += value(history[i + per], k);
                }
                const double drift = std::abs(newer - older) / static_cast<double>(per);
                settled = drift <= error(now, k);
            }
            if (settled) {
                SteadyStateResult r;
                r.ensemble = runner.ensemble();
                r.observables = now;
                r.convergence_time = t;
                return r;
            }
        }
        if (t >= opts.t_cap) {
            throw NoConvergence("steady state not reached by t = " + std::to_string(opts.t_cap));
        }
    }
}

}  // namespace ioncav
