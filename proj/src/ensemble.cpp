#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "ioncav/errors.hpp"
#include "ioncav/parallel.hpp"
#include "ioncav/sde.hpp"

namespace ioncav {

InitialDistribution InitialDistribution::gaussian(const GaussianState& g) {
    InitialDistribution d;
    d.components.push_back(g);
    return d;
}

InitialDistribution InitialDistribution::vacuum() { return gaussian(GaussianState{}); }

std::size_t Ensemble::n_escaped() const {
    std::size_t n = 0;
    for (auto e : escaped) {
        n += e ? 1 : 0;
    }
    return n;
}

Mat4 sampling_factor(const Mat4& cov) {
    Eigen::LDLT<Mat4> ldlt(cov);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
        throw std::invalid_argument("initial covariance is not positive semidefinite");
    }
    // L D^{1/2} with the permutation undone, so samples are P^T L sqrt(D) u.
    const Mat4 l = ldlt.matrixL();
    const Vec4 dvals = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
    Mat4 f = ldlt.transpositionsP().transpose() * (l * dvals.asDiagonal());
    return f;
}

EnsembleRunner::EnsembleRunner(const ModelParams& p, const InitialDistribution& init,
                               std::size_t n_traj, std::uint64_t seed, const EvolveOptions& opts)
    : p_(p), opts_(opts) {
    p_.validate();
    if (n_traj < 1) {
        throw std::invalid_argument("n_traj must be >= 1");
    }
    if (init.components.empty()) {
        throw std::invalid_argument("initial distribution has no components");
    }
    dt_ = opts.dt > 0.0 ? opts.dt : default_dt(p_);
    if (!opts.linearized && dt_ > max_stable_dt(p_) * (1.0 + 1e-12)) {
        throw std::invalid_argument("dt = " + std::to_string(dt_) + " exceeds the stability cap " +
                                    std::to_string(max_stable_dt(p_)));
    }
    if (opts.threads < 1) {
        throw std::invalid_argument("threads must be >= 1");
    }
    b_ = noise_amplitudes(p_);
    if (opts.linearized) {
        b_ = opts.linear_model.diffusion4.diagonal().cwiseSqrt();
    }

    std::vector<Mat4> factors;
    for (const auto& c : init.components) {
        factors.push_back(sampling_factor(c.cov));
    }
    ens_.seed = seed;
    ens_.n_traj = n_traj;
    ens_.points.resize(n_traj);
    ens_.escaped.assign(n_traj, 0);
    rngs_.reserve(n_traj);
    for (std::size_t i = 0; i < n_traj; ++i) {
        rngs_.emplace_back(seed, i);
        const std::size_t k = i % init.components.size();
        ens_.points[i] = init.components[k].mean + factors[k] * rngs_[i].normal4();
    }
}

void EnsembleRunner::advance_range(std::size_t lo, std::size_t hi, long long steps) {
    const double radius = opts_.escape_radius_factor * p_.xeq;
    const TwaDrift twa(p_);
    const LinearDrift lin(opts_.linear_model.drift4, opts_.linear_model.mean);
    for (std::size_t i = lo; i < hi; ++i) {
        if (ens_.escaped[i]) {
            continue;
        }
        Vec4 x = ens_.points[i];
        TrajectoryRng& rng = rngs_[i];
        for (long long s = 0; s < steps; ++s) {
            const Vec4 u1 = rng.normal4();
            const Vec4 u2 = opts_.integrator == Integrator::Taylor15 ? rng.normal4() : Vec4::Zero();
            const NoiseIncrement n = make_increment(u1, u2, dt_);
            x = opts_.linearized ? step(opts_.integrator, lin, x, dt_, b_, n)
                                 : step(opts_.integrator, twa, x, dt_, b_, n);
            const bool bad = !x.allFinite() || (!opts_.linearized && std::abs(x(2)) > radius);
            if (bad) {
                const double t = ens_.t + static_cast<double>(s + 1) * dt_;
                if (opts_.escape == EscapePolicy::Abort) {
                    throw NonFiniteError(i, t,
                                         "trajectory " + std::to_string(i) + " left the model domain at t = " +
                                             std::to_string(t) + (x.allFinite() ? "" : " (non-finite state)"));
                }
                ens_.escaped[i] = 1;
                break;
            }
        }
        ens_.points[i] = x;
    }
}

void EnsembleRunner::advance(double duration) {
    if (duration < 0.0) {
        throw std::invalid_argument("duration must be >= 0");
    }
    const long long steps = std::llround(duration / dt_);
    if (steps == 0) {
        return;
    }
    parallel_chunks(ens_.points.size(), opts_.threads,
                    [this, steps](std::size_t lo, std::size_t hi) { advance_range(lo, hi, steps); });
    ens_.t += static_cast<double>(steps) * dt_;
}

Ensemble evolve_ensemble(const InitialDistribution& init, const ModelParams& p, double t_final,
                         std::size_t n_traj, std::uint64_t seed, const EvolveOptions& opts) {
    EnsembleRunner r(p, init, n_traj, seed, opts);
    r.advance(t_final);
    return r.ensemble();
}

ObservableRecord estimate_observables(const Ensemble& e, const ModelParams& p) {
    double s[4] = {0, 0, 0, 0};
    double s2[4] = {0, 0, 0, 0};
    std::size_t n = 0;
    for (std::size_t i = 0; i < e.points.size(); ++i) {
        if (!e.escaped.empty() && e.escaped[i]) {
            continue;
        }
        const Vec4& x = e.points[i];
        const double v[4] = {0.5 * (x(0) * x(0) + x(1) * x(1)) - 0.5, x(2) * x(2), x(3) * x(3),
                             delta_eff(x(2), p)};
        for (int k = 0; k < 4; ++k) {
            s[k] += v[k];
            s2[k] += v[k] * v[k];
        }
        ++n;
    }
    if (n == 0) {
        throw std::invalid_argument("estimate_observables: no surviving trajectories");
    }
    Estimate out[4];
    const double dn = static_cast<double>(n);
    for (int k = 0; k < 4; ++k) {
        const double mean = s[k] / dn;
        const double var = n > 1 ? std::max(0.0, (s2[k] - dn * mean * mean) / (dn - 1.0)) : 0.0;
        out[k] = Estimate{mean, std::sqrt(var / dn)};
    }
    return ObservableRecord{out[0], out[1], out[2], out[3]};
}

}  // namespace ioncav
