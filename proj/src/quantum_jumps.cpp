#include <cmath>
#include <stdexcept>

#include "ioncav/parallel.hpp"
#include "ioncav/qoracle.hpp"
#include "ioncav/sde.hpp"

namespace ioncav {

namespace {

using SpMat = Eigen::SparseMatrix<std::complex<double>>;

SpMat effective_hamiltonian(const TruncationSpec& spec, const ModelParams& p, const IonOperators& ion) {
    const int nc = spec.n_cav_max;
    const int ni = spec.ion_dim();
    const std::complex<double> i(0.0, 1.0);
    std::vector<Eigen::Triplet<std::complex<double>>> t;
    for (int n = 0; n < nc; ++n) {
        Eigen::MatrixXcd h = (ion.number + n * (p.u0 * ion.profile -
                                                p.delta_c * Eigen::MatrixXd::Identity(ni, ni)))
                                 .cast<std::complex<double>>();
        h.diagonal().array() -= i * (p.kappa * n);
        if (p.gamma > 0.0) {
            h -= i * p.gamma * ion.number;
        }
        for (int r = 0; r < ni; ++r) {
            for (int c = 0; c < ni; ++c) {
                if (h(r, c) != 0.0) {
                    t.emplace_back(n * ni + r, n * ni + c, h(r, c));
                }
            }
        }
        if (n + 1 < nc) {
            const std::complex<double> c = i * p.eta * std::sqrt(double(n + 1));
            for (int k = 0; k < ni; ++k) {
                t.emplace_back((n + 1) * ni + k, n * ni + k, c);
                t.emplace_back(n * ni + k, (n + 1) * ni + k, -c);
            }
        }
    }
    SpMat h(nc * ni, nc * ni);
    h.setFromTriplets(t.begin(), t.end());
    return h;
}

CVec lower_cavity(const CVec& psi, int nc, int ni) {
    CVec out = CVec::Zero(psi.size());
    for (int n = 0; n + 1 < nc; ++n) {
        out.segment(n * ni, ni) = std::sqrt(double(n + 1)) * psi.segment((n + 1) * ni, ni);
    }
    return out;
}

CVec lower_ion(const CVec& psi, int nc, int ni, const Eigen::MatrixXd& b) {
    CVec out(psi.size());
    for (int n = 0; n < nc; ++n) {
        out.segment(n * ni, ni) = b * psi.segment(n * ni, ni);
    }
    return out;
}

struct Expect {
    double n, x2, p2, f;
};

Expect expectations(const CVec& psi, int nc, int ni, const IonOperators& ion) {
    Expect e{0, 0, 0, 0};
    const double norm = psi.squaredNorm();
    for (int n = 0; n < nc; ++n) {
        const auto s = psi.segment(n * ni, ni);
        e.n += n * s.squaredNorm();
        e.x2 += s.dot(ion.x2 * s).real();
        e.p2 += s.dot(ion.p2 * s).real();
        e.f += s.dot(ion.profile * s).real();
    }
    e.n /= norm;
    e.x2 /= norm;
    e.p2 /= norm;
    e.f /= norm;
    return e;
}

}  // namespace

std::vector<JumpSample> quantum_jump_trajectories(const TruncationSpec& spec, const ModelParams& p,
                                                  std::size_t n_traj, std::uint64_t seed,
                                                  const JumpOptions& opts) {
    p.validate();
    spec.validate(p);
    if (n_traj < 1 || !(opts.dt > 0.0)) {
        throw std::invalid_argument("quantum_jump_trajectories: need n_traj >= 1 and dt > 0");
    }
    const IonOperators ion = build_ion_operators(spec, p);
    const int nc = spec.n_cav_max;
    const int ni = spec.ion_dim();
    const SpMat h = effective_hamiltonian(spec, p, ion);
    const std::complex<double> mi(0.0, -1.0);

    std::vector<long long> sample_steps;
    for (double t : opts.sample_times) {
        if (t < 0.0) {
            throw std::invalid_argument("sample times must be >= 0");
        }
        sample_steps.push_back(std::llround(t / opts.dt));
    }
    const long long last = sample_steps.empty() ? 0 : *std::max_element(sample_steps.begin(), sample_steps.end());
    const std::size_t ns = sample_steps.size();
    // values[k][i]: observable k at sample s for trajectory i, stored [s][k][i].
    std::vector<std::vector<std::vector<double>>> values(
        ns, std::vector<std::vector<double>>(4, std::vector<double>(n_traj)));

    parallel_chunks(n_traj, opts.threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            TrajectoryRng rng(seed, i);
            CVec psi = CVec::Zero(nc * ni);
            psi(0) = 1.0;
            double r = rng.uniform();
            auto record = [&](long long step) {
                for (std::size_t s = 0; s < ns; ++s) {
                    if (sample_steps[s] == step) {
                        const Expect e = expectations(psi, nc, ni, ion);
                        values[s][0][i] = e.n;
                        values[s][1][i] = e.x2;
                        values[s][2][i] = e.p2;
                        values[s][3][i] = p.delta_c - p.u0 * e.f;
                    }
                }
            };
            record(0);
            const double dt = opts.dt;
            for (long long step = 1; step <= last; ++step) {
                const CVec k1 = mi * (h * psi);
                const CVec k2 = mi * (h * (psi + 0.5 * dt * k1));
                const CVec k3 = mi * (h * (psi + 0.5 * dt * k2));
                const CVec k4 = mi * (h * (psi + dt * k3));
                psi += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                if (psi.squaredNorm() < r) {
                    const CVec ja = lower_cavity(psi, nc, ni);
                    const double wa = 2.0 * p.kappa * ja.squaredNorm();
                    double wb = 0.0;
                    CVec jb;
                    if (p.gamma > 0.0) {
                        jb = lower_ion(psi, nc, ni, ion.lower);
                        wb = 2.0 * p.gamma * jb.squaredNorm();
                    }
                    const bool cavity = rng.uniform() * (wa + wb) < wa;
                    psi = cavity ? ja : jb;
                    psi /= psi.norm();
                    r = rng.uniform();
                }
                record(step);
            }
        }
    });

    std::vector<JumpSample> out(ns);
    for (std::size_t s = 0; s < ns; ++s) {
        out[s].t = static_cast<double>(sample_steps[s]) * opts.dt;
        Estimate est[4];
        for (int k = 0; k < 4; ++k) {
            double m = 0.0;
            for (double v : values[s][k]) {
                m += v;
            }
            m /= static_cast<double>(n_traj);
            double var = 0.0;
            for (double v : values[s][k]) {
                var += (v - m) * (v - m);
            }
            var = n_traj > 1 ? var / static_cast<double>(n_traj - 1) : 0.0;
            est[k] = Estimate{m, std::sqrt(var / static_cast<double>(n_traj))};
        }
        out[s].observables = ObservableRecord{est[0], est[1], est[2], est[3]};
    }
    return out;
}

}  // namespace ioncav
