#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "ioncav/gaussian.hpp"
#include "ioncav/model.hpp"
#include "ioncav/observables.hpp"

namespace ioncav {

/// (q1, p1, q2, p2): cavity quadratures, then ion position and momentum.
using PhaseSpacePoint = Vec4;

enum class Integrator { Taylor15, Euler };

Integrator parse_integrator(const std::string& name);
std::string to_string(Integrator integrator);

/// What to do with a trajectory that leaves |q2| <= escape radius or becomes
/// non-finite. Abort raises NonFiniteError; Condition freezes the trajectory,
/// marks it escaped and excludes it from every estimator (the count is always
/// reported).
enum class EscapePolicy { Abort, Condition };

EscapePolicy parse_escape_policy(const std::string& name);
std::string to_string(EscapePolicy policy);

/// Truncated-Wigner drift.
Vec4 drift(const PhaseSpacePoint& x, const ModelParams& p);

/// Constant diffusion matrix diag(kappa, kappa, Gamma, Gamma).
Mat4 diffusion(const ModelParams& p);

/// Noise amplitudes B = sqrt(D) on the diagonal.
Vec4 noise_amplitudes(const ModelParams& p);

class TwaDrift {
public:
    explicit TwaDrift(const ModelParams& p) : p_(p) {}

    Vec4 drift(const Vec4& x) const;
    Mat4 jacobian(const Vec4& x) const;
    /// sum_j D_jj d^2 a / dx_j^2 for the diagonal diffusion `d`.
    Vec4 second_order(const Vec4& x, const Vec4& d) const;
    const ModelParams& params() const { return p_; }

private:
    ModelParams p_;
};

/// Linear drift m (x - center), with zero second derivatives.
class LinearDrift {
public:
    LinearDrift(const Mat4& m, const Vec4& center) : m_(m), c_(center) {}

    Vec4 drift(const Vec4& x) const { return m_ * (x - c_); }
    Mat4 jacobian(const Vec4&) const { return m_; }
    Vec4 second_order(const Vec4&, const Vec4&) const { return Vec4::Zero(); }

private:
    Mat4 m_;
    Vec4 c_;
};

/// Wiener increment dW and its time integral dZ over one step, per channel.
struct NoiseIncrement {
    Vec4 dw = Vec4::Zero();
    Vec4 dz = Vec4::Zero();
};

/// Maps two standard normals per channel to (dW, dZ) with E[dW^2] = dt,
/// E[dZ^2] = dt^3/3 and E[dW dZ] = dt^2/2.
NoiseIncrement make_increment(const Vec4& u1, const Vec4& u2, double dt);

/// Combines the increments of two consecutive steps of length `dt_each`.
NoiseIncrement combine_increments(const NoiseIncrement& first, const NoiseIncrement& second,
                                  double dt_each);

template <class Drift>
Vec4 step_taylor15(const Drift& f, const Vec4& x, double dt, const Vec4& b,
                   const NoiseIncrement& n) {
    const Vec4 a = f.drift(x);
    const Mat4 j = f.jacobian(x);
    const Vec4 h = f.second_order(x, b.cwiseProduct(b));
    return x + a * dt + b.cwiseProduct(n.dw) + j * b.cwiseProduct(n.dz) +
           0.5 * (j * a + 0.5 * h) * dt * dt;
}

template <class Drift>
Vec4 step_euler(const Drift& f, const Vec4& x, double dt, const Vec4& b, const NoiseIncrement& n) {
    return x + f.drift(x) * dt + b.cwiseProduct(n.dw);
}

template <class Drift>
Vec4 step(Integrator integ, const Drift& f, const Vec4& x, double dt, const Vec4& b,
          const NoiseIncrement& n) {
    return integ == Integrator::Taylor15 ? step_taylor15(f, x, dt, b, n)
                                         : step_euler(f, x, dt, b, n);
}

/// Same step on the TWA drift; throws NonFiniteError on non-finite output.
PhaseSpacePoint step_taylor15(const PhaseSpacePoint& x, double dt, const NoiseIncrement& n,
                              const ModelParams& p);
PhaseSpacePoint step_euler(const PhaseSpacePoint& x, double dt, const NoiseIncrement& n,
                           const ModelParams& p);

/// Per-trajectory random stream: a Mersenne twister seeded from
/// (master seed, trajectory index) so results never depend on scheduling.
class TrajectoryRng {
public:
    TrajectoryRng(std::uint64_t seed, std::uint64_t index);

    double normal() { return dist_(engine_); }
    Vec4 normal4() { return Vec4(normal(), normal(), normal(), normal()); }
    double uniform() { return std::generate_canonical<double, 53>(engine_); }
    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> dist_;
};

/// Largest step allowed by dt <= 0.05 min(1, 1/kappa, 1/|Delta_eff|max), with
/// the detuning maximum taken over the central region |q2| <= sqrt(2) xeq.
double max_stable_dt(const ModelParams& p);

/// Default step: 0.01 capped by max_stable_dt.
double default_dt(const ModelParams& p);

/// Initial distribution of an ensemble. Trajectory i draws from
/// components[i % components.size()], so equal counts per component up to one.
struct InitialDistribution {
    std::vector<GaussianState> components;

    static InitialDistribution gaussian(const GaussianState& g);
    static InitialDistribution vacuum();
};

/// Factor F with F F^T = cov, used to draw mean + F u from standard normals u.
Mat4 sampling_factor(const Mat4& cov);

struct EvolveOptions {
    double dt = 0.0;  ///< 0 selects default_dt
    Integrator integrator = Integrator::Taylor15;
    unsigned threads = 1;
    EscapePolicy escape = EscapePolicy::Abort;
    double escape_radius_factor = 2.5;  ///< escape when |q2| > factor * xeq
    bool linearized = false;            ///< integrate `linear_model` instead of the TWA drift
    FluctuationModel linear_model;
};

struct Ensemble {
    std::vector<PhaseSpacePoint> points;
    std::vector<std::uint8_t> escaped;
    double t = 0.0;
    std::uint64_t seed = 0;
    std::size_t n_traj = 0;

    std::size_t n_escaped() const;
};

/// Ensemble whose trajectories can be advanced in chunks; each trajectory owns
/// its random stream so chunking and thread count never change results.
class EnsembleRunner {
public:
    EnsembleRunner(const ModelParams& p, const InitialDistribution& init, std::size_t n_traj,
                   std::uint64_t seed, const EvolveOptions& opts);

    void advance(double duration);
    const Ensemble& ensemble() const { return ens_; }
    double dt() const { return dt_; }

private:
    void advance_range(std::size_t lo, std::size_t hi, long long steps);

    ModelParams p_;
    EvolveOptions opts_;
    double dt_;
    Vec4 b_;
    Ensemble ens_;
    std::vector<TrajectoryRng> rngs_;
};

Ensemble evolve_ensemble(const InitialDistribution& init, const ModelParams& p, double t_final,
                         std::size_t n_traj, std::uint64_t seed, const EvolveOptions& opts = {});

/// Symmetric-ordering estimators over the non-escaped trajectories.
ObservableRecord estimate_observables(const Ensemble& e, const ModelParams& p);

struct SteadyStateOptions {
    EvolveOptions evolve;
    double window = 0.0;     ///< sliding window; 0 selects 10/kappa
    double t_cap = 2000.0;
    double min_time = 0.0;   ///< never declare convergence earlier than this
    int samples_per_window = 10;
};

struct SteadyStateResult {
    Ensemble ensemble;
    ObservableRecord observables;
    double convergence_time = 0.0;
};

/// Initial condition used for steady-state runs: Gaussian clouds with
/// covariance I/2 at the unstable semiclassical root(s), mirrored +-x.
InitialDistribution steady_state_initial(const ModelParams& p);

/// Evolves until every observable's window-to-window drift is below its
/// standard error. Throws NoConvergence at t_cap.
SteadyStateResult steady_state_ensemble(const ModelParams& p, std::size_t n_traj,
                                        std::uint64_t seed, const SteadyStateOptions& opts = {});

/// Text table of (q1 p1 q2 p2) rows with a commented header.
void write_ensemble(std::ostream& os, const Ensemble& e);
Ensemble read_ensemble(std::istream& is);

}  // namespace ioncav
