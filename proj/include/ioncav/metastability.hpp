#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ioncav/gaussian.hpp"
#include "ioncav/model.hpp"
#include "ioncav/sde.hpp"

namespace ioncav {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

enum class Plane { Cavity, Ion };

struct MixtureComponent {
    double weight = 0.0;
    Vec2 mean = Vec2::Zero();
    Mat2 cov = Mat2::Identity();
};

struct MixtureModel {
    Plane plane = Plane::Ion;
    std::vector<MixtureComponent> components;
    std::vector<double> log_likelihood;  ///< per EM iteration, including the initial guess
    int iterations = 0;
    bool converged = false;
};

struct MixtureOptions {
    double rel_tol = 1e-8;
    int max_iter = 500;
};

/// Projects a 4-d ensemble onto one plane, skipping escaped trajectories.
std::vector<Vec2> project(const Ensemble& e, Plane plane);

/// Deterministic starting point: sample moments of k groups split by
/// quantiles of the projection on the leading principal axis.
MixtureModel initial_mixture(const std::vector<Vec2>& samples, std::size_t k, Plane plane);

/// Starting point seeded at given centres: each sample joins its nearest centre
/// and the groups' sample moments give the covariances.
MixtureModel initial_mixture_at(const std::vector<Vec2>& samples, const std::vector<Vec2>& centers,
                                Plane plane);

/// EM fit. Throws std::invalid_argument when samples < 50 k and
/// DegenerateComponent when a covariance eigenvalue falls below 1e-10.
MixtureModel fit_mixture(const std::vector<Vec2>& samples, std::size_t k,
                         const MixtureOptions& opts = {}, Plane plane = Plane::Ion);
MixtureModel fit_mixture(const std::vector<Vec2>& samples, const MixtureModel& init,
                         const MixtureOptions& opts = {});

double mixture_log_likelihood(const std::vector<Vec2>& samples, const MixtureModel& m);

/// Hard assignment: index of the component with the largest responsibility.
class MixtureClassifier {
public:
    explicit MixtureClassifier(const MixtureModel& m);
    std::size_t operator()(const Vec2& x) const;

private:
    std::vector<Vec2> mean_;
    std::vector<Mat2> inv_;
    std::vector<double> offset_;  ///< log weight - log det / 2
};

struct EllipseRegion {
    Vec2 center = Vec2::Zero();
    double a = 1.0;      ///< semiaxis along the first principal direction
    double b = 1.0;      ///< semiaxis along the second principal direction
    double angle = 0.0;  ///< rotation of the first principal direction from the x axis
    double n_sigma = 3.0;

    double area() const;
};

std::vector<EllipseRegion> define_regions(const MixtureModel& m, double n_sigma);
EllipseRegion define_region(const MixtureComponent& c, double n_sigma);

bool membership(const Vec2& point, const EllipseRegion& region);

/// Boundary-sampling test that two ellipses share no point.
bool regions_disjoint(const EllipseRegion& r1, const EllipseRegion& r2);

struct FirstPassageOptions {
    EvolveOptions evolve;
    double t_cap = 1e5;
    double min_crossed_fraction = 0.9;
};

using TargetPredicate = std::function<bool(const PhaseSpacePoint&)>;

/// First entry times into each target, per trajectory; +inf if never reached
/// by t_cap. Trajectories stop once every target has been entered.
std::vector<std::vector<double>> first_passage_times(const ModelParams& p,
                                                     const InitialDistribution& init,
                                                     const std::vector<TargetPredicate>& targets,
                                                     std::size_t n_traj, std::uint64_t seed,
                                                     const FirstPassageOptions& opts = {});

struct PassageTime {
    double tau = 0.0;
    double stderr_ = 0.0;
    double crossed_fraction = 1.0;
};

/// Mean over crossed trajectories. Throws TimeoutError below min_crossed_fraction.
PassageTime summarize_passage(const std::vector<double>& times, double min_crossed_fraction = 0.9);

PassageTime mean_first_passage(const ModelParams& p, const InitialDistribution& init,
                               const TargetPredicate& target, std::size_t n_traj,
                               std::uint64_t seed, const FirstPassageOptions& opts = {});

struct RateEstimate {
    double gamma_1 = 0.0;  ///< out of the centre state
    double gamma_2 = 0.0;  ///< out of the side states
    double gamma_t = 0.0;
    double gamma_1_err = 0.0;
    double gamma_2_err = 0.0;
    double gamma_t_err = 0.0;
    double band_low = 0.0;
    double band_high = 0.0;
    double timeout_fraction = 0.0;
};

/// gamma_i = 1/tau_i; errors propagated to first order. The band is set to
/// gamma_t itself and widened by `add_to_band`.
RateEstimate two_state_rates(const PassageTime& tau_center, const PassageTime& tau_sides);
void add_to_band(RateEstimate& r, double gamma_t);

struct RateOptions {
    FirstPassageOptions passage;
    std::size_t n_traj = 2000;   ///< per direction
    std::vector<double> n_sigmas{2.5, 3.0, 3.5};
    double n_sigma = 3.0;        ///< the reported value; must appear in n_sigmas
    bool cavity_membership = false;  ///< also require the cavity-plane ellipse
    MixtureOptions mixture;
};

/// Fitted regions and passage statistics of one rate computation.
struct RateAnalysis {
    MixtureModel ion;
    MixtureModel cavity;
    std::size_t center_index = 0;  ///< index of the centre component in `ion`
    RateEstimate rates;
    std::vector<double> band_gamma_t;  ///< gamma_t per entry of n_sigmas (NaN on timeout)
    PassageTime tau_center;
    PassageTime tau_sides;
    bool regions_overlap = false;  ///< centre and side ellipses intersect at the reported n_sigma
};

/// Full pipeline on a converged ensemble: ion-plane k = 3 and cavity-plane
/// k = 2 fits, ellipse regions, first passages out of the centre and out of the
/// sides, and the two-state reduction with its n_sigma band. Each state's
/// region is its ellipse restricted to points its component claims under
/// the hard mixture assignment, so regions are disjoint even where the
/// ellipses overlap (flagged in `regions_overlap`).
RateAnalysis compute_rates(const ModelParams& p, const Ensemble& steady, std::uint64_t seed,
                           const RateOptions& opts = {});

}  // namespace ioncav
