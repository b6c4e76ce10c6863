#pragma once

#include <complex>

#include <Eigen/Dense>

#include "ioncav/model.hpp"
#include "ioncav/observables.hpp"
#include "ioncav/semiclassical.hpp"

namespace ioncav {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

struct GaussianState {
    Vec4 mean = Vec4::Zero();
    Mat4 cov = Mat4::Identity() * 0.5;
};

/// Linear Langevin model of the fluctuations around one equilibrium, in the
/// real basis (dq1, dp1, dq2, dp2) shared with the SDE module.
struct FluctuationModel {
    Mat4 drift4 = Mat4::Zero();
    Mat4 diffusion4 = Mat4::Zero();
    Vec4 mean = Vec4::Zero();
    double omega_v_sq = 1.0;
    double coupling_c = 0.0;
    double phi = 0.0;
    double detuning = 0.0;  ///< cavity detuning used in the cavity block
};

struct GaussianOptions {
    bool include_gamma = true;     ///< Gamma damping and noise on the ion quadratures
    bool self_consistent = false;  ///< iterate Delta_eff -> <Delta_eff> under the covariance
    int max_iterations = 200;
    double tolerance = 1e-12;
};

FluctuationModel build_fluctuation_model(const EquilibriumBranch& branch, const ModelParams& p,
                                         const GaussianOptions& opts = {});

/// Same, with the cavity detuning replaced by `detuning` (and the mean field
/// recomputed from it). Used by the self-consistent refinement.
FluctuationModel build_fluctuation_model(double x_bar, double detuning, const ModelParams& p,
                                         const GaussianOptions& opts = {});

Eigen::Vector4cd stability_spectrum(const FluctuationModel& model);

bool gaussian_stable(const FluctuationModel& model);

/// Solves M S + S M^T + D = 0. Throws NoSteadyState unless every eigenvalue of
/// M has a strictly negative real part.
GaussianState steady_covariance(const FluctuationModel& model);

/// Lyapunov residual norm ||M S + S M^T + D|| in the Frobenius norm.
double lyapunov_residual(const FluctuationModel& model, const Mat4& cov);

/// Steady state at a branch, optionally with the self-consistent detuning.
GaussianState gaussian_steady_state(const EquilibriumBranch& branch, const ModelParams& p,
                                    const GaussianOptions& opts = {});

/// Observables of a Gaussian state. <Delta_eff> is taken at the mean position.
ObservableRecord gaussian_observables(const GaussianState& state, const ModelParams& p);

/// Expectation of Delta_eff(q2) over q2 ~ N(mean, var).
double delta_eff_gaussian_average(double mean, double var, const ModelParams& p);

}  // namespace ioncav
