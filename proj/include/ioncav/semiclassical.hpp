#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "ioncav/model.hpp"

namespace ioncav {

/// One classical equilibrium of the lowest-order semiclassical problem.
struct EquilibriumBranch {
    double x_bar = 0.0;
    std::complex<double> a_bar;
    double photons = 0.0;
    double v_total = 0.0;
    double curvature = 0.0;  ///< second derivative of the total potential at x_bar
    bool stable = false;     ///< strict local minimum of the total potential
    bool marginal = false;   ///< |curvature| below the degeneracy threshold
};

struct BistabilityMarkers {
    double eta_eff_low = 0.0;
    double eta_eff_gm = 0.0;
    double eta_eff_high = 0.0;
};

/// Steady cavity amplitude eta / (kappa - i Delta_eff(x_bar)).
std::complex<double> mean_field(double x_bar, const ModelParams& p);

/// Optical potential -(eta^2/kappa) atan(Delta_eff/kappa).
double v_eff(double x_bar, const ModelParams& p);

/// v_eff plus the harmonic trap x^2/2.
double total_potential(double x_bar, const ModelParams& p);
double d_total_potential(double x_bar, const ModelParams& p);
double d2_total_potential(double x_bar, const ModelParams& p);

/// All roots of d(total_potential)/dx in [-2 xeq, 2 xeq], sorted by position.
std::vector<EquilibriumBranch> find_equilibria(const ModelParams& p);

/// Equilibria with x_bar > 0 that are stable minima, outermost last.
std::vector<EquilibriumBranch> stable_side_branches(const ModelParams& p);

/// True if a local minimum of the total potential exists at some x > 0.
bool has_side_minimum(const ModelParams& p);

/// True if x = 0 is a strict local minimum.
bool has_center_minimum(const ModelParams& p);

/// Scans `eta_eff_grid` (ascending) at fixed kappa, delta_c, u0, xeq and refines
/// each marker by bisection. Returns nullopt when the grid never sees both a
/// side minimum and a central minimum at the same pump.
std::optional<BistabilityMarkers> bistability_markers(const ModelParams& p,
                                                      const std::vector<double>& eta_eff_grid);

/// Uniform grid helper for sweeps.
std::vector<double> linspace(double lo, double hi, std::size_t n);

}  // namespace ioncav
