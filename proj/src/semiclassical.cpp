#include "ioncav/semiclassical.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>

namespace ioncav {

namespace {

constexpr std::size_t kGridPoints = 10000;
constexpr double kRootTol = 1e-12;
constexpr double kMarginal = 1e-8;
constexpr double kMarkerRelTol = 1e-6;

double photons_at(double x, const ModelParams& p) {
    const double d = delta_eff(x, p);
    return p.eta * p.eta / (p.kappa * p.kappa + d * d);
}

// d(total_potential)/dx divided by x; finite at x = 0 where it equals the
// curvature of the central equilibrium.
double reduced_force(double x, const ModelParams& p) {
    const double s2 = (x / p.xeq) * (x / p.xeq);
    return 1.0 + 4.0 * p.u0 / (p.xeq * p.xeq) * (s2 - 1.0) * photons_at(x, p);
}

double bisect(const std::function<double(double)>& f, double lo, double hi, double flo,
              double abs_tol) {
    for (int i = 0; i < 200 && hi - lo > abs_tol; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (fm == 0.0) {
            return mid;
        }
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

EquilibriumBranch make_branch(double x, const ModelParams& p) {
    EquilibriumBranch b;
    b.x_bar = x;
    b.a_bar = mean_field(x, p);
    b.photons = std::norm(b.a_bar);
    b.v_total = total_potential(x, p);
    b.curvature = d2_total_potential(x, p);
    b.marginal = std::abs(b.curvature) < kMarginal;
    b.stable = !b.marginal && b.curvature > 0.0;
    return b;
}

// Positive roots of the reduced force on (0, 2 xeq].
std::vector<double> positive_roots(const ModelParams& p) {
    std::vector<double> roots;
    const double hi = 2.0 * p.xeq;
    const double h = hi / static_cast<double>(kGridPoints);
    auto f = [&](double x) { return reduced_force(x, p); };
    double x0 = 0.5 * h;
    double f0 = f(x0);
    for (std::size_t i = 1; i <= kGridPoints; ++i) {
        const double x1 = std::min(hi, (static_cast<double>(i) + 0.5) * h);
        const double f1 = f(x1);
        if (f0 == 0.0) {
            roots.push_back(x0);
        } else if ((f0 < 0.0) != (f1 < 0.0) && f1 != 0.0) {
            roots.push_back(bisect(f, x0, x1, f0, kRootTol));
        }
        x0 = x1;
        f0 = f1;
    }
    return roots;
}

// Minimum of the reduced force over x > 0; negative iff a side minimum exists.
double min_reduced_force(const ModelParams& p) {
    const double hi = 2.0 * p.xeq;
    const std::size_t n = 2000;
    const double h = hi / static_cast<double>(n);
    std::size_t best = 1;
    double fbest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i <= n; ++i) {
        const double v = reduced_force(h * static_cast<double>(i), p);
        if (v < fbest) {
            fbest = v;
            best = i;
        }
    }
    // Golden-section refinement around the grid minimum.
    double a = h * (static_cast<double>(best) - 1.0);
    double b = h * (static_cast<double>(best) + 1.0);
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a);
    double d = a + g * (b - a);
    double fc = reduced_force(c, p);
    double fd = reduced_force(d, p);
    for (int i = 0; i < 80; ++i) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = reduced_force(c, p);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = reduced_force(d, p);
        }
    }
    return std::min({fbest, fc, fd});
}

double side_minus_center(const ModelParams& p) {
    const auto sides = stable_side_branches(p);
    if (sides.empty()) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return sides.back().v_total - total_potential(0.0, p);
}

// Refines the boundary of a boolean/sign predicate in eta_eff between two
// grid values with opposite outcomes.
double refine_marker(const ModelParams& base, double lo, double hi,
                     const std::function<double(const ModelParams&)>& signed_fn) {
    auto f = [&](double e) { return signed_fn(with_eta_eff(base, e)); };
    double flo = f(lo);
    for (int i = 0; i < 200 && (hi - lo) > kMarkerRelTol * 1e-3 * std::max(1.0, std::abs(hi)); ++i) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace

std::complex<double> mean_field(double x_bar, const ModelParams& p) {
    return p.eta / std::complex<double>(p.kappa, -delta_eff(x_bar, p));
}

double v_eff(double x_bar, const ModelParams& p) {
    return -(p.eta * p.eta / p.kappa) * std::atan(delta_eff(x_bar, p) / p.kappa);
}

double total_potential(double x_bar, const ModelParams& p) {
    return v_eff(x_bar, p) + 0.5 * x_bar * x_bar;
}

double d_total_potential(double x_bar, const ModelParams& p) {
    return x_bar - photons_at(x_bar, p) * d_delta_eff(x_bar, p);
}

double d2_total_potential(double x_bar, const ModelParams& p) {
    const double d = delta_eff(x_bar, p);
    const double d1 = d_delta_eff(x_bar, p);
    const double d2 = d2_delta_eff(x_bar, p);
    const double den = p.kappa * p.kappa + d * d;
    return 1.0 - p.eta * p.eta * (d2 * den - 2.0 * d * d1 * d1) / (den * den);
}

std::vector<EquilibriumBranch> find_equilibria(const ModelParams& p) {
    p.validate();
    const auto pos = positive_roots(p);
    std::vector<EquilibriumBranch> out;
    out.reserve(2 * pos.size() + 1);
    for (auto it = pos.rbegin(); it != pos.rend(); ++it) {
        out.push_back(make_branch(-*it, p));
    }
    out.push_back(make_branch(0.0, p));
    for (double x : pos) {
        out.push_back(make_branch(x, p));
    }
    return out;
}

std::vector<EquilibriumBranch> stable_side_branches(const ModelParams& p) {
    std::vector<EquilibriumBranch> out;
    for (const auto& b : find_equilibria(p)) {
        if (b.x_bar > 0.0 && b.stable) {
            out.push_back(b);
        }
    }
    return out;
}

bool has_side_minimum(const ModelParams& p) { return min_reduced_force(p) < 0.0; }

bool has_center_minimum(const ModelParams& p) { return reduced_force(0.0, p) > 0.0; }

std::optional<BistabilityMarkers> bistability_markers(const ModelParams& p,
                                                      const std::vector<double>& eta_eff_grid) {
    if (eta_eff_grid.size() < 2) {
        throw std::invalid_argument("bistability_markers: grid needs at least two points");
    }
    if (!std::is_sorted(eta_eff_grid.begin(), eta_eff_grid.end())) {
        throw std::invalid_argument("bistability_markers: grid must be ascending");
    }
    auto side = [](const ModelParams& q) { return -min_reduced_force(q); };
    auto center = [](const ModelParams& q) { return reduced_force(0.0, q); };

    const std::size_t n = eta_eff_grid.size();
    std::vector<bool> has_side(n), has_center(n);
    for (std::size_t i = 0; i < n; ++i) {
        const ModelParams q = with_eta_eff(p, eta_eff_grid[i]);
        has_side[i] = side(q) > 0.0;
        has_center[i] = center(q) > 0.0;
    }
    bool bistable = false;
    for (std::size_t i = 0; i < n; ++i) {
        bistable = bistable || (has_side[i] && has_center[i]);
    }
    if (!bistable) {
        return std::nullopt;
    }

    BistabilityMarkers m;
    std::optional<double> low, high;
    for (std::size_t i = 0; i + 1 < n && !low; ++i) {
        if (!has_side[i] && has_side[i + 1]) {
            low = refine_marker(p, eta_eff_grid[i], eta_eff_grid[i + 1], side);
        }
    }
    for (std::size_t i = n - 1; i > 0 && !high; --i) {
        if (has_center[i - 1] && !has_center[i]) {
            high = refine_marker(p, eta_eff_grid[i - 1], eta_eff_grid[i], center);
        }
    }
    if (!low || !high) {
        return std::nullopt;
    }
    m.eta_eff_low = *low;
    m.eta_eff_high = *high;

    // Global-minimum change: the side well becomes deeper than the centre.
    auto depth = [](const ModelParams& q) {
        const double v = side_minus_center(q);
        return std::isnan(v) ? 1.0 : v;
    };
    const auto probe = linspace(m.eta_eff_low * (1.0 + 1e-9), m.eta_eff_high, 200);
    std::optional<double> gm;
    double prev = depth(with_eta_eff(p, probe.front()));
    for (std::size_t i = 1; i < probe.size() && !gm; ++i) {
        const double cur = depth(with_eta_eff(p, probe[i]));
        if (prev > 0.0 && cur <= 0.0) {
            gm = refine_marker(p, probe[i - 1], probe[i], depth);
        }
        prev = cur;
    }
    m.eta_eff_gm = gm.value_or(m.eta_eff_high);
    return m;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> v(n);
    if (n == 1) {
        v[0] = lo;
        return v;
    }
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return v;
}

}  // namespace ioncav
