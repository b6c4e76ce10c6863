#include "ioncav/gaussian.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "ioncav/errors.hpp"

namespace ioncav {

namespace {

constexpr double kStabilityMargin = 1e-10;

// Kronecker-form solve of the 16 entries; only used when the eigenbasis is
// ill-conditioned.
Mat4 lyapunov_direct(const Mat4& m, const Mat4& d) {
    Eigen::Matrix<double, 16, 16> k = Eigen::Matrix<double, 16, 16>::Zero();
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            const int row = i + 4 * j;
            for (int l = 0; l < 4; ++l) {
                k(row, l + 4 * j) += m(i, l);
                k(row, i + 4 * l) += m(j, l);
            }
        }
    }
    Eigen::Matrix<double, 16, 1> rhs;
    for (int j = 0; j < 4; ++j) {
        for (int i = 0; i < 4; ++i) {
            rhs(i + 4 * j) = -d(i, j);
        }
    }
    const Eigen::Matrix<double, 16, 1> x = k.fullPivLu().solve(rhs);
    Mat4 s;
    for (int j = 0; j < 4; ++j) {
        for (int i = 0; i < 4; ++i) {
            s(i, j) = x(i + 4 * j);
        }
    }
    return 0.5 * (s + s.transpose());
}

}  // namespace

FluctuationModel build_fluctuation_model(double x_bar, double detuning, const ModelParams& p,
                                         const GaussianOptions& opts) {
    const std::complex<double> a = p.eta / std::complex<double>(p.kappa, -detuning);
    const double d1 = d_delta_eff(x_bar, p);
    const double d2 = d2_delta_eff(x_bar, p);
    const double gamma = opts.include_gamma ? p.gamma : 0.0;

    FluctuationModel m;
    m.detuning = detuning;
    m.coupling_c = std::abs(a) * d1;
    m.phi = std::arg(a);
    m.omega_v_sq = 1.0 - std::norm(a) * d2;
    m.mean << std::sqrt(2.0) * a.real(), std::sqrt(2.0) * a.imag(), x_bar, 0.0;

    // da = (i Delta - kappa) da + i c e^{i phi} dx, and the ion force
    // c (e^{-i phi} da + e^{i phi} da^dag)/sqrt(2); with q1 + i p1 = sqrt(2) a
    // these become the rows below (c e^{i phi} = |a| Delta' e^{i phi} = a Delta').
    const double cr = std::sqrt(2.0) * d1 * a.real();
    const double ci = std::sqrt(2.0) * d1 * a.imag();
    m.drift4 << -p.kappa, -detuning, -ci, 0.0,
                detuning, -p.kappa, cr, 0.0,
                0.0, 0.0, -gamma, 1.0,
                cr, ci, -m.omega_v_sq, -gamma;
    m.diffusion4.diagonal() << p.kappa, p.kappa, gamma, gamma;
    return m;
}

FluctuationModel build_fluctuation_model(const EquilibriumBranch& branch, const ModelParams& p,
                                         const GaussianOptions& opts) {
    return build_fluctuation_model(branch.x_bar, delta_eff(branch.x_bar, p), p, opts);
}

Eigen::Vector4cd stability_spectrum(const FluctuationModel& model) {
    Eigen::EigenSolver<Mat4> es(model.drift4, false);
    return es.eigenvalues();
}

bool gaussian_stable(const FluctuationModel& model) {
    return stability_spectrum(model).real().maxCoeff() < -kStabilityMargin;
}

double lyapunov_residual(const FluctuationModel& model, const Mat4& cov) {
    return (model.drift4 * cov + cov * model.drift4.transpose() + model.diffusion4).norm();
}

GaussianState steady_covariance(const FluctuationModel& model) {
    Eigen::EigenSolver<Mat4> es(model.drift4, true);
    const Eigen::Vector4cd lam = es.eigenvalues();
    if (lam.real().maxCoeff() >= -kStabilityMargin) {
        throw NoSteadyState("linearized fluctuations are not strictly stable (max Re lambda = " +
                            std::to_string(lam.real().maxCoeff()) + ")");
    }
    const Eigen::Matrix4cd v = es.eigenvectors();
    const Eigen::Matrix4cd vinv = v.inverse();
    const Eigen::Matrix4cd dt = vinv * model.diffusion4.cast<std::complex<double>>() * vinv.transpose();
    Eigen::Matrix4cd st;
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            st(i, j) = -dt(i, j) / (lam(i) + lam(j));
        }
    }
    Mat4 cov = (v * st * v.transpose()).real();
    cov = 0.5 * (cov + cov.transpose());

    const double scale = std::max(model.diffusion4.norm(), 1e-300);
    if (!cov.allFinite() || lyapunov_residual(model, cov) > 1e-10 * scale) {
        cov = lyapunov_direct(model.drift4, model.diffusion4);
    }
    GaussianState s;
    s.mean = model.mean;
    s.cov = cov;
    return s;
}

double delta_eff_gaussian_average(double mean, double var, const ModelParams& p) {
    const double x2 = p.xeq * p.xeq;
    const double m2 = mean * mean;
    const double e2 = m2 + var;
    const double e4 = m2 * m2 + 6.0 * m2 * var + 3.0 * var * var;
    return p.delta_c - p.u0 * (e4 / (x2 * x2) - 2.0 * e2 / x2 + 1.0);
}

GaussianState gaussian_steady_state(const EquilibriumBranch& branch, const ModelParams& p,
                                    const GaussianOptions& opts) {
    FluctuationModel model = build_fluctuation_model(branch, p, opts);
    GaussianState state = steady_covariance(model);
    if (!opts.self_consistent) {
        return state;
    }
    double det = model.detuning;
    for (int it = 0; it < opts.max_iterations; ++it) {
        const double next = delta_eff_gaussian_average(branch.x_bar, state.cov(2, 2), p);
        model = build_fluctuation_model(branch.x_bar, next, p, opts);
        state = steady_covariance(model);
        if (std::abs(next - det) <= opts.tolerance * std::max(1.0, std::abs(next))) {
            return state;
        }
        det = next;
    }
    throw NoConvergence("self-consistent detuning did not converge");
}

ObservableRecord gaussian_observables(const GaussianState& s, const ModelParams& p) {
    ObservableRecord r;
    const Vec4& m = s.mean;
    r.n_cav.value = 0.5 * (m(0) * m(0) + m(1) * m(1) + s.cov(0, 0) + s.cov(1, 1) - 1.0);
    r.x_sq.value = m(2) * m(2) + s.cov(2, 2);
    r.p_sq.value = m(3) * m(3) + s.cov(3, 3);
    r.delta_eff_mean.value = delta_eff(m(2), p);
    return r;
}

}  // namespace ioncav
