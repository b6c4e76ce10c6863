#include <cmath>
#include <vector>

#include "ioncav/errors.hpp"
#include "ioncav/qoracle.hpp"
#include "ioncav/sde.hpp"

namespace ioncav {

namespace {

struct GmresResult {
    int iterations = 0;
    double rel_residual = 0.0;
    bool converged = false;
};

// Restarted right-preconditioned GMRES with Givens rotations.
template <class Op, class Prec>
GmresResult gmres(const Op& apply, const Prec& precond, const CVec& b, CVec& x, double tol,
                  int restart, int max_iter) {
    using C = std::complex<double>;
    GmresResult res;
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        x.setZero();
        res.converged = true;
        return res;
    }
    const Eigen::Index n = b.size();
    std::vector<CVec> v(static_cast<std::size_t>(restart) + 1);
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(restart + 1, restart);
    std::vector<C> cs(restart), sn(restart);
    CVec g(restart + 1), w(n), z(n);

    while (res.iterations < max_iter) {
        apply(x, w);
        CVec r = b - w;
        double beta = r.norm();
        res.rel_residual = beta / bnorm;
        if (res.rel_residual < tol) {
            res.converged = true;
            return res;
        }
        v[0] = r / beta;
        g.setZero();
        g(0) = beta;
        int j = 0;
        for (; j < restart && res.iterations < max_iter; ++j) {
            ++res.iterations;
            precond(v[j], z);
            apply(z, w);
            for (int i = 0; i <= j; ++i) {
                h(i, j) = v[i].dot(w);
                w -= h(i, j) * v[i];
            }
            h(j + 1, j) = w.norm();
            v[j + 1] = w / h(j + 1, j).real();
            for (int i = 0; i < j; ++i) {
                const C t = std::conj(cs[i]) * h(i, j) + std::conj(sn[i]) * h(i + 1, j);
                h(i + 1, j) = -sn[i] * h(i, j) + cs[i] * h(i + 1, j);
                h(i, j) = t;
            }
            const double a = std::abs(h(j, j));
            const double bb = std::abs(h(j + 1, j));
            const double rr = std::hypot(a, bb);
            cs[j] = a == 0.0 ? C(0.0) : C(a / rr);
            sn[j] = a == 0.0 ? C(1.0) : h(j + 1, j) * std::conj(h(j, j)) / (a * rr);
            h(j, j) = rr * (a == 0.0 ? C(1.0) : h(j, j) / a);
            h(j + 1, j) = 0.0;
            g(j + 1) = -sn[j] * g(j);
            g(j) = std::conj(cs[j]) * g(j);
            res.rel_residual = std::abs(g(j + 1)) / bnorm;
            if (res.rel_residual < tol) {
                ++j;
                break;
            }
        }
        // Back-substitute and update x += M^{-1} V y.
        CVec y = h.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
        CVec dv = CVec::Zero(n);
        for (int i = 0; i < j; ++i) {
            dv += y(i) * v[i];
        }
        precond(dv, z);
        x += z;
        if (res.rel_residual < tol) {
            apply(x, w);
            res.rel_residual = (b - w).norm() / bnorm;
            if (res.rel_residual < 10.0 * tol) {
                res.converged = true;
                return res;
            }
        }
    }
    return res;
}

void hermitize(DensityOperator& rho) {
    for (int n = 0; n < rho.nc; ++n) {
        for (int m = n; m < rho.nc; ++m) {
            const CMat s = 0.5 * (CMat(rho.block(n, m)) + CMat(rho.block(m, n)).adjoint());
            rho.block(n, m) = s;
            rho.block(m, n) = s.adjoint();
        }
    }
    rho.data /= rho.trace().real();
}

OracleResult finish(const Liouvillian& l, DensityOperator rho, const ModelParams& p,
                    const OracleOptions& opts) {
    hermitize(rho);
    OracleResult r;
    DensityOperator lr;
    l.apply(rho, lr);
    r.residual = lr.data.norm() / rho.data.norm();
    r.observables = quantum_observables(rho, l.ion(), p);
    r.truncation = truncation_diagnostic(rho);
    r.rho = std::move(rho);
    if (opts.check_truncation &&
        (r.truncation.top_cav > opts.truncation_limit || r.truncation.top_ion > opts.truncation_limit)) {
        throw TruncationInadequate("top-level populations cavity " + std::to_string(r.truncation.top_cav) +
                                   ", ion " + std::to_string(r.truncation.top_ion) + " exceed " +
                                   std::to_string(opts.truncation_limit));
    }
    return r;
}

}  // namespace

OracleResult evolve_to_steady(const TruncationSpec& spec, const ModelParams& p,
                              const OracleOptions& opts) {
    const Liouvillian l(spec, p);
    const int nc = l.nc(), ni = l.ni();

    if (opts.method == SteadyMethod::TimeEvolution) {
        const double dt = opts.dt > 0.0 ? opts.dt : std::min(default_dt(p), 2.0 / l.norm_bound());
        const double chunk = std::max(dt, std::round(1.0 / dt) * dt);
        DensityOperator x = l.to_eigen(ground_state(spec));
        DensityOperator k1, k2, k3, k4, tmp(nc, ni);
        double t = 0.0;
        int steps = 0;
        while (true) {
            const long long n = std::llround(chunk / dt);
            for (long long s = 0; s < n; ++s) {
                l.apply_eigen(x, k1);
                tmp.data = x.data + 0.5 * dt * k1.data;
                l.apply_eigen(tmp, k2);
                tmp.data = x.data + 0.5 * dt * k2.data;
                l.apply_eigen(tmp, k3);
                tmp.data = x.data + dt * k3.data;
                l.apply_eigen(tmp, k4);
                x.data += (dt / 6.0) * (k1.data + 2.0 * k2.data + 2.0 * k3.data + k4.data);
            }
            t += static_cast<double>(n) * dt;
            steps += static_cast<int>(n);
            l.apply_eigen(x, k1);
            if (k1.data.norm() < opts.tolerance * x.data.norm()) {
                break;
            }
            if (t >= opts.t_cap) {
                throw NoConvergence("master equation not stationary by t = " + std::to_string(opts.t_cap) +
                                    " (||L rho|| / ||rho|| = " +
                                    std::to_string(k1.data.norm() / x.data.norm()) + ")");
            }
        }
        OracleResult r = finish(l, l.from_eigen(x), p, opts);
        r.iterations = steps;
        r.time = t;
        return r;
    }

    // Solve L(x) + tr(x) Z = Z with Z the parity-even initial state, so the
    // solution is the trace-one steady state of its sector.
    const DensityOperator z = l.to_eigen(ground_state(spec));
    auto trace_eig = [nc](const DensityOperator& a) { return a.trace(); };
    DensityOperator xa(nc, ni), ya(nc, ni), pa(nc, ni);
    auto op = [&](const CVec& in, CVec& out) {
        xa.data = in;
        l.apply_eigen(xa, ya);
        out = ya.data + trace_eig(xa) * z.data;
    };
    auto prec = [&](const CVec& in, CVec& out) {
        xa.data = in;
        l.precondition(xa, pa, opts.precond_eps);
        out = pa.data;
    };
    CVec x = z.data;
    const GmresResult g = gmres(op, prec, z.data, x, opts.tolerance, opts.restart, opts.max_iterations);
    if (!g.converged) {
        throw NoConvergence("GMRES stalled at relative residual " + std::to_string(g.rel_residual) +
                            " after " + std::to_string(g.iterations) + " iterations");
    }
    DensityOperator xs(nc, ni);
    xs.data = x;
    OracleResult r = finish(l, l.from_eigen(xs), p, opts);
    r.iterations = g.iterations;
    return r;
}

}  // namespace ioncav
