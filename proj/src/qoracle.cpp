#include "ioncav/qoracle.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "ioncav/errors.hpp"
#include "ioncav/sde.hpp"

namespace ioncav {

namespace {

const std::complex<double> kI(0.0, 1.0);

}  // namespace

void TruncationSpec::validate(const ModelParams& p) const {
    if (n_cav_max < 2 || n_ion_max < 2) {
        throw std::invalid_argument("TruncationSpec: n_cav_max and n_ion_max must be >= 2");
    }
    if (n_cav_max > cav_cap || n_ion_max > ion_cap) {
        throw std::invalid_argument("TruncationSpec: cutoff exceeds the dimension cap " +
                                    std::to_string(cav_cap) + "x" + std::to_string(ion_cap));
    }
    if (even_parity && p.gamma > 0.0) {
        throw std::invalid_argument("TruncationSpec: the even-parity basis requires gamma = 0");
    }
}

std::complex<double> DensityOperator::trace() const {
    std::complex<double> t = 0.0;
    for (int n = 0; n < nc; ++n) {
        t += block(n, n).trace();
    }
    return t;
}

CMat DensityOperator::dense() const {
    CMat m(nc * ni, nc * ni);
    for (int n = 0; n < nc; ++n) {
        for (int k = 0; k < nc; ++k) {
            m.block(n * ni, k * ni, ni, ni) = block(n, k);
        }
    }
    return m;
}

DensityOperator DensityOperator::from_dense(const CMat& m, int nc, int ni) {
    DensityOperator r(nc, ni);
    for (int n = 0; n < nc; ++n) {
        for (int k = 0; k < nc; ++k) {
            r.block(n, k) = m.block(n * ni, k * ni, ni, ni);
        }
    }
    return r;
}

IonOperators build_ion_operators(const TruncationSpec& spec, const ModelParams& p) {
    const int big = spec.n_ion_max + 4;
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(big, big);
    for (int k = 1; k < big; ++k) {
        b(k - 1, k) = std::sqrt(static_cast<double>(k));
    }
    const Eigen::MatrixXd x = (b + b.transpose()) / std::sqrt(2.0);
    const Eigen::MatrixXd x2 = x * x;
    const Eigen::MatrixXd d = b - b.transpose();
    const Eigen::MatrixXd p2 = -0.5 * d * d;
    const Eigen::MatrixXd s = x2 / (p.xeq * p.xeq) - Eigen::MatrixXd::Identity(big, big);
    const Eigen::MatrixXd f = s * s;

    IonOperators ion;
    for (int k = 0; k < spec.n_ion_max; ++k) {
        if (!spec.even_parity || k % 2 == 0) {
            ion.levels.push_back(k);
        }
    }
    const int ni = static_cast<int>(ion.levels.size());
    auto pick = [&](const Eigen::MatrixXd& m) {
        Eigen::MatrixXd r(ni, ni);
        for (int i = 0; i < ni; ++i) {
            for (int j = 0; j < ni; ++j) {
                r(i, j) = m(ion.levels[i], ion.levels[j]);
            }
        }
        return r;
    };
    ion.x = pick(x);
    ion.x2 = pick(x2);
    ion.p2 = pick(p2);
    ion.profile = pick(f);
    ion.number = Eigen::MatrixXd::Zero(ni, ni);
    for (int i = 0; i < ni; ++i) {
        ion.number(i, i) = ion.levels[i];
    }
    if (!spec.even_parity) {
        ion.lower = pick(b);
    }
    return ion;
}

CMat build_hamiltonian(const TruncationSpec& spec, const ModelParams& p) {
    spec.validate(p);
    const IonOperators ion = build_ion_operators(spec, p);
    const int nc = spec.n_cav_max;
    const int ni = spec.ion_dim();
    CMat h = CMat::Zero(nc * ni, nc * ni);
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(ni, ni);
    for (int n = 0; n < nc; ++n) {
        h.block(n * ni, n * ni, ni, ni) =
            (ion.number + n * (p.u0 * ion.profile - p.delta_c * id)).cast<std::complex<double>>();
        if (n + 1 < nc) {
            // i eta (a^dag - a): <n+1| a^dag |n> = sqrt(n+1).
            const std::complex<double> c = kI * p.eta * std::sqrt(static_cast<double>(n + 1));
            h.block((n + 1) * ni, n * ni, ni, ni) += c * id;
            h.block(n * ni, (n + 1) * ni, ni, ni) -= c * id;
        }
    }
    return h;
}

Liouvillian::Liouvillian(const TruncationSpec& spec, const ModelParams& p)
    : spec_(spec), p_(p), nc_(spec.n_cav_max), ni_(spec.ion_dim()) {
    p.validate();
    spec.validate(p);
    ion_ = build_ion_operators(spec, p);
    const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(ni_, ni_);
    for (int n = 0; n < nc_; ++n) {
        h_.push_back(ion_.number + n * (p.u0 * ion_.profile - p.delta_c * id));
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h_.back());
        u_.push_back(es.eigenvectors());
        e_.push_back(es.eigenvalues());
    }
    for (int n = 0; n + 1 < nc_; ++n) {
        o_.push_back(u_[n].transpose() * u_[n + 1]);
    }
    if (p.gamma > 0.0) {
        for (int n = 0; n < nc_; ++n) {
            bt_.push_back(u_[n].transpose() * ion_.lower * u_[n]);
            nt_.push_back(u_[n].transpose() * ion_.number * u_[n]);
        }
    }
}

void Liouvillian::apply(const DensityOperator& rho, DensityOperator& out) const {
    if (out.nc != nc_ || out.ni != ni_) {
        out = DensityOperator(nc_, ni_);
    }
    const double k = p_.kappa;
    const double g = p_.gamma;
    const double eta = p_.eta;
    for (int n = 0; n < nc_; ++n) {
        for (int m = 0; m < nc_; ++m) {
            auto r = rho.block(n, m);
            CMat o = -kI * (h_[n] * r - r * h_[m]);
            if (n > 0) o += eta * std::sqrt(double(n)) * rho.block(n - 1, m);
            if (n + 1 < nc_) o -= eta * std::sqrt(double(n + 1)) * rho.block(n + 1, m);
            if (m + 1 < nc_) o -= eta * std::sqrt(double(m + 1)) * rho.block(n, m + 1);
            if (m > 0) o += eta * std::sqrt(double(m)) * rho.block(n, m - 1);
            if (n + 1 < nc_ && m + 1 < nc_) {
                o += 2.0 * k * std::sqrt(double((n + 1) * (m + 1))) * rho.block(n + 1, m + 1);
            }
            o -= k * double(n + m) * r;
            if (g > 0.0) {
                const auto& b = ion_.lower;
                const auto& nb = ion_.number;
                o += g * (2.0 * b * r * b.transpose() - nb * r - r * nb);
            }
            out.block(n, m) = o;
        }
    }
}

void Liouvillian::apply_eigen(const DensityOperator& x, DensityOperator& out) const {
    if (out.nc != nc_ || out.ni != ni_) {
        out = DensityOperator(nc_, ni_);
    }
    const double k = p_.kappa;
    const double g = p_.gamma;
    const double eta = p_.eta;
    for (int n = 0; n < nc_; ++n) {
        for (int m = 0; m < nc_; ++m) {
            auto r = x.block(n, m);
            CMat o(ni_, ni_);
            for (int j = 0; j < ni_; ++j) {
                for (int i = 0; i < ni_; ++i) {
                    o(i, j) = std::complex<double>(-k * double(n + m), -(e_[n](i) - e_[m](j))) * r(i, j);
                }
            }
            if (n > 0) o.noalias() += (eta * std::sqrt(double(n))) * (o_[n - 1].transpose() * x.block(n - 1, m));
            if (n + 1 < nc_) o.noalias() -= (eta * std::sqrt(double(n + 1))) * (o_[n] * x.block(n + 1, m));
            if (m + 1 < nc_) o.noalias() -= (eta * std::sqrt(double(m + 1))) * (x.block(n, m + 1) * o_[m].transpose());
            if (m > 0) o.noalias() += (eta * std::sqrt(double(m))) * (x.block(n, m - 1) * o_[m - 1]);
            if (n + 1 < nc_ && m + 1 < nc_) {
                o.noalias() += (2.0 * k * std::sqrt(double((n + 1) * (m + 1)))) *
                               (o_[n] * x.block(n + 1, m + 1) * o_[m].transpose());
            }
            if (g > 0.0) {
                o.noalias() += g * (2.0 * bt_[n] * r * bt_[m].transpose() - nt_[n] * r - r * nt_[m]);
            }
            out.block(n, m) = o;
        }
    }
}

void Liouvillian::precondition(const DensityOperator& r, DensityOperator& y, double eps) const {
    if (y.nc != nc_ || y.ni != ni_) {
        y = DensityOperator(nc_, ni_);
    }
    const double k = p_.kappa;
    for (int n = nc_ - 1; n >= 0; --n) {
        for (int m = nc_ - 1; m >= 0; --m) {
            CMat t = r.block(n, m);
            if (n + 1 < nc_ && m + 1 < nc_) {
                t.noalias() -= (2.0 * k * std::sqrt(double((n + 1) * (m + 1)))) *
                               (o_[n] * y.block(n + 1, m + 1) * o_[m].transpose());
            }
            for (int j = 0; j < ni_; ++j) {
                for (int i = 0; i < ni_; ++i) {
                    std::complex<double> lam(-k * double(n + m), -(e_[n](i) - e_[m](j)));
                    if (std::abs(lam) < eps) {
                        lam = -eps;
                    }
                    t(i, j) /= lam;
                }
            }
            y.block(n, m) = t;
        }
    }
}

DensityOperator Liouvillian::to_eigen(const DensityOperator& rho) const {
    DensityOperator x(nc_, ni_);
    for (int n = 0; n < nc_; ++n) {
        for (int m = 0; m < nc_; ++m) {
            x.block(n, m) = u_[n].transpose() * rho.block(n, m) * u_[m];
        }
    }
    return x;
}

DensityOperator Liouvillian::from_eigen(const DensityOperator& x) const {
    DensityOperator rho(nc_, ni_);
    for (int n = 0; n < nc_; ++n) {
        for (int m = 0; m < nc_; ++m) {
            rho.block(n, m) = u_[n] * x.block(n, m) * u_[m].transpose();
        }
    }
    return rho;
}

double Liouvillian::norm_bound() const {
    double emax = -1e300, emin = 1e300;
    for (const auto& e : e_) {
        emax = std::max(emax, e.maxCoeff());
        emin = std::min(emin, e.minCoeff());
    }
    return (emax - emin) + 4.0 * p_.kappa * nc_ + 4.0 * p_.eta * std::sqrt(double(nc_)) +
           4.0 * p_.gamma * ni_ * (spec_.even_parity ? 2 : 1);
}

DensityOperator lindblad_rhs(const DensityOperator& rho, const TruncationSpec& spec,
                             const ModelParams& p) {
    Liouvillian l(spec, p);
    DensityOperator out;
    l.apply(rho, out);
    return out;
}

DensityOperator ground_state(const TruncationSpec& spec) {
    DensityOperator r(spec.n_cav_max, spec.ion_dim());
    r.block(0, 0)(0, 0) = 1.0;
    return r;
}

DensityOperator coherent_state(const TruncationSpec& spec, std::complex<double> alpha) {
    const int nc = spec.n_cav_max;
    CVec c(nc);
    std::complex<double> term = std::exp(-0.5 * std::norm(alpha));
    for (int n = 0; n < nc; ++n) {
        c(n) = term;
        term *= alpha / std::sqrt(double(n + 1));
    }
    c /= c.norm();
    DensityOperator r(nc, spec.ion_dim());
    for (int n = 0; n < nc; ++n) {
        for (int m = 0; m < nc; ++m) {
            r.block(n, m)(0, 0) = c(n) * std::conj(c(m));
        }
    }
    return r;
}

ObservableRecord quantum_observables(const DensityOperator& rho, const IonOperators& ion,
                                     const ModelParams& p) {
    ObservableRecord r;
    double n_cav = 0.0, x2 = 0.0, p2 = 0.0, f = 0.0, tr = 0.0;
    for (int n = 0; n < rho.nc; ++n) {
        const auto b = rho.block(n, n);
        const double w = b.trace().real();
        tr += w;
        n_cav += n * w;
        x2 += (ion.x2 * b).trace().real();
        p2 += (ion.p2 * b).trace().real();
        f += (ion.profile * b).trace().real();
    }
    r.n_cav.value = n_cav / tr;
    r.x_sq.value = x2 / tr;
    r.p_sq.value = p2 / tr;
    r.delta_eff_mean.value = p.delta_c - p.u0 * f / tr;
    return r;
}

TruncationDiagnostic truncation_diagnostic(const DensityOperator& rho) {
    TruncationDiagnostic d;
    CMat ion = CMat::Zero(rho.ni, rho.ni);
    for (int n = 0; n < rho.nc; ++n) {
        ion += rho.block(n, n);
        if (n >= rho.nc - 2) {
            d.top_cav += rho.block(n, n).trace().real();
        }
    }
    for (int k = std::max(0, rho.ni - 2); k < rho.ni; ++k) {
        d.top_ion += ion(k, k).real();
    }
    return d;
}

double min_eigenvalue(const DensityOperator& rho) {
    const CMat m = rho.dense();
    Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (m + m.adjoint()), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

double odd_population(const DensityOperator& rho, const IonOperators& ion) {
    double s = 0.0;
    for (int n = 0; n < rho.nc; ++n) {
        for (int k = 0; k < rho.ni; ++k) {
            if (ion.levels[k] % 2 == 1) {
                s += rho.block(n, n)(k, k).real();
            }
        }
    }
    return s;
}

DensityOperator evolve_density(const Liouvillian& l, DensityOperator rho, double duration, double dt) {
    const long long steps = std::llround(duration / dt);
    DensityOperator k1, k2, k3, k4, tmp(rho.nc, rho.ni);
    for (long long s = 0; s < steps; ++s) {
        l.apply(rho, k1);
        tmp.data = rho.data + 0.5 * dt * k1.data;
        l.apply(tmp, k2);
        tmp.data = rho.data + 0.5 * dt * k2.data;
        l.apply(tmp, k3);
        tmp.data = rho.data + dt * k3.data;
        l.apply(tmp, k4);
        rho.data += (dt / 6.0) * (k1.data + 2.0 * k2.data + 2.0 * k3.data + k4.data);
    }
    return rho;
}

}  // namespace ioncav
