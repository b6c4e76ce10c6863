#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "ioncav/errors.hpp"
#include "ioncav/metastability.hpp"

namespace ioncav {

namespace {

constexpr double kMinEigen = 1e-10;
constexpr double kLog2Pi = 1.8378770664093454836;

void check_component(const MixtureComponent& c) {
    Eigen::SelfAdjointEigenSolver<Mat2> es(c.cov);
    if (!c.cov.allFinite() || es.eigenvalues().minCoeff() < kMinEigen) {
        throw DegenerateComponent("mixture component covariance is degenerate (min eigenvalue " +
                                  std::to_string(es.eigenvalues().minCoeff()) + ")");
    }
}

MixtureComponent moments(const std::vector<Vec2>& samples, const std::vector<std::size_t>& idx,
                         double total) {
    MixtureComponent c;
    if (idx.size() < 2) {
        throw DegenerateComponent("mixture initialization left a group with fewer than 2 samples");
    }
    Vec2 m = Vec2::Zero();
    for (auto i : idx) {
        m += samples[i];
    }
    m /= static_cast<double>(idx.size());
    Mat2 s = Mat2::Zero();
    for (auto i : idx) {
        const Vec2 d = samples[i] - m;
        s += d * d.transpose();
    }
    c.mean = m;
    c.cov = s / static_cast<double>(idx.size());
    c.weight = static_cast<double>(idx.size()) / total;
    return c;
}

// log N(x; mean, cov) given the inverse and log-determinant.
double log_gauss(const Vec2& x, const Vec2& mean, const Mat2& inv, double logdet) {
    const Vec2 d = x - mean;
    return -0.5 * (d.dot(inv * d) + logdet) - kLog2Pi;
}

struct Prepared {
    std::vector<Mat2> inv;
    std::vector<double> logdet;
    std::vector<double> logw;
};

Prepared prepare(const MixtureModel& m) {
    Prepared p;
    for (const auto& c : m.components) {
        check_component(c);
        p.inv.push_back(c.cov.inverse());
        p.logdet.push_back(std::log(c.cov.determinant()));
        p.logw.push_back(c.weight > 0.0 ? std::log(c.weight) : -std::numeric_limits<double>::infinity());
    }
    return p;
}

// Fills responsibilities and returns the total log-likelihood.
double e_step(const std::vector<Vec2>& samples, const MixtureModel& m, Eigen::MatrixXd& resp) {
    const Prepared p = prepare(m);
    const std::size_t k = m.components.size();
    resp.resize(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(k));
    double ll = 0.0;
    std::vector<double> lp(k);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < k; ++j) {
            lp[j] = p.logw[j] + log_gauss(samples[i], m.components[j].mean, p.inv[j], p.logdet[j]);
            mx = std::max(mx, lp[j]);
        }
        double s = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            s += std::exp(lp[j] - mx);
        }
        const double lse = mx + std::log(s);
        ll += lse;
        for (std::size_t j = 0; j < k; ++j) {
            resp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = std::exp(lp[j] - lse);
        }
    }
    return ll;
}

void m_step(const std::vector<Vec2>& samples, const Eigen::MatrixXd& resp, MixtureModel& m) {
    const double n = static_cast<double>(samples.size());
    for (std::size_t j = 0; j < m.components.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        const double nk = resp.col(jj).sum();
        if (nk <= 0.0) {
            throw DegenerateComponent("mixture component lost all responsibility");
        }
        Vec2 mean = Vec2::Zero();
        for (std::size_t i = 0; i < samples.size(); ++i) {
            mean += resp(static_cast<Eigen::Index>(i), jj) * samples[i];
        }
        mean /= nk;
        Mat2 cov = Mat2::Zero();
        for (std::size_t i = 0; i < samples.size(); ++i) {
            const Vec2 d = samples[i] - mean;
            cov += resp(static_cast<Eigen::Index>(i), jj) * d * d.transpose();
        }
        auto& c = m.components[j];
        c.weight = nk / n;
        c.mean = mean;
        c.cov = 0.5 * (cov + cov.transpose()) / nk;
    }
}

}  // namespace

std::vector<Vec2> project(const Ensemble& e, Plane plane) {
    std::vector<Vec2> out;
    out.reserve(e.points.size());
    const int off = plane == Plane::Cavity ? 0 : 2;
    for (std::size_t i = 0; i < e.points.size(); ++i) {
        if (!e.escaped.empty() && e.escaped[i]) {
            continue;
        }
        out.emplace_back(e.points[i](off), e.points[i](off + 1));
    }
    return out;
}

MixtureModel initial_mixture(const std::vector<Vec2>& samples, std::size_t k, Plane plane) {
    if (k < 1 || samples.size() < 2 * k) {
        throw std::invalid_argument("initial_mixture: too few samples");
    }
    std::vector<std::size_t> all(samples.size());
    std::iota(all.begin(), all.end(), 0);
    const MixtureComponent global = moments(samples, all, static_cast<double>(samples.size()));
    Eigen::SelfAdjointEigenSolver<Mat2> es(global.cov);
    const Vec2 axis = es.eigenvectors().col(1);
    std::vector<double> proj(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        proj[i] = axis.dot(samples[i] - global.mean);
    }
    std::stable_sort(all.begin(), all.end(), [&](std::size_t a, std::size_t b) { return proj[a] < proj[b]; });
    MixtureModel m;
    m.plane = plane;
    const double n = static_cast<double>(samples.size());
    for (std::size_t j = 0; j < k; ++j) {
        const std::size_t lo = samples.size() * j / k;
        const std::size_t hi = samples.size() * (j + 1) / k;
        std::vector<std::size_t> idx(all.begin() + static_cast<std::ptrdiff_t>(lo),
                                     all.begin() + static_cast<std::ptrdiff_t>(hi));
        m.components.push_back(moments(samples, idx, n));
    }
    return m;
}

MixtureModel initial_mixture_at(const std::vector<Vec2>& samples, const std::vector<Vec2>& centers,
                                Plane plane) {
    if (centers.empty()) {
        throw std::invalid_argument("initial_mixture_at: no centres");
    }
    std::vector<std::vector<std::size_t>> groups(centers.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < centers.size(); ++j) {
            if ((samples[i] - centers[j]).squaredNorm() < (samples[i] - centers[best]).squaredNorm()) {
                best = j;
            }
        }
        groups[best].push_back(i);
    }
    MixtureModel m;
    m.plane = plane;
    for (std::size_t j = 0; j < centers.size(); ++j) {
        m.components.push_back(moments(samples, groups[j], static_cast<double>(samples.size())));
    }
    return m;
}

double mixture_log_likelihood(const std::vector<Vec2>& samples, const MixtureModel& m) {
    Eigen::MatrixXd resp;
    return e_step(samples, m, resp);
}

MixtureClassifier::MixtureClassifier(const MixtureModel& m) {
    const Prepared p = prepare(m);
    for (std::size_t j = 0; j < m.components.size(); ++j) {
        mean_.push_back(m.components[j].mean);
        inv_.push_back(p.inv[j]);
        offset_.push_back(p.logw[j] - 0.5 * p.logdet[j]);
    }
}

std::size_t MixtureClassifier::operator()(const Vec2& x) const {
    std::size_t best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < mean_.size(); ++j) {
        const Vec2 d = x - mean_[j];
        const double score = offset_[j] - 0.5 * d.dot(inv_[j] * d);
        if (score > best_score) {
            best_score = score;
            best = j;
        }
    }
    return best;
}

MixtureModel fit_mixture(const std::vector<Vec2>& samples, const MixtureModel& init,
                         const MixtureOptions& opts) {
    const std::size_t k = init.components.size();
    if (k < 1) {
        throw std::invalid_argument("fit_mixture: no components");
    }
    if (samples.size() < 50 * k) {
        throw std::invalid_argument("fit_mixture: need at least 50 samples per component (have " +
                                    std::to_string(samples.size()) + " for k = " + std::to_string(k) + ")");
    }
    MixtureModel m = init;
    m.log_likelihood.clear();
    m.iterations = 0;
    m.converged = false;
    Eigen::MatrixXd resp;
    double ll = e_step(samples, m, resp);
    m.log_likelihood.push_back(ll);
    for (int it = 0; it < opts.max_iter; ++it) {
        m_step(samples, resp, m);
        const double next = e_step(samples, m, resp);
        m.log_likelihood.push_back(next);
        m.iterations = it + 1;
        if (std::abs(next - ll) <= opts.rel_tol * std::abs(next)) {
            m.converged = true;
            break;
        }
        ll = next;
    }
    for (const auto& c : m.components) {
        check_component(c);
    }
    return m;
}

MixtureModel fit_mixture(const std::vector<Vec2>& samples, std::size_t k, const MixtureOptions& opts,
                         Plane plane) {
    if (samples.size() < 50 * k) {
        throw std::invalid_argument("fit_mixture: need at least 50 samples per component");
    }
    return fit_mixture(samples, initial_mixture(samples, k, plane), opts);
}

double EllipseRegion::area() const { return M_PI * a * b; }

EllipseRegion define_region(const MixtureComponent& c, double n_sigma) {
    if (!(n_sigma > 0.0)) {
        throw std::invalid_argument("n_sigma must be > 0");
    }
    Eigen::SelfAdjointEigenSolver<Mat2> es(c.cov);
    EllipseRegion r;
    r.center = c.mean;
    r.n_sigma = n_sigma;
    const Vec2 ev = es.eigenvalues().cwiseMax(0.0);
    r.a = n_sigma * std::sqrt(ev(1));
    r.b = n_sigma * std::sqrt(ev(0));
    const Vec2 major = es.eigenvectors().col(1);
    r.angle = std::atan2(major(1), major(0));
    return r;
}

std::vector<EllipseRegion> define_regions(const MixtureModel& m, double n_sigma) {
    std::vector<EllipseRegion> out;
    for (const auto& c : m.components) {
        out.push_back(define_region(c, n_sigma));
    }
    return out;
}

bool membership(const Vec2& point, const EllipseRegion& r) {
    const Vec2 d = point - r.center;
    const double c = std::cos(r.angle);
    const double s = std::sin(r.angle);
    const double u = (c * d(0) + s * d(1)) / r.a;
    const double v = (-s * d(0) + c * d(1)) / r.b;
    return u * u + v * v <= 1.0;
}

namespace {

bool boundary_touches(const EllipseRegion& from, const EllipseRegion& other) {
    const int n = 4096;
    const double c = std::cos(from.angle);
    const double s = std::sin(from.angle);
    for (int i = 0; i < n; ++i) {
        const double t = 2.0 * M_PI * i / n;
        const double u = from.a * std::cos(t);
        const double v = from.b * std::sin(t);
        const Vec2 p = from.center + Vec2(c * u - s * v, s * u + c * v);
        if (membership(p, other)) {
            return true;
        }
    }
    return false;
}

}  // namespace

bool regions_disjoint(const EllipseRegion& r1, const EllipseRegion& r2) {
    if (membership(r1.center, r2) || membership(r2.center, r1)) {
        return false;
    }
    return !boundary_touches(r1, r2) && !boundary_touches(r2, r1);
}

}  // namespace ioncav
