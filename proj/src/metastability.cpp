#include "ioncav/metastability.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ioncav/errors.hpp"
#include "ioncav/parallel.hpp"
#include "ioncav/semiclassical.hpp"

namespace ioncav {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

std::vector<std::vector<double>> first_passage_times(const ModelParams& p,
                                                     const InitialDistribution& init,
                                                     const std::vector<TargetPredicate>& targets,
                                                     std::size_t n_traj, std::uint64_t seed,
                                                     const FirstPassageOptions& opts) {
    p.validate();
    if (init.components.empty() || targets.empty() || n_traj < 1) {
        throw std::invalid_argument("first_passage_times: empty source, targets or ensemble");
    }
    const EvolveOptions& ev = opts.evolve;
    const double dt = ev.dt > 0.0 ? ev.dt : default_dt(p);
    if (dt > max_stable_dt(p) * (1.0 + 1e-12)) {
        throw std::invalid_argument("dt exceeds the stability cap");
    }
    const long long max_steps = std::llround(opts.t_cap / dt);
    const Vec4 b = noise_amplitudes(p);
    const TwaDrift f(p);
    const double radius = ev.escape_radius_factor * p.xeq;

    std::vector<Mat4> factors;
    for (const auto& c : init.components) {
        factors.push_back(sampling_factor(c.cov));
    }
    const std::size_t nt = targets.size();
    std::vector<std::vector<double>> times(nt, std::vector<double>(n_traj, kInf));

    parallel_chunks(n_traj, ev.threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            TrajectoryRng rng(seed, i);
            const std::size_t k = i % init.components.size();
            Vec4 x = init.components[k].mean + factors[k] * rng.normal4();
            std::size_t remaining = nt;
            for (std::size_t j = 0; j < nt; ++j) {
                if (targets[j](x)) {
                    times[j][i] = 0.0;
                    --remaining;
                }
            }
            for (long long s = 1; s <= max_steps && remaining > 0; ++s) {
                const Vec4 u1 = rng.normal4();
                const Vec4 u2 = ev.integrator == Integrator::Taylor15 ? rng.normal4() : Vec4::Zero();
                x = step(ev.integrator, f, x, dt, b, make_increment(u1, u2, dt));
                if (!x.allFinite() || std::abs(x(2)) > radius) {
                    if (ev.escape == EscapePolicy::Abort) {
                        throw NonFiniteError(i, static_cast<double>(s) * dt,
                                             "first-passage trajectory " + std::to_string(i) +
                                                 " left the model domain");
                    }
                    break;
                }
                const double t = static_cast<double>(s) * dt;
                for (std::size_t j = 0; j < nt; ++j) {
                    if (std::isinf(times[j][i]) && targets[j](x)) {
                        times[j][i] = t;
                        --remaining;
                    }
                }
            }
        }
    });
    return times;
}

PassageTime summarize_passage(const std::vector<double>& times, double min_crossed_fraction) {
    if (times.empty()) {
        throw std::invalid_argument("summarize_passage: no trajectories");
    }
    double s = 0.0;
    std::size_t n = 0;
    for (double t : times) {
        if (std::isfinite(t)) {
            s += t;
            ++n;
        }
    }
    PassageTime r;
    r.crossed_fraction = static_cast<double>(n) / static_cast<double>(times.size());
    if (r.crossed_fraction < min_crossed_fraction || n == 0) {
        throw TimeoutError(r.crossed_fraction,
                           "first passage: only " + std::to_string(100.0 * r.crossed_fraction) +
                               "% of trajectories crossed before the time cap");
    }
    r.tau = s / static_cast<double>(n);
    double v = 0.0;
    for (double t : times) {
        if (std::isfinite(t)) {
            v += (t - r.tau) * (t - r.tau);
        }
    }
    r.stderr_ = n > 1 ? std::sqrt(v / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    return r;
}

PassageTime mean_first_passage(const ModelParams& p, const InitialDistribution& init,
                               const TargetPredicate& target, std::size_t n_traj,
                               std::uint64_t seed, const FirstPassageOptions& opts) {
    const auto times = first_passage_times(p, init, {target}, n_traj, seed, opts);
    return summarize_passage(times[0], opts.min_crossed_fraction);
}

RateEstimate two_state_rates(const PassageTime& tau_center, const PassageTime& tau_sides) {
    if (!std::isfinite(tau_center.tau) || !std::isfinite(tau_sides.tau)) {
        throw std::invalid_argument("two_state_rates: passage times must be finite");
    }
    RateEstimate r;
    auto rate = [](double tau) { return tau > 0.0 ? 1.0 / tau : kInf; };
    r.gamma_1 = rate(tau_center.tau);
    r.gamma_2 = rate(tau_sides.tau);
    r.gamma_t = r.gamma_1 + r.gamma_2;
    r.gamma_1_err = tau_center.stderr_ * r.gamma_1 * r.gamma_1;
    r.gamma_2_err = tau_sides.stderr_ * r.gamma_2 * r.gamma_2;
    r.gamma_t_err = std::hypot(r.gamma_1_err, r.gamma_2_err);
    r.band_low = r.gamma_t;
    r.band_high = r.gamma_t;
    r.timeout_fraction = std::max(1.0 - tau_center.crossed_fraction, 1.0 - tau_sides.crossed_fraction);
    return r;
}

void add_to_band(RateEstimate& r, double gamma_t) {
    r.band_low = std::min(r.band_low, gamma_t);
    r.band_high = std::max(r.band_high, gamma_t);
}

namespace {

GaussianState product_state(const MixtureComponent& cav, const MixtureComponent& ion) {
    GaussianState g;
    g.mean << cav.mean(0), cav.mean(1), ion.mean(0), ion.mean(1);
    g.cov = Mat4::Zero();
    g.cov.topLeftCorner<2, 2>() = cav.cov;
    g.cov.bottomRightCorner<2, 2>() = ion.cov;
    return g;
}

std::size_t nearest_component(const MixtureModel& m, const Vec2& point) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < m.components.size(); ++j) {
        if ((m.components[j].mean - point).squaredNorm() <
            (m.components[best].mean - point).squaredNorm()) {
            best = j;
        }
    }
    return best;
}

Vec2 cavity_mean_at(double x, const ModelParams& p) {
    const auto a = mean_field(x, p);
    return Vec2(std::sqrt(2.0) * a.real(), std::sqrt(2.0) * a.imag());
}

}  // namespace

RateAnalysis compute_rates(const ModelParams& p, const Ensemble& steady, std::uint64_t seed,
                           const RateOptions& opts) {
    const auto sides = stable_side_branches(p);
    if (sides.empty()) {
        throw DegenerateComponent("no stable side branch: the two-state reduction needs side states");
    }
    const double xs = sides.back().x_bar;
    const auto main_it = std::find(opts.n_sigmas.begin(), opts.n_sigmas.end(), opts.n_sigma);
    if (main_it == opts.n_sigmas.end()) {
        throw std::invalid_argument("compute_rates: n_sigma must be one of n_sigmas");
    }
    const std::size_t main_idx = static_cast<std::size_t>(main_it - opts.n_sigmas.begin());

    RateAnalysis out;
    const auto ion_samples = project(steady, Plane::Ion);
    const auto cav_samples = project(steady, Plane::Cavity);
    out.ion = fit_mixture(ion_samples,
                          initial_mixture_at(ion_samples, {Vec2(-xs, 0.0), Vec2(0.0, 0.0), Vec2(xs, 0.0)},
                                             Plane::Ion),
                          opts.mixture);
    out.cavity = fit_mixture(cav_samples,
                             initial_mixture_at(cav_samples, {cavity_mean_at(0.0, p), cavity_mean_at(xs, p)},
                                                Plane::Cavity),
                             opts.mixture);

    // Label ion components by position: left, centre, right.
    std::vector<std::size_t> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return out.ion.components[a].mean(0) < out.ion.components[b].mean(0);
    });
    const std::size_t left = order[0], centre = order[1], right = order[2];
    out.center_index = centre;
    const std::size_t cav_c = nearest_component(out.cavity, cavity_mean_at(0.0, p));
    const std::size_t cav_s = nearest_component(out.cavity, cavity_mean_at(xs, p));

    InitialDistribution from_center;
    from_center.components.push_back(product_state(out.cavity.components[cav_c], out.ion.components[centre]));
    InitialDistribution from_sides;
    from_sides.components.push_back(product_state(out.cavity.components[cav_s], out.ion.components[left]));
    from_sides.components.push_back(product_state(out.cavity.components[cav_s], out.ion.components[right]));

    const MixtureClassifier classify(out.ion);
    std::vector<TargetPredicate> to_sides, to_center;
    for (std::size_t k = 0; k < opts.n_sigmas.size(); ++k) {
        const double ns = opts.n_sigmas[k];
        const auto ion_r = define_regions(out.ion, ns);
        const auto cav_r = define_regions(out.cavity, ns);
        if (k == main_idx) {
            out.regions_overlap =
                !regions_disjoint(ion_r[centre], ion_r[left]) || !regions_disjoint(ion_r[centre], ion_r[right]);
        }
        const bool cav = opts.cavity_membership;
        const EllipseRegion rc = ion_r[centre], rl = ion_r[left], rr = ion_r[right];
        const EllipseRegion cc = cav_r[cav_c], cs = cav_r[cav_s];
        to_sides.push_back([=](const PhaseSpacePoint& x) {
            const Vec2 q(x(2), x(3));
            const bool in = (membership(q, rl) && classify(q) == left) || (membership(q, rr) && classify(q) == right);
            return in && (!cav || membership(Vec2(x(0), x(1)), cs));
        });
        to_center.push_back([=](const PhaseSpacePoint& x) {
            const Vec2 q(x(2), x(3));
            const bool in = membership(q, rc) && classify(q) == centre;
            return in && (!cav || membership(Vec2(x(0), x(1)), cc));
        });
    }

    const auto t_c = first_passage_times(p, from_center, to_sides, opts.n_traj, seed, opts.passage);
    const auto t_s = first_passage_times(p, from_sides, to_center, opts.n_traj, seed + 1, opts.passage);

    out.tau_center = summarize_passage(t_c[main_idx], opts.passage.min_crossed_fraction);
    out.tau_sides = summarize_passage(t_s[main_idx], opts.passage.min_crossed_fraction);
    out.rates = two_state_rates(out.tau_center, out.tau_sides);
    for (std::size_t k = 0; k < opts.n_sigmas.size(); ++k) {
        try {
            const auto r = two_state_rates(summarize_passage(t_c[k], opts.passage.min_crossed_fraction),
                                           summarize_passage(t_s[k], opts.passage.min_crossed_fraction));
            out.band_gamma_t.push_back(r.gamma_t);
            add_to_band(out.rates, r.gamma_t);
            out.rates.timeout_fraction = std::max(out.rates.timeout_fraction, r.timeout_fraction);
        } catch (const TimeoutError& e) {
            out.band_gamma_t.push_back(std::numeric_limits<double>::quiet_NaN());
            out.rates.timeout_fraction = std::max(out.rates.timeout_fraction, 1.0 - e.crossed_fraction());
        }
    }
    return out;
}

}  // namespace ioncav
