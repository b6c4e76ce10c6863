#include "ioncav/sde.hpp"

#include <cmath>
#include <stdexcept>

#include "ioncav/errors.hpp"

namespace ioncav {

Integrator parse_integrator(const std::string& name) {
    if (name == "taylor15") {
        return Integrator::Taylor15;
    }
    if (name == "euler") {
        return Integrator::Euler;
    }
    throw std::invalid_argument("unknown integrator '" + name + "' (expected taylor15|euler)");
}

std::string to_string(Integrator integrator) {
    return integrator == Integrator::Taylor15 ? "taylor15" : "euler";
}

EscapePolicy parse_escape_policy(const std::string& name) {
    if (name == "abort") {
        return EscapePolicy::Abort;
    }
    if (name == "condition") {
        return EscapePolicy::Condition;
    }
    throw std::invalid_argument("unknown escape policy '" + name + "' (expected abort|condition)");
}

std::string to_string(EscapePolicy policy) {
    return policy == EscapePolicy::Abort ? "abort" : "condition";
}

Vec4 TwaDrift::drift(const Vec4& x) const {
    const double d = delta_eff(x(2), p_);
    const double d1 = d_delta_eff(x(2), p_);
    const double n = x(0) * x(0) + x(1) * x(1) - 1.0;
    return Vec4(std::sqrt(2.0) * p_.eta - d * x(1) - p_.kappa * x(0),
                d * x(0) - p_.kappa * x(1),
                x(3) - p_.gamma * x(2),
                -x(2) + 0.5 * d1 * n - p_.gamma * x(3));
}

Mat4 TwaDrift::jacobian(const Vec4& x) const {
    const double d = delta_eff(x(2), p_);
    const double d1 = d_delta_eff(x(2), p_);
    const double d2 = d2_delta_eff(x(2), p_);
    const double n = x(0) * x(0) + x(1) * x(1) - 1.0;
    Mat4 j;
    j << -p_.kappa, -d, -d1 * x(1), 0.0,
         d, -p_.kappa, d1 * x(0), 0.0,
         0.0, 0.0, -p_.gamma, 1.0,
         d1 * x(0), d1 * x(1), -1.0 + 0.5 * d2 * n, -p_.gamma;
    return j;
}

Vec4 TwaDrift::second_order(const Vec4& x, const Vec4& dd) const {
    const double d1 = d_delta_eff(x(2), p_);
    const double d2 = d2_delta_eff(x(2), p_);
    const double d3 = d3_delta_eff(x(2), p_);
    const double n = x(0) * x(0) + x(1) * x(1) - 1.0;
    return Vec4(-dd(2) * d2 * x(1),
                dd(2) * d2 * x(0),
                0.0,
                (dd(0) + dd(1)) * d1 + dd(2) * 0.5 * d3 * n);
}

Vec4 drift(const PhaseSpacePoint& x, const ModelParams& p) { return TwaDrift(p).drift(x); }

Mat4 diffusion(const ModelParams& p) {
    Mat4 d = Mat4::Zero();
    d.diagonal() << p.kappa, p.kappa, p.gamma, p.gamma;
    return d;
}

Vec4 noise_amplitudes(const ModelParams& p) {
    return diffusion(p).diagonal().cwiseSqrt();
}

NoiseIncrement make_increment(const Vec4& u1, const Vec4& u2, double dt) {
    NoiseIncrement n;
    const double sq = std::sqrt(dt);
    n.dw = u1 * sq;
    n.dz = 0.5 * dt * sq * (u1 + u2 / std::sqrt(3.0));
    return n;
}

NoiseIncrement combine_increments(const NoiseIncrement& first, const NoiseIncrement& second,
                                  double dt_each) {
    NoiseIncrement n;
    n.dw = first.dw + second.dw;
    n.dz = first.dz + first.dw * dt_each + second.dz;
    return n;
}

namespace {

PhaseSpacePoint checked(const PhaseSpacePoint& y) {
    if (!y.allFinite()) {
        throw NonFiniteError(0, 0.0, "integration step produced a non-finite component");
    }
    return y;
}

}  // namespace

PhaseSpacePoint step_taylor15(const PhaseSpacePoint& x, double dt, const NoiseIncrement& n,
                              const ModelParams& p) {
    return checked(step_taylor15(TwaDrift(p), x, dt, noise_amplitudes(p), n));
}

PhaseSpacePoint step_euler(const PhaseSpacePoint& x, double dt, const NoiseIncrement& n,
                           const ModelParams& p) {
    return checked(step_euler(TwaDrift(p), x, dt, noise_amplitudes(p), n));
}

TrajectoryRng::TrajectoryRng(std::uint64_t seed, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    engine_.seed(seq);
}

double max_stable_dt(const ModelParams& p) {
    const double dmax = std::max(std::abs(p.delta_c), std::abs(p.delta_c - p.u0));
    double rate = std::max(1.0, p.kappa);
    rate = std::max(rate, dmax);
    return 0.05 / rate;
}

double default_dt(const ModelParams& p) { return std::min(0.01, max_stable_dt(p)); }

}  // namespace ioncav
