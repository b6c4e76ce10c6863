#include "ioncav/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ioncav {

namespace {

void require(bool ok, const char* field, const char* rule) {
    if (!ok) {
        throw std::invalid_argument(std::string("ModelParams.") + field + " must be " + rule);
    }
}

}  // namespace

void ModelParams::validate() const {
    require(std::isfinite(omega) && omega > 0.0, "omega", "> 0");
    require(std::isfinite(kappa) && kappa > 0.0, "kappa", "> 0");
    require(std::isfinite(xeq) && xeq > 0.0, "xeq", "> 0");
    require(std::isfinite(eta) && eta >= 0.0, "eta", ">= 0");
    require(std::isfinite(gamma) && gamma >= 0.0, "gamma", ">= 0");
    require(std::isfinite(delta_c), "delta_c", "finite");
    require(std::isfinite(u0), "u0", "finite");
}

double optical_shift(double q2, const ModelParams& p) {
    const double s = q2 / p.xeq;
    const double w = s * s - 1.0;
    return p.u0 * w * w;
}

double delta_eff(double q2, const ModelParams& p) { return p.delta_c - optical_shift(q2, p); }

double d_delta_eff(double q2, const ModelParams& p) {
    const double x2 = p.xeq * p.xeq;
    return -4.0 * p.u0 * (q2 / x2) * (q2 * q2 / x2 - 1.0);
}

double d2_delta_eff(double q2, const ModelParams& p) {
    const double x2 = p.xeq * p.xeq;
    return -4.0 * p.u0 / x2 * (3.0 * q2 * q2 / x2 - 1.0);
}

double d3_delta_eff(double q2, const ModelParams& p) {
    const double x2 = p.xeq * p.xeq;
    return -24.0 * p.u0 * q2 / (x2 * x2);
}

double eta_eff(const ModelParams& p) { return p.eta / std::sqrt(p.kappa) / p.xeq; }

double eta_from_eta_eff(double eta_eff_value, const ModelParams& p) {
    if (eta_eff_value < 0.0) {
        throw std::invalid_argument("eta_eff must be >= 0");
    }
    return eta_eff_value * std::sqrt(p.kappa) * p.xeq;
}

ModelParams with_eta_eff(ModelParams p, double eta_eff_value) {
    p.eta = eta_from_eta_eff(eta_eff_value, p);
    return p;
}

}  // namespace ioncav
