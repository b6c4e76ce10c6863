#pragma once

namespace ioncav {

/// Physical parameters of the ion-cavity system.
///
/// Every rate is stored as a ratio to the trap frequency and every length in
/// units of the trap length x_omega, so the dynamics are integrated with
/// omega = 1. `omega` itself is only carried along for reporting.
struct ModelParams {
    double omega = 1.0;
    double kappa = 1.0;    ///< cavity half-linewidth
    double delta_c = 0.0;  ///< pump-cavity detuning
    double u0 = 0.0;       ///< single-photon dispersive shift
    double eta = 0.0;      ///< pump amplitude
    double gamma = 0.0;    ///< direct damping of the ion motion
    double xeq = 1.0;      ///< optical equilibrium position x_eq / x_omega

    double cooperativity() const { return u0 / kappa; }

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

/// U0 [(q2/xeq)^2 - 1]^2, the position-dependent dispersive shift.
double optical_shift(double q2, const ModelParams& p);

/// Effective cavity detuning seen at ion position q2.
double delta_eff(double q2, const ModelParams& p);

/// First three derivatives of delta_eff with respect to q2.
double d_delta_eff(double q2, const ModelParams& p);
double d2_delta_eff(double q2, const ModelParams& p);
double d3_delta_eff(double q2, const ModelParams& p);

/// Dimensionless pump strength eta / sqrt(kappa omega) * x_omega / x_eq.
double eta_eff(const ModelParams& p);

/// Pump amplitude (units of omega) that realizes the given eta_eff.
double eta_from_eta_eff(double eta_eff_value, const ModelParams& p);

/// Copy of `p` with the pump set from an eta_eff value.
ModelParams with_eta_eff(ModelParams p, double eta_eff_value);

}  // namespace ioncav
