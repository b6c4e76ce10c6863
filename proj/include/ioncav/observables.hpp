#pragma once

namespace ioncav {

struct Estimate {
    double value = 0.0;
    double stderr_ = 0.0;
};

/// The four reported observables, each with a sampling error (zero for
/// deterministic methods).
struct ObservableRecord {
    Estimate n_cav;
    Estimate x_sq;
    Estimate p_sq;
    Estimate delta_eff_mean;
};

}  // namespace ioncav
