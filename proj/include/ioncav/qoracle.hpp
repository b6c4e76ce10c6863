#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "ioncav/model.hpp"
#include "ioncav/observables.hpp"

namespace ioncav {

struct TruncationSpec {
    int n_cav_max = 8;   ///< cavity Fock levels 0 .. n_cav_max-1
    int n_ion_max = 16;  ///< ion Fock levels 0 .. n_ion_max-1
    bool even_parity = false;  ///< keep only even ion levels (requires Gamma = 0)
    int cav_cap = 64;
    int ion_cap = 48;

    int ion_dim() const { return even_parity ? (n_ion_max + 1) / 2 : n_ion_max; }
    int dim() const { return n_cav_max * ion_dim(); }
    void validate(const ModelParams& p) const;
};

using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;

/// Density operator stored as n_cav^2 ion blocks rho_{nm}; block (n, m) is the
/// ion operator <n| rho |m> in the cavity Fock basis.
struct DensityOperator {
    int nc = 0;
    int ni = 0;
    CVec data;

    DensityOperator() = default;
    DensityOperator(int nc_, int ni_) : nc(nc_), ni(ni_), data(CVec::Zero(static_cast<Eigen::Index>(nc_) * nc_ * ni_ * ni_)) {}

    Eigen::Map<CMat> block(int n, int m) {
        return Eigen::Map<CMat>(data.data() + offset(n, m), ni, ni);
    }
    Eigen::Map<const CMat> block(int n, int m) const {
        return Eigen::Map<const CMat>(data.data() + offset(n, m), ni, ni);
    }
    std::complex<double> trace() const;
    /// Full (n_cav * n_ion)^2 matrix, index = n * n_ion + k.
    CMat dense() const;
    static DensityOperator from_dense(const CMat& m, int nc, int ni);

private:
    Eigen::Index offset(int n, int m) const {
        return (static_cast<Eigen::Index>(n) * nc + m) * ni * ni;
    }
};

/// Ion operators in the retained basis, built in a larger space and truncated.
struct IonOperators {
    Eigen::MatrixXd x;         ///< (b + b^dag)/sqrt(2)
    Eigen::MatrixXd x2;
    Eigen::MatrixXd p2;        ///< -(b - b^dag)^2 / 2
    Eigen::MatrixXd profile;   ///< ((x/xeq)^2 - 1)^2
    Eigen::MatrixXd number;
    Eigen::MatrixXd lower;     ///< b (zero-sized in the even-parity basis)
    std::vector<int> levels;   ///< Fock index of each retained basis state
};

IonOperators build_ion_operators(const TruncationSpec& spec, const ModelParams& p);

/// Full Hamiltonian matrix, index = n * n_ion + k.
CMat build_hamiltonian(const TruncationSpec& spec, const ModelParams& p);

/// Liouvillian precomputation shared by the time integrator and the Krylov
/// solver.
class Liouvillian {
public:
    Liouvillian(const TruncationSpec& spec, const ModelParams& p);

    int nc() const { return nc_; }
    int ni() const { return ni_; }
    const IonOperators& ion() const { return ion_; }

    /// drho/dt in the Fock basis.
    void apply(const DensityOperator& rho, DensityOperator& out) const;

    /// Same map in the per-photon-number eigenbasis of h_n.
    void apply_eigen(const DensityOperator& x, DensityOperator& out) const;
    /// Approximate inverse of the diagonal-plus-jump part in the eigenbasis.
    void precondition(const DensityOperator& r, DensityOperator& out, double eps) const;

    DensityOperator to_eigen(const DensityOperator& rho) const;
    DensityOperator from_eigen(const DensityOperator& x) const;

    /// Rough bound on the Liouvillian norm, used to cap the RK4 step.
    double norm_bound() const;

private:
    TruncationSpec spec_;
    ModelParams p_;
    int nc_, ni_;
    IonOperators ion_;
    std::vector<Eigen::MatrixXd> h_;  ///< Fock-basis h_n
    std::vector<Eigen::MatrixXd> u_; ///< eigenvectors of h_n
    std::vector<Eigen::VectorXd> e_; ///< eigenvalues of h_n
    std::vector<Eigen::MatrixXd> o_;  ///< U_n^T U_{n+1}
    std::vector<Eigen::MatrixXd> bt_; ///< U_n^T b U_n
    std::vector<Eigen::MatrixXd> nt_; ///< U_n^T b^dag b U_n
};

DensityOperator lindblad_rhs(const DensityOperator& rho, const TruncationSpec& spec,
                             const ModelParams& p);

/// Cavity vacuum times ion ground state.
DensityOperator ground_state(const TruncationSpec& spec);

/// Coherent cavity state |alpha> (truncated, renormalized) times ion ground state.
DensityOperator coherent_state(const TruncationSpec& spec, std::complex<double> alpha);

struct TruncationDiagnostic {
    double top_cav = 0.0;  ///< population of the top two cavity levels
    double top_ion = 0.0;  ///< population of the top two retained ion levels
};

enum class SteadyMethod { Krylov, TimeEvolution };

struct OracleOptions {
    SteadyMethod method = SteadyMethod::Krylov;
    double tolerance = 1e-10;   ///< GMRES relative residual, or ||RHS||/||rho|| for time evolution
    int restart = 200;
    int max_iterations = 5000;
    double precond_eps = 0.3;
    double dt = 0.0;            ///< time evolution step; 0 picks a stable default
    double t_cap = 2000.0;
    double truncation_limit = 1e-4;
    bool check_truncation = true;
};

struct OracleResult {
    DensityOperator rho;
    ObservableRecord observables;
    TruncationDiagnostic truncation;
    int iterations = 0;
    double residual = 0.0;  ///< ||L rho|| / ||rho||
    double time = 0.0;      ///< evolution time (time-evolution method)
};

ObservableRecord quantum_observables(const DensityOperator& rho, const IonOperators& ion,
                                     const ModelParams& p);
TruncationDiagnostic truncation_diagnostic(const DensityOperator& rho);

/// Smallest eigenvalue of the Hermitian part of rho.
double min_eigenvalue(const DensityOperator& rho);

/// Population outside the even ion-parity sector.
double odd_population(const DensityOperator& rho, const IonOperators& ion);

/// Steady state reached from the parity-even initial state vacuum x ground.
OracleResult evolve_to_steady(const TruncationSpec& spec, const ModelParams& p,
                              const OracleOptions& opts = {});

/// Fixed-step RK4 evolution of rho over `duration`.
DensityOperator evolve_density(const Liouvillian& l, DensityOperator rho, double duration, double dt);

struct JumpOptions {
    double dt = 0.005;
    std::vector<double> sample_times;
    unsigned threads = 1;
};

struct JumpSample {
    double t = 0.0;
    ObservableRecord observables;
};

/// Wave-function Monte Carlo from vacuum x ground with jump operators
/// sqrt(2 kappa) a and sqrt(2 Gamma) b.
std::vector<JumpSample> quantum_jump_trajectories(const TruncationSpec& spec, const ModelParams& p,
                                                  std::size_t n_traj, std::uint64_t seed,
                                                  const JumpOptions& opts);

}  // namespace ioncav
