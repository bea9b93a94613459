#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace otdrsec {

/// Hermitian, unit-trace, positive semidefinite matrix on a truncated Fock
/// space (photon numbers 0 .. dim-1). Construction validates all three
/// properties; eigenvalues in [-1e-10, 0] are treated as numerical noise,
/// anything more negative is rejected.
class DensityMatrix {
public:
    explicit DensityMatrix(Eigen::MatrixXcd entries);

    const Eigen::MatrixXcd& entries() const { return m_; }
    Eigen::Index dim() const { return m_.rows(); }

    /// <0|rho|0>, the vacuum probability.
    double vacuum_probability() const { return m_(0, 0).real(); }

    /// Sum over m of m * rho_mm.
    double mean_photon_number() const;

    static DensityMatrix vacuum(Eigen::Index dim);
    static DensityMatrix pure(const Eigen::VectorXcd& state);

    /// Truncated coherent state |alpha><alpha|. Fails unless at least
    /// 1 - 1e-8 of the photon-number distribution fits below the truncation;
    /// the surviving amplitudes are renormalized.
    static DensityMatrix coherent(std::complex<double> alpha, Eigen::Index dim);

private:
    Eigen::MatrixXcd m_;
};

/// Per-Fock-level phase shifts phi_m (phi_0 pinned to 0 by convention).
struct PhaseProfile {
    std::vector<double> phases;

    /// phi_m = m * pi: the BB84 phase-flip profile. Applying it to a coherent
    /// state maps |alpha> to |-alpha>.
    static PhaseProfile pi_profile(Eigen::Index dim);
};

/// Entry (m,n) multiplied by exp(i(phi_m - phi_n)); diagonal untouched.
DensityMatrix apply_phase_code(const DensityMatrix& rho0, const PhaseProfile& phases);

/// Hermitian PSD square root via eigendecomposition.
Eigen::MatrixXcd matrix_sqrt(const DensityMatrix& rho);

/// tr sqrt(sqrt(b) a sqrt(b)) -- the square root of the Uhlmann fidelity.
/// Symmetric in its arguments and equal to |<psi|phi>| for pure inputs.
double sqrt_fidelity(const DensityMatrix& a, const DensityMatrix& b);

struct FidelityResult {
    double eta = 0.0;        // sqrt fidelity of (rho0, pi-coded rho0)
    double p0 = 0.0;         // vacuum probability of rho0
    double mu = 0.0;         // mean photon number of rho0
    double bound_a8 = 0.0;   // 2 p0 - 1
    double bound_mu = 0.0;   // 1 - 2 mu
};

/// Builds rho1 by applying the pi-profile to rho0 and evaluates the bound
/// chain eta >= 2 p0 - 1 >= 1 - 2 mu. Both bounds can be negative while eta
/// stays >= 0; the chain still holds.
FidelityResult verify_bound(const DensityMatrix& rho0);

/// The leakage-optimal pure state pair
///   xi0 = sqrt(1-mu)|0> + sqrt(mu)|1>,  xi1 = sqrt(1-mu)|0> - sqrt(mu)|1>.
/// Their sqrt fidelity is |1 - 2 mu|, which meets verify_bound with equality.
std::pair<Eigen::VectorXcd, Eigen::VectorXcd> optimal_tha_states(double mu,
                                                                 Eigen::Index dim);

/// Hilbert-Schmidt random mixed state (normalized A A* with complex Gaussian
/// A), optionally mixed with vacuum so its mean photon number becomes
/// target_mu. Deterministic in the seed.
DensityMatrix random_mixed_state(Eigen::Index dim, std::uint64_t seed,
                                 double target_mu = -1.0);

/// Runs `trials` random-state bound checks per dimension and returns one
/// FidelityResult per trial (plus the seed/dim bookkeeping for the JSON
/// audit dump).
struct FidelityAuditRecord {
    int dim = 0;
    std::uint64_t seed = 0;
    FidelityResult result;
};

std::vector<FidelityAuditRecord> fidelity_audit(const std::vector<int>& dims,
                                                int trials_per_dim,
                                                std::uint64_t master_seed);

void save_fidelity_audit_json(const std::vector<FidelityAuditRecord>& records,
                              const std::string& path);

} // namespace otdrsec
