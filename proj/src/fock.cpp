#include "otdrsec/fock.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

#include <json.hpp>

#include "otdrsec/errors.hpp"
#include "otdrsec/rng.hpp"

namespace otdrsec {

namespace {

constexpr double kHermitianTol = 1e-12;
constexpr double kTraceTol = 1e-10;
constexpr double kPsdTol = 1e-10;

} // namespace

DensityMatrix::DensityMatrix(Eigen::MatrixXcd entries) : m_(std::move(entries)) {
    if (m_.rows() != m_.cols() || m_.rows() < 1)
        throw std::invalid_argument("density matrix must be square and non-empty");
    const double herm = (m_ - m_.adjoint()).cwiseAbs().maxCoeff();
    if (herm > kHermitianTol)
        throw numerical_error("density matrix not Hermitian (deviation " +
                              std::to_string(herm) + ")");
    const std::complex<double> tr = m_.trace();
    if (std::abs(tr - std::complex<double>(1.0, 0.0)) > kTraceTol)
        throw numerical_error("density matrix trace != 1");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m_, Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < -kPsdTol)
        throw numerical_error("density matrix not positive semidefinite (min eigenvalue " +
                              std::to_string(es.eigenvalues().minCoeff()) + ")");
}

double DensityMatrix::mean_photon_number() const {
    double mu = 0.0;
    for (Eigen::Index m = 1; m < m_.rows(); ++m)
        mu += static_cast<double>(m) * m_(m, m).real();
    return mu;
}

DensityMatrix DensityMatrix::vacuum(Eigen::Index dim) {
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
    m(0, 0) = 1.0;
    return DensityMatrix(std::move(m));
}

DensityMatrix DensityMatrix::pure(const Eigen::VectorXcd& state) {
    const double norm = state.norm();
    if (std::abs(norm - 1.0) > 1e-9)
        throw std::invalid_argument("pure state vector must be normalized");
    return DensityMatrix(state * state.adjoint() / (norm * norm));
}

DensityMatrix DensityMatrix::coherent(std::complex<double> alpha, Eigen::Index dim) {
    const double mu = std::norm(alpha);
    Eigen::VectorXcd amps(dim);
    // amplitudes alpha^m / sqrt(m!) times exp(-|alpha|^2/2)
    std::complex<double> a = 1.0;
    double logfact = 0.0;
    for (Eigen::Index m = 0; m < dim; ++m) {
        if (m > 0) {
            a *= alpha;
            logfact += std::log(static_cast<double>(m));
        }
        amps(m) = a * std::exp(-mu / 2.0 - logfact / 2.0);
    }
    const double mass = amps.squaredNorm();
    if (mass < 1.0 - 1e-8)
        throw std::invalid_argument(
            "coherent state truncation keeps only " + std::to_string(mass) +
            " of the probability; increase dim");
    amps /= std::sqrt(mass);
    return pure(amps);
}

PhaseProfile PhaseProfile::pi_profile(Eigen::Index dim) {
    PhaseProfile p;
    p.phases.resize(static_cast<std::size_t>(dim));
    for (Eigen::Index m = 0; m < dim; ++m)
        p.phases[static_cast<std::size_t>(m)] = static_cast<double>(m) * std::numbers::pi;
    return p;
}

DensityMatrix apply_phase_code(const DensityMatrix& rho0, const PhaseProfile& phases) {
    const Eigen::Index dim = rho0.dim();
    if (static_cast<Eigen::Index>(phases.phases.size()) != dim)
        throw std::invalid_argument("phase profile length does not match dimension");
    Eigen::MatrixXcd out(dim, dim);
    for (Eigen::Index m = 0; m < dim; ++m)
        for (Eigen::Index n = 0; n < dim; ++n) {
            const double dphi = phases.phases[static_cast<std::size_t>(m)] -
                                phases.phases[static_cast<std::size_t>(n)];
            out(m, n) = rho0.entries()(m, n) * std::polar(1.0, dphi);
        }
    return DensityMatrix(std::move(out));
}

namespace {

// Eigendecompose a Hermitian matrix, clamp tiny negative eigenvalues to
// zero, and reject real negativity.
Eigen::MatrixXcd psd_sqrt(const Eigen::MatrixXcd& m, const char* what) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m);
    if (es.info() != Eigen::Success)
        throw numerical_error(std::string(what) + ": eigendecomposition failed");
    Eigen::VectorXd ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev(i) < -kPsdTol)
            throw numerical_error(std::string(what) + ": negative eigenvalue " +
                                  std::to_string(ev(i)));
        if (ev(i) < 0.0) ev(i) = 0.0;
    }
    return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() *
           es.eigenvectors().adjoint();
}

} // namespace

Eigen::MatrixXcd matrix_sqrt(const DensityMatrix& rho) {
    return psd_sqrt(rho.entries(), "matrix_sqrt");
}

double sqrt_fidelity(const DensityMatrix& a, const DensityMatrix& b) {
    if (a.dim() != b.dim())
        throw std::invalid_argument("sqrt_fidelity: dimension mismatch");
    const Eigen::MatrixXcd sb = matrix_sqrt(b);
    Eigen::MatrixXcd inner = sb * a.entries() * sb;
    // enforce exact Hermiticity before the final eigensolve
    inner = 0.5 * (inner + inner.adjoint().eval());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(inner, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw numerical_error("sqrt_fidelity: eigendecomposition failed");
    // Eigenvalues of exactly-rank-deficient inner matrices come back as
    // +-O(eps * max); summing sqrt of those would inject sqrt(eps) ~ 1e-8
    // noise per zero mode. Truncate at the usual relative rank cutoff.
    const Eigen::Index n = es.eigenvalues().size();
    const double max_ev = std::max(es.eigenvalues()(n - 1), 0.0);
    const double cutoff = static_cast<double>(n) *
                          std::numeric_limits<double>::epsilon() * max_ev;
    double eta = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double ev = es.eigenvalues()(i);
        if (ev < -kPsdTol)
            throw numerical_error("sqrt_fidelity: inner matrix has negative eigenvalue " +
                                  std::to_string(ev));
        if (ev > cutoff) eta += std::sqrt(ev);
    }
    return eta;
}

FidelityResult verify_bound(const DensityMatrix& rho0) {
    const DensityMatrix rho1 = apply_phase_code(rho0, PhaseProfile::pi_profile(rho0.dim()));
    FidelityResult r;
    r.eta = sqrt_fidelity(rho0, rho1);
    r.p0 = rho0.vacuum_probability();
    r.mu = rho0.mean_photon_number();
    r.bound_a8 = 2.0 * r.p0 - 1.0;
    r.bound_mu = 1.0 - 2.0 * r.mu;
    return r;
}

std::pair<Eigen::VectorXcd, Eigen::VectorXcd> optimal_tha_states(double mu,
                                                                 Eigen::Index dim) {
    if (std::isnan(mu) || mu < 0.0 || mu > 1.0)
        throw std::domain_error("optimal_tha_states: mu must be in [0, 1]");
    if (dim < 2) throw std::invalid_argument("optimal_tha_states: dim must be >= 2");
    Eigen::VectorXcd xi0 = Eigen::VectorXcd::Zero(dim);
    Eigen::VectorXcd xi1 = Eigen::VectorXcd::Zero(dim);
    xi0(0) = xi1(0) = std::sqrt(1.0 - mu);
    xi0(1) = std::sqrt(mu);
    xi1(1) = -std::sqrt(mu);
    return {xi0, xi1};
}

DensityMatrix random_mixed_state(Eigen::Index dim, std::uint64_t seed, double target_mu) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::MatrixXcd a(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i)
        for (Eigen::Index j = 0; j < dim; ++j)
            a(i, j) = std::complex<double>(gauss(rng), gauss(rng));
    Eigen::MatrixXcd rho = a * a.adjoint();
    rho /= rho.trace().real();

    if (target_mu >= 0.0) {
        // mix with vacuum: mu scales linearly with the mixing weight
        double mu = 0.0;
        for (Eigen::Index m = 1; m < dim; ++m) mu += static_cast<double>(m) * rho(m, m).real();
        const double w = mu > target_mu ? target_mu / mu : 1.0;
        Eigen::MatrixXcd vac = Eigen::MatrixXcd::Zero(dim, dim);
        vac(0, 0) = 1.0;
        rho = w * rho + (1.0 - w) * vac;
    }
    rho = 0.5 * (rho + rho.adjoint().eval());
    return DensityMatrix(std::move(rho));
}

std::vector<FidelityAuditRecord> fidelity_audit(const std::vector<int>& dims,
                                                int trials_per_dim,
                                                std::uint64_t master_seed) {
    std::vector<FidelityAuditRecord> records;
    records.reserve(dims.size() * static_cast<std::size_t>(trials_per_dim));
    std::uint64_t stream = 0;
    for (int dim : dims) {
        if (dim < 2) throw std::invalid_argument("fidelity_audit: dim must be >= 2");
        for (int t = 0; t < trials_per_dim; ++t) {
            const std::uint64_t seed = derive_seed(master_seed, ++stream);
            // sweep target mu over (0, 0.5]
            const double target_mu = 0.5 * (static_cast<double>(t % 100) + 1.0) / 100.0;
            FidelityAuditRecord rec;
            rec.dim = dim;
            rec.seed = seed;
            rec.result = verify_bound(random_mixed_state(dim, seed, target_mu));
            records.push_back(rec);
        }
    }
    return records;
}

void save_fidelity_audit_json(const std::vector<FidelityAuditRecord>& records,
                              const std::string& path) {
    nlohmann::json arr = nlohmann::json::array();
    int violations = 0;
    for (const auto& rec : records) {
        const auto& r = rec.result;
        const bool ok = r.eta >= r.bound_a8 - 1e-9 && r.bound_a8 >= r.bound_mu - 1e-9;
        if (!ok) ++violations;
        arr.push_back({{"dim", rec.dim},
                       {"seed", rec.seed},
                       {"eta", r.eta},
                       {"p0", r.p0},
                       {"mu", r.mu},
                       {"bound_2p0_minus_1", r.bound_a8},
                       {"bound_1_minus_2mu", r.bound_mu},
                       {"holds", ok}});
    }
    nlohmann::json j{{"records", arr},
                     {"n_records", records.size()},
                     {"violations", violations}};
    std::ofstream out(path);
    if (!out) throw config_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

} // namespace otdrsec
