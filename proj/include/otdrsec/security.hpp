#pragma once

#include <string>
#include <variant>
#include <vector>

#include "otdrsec/constants.hpp"
#include "otdrsec/spectrum.hpp"

namespace otdrsec {

/// Binary entropy h(x) = -x log2 x - (1-x) log2(1-x), bits. h(0) = h(1) = 0.
double binary_entropy(double x);

/// Fidelity square-root lower bound eta >= 1 - 2*mu for the returned mean
/// photon number, clamped at -1.
double eta_lower_bound(double mu_eve);

/// State overlap attributed to the QBER: epsilon = 1 - 2Q, Q in [0, 0.5].
double epsilon_from_qber(double q);

/// Holevo-quantity upper bound h((1 - eta*epsilon)/2), bits.
///
/// Beware when eta is within a few ulp of 1: the interesting signal lives in
/// 1-eta and a double argument cannot carry it. When the mean photon number
/// is known, use holevo_bound_from_mu instead, which never forms 1-eta.
double holevo_bound(double eta, double epsilon);

/// Same bound parametrized by mu with eta = 1 - 2*mu substituted
/// algebraically: h((1-epsilon)/2 + mu*epsilon). Exact down to mu ~ 1e-300,
/// which matters because realistic leakage sits near mu ~ 1e-16 where the
/// eta route loses everything to cancellation.
double holevo_bound_from_mu(double mu_eve, double epsilon);

/// Mean photon number per pulse from the power reaching Eve:
/// mu = P[W] * lambda / (f_Eve * h * c).
double mu_eve_from_power(double p_eve_dBm, double wavelength_nm, double f_eve_Hz,
                         const PhysicalConstants& constants);

/// P_Eve[dBm] = P_max[dBm] + T[dB] + R[dB]. T and R must be <= 0 dB
/// (a positive value would mean the passive defense amplifies light).
double eve_power(double p_max_dBm, double t_dB, double r_dB);

struct LeakageParams {
    double qber = 0.0;        // Q in [0, 0.5]
    double f_eve_Hz = 5e5;    // Eve's pulse repetition frequency

    void validate() const;
};

/// Inputs of the broadband leakage evaluation. The maximum acceptable input
/// power may be a flat policy (laser damage threshold or watchdog
/// sensitivity, scalar dBm) or itself wavelength dependent.
struct SecurityBudget {
    std::variant<double, Spectrum> p_max_dBm;
    Spectrum transmittance_dB;   // total two-way defense transmittance, <= 0 dB
    Spectrum reflectance_dB;     // from OTDR analysis, <= 0 dB
    LeakageParams params;
};

struct LeakageRecord {
    double wavelength_nm = 0.0;
    double p_eve_dBm = 0.0;
    double mu_eve = 0.0;
    double eta_lb = 1.0;      // 1 - 2 mu, clamped to [-1, 1]
    double chi_upper = 0.0;   // bits
};

struct LeakageReport {
    std::vector<LeakageRecord> records;   // in ascending wavelength order
    LeakageRecord worst_case;             // argmax chi, ties -> lowest wavelength
    LeakageParams params;
    std::string constants_name;           // "codata" or "paper"
};

/// Evaluates eve_power -> mu -> chi at every point of the common grid of the
/// budget's spectra. Throws config_error when the spectra share no
/// wavelength range.
LeakageReport broadband_leakage(const SecurityBudget& budget,
                                const PhysicalConstants& constants,
                                const std::string& constants_name = "codata");

/// CSV rows `wavelength_nm,p_eve_dbm,mu_eve,chi_bits`.
void save_leakage_csv(const LeakageReport& report, const std::string& path);

/// JSON summary: worst-case record plus the full input-assumption block.
void save_leakage_summary_json(const LeakageReport& report, const std::string& path);

} // namespace otdrsec
