#include "otdrsec/security.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "otdrsec/errors.hpp"

namespace otdrsec {

namespace {

// h(x) evaluated in long double with log1p so that arguments of order 1e-16
// keep their full relative precision.
double entropy_impl(long double x) {
    if (x <= 0.0L || x >= 1.0L) return 0.0;
    const long double ln2 = 0.693147180559945309417232121458L;
    const long double h = -x * std::log(x) / ln2 - (1.0L - x) * std::log1p(-x) / ln2;
    return static_cast<double>(h);
}

} // namespace

double binary_entropy(double x) {
    if (std::isnan(x) || x < 0.0 || x > 1.0)
        throw std::domain_error("binary_entropy: argument must be in [0, 1]");
    return entropy_impl(static_cast<long double>(x));
}

double eta_lower_bound(double mu_eve) {
    if (std::isnan(mu_eve) || mu_eve < 0.0)
        throw std::domain_error("eta_lower_bound: mean photon number must be >= 0");
    return std::max(1.0 - 2.0 * mu_eve, -1.0);
}

double epsilon_from_qber(double q) {
    if (std::isnan(q) || q < 0.0 || q > 0.5)
        throw std::domain_error("epsilon_from_qber: QBER must be in [0, 0.5]");
    return 1.0 - 2.0 * q;
}

double holevo_bound(double eta, double epsilon) {
    if (std::isnan(eta) || eta < -1.0 || eta > 1.0)
        throw std::domain_error("holevo_bound: eta must be in [-1, 1]");
    if (std::isnan(epsilon) || epsilon < -1.0 || epsilon > 1.0)
        throw std::domain_error("holevo_bound: epsilon must be in [-1, 1]");
    const long double arg =
        (1.0L - static_cast<long double>(eta) * static_cast<long double>(epsilon)) / 2.0L;
    return entropy_impl(arg);
}

double holevo_bound_from_mu(double mu_eve, double epsilon) {
    if (std::isnan(mu_eve) || mu_eve < 0.0)
        throw std::domain_error("holevo_bound_from_mu: mu must be >= 0");
    if (std::isnan(epsilon) || epsilon < -1.0 || epsilon > 1.0)
        throw std::domain_error("holevo_bound_from_mu: epsilon must be in [-1, 1]");
    // (1 - eta*eps)/2 with eta = 1 - 2 mu, expanded so no cancellation occurs
    const long double eps = epsilon;
    const long double arg = (1.0L - eps) / 2.0L + static_cast<long double>(mu_eve) * eps;
    return entropy_impl(std::clamp(arg, 0.0L, 1.0L));
}

double mu_eve_from_power(double p_eve_dBm, double wavelength_nm, double f_eve_Hz,
                         const PhysicalConstants& constants) {
    if (!(f_eve_Hz > 0.0))
        throw std::domain_error("mu_eve_from_power: f_Eve must be positive");
    if (!(wavelength_nm > 0.0))
        throw std::domain_error("mu_eve_from_power: wavelength must be positive");
    const double p_W = dbm_to_watts(p_eve_dBm);
    return p_W * (wavelength_nm * 1e-9) /
           (f_eve_Hz * constants.planck_J_per_Hz * constants.light_speed_m_per_s);
}

double eve_power(double p_max_dBm, double t_dB, double r_dB) {
    if (std::isnan(p_max_dBm) || std::isnan(t_dB) || std::isnan(r_dB))
        throw std::domain_error("eve_power: NaN input");
    if (t_dB > 0.0 || r_dB > 0.0)
        throw std::invalid_argument("eve_power: transmittance and reflectance must be <= 0 dB");
    return p_max_dBm + t_dB + r_dB;
}

void LeakageParams::validate() const {
    if (std::isnan(qber) || qber < 0.0 || qber > 0.5)
        throw std::invalid_argument("QBER must be in [0, 0.5]");
    if (!(f_eve_Hz > 0.0))
        throw std::invalid_argument("f_Eve must be positive");
}

LeakageReport broadband_leakage(const SecurityBudget& budget,
                                const PhysicalConstants& constants,
                                const std::string& constants_name) {
    budget.params.validate();
    constants.validate();

    std::vector<const Spectrum*> spectra{&budget.transmittance_dB, &budget.reflectance_dB};
    if (const auto* ps = std::get_if<Spectrum>(&budget.p_max_dBm)) spectra.push_back(ps);
    const std::vector<double> grid = common_grid(spectra);

    const double epsilon = epsilon_from_qber(budget.params.qber);

    LeakageReport report;
    report.params = budget.params;
    report.constants_name = constants_name;
    report.records.reserve(grid.size());

    for (double wl : grid) {
        const double p_max = std::holds_alternative<double>(budget.p_max_dBm)
                                 ? std::get<double>(budget.p_max_dBm)
                                 : std::get<Spectrum>(budget.p_max_dBm).sample(wl);
        LeakageRecord rec;
        rec.wavelength_nm = wl;
        rec.p_eve_dBm = eve_power(p_max, budget.transmittance_dB.sample(wl),
                                  budget.reflectance_dB.sample(wl));
        rec.mu_eve = mu_eve_from_power(rec.p_eve_dBm, wl, budget.params.f_eve_Hz, constants);
        rec.eta_lb = eta_lower_bound(rec.mu_eve);
        rec.chi_upper = holevo_bound_from_mu(rec.mu_eve, epsilon);
        report.records.push_back(rec);
    }

    report.worst_case = report.records.front();
    for (const auto& rec : report.records)
        if (rec.chi_upper > report.worst_case.chi_upper) report.worst_case = rec;

    return report;
}

namespace {

std::string fmt(double v, const char* spec = "%.9e") {
    char buf[64];
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

nlohmann::json record_json(const LeakageRecord& r) {
    return {{"wavelength_nm", r.wavelength_nm},
            {"p_eve_dbm", r.p_eve_dBm},
            {"mu_eve", r.mu_eve},
            {"eta_lb", r.eta_lb},
            {"chi_bits", r.chi_upper}};
}

} // namespace

void save_leakage_csv(const LeakageReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot write " + path);
    out << "wavelength_nm,p_eve_dbm,mu_eve,chi_bits\n";
    for (const auto& r : report.records)
        out << fmt(r.wavelength_nm, "%.10g") << ',' << fmt(r.p_eve_dBm) << ','
            << fmt(r.mu_eve) << ',' << fmt(r.chi_upper) << '\n';
}

void save_leakage_summary_json(const LeakageReport& report, const std::string& path) {
    nlohmann::json j{
        {"worst_case", record_json(report.worst_case)},
        {"assumptions",
         {{"f_eve_hz", report.params.f_eve_Hz},
          {"qber", report.params.qber},
          {"constants", report.constants_name},
          {"conventions",
           {"transmittance and reflectance stored as dB <= 0",
            "P_Eve[dBm] = P_max[dBm] + T[dB] + R[dB]",
            "chi = h((1-epsilon)/2 + mu*epsilon), epsilon = 1 - 2Q"}}}},
        {"n_wavelengths", report.records.size()}};
    std::ofstream out(path);
    if (!out) throw config_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

} // namespace otdrsec
