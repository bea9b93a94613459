#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <otdrsec/errors.hpp>
#include <otdrsec/security.hpp>

using namespace otdrsec;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// strictly relative tolerance; doctest's default Approx adds an absolute
// +1.0 scale term that would vacuously pass for values near 1e-16
doctest::Approx rel(double expected, double eps) {
    return doctest::Approx(expected).epsilon(eps).scale(0.0);
}

std::filesystem::path temp_dir() {
    auto dir = std::filesystem::temp_directory_path() / "otdrsec-test-security";
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("binary entropy") {
    CHECK(binary_entropy(0.0) == 0.0);
    CHECK(binary_entropy(1.0) == 0.0);
    CHECK(binary_entropy(0.5) == doctest::Approx(1.0).epsilon(1e-15));
    // h(0.11), mpmath 50 dps
    CHECK(binary_entropy(0.11) ==
          rel(0.499915958164528, 1e-13));
    // symmetry
    for (double x : {1e-3, 0.2, 0.37}) {
        CAPTURE(x);
        CHECK(binary_entropy(x) ==
              rel(binary_entropy(1.0 - x), 1e-12));
    }
    // near the edge, 1.0 - x itself quantizes x to ~5e-8 relative, so
    // symmetry can only be as good as the argument
    CHECK(binary_entropy(1e-9) == rel(binary_entropy(1.0 - 1e-9), 1e-6));
    // small-argument accuracy: h(1e-12) = 1e-12*(log2(1e12) + 1/ln 2) + O(x^2)
    const double h = binary_entropy(1e-12);
    const double expect = 1e-12 * (std::log2(1e12) + 1.0 / std::log(2.0));
    CHECK(h == rel(expect, 1e-9));
    CHECK_THROWS_AS(binary_entropy(-0.01), std::domain_error);
    CHECK_THROWS_AS(binary_entropy(1.01), std::domain_error);
}

TEST_CASE("eta lower bound and epsilon") {
    CHECK(eta_lower_bound(0.0) == doctest::Approx(1.0));
    CHECK(eta_lower_bound(0.25) == doctest::Approx(0.5));
    CHECK(eta_lower_bound(2.0) == doctest::Approx(-1.0)); // clamped
    CHECK_THROWS_AS(eta_lower_bound(-1e-3), std::domain_error);

    CHECK(epsilon_from_qber(0.0) == doctest::Approx(1.0));
    CHECK(epsilon_from_qber(0.11) == rel(0.78, 1e-14));
    CHECK(epsilon_from_qber(0.5) == doctest::Approx(0.0));
    CHECK_THROWS_AS(epsilon_from_qber(-0.01), std::domain_error);
    CHECK_THROWS_AS(epsilon_from_qber(0.51), std::domain_error);
}

TEST_CASE("Holevo bound, generic arguments") {
    // mpmath oracles: h((1-eps)/2 + mu*eps)
    CHECK(holevo_bound_from_mu(0.25, 1.0) ==
          rel(0.81127812445913286, 1e-13));
    CHECK(holevo_bound_from_mu(0.1, 0.8) ==
          rel(0.68007704572827981, 1e-13));
    CHECK(holevo_bound_from_mu(1e-8, 1.0) ==
          rel(2.8018119792774388e-7, 1e-12));

    // the eta route agrees where eta carries the signal comfortably
    for (double mu : {0.4, 0.1, 1e-3, 1e-6}) {
        CAPTURE(mu);
        CHECK(holevo_bound(1.0 - 2.0 * mu, 1.0) ==
              rel(holevo_bound_from_mu(mu, 1.0), 1e-9));
    }

    CHECK(holevo_bound(1.0, 1.0) == 0.0);
    CHECK(holevo_bound(0.0, 1.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(holevo_bound(1.5, 1.0), std::domain_error);
    CHECK_THROWS_AS(holevo_bound(0.5, -1.5), std::domain_error);
    CHECK_THROWS_AS(holevo_bound_from_mu(-1e-6, 1.0), std::domain_error);
}

TEST_CASE("Holevo bound at realistic leakage levels") {
    // mu = 2e-16: mpmath gives 1.0718708911817352e-14 bits.
    CHECK(holevo_bound_from_mu(2e-16, 1.0) ==
          rel(1.0718708911817352e-14, 1e-12));

    // Feeding the same point through the eta route quantizes 1-eta to
    // 2^-51 (the nearest double to 1-4e-16), so the result lands on
    // h(2^-52) instead -- the right order, 11% off. This is exactly why
    // the mu route exists.
    const double chi_eta = holevo_bound(1.0 - 4e-16, 1.0);
    CHECK(chi_eta == rel(1.186666210648312e-14, 1e-9));
    CHECK(std::abs(chi_eta - 1.0718708911817352e-14) <
          0.15 * 1.0718708911817352e-14);

    // mu route keeps working far below double resolution of 1-eta
    const double tiny = holevo_bound_from_mu(1e-200, 1.0);
    CHECK(tiny > 0.0);
    CHECK(tiny < 1e-190);
}

TEST_CASE("small-mu approximation chi ~ h(mu)") {
    // For Q=0 the bound reduces to h((1-eta)/2); with eta = 1-2mu the
    // argument is exactly mu, so the approximation error vs binary_entropy
    // is pure arithmetic. Via the mu route it stays tiny down to 1e-16.
    for (double mu : {1e-6, 1e-9, 1e-12, 1e-16}) {
        CAPTURE(mu);
        const double chi = holevo_bound_from_mu(mu, 1.0);
        const double h = binary_entropy(mu);
        CHECK(std::abs(chi - h) / h < 1e-3);
    }
    // The eta route satisfies the same tolerance while 1-2mu is still
    // comfortably representable.
    for (double mu : {1e-6, 1e-8}) {
        CAPTURE(mu);
        const double chi = holevo_bound(eta_lower_bound(mu), 1.0);
        const double h = binary_entropy(mu);
        CHECK(std::abs(chi - h) / h < 1e-3);
    }
}

TEST_CASE("Eve power composition") {
    CHECK(eve_power(-9.0, -100.0, -150.0) == doctest::Approx(-259.0));
    CHECK(eve_power(0.0, 0.0, 0.0) == doctest::Approx(0.0));
    CHECK(eve_power(-9.0, -kInf, -150.0) == -kInf);
    CHECK_THROWS_AS(eve_power(-9.0, 0.5, -150.0), std::invalid_argument);
    CHECK_THROWS_AS(eve_power(-9.0, -100.0, 0.5), std::invalid_argument);
}

TEST_CASE("mu from Eve power") {
    const auto paper = PhysicalConstants::paper_rounded();
    const auto codata = PhysicalConstants::codata();

    // -259 dBm at 1575 nm, f_Eve = 5e5 Hz, rounded constants:
    // mpmath 1.9937732765970974e-16
    CHECK(mu_eve_from_power(-259.0, 1575.0, 5e5, paper) ==
          rel(1.9937732765970974e-16, 1e-12));
    // -273 dBm at 1625 nm: mpmath 8.1893338827985667e-18
    CHECK(mu_eve_from_power(-273.0, 1625.0, 5e5, paper) ==
          rel(8.1893338827985667e-18, 1e-12));

    // scaling properties
    const double base = mu_eve_from_power(-100.0, 1550.0, 5e5, codata);
    CHECK(mu_eve_from_power(-90.0, 1550.0, 5e5, codata) ==
          rel(10.0 * base, 1e-12));
    CHECK(mu_eve_from_power(-100.0, 1550.0, 5e6, codata) ==
          rel(base / 10.0, 1e-12));

    CHECK(mu_eve_from_power(-kInf, 1550.0, 5e5, codata) == 0.0);
    CHECK_THROWS_AS(mu_eve_from_power(-100.0, 1550.0, 0.0, codata),
                    std::domain_error);
    CHECK_THROWS_AS(mu_eve_from_power(-100.0, -1.0, 5e5, codata),
                    std::domain_error);
}

TEST_CASE("broadband leakage report") {
    // Flat P_max = -9 dBm, T and R spectra on offset grids.
    SecurityBudget budget{
        -9.0,
        Spectrum(WavelengthGrid({1100.0, 1800.0}), {-100.0, -100.0},
                 SpectrumUnit::dB, SpectrumKind::transmittance),
        Spectrum(WavelengthGrid({1100.0, 1575.0, 1800.0}),
                 {-170.0, -150.0, -160.0}, SpectrumUnit::dB,
                 SpectrumKind::reflectance),
        LeakageParams{0.0, 5e5}};

    const auto report =
        broadband_leakage(budget, PhysicalConstants::paper_rounded(), "paper");
    REQUIRE(report.records.size() == 3);
    CHECK(report.constants_name == "paper");

    // worst case is the least-negative R: 1575 nm, P_Eve = -259 dBm
    CHECK(report.worst_case.wavelength_nm == doctest::Approx(1575.0));
    CHECK(report.worst_case.p_eve_dBm == rel(-259.0, 1e-12));
    CHECK(report.worst_case.mu_eve ==
          rel(1.9937732765970974e-16, 1e-12));
    CHECK(report.worst_case.chi_upper ==
          rel(1.0686234620438873e-14, 1e-12));
    CHECK(report.worst_case.eta_lb ==
          rel(1.0 - 2.0 * 1.9937732765970974e-16, 1e-14));

    // records sorted by wavelength, chi maximal at the worst case
    for (const auto& rec : report.records) {
        CHECK(rec.chi_upper <= report.worst_case.chi_upper);
    }
    CHECK(report.records.front().wavelength_nm == doctest::Approx(1100.0));
    CHECK(report.records.back().wavelength_nm == doctest::Approx(1800.0));

    // no overlap -> config_error
    SecurityBudget broken = budget;
    broken.transmittance_dB = Spectrum(WavelengthGrid({1900.0, 2000.0}),
                                       {-100.0, -100.0}, SpectrumUnit::dB,
                                       SpectrumKind::transmittance);
    CHECK_THROWS_AS(
        broadband_leakage(broken, PhysicalConstants::paper_rounded(), "paper"),
        config_error);
}

TEST_CASE("broadband leakage with nonzero QBER approaches h(Q)") {
    SecurityBudget budget{
        -9.0,
        Spectrum::constant(1100.0, 1800.0, -100.0, SpectrumUnit::dB,
                           SpectrumKind::transmittance),
        Spectrum::constant(1100.0, 1800.0, -150.0, SpectrumUnit::dB,
                           SpectrumKind::reflectance),
        LeakageParams{}};

    const auto clean =
        broadband_leakage(budget, PhysicalConstants::codata(), "codata");
    budget.params.qber = 0.11;
    const auto noisy =
        broadband_leakage(budget, PhysicalConstants::codata(), "codata");
    // Channel noise only helps the eavesdropper: with epsilon = 1 - 2Q the
    // argument of h moves from mu up to Q + mu*epsilon, so the bound grows
    // from ~h(mu) to ~h(Q). At mu ~ 1e-16 the difference from h(0.11) is
    // far below double resolution.
    CHECK(noisy.worst_case.chi_upper > clean.worst_case.chi_upper);
    CHECK(noisy.worst_case.chi_upper ==
          rel(0.499915958164528, 1e-12));

    LeakageParams bad;
    bad.qber = 0.6;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.qber = 0.1;
    bad.f_eve_Hz = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("leakage report serialization") {
    SecurityBudget budget{
        -9.0,
        Spectrum::constant(1100.0, 1800.0, -100.0, SpectrumUnit::dB,
                           SpectrumKind::transmittance),
        Spectrum::constant(1100.0, 1800.0, -150.0, SpectrumUnit::dB,
                           SpectrumKind::reflectance),
        LeakageParams{}};
    const auto report =
        broadband_leakage(budget, PhysicalConstants::codata(), "codata");

    const auto dir = temp_dir();
    const auto csv = (dir / "leakage.csv").string();
    const auto json = (dir / "leakage.json").string();
    save_leakage_csv(report, csv);
    save_leakage_summary_json(report, json);

    std::ifstream csv_in(csv);
    std::string header;
    REQUIRE(std::getline(csv_in, header));
    CHECK(header == "wavelength_nm,p_eve_dbm,mu_eve,chi_bits");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(csv_in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == report.records.size());

    std::ifstream json_in(json);
    std::stringstream buf;
    buf << json_in.rdbuf();
    CHECK(buf.str().find("worst_case") != std::string::npos);
    CHECK(buf.str().find("codata") != std::string::npos);
}
