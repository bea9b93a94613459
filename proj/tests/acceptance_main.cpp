// End-to-end acceptance gate. Each criterion prints exactly one line:
//   criterion N (<name>): PASS - <measured values>
// and the process exits nonzero when any criterion fails. The checks are
// quantitative replays of the toolkit's headline guarantees: leakage-bound
// arithmetic, the fidelity bound chain, the simulate->analyze round trip,
// the noise floor, the connector model and fit, operating-point verdicts,
// Monte-Carlo/analytic agreement, and byte-level determinism.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "otdrsec/analysis.hpp"
#include "otdrsec/connector.hpp"
#include "otdrsec/fock.hpp"
#include "otdrsec/layout.hpp"
#include "otdrsec/security.hpp"
#include "otdrsec/simulator.hpp"
#include "otdrsec/spectrum.hpp"

namespace {

namespace fs = std::filesystem;
using namespace otdrsec;

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) {
    char buf[768];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
}

Spectrum flat(double value, SpectrumUnit unit, SpectrumKind kind) {
    return Spectrum::constant(200.0, 2500.0, value, unit, kind);
}

Spectrum flat_db0() {
    return flat(0.0, SpectrumUnit::dB, SpectrumKind::transmittance);
}

Spectrum flat_eta(double eta) {
    return flat(eta, SpectrumUnit::fraction, SpectrumKind::efficiency);
}

// ---------------------------------------------------------------------------
// criterion 1: single-point leakage bounds with rounded constants

Outcome criterion1() {
    const auto t0 = std::chrono::steady_clock::now();
    const PhysicalConstants pc = PhysicalConstants::paper_rounded();
    const double eps = epsilon_from_qber(0.0);

    const double mu_a =
        mu_eve_from_power(eve_power(40.0, -250.0, -49.0), 1575.0, 5e5, pc);
    const double chi_a = holevo_bound_from_mu(mu_a, eps);
    const double mu_b =
        mu_eve_from_power(eve_power(-60.0, -160.0, -53.0), 1625.0, 5e5, pc);
    const double chi_b = holevo_bound_from_mu(mu_b, eps);
    const double ms = seconds_since(t0) * 1e3;

    const bool pass = mu_a >= 1.8e-16 && mu_a <= 2.2e-16 &&  //
                      chi_a >= 5e-15 && chi_a <= 5e-14 &&    //
                      mu_b >= 7e-18 && mu_b <= 9e-18 &&      //
                      chi_b >= 1e-16 && chi_b <= 1e-15;
    return {pass, fmt("mu_A %.4g in [1.8e-16,2.2e-16], chi_A %.4g bits in "
                      "[5e-15,5e-14]; mu_B %.4g in [7e-18,9e-18], chi_B %.4g "
                      "bits in [1e-16,1e-15] (%.2f ms)",
                      mu_a, chi_a, mu_b, chi_b, ms)};
}

// ---------------------------------------------------------------------------
// criterion 2: fidelity bound chain on random mixed states + optimal states

Outcome criterion2() {
    const auto t0 = std::chrono::steady_clock::now();

    const auto records = fidelity_audit({2, 4, 8}, 1000, 20250825ULL);
    int violations = 0;
    int mu_over = 0;
    double min_margin = std::numeric_limits<double>::infinity();
    for (const auto& rec : records) {
        const auto& r = rec.result;
        if (r.mu > 0.5 + 1e-12) ++mu_over;
        const double margin = r.eta - (1.0 - 2.0 * r.mu);
        min_margin = std::min(min_margin, margin);
        if (r.eta < 1.0 - 2.0 * r.mu - 1e-9) ++violations;
    }

    double worst_eq = 0.0;
    for (int dim : {2, 4, 8}) {
        for (double mu : {0.01, 0.1, 0.25, 0.5}) {
            const auto [xi0, xi1] = optimal_tha_states(mu, dim);
            const double eta = sqrt_fidelity(DensityMatrix::pure(xi0),
                                             DensityMatrix::pure(xi1));
            worst_eq = std::max(worst_eq, std::abs(eta - std::abs(1.0 - 2.0 * mu)));
        }
    }
    const double secs = seconds_since(t0);

    const bool pass = records.size() == 3000 && violations == 0 &&
                      mu_over == 0 && worst_eq <= 1e-10 && secs < 60.0;
    return {pass, fmt("%zu random mixed states (mu <= 0.5): %d bound "
                      "violations, min margin %.2e; optimal-state equality "
                      "max deviation %.2e <= 1e-10 (%.2f s < 60 s)",
                      records.size(), violations, min_margin, worst_eq, secs)};
}

// ---------------------------------------------------------------------------
// shared two-reflector reference setup for criteria 3 and 4

FiberLayout reference_layout() {
    return FiberLayout({FiberComponent::flat("connector A", 9.0, -50.0),
                        FiberComponent::flat("connector B", 11.0, -53.0)},
                       15.0, 1.468, default_rayleigh_spectrum());
}

SpadModel reference_spad() {
    return SpadModel(flat_eta(0.1), 2e-6, 1700.0);
}

AcquisitionConfig reference_config(std::uint64_t seed, SimMode mode) {
    return AcquisitionConfig{5e5,     150e-12,    60.0, 0.0,  0.0, 1e4,
                             flat_db0(), flat_db0(), 300e-12, seed, mode};
}

const Peak* nearest_peak(const std::vector<Peak>& peaks, double position_m) {
    const Peak* best = nullptr;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& p : peaks) {
        const double d = std::abs(p.distance_m - position_m);
        if (d < best_d) {
            best_d = d;
            best = &p;
        }
    }
    return best;
}

Outcome criterion3() {
    const auto t0 = std::chrono::steady_clock::now();
    const FiberLayout layout = reference_layout();
    const SpadModel spad = reference_spad();
    const AcquisitionConfig cfg = reference_config(11, SimMode::monte_carlo);

    const WavelengthGrid grid({1550.0});
    const BroadbandScan scan = simulate_scan(layout, spad, cfg, grid);
    const CalibrationData cal =
        make_calibration(spad, scan, cfg.circulator_t12_dB,
                         cfg.circulator_t23_dB, 1550.0);

    AnalysisOptions opt;
    opt.dead_time_s = spad.dead_time_s;
    const std::vector<Peak> peaks = detect_peaks(scan.traces[0], opt);
    const Peak* p9 = nearest_peak(peaks, 9.0);
    const Peak* p11 = nearest_peak(peaks, 11.0);
    if (!p9 || !p11 || p9 == p11)
        return {false, fmt("expected two distinct peaks near 9 m and 11 m, "
                           "got %zu peaks", peaks.size())};

    const double r9 = estimate_reflectance(p9->amplitude_counts,
                                           cfg.duration_s, cal);
    const double r11 = estimate_reflectance(p11->amplitude_counts,
                                            cfg.duration_s, cal);
    const double dark = estimate_dark_rate_cps(scan.traces[0], 16.0, opt);
    const double secs = seconds_since(t0);

    const bool pass = std::abs(p9->distance_m - 9.0) <= 0.02 &&
                      std::abs(p11->distance_m - 11.0) <= 0.02 &&
                      std::abs(r9 - (-50.0)) <= 1.0 &&
                      std::abs(r11 - (-53.0)) <= 1.0 &&
                      std::abs(dark - 1700.0) <= 150.0;
    return {pass, fmt("positions %.4f m / %.4f m (tol +-0.02 m), reflectances "
                      "%.2f dB / %.2f dB (targets -50/-53, tol +-1 dB), dark "
                      "rate %.0f cps (1700 +- 150) (%.1f s)",
                      p9->distance_m, p11->distance_m, r9, r11, dark, secs)};
}

Outcome criterion4() {
    const FiberLayout layout = reference_layout();
    const SpadModel spad = reference_spad();
    const AcquisitionConfig cfg = reference_config(0, SimMode::analytic);

    const WavelengthGrid grid({1550.0});
    const BroadbandScan scan = simulate_scan(layout, spad, cfg, grid);
    const CalibrationData cal =
        make_calibration(spad, scan, cfg.circulator_t12_dB,
                         cfg.circulator_t23_dB, 1550.0);
    AnalysisOptions opt;
    opt.dead_time_s = spad.dead_time_s;
    const double floor_db = estimate_noise_floor(scan.traces[0], cal, opt);

    const bool pass = floor_db <= -78.0;
    return {pass, fmt("noise-equivalent reflectance %.2f dB at 1550 nm "
                      "(target <= -80 dB, tolerance <= -78 dB)", floor_db)};
}

// ---------------------------------------------------------------------------
// criterion 5: connector cavity model and fit recovery

Spectrum connector_model_spectrum(const ConnectorModel& model,
                                  const WavelengthGrid& grid,
                                  double noise_sigma_db, std::uint32_t seed) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> noise(0.0, noise_sigma_db);
    std::vector<double> vals;
    vals.reserve(grid.size());
    for (double wl : grid.points_nm()) {
        double v = connector_reflectance_db(model, wl);
        if (noise_sigma_db > 0.0) v += noise(gen);
        vals.push_back(std::min(v, 0.0));
    }
    return Spectrum(grid, vals, SpectrumUnit::dB, SpectrumKind::reflectance);
}

Outcome criterion5() {
    const ConnectorModel ref{1.454, 1.474, 0.015};

    const double r1550 = connector_reflectance_db(ref, 1550.0);
    const bool center_ok = std::abs(r1550 - (-52.3)) <= 0.2;

    bool monotone = true;
    double prev = connector_reflectance_db(ref, 1100.0);
    for (double wl = 1125.0; wl <= 1800.0; wl += 25.0) {
        const double cur = connector_reflectance_db(ref, wl);
        if (!(cur < prev)) monotone = false;
        prev = cur;
    }
    const double drop = connector_reflectance_db(ref, 1100.0) -
                        connector_reflectance_db(ref, 1800.0);
    const bool drop_ok = std::abs(drop - 4.2) <= 0.5;

    const WavelengthGrid grid = WavelengthGrid::regular(1100.0, 1800.0, 20.0);
    const FitResult clean =
        fit_connector(connector_model_spectrum(ref, grid, 0.0, 0));
    const bool clean_ok = clean.residual_rms_dB <= 1e-6 && clean.converged;

    const FitResult noisy =
        fit_connector(connector_model_spectrum(ref, grid, 0.3, 37));
    const double h_err = std::abs(noisy.model.h_um - ref.h_um);
    const double nd_err = std::abs(noisy.model.n_d - ref.n_d);
    const bool noisy_ok = noisy.converged && h_err <= 0.003 && nd_err <= 0.03;

    const FitResult degenerate = fit_connector(
        Spectrum(grid, std::vector<double>(grid.size(), -52.0),
                 SpectrumUnit::dB, SpectrumKind::reflectance));
    const bool flat_flagged = !degenerate.converged || degenerate.at_boundary;

    const bool pass =
        center_ok && monotone && drop_ok && clean_ok && noisy_ok && flat_flagged;
    return {pass,
            fmt("R(1550) %.2f dB (-52.3 +- 0.2), monotone %s, 1100->1800 drop "
                "%.2f dB (4.2 +- 0.5); noiseless fit residual %.1e dB; noisy "
                "fit |dh| %.4f um (<= 0.003), |dn_d| %.4f (<= 0.03); flat "
                "spectrum flagged %s",
                r1550, monotone ? "yes" : "NO", drop, clean.residual_rms_dB,
                h_err, nd_err, flat_flagged ? "yes" : "NO")};
}

// ---------------------------------------------------------------------------
// criterion 6: operating-point boundary verdicts

Outcome criterion6() {
    const AcquisitionConfig cfg = reference_config(0, SimMode::analytic);
    const SpadModel boundary_spad(flat_eta(0.1), 2e-6, 1700.0);

    // Both limits sit exactly on their boundary: dead time = pulse period
    // and expected max rate = eta * f_pulse = 50 kcps.
    const double boundary_rate = 0.1 * 5e5;
    const OperatingPointVerdict at_boundary =
        check_operating_point(cfg, boundary_spad, boundary_rate, 1550.0);
    const bool boundary_ok =
        at_boundary.ok() && at_boundary.count_limit_satisfied &&
        at_boundary.dead_time_satisfied &&
        at_boundary.count_slack_cps == 0.0 &&
        at_boundary.dead_time_slack_s == 0.0;

    const SpadModel slow_spad(flat_eta(0.1), 2.1e-6, 1700.0);
    const OperatingPointVerdict dead_violated =
        check_operating_point(cfg, slow_spad, boundary_rate, 1550.0);
    const OperatingPointVerdict rate_violated =
        check_operating_point(cfg, boundary_spad, boundary_rate * 1.02, 1550.0);
    const bool violations_flagged =
        !dead_violated.ok() && !dead_violated.dead_time_satisfied &&
        !rate_violated.ok() && !rate_violated.count_limit_satisfied;

    const bool pass = boundary_ok && violations_flagged;
    return {pass, fmt("boundary verdict ok=%d with count slack %.1f cps and "
                      "dead-time slack %.1g s (both exactly zero); dead-time "
                      "violation flagged %s, count-rate violation flagged %s",
                      (int)at_boundary.ok(), at_boundary.count_slack_cps,
                      at_boundary.dead_time_slack_s,
                      !dead_violated.ok() ? "yes" : "NO",
                      !rate_violated.ok() ? "yes" : "NO")};
}

// ---------------------------------------------------------------------------
// criterion 7: Monte-Carlo means versus analytic expectations

struct C7Setup {
    const char* name;
    FiberLayout layout;
    SpadModel spad;
    double pulse_fwhm_s;
};

Outcome criterion7() {
    const auto t0 = std::chrono::steady_clock::now();
    const Spectrum eta = flat_eta(0.1);
    const Spectrum ray_off = flat(-400.0, SpectrumUnit::dB,
                                  SpectrumKind::reflectance);
    const Spectrum ray_80 = flat(-80.0, SpectrumUnit::dB,
                                 SpectrumKind::reflectance);

    std::vector<C7Setup> setups;
    setups.push_back({"single delta reflector",
                      FiberLayout({FiberComponent::flat("r9", 9.0, -50.0)},
                                  15.0, 1.468, ray_off),
                      SpadModel(eta, 0.0, 0.0), 0.0});
    setups.push_back({"two reflectors + dark counts",
                      FiberLayout({FiberComponent::flat("r9", 9.0, -50.0),
                                   FiberComponent::flat("r11", 11.0, -53.0)},
                                  15.0, 1.468, ray_off),
                      SpadModel(eta, 0.0, 1700.0), 300e-12});
    setups.push_back({"distributed backscatter + dark counts",
                      FiberLayout({}, 15.0, 1.468, ray_80),
                      SpadModel(eta, 0.0, 1700.0), 300e-12});

    const std::uint64_t seed_base = 500000;
    const int n_seeds = 100;
    double worst_z = 0.0;
    int stat_bins = 0;
    int exact_bins = 0;
    int z_failures = 0;
    int exact_failures = 0;

    for (std::size_t li = 0; li < setups.size(); ++li) {
        const C7Setup& s = setups[li];
        const auto cfg_for = [&](std::uint64_t seed, SimMode mode) {
            return AcquisitionConfig{5e5,        10e-9,      2.0,
                                     0.0,        0.0,        1e4,
                                     flat_db0(), flat_db0(), s.pulse_fwhm_s,
                                     seed,       mode};
        };
        const AcquisitionConfig acfg = cfg_for(0, SimMode::analytic);
        const OtdrTrace analytic = simulate_trace(s.layout, s.spad, acfg, 1550.0);
        const std::vector<double> rates =
            expected_bin_rates(s.layout, s.spad, acfg, 1550.0);
        AcquisitionConfig dark_cfg = acfg;
        dark_cfg.input_photons_per_pulse = 0.0;
        const std::vector<double> dark =
            expected_bin_rates(s.layout, s.spad, dark_cfg, 1550.0);

        const std::size_t n = rates.size();
        const double n_pulses = acfg.duration_s * acfg.f_pulse_Hz;
        std::vector<double> sum(n, 0.0);
        for (int k = 0; k < n_seeds; ++k) {
            const AcquisitionConfig mc = cfg_for(
                seed_base + li * 1000 + static_cast<std::uint64_t>(k),
                SimMode::monte_carlo);
            const OtdrTrace t = simulate_trace(s.layout, s.spad, mc, 1550.0);
            for (std::size_t b = 0; b < n; ++b) sum[b] += t.counts[b];
        }

        for (std::size_t b = 0; b < n; ++b) {
            const double mean = sum[b] / n_seeds;
            const double expect = analytic.counts[b];
            double q = (rates[b] - dark[b]) / acfg.f_pulse_Hz;
            if (q < 0.0) q = 0.0;
            const double var =
                n_pulses * q * (1.0 - q) + dark[b] * acfg.duration_s;
            if (var == 0.0) {
                ++exact_bins;
                if (mean != expect) ++exact_failures;
                continue;
            }
            ++stat_bins;
            const double z = std::abs(mean - expect) /
                             std::sqrt(var / n_seeds);
            worst_z = std::max(worst_z, z);
            if (z > 3.0) ++z_failures;
        }
    }
    const double secs = seconds_since(t0);

    const bool pass = z_failures == 0 && exact_failures == 0;
    return {pass, fmt("3 layouts x 100 seeds: %d sampled bins max |z| %.2f "
                      "(limit 3.00, %d over), %d zero-rate bins exact "
                      "(%d mismatched) (%.1f s)",
                      stat_bins, worst_z, z_failures, exact_bins,
                      exact_failures, secs)};
}

// ---------------------------------------------------------------------------
// criterion 8: byte-identical reruns through the command-line tool

int run_cli(const std::string& args) {
    const std::string cmd =
        std::string(OTDRSEC_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Compares the full file trees; returns the number of identical files or -1.
int compare_dirs(const fs::path& a, const fs::path& b) {
    std::map<std::string, fs::path> left, right;
    for (const auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file())
            left[fs::relative(e.path(), a).string()] = e.path();
    for (const auto& e : fs::recursive_directory_iterator(b))
        if (e.is_regular_file())
            right[fs::relative(e.path(), b).string()] = e.path();
    if (left.size() != right.size() || left.empty()) return -1;
    int n = 0;
    for (const auto& [rel, path] : left) {
        const auto it = right.find(rel);
        if (it == right.end() || slurp(path) != slurp(it->second)) return -1;
        ++n;
    }
    return n;
}

Outcome criterion8() {
    const fs::path demo = OTDRSEC_DEMO_DIR;
    const fs::path dir = fs::temp_directory_path() / "otdrsec-acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);

    nlohmann::json sim_cfg{
        {"layout", (demo / "layout_reference.json").string()},
        {"spad",
         {{"efficiency_csv", (demo / "spad_efficiency.csv").string()},
          {"dead_time_s", 2e-6},
          {"dark_rate_cps", 1700.0}}},
        {"acquisition",
         {{"f_pulse_hz", 5e5},
          {"bin_width_s", 150e-12},
          {"duration_s", 2.0},
          {"input_photons_per_pulse", 1e4},
          {"circulator_t12_csv", (demo / "circulator_t12.csv").string()},
          {"circulator_t23_csv", (demo / "circulator_t23.csv").string()},
          {"pulse_fwhm_s", 300e-12},
          {"seed", 424242},
          {"mode", "mc"}}},
        {"wavelengths", {{"points_nm", {1310.0, 1550.0}}}}};
    std::ofstream(dir / "sim.json") << sim_cfg.dump(2) << "\n";

    nlohmann::json audit_cfg{{"dims", {2, 4, 8}},
                             {"trials_per_dim", 200},
                             {"seed", 777}};
    std::ofstream(dir / "audit.json") << audit_cfg.dump(2) << "\n";

    const std::string sim_args = "simulate --config " +
                                 (dir / "sim.json").string() + " --out ";
    const std::string audit_args = "verify-fidelity --config " +
                                   (dir / "audit.json").string() + " --out ";
    if (run_cli(sim_args + (dir / "scan_a").string()) != 0 ||
        run_cli(sim_args + (dir / "scan_b").string()) != 0 ||
        run_cli(audit_args + (dir / "audit_a").string()) != 0 ||
        run_cli(audit_args + (dir / "audit_b").string()) != 0)
        return {false, "a rerun exited nonzero"};

    const int n_scan = compare_dirs(dir / "scan_a", dir / "scan_b");
    const int n_audit = compare_dirs(dir / "audit_a", dir / "audit_b");
    const bool pass = n_scan > 0 && n_audit > 0;
    return {pass, fmt("seeded simulate rerun: %d files byte-identical; "
                      "seeded fidelity-audit rerun: %d files byte-identical",
                      n_scan, n_audit)};
}

} // namespace

int main() {
    struct Entry {
        int id;
        const char* name;
        Outcome (*fn)();
    };
    const Entry entries[] = {
        {1, "single-point leakage bounds", criterion1},
        {2, "fidelity bound chain", criterion2},
        {3, "simulate-analyze round trip", criterion3},
        {4, "noise floor", criterion4},
        {5, "connector model and fit", criterion5},
        {6, "operating-point checks", criterion6},
        {7, "Monte Carlo vs analytic", criterion7},
        {8, "determinism", criterion8},
    };

    bool all_pass = true;
    for (const Entry& e : entries) {
        Outcome o;
        try {
            o = e.fn();
        } catch (const std::exception& ex) {
            o = {false, std::string("unexpected exception: ") + ex.what()};
        }
        std::printf("criterion %d (%s): %s - %s\n", e.id, e.name,
                    o.pass ? "PASS" : "FAIL", o.detail.c_str());
        std::fflush(stdout);
        all_pass = all_pass && o.pass;
    }
    return all_pass ? 0 : 1;
}
