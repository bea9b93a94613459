#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <otdrsec/analysis.hpp>
#include <otdrsec/connector.hpp>
#include <otdrsec/errors.hpp>
#include <otdrsec/fock.hpp>
#include <otdrsec/layout.hpp>
#include <otdrsec/security.hpp>
#include <otdrsec/simulator.hpp>
#include <otdrsec/spectrum.hpp>
#include <otdrsec/spectrum_io.hpp>

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace otdrsec;

json load_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file: " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw config_error("malformed JSON in " + path.string() + ": " + e.what());
    }
}

fs::path resolve(const fs::path& base_dir, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base_dir / path;
}

/// The sidecar metadata wins when present; otherwise the caller's expected
/// unit/kind apply (and the Spectrum constructor still validates the values).
Spectrum load_spectrum(const fs::path& path, SpectrumUnit unit, SpectrumKind kind) {
    if (!fs::exists(path))
        throw config_error("spectrum file not found: " + path.string());
    if (fs::exists(path.string() + ".meta.json"))
        return load_spectrum_csv(path.string());
    return load_spectrum_csv(path.string(), unit, kind);
}

Spectrum spectrum_or_flat(const json& cfg, const char* key, const fs::path& base,
                          SpectrumUnit unit, SpectrumKind kind, double flat_value) {
    if (cfg.contains(key))
        return load_spectrum(resolve(base, cfg.at(key).get<std::string>()), unit,
                             kind);
    return Spectrum::constant(200.0, 2500.0, flat_value, unit, kind);
}

SpadModel spad_from_json(const json& j, const fs::path& base) {
    Spectrum eta =
        load_spectrum(resolve(base, j.at("efficiency_csv").get<std::string>()),
                      SpectrumUnit::fraction, SpectrumKind::efficiency);
    std::optional<GateWindow> gate;
    if (j.contains("gate"))
        gate = GateWindow{j["gate"].value("delay_s", 0.0),
                          j["gate"].value("width_s", 0.0)};
    return SpadModel(std::move(eta), j.value("dead_time_s", 0.0),
                     j.value("dark_rate_cps", 0.0), gate);
}

SimMode mode_from_string(const std::string& s) {
    if (s == "mc") return SimMode::monte_carlo;
    if (s == "analytic") return SimMode::analytic;
    throw config_error("mode must be \"mc\" or \"analytic\", got \"" + s + "\"");
}

AcquisitionConfig acquisition_from_json(const json& j, const fs::path& base) {
    return AcquisitionConfig{
        j.value("f_pulse_hz", 5e5),
        j.value("bin_width_s", 150e-12),
        j.value("duration_s", 60.0),
        j.value("att_in_db", 0.0),
        j.value("att_out_db", 0.0),
        j.value("input_photons_per_pulse", 1e4),
        spectrum_or_flat(j, "circulator_t12_csv", base, SpectrumUnit::dB,
                         SpectrumKind::transmittance, 0.0),
        spectrum_or_flat(j, "circulator_t23_csv", base, SpectrumUnit::dB,
                         SpectrumKind::transmittance, 0.0),
        j.value("pulse_fwhm_s", 300e-12),
        j.value("seed", std::uint64_t{0}),
        mode_from_string(j.value("mode", "mc"))};
}

WavelengthGrid grid_from_json(const json& j) {
    if (j.contains("points_nm"))
        return WavelengthGrid(j.at("points_nm").get<std::vector<double>>());
    return WavelengthGrid::regular(j.at("start_nm").get<double>(),
                                   j.at("stop_nm").get<double>(),
                                   j.at("step_nm").get<double>());
}

AnalysisOptions analysis_from_json(const json& j) {
    AnalysisOptions o;
    o.snr_threshold = j.value("snr_threshold", o.snr_threshold);
    o.pulse_fwhm_s = j.value("pulse_fwhm_s", o.pulse_fwhm_s);
    o.floor_window_bins = j.value("floor_window_bins", o.floor_window_bins);
    o.integration_halfwidths =
        j.value("integration_halfwidths", o.integration_halfwidths);
    o.floor_margin_m = j.value("floor_margin_m", o.floor_margin_m);
    o.approximate_efficiency =
        j.value("approximate_efficiency", o.approximate_efficiency);
    return o;
}

/// Rewrites a JSON artifact with the input-assumption block embedded, so the
/// report stays self-describing without the writer modules knowing about
/// CLI-level context. Deterministic: no timestamps, sorted keys.
void inject_assumptions(const fs::path& file, const json& assumptions) {
    json doc = load_json_file(file);
    doc["assumptions"] = assumptions;
    std::ofstream out(file);
    if (!out) throw config_error("cannot rewrite " + file.string());
    out << doc.dump(2) << "\n";
}

struct CommandArgs {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> mode;
    std::optional<std::string> scan_dir;
    std::optional<double> f_eve_hz;
    std::optional<double> qber;
    std::optional<std::string> constants;
};

int cmd_simulate(const CommandArgs& args) {
    const fs::path cfg_path(args.config_path);
    const json cfg = load_json_file(cfg_path);
    const fs::path base = cfg_path.parent_path();

    const FiberLayout layout =
        load_layout_json(resolve(base, cfg.at("layout").get<std::string>()).string());
    const SpadModel spad = spad_from_json(cfg.at("spad"), base);
    AcquisitionConfig acq = acquisition_from_json(cfg.at("acquisition"), base);
    if (args.seed) acq.seed = *args.seed;
    if (args.mode) acq.mode = mode_from_string(*args.mode);
    const WavelengthGrid grid = grid_from_json(cfg.at("wavelengths"));

    if (cfg.contains("auto_attenuation")) {
        const json& aa = cfg.at("auto_attenuation");
        const AutoAttenuationResult res =
            auto_attenuation(layout, spad, acq, aa.at("wavelength_nm").get<double>(),
                             aa.value("safety", 0.9));
        acq.att_in_dB = res.att_in_dB;
        std::printf("auto attenuation: att_in = %.4f dB (predicted peak %.1f cps%s)\n",
                    res.att_in_dB, res.predicted_peak_cps,
                    res.already_compliant ? ", already compliant" : "");
    }

    const BroadbandScan scan = simulate_scan(layout, spad, acq, grid);
    fs::create_directories(args.out_dir);
    save_scan(scan, args.out_dir);

    for (std::size_t i = 0; i < grid.size(); ++i) {
        const std::vector<double> rates =
            expected_bin_rates(layout, spad, acq, grid[i]);
        const double max_rate = *std::max_element(rates.begin(), rates.end());
        const OperatingPointVerdict verdict =
            check_operating_point(acq, spad, max_rate, grid[i]);
        if (!verdict.ok())
            std::printf("warning: %.10g nm operating point: %s\n", grid[i],
                        verdict.summary().c_str());
    }

    std::printf("wrote %zu traces to %s\n", scan.traces.size(),
                args.out_dir.c_str());
    return 0;
}

int cmd_analyze(const CommandArgs& args) {
    const fs::path cfg_path(args.config_path);
    const json cfg = load_json_file(cfg_path);
    const fs::path base = cfg_path.parent_path();

    const std::string scan_dir =
        args.scan_dir ? *args.scan_dir
                      : resolve(base, cfg.at("scan_dir").get<std::string>()).string();
    const BroadbandScan scan = load_scan(scan_dir);
    const SpadModel spad = spad_from_json(cfg.at("spad"), base);
    const Spectrum t12 = spectrum_or_flat(cfg, "circulator_t12_csv", base,
                                          SpectrumUnit::dB,
                                          SpectrumKind::transmittance, 0.0);
    const Spectrum t23 = spectrum_or_flat(cfg, "circulator_t23_csv", base,
                                          SpectrumUnit::dB,
                                          SpectrumKind::transmittance, 0.0);
    const AnalysisOptions opts = cfg.contains("analysis")
                                     ? analysis_from_json(cfg.at("analysis"))
                                     : AnalysisOptions{};
    const double reference_fraction = cfg.value("reference_fraction", 0.9);

    std::vector<std::pair<double, CalibrationData>> cals;
    cals.reserve(scan.grid.size());
    for (double wl : scan.grid.points_nm())
        cals.emplace_back(
            wl, make_calibration(spad, scan, t12, t23, wl, reference_fraction));

    const ReflectanceMap map = build_reflectance_map(scan, cals, spad, opts);

    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    save_heatmap_csv(map, (out / "heatmap.csv").string());
    save_peaks_json(map, (out / "peaks.json").string());
    save_spectrum_csv(map.worst_case,
                      (out / "worst_case_reflectance.csv").string());
    save_spectrum_csv(map.noise_floor, (out / "noise_floor.csv").string());

    inject_assumptions(
        out / "peaks.json",
        json{{"scan_dir", scan_dir},
             {"monte_carlo", scan.monte_carlo},
             {"input_photons_per_pulse", scan.input_photons_per_pulse},
             {"dead_time_s", spad.dead_time_s},
             {"dark_rate_cps", spad.dark_rate_cps},
             {"reference_fraction", reference_fraction},
             {"snr_threshold", opts.snr_threshold},
             {"floor_window_bins", opts.floor_window_bins},
             {"approximate_efficiency", opts.approximate_efficiency}});

    std::size_t n_peaks = 0;
    for (const auto& p : map.peaks) n_peaks += p.size();
    std::printf("analyzed %zu wavelengths, %zu peaks total\n", map.grid.size(),
                n_peaks);
    return 0;
}

int cmd_fit_connector(const CommandArgs& args) {
    const fs::path cfg_path(args.config_path);
    const json cfg = load_json_file(cfg_path);
    const fs::path base = cfg_path.parent_path();

    const Spectrum data =
        load_spectrum(resolve(base, cfg.at("spectrum_csv").get<std::string>()),
                      SpectrumUnit::dB, SpectrumKind::reflectance);
    const double n_core = cfg.value("n_core", 1.454);
    FitOptions opts;
    opts.exact = cfg.value("exact", true);
    const std::string convention =
        cfg.value("convention", std::string("doubled_thickness"));
    if (convention == "standard")
        opts.convention = PhaseConvention::standard;
    else if (convention != "doubled_thickness")
        throw config_error("convention must be \"doubled_thickness\" or "
                           "\"standard\", got \"" + convention + "\"");
    opts.starts_per_axis = cfg.value("starts_per_axis", opts.starts_per_axis);
    opts.max_iterations = cfg.value("max_iterations", opts.max_iterations);

    const FitResult result = fit_connector(data, n_core, opts);

    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    save_fit_json(result, (out / "fit.json").string());
    save_fit_curve_csv(result, data, (out / "fit_curve.csv").string());

    inject_assumptions(out / "fit.json",
                       json{{"n_core", n_core},
                            {"exact", opts.exact},
                            {"phase_convention", to_string(opts.convention)},
                            {"starts_per_axis", opts.starts_per_axis},
                            {"max_iterations", opts.max_iterations},
                            {"spectral_points", data.size()}});

    std::printf("fit: h = %.6f um, n_d = %.6f, rms residual %.6f dB, %s%s\n",
                result.model.h_um, result.model.n_d, result.residual_rms_dB,
                result.converged ? "converged" : "not converged",
                result.at_boundary ? " (at parameter boundary)" : "");
    return 0;
}

int cmd_security_report(const CommandArgs& args) {
    const fs::path cfg_path(args.config_path);
    const json cfg = load_json_file(cfg_path);
    const fs::path base = cfg_path.parent_path();

    std::variant<double, Spectrum> p_max;
    std::string p_max_policy;
    const json& pm = cfg.at("p_max_dbm");
    if (pm.is_number()) {
        p_max = pm.get<double>();
        p_max_policy = "scalar";
    } else if (pm.is_object() && pm.contains("csv")) {
        p_max = load_spectrum(resolve(base, pm.at("csv").get<std::string>()),
                              SpectrumUnit::dBm, SpectrumKind::power);
        p_max_policy = "spectrum";
    } else {
        throw config_error("p_max_dbm must be a number or {\"csv\": path}");
    }

    Spectrum transmittance = load_spectrum(
        resolve(base, cfg.at("transmittance_csv").get<std::string>()),
        SpectrumUnit::dB, SpectrumKind::transmittance);
    Spectrum reflectance = load_spectrum(
        resolve(base, cfg.at("reflectance_csv").get<std::string>()),
        SpectrumUnit::dB, SpectrumKind::reflectance);

    LeakageParams params;
    params.f_eve_Hz = args.f_eve_hz ? *args.f_eve_hz : cfg.value("f_eve_hz", 5e5);
    params.qber = args.qber ? *args.qber : cfg.value("qber", 0.0);
    const std::string constants_name =
        args.constants ? *args.constants
                       : cfg.value("constants", std::string("codata"));
    const PhysicalConstants constants =
        PhysicalConstants::from_name(constants_name);

    const SecurityBudget budget{std::move(p_max), std::move(transmittance),
                                std::move(reflectance), params};
    const LeakageReport report =
        broadband_leakage(budget, constants, constants_name);

    fs::create_directories(args.out_dir);
    const fs::path out(args.out_dir);
    save_leakage_csv(report, (out / "leakage.csv").string());
    save_leakage_summary_json(report, (out / "leakage_summary.json").string());

    inject_assumptions(out / "leakage_summary.json",
                       json{{"f_eve_hz", params.f_eve_Hz},
                            {"qber", params.qber},
                            {"constants", constants_name},
                            {"p_max_policy", p_max_policy},
                            {"transmittance_convention", "two-way total"}});

    std::printf("worst case: %.10g nm, P_Eve = %.6f dBm, mu = %.6e, "
                "chi = %.6e bits\n",
                report.worst_case.wavelength_nm, report.worst_case.p_eve_dBm,
                report.worst_case.mu_eve, report.worst_case.chi_upper);
    return 0;
}

int cmd_verify_fidelity(const CommandArgs& args) {
    json cfg = json::object();
    if (!args.config_path.empty()) cfg = load_json_file(args.config_path);

    const std::vector<int> dims =
        cfg.value("dims", std::vector<int>{2, 4, 8});
    const int trials = cfg.value("trials_per_dim", 1000);
    const std::uint64_t seed =
        args.seed ? *args.seed : cfg.value("seed", std::uint64_t{20250825});

    const std::vector<FidelityAuditRecord> records =
        fidelity_audit(dims, trials, seed);

    fs::create_directories(args.out_dir);
    const fs::path out_file = fs::path(args.out_dir) / "fidelity_audit.json";
    save_fidelity_audit_json(records, out_file.string());
    inject_assumptions(out_file, json{{"dims", dims},
                                      {"trials_per_dim", trials},
                                      {"seed", seed}});

    int violations = 0;
    for (const auto& rec : records) {
        const FidelityResult& r = rec.result;
        if (!(r.eta >= r.bound_a8 - 1e-9 && r.bound_a8 >= r.bound_mu - 1e-9))
            ++violations;
    }
    std::printf("audited %zu states across %zu dimensions, violations: %d\n",
                records.size(), dims.size(), violations);
    if (violations > 0)
        throw numerical_error("fidelity bound chain violated for " +
                              std::to_string(violations) + " states");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Photon-counting nu-OTDR simulation and Trojan-horse "
                 "information-leakage analysis"};
    app.require_subcommand(1);

    CommandArgs args;
    std::uint64_t seed_value = 0;
    std::string mode_value, scan_value, constants_value;
    double f_eve_value = 0.0, qber_value = 0.0;

    auto add_common = [&](CLI::App* cmd, bool config_required) {
        auto* c = cmd->add_option("--config", args.config_path,
                                  "Pipeline config JSON");
        if (config_required) c->required()->check(CLI::ExistingFile);
        cmd->add_option("--out", args.out_dir, "Output directory")->required();
        return cmd;
    };

    CLI::App* sim = add_common(
        app.add_subcommand("simulate", "Run a broadband OTDR scan"), true);
    CLI::Option* sim_seed =
        sim->add_option("--seed", seed_value, "Override the scan master seed");
    CLI::Option* sim_mode =
        sim->add_option("--mode", mode_value, "Simulation mode")
            ->check(CLI::IsMember({"mc", "analytic"}));

    CLI::App* ana = add_common(
        app.add_subcommand("analyze", "Turn a scan into a reflectance map"),
        true);
    CLI::Option* ana_scan = ana->add_option("--scan", scan_value,
                                            "Scan directory (overrides config)");

    add_common(app.add_subcommand(
                   "fit-connector",
                   "Fit the damaged-layer cavity model to a spectrum"),
               true);

    CLI::App* sec = add_common(
        app.add_subcommand("security-report",
                           "Broadband Trojan-horse leakage bounds"),
        true);
    CLI::Option* sec_feve = sec->add_option("--f-eve-hz", f_eve_value,
                                            "Eve pulse rate override");
    CLI::Option* sec_qber =
        sec->add_option("--qber", qber_value, "QBER override")
            ->check(CLI::Range(0.0, 0.5));
    CLI::Option* sec_constants =
        sec->add_option("--constants", constants_value, "Constants set")
            ->check(CLI::IsMember({"codata", "paper"}));

    CLI::App* ver = add_common(
        app.add_subcommand("verify-fidelity",
                           "Audit the Fock-space fidelity bound chain"),
        false);
    CLI::Option* ver_seed =
        ver->add_option("--seed", seed_value, "Override the audit seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (sim_seed->count() || ver_seed->count()) args.seed = seed_value;
    if (sim_mode->count()) args.mode = mode_value;
    if (ana_scan->count()) args.scan_dir = scan_value;
    if (sec_feve->count()) args.f_eve_hz = f_eve_value;
    if (sec_qber->count()) args.qber = qber_value;
    if (sec_constants->count()) args.constants = constants_value;

    try {
        if (sim->parsed()) return cmd_simulate(args);
        if (ana->parsed()) return cmd_analyze(args);
        if (app.get_subcommand("fit-connector")->parsed())
            return cmd_fit_connector(args);
        if (sec->parsed()) return cmd_security_report(args);
        if (ver->parsed()) return cmd_verify_fidelity(args);
    } catch (const numerical_error& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
