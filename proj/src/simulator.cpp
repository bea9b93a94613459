#include "otdrsec/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <json.hpp>

#include "otdrsec/constants.hpp"
#include "otdrsec/errors.hpp"
#include "otdrsec/rng.hpp"

namespace otdrsec {

namespace {

// The time<->distance map uses the physical light speed; the rounded
// constants toggle only affects photon-energy arithmetic in the security
// engine.
const double kLightSpeed = PhysicalConstants::codata().light_speed_m_per_s;

double gaussian_cdf(double x, double mean, double sigma) {
    return 0.5 * (1.0 + std::erf((x - mean) / (sigma * std::sqrt(2.0))));
}

/// Live seconds of [lo, hi) under the optional gate, both relative to the
/// pulse trigger.
double live_overlap_s(double lo, double hi, const std::optional<GateWindow>& gate) {
    if (!gate) return std::max(0.0, hi - lo);
    const double g0 = gate->delay_s;
    const double g1 = gate->delay_s + gate->width_s;
    return std::max(0.0, std::min(hi, g1) - std::max(lo, g0));
}

double sample_or_config_error(const Spectrum& s, double wavelength_nm,
                              const std::string& what) {
    try {
        return s.sample(wavelength_nm);
    } catch (const std::out_of_range&) {
        char buf[160];
        std::snprintf(buf, sizeof buf,
                      "%s does not cover %.6g nm", what.c_str(), wavelength_nm);
        throw config_error(buf);
    }
}

} // namespace

SpadModel::SpadModel(Spectrum quantum_efficiency_, double dead_time_s_,
                     double dark_rate_cps_, std::optional<GateWindow> gate_)
    : quantum_efficiency(std::move(quantum_efficiency_)),
      dead_time_s(dead_time_s_),
      dark_rate_cps(dark_rate_cps_),
      gate(gate_) {
    if (quantum_efficiency.unit() != SpectrumUnit::fraction ||
        quantum_efficiency.kind() != SpectrumKind::efficiency)
        throw config_error("SPAD quantum efficiency must be a fraction/efficiency spectrum");
    if (!(dead_time_s >= 0.0))
        throw config_error("SPAD dead time must be >= 0");
    if (!(dark_rate_cps >= 0.0))
        throw config_error("SPAD dark rate must be >= 0");
    if (gate && !(gate->width_s > 0.0))
        throw config_error("SPAD gate width must be > 0");
    if (gate && !(gate->delay_s >= 0.0))
        throw config_error("SPAD gate delay must be >= 0");
}

void AcquisitionConfig::validate() const {
    if (!(f_pulse_Hz > 0.0)) throw config_error("f_pulse_Hz must be > 0");
    if (!(bin_width_s > 0.0)) throw config_error("bin_width_s must be > 0");
    if (!(duration_s > 0.0)) throw config_error("duration_s must be > 0");
    if (!(att_in_dB <= 0.0) || !(att_out_dB <= 0.0))
        throw config_error("attenuator settings must be <= 0 dB");
    if (!(input_photons_per_pulse >= 0.0))
        throw config_error("input_photons_per_pulse must be >= 0");
    if (!(pulse_fwhm_s >= 0.0)) throw config_error("pulse_fwhm_s must be >= 0");
}

std::size_t n_bins(double f_pulse_Hz, double bin_width_s) {
    // Tiny backoff so an exact integer period/bin ratio is not pushed up by
    // one bin through floating-point round-off.
    const double ratio = 1.0 / (f_pulse_Hz * bin_width_s);
    return static_cast<std::size_t>(std::ceil(ratio - 1e-9));
}

double delay_of_distance(double distance_m, double group_index) {
    return 2.0 * distance_m * group_index / kLightSpeed;
}

std::size_t bin_of_distance(double distance_m, double group_index,
                            double bin_width_s) {
    return static_cast<std::size_t>(
        std::floor(delay_of_distance(distance_m, group_index) / bin_width_s));
}

double distance_of_bin(std::size_t b, double group_index, double bin_width_s) {
    const double t = (static_cast<double>(b) + 0.5) * bin_width_s;
    return t * kLightSpeed / (2.0 * group_index);
}

OperatingPointVerdict check_operating_point(const AcquisitionConfig& config,
                                            const SpadModel& spad,
                                            double expected_max_rate_cps,
                                            double wavelength_nm) {
    config.validate();
    OperatingPointVerdict v;
    const double eta = sample_or_config_error(spad.quantum_efficiency,
                                              wavelength_nm, "SPAD efficiency");
    v.count_limit_cps = eta * config.f_pulse_Hz;
    v.count_slack_cps = v.count_limit_cps - expected_max_rate_cps;
    v.count_limit_satisfied = expected_max_rate_cps <= v.count_limit_cps;
    v.period_s = 1.0 / config.f_pulse_Hz;
    v.dead_time_slack_s = v.period_s - spad.dead_time_s;
    v.dead_time_satisfied = spad.dead_time_s <= v.period_s;
    return v;
}

std::string OperatingPointVerdict::summary() const {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "count limit %s (limit %.6g cps, slack %.6g cps); "
                  "dead time %s (period %.6g s, slack %.6g s)",
                  count_limit_satisfied ? "ok" : "VIOLATED", count_limit_cps,
                  count_slack_cps, dead_time_satisfied ? "ok" : "VIOLATED",
                  period_s, dead_time_slack_s);
    return buf;
}

std::vector<double> expected_bin_rates(const FiberLayout& layout,
                                       const SpadModel& spad,
                                       const AcquisitionConfig& config,
                                       double wavelength_nm) {
    config.validate();
    const std::size_t n = n_bins(config.f_pulse_Hz, config.bin_width_s);
    const double dt = config.bin_width_s;
    const double period = 1.0 / config.f_pulse_Hz;
    const double f = config.f_pulse_Hz;

    const double eta = sample_or_config_error(spad.quantum_efficiency,
                                              wavelength_nm, "SPAD efficiency");
    const double t12 = sample_or_config_error(config.circulator_t12_dB,
                                              wavelength_nm, "circulator T12");
    const double t23 = sample_or_config_error(config.circulator_t23_dB,
                                              wavelength_nm, "circulator T23");
    const double base_dB = config.att_in_dB + config.att_out_dB + t12 + t23;
    const double mu_in = config.input_photons_per_pulse;

    std::vector<double> rates(n, 0.0);

    // Discrete reflections, spread over bins by the Gaussian pulse shape.
    for (const FiberComponent& comp : layout.components) {
        const double t_center = delay_of_distance(comp.position_m, layout.group_index);
        if (t_center >= period) {
            char buf[200];
            std::snprintf(buf, sizeof buf,
                          "component '%s' at %.6g m exceeds the unambiguous range "
                          "(round-trip delay %.6g s >= pulse period %.6g s)",
                          comp.label.c_str(), comp.position_m, t_center, period);
            throw config_error(buf);
        }
        const double chain_dB = base_dB +
            2.0 * layout.path_loss_dB(comp.position_m, wavelength_nm) +
            sample_or_config_error(comp.reflectance_dB, wavelength_nm,
                                   "component '" + comp.label + "' reflectance");
        const double mean_detected = mu_in * eta * db_to_linear(chain_dB);
        if (mean_detected <= 0.0) continue;

        if (config.pulse_fwhm_s <= 0.0) {
            // Delta pulse: the whole reflection lands in one bin, thinned by
            // the gate's coverage of the arrival instant.
            const std::size_t b =
                std::min(static_cast<std::size_t>(std::floor(t_center / dt)), n - 1);
            const bool in_gate = !spad.gate ||
                (t_center >= spad.gate->delay_s &&
                 t_center < spad.gate->delay_s + spad.gate->width_s);
            if (in_gate) rates[b] += f * mean_detected;
            continue;
        }

        const double sigma = config.pulse_fwhm_s / 2.3548200450309493;
        const double t_lo = t_center - 6.0 * sigma;
        const double t_hi = t_center + 6.0 * sigma;
        const std::size_t b_lo = static_cast<std::size_t>(
            std::max(0.0, std::floor(t_lo / dt)));
        const std::size_t b_hi = std::min(
            n - 1, static_cast<std::size_t>(std::max(0.0, std::floor(t_hi / dt))));
        for (std::size_t b = b_lo; b <= b_hi; ++b) {
            double lo = static_cast<double>(b) * dt;
            double hi = lo + dt;
            if (spad.gate) {
                lo = std::max(lo, spad.gate->delay_s);
                hi = std::min(hi, spad.gate->delay_s + spad.gate->width_s);
                if (hi <= lo) continue;
            }
            const double mass = gaussian_cdf(hi, t_center, sigma) -
                                gaussian_cdf(lo, t_center, sigma);
            rates[b] += f * mean_detected * mass;
        }
    }

    // Distributed Rayleigh backscatter: one effective reflectance per
    // resolution cell (= bin), fractional where the cell straddles the fiber
    // end. Pulse-shape smearing of this already-flat field is neglected.
    const double r_ray = sample_or_config_error(
        layout.rayleigh_backscatter_dB, wavelength_nm, "Rayleigh backscatter");
    if (r_ray > -std::numeric_limits<double>::infinity() && mu_in > 0.0) {
        const double cell_m = dt * kLightSpeed / (2.0 * layout.group_index);
        const std::size_t b_end = std::min(
            n - 1, static_cast<std::size_t>(
                       std::floor(delay_of_distance(layout.total_length_m,
                                                    layout.group_index) / dt)));
        for (std::size_t b = 0; b <= b_end; ++b) {
            const double d_lo = static_cast<double>(b) * cell_m;
            const double d_hi = d_lo + cell_m;
            const double frac =
                (std::min(d_hi, layout.total_length_m) - d_lo) / cell_m;
            if (frac <= 0.0) continue;
            const double gate_frac =
                live_overlap_s(static_cast<double>(b) * dt,
                               static_cast<double>(b + 1) * dt, spad.gate) / dt;
            if (gate_frac <= 0.0) continue;
            const double chain_dB = base_dB + r_ray +
                2.0 * layout.path_loss_dB(distance_of_bin(b, layout.group_index, dt),
                                          wavelength_nm);
            rates[b] += f * mu_in * eta * db_to_linear(chain_dB) *
                        std::min(frac, 1.0) * gate_frac;
        }
    }

    // Dark counts, uniform in live time. The last bin may cover only part of
    // the pulse period.
    if (spad.dark_rate_cps > 0.0) {
        for (std::size_t b = 0; b < n; ++b) {
            const double lo = static_cast<double>(b) * dt;
            const double hi = std::min(lo + dt, period);
            if (hi <= lo) break;
            rates[b] += spad.dark_rate_cps * live_overlap_s(lo, hi, spad.gate) * f;
        }
    }

    return rates;
}

AutoAttenuationResult auto_attenuation(const FiberLayout& layout,
                                       const SpadModel& spad,
                                       const AcquisitionConfig& config,
                                       double wavelength_nm, double safety) {
    if (!(safety > 0.0 && safety <= 1.0))
        throw config_error("auto_attenuation: safety factor must lie in (0, 1]");
    AcquisitionConfig open = config;
    open.att_in_dB = 0.0;
    const std::vector<double> total = expected_bin_rates(layout, spad, open, wavelength_nm);
    AcquisitionConfig dark_only = open;
    dark_only.input_photons_per_pulse = 0.0;
    const std::vector<double> dark = expected_bin_rates(layout, spad, dark_only,
                                                        wavelength_nm);

    const double eta = sample_or_config_error(spad.quantum_efficiency,
                                              wavelength_nm, "SPAD efficiency");
    const double target = safety * eta * config.f_pulse_Hz;

    double att = 0.0;
    for (std::size_t b = 0; b < total.size(); ++b) {
        const double sig = total[b] - dark[b];
        if (sig <= 0.0) {
            if (dark[b] > target)
                throw config_error(
                    "auto_attenuation: dark rate alone exceeds the count limit");
            continue;
        }
        if (dark[b] >= target)
            throw config_error(
                "auto_attenuation: dark rate alone exceeds the count limit");
        att = std::min(att, 10.0 * std::log10((target - dark[b]) / sig));
    }

    AutoAttenuationResult r;
    r.att_in_dB = std::min(att, 0.0);
    r.already_compliant = att >= 0.0;
    const double scale = db_to_linear(r.att_in_dB);
    double peak = 0.0;
    for (std::size_t b = 0; b < total.size(); ++b)
        peak = std::max(peak, (total[b] - dark[b]) * scale + dark[b]);
    r.predicted_peak_cps = peak;
    return r;
}

namespace {

/// Per-bin candidate detections as a sorted stream of pulse*n_bins+bin keys,
/// exact Bernoulli-per-pulse via geometric gap sampling.
void sample_signal_candidates(const std::vector<double>& q, long long n_pulses,
                              std::mt19937_64& rng, std::vector<std::uint64_t>& keys) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const std::uint64_t n = q.size();
    for (std::uint64_t b = 0; b < n; ++b) {
        const double p = q[b];
        if (p <= 0.0) continue;
        if (p >= 1.0) {
            for (long long pulse = 0; pulse < n_pulses; ++pulse)
                keys.push_back(static_cast<std::uint64_t>(pulse) * n + b);
            continue;
        }
        const double log1mp = std::log1p(-p);
        long long pulse = -1;
        for (;;) {
            double u = unit(rng);
            if (u <= 0.0) u = std::numeric_limits<double>::min();
            pulse += 1 + static_cast<long long>(std::floor(std::log(u) / log1mp));
            if (pulse >= n_pulses) break;
            keys.push_back(static_cast<std::uint64_t>(pulse) * n + b);
        }
    }
}

} // namespace

OtdrTrace simulate_trace(const FiberLayout& layout, const SpadModel& spad,
                         const AcquisitionConfig& config, double wavelength_nm) {
    const std::vector<double> rates = expected_bin_rates(layout, spad, config,
                                                         wavelength_nm);
    const std::size_t n = rates.size();
    const double dt = config.bin_width_s;
    const double period = 1.0 / config.f_pulse_Hz;

    OtdrTrace trace;
    trace.wavelength_nm = wavelength_nm;
    trace.bin_width_s = dt;
    trace.duration_s = config.duration_s;
    trace.f_pulse_Hz = config.f_pulse_Hz;
    trace.att_in_dB = config.att_in_dB;
    trace.att_out_dB = config.att_out_dB;
    trace.group_index = layout.group_index;
    trace.monte_carlo = config.mode == SimMode::monte_carlo;
    trace.counts.assign(n, 0.0);

    if (config.mode == SimMode::analytic) {
        double total = 0.0;
        for (double r : rates) total += r;
        const double live = 1.0 / (1.0 + total * spad.dead_time_s);
        for (std::size_t b = 0; b < n; ++b)
            trace.counts[b] = rates[b] * config.duration_s * live;
        return trace;
    }

    std::mt19937_64 rng(config.seed);
    const long long n_pulses =
        std::llround(config.duration_s * config.f_pulse_Hz);

    // Separate the dark contribution (Poisson in time) from the per-pulse
    // signal probabilities so each follows its own statistics.
    AcquisitionConfig dark_cfg = config;
    dark_cfg.input_photons_per_pulse = 0.0;
    const std::vector<double> dark_rates = expected_bin_rates(layout, spad,
                                                              dark_cfg,
                                                              wavelength_nm);
    std::vector<double> q(n);
    double dark_total_per_s = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
        q[b] = std::min((rates[b] - dark_rates[b]) / config.f_pulse_Hz, 1.0);
        if (q[b] < 0.0) q[b] = 0.0;
        dark_total_per_s += dark_rates[b];
    }

    if (spad.dead_time_s <= 0.0) {
        // No blanking: per-bin binomial signal plus Poisson dark, drawn in
        // fixed bin order for reproducibility.
        for (std::size_t b = 0; b < n; ++b) {
            double c = 0.0;
            if (q[b] > 0.0) {
                std::binomial_distribution<long long> bin(n_pulses, q[b]);
                c += static_cast<double>(bin(rng));
            }
            if (dark_rates[b] > 0.0) {
                std::poisson_distribution<long long> poi(dark_rates[b] *
                                                         config.duration_s);
                c += static_cast<double>(poi(rng));
            }
            trace.counts[b] = c;
        }
        return trace;
    }

    std::vector<std::uint64_t> keys;
    {
        double expected = 0.0;
        for (double r : rates) expected += r;
        keys.reserve(static_cast<std::size_t>(expected * config.duration_s * 1.1) + 64);
    }
    sample_signal_candidates(q, n_pulses, rng, keys);

    if (dark_total_per_s > 0.0) {
        std::poisson_distribution<long long> poi(dark_total_per_s *
                                                 config.duration_s);
        const long long m = poi(rng);
        std::uniform_int_distribution<long long> pick_pulse(0, n_pulses - 1);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        const double g0 = spad.gate ? spad.gate->delay_s : 0.0;
        const double g_span = spad.gate
                                  ? std::min(spad.gate->width_s, period - g0)
                                  : period;
        for (long long i = 0; i < m; ++i) {
            const long long pulse = pick_pulse(rng);
            const double t = g0 + unit(rng) * g_span;
            const std::uint64_t b =
                std::min(static_cast<std::uint64_t>(t / dt),
                         static_cast<std::uint64_t>(n - 1));
            keys.push_back(static_cast<std::uint64_t>(pulse) * n + b);
        }
    }

    std::sort(keys.begin(), keys.end());

    // Non-paralyzable blanking walk over the merged candidate stream.
    // Candidates are pinned to their bin centers; the sub-bin jitter this
    // ignores is two orders below the dead time.
    double blocked_until = -std::numeric_limits<double>::infinity();
    const std::uint64_t nn = n;
    for (std::uint64_t key : keys) {
        const std::uint64_t pulse = key / nn;
        const std::uint64_t b = key % nn;
        const double t = static_cast<double>(pulse) * period +
                         (static_cast<double>(b) + 0.5) * dt;
        if (t < blocked_until) continue;
        trace.counts[b] += 1.0;
        blocked_until = t + spad.dead_time_s;
    }
    return trace;
}

BroadbandScan simulate_scan(const FiberLayout& layout, const SpadModel& spad,
                            const AcquisitionConfig& config,
                            const WavelengthGrid& grid) {
    BroadbandScan scan{grid, {}, config.input_photons_per_pulse,
                       config.pulse_fwhm_s, config.mode == SimMode::monte_carlo,
                       config.seed};
    scan.traces.reserve(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        AcquisitionConfig per = config;
        per.seed = derive_seed(config.seed, i);
        try {
            scan.traces.push_back(simulate_trace(layout, spad, per, grid[i]));
        } catch (const config_error& e) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "at %.6g nm: ", grid[i]);
            throw config_error(buf + std::string(e.what()));
        }
    }
    return scan;
}

void save_trace_csv(const OtdrTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot write trace file: " + path);
    out << "bin_index,time_s,distance_m,counts\n";
    char buf[160];
    for (std::size_t b = 0; b < trace.counts.size(); ++b) {
        const double t = (static_cast<double>(b) + 0.5) * trace.bin_width_s;
        const double d = distance_of_bin(b, trace.group_index, trace.bin_width_s);
        std::snprintf(buf, sizeof buf, "%zu,%.9e,%.9e,%.17g\n", b, t, d,
                      trace.counts[b]);
        out << buf;
    }
    if (!out) throw config_error("failed writing trace file: " + path);
}

namespace {

std::string trace_file_name(double wavelength_nm) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "trace_%.10gnm.csv", wavelength_nm);
    return buf;
}

} // namespace

void save_scan(const BroadbandScan& scan, const std::string& dir) {
    if (scan.traces.size() != scan.grid.size())
        throw config_error("scan is inconsistent: trace count != grid size");
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["format"] = "otdrsec-scan/1";
    manifest["mode"] = scan.monte_carlo ? "monte_carlo" : "analytic";
    if (scan.monte_carlo) manifest["seed"] = scan.seed;
    const OtdrTrace& first = scan.traces.front();
    manifest["f_pulse_hz"] = first.f_pulse_Hz;
    manifest["bin_width_s"] = first.bin_width_s;
    manifest["duration_s"] = first.duration_s;
    manifest["att_in_db"] = first.att_in_dB;
    manifest["att_out_db"] = first.att_out_dB;
    manifest["group_index"] = first.group_index;
    manifest["input_photons_per_pulse"] = scan.input_photons_per_pulse;
    manifest["pulse_fwhm_s"] = scan.pulse_fwhm_s;
    nlohmann::json traces = nlohmann::json::array();
    for (std::size_t i = 0; i < scan.traces.size(); ++i) {
        const std::string file = trace_file_name(scan.grid[i]);
        save_trace_csv(scan.traces[i],
                       (std::filesystem::path(dir) / file).string());
        traces.push_back({{"wavelength_nm", scan.grid[i]}, {"file", file}});
    }
    manifest["traces"] = std::move(traces);
    std::ofstream out(std::filesystem::path(dir) / "manifest.json");
    if (!out) throw config_error("cannot write scan manifest in: " + dir);
    out << manifest.dump(2) << "\n";
}

BroadbandScan load_scan(const std::string& dir) {
    const std::filesystem::path root(dir);
    std::ifstream in(root / "manifest.json");
    if (!in)
        throw config_error("cannot open scan manifest: " +
                           (root / "manifest.json").string());
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw config_error("scan manifest: " + std::string(e.what()));
    }

    try {
        const bool mc = manifest.at("mode").get<std::string>() == "monte_carlo";
        std::vector<double> wavelengths;
        std::vector<OtdrTrace> traces;
        for (const nlohmann::json& t : manifest.at("traces")) {
            OtdrTrace trace;
            trace.wavelength_nm = t.at("wavelength_nm").get<double>();
            trace.bin_width_s = manifest.at("bin_width_s").get<double>();
            trace.duration_s = manifest.at("duration_s").get<double>();
            trace.f_pulse_Hz = manifest.at("f_pulse_hz").get<double>();
            trace.att_in_dB = manifest.at("att_in_db").get<double>();
            trace.att_out_dB = manifest.at("att_out_db").get<double>();
            trace.group_index = manifest.at("group_index").get<double>();
            trace.monte_carlo = mc;

            const std::filesystem::path file =
                root / t.at("file").get<std::string>();
            std::ifstream csv(file);
            if (!csv)
                throw config_error("cannot open trace file: " + file.string());
            std::string line;
            if (!std::getline(csv, line) ||
                line != "bin_index,time_s,distance_m,counts")
                throw config_error("bad trace header in: " + file.string());
            std::size_t line_no = 1;
            while (std::getline(csv, line)) {
                ++line_no;
                if (line.empty()) continue;
                const std::size_t last_comma = line.rfind(',');
                if (last_comma == std::string::npos)
                    throw config_error("malformed row at " + file.string() + ":" +
                                       std::to_string(line_no));
                try {
                    trace.counts.push_back(std::stod(line.substr(last_comma + 1)));
                } catch (const std::exception&) {
                    throw config_error("bad counts value at " + file.string() +
                                       ":" + std::to_string(line_no));
                }
            }
            const std::size_t expect = n_bins(trace.f_pulse_Hz, trace.bin_width_s);
            if (trace.counts.size() != expect)
                throw config_error(
                    "trace " + file.string() + " has " +
                    std::to_string(trace.counts.size()) + " bins, expected " +
                    std::to_string(expect));
            wavelengths.push_back(trace.wavelength_nm);
            traces.push_back(std::move(trace));
        }
        BroadbandScan scan{WavelengthGrid(std::move(wavelengths)), std::move(traces),
                           manifest.at("input_photons_per_pulse").get<double>(),
                           manifest.value("pulse_fwhm_s", 300e-12), mc,
                           manifest.value("seed", std::uint64_t{0})};
        return scan;
    } catch (const nlohmann::json::exception& e) {
        throw config_error("scan manifest: " + std::string(e.what()));
    }
}

} // namespace otdrsec
