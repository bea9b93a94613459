#include "otdrsec/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "otdrsec/constants.hpp"
#include "otdrsec/errors.hpp"

namespace otdrsec {

namespace {

const double kLightSpeed = PhysicalConstants::codata().light_speed_m_per_s;
const double kNegInf = -std::numeric_limits<double>::infinity();

double median_of(std::vector<double> v) {
    if (v.empty()) throw numerical_error("median of empty set");
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + mid, v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + mid - 1, v.begin() + mid);
        m = 0.5 * (m + v[mid - 1]);
    }
    return m;
}

/// Sliding-median background, window truncated at the trace edges.
std::vector<double> sliding_median(const std::vector<double>& counts,
                                   std::size_t window) {
    if (window % 2 == 0) ++window;
    const std::size_t half = window / 2;
    const std::size_t n = counts.size();
    std::vector<double> floor(n);
    std::vector<double> scratch;
    for (std::size_t b = 0; b < n; ++b) {
        const std::size_t lo = b >= half ? b - half : 0;
        const std::size_t hi = std::min(n - 1, b + half);
        scratch.assign(counts.begin() + lo, counts.begin() + hi + 1);
        floor[b] = median_of(std::move(scratch));
        scratch.clear();
    }
    return floor;
}

double apply_calibration_db(double rate_cps, const CalibrationData& cal) {
    if (!(rate_cps > 0.0)) return kNegInf;
    return 10.0 * std::log10(rate_cps / cal.n_in_cps) + cal.att_in_dB -
           cal.att_out_dB - cal.t12_dB - cal.t23_dB;
}

} // namespace

double distance_from_delay(double t_s, double group_index) {
    if (!(t_s >= 0.0)) throw std::domain_error("time delay must be >= 0");
    if (!(group_index > 0.0)) throw std::domain_error("group index must be > 0");
    return t_s * kLightSpeed / (2.0 * group_index);
}

void CalibrationData::validate() const {
    if (!(n_in_cps > 0.0))
        throw config_error("calibration: n_in_cps must be > 0");
    if (!(att_in_dB <= 0.0) || !(att_out_dB <= 0.0) || !(t12_dB <= 0.0) ||
        !(t23_dB <= 0.0))
        throw config_error("calibration: all dB fields must be <= 0");
}

CalibrationData make_calibration(const SpadModel& spad, const BroadbandScan& scan,
                                 const Spectrum& circulator_t12_dB,
                                 const Spectrum& circulator_t23_dB,
                                 double wavelength_nm, double reference_fraction) {
    if (!(reference_fraction > 0.0 && reference_fraction <= 1.0))
        throw config_error("make_calibration: reference_fraction must lie in (0, 1]");
    if (scan.traces.empty())
        throw config_error("make_calibration: empty scan");
    const OtdrTrace& first = scan.traces.front();
    const double mu_in = scan.input_photons_per_pulse;
    if (!(mu_in > 0.0))
        throw config_error("make_calibration: scan has no input photon number");
    const double eta = spad.quantum_efficiency.sample(wavelength_nm);

    CalibrationData cal;
    // Reference run: the attenuator dials the source down to
    // reference_fraction photons per pulse straight into the detector; a
    // source already dimmer than that is used as-is at 0 dB.
    cal.att_in_dB = std::min(0.0, 10.0 * std::log10(reference_fraction / mu_in));
    cal.n_in_cps = mu_in * db_to_linear(cal.att_in_dB) * eta * first.f_pulse_Hz;
    cal.att_out_dB = first.att_in_dB + first.att_out_dB;
    cal.t12_dB = circulator_t12_dB.sample(wavelength_nm);
    cal.t23_dB = circulator_t23_dB.sample(wavelength_nm);
    cal.validate();
    return cal;
}

OtdrTrace correct_dead_time(const OtdrTrace& trace, double dead_time_s) {
    if (!(dead_time_s >= 0.0))
        throw config_error("dead time must be >= 0");
    OtdrTrace out = trace;
    if (dead_time_s == 0.0) return out;
    double total = 0.0;
    for (double c : trace.counts) total += c;
    const double observed_rate = total / trace.duration_s;
    const double live = 1.0 - observed_rate * dead_time_s;
    if (!(live > 0.0))
        throw numerical_error(
            "dead-time correction diverged: observed rate at or beyond saturation");
    for (double& c : out.counts) c /= live;
    out.monte_carlo = false;
    return out;
}

std::vector<Peak> detect_peaks(const OtdrTrace& trace,
                               const AnalysisOptions& options) {
    if (trace.counts.empty()) throw config_error("empty trace");
    const OtdrTrace corrected = correct_dead_time(trace, options.dead_time_s);
    const std::vector<double>& c = corrected.counts;
    const std::size_t n = c.size();
    const std::vector<double> floor = sliding_median(c, options.floor_window_bins);

    std::vector<std::size_t> maxima;
    for (std::size_t b = 0; b < n; ++b) {
        const double sigma = std::sqrt(std::max(floor[b], 1.0));
        if (c[b] <= floor[b] + options.snr_threshold * sigma) continue;
        const double left = b > 0 ? c[b - 1] : kNegInf;
        const double right = b + 1 < n ? c[b + 1] : kNegInf;
        if (c[b] >= left && c[b] >= right) maxima.push_back(b);
    }

    const double dt = trace.bin_width_s;
    const std::size_t merge_bins = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(options.pulse_fwhm_s / dt)));

    std::vector<Peak> peaks;
    std::size_t i = 0;
    while (i < maxima.size()) {
        std::size_t j = i;
        std::size_t rep = maxima[i];
        while (j + 1 < maxima.size() && maxima[j + 1] - maxima[j] <= merge_bins) {
            ++j;
            if (c[maxima[j]] > c[rep]) rep = maxima[j];
        }
        i = j + 1;

        const double base = floor[rep];
        const double level = base + 0.5 * (c[rep] - base);

        // Half-maximum crossings by linear interpolation between bin centers.
        double x_left = static_cast<double>(rep);
        for (std::size_t b = rep; b-- > 0;) {
            if (c[b] <= level) {
                x_left = static_cast<double>(b) +
                         (level - c[b]) / (c[b + 1] - c[b]);
                break;
            }
            if (b == 0) x_left = 0.0;
        }
        double x_right = static_cast<double>(rep);
        for (std::size_t b = rep + 1; b < n; ++b) {
            if (c[b] <= level) {
                x_right = static_cast<double>(b) -
                          (level - c[b]) / (c[b - 1] - c[b]);
                break;
            }
            if (b == n - 1) x_right = static_cast<double>(n - 1);
        }
        double fwhm_bins = x_right - x_left;
        if (!(fwhm_bins > 0.0)) fwhm_bins = 1.0;

        const double t_rep = (static_cast<double>(rep) + 0.5) * dt;
        const double half_window_s = options.integration_halfwidths * fwhm_bins * dt;
        const std::size_t bin_lo = static_cast<std::size_t>(
            std::max(0.0, std::floor((t_rep - half_window_s) / dt)));
        const std::size_t bin_hi = std::min(
            n - 1,
            static_cast<std::size_t>(std::max(0.0, std::floor((t_rep + half_window_s) / dt))));

        double amplitude = 0.0;
        double weighted_t = 0.0;
        for (std::size_t b = bin_lo; b <= bin_hi; ++b) {
            const double excess = c[b] - floor[b];
            amplitude += excess;
            if (excess > 0.0)
                weighted_t += excess * (static_cast<double>(b) + 0.5) * dt;
        }

        Peak p;
        p.bin_lo = bin_lo;
        p.bin_hi = bin_hi;
        p.amplitude_counts = amplitude;
        p.reflectance_dB = std::numeric_limits<double>::quiet_NaN();
        p.fwhm_m = distance_from_delay(fwhm_bins * dt, trace.group_index);
        const double sigma_rep = std::sqrt(std::max(base, 1.0));
        p.snr_linear = (c[rep] - base) / sigma_rep;
        const double t_centroid = amplitude > 0.0 ? weighted_t / amplitude : t_rep;
        p.distance_m = distance_from_delay(t_centroid, trace.group_index);
        peaks.push_back(std::move(p));
    }

    std::sort(peaks.begin(), peaks.end(),
              [](const Peak& a, const Peak& b) { return a.distance_m < b.distance_m; });
    return peaks;
}

double estimate_reflectance(double peak_counts, double duration_s,
                            const CalibrationData& cal) {
    if (!(duration_s > 0.0)) throw config_error("duration must be > 0");
    cal.validate();
    return apply_calibration_db(peak_counts / duration_s, cal);
}

double estimate_resolution(const OtdrTrace& trace, const AnalysisOptions& options) {
    const std::vector<Peak> peaks = detect_peaks(trace, options);
    if (peaks.empty()) throw numerical_error("no peaks found in trace");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < peaks.size(); ++i) {
        const double isolation = 3.0 * peaks[i].fwhm_m;
        const bool left_ok =
            i == 0 || peaks[i].distance_m - peaks[i - 1].distance_m >= isolation;
        const bool right_ok = i + 1 == peaks.size() ||
                              peaks[i + 1].distance_m - peaks[i].distance_m >= isolation;
        if (left_ok && right_ok) best = std::min(best, peaks[i].fwhm_m);
    }
    if (!std::isfinite(best))
        throw numerical_error("no isolated peak available for a resolution estimate");
    return best;
}

double estimate_noise_floor(const OtdrTrace& trace, const CalibrationData& cal,
                            const AnalysisOptions& options) {
    cal.validate();
    const OtdrTrace corrected = correct_dead_time(trace, options.dead_time_s);
    AnalysisOptions detect_opts = options;
    detect_opts.dead_time_s = 0.0;
    const std::vector<Peak> peaks = detect_peaks(corrected, detect_opts);

    const std::size_t n = corrected.counts.size();
    std::size_t region_end = n - 1;
    if (!peaks.empty()) {
        const double last_m = peaks.back().distance_m + options.floor_margin_m;
        const double t_end = 2.0 * last_m * trace.group_index / kLightSpeed;
        region_end = std::min(
            n - 1, static_cast<std::size_t>(std::max(0.0, std::floor(t_end /
                                                                     trace.bin_width_s))));
    }

    std::vector<bool> excluded(n, false);
    for (const Peak& p : peaks) {
        const std::size_t guard =
            3 * std::max<std::size_t>(1, p.bin_hi - p.bin_lo + 1);
        const std::size_t lo = p.bin_lo >= guard ? p.bin_lo - guard : 0;
        const std::size_t hi = std::min(n - 1, p.bin_hi + guard);
        for (std::size_t b = lo; b <= hi; ++b) excluded[b] = true;
    }

    std::vector<double> quiet;
    quiet.reserve(region_end + 1);
    for (std::size_t b = 0; b <= region_end; ++b)
        if (!excluded[b]) quiet.push_back(corrected.counts[b]);
    if (quiet.empty())
        throw numerical_error("no peak-free region for a noise-floor estimate");

    const double median_rate = median_of(std::move(quiet)) / trace.duration_s;
    return apply_calibration_db(median_rate, cal);
}

double estimate_dark_rate_cps(const OtdrTrace& trace, double min_distance_m,
                              const AnalysisOptions& options) {
    const OtdrTrace corrected = correct_dead_time(trace, options.dead_time_s);
    const std::size_t n = corrected.counts.size();
    double total = 0.0;
    std::size_t m = 0;
    for (std::size_t b = 0; b < n; ++b) {
        if (distance_of_bin(b, trace.group_index, trace.bin_width_s) < min_distance_m)
            continue;
        total += corrected.counts[b];
        ++m;
    }
    if (m == 0)
        throw config_error("no bins at or beyond the requested distance");
    const double per_bin_rate = total / static_cast<double>(m) / trace.duration_s;
    // Each bin samples bin_width * f_pulse of every second of detector time.
    return per_bin_rate / (trace.bin_width_s * trace.f_pulse_Hz);
}

ReflectanceMap build_reflectance_map(
    const BroadbandScan& scan,
    const std::vector<std::pair<double, CalibrationData>>& calibrations,
    const SpadModel& spad, const AnalysisOptions& options) {
    if (scan.traces.empty()) throw config_error("empty scan");

    AnalysisOptions opts = options;
    opts.dead_time_s = spad.dead_time_s;
    if (scan.pulse_fwhm_s > 0.0) opts.pulse_fwhm_s = scan.pulse_fwhm_s;

    const Spectrum placeholder = Spectrum::constant(200, 2500, 0.0, SpectrumUnit::dB,
                                                    SpectrumKind::reflectance);
    ReflectanceMap map{scan.grid, {}, placeholder, placeholder, {}, {}, {}};
    std::vector<double> worst_values(scan.grid.size());
    std::vector<double> floor_values(scan.grid.size());

    const OtdrTrace& first = scan.traces.front();
    map.distances_m.resize(first.counts.size());
    for (std::size_t b = 0; b < first.counts.size(); ++b)
        map.distances_m[b] = distance_of_bin(b, first.group_index, first.bin_width_s);

    for (std::size_t i = 0; i < scan.traces.size(); ++i) {
        const OtdrTrace& trace = scan.traces[i];
        const double wl = trace.wavelength_nm;

        const CalibrationData* cal = nullptr;
        for (const auto& [cal_wl, c] : calibrations)
            if (std::abs(cal_wl - wl) <= 1e-6) { cal = &c; break; }
        if (!cal) {
            char buf[96];
            std::snprintf(buf, sizeof buf,
                          "no calibration provided for wavelength %.6g nm", wl);
            throw config_error(buf);
        }

        std::vector<Peak> peaks = detect_peaks(trace, opts);
        for (Peak& p : peaks)
            p.reflectance_dB =
                estimate_reflectance(p.amplitude_counts, trace.duration_s, *cal);
        const double floor_db = estimate_noise_floor(trace, *cal, opts);

        double worst = floor_db;
        for (const Peak& p : peaks) worst = std::max(worst, p.reflectance_dB);
        worst_values[i] = worst;
        floor_values[i] = floor_db;
        map.approximate.push_back(
            spad.quantum_efficiency.sample(wl) < opts.approximate_efficiency);

        const OtdrTrace corrected = correct_dead_time(trace, spad.dead_time_s);
        std::vector<double> row(corrected.counts.size());
        for (std::size_t b = 0; b < corrected.counts.size(); ++b)
            row[b] = apply_calibration_db(corrected.counts[b] / trace.duration_s,
                                          *cal);
        map.heatmap_dB.push_back(std::move(row));
        map.peaks.push_back(std::move(peaks));
    }

    if (scan.grid.size() == 1) {
        // Spectrum needs two grid points; duplicate the single wavelength's
        // value over a degenerate 1 nm band around it.
        const double wl = scan.grid[0];
        map.worst_case = Spectrum(WavelengthGrid({wl - 0.5, wl + 0.5}),
                                  {worst_values[0], worst_values[0]},
                                  SpectrumUnit::dB, SpectrumKind::reflectance);
        map.noise_floor = Spectrum(WavelengthGrid({wl - 0.5, wl + 0.5}),
                                   {floor_values[0], floor_values[0]},
                                   SpectrumUnit::dB, SpectrumKind::reflectance);
    } else {
        map.worst_case = Spectrum(scan.grid, std::move(worst_values),
                                  SpectrumUnit::dB, SpectrumKind::reflectance);
        map.noise_floor = Spectrum(scan.grid, std::move(floor_values),
                                   SpectrumUnit::dB, SpectrumKind::reflectance);
    }
    return map;
}

void save_heatmap_csv(const ReflectanceMap& map, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot write heatmap file: " + path);
    char buf[64];
    out << "wavelength_nm";
    for (double d : map.distances_m) {
        std::snprintf(buf, sizeof buf, ",%.9e", d);
        out << buf;
    }
    out << "\n";
    for (std::size_t i = 0; i < map.heatmap_dB.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.10g", map.grid[i]);
        out << buf;
        for (double v : map.heatmap_dB[i]) {
            if (std::isfinite(v)) {
                std::snprintf(buf, sizeof buf, ",%.6g", v);
                out << buf;
            } else {
                out << ",nan";
            }
        }
        out << "\n";
    }
    if (!out) throw config_error("failed writing heatmap file: " + path);
}

void save_peaks_json(const ReflectanceMap& map, const std::string& path) {
    nlohmann::json doc;
    doc["format"] = "otdrsec-peaks/1";
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < map.peaks.size(); ++i) {
        nlohmann::json row;
        row["wavelength_nm"] = map.grid[i];
        row["approximate"] = static_cast<bool>(map.approximate[i]);
        row["noise_floor_db"] = map.noise_floor.sample(map.grid[i]);
        nlohmann::json plist = nlohmann::json::array();
        for (const Peak& p : map.peaks[i]) {
            plist.push_back({{"distance_m", p.distance_m},
                             {"bin_lo", p.bin_lo},
                             {"bin_hi", p.bin_hi},
                             {"amplitude_counts", p.amplitude_counts},
                             {"reflectance_db", p.reflectance_dB},
                             {"fwhm_m", p.fwhm_m},
                             {"snr_linear", p.snr_linear},
                             {"label", p.label}});
        }
        row["peaks"] = std::move(plist);
        rows.push_back(std::move(row));
    }
    doc["wavelengths"] = std::move(rows);
    std::ofstream out(path);
    if (!out) throw config_error("cannot write peaks file: " + path);
    out << doc.dump(2) << "\n";
}

} // namespace otdrsec
