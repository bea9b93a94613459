#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "otdrsec/simulator.hpp"
#include "otdrsec/spectrum.hpp"

namespace otdrsec {

/// Round-trip time delay to fiber distance: l = t * c / (2 * group_index).
double distance_from_delay(double t_s, double group_index);

/// Reference-run data needed to turn count rates into reflectance:
///   R[dB] = 10*log10(N_out / N_in) + att_in - att_out - t12 - t23
/// where att_in is the attenuator setting of the straight-to-detector
/// reference run that produced n_in_cps, and att_out is the total
/// instrumental attenuation present during the reflection measurement.
/// All dB fields are <= 0; n_in_cps is a dead-time-free (true) rate.
struct CalibrationData {
    double n_in_cps = 0.0;
    double att_in_dB = 0.0;
    double att_out_dB = 0.0;
    double t12_dB = 0.0;
    double t23_dB = 0.0;

    void validate() const;
};

/// Synthesizes the calibration that matches a simulated scan: a reference
/// run attenuated to `reference_fraction` of the count limit (or left
/// unattenuated when the source is dimmer than that), plus the scan's echoed
/// attenuator settings.
CalibrationData make_calibration(const SpadModel& spad,
                                 const BroadbandScan& scan,
                                 const Spectrum& circulator_t12_dB,
                                 const Spectrum& circulator_t23_dB,
                                 double wavelength_nm,
                                 double reference_fraction = 0.9);

struct AnalysisOptions {
    double snr_threshold = 5.0;          // floor sigmas a local maximum must clear
    double pulse_fwhm_s = 300e-12;       // merge radius for nearby maxima
    double dead_time_s = 0.0;            // non-paralyzable correction, 0 = off
    std::size_t floor_window_bins = 201; // sliding-median window (odd)
    double integration_halfwidths = 1.5; // peak window, in measured FWHMs each side
    double floor_margin_m = 1.0;         // noise-floor region past the last peak
    double approximate_efficiency = 0.01; // flag wavelengths with eta below this
};

struct Peak {
    double distance_m = 0.0;          // centroid position
    std::size_t bin_lo = 0;           // integration window, inclusive
    std::size_t bin_hi = 0;
    double amplitude_counts = 0.0;    // floor-subtracted window sum
    double reflectance_dB = 0.0;      // NaN until calibrated
    double fwhm_m = 0.0;
    double snr_linear = 0.0;          // (peak - floor) / floor sigma
    std::string label;
};

/// Inverts the non-paralyzable dead-time loss on a whole trace:
/// true = observed / (1 - observed_total_rate * dead_time). The result
/// carries real-valued counts. Throws numerical_error when the observed
/// rate is at or beyond saturation.
OtdrTrace correct_dead_time(const OtdrTrace& trace, double dead_time_s);

/// Local maxima exceeding a sliding-median noise floor by
/// snr_threshold * sqrt(floor), merged when closer than the pulse FWHM,
/// each integrated over +-integration_halfwidths measured FWHMs with the
/// local floor subtracted. Applies the dead-time correction first.
/// reflectance_dB is left NaN; sorted by distance.
std::vector<Peak> detect_peaks(const OtdrTrace& trace,
                               const AnalysisOptions& options = {});

/// Calibrates a peak-integrated count sum into dB reflectance using the
/// formula documented on CalibrationData. Non-positive counts return
/// -infinity ("below floor").
double estimate_reflectance(double peak_counts, double duration_s,
                            const CalibrationData& cal);

/// FWHM in meters of the narrowest isolated peak (nearest neighbor at least
/// three of its own widths away). Throws numerical_error when the trace has
/// no isolated peak.
double estimate_resolution(const OtdrTrace& trace,
                           const AnalysisOptions& options = {});

/// Median per-bin rate over peak-free bins, converted to noise-equivalent
/// reflectance through the calibration. The region searched runs from the
/// fiber input to floor_margin_m past the last peak (whole trace when no
/// peak is found). An all-zero region returns -infinity.
double estimate_noise_floor(const OtdrTrace& trace, const CalibrationData& cal,
                            const AnalysisOptions& options = {});

/// Mean dark rate inferred from bins at or beyond min_distance_m, scaled
/// back to full counts-per-second of detector time.
double estimate_dark_rate_cps(const OtdrTrace& trace, double min_distance_m,
                              const AnalysisOptions& options = {});

/// Broadband analysis product: per-wavelength peaks, the worst-case
/// reflectance spectrum feeding the security engine, the noise floor, and
/// the full wavelength x distance heatmap.
struct ReflectanceMap {
    WavelengthGrid grid;
    std::vector<std::vector<Peak>> peaks;  // per wavelength, grid order
    Spectrum worst_case;                   // max(peak reflectances, floor)
    Spectrum noise_floor;
    std::vector<bool> approximate;         // eta below threshold at this wavelength
    std::vector<double> distances_m;       // heatmap columns (bin centers)
    std::vector<std::vector<double>> heatmap_dB;  // [wavelength][bin]
};

/// Runs detect_peaks + estimate_reflectance + estimate_noise_floor per
/// wavelength. Calibrations are matched by wavelength (1e-6 nm tolerance);
/// a missing one raises config_error naming the wavelength. The SPAD model
/// supplies the dead time and the efficiency used for "approximate" flags.
ReflectanceMap build_reflectance_map(
    const BroadbandScan& scan,
    const std::vector<std::pair<double, CalibrationData>>& calibrations,
    const SpadModel& spad, const AnalysisOptions& options = {});

/// CSV matrix: first row distances in meters, first column wavelengths in
/// nm, cells dB or "nan".
void save_heatmap_csv(const ReflectanceMap& map, const std::string& path);

/// JSON list of per-wavelength peak records plus floor and flags.
void save_peaks_json(const ReflectanceMap& map, const std::string& path);

} // namespace otdrsec
