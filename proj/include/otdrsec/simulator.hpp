#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "otdrsec/layout.hpp"
#include "otdrsec/spectrum.hpp"

namespace otdrsec {

/// Detector live window relative to the pulse trigger, for gated operation.
struct GateWindow {
    double delay_s = 0.0;
    double width_s = 0.0;
};

/// Single-photon avalanche photodiode model: spectral quantum efficiency,
/// non-paralyzable dead time, dark counts, optional gate.
struct SpadModel {
    Spectrum quantum_efficiency;      // unit fraction, kind efficiency
    double dead_time_s = 0.0;
    double dark_rate_cps = 0.0;
    std::optional<GateWindow> gate;

    SpadModel(Spectrum quantum_efficiency_, double dead_time_s_,
              double dark_rate_cps_,
              std::optional<GateWindow> gate_ = std::nullopt);
};

enum class SimMode { monte_carlo, analytic };

/// One acquisition run: laser timing, attenuator settings, circulator
/// transmittances, input brightness, histogram binning.
///
/// Both attenuators act on the measured signal: att_in before the light
/// enters the circulator, att_out between the circulator's return port and
/// the detector. Calibration treats their sum as the total instrumental
/// attenuation of the reflection path.
struct AcquisitionConfig {
    double f_pulse_Hz = 5e5;
    double bin_width_s = 150e-12;
    double duration_s = 60.0;
    double att_in_dB = 0.0;               // <= 0
    double att_out_dB = 0.0;              // <= 0
    double input_photons_per_pulse = 1e4; // mean photons per pulse entering att_in
    Spectrum circulator_t12_dB;           // port 1 -> 2, <= 0 dB
    Spectrum circulator_t23_dB;           // port 2 -> 3, <= 0 dB
    double pulse_fwhm_s = 300e-12;        // Gaussian pulse FWHM; 0 = delta pulse
    std::uint64_t seed = 0;
    SimMode mode = SimMode::monte_carlo;

    void validate() const;
};

/// Number of histogram bins: ceil of the pulse period over the bin width.
std::size_t n_bins(double f_pulse_Hz, double bin_width_s);

/// Round-trip time-of-flight of a reflection at `distance_m`.
double delay_of_distance(double distance_m, double group_index);

/// Bin index of a reflection at `distance_m` (floor of delay over bin width).
std::size_t bin_of_distance(double distance_m, double group_index,
                            double bin_width_s);

/// Distance represented by the center of bin `b`; inverse of bin_of_distance.
double distance_of_bin(std::size_t b, double group_index, double bin_width_s);

/// Operating-point diagnostic: (a) expected maximum count rate must not
/// exceed eta * f_pulse (at most one detected photon per pulse), and (b) the
/// dead time must fit inside the pulse period. Never throws; the verdict
/// carries the measured slack of both conditions.
struct OperatingPointVerdict {
    bool count_limit_satisfied = false;
    double count_limit_cps = 0.0;     // eta(lambda) * f_pulse
    double count_slack_cps = 0.0;     // limit - expected max rate
    bool dead_time_satisfied = false;
    double period_s = 0.0;            // 1 / f_pulse
    double dead_time_slack_s = 0.0;   // period - dead time
    bool ok() const { return count_limit_satisfied && dead_time_satisfied; }
    std::string summary() const;
};

OperatingPointVerdict check_operating_point(const AcquisitionConfig& config,
                                            const SpadModel& spad,
                                            double expected_max_rate_cps,
                                            double wavelength_nm);

/// Largest (least negative) att_in such that the predicted peak bin rate
/// stays within safety * eta * f_pulse. The returned attenuation replaces
/// config.att_in_dB; when the trace is compliant already at 0 dB the result
/// is 0 with the flag set.
struct AutoAttenuationResult {
    double att_in_dB = 0.0;
    bool already_compliant = false;
    double predicted_peak_cps = 0.0;  // peak bin rate at the returned setting
};

AutoAttenuationResult auto_attenuation(const FiberLayout& layout,
                                       const SpadModel& spad,
                                       const AcquisitionConfig& config,
                                       double wavelength_nm,
                                       double safety = 0.9);

/// Expected true (dead-time-free) count rate per bin, in counts per second,
/// at one wavelength: discrete reflections spread over bins by the Gaussian
/// pulse shape, distributed Rayleigh backscatter per resolution cell, and
/// dark counts. Throws config_error when a component sits beyond the
/// unambiguous range (round-trip delay >= pulse period).
std::vector<double> expected_bin_rates(const FiberLayout& layout,
                                       const SpadModel& spad,
                                       const AcquisitionConfig& config,
                                       double wavelength_nm);

/// Photon-count histogram at one wavelength. Monte-Carlo counts are
/// integer-valued; analytic counts are real expectations.
struct OtdrTrace {
    double wavelength_nm = 0.0;
    double bin_width_s = 0.0;
    std::vector<double> counts;
    double duration_s = 0.0;
    double f_pulse_Hz = 0.0;
    double att_in_dB = 0.0;
    double att_out_dB = 0.0;
    double group_index = 1.468;
    bool monte_carlo = true;
};

/// Monte-Carlo mode: per-pulse Bernoulli detection per bin at the expected
/// per-pulse probability, dark counts Poisson in time, then non-paralyzable
/// dead-time blanking applied to the merged event stream in time order.
/// Analytic mode: expected_bin_rates * duration * 1/(1 + total_rate * tau_d).
/// Deterministic given config.seed.
OtdrTrace simulate_trace(const FiberLayout& layout, const SpadModel& spad,
                         const AcquisitionConfig& config, double wavelength_nm);

struct BroadbandScan {
    WavelengthGrid grid;
    std::vector<OtdrTrace> traces;        // one per grid point, same order
    double input_photons_per_pulse = 0.0; // config echo, used by calibration
    double pulse_fwhm_s = 0.0;
    bool monte_carlo = true;
    std::uint64_t seed = 0;               // master seed (Monte-Carlo only)
};

/// One trace per grid wavelength; the per-trace seed is derived from the
/// master seed and the grid position, so single traces can be reproduced
/// without rerunning the whole scan.
BroadbandScan simulate_scan(const FiberLayout& layout, const SpadModel& spad,
                            const AcquisitionConfig& config,
                            const WavelengthGrid& grid);

/// CSV rows `bin_index,time_s,distance_m,counts` (time and distance are bin
/// centers).
void save_trace_csv(const OtdrTrace& trace, const std::string& path);

/// Writes one trace CSV per wavelength plus manifest.json with the full
/// config echo. Analytic scans carry no seed in the manifest.
void save_scan(const BroadbandScan& scan, const std::string& dir);

/// Reads a directory produced by save_scan (manifest + trace CSVs).
BroadbandScan load_scan(const std::string& dir);

} // namespace otdrsec
