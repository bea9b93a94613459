#pragma once

#include <string>
#include <vector>

#include "otdrsec/spectrum.hpp"

namespace otdrsec {

/// A discrete reflective element in the fiber under test: connector, splice,
/// mirror, or one arm of an interferometer. Reflectance is the apparent
/// return loss seen from the element's input side; insertion loss is the
/// one-way transmission penalty for light continuing past it.
struct FiberComponent {
    std::string label;
    double position_m = 0.0;       // distance from the DUT input along the fiber
    Spectrum reflectance_dB;       // unit dB, kind reflectance, <= 0
    Spectrum insertion_loss_dB;    // unit dB, kind transmittance, <= 0, one-way

    FiberComponent(std::string label_, double position_m_, Spectrum reflectance,
                   Spectrum insertion_loss);

    /// Component with wavelength-flat reflectance and no insertion loss.
    static FiberComponent flat(std::string label, double position_m,
                               double reflectance_db);
};

/// Ordered description of the device under test. Components are kept sorted
/// by position; ties are allowed (an interferometer produces stacked peaks
/// when two path lengths coincide). The Rayleigh spectrum is the effective
/// backscatter reflectance of one resolution cell (= one time bin).
struct FiberLayout {
    std::vector<FiberComponent> components;
    double total_length_m = 0.0;
    double group_index = 1.468;
    Spectrum rayleigh_backscatter_dB;

    FiberLayout(std::vector<FiberComponent> components_, double total_length_m_,
                double group_index_, Spectrum rayleigh);

    /// One-way insertion loss (dB <= 0) accumulated by components strictly
    /// before `position_m`. Components at exactly the same position do not
    /// shadow each other.
    double path_loss_dB(double position_m, double wavelength_nm) const;
};

/// Backscatter reflectance model: `reference_db` at `reference_nm`, scaled by
/// lambda^-exponent (exponent 4 for Rayleigh scattering). Tabulated on a
/// 5 nm grid over 1000-2000 nm; the sub-0.0001 dB interpolation error is
/// negligible against photon-counting noise.
Spectrum rayleigh_spectrum(double reference_db, double reference_nm,
                           double exponent = 4.0);

/// Default distributed-backscatter model: -80.5 dB per 150 ps cell at
/// 1550 nm with lambda^-4 scaling. Chosen so that the default simulated
/// noise-equivalent reflectance floor lands just below -80 dB at 1550 nm
/// once dark counts are added on top.
Spectrum default_rayleigh_spectrum();

/// Loads the layout JSON document:
///   {
///     "group_index": 1.468,
///     "total_length_m": 15.0,
///     "rayleigh": {"reference_db": -80.5, "reference_wavelength_nm": 1550.0,
///                  "exponent": 4.0}            // or {"constant_db": x}
///                                              // or {"csv": "path"}
///     "components": [
///       {"label": "FC/PC", "position_m": 9.0,
///        "reflectance_db": -50.0,              // or "reflectance_csv": path
///        "insertion_loss_db": -0.3}            // or csv; optional, default 0
///     ]
///   }
/// Relative CSV paths resolve against the JSON file's directory.
FiberLayout load_layout_json(const std::string& path);

} // namespace otdrsec
