#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "otdrsec/constants.hpp"

namespace otdrsec {

/// dB <-> linear power ratio. Input must be finite.
double db_to_linear(double value_db);

/// Inverse of db_to_linear. Accepts 0 (returns -inf); negative input throws.
double linear_to_db(double value_linear);

/// dBm referenced to 1 mW, converted to watts. -inf dBm maps to 0 W.
double dbm_to_watts(double value_dbm);

/// E = h*c/lambda, joules. Wavelength must be positive.
double photon_energy_J(double wavelength_nm, const PhysicalConstants& constants);

/// Strictly increasing wavelength axis in nanometers. Values are sanity
/// checked against the 200-2500 nm window this toolkit is meant for.
class WavelengthGrid {
public:
    explicit WavelengthGrid(std::vector<double> points_nm);

    const std::vector<double>& points_nm() const { return points_; }
    std::size_t size() const { return points_.size(); }
    double front() const { return points_.front(); }
    double back() const { return points_.back(); }
    double operator[](std::size_t i) const { return points_[i]; }

    bool contains(double wavelength_nm) const {
        return wavelength_nm >= points_.front() && wavelength_nm <= points_.back();
    }

    /// Regular grid helper: start, stop inclusive, positive step.
    static WavelengthGrid regular(double start_nm, double stop_nm, double step_nm);

private:
    std::vector<double> points_;
};

enum class SpectrumUnit { dB, dBm, linear, fraction };
enum class SpectrumKind { reflectance, transmittance, efficiency, power, other };

std::string to_string(SpectrumUnit unit);
std::string to_string(SpectrumKind kind);
SpectrumUnit spectrum_unit_from_string(const std::string& s);
SpectrumKind spectrum_kind_from_string(const std::string& s);

/// Wavelength-indexed series of values. Immutable after construction; the
/// constructor enforces the unit/kind consistency rules (fractions in [0,1],
/// dB reflectance/transmittance <= 0, linear values >= 0). -inf is a legal
/// dB value and means "nothing at all" (zero linear).
class Spectrum {
public:
    Spectrum(WavelengthGrid grid, std::vector<double> values,
             SpectrumUnit unit, SpectrumKind kind);

    const WavelengthGrid& grid() const { return grid_; }
    const std::vector<double>& values() const { return values_; }
    SpectrumUnit unit() const { return unit_; }
    SpectrumKind kind() const { return kind_; }
    std::size_t size() const { return values_.size(); }

    /// Linear interpolation between neighboring grid points; exact at nodes.
    /// Queries outside the grid range throw std::out_of_range -- spectra are
    /// never extrapolated.
    double sample(double wavelength_nm) const;

    /// Constant spectrum over [lo, hi] (two-node grid).
    static Spectrum constant(double lo_nm, double hi_nm, double value,
                             SpectrumUnit unit, SpectrumKind kind);

private:
    WavelengthGrid grid_;
    std::vector<double> values_;
    SpectrumUnit unit_;
    SpectrumKind kind_;
};

/// Union of the grids of all inputs restricted to their common wavelength
/// range. Throws config_error when the ranges do not overlap.
std::vector<double> common_grid(const std::vector<const Spectrum*>& spectra);

} // namespace otdrsec
