#include "otdrsec/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "otdrsec/errors.hpp"

namespace otdrsec {

PhysicalConstants PhysicalConstants::from_name(const std::string& name) {
    if (name == "codata") return codata();
    if (name == "paper") return paper_rounded();
    throw config_error("unknown constants set '" + name + "' (expected codata|paper)");
}

double db_to_linear(double value_db) {
    if (std::isnan(value_db) || value_db == std::numeric_limits<double>::infinity())
        throw std::domain_error("db_to_linear: value must be finite or -inf");
    return std::pow(10.0, value_db / 10.0);
}

double linear_to_db(double value_linear) {
    if (std::isnan(value_linear) || value_linear < 0.0)
        throw std::domain_error("linear_to_db: value must be >= 0");
    return 10.0 * std::log10(value_linear);
}

double dbm_to_watts(double value_dbm) {
    return 1e-3 * db_to_linear(value_dbm);
}

double photon_energy_J(double wavelength_nm, const PhysicalConstants& constants) {
    constants.validate();
    if (!(wavelength_nm > 0.0))
        throw std::domain_error("photon_energy_J: wavelength must be positive");
    return constants.planck_J_per_Hz * constants.light_speed_m_per_s /
           (wavelength_nm * 1e-9);
}

WavelengthGrid::WavelengthGrid(std::vector<double> points_nm)
    : points_(std::move(points_nm)) {
    if (points_.empty())
        throw std::invalid_argument("wavelength grid must not be empty");
    for (std::size_t i = 0; i < points_.size(); ++i) {
        const double p = points_[i];
        if (!std::isfinite(p) || p < 200.0 || p > 2500.0)
            throw std::invalid_argument("wavelength " + std::to_string(p) +
                                        " nm outside the 200-2500 nm sanity window");
        if (i > 0 && !(points_[i - 1] < p))
            throw std::invalid_argument("wavelength grid must be strictly increasing");
    }
}

WavelengthGrid WavelengthGrid::regular(double start_nm, double stop_nm, double step_nm) {
    if (!(step_nm > 0.0) || !(stop_nm >= start_nm))
        throw std::invalid_argument("bad regular grid parameters");
    std::vector<double> pts;
    const auto n = static_cast<std::size_t>(std::floor((stop_nm - start_nm) / step_nm + 0.5)) + 1;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) pts.push_back(start_nm + static_cast<double>(i) * step_nm);
    if (pts.back() > stop_nm + 1e-9) pts.pop_back();
    return WavelengthGrid(std::move(pts));
}

std::string to_string(SpectrumUnit unit) {
    switch (unit) {
        case SpectrumUnit::dB: return "dB";
        case SpectrumUnit::dBm: return "dBm";
        case SpectrumUnit::linear: return "linear";
        case SpectrumUnit::fraction: return "fraction";
    }
    return "?";
}

std::string to_string(SpectrumKind kind) {
    switch (kind) {
        case SpectrumKind::reflectance: return "reflectance";
        case SpectrumKind::transmittance: return "transmittance";
        case SpectrumKind::efficiency: return "efficiency";
        case SpectrumKind::power: return "power";
        case SpectrumKind::other: return "other";
    }
    return "?";
}

SpectrumUnit spectrum_unit_from_string(const std::string& s) {
    if (s == "dB" || s == "db") return SpectrumUnit::dB;
    if (s == "dBm" || s == "dbm") return SpectrumUnit::dBm;
    if (s == "linear") return SpectrumUnit::linear;
    if (s == "fraction") return SpectrumUnit::fraction;
    throw config_error("unknown spectrum unit '" + s + "'");
}

SpectrumKind spectrum_kind_from_string(const std::string& s) {
    if (s == "reflectance") return SpectrumKind::reflectance;
    if (s == "transmittance") return SpectrumKind::transmittance;
    if (s == "efficiency") return SpectrumKind::efficiency;
    if (s == "power") return SpectrumKind::power;
    if (s == "other") return SpectrumKind::other;
    throw config_error("unknown spectrum kind '" + s + "'");
}

namespace {

void validate_value(double v, SpectrumUnit unit, SpectrumKind kind) {
    if (std::isnan(v)) throw std::invalid_argument("spectrum value is NaN");
    switch (unit) {
        case SpectrumUnit::linear:
        case SpectrumUnit::fraction:
            if (v < 0.0) throw std::invalid_argument("linear spectrum value < 0");
            break;
        case SpectrumUnit::dB:
        case SpectrumUnit::dBm:
            if (v == std::numeric_limits<double>::infinity())
                throw std::invalid_argument("+inf dB spectrum value");
            break;
    }
    if ((unit == SpectrumUnit::fraction || kind == SpectrumKind::efficiency) &&
        unit != SpectrumUnit::dB && unit != SpectrumUnit::dBm && v > 1.0)
        throw std::invalid_argument("fraction/efficiency value > 1");
    if (unit == SpectrumUnit::dB &&
        (kind == SpectrumKind::reflectance || kind == SpectrumKind::transmittance) &&
        v > 0.0)
        throw std::invalid_argument("dB reflectance/transmittance must be <= 0 (got " +
                                    std::to_string(v) + ")");
}

} // namespace

Spectrum::Spectrum(WavelengthGrid grid, std::vector<double> values,
                   SpectrumUnit unit, SpectrumKind kind)
    : grid_(std::move(grid)), values_(std::move(values)), unit_(unit), kind_(kind) {
    if (values_.size() != grid_.size())
        throw std::invalid_argument("spectrum values length does not match grid");
    for (double v : values_) validate_value(v, unit_, kind_);
}

double Spectrum::sample(double wavelength_nm) const {
    const auto& pts = grid_.points_nm();
    if (wavelength_nm < pts.front() || wavelength_nm > pts.back())
        throw std::out_of_range("wavelength " + std::to_string(wavelength_nm) +
                                " nm outside spectrum range [" + std::to_string(pts.front()) +
                                ", " + std::to_string(pts.back()) + "]");
    auto it = std::lower_bound(pts.begin(), pts.end(), wavelength_nm);
    const auto i = static_cast<std::size_t>(it - pts.begin());
    if (i < pts.size() && pts[i] == wavelength_nm) return values_[i];
    // strictly between pts[i-1] and pts[i]
    const double x0 = pts[i - 1], x1 = pts[i];
    const double y0 = values_[i - 1], y1 = values_[i];
    if (std::isinf(y0) || std::isinf(y1)) return -std::numeric_limits<double>::infinity();
    const double t = (wavelength_nm - x0) / (x1 - x0);
    return y0 + t * (y1 - y0);
}

Spectrum Spectrum::constant(double lo_nm, double hi_nm, double value,
                            SpectrumUnit unit, SpectrumKind kind) {
    if (!(hi_nm > lo_nm)) throw std::invalid_argument("constant spectrum needs hi > lo");
    return Spectrum(WavelengthGrid({lo_nm, hi_nm}), {value, value}, unit, kind);
}

std::vector<double> common_grid(const std::vector<const Spectrum*>& spectra) {
    if (spectra.empty()) throw config_error("common_grid: no spectra given");
    double lo = 0.0, hi = 1e300;
    for (const auto* s : spectra) {
        lo = std::max(lo, s->grid().front());
        hi = std::min(hi, s->grid().back());
    }
    if (lo > hi)
        throw config_error("spectra have no overlapping wavelength range");
    std::vector<double> pts;
    for (const auto* s : spectra)
        for (double p : s->grid().points_nm())
            if (p >= lo && p <= hi) pts.push_back(p);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

} // namespace otdrsec
