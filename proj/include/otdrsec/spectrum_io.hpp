#pragma once

#include <optional>
#include <string>

#include "otdrsec/spectrum.hpp"

namespace otdrsec {

/// Reads a `wavelength_nm,value` CSV. Unit and kind come from the explicit
/// arguments when given, otherwise from the sidecar `<path>.meta.json`
/// ({"unit": ..., "kind": ...}); with neither, loading fails. Unsorted or
/// duplicate wavelengths are rejected with the offending line number.
Spectrum load_spectrum_csv(const std::string& path,
                           std::optional<SpectrumUnit> unit = std::nullopt,
                           std::optional<SpectrumKind> kind = std::nullopt);

/// Writes the CSV plus the sidecar metadata file.
void save_spectrum_csv(const Spectrum& spectrum, const std::string& path);

} // namespace otdrsec
