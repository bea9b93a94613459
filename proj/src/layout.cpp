#include "otdrsec/layout.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "otdrsec/errors.hpp"
#include "otdrsec/spectrum_io.hpp"

namespace otdrsec {

namespace {

constexpr double kFullBandLo = 200.0;
constexpr double kFullBandHi = 2500.0;

Spectrum flat_over_full_band(double value_db, SpectrumKind kind) {
    return Spectrum::constant(kFullBandLo, kFullBandHi, value_db,
                              SpectrumUnit::dB, kind);
}

void check_spectrum_role(const Spectrum& s, SpectrumUnit unit, SpectrumKind kind,
                         const std::string& what) {
    if (s.unit() != unit || s.kind() != kind)
        throw config_error(what + ": expected " + to_string(unit) + " " +
                           to_string(kind) + " spectrum, got " +
                           to_string(s.unit()) + " " + to_string(s.kind()));
}

} // namespace

FiberComponent::FiberComponent(std::string label_, double position_m_,
                               Spectrum reflectance, Spectrum insertion_loss)
    : label(std::move(label_)),
      position_m(position_m_),
      reflectance_dB(std::move(reflectance)),
      insertion_loss_dB(std::move(insertion_loss)) {
    if (!(position_m >= 0.0))
        throw config_error("component '" + label + "': position must be >= 0 m");
    check_spectrum_role(reflectance_dB, SpectrumUnit::dB, SpectrumKind::reflectance,
                        "component '" + label + "' reflectance");
    check_spectrum_role(insertion_loss_dB, SpectrumUnit::dB,
                        SpectrumKind::transmittance,
                        "component '" + label + "' insertion loss");
}

FiberComponent FiberComponent::flat(std::string label, double position_m,
                                    double reflectance_db) {
    return FiberComponent(std::move(label), position_m,
                          flat_over_full_band(reflectance_db, SpectrumKind::reflectance),
                          flat_over_full_band(0.0, SpectrumKind::transmittance));
}

FiberLayout::FiberLayout(std::vector<FiberComponent> components_,
                         double total_length_m_, double group_index_,
                         Spectrum rayleigh)
    : components(std::move(components_)),
      total_length_m(total_length_m_),
      group_index(group_index_),
      rayleigh_backscatter_dB(std::move(rayleigh)) {
    if (!(total_length_m > 0.0))
        throw config_error("layout: total_length_m must be > 0");
    if (!(group_index >= 1.4 && group_index <= 1.6))
        throw config_error("layout: group_index must lie in [1.4, 1.6]");
    check_spectrum_role(rayleigh_backscatter_dB, SpectrumUnit::dB,
                        SpectrumKind::reflectance, "layout Rayleigh backscatter");
    std::stable_sort(components.begin(), components.end(),
                     [](const FiberComponent& a, const FiberComponent& b) {
                         return a.position_m < b.position_m;
                     });
    for (const FiberComponent& c : components) {
        if (c.position_m > total_length_m)
            throw config_error("component '" + c.label +
                               "' lies beyond the end of the fiber");
    }
}

double FiberLayout::path_loss_dB(double position_m, double wavelength_nm) const {
    double loss = 0.0;
    for (const FiberComponent& c : components) {
        if (c.position_m >= position_m) break;
        loss += c.insertion_loss_dB.sample(wavelength_nm);
    }
    return loss;
}

Spectrum rayleigh_spectrum(double reference_db, double reference_nm,
                           double exponent) {
    if (!(reference_nm > 0.0))
        throw config_error("rayleigh_spectrum: reference wavelength must be > 0");
    if (!(reference_db <= 0.0))
        throw config_error("rayleigh_spectrum: reference reflectance must be <= 0 dB");
    WavelengthGrid grid = WavelengthGrid::regular(1000.0, 2000.0, 5.0);
    std::vector<double> values(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i)
        values[i] = reference_db -
                    10.0 * exponent * std::log10(grid[i] / reference_nm);
    // Scaling can push short-wavelength values above 0 dB for extreme
    // reference levels; that would be rejected by the Spectrum invariants,
    // which is the right outcome for a nonsensical configuration.
    return Spectrum(std::move(grid), std::move(values), SpectrumUnit::dB,
                    SpectrumKind::reflectance);
}

Spectrum default_rayleigh_spectrum() {
    return rayleigh_spectrum(-80.5, 1550.0, 4.0);
}

namespace {

Spectrum spectrum_from_json(const nlohmann::json& obj, const std::string& db_key,
                            const std::string& csv_key, SpectrumKind kind,
                            const std::filesystem::path& base_dir,
                            const std::string& what) {
    const bool has_db = obj.contains(db_key);
    const bool has_csv = obj.contains(csv_key);
    if (has_db == has_csv)
        throw config_error(what + ": provide exactly one of '" + db_key +
                           "' and '" + csv_key + "'");
    if (has_db) {
        if (!obj.at(db_key).is_number())
            throw config_error(what + ": '" + db_key + "' must be a number");
        return flat_over_full_band(obj.at(db_key).get<double>(), kind);
    }
    std::filesystem::path p = obj.at(csv_key).get<std::string>();
    if (p.is_relative()) p = base_dir / p;
    return load_spectrum_csv(p.string(), SpectrumUnit::dB, kind);
}

} // namespace

FiberLayout load_layout_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open layout file: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw config_error("layout file " + path + ": " + e.what());
    }
    const std::filesystem::path base_dir =
        std::filesystem::path(path).parent_path();

    try {
        const double total_length = doc.at("total_length_m").get<double>();
        const double group_index = doc.value("group_index", 1.468);

        Spectrum rayleigh = default_rayleigh_spectrum();
        if (doc.contains("rayleigh")) {
            const nlohmann::json& r = doc.at("rayleigh");
            if (r.contains("csv") || r.contains("constant_db")) {
                rayleigh = spectrum_from_json(r, "constant_db", "csv",
                                              SpectrumKind::reflectance, base_dir,
                                              "rayleigh");
            } else {
                rayleigh = rayleigh_spectrum(
                    r.at("reference_db").get<double>(),
                    r.value("reference_wavelength_nm", 1550.0),
                    r.value("exponent", 4.0));
            }
        }

        std::vector<FiberComponent> components;
        for (const nlohmann::json& c : doc.value("components", nlohmann::json::array())) {
            const std::string label = c.value("label", "component");
            Spectrum refl = spectrum_from_json(c, "reflectance_db", "reflectance_csv",
                                               SpectrumKind::reflectance, base_dir,
                                               "component '" + label + "'");
            Spectrum il = flat_over_full_band(0.0, SpectrumKind::transmittance);
            if (c.contains("insertion_loss_db") || c.contains("insertion_loss_csv"))
                il = spectrum_from_json(c, "insertion_loss_db", "insertion_loss_csv",
                                        SpectrumKind::transmittance, base_dir,
                                        "component '" + label + "'");
            components.emplace_back(label, c.at("position_m").get<double>(),
                                    std::move(refl), std::move(il));
        }

        return FiberLayout(std::move(components), total_length, group_index,
                           std::move(rayleigh));
    } catch (const nlohmann::json::exception& e) {
        throw config_error("layout file " + path + ": " + e.what());
    }
}

} // namespace otdrsec
