#include "otdrsec/spectrum_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "otdrsec/errors.hpp"

namespace otdrsec {

namespace {

double parse_value(const std::string& tok, const std::string& path, int line_no) {
    if (tok == "-inf") return -std::numeric_limits<double>::infinity();
    try {
        std::size_t pos = 0;
        const double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw config_error(path + ":" + std::to_string(line_no) +
                           ": cannot parse number '" + tok + "'");
    }
}

} // namespace

Spectrum load_spectrum_csv(const std::string& path,
                           std::optional<SpectrumUnit> unit,
                           std::optional<SpectrumKind> kind) {
    if (!unit || !kind) {
        std::ifstream meta(path + ".meta.json");
        if (!meta)
            throw config_error("spectrum " + path +
                               ": unit/kind not given and sidecar " + path +
                               ".meta.json not found");
        nlohmann::json j;
        try {
            meta >> j;
        } catch (const std::exception& e) {
            throw config_error(path + ".meta.json: " + e.what());
        }
        if (!unit) unit = spectrum_unit_from_string(j.at("unit").get<std::string>());
        if (!kind) kind = spectrum_kind_from_string(j.at("kind").get<std::string>());
    }

    std::ifstream in(path);
    if (!in) throw config_error("cannot open spectrum file " + path);

    std::string line;
    int line_no = 0;
    std::vector<double> wl, val;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != "wavelength_nm,value")
                throw config_error(path + ":1: expected header 'wavelength_nm,value'");
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw config_error(path + ":" + std::to_string(line_no) + ": expected two columns");
        const double w = parse_value(line.substr(0, comma), path, line_no);
        const double v = parse_value(line.substr(comma + 1), path, line_no);
        if (!wl.empty() && w == wl.back())
            throw config_error(path + ":" + std::to_string(line_no) +
                               ": duplicate wavelength " + std::to_string(w));
        if (!wl.empty() && w < wl.back())
            throw config_error(path + ":" + std::to_string(line_no) +
                               ": wavelengths not sorted ascending");
        wl.push_back(w);
        val.push_back(v);
    }
    if (wl.empty()) throw config_error(path + ": no data rows");
    try {
        return Spectrum(WavelengthGrid(std::move(wl)), std::move(val), *unit, *kind);
    } catch (const std::invalid_argument& e) {
        throw config_error(path + ": " + e.what());
    }
}

void save_spectrum_csv(const Spectrum& spectrum, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot write spectrum file " + path);
    out << "wavelength_nm,value\n";
    char buf[64];
    for (std::size_t i = 0; i < spectrum.size(); ++i) {
        const double v = spectrum.values()[i];
        std::snprintf(buf, sizeof buf, "%.17g", spectrum.grid()[i]);
        out << buf << ',';
        if (std::isinf(v)) {
            out << "-inf";
        } else {
            std::snprintf(buf, sizeof buf, "%.17g", v);
            out << buf;
        }
        out << '\n';
    }
    nlohmann::json meta{{"unit", to_string(spectrum.unit())},
                        {"kind", to_string(spectrum.kind())}};
    std::ofstream metaOut(path + ".meta.json");
    metaOut << meta.dump(2) << '\n';
}

} // namespace otdrsec
