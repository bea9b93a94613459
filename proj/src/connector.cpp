#include "otdrsec/connector.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "otdrsec/errors.hpp"

namespace otdrsec {

namespace {

constexpr double kHMin = 0.0;
constexpr double kHMax = 0.11;
constexpr double kNdMin = 1.46;
constexpr double kNdMax = 1.6;
// Interior margin keeping fit iterates strictly inside the open n_d bound.
constexpr double kNdMargin = 1e-6;
const double kInf = std::numeric_limits<double>::infinity();

double phase_rad(double n_d, double h_um, double wavelength_nm,
                 PhaseConvention convention) {
    const double factor =
        convention == PhaseConvention::doubled_thickness ? 8.0 : 4.0;
    // h in micrometers, wavelength in nanometers: 1e3 converts the ratio.
    return factor * M_PI * n_d * h_um * 1e3 / wavelength_nm;
}

} // namespace

void ConnectorModel::validate() const {
    if (!(n_core >= 1.4 && n_core <= 1.5))
        throw config_error("connector model: n_core must lie in [1.4, 1.5]");
    if (!(n_d > kNdMin && n_d < kNdMax))
        throw config_error("connector model: n_d must lie in (1.46, 1.6)");
    if (!(h_um >= kHMin && h_um <= kHMax))
        throw config_error("connector model: h_um must lie in [0, 0.11]");
}

std::string to_string(PhaseConvention convention) {
    return convention == PhaseConvention::doubled_thickness ? "doubled_thickness"
                                                            : "standard";
}

double fresnel_r0(double n_core, double n_d) {
    if (!(n_core > 1.0) || !(n_d > 1.0))
        throw std::domain_error("refractive indices must be > 1");
    const double r = (n_core - n_d) / (n_core + n_d);
    return r * r;
}

double connector_reflectance_db(const ConnectorModel& model, double wavelength_nm,
                                bool exact, PhaseConvention convention) {
    if (!(wavelength_nm > 0.0))
        throw std::domain_error("wavelength must be > 0");
    const double r0 = fresnel_r0(model.n_core, model.n_d);
    const double x = phase_rad(model.n_d, model.h_um, wavelength_nm, convention);
    const double linear = exact ? 2.0 * r0 * (1.0 - std::cos(x)) : r0 * x * x;
    if (!(linear > 0.0)) return -kInf;
    return 10.0 * std::log10(linear);
}

namespace {

struct Objective {
    const Spectrum& data;
    double n_core;
    const FitOptions& options;
    mutable long evaluations = 0;

    double operator()(double h_um, double n_d) const {
        ++evaluations;
        ConnectorModel m{n_core, n_d, h_um};
        double ss = 0.0;
        const auto& grid = data.grid().points_nm();
        const auto& values = data.values();
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double model_db = connector_reflectance_db(
                m, grid[i], options.exact, options.convention);
            if (!std::isfinite(model_db)) return 1e30;
            const double r = model_db - values[i];
            ss += r * r;
        }
        return std::sqrt(ss / static_cast<double>(grid.size()));
    }
};

struct Vertex {
    double h, nd, f;
};

void clamp_into_box(double& h, double& nd) {
    h = std::clamp(h, kHMin, kHMax);
    nd = std::clamp(nd, kNdMin + kNdMargin, kNdMax - kNdMargin);
}

/// Two-parameter Nelder-Mead with candidates clamped into the bound box.
Vertex nelder_mead(const Objective& obj, double h0, double nd0, int max_iter) {
    const double h_step = 0.1 * (kHMax - kHMin);
    const double nd_step = 0.1 * (kNdMax - kNdMin);
    std::array<Vertex, 3> s;
    auto make = [&](double h, double nd) {
        clamp_into_box(h, nd);
        return Vertex{h, nd, obj(h, nd)};
    };
    s[0] = make(h0, nd0);
    s[1] = make(h0 + h_step, nd0);
    s[2] = make(h0, nd0 + nd_step);

    for (int it = 0; it < max_iter; ++it) {
        std::sort(s.begin(), s.end(),
                  [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
        const double size = std::max(
            std::abs(s[1].h - s[0].h) + std::abs(s[2].h - s[0].h),
            10.0 * (std::abs(s[1].nd - s[0].nd) + std::abs(s[2].nd - s[0].nd)));
        if (size < 1e-12 || s[2].f - s[0].f < 1e-15) break;

        const double ch = 0.5 * (s[0].h + s[1].h);
        const double cnd = 0.5 * (s[0].nd + s[1].nd);
        Vertex refl = make(ch + (ch - s[2].h), cnd + (cnd - s[2].nd));
        if (refl.f < s[0].f) {
            Vertex expd = make(ch + 2.0 * (ch - s[2].h), cnd + 2.0 * (cnd - s[2].nd));
            s[2] = expd.f < refl.f ? expd : refl;
        } else if (refl.f < s[1].f) {
            s[2] = refl;
        } else {
            const Vertex& base = refl.f < s[2].f ? refl : s[2];
            Vertex contr = make(ch + 0.5 * (base.h - ch), cnd + 0.5 * (base.nd - cnd));
            if (contr.f < base.f) {
                s[2] = contr;
            } else {
                // Shrink toward the best vertex.
                s[1] = make(s[0].h + 0.5 * (s[1].h - s[0].h),
                            s[0].nd + 0.5 * (s[1].nd - s[0].nd));
                s[2] = make(s[0].h + 0.5 * (s[2].h - s[0].h),
                            s[0].nd + 0.5 * (s[2].nd - s[0].nd));
            }
        }
    }
    std::sort(s.begin(), s.end(),
              [](const Vertex& a, const Vertex& b) { return a.f < b.f; });
    return s[0];
}

FitDiagnostics gauss_newton_diagnostics(const Objective& obj, const Vertex& best,
                                        std::size_t n_points) {
    FitDiagnostics d;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double dh = 1e-6;
    const double dnd = 1e-6;
    // Finite-difference normal matrix of the RMS objective treated as
    // sqrt(chi2/n): rebuild chi2 curvature from central differences.
    auto chi2 = [&](double h, double nd) {
        const double f = obj(h, nd);
        return f * f * static_cast<double>(n_points);
    };
    const double f0 = chi2(best.h, best.nd);
    const double fhh = (chi2(best.h + dh, best.nd) - 2.0 * f0 +
                        chi2(best.h - dh, best.nd)) / (dh * dh);
    const double fnn = (chi2(best.h, best.nd + dnd) - 2.0 * f0 +
                        chi2(best.h, best.nd - dnd)) / (dnd * dnd);
    const double fhn = (chi2(best.h + dh, best.nd + dnd) -
                        chi2(best.h + dh, best.nd - dnd) -
                        chi2(best.h - dh, best.nd + dnd) +
                        chi2(best.h - dh, best.nd - dnd)) / (4.0 * dh * dnd);
    // Covariance = 2 * sigma^2 * H^-1 with H the chi2 Hessian.
    const double dof = static_cast<double>(n_points) - 2.0;
    const double sigma2 = dof > 0.0 ? f0 / dof : 0.0;
    const double det = fhh * fnn - fhn * fhn;
    if (!(det > 0.0) || !(fhh > 0.0) || !(fnn > 0.0)) {
        d.h_stderr_um = nan;
        d.nd_stderr = nan;
        d.correlation = nan;
        return d;
    }
    const double chh = 2.0 * sigma2 * fnn / det;
    const double cnn = 2.0 * sigma2 * fhh / det;
    const double chn = -2.0 * sigma2 * fhn / det;
    d.h_stderr_um = std::sqrt(std::max(chh, 0.0));
    d.nd_stderr = std::sqrt(std::max(cnn, 0.0));
    d.correlation = (chh > 0.0 && cnn > 0.0) ? chn / std::sqrt(chh * cnn) : nan;
    return d;
}

} // namespace

FitResult fit_connector(const Spectrum& reflectance_dB, double n_core,
                        const FitOptions& options) {
    if (reflectance_dB.unit() != SpectrumUnit::dB)
        throw config_error("fit_connector: input spectrum must be in dB");
    if (reflectance_dB.size() < 5)
        throw config_error("fit_connector: need at least 5 spectral points");
    if (!(n_core >= 1.4 && n_core <= 1.5))
        throw config_error("fit_connector: n_core must lie in [1.4, 1.5]");
    if (options.starts_per_axis < 1)
        throw config_error("fit_connector: starts_per_axis must be >= 1");

    Objective obj{reflectance_dB, n_core, options};

    Vertex best{0.0, 0.0, kInf};
    const int k = options.starts_per_axis;
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            const double h0 = kHMin + (i + 0.5) / k * (kHMax - kHMin);
            const double nd0 = kNdMin + (j + 0.5) / k * (kNdMax - kNdMin);
            const Vertex v = nelder_mead(obj, h0, nd0, options.max_iterations);
            // Deterministic best-of: meaningful improvement wins; ties go to
            // the lower thickness, then the lower layer index. The sentinel's
            // infinite f would poison the tolerance, so guard it.
            const double tol =
                std::isfinite(best.f) ? 1e-9 * std::max(1.0, best.f) : 0.0;
            if (v.f < best.f - tol ||
                (std::abs(v.f - best.f) <= tol &&
                 (v.h < best.h || (v.h == best.h && v.nd < best.nd))))
                best = v;
        }
    }

    FitResult result;
    result.model = ConnectorModel{n_core, best.nd, best.h};
    result.residual_rms_dB = best.f;
    result.used_exact_formula = options.exact;
    result.convention = options.convention;
    result.converged = best.f <= 10.0;
    result.at_boundary = best.h < kHMin + 1e-4 || best.h > kHMax - 1e-4 ||
                         best.nd < kNdMin + 1e-4 || best.nd > kNdMax - 1e-4;
    result.diagnostics = gauss_newton_diagnostics(obj, best, reflectance_dB.size());
    result.evaluations = obj.evaluations;
    return result;
}

void save_fit_json(const FitResult& result, const std::string& path) {
    nlohmann::json doc;
    doc["format"] = "otdrsec-connector-fit/1";
    doc["model"] = {{"n_core", result.model.n_core},
                    {"n_d", result.model.n_d},
                    {"h_um", result.model.h_um}};
    doc["residual_rms_db"] = result.residual_rms_dB;
    doc["used_exact_formula"] = result.used_exact_formula;
    doc["phase_convention"] = to_string(result.convention);
    doc["converged"] = result.converged;
    doc["at_boundary"] = result.at_boundary;
    doc["evaluations"] = result.evaluations;
    doc["diagnostics"] = {{"h_stderr_um", result.diagnostics.h_stderr_um},
                          {"nd_stderr", result.diagnostics.nd_stderr},
                          {"correlation", result.diagnostics.correlation}};
    std::ofstream out(path);
    if (!out) throw config_error("cannot write fit report: " + path);
    out << doc.dump(2) << "\n";
}

void save_fit_curve_csv(const FitResult& result, const Spectrum& data,
                        const std::string& path) {
    std::ofstream out(path);
    if (!out) throw config_error("cannot write fit curve: " + path);
    out << "wavelength_nm,data_db,model_db\n";
    char buf[120];
    const auto& grid = data.grid().points_nm();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double model_db = connector_reflectance_db(
            result.model, grid[i], result.used_exact_formula, result.convention);
        std::snprintf(buf, sizeof buf, "%.10g,%.17g,%.17g\n", grid[i],
                      data.values()[i], model_db);
        out << buf;
    }
    if (!out) throw config_error("failed writing fit curve: " + path);
}

} // namespace otdrsec
