#pragma once

#include <stdexcept>
#include <string>

namespace otdrsec {

/// Planck constant and vacuum light speed. Two sets are provided: CODATA
/// exact values (default everywhere) and the rounded pair 6.63e-34 / 3e8
/// commonly used in back-of-envelope link budgets; the rounded set exists so
/// published photon-number figures can be reproduced digit for digit.
struct PhysicalConstants {
    double planck_J_per_Hz;
    double light_speed_m_per_s;

    static PhysicalConstants codata() {
        return {6.62607015e-34, 2.99792458e8};
    }

    static PhysicalConstants paper_rounded() {
        return {6.63e-34, 3.0e8};
    }

    /// Parse "codata" or "paper" (CLI --constants flag).
    static PhysicalConstants from_name(const std::string& name);

    void validate() const {
        if (!(planck_J_per_Hz > 0.0) || !(light_speed_m_per_s > 0.0))
            throw std::domain_error("physical constants must be strictly positive");
    }
};

} // namespace otdrsec
