#pragma once

#include <stdexcept>
#include <string>

namespace otdrsec {

/// Bad user input: malformed files, inconsistent spectra, out-of-bounds knobs.
/// The CLI maps this family to exit code 2.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// Numerical failure: non-PSD matrix beyond tolerance, diverged fit, etc.
/// The CLI maps this to exit code 3.
class numerical_error : public std::runtime_error {
public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

} // namespace otdrsec
