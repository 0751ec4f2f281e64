#pragma once

// Complex gamma by Lanczos approximation (g = 7, 9 terms) with reflection for
// the left half plane.  Good to ~14 significant digits on the strip the
// contour integrals use.

#include <cmath>
#include <complex>
#include <string>

#include "twm/errors.hpp"

namespace twm {

inline std::complex<double> complex_gamma(std::complex<double> z) {
    static const double lanczos[9] = {
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    };
    constexpr double pi_ = 3.14159265358979323846264338327950288;
    constexpr double sqrt_two_pi = 2.50662827463100050241576528481;

    if (z.imag() == 0.0 && z.real() <= 0.0 && z.real() == std::floor(z.real()))
        throw Pole("complex_gamma: pole at " + std::to_string(z.real()));

    if (z.real() < 0.5) {
        // Gamma(z) Gamma(1-z) = pi / sin(pi z)
        return pi_ / (std::sin(pi_ * z) * complex_gamma(1.0 - z));
    }
    z -= 1.0;
    std::complex<double> acc = lanczos[0];
    for (int i = 1; i < 9; ++i) acc += lanczos[i] / (z + static_cast<double>(i));
    const std::complex<double> t = z + 7.5;
    return sqrt_two_pi * std::pow(t, z + 0.5) * std::exp(-t) * acc;
}

} // namespace twm
