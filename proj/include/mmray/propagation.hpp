#pragma once

#include <complex>

#include "mmray/geometry.hpp"

namespace mmray {

inline double wavelength_m(double freq_GHz) { return kSpeedOfLight / (freq_GHz * 1e9); }
inline double wavenumber(double freq_GHz) { return 2.0 * kPi / wavelength_m(freq_GHz); }

/// Free-space amplitude gain lambda/(4 pi d) with phase e^{-jkd}. Its squared
/// magnitude is the Friis power ratio for isotropic antennas.
inline std::complex<double> free_space_field(double d_m, double freq_GHz) {
    double lam = wavelength_m(freq_GHz);
    double k = 2.0 * kPi / lam;
    double amp = lam / (4.0 * kPi * d_m);
    return std::polar(amp, -k * d_m);
}

/// Friis free-space path loss in dB: 20 log10(4 pi d / lambda).
inline double fspl_dB(double d_m, double freq_GHz) {
    return 20.0 * std::log10(4.0 * kPi * d_m / wavelength_m(freq_GHz));
}

inline double db_to_linear(double dB) { return std::pow(10.0, dB / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

}  // namespace mmray
