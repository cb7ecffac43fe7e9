#pragma once

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

#include "mmray/geometry.hpp"
#include "mmray/material.hpp"

namespace mmray {

namespace detail {

// Hemispherical integral of ((1+cos psi)/2)^alpha where psi is measured from
// the specular direction at theta_r from the surface normal. Gauss-Legendre
// on (theta_s, phi_s); results cached per (alpha, quantized theta_r).
inline double directive_lobe_norm(double theta_r, int alpha) {
    static std::map<std::pair<int, int>, double> cache;
    static std::mutex mu;
    int key_t = static_cast<int>(std::lround(theta_r * 1e4));
    {
        std::lock_guard<std::mutex> lk(mu);
        auto it = cache.find({alpha, key_t});
        if (it != cache.end()) return it->second;
    }
    constexpr int NT = 64, NP = 128;
    double sum = 0.0;
    Vec3 spec{std::sin(theta_r), 0.0, std::cos(theta_r)};
    for (int i = 0; i < NT; ++i) {
        double th = (i + 0.5) * (kPi / 2.0) / NT;
        for (int j = 0; j < NP; ++j) {
            double ph = (j + 0.5) * (2.0 * kPi) / NP;
            Vec3 d{std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)};
            double cospsi = std::clamp(dot(d, spec), -1.0, 1.0);
            sum += std::pow((1.0 + cospsi) / 2.0, alpha) * std::sin(th);
        }
    }
    double norm = sum * (kPi / 2.0 / NT) * (2.0 * kPi / NP);
    std::lock_guard<std::mutex> lk(mu);
    cache[{alpha, key_t}] = norm;
    return norm;
}

}  // namespace detail

/// Effective-Roughness scattered power transfer of one surface tile.
///
/// Returns the ratio (scattered power density at the observation point) /
/// (incident power density at the tile), so that
///   P_rx_density = W_incident * er_scatter_factor(...).
/// Lambertian lobe: S^2 * A * cos(theta_i) * cos(theta_s) / (pi * r_s^2).
/// Directive lobe replaces cos(theta_s)/pi by ((1+cos psi_r)/2)^alpha / N,
/// with N the hemispherical lobe integral, so the total scattered power
/// matches the Lambertian variant for any alpha.
inline double er_scatter_factor(double theta_i, double theta_s, double tile_area_m2,
                                double r_s_m, double S,
                                ScatterVariant variant = ScatterVariant::Lambertian,
                                int alpha = 1, double azimuth_s = 0.0) {
    if (S < 0.0 || S > 1.0) throw std::invalid_argument("er_scatter: S must be in [0,1]");
    if (!(r_s_m > 0.0)) throw std::invalid_argument("er_scatter: r_s must be > 0");
    if (theta_i < 0.0 || theta_i > kPi / 2.0 || theta_s < 0.0 || theta_s > kPi / 2.0)
        throw std::invalid_argument("er_scatter: angles must be in [0, pi/2]");
    if (S == 0.0) return 0.0;

    double common = S * S * tile_area_m2 * std::cos(theta_i) / (r_s_m * r_s_m);
    if (variant == ScatterVariant::Lambertian)
        return common * std::cos(theta_s) / kPi;

    // Directive: scatter direction at (theta_s, azimuth_s), specular at
    // (theta_i, azimuth 0) in the local frame with z along the normal and the
    // incidence plane in xz.
    Vec3 spec{std::sin(theta_i), 0.0, std::cos(theta_i)};
    Vec3 d{std::sin(theta_s) * std::cos(azimuth_s), std::sin(theta_s) * std::sin(azimuth_s),
           std::cos(theta_s)};
    double cospsi = std::clamp(dot(d, spec), -1.0, 1.0);
    double lobe = std::pow((1.0 + cospsi) / 2.0, alpha);
    double norm = detail::directive_lobe_norm(theta_i, alpha);
    return common * lobe / norm;
}

}  // namespace mmray
