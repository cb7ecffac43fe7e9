#pragma once

#include <complex>
#include <stdexcept>

#include "mmray/geometry.hpp"

namespace mmray {

using cdouble = std::complex<double>;

enum class Polarization { TE, TM };  // perpendicular / parallel to incidence plane

/// Reflection and transmission coefficients of a homogeneous slab in air,
/// phase referenced to the front face.
struct SlabResponse {
    cdouble R{0.0, 0.0};
    cdouble T{1.0, 0.0};
};

namespace detail {

// sqrt(eps - sin^2 theta) on the branch with Re >= 0, which keeps decaying
// waves decaying under the e^{+jwt} convention (Im(eps) <= 0).
inline cdouble slab_kz_term(double theta_i, const cdouble& eps_r) {
    double s = std::sin(theta_i);
    cdouble v = eps_r - s * s;
    cdouble r = std::sqrt(v);
    if (r.real() < 0.0) r = -r;
    return r;
}

}  // namespace detail

/// Fresnel coefficients, air onto a half-space of relative permittivity
/// eps_r, incidence angle measured from the normal.
///   TE: r = (cos t - sqrt(eps - sin^2 t)) / (cos t + sqrt(eps - sin^2 t))
///   TM: r = (eps cos t - sqrt(eps - sin^2 t)) / (eps cos t + sqrt(eps - sin^2 t))
/// Perfect conductor: r_TE = -1, r_TM = +1, t = 0.
inline std::pair<cdouble, cdouble> fresnel(double theta_i, const cdouble& eps_r,
                                           Polarization pol,
                                           bool perfect_conductor = false) {
    if (theta_i < 0.0 || theta_i > kPi / 2.0 + 1e-12)
        throw std::invalid_argument("fresnel: theta_i must be in [0, pi/2]");
    if (perfect_conductor) {
        return {pol == Polarization::TE ? cdouble(-1.0, 0.0) : cdouble(1.0, 0.0),
                cdouble(0.0, 0.0)};
    }
    double c = std::cos(theta_i);
    if (c < 1e-15) c = 0.0;  // grazing limit
    cdouble q = detail::slab_kz_term(theta_i, eps_r);
    if (pol == Polarization::TE) {
        cdouble r = (c - q) / (c + q);
        cdouble t = 2.0 * c / (c + q);
        return {r, t};
    }
    cdouble ec = eps_r * c;
    cdouble r = (ec - q) / (ec + q);
    cdouble t = 2.0 * std::sqrt(eps_r) * c / (ec + q);
    return {r, t};
}

/// Coherent slab (Fabry-Perot) response: the closed-form sum of all internal
/// reflections of a slab of thickness d in air.
///   R = r (1 - P^2) / (1 - r^2 P^2),  T = (1 - r^2) P / (1 - r^2 P^2)
/// with r the single-interface Fresnel coefficient and P = e^{-j kz2 d} the
/// one-way internal propagator. T is referenced so that a vanishing slab
/// gives T = 1 (the trivial air phase across the slab is divided out).
inline SlabResponse slab(double theta_i, const cdouble& eps_r, double thickness_m,
                         double freq_GHz, Polarization pol,
                         bool perfect_conductor = false) {
    if (!(thickness_m > 0.0)) throw std::invalid_argument("slab: thickness must be > 0");
    if (!(freq_GHz > 0.0)) throw std::invalid_argument("slab: frequency must be > 0");
    if (perfect_conductor) {
        SlabResponse out;
        out.R = (pol == Polarization::TE) ? cdouble(-1.0, 0.0) : cdouble(1.0, 0.0);
        out.T = 0.0;
        return out;
    }
    double k0 = 2.0 * kPi * freq_GHz * 1e9 / kSpeedOfLight;
    auto [r, t_unused] = fresnel(theta_i, eps_r, pol);
    (void)t_unused;
    cdouble kz2 = k0 * detail::slab_kz_term(theta_i, eps_r);
    cdouble phase = std::exp(cdouble(0.0, -1.0) * kz2 * thickness_m);
    cdouble p2 = phase * phase;
    cdouble denom = 1.0 - r * r * p2;

    SlabResponse out;
    out.R = r * (1.0 - p2) / denom;
    // Referenced to the air path the slab replaces: exp(+j k0 cos(t) d).
    double kz1 = k0 * std::cos(theta_i);
    out.T = (1.0 - r * r) * phase / denom * std::exp(cdouble(0.0, 1.0) * kz1 * thickness_m);
    return out;
}

}  // namespace mmray
