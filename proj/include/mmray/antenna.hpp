#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include "mmray/geometry.hpp"

namespace mmray {

enum class AntennaKind { Isotropic, GaussianHorn, OmniVertical, SectorArray };
enum class PolarizationKind { V, H, RHCP, LHCP };

/// Jones vector in the (vertical, horizontal) transverse basis of a ray
/// direction; see transverse_basis().
struct Jones {
    std::complex<double> v{0.0, 0.0};
    std::complex<double> h{0.0, 0.0};
};

inline Jones polarization_jones(PolarizationKind p) {
    const double isq2 = 1.0 / std::sqrt(2.0);
    switch (p) {
        case PolarizationKind::V: return {{1.0, 0.0}, {0.0, 0.0}};
        case PolarizationKind::H: return {{0.0, 0.0}, {1.0, 0.0}};
        case PolarizationKind::RHCP: return {{isq2, 0.0}, {0.0, -isq2}};
        case PolarizationKind::LHCP: return {{isq2, 0.0}, {0.0, isq2}};
    }
    return {};
}

/// Directive pattern model. The horn/array main lobe is Gaussian in dB,
///   G(te, th) = Gmax - 12 [ (te/HPBW_e)^2 + (th/HPBW_h)^2 ],
/// floored at Gmax - front_to_back_dB, which puts the -3 dB points at half
/// the half-power beamwidth in each principal plane by construction.
struct AntennaPattern {
    AntennaKind kind = AntennaKind::Isotropic;
    Vec3 boresight{1.0, 0.0, 0.0};
    double max_gain_dBi = 0.0;
    double hpbw_e_deg = 60.0;
    double hpbw_h_deg = 60.0;
    double front_to_back_dB = 25.0;
    PolarizationKind polarization = PolarizationKind::V;

    void validate() const {
        if (kind == AntennaKind::GaussianHorn || kind == AntennaKind::SectorArray) {
            if (!(hpbw_e_deg > 0.0) || !(hpbw_h_deg > 0.0))
                throw std::invalid_argument("antenna: HPBW must be > 0");
            if (!(front_to_back_dB > 0.0))
                throw std::invalid_argument("antenna: front_to_back must be > 0");
        }
    }

    AntennaPattern rotated_azimuth(double azimuth_deg) const {
        AntennaPattern p = *this;
        double az = deg2rad(azimuth_deg);
        p.boresight = {std::cos(az), std::sin(az), 0.0};
        return p;
    }
};

/// Gain of the pattern toward unit direction `dir`, in dBi.
inline double antenna_gain(const AntennaPattern& pat, const Vec3& dir) {
    Vec3 d = normalized(dir);
    switch (pat.kind) {
        case AntennaKind::Isotropic:
            return pat.max_gain_dBi;
        case AntennaKind::OmniVertical: {
            // dipole-like: flat in azimuth, cos^2 of elevation in power
            double el = std::asin(std::clamp(d.z, -1.0, 1.0));
            double g = std::cos(el) * std::cos(el);
            double floor_lin = 1e-3;  // -30 dB pattern floor at the poles
            return pat.max_gain_dBi + 10.0 * std::log10(std::max(g, floor_lin));
        }
        case AntennaKind::GaussianHorn:
        case AntennaKind::SectorArray: {
            Vec3 bx = normalized(pat.boresight);
            auto [bz, byn] = transverse_basis(bx);  // bz vertical-ish, byn = bx x bz
            Vec3 by = byn * -1.0;                   // right-handed (bx, by, bz)
            double dx = dot(d, bx), dy = dot(d, by), dz = dot(d, bz);
            double az = rad2deg(std::atan2(dy, dx));
            double el = rad2deg(std::atan2(dz, std::sqrt(std::max(dx * dx + dy * dy, 1e-300))));
            double off = 12.0 * (el / pat.hpbw_e_deg) * (el / pat.hpbw_e_deg) +
                         12.0 * (az / pat.hpbw_h_deg) * (az / pat.hpbw_h_deg);
            return pat.max_gain_dBi - std::min(off, pat.front_to_back_dB);
        }
    }
    return 0.0;
}

inline double antenna_gain_linear(const AntennaPattern& pat, const Vec3& dir) {
    return std::pow(10.0, antenna_gain(pat, dir) / 10.0);
}

}  // namespace mmray
