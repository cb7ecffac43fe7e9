#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace mmray {

enum class ScatterVariant { Lambertian, Directive };

/// Electromagnetic description of a wall/surface type. Permittivity follows
/// the e^{+jwt} time convention, so lossy media carry Im(eps_r) <= 0.
/// Walls are homogeneous slabs of the given thickness.
struct Material {
    std::string name;
    std::complex<double> eps_r{1.0, 0.0};  // complex relative permittivity
    double thickness_m = 0.1;
    double scattering_S = 0.0;       // ER scattering coefficient, [0,1]
    int scattering_alpha = 1;        // directive lobe exponent, >= 1
    ScatterVariant er_variant = ScatterVariant::Lambertian;
    bool perfect_conductor = false;  // overrides eps_r
    double freq_lo_GHz = 0.5;        // validity interval
    double freq_hi_GHz = 100.0;

    void validate() const {
        if (name.empty()) throw std::invalid_argument("material name empty");
        if (!perfect_conductor) {
            if (eps_r.real() < 1.0)
                throw std::invalid_argument("material '" + name + "': Re(eps_r) must be >= 1");
            if (eps_r.imag() > 0.0)
                throw std::invalid_argument("material '" + name + "': Im(eps_r) must be <= 0");
        }
        if (!(thickness_m > 0.0))
            throw std::invalid_argument("material '" + name + "': thickness must be > 0");
        if (scattering_S < 0.0 || scattering_S > 1.0)
            throw std::invalid_argument("material '" + name + "': S must be in [0,1]");
        if (scattering_alpha < 1)
            throw std::invalid_argument("material '" + name + "': alpha must be >= 1");
        if (!(freq_lo_GHz <= freq_hi_GHz))
            throw std::invalid_argument("material '" + name + "': bad frequency interval");
    }
};

// Default permittivities used when a scenario omits values. These are
// engineering defaults, not calibrated constants; scenario files override.
inline Material default_material(const std::string& name) {
    Material m;
    m.name = name;
    m.thickness_m = 0.3;
    m.scattering_S = 0.25;
    if (name == "travertine" || name == "marble") {
        m.eps_r = {6.0, -0.3};
    } else if (name == "concrete") {
        m.eps_r = {5.3, -0.3};
    } else if (name == "plasterboard") {
        m.eps_r = {2.8, -0.1};
        m.thickness_m = 0.012;
    } else if (name == "glass") {
        m.eps_r = {6.3, -0.3};
        m.thickness_m = 0.01;
    } else if (name == "metal") {
        m.perfect_conductor = true;
        m.thickness_m = 0.05;
        m.scattering_S = 0.0;
    } else {
        m.eps_r = {5.0, -0.3};
    }
    return m;
}

}  // namespace mmray
