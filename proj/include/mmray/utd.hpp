#pragma once

#include <complex>
#include <stdexcept>

#include "mmray/fresnel.hpp"
#include "mmray/geometry.hpp"

namespace mmray {

/// Fresnel integral tail: integral of e^{-j tau^2} dtau from x to infinity,
/// x >= 0. Power series below the crossover, asymptotic expansion above;
/// relative accuracy better than 1e-7 everywhere.
inline cdouble fresnel_integral_tail(double x) {
    const cdouble j(0.0, 1.0);
    double x2 = x * x;
    if (x2 <= 20.0) {
        // integral 0..x of e^{-j tau^2} = sum (-j)^n x^{2n+1} / (n! (2n+1))
        cdouble sum(0.0, 0.0);
        cdouble term(x, 0.0);
        cdouble mjx2 = -j * x2;
        for (int n = 0; n < 120; ++n) {
            sum += term / double(2 * n + 1);
            term *= mjx2 / double(n + 1);
            if (std::abs(term) < 1e-18 * (1.0 + std::abs(sum))) break;
        }
        cdouble whole = 0.5 * std::sqrt(kPi) * std::exp(-j * kPi / 4.0);
        return whole - sum;
    }
    // integral x..inf of e^{-j tau^2} ~ e^{-j x^2}/(2jx) [1 + sum_m (-1)^m (2m-1)!!/(2j x^2)^m]
    cdouble pref = std::exp(-j * x2) / (2.0 * j * x);
    cdouble sum(1.0, 0.0);
    cdouble term(1.0, 0.0);
    for (int m = 1; m <= 24; ++m) {
        term *= -double(2 * m - 1) / (2.0 * j * x2);
        sum += term;
        if (std::abs(term) < 1e-16) break;
    }
    return pref * sum;
}

/// UTD transition function F(X) = 2j sqrt(X) e^{jX} int_{sqrt X}^inf e^{-j tau^2} dtau.
inline cdouble utd_transition(double X) {
    if (X <= 0.0) return {0.0, 0.0};
    const cdouble j(0.0, 1.0);
    double sx = std::sqrt(X);
    return 2.0 * j * sx * std::exp(j * X) * fresnel_integral_tail(sx);
}

/// Scalar wedge geometry for one diffraction event. Azimuths are measured
/// from the o-face in the plane perpendicular to the edge; the exterior
/// (propagation) region spans [0, n*pi].
struct WedgeGeometry {
    double n = 2.0;        // exterior angle / pi, half-plane = 2
    double phi_inc = 0.0;  // source azimuth, radians
    double phi_obs = 0.0;  // observation azimuth, radians
    double beta0 = kPi / 2.0;  // angle between incident ray and edge
    double s_i = 1.0;      // source-to-edge distance (spreading parameter)
    double s_d = 1.0;      // edge-to-observation distance
};

/// Face reflection inputs for the Luebbers heuristic. PEC faces reproduce
/// the Kouyoumjian-Pathak soft/hard coefficients exactly.
struct WedgeFaces {
    cdouble eps_o{1.0, 0.0};
    bool pec_o = true;
    cdouble eps_n{1.0, 0.0};
    bool pec_n = true;
};

/// Soft (TE, E parallel to the edge plane) and hard (TM) diffraction
/// coefficients. Multiply the incident field at the edge point, together
/// with the spreading factor sqrt(s_i / (s_d (s_i + s_d))) and e^{-j k s_d},
/// to get the diffracted field.
struct UtdCoefficients {
    cdouble d_soft{0.0, 0.0};
    cdouble d_hard{0.0, 0.0};
    double spreading = 0.0;
};

namespace detail {

// cot((pi +/- beta) / (2n)) * F(k L a(beta)) with the Kouyoumjian-Pathak
// small-argument limit when the cotangent pole and the transition-function
// zero collide at a shadow boundary. The pole offset eps is oriented so the
// same limit expression serves both cotangent families.
inline cdouble utd_term(double beta, double sgn, double n, double kL) {
    const cdouble j(0.0, 1.0);
    double N, eps;
    if (sgn > 0.0) {
        N = std::round((kPi + beta) / (2.0 * kPi * n));
        eps = beta + kPi - 2.0 * kPi * n * N;
    } else {
        N = std::round((beta - kPi) / (2.0 * kPi * n));
        eps = 2.0 * kPi * n * N + kPi - beta;
    }
    double arg = eps / (2.0 * n);
    double c = std::cos((2.0 * kPi * n * N - beta) / 2.0);
    double a = 2.0 * c * c;
    if (std::abs(arg) > 1e-5) {
        return std::cos(arg) / std::sin(arg) * utd_transition(kL * a);
    }
    // boundary limit: n e^{j pi/4} [ sqrt(2 pi k L) sgn(eps) - 2 k L eps e^{j pi/4} ]
    double sgn_eps = (arg >= 0.0) ? 1.0 : -1.0;
    return n * std::exp(j * kPi / 4.0) *
           (std::sqrt(2.0 * kPi * kL) * sgn_eps - 2.0 * kL * eps * std::exp(j * kPi / 4.0));
}

}  // namespace detail

/// Kouyoumjian-Pathak UTD wedge diffraction with the Luebbers heuristic for
/// finitely conducting faces: the two reflected-field terms are weighted by
/// the Fresnel coefficients of the o- and n-face.
inline UtdCoefficients utd_diffraction(const WedgeGeometry& g, double freq_GHz,
                                       const WedgeFaces& faces = WedgeFaces{}) {
    if (!(g.n > 1.0) || g.n > 2.0 + 1e-9)
        throw std::invalid_argument("utd: exterior wedge factor n must be in (1, 2]");
    if (!(g.s_i > 0.0) || !(g.s_d > 0.0))
        throw std::invalid_argument("utd: distances must be > 0");
    if (g.phi_inc < -1e-9 || g.phi_inc > g.n * kPi + 1e-9 || g.phi_obs < -1e-9 ||
        g.phi_obs > g.n * kPi + 1e-9)
        throw std::invalid_argument("utd: azimuths must lie in the exterior region");

    const cdouble j(0.0, 1.0);
    double k = 2.0 * kPi * freq_GHz * 1e9 / kSpeedOfLight;
    double sb = std::sin(g.beta0);
    if (sb < 1e-9) throw std::invalid_argument("utd: grazing edge incidence");
    double L = g.s_i * g.s_d / (g.s_i + g.s_d) * sb * sb;
    double kL = k * L;

    double bm = g.phi_obs - g.phi_inc;  // beta-
    double bp = g.phi_obs + g.phi_inc;  // beta+

    cdouble t1 = detail::utd_term(bm, +1.0, g.n, kL);
    cdouble t2 = detail::utd_term(bm, -1.0, g.n, kL);
    cdouble t3 = detail::utd_term(bp, +1.0, g.n, kL);  // n-face reflection term
    cdouble t4 = detail::utd_term(bp, -1.0, g.n, kL);  // o-face reflection term

    // Luebbers: grazing angles relative to the faces, mapped to incidence
    // from the face normal for the Fresnel evaluation.
    auto face_refl = [&](double grazing, const cdouble& eps, bool pec) {
        double psi = std::clamp(grazing, 0.0, kPi / 2.0);
        double theta_from_normal = kPi / 2.0 - psi;
        auto [r_te, t_te] = fresnel(theta_from_normal, eps, Polarization::TE, pec);
        auto [r_tm, t_tm] = fresnel(theta_from_normal, eps, Polarization::TM, pec);
        (void)t_te; (void)t_tm;
        return std::make_pair(r_te, r_tm);
    };
    auto [r0_s, r0_h] = face_refl(g.phi_inc, faces.eps_o, faces.pec_o);
    auto [rn_s, rn_h] = face_refl(g.n * kPi - g.phi_obs, faces.eps_n, faces.pec_n);

    cdouble common = -std::exp(-j * kPi / 4.0) /
                     (2.0 * g.n * std::sqrt(2.0 * kPi * k) * sb);

    UtdCoefficients out;
    out.d_soft = common * (t1 + t2 + r0_s * t4 + rn_s * t3);
    out.d_hard = common * (t1 + t2 + r0_h * t4 + rn_h * t3);
    out.spreading = std::sqrt(g.s_i / (g.s_d * (g.s_i + g.s_d)));
    return out;
}

}  // namespace mmray
