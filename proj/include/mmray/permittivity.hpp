#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "mmray/fresnel.hpp"

namespace mmray {

/// One reflectivity/transmissivity sample: |R|^2 or |T|^2 in dB at a frequency.
struct SlabSample {
    double freq_GHz = 0.0;
    double value_dB = 0.0;
    bool is_reflection = false;  // R sample if true, T sample otherwise
};

struct PermittivityFit {
    cdouble eps_r{1.0, 0.0};
    double residual_rms_dB = 0.0;
    bool converged = true;
    bool ambiguous = false;  // restarts disagree on a residual plateau
    int evaluations = 0;
};

namespace detail {

inline double slab_model_dB(const SlabSample& s, const cdouble& eps, double thickness_m,
                            double theta_i, Polarization pol) {
    SlabResponse r = slab(theta_i, eps, thickness_m, s.freq_GHz, pol);
    double mag = s.is_reflection ? std::abs(r.R) : std::abs(r.T);
    return 20.0 * std::log10(std::max(mag, 1e-15));
}

// 2D Nelder-Mead on (Re eps, Im eps) with bound penalties.
inline std::pair<std::array<double, 2>, double> nelder_mead2(
    const std::function<double(const std::array<double, 2>&)>& f,
    std::array<double, 2> start, double scale, int max_iter, int& evals) {
    using P = std::array<double, 2>;
    std::array<P, 3> sx{P{start[0], start[1]},
                        P{start[0] + scale, start[1]},
                        P{start[0], start[1] - 0.5 * scale}};
    std::array<double, 3> fv;
    for (int i = 0; i < 3; ++i) { fv[i] = f(sx[i]); ++evals; }

    for (int it = 0; it < max_iter; ++it) {
        // order: 0 best, 2 worst
        std::array<int, 3> idx{0, 1, 2};
        std::sort(idx.begin(), idx.end(), [&](int a, int b) { return fv[a] < fv[b]; });
        std::array<P, 3> s2{sx[idx[0]], sx[idx[1]], sx[idx[2]]};
        std::array<double, 3> f2{fv[idx[0]], fv[idx[1]], fv[idx[2]]};
        sx = s2; fv = f2;

        double spread = std::abs(fv[2] - fv[0]);
        double size = std::hypot(sx[2][0] - sx[0][0], sx[2][1] - sx[0][1]) +
                      std::hypot(sx[1][0] - sx[0][0], sx[1][1] - sx[0][1]);
        if (spread < 1e-12 && size < 1e-10) break;

        P c{(sx[0][0] + sx[1][0]) / 2.0, (sx[0][1] + sx[1][1]) / 2.0};
        auto along = [&](double t) { return P{c[0] + t * (sx[2][0] - c[0]), c[1] + t * (sx[2][1] - c[1])}; };

        P xr = along(-1.0);
        double fr = f(xr); ++evals;
        if (fr < fv[0]) {
            P xe = along(-2.0);
            double fe = f(xe); ++evals;
            if (fe < fr) { sx[2] = xe; fv[2] = fe; } else { sx[2] = xr; fv[2] = fr; }
        } else if (fr < fv[1]) {
            sx[2] = xr; fv[2] = fr;
        } else {
            P xc = along(0.5);
            double fc = f(xc); ++evals;
            if (fc < fv[2]) {
                sx[2] = xc; fv[2] = fc;
            } else {
                for (int i = 1; i < 3; ++i) {
                    sx[i] = {sx[0][0] + 0.5 * (sx[i][0] - sx[0][0]),
                             sx[0][1] + 0.5 * (sx[i][1] - sx[0][1])};
                    fv[i] = f(sx[i]); ++evals;
                }
            }
        }
    }
    int best = 0;
    for (int i = 1; i < 3; ++i)
        if (fv[i] < fv[best]) best = i;
    return {sx[best], fv[best]};
}

}  // namespace detail

/// Least-squares extraction of a complex permittivity from slab
/// reflectivity/transmissivity sweeps. Derivative-free simplex search with
/// three restarts; constraints Re >= 1, Im <= 0 enforced by penalty.
inline PermittivityFit fit_permittivity(const std::vector<SlabSample>& samples,
                                        double thickness_m, double theta_i,
                                        Polarization pol,
                                        cdouble initial_guess = cdouble(3.0, -0.1),
                                        int max_iter = 400) {
    if (samples.size() < 8)
        throw std::invalid_argument("fit_permittivity: need at least 8 samples");
    if (!(thickness_m > 0.0))
        throw std::invalid_argument("fit_permittivity: thickness must be > 0");

    auto objective = [&](const std::array<double, 2>& p) {
        double penalty = 0.0;
        double re = p[0], im = p[1];
        if (re < 1.0) { penalty += 1e3 * (1.0 - re) * (1.0 - re); re = 1.0; }
        if (im > 0.0) { penalty += 1e3 * im * im; im = 0.0; }
        cdouble eps(re, im);
        double ss = 0.0;
        for (const auto& s : samples) {
            double m = detail::slab_model_dB(s, eps, thickness_m, theta_i, pol);
            double d = m - s.value_dB;
            ss += d * d;
        }
        return ss / double(samples.size()) + penalty;
    };

    struct Candidate { std::array<double, 2> x; double f; };
    std::vector<Candidate> results;
    int evals = 0;
    const std::array<std::array<double, 2>, 3> starts{
        std::array<double, 2>{initial_guess.real(), initial_guess.imag()},
        std::array<double, 2>{initial_guess.real() * 1.4 + 0.3, initial_guess.imag() * 2.0 - 0.05},
        std::array<double, 2>{std::max(1.0, initial_guess.real() * 0.7), initial_guess.imag() * 0.5}};
    for (const auto& s0 : starts) {
        auto [x, fv] = detail::nelder_mead2(objective, s0, 0.4, max_iter, evals);
        results.push_back({x, fv});
    }
    std::sort(results.begin(), results.end(),
              [](const Candidate& a, const Candidate& b) { return a.f < b.f; });

    PermittivityFit fit;
    fit.eps_r = cdouble(results[0].x[0], results[0].x[1]);
    fit.residual_rms_dB = std::sqrt(results[0].f);
    fit.evaluations = evals;
    fit.converged = results[0].f < 1e6;

    // residual plateau: two restarts equally good but > 5% apart in Re(eps)
    const auto& a = results[0];
    const auto& b = results[1];
    double re_gap = std::abs(a.x[0] - b.x[0]) / std::max(a.x[0], 1e-9);
    double res_gap = std::abs(std::sqrt(std::max(a.f, 0.0)) - std::sqrt(std::max(b.f, 0.0)));
    fit.ambiguous = (re_gap > 0.05) && (res_gap < 0.5);
    return fit;
}

}  // namespace mmray
