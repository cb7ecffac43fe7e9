#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mmray/antenna.hpp"
#include "mmray/scene.hpp"
#include "mmray/tracer.hpp"

namespace mmray {

/// Received power per RX azimuth pointing: the product of a directional scan
/// with a rotating antenna.
struct PowerAngleProfile {
    std::string rx_id;
    double freq_GHz = 0.0;
    std::vector<double> azimuth_deg;  // [0, 360), uniform grid
    std::vector<double> power_dBm;
};

struct AngleSpreadSample {
    std::string rx_id;
    double as_deg = 0.0;
    double as_log = 0.0;  // log10(AS / 1 deg)
    std::string los_class;  // LoS | quasi-LoS | NLoS
};

struct MechanismBreakdown {
    std::string rx_id;
    std::map<std::string, double> fraction;  // class -> share of received power
};

struct ComparisonPoint {
    std::string key;
    double measured_dB = 0.0;
    double simulated_dB = 0.0;
    double error_dB = 0.0;
};

struct ComparisonReport {
    std::vector<ComparisonPoint> points;
    std::vector<std::string> unmatched;
    double rmse_dB = 0.0;
};

inline constexpr double kPowerFloor_dBm = -200.0;  // "no path" sentinel

namespace detail {

inline cdouble project_jones(const Coupling2& c, const Jones& p_tx, const Jones& p_rx) {
    // receive voltage uses the conjugate of the antenna polarization
    cdouble ev = c.vv * p_tx.v + c.vh * p_tx.h;
    cdouble eh = c.hv * p_tx.v + c.hh * p_tx.h;
    return std::conj(p_rx.v) * ev + std::conj(p_rx.h) * eh;
}

}  // namespace detail

/// Total received power in dBm. Coherent field summation across specular
/// components, incoherent power summation for diffuse-scatter components.
/// With isotropic patterns at both ends the result is polarization-agnostic
/// (averaged over transmit polarizations, total over receive polarizations),
/// which makes single-path results equal power_dBm_iso exactly.
inline double received_power(const ChannelResult& result, const AntennaPattern& tx_pattern,
                             const AntennaPattern& rx_pattern, double ptx_dBm) {
    if (result.paths.empty()) return kPowerFloor_dBm;
    bool agnostic = tx_pattern.kind == AntennaKind::Isotropic &&
                    rx_pattern.kind == AntennaKind::Isotropic;
    double p_lin = 0.0;
    if (agnostic) {
        Coupling2 acc;
        double inc = 0.0;
        for (const auto& p : result.paths) {
            double g = antenna_gain_linear(tx_pattern, p.depart_dir) *
                       antenna_gain_linear(rx_pattern, -p.arrive_dir);
            if (p.coherent)
                acc += p.coupling * cdouble(std::sqrt(g), 0.0);
            else
                inc += g * p.coupling.iso_power_gain();
        }
        p_lin = acc.iso_power_gain() + inc;
    } else {
        Jones jt = polarization_jones(tx_pattern.polarization);
        Jones jr = polarization_jones(rx_pattern.polarization);
        cdouble acc{0.0, 0.0};
        double inc = 0.0;
        for (const auto& p : result.paths) {
            double g = antenna_gain_linear(tx_pattern, p.depart_dir) *
                       antenna_gain_linear(rx_pattern, -p.arrive_dir);
            cdouble v = detail::project_jones(p.coupling, jt, jr) * std::sqrt(g);
            if (p.coherent)
                acc += v;
            else
                inc += std::norm(v);
        }
        p_lin = std::norm(acc) + inc;
    }
    if (p_lin <= 0.0) return kPowerFloor_dBm;
    return std::max(ptx_dBm + linear_to_db(p_lin), kPowerFloor_dBm);
}

/// Antenna-independent path loss: transmit power minus received power with
/// unit-gain isotropic antennas at both ends.
inline double path_loss(const ChannelResult& result, double ptx_dBm) {
    AntennaPattern iso;
    double prx = received_power(result, iso, iso, ptx_dBm);
    if (prx <= kPowerFloor_dBm) return ptx_dBm - kPowerFloor_dBm;
    return ptx_dBm - prx;
}

/// Emulates the rotating-positioner measurement: the RX antenna boresight is
/// stepped through the azimuth plane and the received power recorded per
/// pointing.
inline PowerAngleProfile synthesize_scan(const ChannelResult& result,
                                         const AntennaPattern& tx_pattern,
                                         const AntennaPattern& rx_horn,
                                         double step_deg = 15.0) {
    if (!(step_deg > 0.0) || std::abs(360.0 / step_deg - std::round(360.0 / step_deg)) > 1e-9)
        throw std::invalid_argument("synthesize_scan: step must divide 360");
    PowerAngleProfile pap;
    pap.rx_id = result.rx_id;
    pap.freq_GHz = result.freq_GHz;
    int n = int(std::round(360.0 / step_deg));
    for (int i = 0; i < n; ++i) {
        double az = i * step_deg;
        AntennaPattern pointed = rx_horn.rotated_azimuth(az);
        pap.azimuth_deg.push_back(az);
        pap.power_dBm.push_back(received_power(result, tx_pattern, pointed, result.ptx_dBm));
    }
    return pap;
}

/// Circular angle spread: minimum over a 1-degree shift grid of the
/// power-weighted wrapped standard deviation of azimuths, in degrees.
inline double angle_spread(const std::vector<double>& azimuth_deg,
                           const std::vector<double>& power_linear) {
    if (azimuth_deg.size() != power_linear.size() || azimuth_deg.empty())
        throw std::invalid_argument("angle_spread: size mismatch or empty input");
    double total = 0.0;
    for (double p : power_linear) {
        if (p < 0.0) throw std::invalid_argument("angle_spread: negative weight");
        total += p;
    }
    if (total <= 0.0) throw std::invalid_argument("angle_spread: all weights zero");

    double best = std::numeric_limits<double>::max();
    for (int delta = 0; delta < 360; ++delta) {
        double mean = 0.0;
        for (size_t i = 0; i < azimuth_deg.size(); ++i)
            mean += power_linear[i] * wrap_deg(azimuth_deg[i] + delta);
        mean /= total;
        double var = 0.0;
        for (size_t i = 0; i < azimuth_deg.size(); ++i) {
            double dev = wrap_deg(wrap_deg(azimuth_deg[i] + delta) - mean);
            var += power_linear[i] * dev * dev;
        }
        best = std::min(best, std::sqrt(var / total));
    }
    return best;
}

inline double angle_spread(const PowerAngleProfile& pap) {
    std::vector<double> p;
    p.reserve(pap.power_dBm.size());
    for (double dBm : pap.power_dBm)
        p.push_back(dBm <= kPowerFloor_dBm ? 0.0 : db_to_linear(dBm));
    return angle_spread(pap.azimuth_deg, p);
}

/// Angle spread of the raw ray list (arrival azimuths weighted by isotropic
/// path power).
inline double angle_spread_rays(const ChannelResult& result) {
    std::vector<double> az, p;
    for (const auto& path : result.paths) {
        az.push_back(path.aoa.azimuth_deg);
        p.push_back(path.coupling.iso_power_gain());
    }
    return angle_spread(az, p);
}

/// Sample mean and population (n-denominator) standard deviation.
inline std::pair<double, double> fit_gaussian(const std::vector<double>& samples) {
    if (samples.empty()) throw std::invalid_argument("fit_gaussian: empty input");
    double mu = 0.0;
    for (double s : samples) mu += s;
    mu /= double(samples.size());
    double var = 0.0;
    for (double s : samples) var += (s - mu) * (s - mu);
    var /= double(samples.size());
    return {mu, std::sqrt(var)};
}

/// Right-continuous empirical CDF as (x, F(x)) pairs at the sorted sample
/// points.
inline std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> samples) {
    if (samples.empty()) throw std::invalid_argument("empirical_cdf: empty input");
    std::sort(samples.begin(), samples.end());
    std::vector<std::pair<double, double>> out;
    size_t n = samples.size();
    for (size_t i = 0; i < n; ++i) {
        if (i + 1 < n && samples[i + 1] == samples[i]) continue;
        out.push_back({samples[i], double(i + 1) / double(n)});
    }
    return out;
}

inline double ecdf_value(const std::vector<std::pair<double, double>>& cdf, double x) {
    double f = 0.0;
    for (const auto& [xi, fi] : cdf) {
        if (xi <= x) f = fi;
        else break;
    }
    return f;
}

/// Share of the received power per mechanism class (incoherent per-path
/// bookkeeping; fractions sum to one whenever any power is present).
inline MechanismBreakdown mechanism_breakdown(const ChannelResult& result,
                                              const AntennaPattern& rx_pattern = {}) {
    MechanismBreakdown mb;
    mb.rx_id = result.rx_id;
    double total = 0.0;
    std::map<std::string, double> acc;
    for (const auto& p : result.paths) {
        double g = antenna_gain_linear(rx_pattern, -p.arrive_dir);
        double w = g * p.coupling.iso_power_gain();
        acc[p.signature] += w;
        total += w;
    }
    if (total > 0.0)
        for (auto& [sig, w] : acc) mb.fraction[sig] = w / total;
    return mb;
}

/// Root-mean-square difference of two paired dB vectors.
inline double rmse(const std::vector<double>& measured_dB,
                   const std::vector<double>& simulated_dB) {
    if (measured_dB.size() != simulated_dB.size() || measured_dB.empty())
        throw std::invalid_argument("rmse: size mismatch or empty input");
    double ss = 0.0;
    for (size_t i = 0; i < measured_dB.size(); ++i) {
        double d = measured_dB[i] - simulated_dB[i];
        ss += d * d;
    }
    return std::sqrt(ss / double(measured_dB.size()));
}

/// LoS classes: LoS when the direct segment is clear, quasi-LoS when it is
/// clear but at least `threshold` of the first Fresnel zone samples are
/// obstructed, NLoS when the direct segment itself is blocked.
inline std::string classify_los(const Scene& scene, const Point3& tx, const Point3& rx,
                                double freq_GHz, double threshold = 0.2) {
    if (!scene.segment_clear(tx, rx)) return "NLoS";
    double d = distance(tx, rx);
    if (d < 10.0 * kGeomEps) return "LoS";
    double lam = wavelength_m(freq_GHz);
    Vec3 axis = normalized(rx - tx);
    auto [u, v] = transverse_basis(axis);

    const int n_stations = 16, n_ring = 12;
    int obstructed = 0, totaln = 0;
    for (int i = 1; i < n_stations; ++i) {
        double t = double(i) / n_stations;
        double d1 = t * d, d2 = d - d1;
        double r1 = std::sqrt(lam * d1 * d2 / d);
        Point3 c = tx + axis * d1;
        for (int j = 0; j < n_ring; ++j) {
            double a = 2.0 * kPi * j / n_ring;
            Point3 p = c + u * (r1 * std::cos(a)) + v * (r1 * std::sin(a));
            ++totaln;
            if (!scene.segment_clear(tx, p) || !scene.segment_clear(p, rx)) ++obstructed;
        }
    }
    if (totaln > 0 && double(obstructed) / totaln >= threshold) return "quasi-LoS";
    return "LoS";
}

}  // namespace mmray
