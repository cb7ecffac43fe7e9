#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "mmray/geometry.hpp"

namespace mmray {

enum class BaselineScenario { InH, UMi };
enum class LosState { LoS, NLoS };

/// Query for the reference path-loss and angle-spread models.
struct BaselineQuery {
    BaselineScenario scenario = BaselineScenario::InH;
    LosState los = LosState::LoS;
    double fc_GHz = 27.0;
    double d_m = 10.0;       // 3D TX-RX distance
    double h_bs_m = 10.0;    // base station height (UMi breakpoint)
    double h_ut_m = 1.5;     // terminal height

    void validate() const {
        if (!(d_m > 0.0)) throw std::invalid_argument("baseline: distance must be > 0");
        if (fc_GHz < 0.5 || fc_GHz > 100.0)
            throw std::invalid_argument("baseline: fc must be in [0.5, 100] GHz");
    }
};

/// Indoor Hotspot path loss.
///   LoS:  32.4 + 17.3 log10(d) + 20 log10(fc)
///   NLoS: max(LoS, 17.3 + 38.3 log10(d) + 24.9 log10(fc))
inline double pathloss_inh(const BaselineQuery& q) {
    q.validate();
    double los = 32.4 + 17.3 * std::log10(q.d_m) + 20.0 * std::log10(q.fc_GHz);
    if (q.los == LosState::LoS) return los;
    double nlos = 17.3 + 38.3 * std::log10(q.d_m) + 24.9 * std::log10(q.fc_GHz);
    return std::max(los, nlos);
}

/// Urban Micro street-canyon path loss. The LoS curve is dual-slope with
/// breakpoint d_bp = 4 h'_bs h'_ut fc / c using effective heights (h - 1 m);
/// the two branches meet exactly at the breakpoint.
inline double pathloss_umi(const BaselineQuery& q) {
    q.validate();
    double dh = q.h_bs_m - q.h_ut_m;
    double d2d2 = q.d_m * q.d_m - dh * dh;  // squared ground distance
    double d2d = d2d2 > 0.0 ? std::sqrt(d2d2) : 0.0;
    double hbp = std::max(q.h_bs_m - 1.0, 0.05);
    double hup = std::max(q.h_ut_m - 1.0, 0.05);
    double d_bp = 4.0 * hbp * hup * (q.fc_GHz * 1e9) / kSpeedOfLight;

    double los;
    if (d2d <= d_bp) {
        los = 32.4 + 21.0 * std::log10(q.d_m) + 20.0 * std::log10(q.fc_GHz);
    } else {
        los = 32.4 + 40.0 * std::log10(q.d_m) + 20.0 * std::log10(q.fc_GHz) -
              9.5 * std::log10(d_bp * d_bp + dh * dh);
    }
    if (q.los == LosState::LoS) return los;
    double nlos = 22.4 + 35.3 * std::log10(q.d_m) + 21.3 * std::log10(q.fc_GHz) -
                  0.3 * (q.h_ut_m - 1.5);
    return std::max(los, nlos);
}

inline double baseline_pathloss(const BaselineQuery& q) {
    return q.scenario == BaselineScenario::InH ? pathloss_inh(q) : pathloss_umi(q);
}

/// Lognormal parameters (mu, sigma) of the azimuth spread of arrival,
/// log10(ASA/1deg), as linear functions of log10(1 + fc).
inline std::pair<double, double> asa_params(BaselineScenario scenario, LosState los,
                                            double fc_GHz) {
    if (fc_GHz < 0.5 || fc_GHz > 100.0)
        throw std::invalid_argument("asa_params: fc must be in [0.5, 100] GHz");
    double lf = std::log10(1.0 + fc_GHz);
    if (scenario == BaselineScenario::InH) {
        if (los == LosState::LoS) return {-0.19 * lf + 1.781, 0.12 * lf + 0.119};
        return {-0.11 * lf + 1.863, 0.12 * lf + 0.059};
    }
    if (los == LosState::LoS) return {-0.08 * lf + 1.73, 0.014 * lf + 0.28};
    return {-0.08 * lf + 1.81, 0.05 * lf + 0.3};
}

inline BaselineScenario parse_scenario(const std::string& s) {
    if (s == "InH" || s == "inh") return BaselineScenario::InH;
    if (s == "UMi" || s == "umi") return BaselineScenario::UMi;
    throw std::invalid_argument("unknown baseline scenario '" + s + "' (expected InH or UMi)");
}

inline LosState parse_los(const std::string& s) {
    if (s == "LoS" || s == "los" || s == "LOS") return LosState::LoS;
    if (s == "NLoS" || s == "nlos" || s == "NLOS") return LosState::NLoS;
    throw std::invalid_argument("unknown LoS state '" + s + "' (expected LoS or NLoS)");
}

}  // namespace mmray
