#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "mmray/antenna.hpp"
#include "mmray/metrics.hpp"
#include "mmray/permittivity.hpp"
#include "mmray/scene.hpp"
#include "mmray/tracer.hpp"

namespace mmray {

using json = nlohmann::json;

inline constexpr const char* kToolVersion = "0.1.0";

struct TransmitterSpec {
    std::string id;
    Point3 position;
    double ptx_dBm = 0.0;
    AntennaPattern antenna;
};

struct ReceiverSpec {
    std::string id;
    Point3 position;
    AntennaPattern antenna;
};

/// Parsed scenario file: world model plus link endpoints and run settings.
struct Scenario {
    std::string name;
    Scene scene;
    std::vector<TransmitterSpec> tx;
    std::vector<ReceiverSpec> rx;
    std::vector<double> freqs_GHz{27.0};
    TraceConfig trace;
};

class SchemaError : public std::runtime_error {
  public:
    SchemaError(const std::string& field, const std::string& what)
        : std::runtime_error("scenario field '" + field + "': " + what) {}
};

namespace ioutil {

inline double num(const json& j, const std::string& field, const json& def = {}) {
    const json* v = &j;
    if (!j.contains(field)) {
        if (def.is_null()) throw SchemaError(field, "missing");
        v = &def;
    } else {
        v = &j.at(field);
    }
    if (!v->is_number()) throw SchemaError(field, "expected a number");
    return v->get<double>();
}

inline std::string str(const json& j, const std::string& field, const char* def = nullptr) {
    if (!j.contains(field)) {
        if (!def) throw SchemaError(field, "missing");
        return def;
    }
    if (!j.at(field).is_string()) throw SchemaError(field, "expected a string");
    return j.at(field).get<std::string>();
}

inline Point3 point(const json& j, const std::string& field) {
    if (!j.contains(field) || !j.at(field).is_array() || j.at(field).size() != 3)
        throw SchemaError(field, "expected [x, y, z]");
    const auto& a = j.at(field);
    return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

inline std::string fmt(double v, int prec = 6) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
    return buf;
}

}  // namespace ioutil

inline AntennaKind parse_antenna_kind(const std::string& s) {
    if (s == "isotropic") return AntennaKind::Isotropic;
    if (s == "gaussian_horn" || s == "horn") return AntennaKind::GaussianHorn;
    if (s == "omni_vertical" || s == "omni") return AntennaKind::OmniVertical;
    if (s == "sector_array" || s == "array") return AntennaKind::SectorArray;
    throw SchemaError("antenna.kind", "unknown kind '" + s + "'");
}

inline PolarizationKind parse_polarization(const std::string& s) {
    if (s == "V") return PolarizationKind::V;
    if (s == "H") return PolarizationKind::H;
    if (s == "RHCP") return PolarizationKind::RHCP;
    if (s == "LHCP") return PolarizationKind::LHCP;
    throw SchemaError("antenna.polarization", "unknown polarization '" + s + "'");
}

inline AntennaPattern parse_antenna(const json& j) {
    AntennaPattern p;
    if (j.is_null()) return p;
    p.kind = parse_antenna_kind(ioutil::str(j, "kind", "isotropic"));
    p.max_gain_dBi = ioutil::num(j, "max_gain_dBi", 0.0);
    p.hpbw_e_deg = ioutil::num(j, "hpbw_e_deg", 60.0);
    p.hpbw_h_deg = ioutil::num(j, "hpbw_h_deg", 60.0);
    p.front_to_back_dB = ioutil::num(j, "front_to_back_dB", 25.0);
    p.polarization = parse_polarization(ioutil::str(j, "polarization", "V"));
    double az = ioutil::num(j, "boresight_azimuth_deg", 0.0);
    double el = ioutil::num(j, "boresight_elevation_deg", 0.0);
    p.boresight = AzEl{az, el}.direction();
    p.validate();
    return p;
}

/// Built-in antenna presets: the 27/38 GHz measurement horns, the office TX
/// array and omni probe.
inline AntennaPattern antenna_preset(const std::string& name) {
    AntennaPattern p;
    if (name == "horn@27") {
        p.kind = AntennaKind::GaussianHorn;
        p.max_gain_dBi = 20.5;
        p.hpbw_e_deg = 14.0;
        p.hpbw_h_deg = 17.5;
    } else if (name == "horn@38") {
        p.kind = AntennaKind::GaussianHorn;
        p.max_gain_dBi = 21.5;
        p.hpbw_e_deg = 11.5;
        p.hpbw_h_deg = 13.0;
    } else if (name == "array@28") {
        p.kind = AntennaKind::SectorArray;
        p.max_gain_dBi = 12.0;
        p.hpbw_e_deg = 60.0;
        p.hpbw_h_deg = 60.0;
        p.polarization = PolarizationKind::RHCP;
    } else if (name == "omni3") {
        p.kind = AntennaKind::OmniVertical;
        p.max_gain_dBi = 3.0;
    } else if (name == "isotropic") {
        p.kind = AntennaKind::Isotropic;
    } else {
        throw std::invalid_argument("unknown antenna preset '" + name + "'");
    }
    return p;
}

inline Material parse_material(const json& j) {
    std::string name = ioutil::str(j, "name");
    Material m = default_material(name);
    if (j.contains("eps_re")) m.eps_r = {ioutil::num(j, "eps_re"), m.eps_r.imag()};
    if (j.contains("eps_im")) m.eps_r = {m.eps_r.real(), ioutil::num(j, "eps_im")};
    if (j.contains("thickness_m")) m.thickness_m = ioutil::num(j, "thickness_m");
    if (j.contains("S")) m.scattering_S = ioutil::num(j, "S");
    if (j.contains("alpha")) m.scattering_alpha = int(ioutil::num(j, "alpha"));
    if (j.contains("perfect_conductor")) m.perfect_conductor = j.at("perfect_conductor").get<bool>();
    if (j.contains("er_variant")) {
        std::string v = ioutil::str(j, "er_variant");
        if (v == "lambertian") m.er_variant = ScatterVariant::Lambertian;
        else if (v == "directive") m.er_variant = ScatterVariant::Directive;
        else throw SchemaError("materials.er_variant", "expected lambertian|directive");
    }
    if (j.contains("freq_lo_GHz")) m.freq_lo_GHz = ioutil::num(j, "freq_lo_GHz");
    if (j.contains("freq_hi_GHz")) m.freq_hi_GHz = ioutil::num(j, "freq_hi_GHz");
    m.validate();
    return m;
}

inline TraceConfig parse_trace_config(const json& j) {
    TraceConfig c;
    if (j.is_null()) return c;
    auto geti = [&](const char* f, int d) {
        return j.contains(f) ? int(ioutil::num(j, f)) : d;
    };
    c.max_interactions = geti("max_interactions", c.max_interactions);
    c.max_reflections = geti("max_reflections", c.max_reflections);
    c.max_diffractions = geti("max_diffractions", c.max_diffractions);
    c.max_transmissions = geti("max_transmissions", c.max_transmissions);
    c.max_scatterings = geti("max_scatterings", c.max_scatterings);
    c.max_mixed_refl_diff_events = geti("max_mixed_refl_diff_events", c.max_mixed_refl_diff_events);
    c.max_refl_combined_with_scatter =
        geti("max_refl_combined_with_scatter", c.max_refl_combined_with_scatter);
    if (j.contains("scatter_tile_size_m")) c.scatter_tile_size_m = ioutil::num(j, "scatter_tile_size_m");
    if (j.contains("min_path_power_dBm")) c.min_path_power_dBm = ioutil::num(j, "min_path_power_dBm");
    if (j.contains("mode")) {
        std::string m = ioutil::str(j, "mode");
        if (m == "full") c.mode = TraceMode::Full;
        else if (m == "simplified") c.mode = TraceMode::Simplified;
        else throw SchemaError("config.trace.mode", "expected full|simplified");
    }
    c.validate();
    return c;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open scenario file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("scenario '" + path + "': " + e.what());
    }

    Scenario sc;
    sc.name = ioutil::str(j, "name", std::filesystem::path(path).stem().string().c_str());

    std::map<std::string, int> mat_index;
    std::vector<Material> materials;
    if (j.contains("materials"))
        for (const auto& mj : j.at("materials")) {
            Material m = parse_material(mj);
            if (mat_index.count(m.name)) throw SchemaError("materials", "duplicate '" + m.name + "'");
            mat_index[m.name] = int(materials.size());
            materials.push_back(m);
        }

    std::vector<Facet> facets;
    if (j.contains("facets")) {
        int idx = 0;
        for (const auto& fj : j.at("facets")) {
            Facet f;
            if (!fj.contains("vertices") || !fj.at("vertices").is_array() ||
                fj.at("vertices").size() < 3)
                throw SchemaError("facets[" + std::to_string(idx) + "].vertices",
                                  "expected >= 3 points");
            for (const auto& vj : fj.at("vertices")) {
                if (!vj.is_array() || vj.size() != 3)
                    throw SchemaError("facets[" + std::to_string(idx) + "].vertices",
                                      "expected [x, y, z]");
                f.vertices.push_back({vj[0].get<double>(), vj[1].get<double>(), vj[2].get<double>()});
            }
            std::string mat = ioutil::str(fj, "material");
            auto it = mat_index.find(mat);
            if (it == mat_index.end()) {
                // well-known names resolve to engineering defaults
                try {
                    Material m = default_material(mat);
                    m.validate();
                    mat_index[mat] = int(materials.size());
                    materials.push_back(m);
                    it = mat_index.find(mat);
                } catch (...) {
                    throw SchemaError("facets[" + std::to_string(idx) + "].material",
                                      "unknown material '" + mat + "'");
                }
            }
            f.material_id = it->second;
            if (fj.contains("two_sided")) f.two_sided = fj.at("two_sided").get<bool>();
            f.tag = ioutil::str(fj, "tag", "");
            Vec3 nn = newell_normal(f.vertices);
            if (nn.norm() < 1e-12)
                throw SchemaError("facets[" + std::to_string(idx) + "]", "degenerate polygon");
            f.normal = normalized(nn);
            facets.push_back(f);
            ++idx;
        }
    }
    sc.scene = Scene(std::move(facets), std::move(materials));

    if (j.contains("tx"))
        for (const auto& tj : j.at("tx")) {
            TransmitterSpec t;
            t.id = ioutil::str(tj, "id", "TX");
            t.position = ioutil::point(tj, "position");
            t.ptx_dBm = ioutil::num(tj, "ptx_dBm", 0.0);
            t.antenna = parse_antenna(tj.contains("antenna") ? tj.at("antenna") : json{});
            sc.tx.push_back(t);
        }
    if (j.contains("rx"))
        for (const auto& rj : j.at("rx")) {
            ReceiverSpec r;
            r.id = ioutil::str(rj, "id");
            r.position = ioutil::point(rj, "position");
            r.antenna = parse_antenna(rj.contains("antenna") ? rj.at("antenna") : json{});
            sc.rx.push_back(r);
        }
    if (j.contains("config")) {
        const auto& cj = j.at("config");
        if (cj.contains("freq_GHz")) {
            sc.freqs_GHz.clear();
            if (cj.at("freq_GHz").is_array())
                for (const auto& fj : cj.at("freq_GHz")) sc.freqs_GHz.push_back(fj.get<double>());
            else
                sc.freqs_GHz.push_back(cj.at("freq_GHz").get<double>());
        }
        sc.trace = parse_trace_config(cj.contains("trace") ? cj.at("trace") : json{});
    }
    if (sc.tx.empty()) throw SchemaError("tx", "at least one transmitter required");
    return sc;
}

// ---- result serialization --------------------------------------------------

inline json azel_json(const AzEl& a) {
    return {{"azimuth_deg", a.azimuth_deg}, {"elevation_deg", a.elevation_deg}};
}

/// Channel result as JSON. Diffuse-scatter tiles are aggregated per facet,
/// signature and 5-degree angle bin to keep files compact; specular paths are
/// emitted one by one with their interaction points.
inline json channel_to_json(const ChannelResult& r) {
    json out;
    out["tx"] = r.tx_id;
    out["rx"] = r.rx_id;
    out["freq_GHz"] = r.freq_GHz;
    out["ptx_dBm"] = r.ptx_dBm;
    out["truncated_budget"] = r.truncated_budget;
    out["truncated_cutoff"] = r.truncated_cutoff;
    json paths = json::array();

    struct ScatterAgg {
        double power_lin = 0.0;
        double delay_weighted = 0.0;
        Vec3 aoa_dir{0, 0, 0}, aod_dir{0, 0, 0};
        int tiles = 0;
    };
    std::map<std::tuple<std::string, int, int, int>, ScatterAgg> agg;

    for (const auto& p : r.paths) {
        if (!p.coherent) {
            int facet = -1;
            for (const auto& i : p.interactions)
                if (i.kind == InteractionKind::Scattering) facet = i.facet_id;
            int ba = int(std::floor(p.aoa.azimuth_deg / 5.0));
            int bd = int(std::floor(p.aod.azimuth_deg / 5.0));
            auto& a = agg[{p.signature, facet, ba, bd}];
            double w = p.coupling.iso_power_gain();
            a.power_lin += w;
            a.delay_weighted += w * p.delay_s;
            a.aoa_dir += p.arrive_dir * w;
            a.aod_dir += p.depart_dir * w;
            a.tiles += 1;
            continue;
        }
        json pj;
        pj["signature"] = p.signature;
        pj["delay_ns"] = p.delay_s * 1e9;
        pj["power_dBm_iso"] = p.power_dBm_iso;
        pj["aod"] = azel_json(p.aod);
        pj["aoa"] = azel_json(p.aoa);
        json pts = json::array();
        json kinds = json::array();
        for (const auto& i : p.interactions) {
            pts.push_back({i.point.x, i.point.y, i.point.z});
            kinds.push_back(interaction_kind_name(i.kind));
        }
        pj["points"] = pts;
        pj["kinds"] = kinds;
        paths.push_back(pj);
    }
    for (const auto& [key, a] : agg) {
        if (a.power_lin <= 0.0) continue;
        json pj;
        pj["signature"] = std::get<0>(key);
        pj["facet"] = std::get<1>(key);
        pj["tiles"] = a.tiles;
        pj["delay_ns"] = a.delay_weighted / a.power_lin * 1e9;
        pj["power_dBm_iso"] = r.ptx_dBm + linear_to_db(a.power_lin);
        pj["aoa"] = azel_json(AzEl::from_direction(-normalized(a.aoa_dir)));
        pj["aod"] = azel_json(AzEl::from_direction(normalized(a.aod_dir)));
        paths.push_back(pj);
    }
    out["paths"] = paths;
    return out;
}

// ---- measurement CSV formats -------------------------------------------------

struct DirectionalSample {
    std::string rx_id;
    double azimuth_deg;
    double power_dBm;
};

struct NarrowbandSample {
    std::string rx_id;
    double x_m, y_m;
    double power_dBm;
};

namespace ioutil {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') { out.push_back(cur); cur.clear(); }
        else if (c != '\r') cur += c;
    }
    out.push_back(cur);
    return out;
}

}  // namespace ioutil

/// Directional scan format: `rx_id,azimuth_deg,power_dBm` with optional
/// header; the same schema cmd_scan writes.
inline std::vector<DirectionalSample> load_directional_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open CSV '" + path + "'");
    std::vector<DirectionalSample> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = ioutil::split_csv_line(line);
        if (f.size() != 3)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 3 fields");
        if (lineno == 1 && f[0] == "rx_id") continue;
        try {
            out.push_back({f[0], std::stod(f[1]), std::stod(f[2])});
        } catch (...) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad number");
        }
    }
    return out;
}

/// Narrowband survey format: `rx_id,x_m,y_m,power_dBm`.
inline std::vector<NarrowbandSample> load_narrowband_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open CSV '" + path + "'");
    std::vector<NarrowbandSample> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = ioutil::split_csv_line(line);
        if (f.size() != 4)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 4 fields");
        if (lineno == 1 && f[0] == "rx_id") continue;
        try {
            out.push_back({f[0], std::stod(f[1]), std::stod(f[2]), std::stod(f[3])});
        } catch (...) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad number");
        }
    }
    return out;
}

/// Slab sweep format for the material fitter: `freq_GHz,value_dB,kind` with
/// kind R or T.
inline std::vector<SlabSample> load_slab_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open CSV '" + path + "'");
    std::vector<SlabSample> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto f = ioutil::split_csv_line(line);
        if (f.size() != 3)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected 3 fields");
        if (lineno == 1 && f[0] == "freq_GHz") continue;
        if (f[2] != "R" && f[2] != "T")
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": kind must be R or T");
        try {
            out.push_back({std::stod(f[0]), std::stod(f[1]), f[2] == "R"});
        } catch (...) {
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad number");
        }
    }
    return out;
}

// ---- output helpers ----------------------------------------------------------

/// Atomic file write: temp file in the target directory, then rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

/// FNV-1a 64-bit content hash, hex-encoded.
inline std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "' for hashing");
    std::ostringstream ss;
    ss << in.rdbuf();
    return fnv1a_hex(ss.str());
}

/// Reproducibility manifest written next to every command's outputs.
struct RunManifest {
    std::string scenario_path;
    std::string command;
    std::string config_overrides;
    std::string output_dir;
    std::string tool_version = kToolVersion;
    std::string input_hash;

    json to_json() const {
        return {{"scenario", scenario_path}, {"command", command},
                {"config_overrides", config_overrides}, {"output_dir", output_dir},
                {"tool_version", tool_version}, {"input_hash", input_hash}};
    }
};

}  // namespace mmray
