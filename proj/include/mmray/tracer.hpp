#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "mmray/antenna.hpp"
#include "mmray/fresnel.hpp"
#include "mmray/geometry.hpp"
#include "mmray/propagation.hpp"
#include "mmray/scattering.hpp"
#include "mmray/scene.hpp"
#include "mmray/utd.hpp"

namespace mmray {

enum class TraceMode { Full, Simplified };

/// Interaction budget, mirroring the simulation settings the engine runs
/// with by default: at most 7 interactions per ray, 5 reflections, 2
/// diffractions, 2 transmissions, 1 scattering; mixed reflection+diffraction
/// paths carry at most 3 events total, scatter paths at most 1 reflection.
/// Simplified mode emulates a basic planning engine: LoS, transmission and
/// single-bounce reflection only.
struct TraceConfig {
    int max_interactions = 7;
    int max_reflections = 5;
    int max_diffractions = 2;
    int max_transmissions = 2;
    int max_scatterings = 1;
    int max_mixed_refl_diff_events = 3;
    int max_refl_combined_with_scatter = 1;
    double scatter_tile_size_m = 0.5;
    double min_path_power_dBm = -150.0;
    double ptx_dBm = 0.0;
    TraceMode mode = TraceMode::Full;

    TraceConfig effective() const {
        TraceConfig c = *this;
        if (mode == TraceMode::Simplified) {
            c.max_reflections = std::min(c.max_reflections, 1);
            c.max_diffractions = 0;
            c.max_scatterings = 0;
        }
        c.max_reflections = std::min(c.max_reflections, c.max_interactions);
        c.max_diffractions = std::min(c.max_diffractions, c.max_interactions);
        c.max_transmissions = std::min(c.max_transmissions, c.max_interactions);
        c.max_scatterings = std::min(c.max_scatterings, c.max_interactions);
        return c;
    }

    void validate() const {
        if (max_interactions < 0 || max_reflections < 0 || max_diffractions < 0 ||
            max_transmissions < 0 || max_scatterings < 0)
            throw std::invalid_argument("trace config: caps must be >= 0");
        if (!(scatter_tile_size_m > 0.0))
            throw std::invalid_argument("trace config: tile size must be > 0");
    }
};

enum class InteractionKind { Reflection, Transmission, Diffraction, Scattering };

inline const char* interaction_kind_name(InteractionKind k) {
    switch (k) {
        case InteractionKind::Reflection: return "Reflection";
        case InteractionKind::Transmission: return "Transmission";
        case InteractionKind::Diffraction: return "Diffraction";
        case InteractionKind::Scattering: return "Scattering";
    }
    return "?";
}

struct Interaction {
    InteractionKind kind = InteractionKind::Reflection;
    Point3 point;
    int facet_id = -1;  // facet for R/T/S
    int edge_id = -1;   // edge for D
    double theta_i_rad = 0.0;
};

/// 2x2 complex amplitude coupling from the TX (v,h) basis to the RX (v,h)
/// basis. Entry magnitudes squared are power ratios per polarization pair.
struct Coupling2 {
    cdouble vv{0, 0}, vh{0, 0}, hv{0, 0}, hh{0, 0};

    double frobenius2() const {
        return std::norm(vv) + std::norm(vh) + std::norm(hv) + std::norm(hh);
    }
    /// Power gain averaged over input polarizations, summed over outputs.
    double iso_power_gain() const { return 0.5 * frobenius2(); }

    Coupling2& operator+=(const Coupling2& o) {
        vv += o.vv; vh += o.vh; hv += o.hv; hh += o.hh;
        return *this;
    }
    Coupling2 operator*(cdouble s) const { return {vv * s, vh * s, hv * s, hh * s}; }
};

/// One multipath component. An empty interaction list is the direct (LoS)
/// path. Scatter components carry incoherent power (coherent == false).
struct RayPath {
    std::vector<Interaction> interactions;
    Coupling2 coupling;
    bool coherent = true;
    double length_m = 0.0;
    double delay_s = 0.0;
    Vec3 depart_dir{1, 0, 0};  // unit, TX -> first point
    Vec3 arrive_dir{1, 0, 0};  // unit, last point -> RX (propagation sense)
    AzEl aod, aoa;
    std::string signature;
    double power_dBm_iso = -300.0;

    int count(InteractionKind k) const {
        int n = 0;
        for (const auto& i : interactions)
            if (i.kind == k) ++n;
        return n;
    }
};

struct ChannelResult {
    std::string tx_id, rx_id;
    Point3 tx, rx;
    double freq_GHz = 0.0;
    double ptx_dBm = 0.0;
    std::vector<RayPath> paths;
    bool truncated_budget = false;  // candidates rejected by a cap
    bool truncated_cutoff = false;  // paths dropped below the power floor
};

/// Canonical mechanism class of an interaction multiset. Ordering inside the
/// chain never changes the class.
inline std::string mechanism_signature_counts(int n_refl, int n_diff, int n_trans,
                                              int n_scat) {
    if (n_scat > 0) {
        if (n_trans > 0) return "TS";
        if (n_refl > 0) return "RS";
        return "S";
    }
    if (n_diff > 0) {
        if (n_trans > 0) return "TD";
        if (n_refl > 0) return "RD";
        return "D" + std::to_string(n_diff);
    }
    if (n_trans > 0) {
        if (n_refl > 0) return "TR";
        return "T";
    }
    if (n_refl > 0) return "R" + std::to_string(n_refl);
    return "L";
}

inline std::string mechanism_signature(const RayPath& p) {
    return mechanism_signature_counts(p.count(InteractionKind::Reflection),
                                      p.count(InteractionKind::Diffraction),
                                      p.count(InteractionKind::Transmission),
                                      p.count(InteractionKind::Scattering));
}

namespace detail {

// Polarization transport: accumulates the 2x2 Jones map from the TX-side
// (v,h) departure basis into the running transverse basis (e1,e2) of the
// current propagation direction.
struct PolTransport {
    cdouble m11{1, 0}, m12{0, 0}, m21{0, 0}, m22{1, 0};
    Vec3 dir, e1, e2;

    static PolTransport start(const Vec3& d) {
        PolTransport t;
        t.dir = d;
        auto [ev, eh] = transverse_basis(d);
        t.e1 = ev;
        t.e2 = eh;
        return t;
    }

    void rotate_to(const Vec3& a1, const Vec3& a2) {
        double r11 = dot(a1, e1), r12 = dot(a1, e2);
        double r21 = dot(a2, e1), r22 = dot(a2, e2);
        cdouble n11 = r11 * m11 + r12 * m21;
        cdouble n12 = r11 * m12 + r12 * m22;
        cdouble n21 = r21 * m11 + r22 * m21;
        cdouble n22 = r21 * m12 + r22 * m22;
        m11 = n11; m12 = n12; m21 = n21; m22 = n22;
        e1 = a1; e2 = a2;
    }

    void scale_rows(cdouble c1, cdouble c2) {
        m11 *= c1; m12 *= c1;
        m21 *= c2; m22 *= c2;
    }

    void scale(cdouble s) { scale_rows(s, s); }

    // Specular event: decompose onto (perp, par), apply (c_te, c_tm), leave
    // in the outgoing basis of new_dir.
    void interface_event(const Vec3& n_eff, cdouble c_te, cdouble c_tm,
                         const Vec3& new_dir) {
        Vec3 cr = cross(dir, n_eff);
        Vec3 e_perp = cr.norm() > 1e-9 ? normalized(cr) : e2;
        Vec3 e_par_in = cross(e_perp, dir);
        rotate_to(e_perp, e_par_in);
        scale_rows(c_te, c_tm);
        dir = new_dir;
        e2 = cross(e_perp, new_dir);  // outgoing parallel basis
    }

    Coupling2 finish() {
        auto [ev, eh] = transverse_basis(dir);
        rotate_to(ev, eh);
        return {m11, m12, m21, m22};
    }

    double column_power_v() const { return std::norm(m11) + std::norm(m21); }
    double column_power_h() const { return std::norm(m12) + std::norm(m22); }
};

}  // namespace detail

/// Image-method multipath search. Pure given an immutable scene; one
/// instance per trace call.
class Tracer {
  public:
    Tracer(const Scene& scene, double freq_GHz, const TraceConfig& cfg)
        : scene_(scene), freq_(freq_GHz), cfg_(cfg.effective()) {
        cfg.validate();
        if (!(freq_GHz > 0.0)) throw std::invalid_argument("trace: frequency must be > 0");
        k_ = wavenumber(freq_);
        lambda_ = wavelength_m(freq_);
        for (int ei = 0; ei < int(scene_.edges.size()); ++ei)
            if (scene_.edges[ei].exterior_n() > 1.0 + 1e-9 &&
                scene_.edges[ei].length() > 10.0 * kGeomEps)
                diffractive_edges_.push_back(ei);
    }

    ChannelResult run(const Point3& tx, const Point3& rx) {
        if (distance(tx, rx) < kGeomEps)
            throw std::invalid_argument("trace: tx and rx coincide");
        check_off_facets(tx, "tx");
        check_off_facets(rx, "rx");

        ChannelResult res;
        res.tx = tx;
        res.rx = rx;
        res.freq_GHz = freq_;
        res.ptx_dBm = cfg_.ptx_dBm;
        tx_ = tx;
        rx_ = rx;
        result_ = &res;

        add_los();
        add_specular_chains();
        if (cfg_.max_diffractions > 0) add_diffraction_paths();
        if (cfg_.max_scatterings > 0) add_scatter_paths();

        dedupe_and_sort(res.paths);
        return res;
    }

  private:
    const Scene& scene_;
    double freq_;
    TraceConfig cfg_;
    double k_ = 0.0, lambda_ = 0.0;
    Point3 tx_, rx_;
    ChannelResult* result_ = nullptr;
    std::vector<int> diffractive_edges_;

    struct Crossing {
        int facet_id;
        Point3 point;
        double cos_theta;
    };

    void check_off_facets(const Point3& p, const char* what) const {
        for (int fi = 0; fi < int(scene_.facets.size()); ++fi) {
            const Facet& f = scene_.facets[fi];
            double d = dot(p - f.vertices[0], f.normal);
            if (std::abs(d) <= kGeomEps && point_in_polygon(p, f.vertices, f.normal, 0.0))
                throw std::invalid_argument(std::string(what) +
                                            " lies on facet " + std::to_string(fi));
        }
    }

    // Validates an unobstructed-or-transmitted segment. Opaque (perfect
    // conductor) hits fail; penetrable hits become transmissions charged
    // against the remaining budget.
    bool validate_segment(const Point3& a, const Point3& b, const std::set<int>& exclude,
                          int& trans_budget, std::vector<Crossing>& out) const {
        auto hits = scene_.intersect_segment(a, b, exclude);
        if (hits.empty()) return true;
        Vec3 d = normalized(b - a);
        for (const auto& h : hits) {
            const Material& m = scene_.material_of(h.facet_id);
            if (m.perfect_conductor) return false;
            if (trans_budget <= 0) {
                result_->truncated_budget = true;
                return false;
            }
            --trans_budget;
            double ct = std::abs(dot(d, scene_.facets[h.facet_id].normal));
            out.push_back({h.facet_id, h.point, std::clamp(ct, 0.0, 1.0)});
        }
        return true;
    }

    // ---- path composition -------------------------------------------------

    struct EventSpec {
        InteractionKind kind;
        int id;        // facet or edge id
        Point3 point;  // interaction point
    };

    // Builds the RayPath for a fully validated vertex chain tx -> points ->
    // rx. Transmission crossings are interleaved by position along the walk.
    std::optional<RayPath> compose(const std::vector<EventSpec>& events) {
        std::vector<Point3> verts;
        verts.push_back(tx_);
        for (const auto& e : events) verts.push_back(e.point);
        verts.push_back(rx_);

        std::vector<double> seg_len(verts.size() - 1);
        double total = 0.0;
        for (size_t i = 0; i + 1 < verts.size(); ++i) {
            seg_len[i] = distance(verts[i], verts[i + 1]);
            if (seg_len[i] < kGeomEps) return std::nullopt;
            total += seg_len[i];
        }

        // spreading bookkeeping across diffraction events
        std::vector<double> run_after(events.size(), 0.0);
        {
            double acc = 0.0;
            for (int i = int(events.size()) - 1; i >= 0; --i) {
                acc += seg_len[i + 1];
                run_after[i] = acc;
                if (events[i].kind == InteractionKind::Diffraction) acc = 0.0;
            }
        }

        RayPath path;
        path.depart_dir = normalized(verts[1] - verts[0]);
        auto transport = detail::PolTransport::start(path.depart_dir);

        double rho = seg_len[0];        // distance since current spread origin
        double first_leg = -1.0;        // distance to first diffraction (or rx)
        double amp_extra = 1.0;         // cascade spreading factors

        for (size_t i = 0; i < events.size(); ++i) {
            const EventSpec& ev = events[i];
            Vec3 in_dir = transport.dir;
            switch (ev.kind) {
                case InteractionKind::Transmission: {
                    const Facet& f = scene_.facets[ev.id];
                    const Material& m = scene_.material_of(ev.id);
                    Vec3 n_eff = dot(in_dir, f.normal) < 0.0 ? f.normal : -f.normal;
                    double ct = std::clamp(-dot(in_dir, n_eff), 0.0, 1.0);
                    double theta = std::acos(ct);
                    SlabResponse te = slab(theta, m.eps_r, m.thickness_m, freq_,
                                           Polarization::TE, m.perfect_conductor);
                    SlabResponse tm = slab(theta, m.eps_r, m.thickness_m, freq_,
                                           Polarization::TM, m.perfect_conductor);
                    transport.interface_event(n_eff, te.T, tm.T, in_dir);
                    path.interactions.push_back(
                        {ev.kind, ev.point, ev.id, -1, theta});
                    break;
                }
                case InteractionKind::Reflection: {
                    const Facet& f = scene_.facets[ev.id];
                    const Material& m = scene_.material_of(ev.id);
                    Vec3 n_eff = dot(in_dir, f.normal) < 0.0 ? f.normal : -f.normal;
                    double ct = std::clamp(-dot(in_dir, n_eff), 0.0, 1.0);
                    double theta = std::acos(ct);
                    Vec3 out_dir = normalized(in_dir - 2.0 * dot(in_dir, n_eff) * n_eff);
                    SlabResponse te = slab(theta, m.eps_r, m.thickness_m, freq_,
                                           Polarization::TE, m.perfect_conductor);
                    SlabResponse tm = slab(theta, m.eps_r, m.thickness_m, freq_,
                                           Polarization::TM, m.perfect_conductor);
                    transport.interface_event(n_eff, te.R, tm.R, out_dir);
                    path.interactions.push_back(
                        {ev.kind, ev.point, ev.id, -1, theta});
                    break;
                }
                case InteractionKind::Diffraction: {
                    const Edge& edge = scene_.edges[ev.id];
                    if (first_leg < 0.0) first_leg = rho;
                    double s_next = run_after[i];
                    Vec3 ehat = edge.tangent;
                    Vec3 out_dir = normalized(verts[i + 2] - verts[i + 1]);

                    WedgeGeometry g;
                    g.n = edge.exterior_n();
                    g.phi_inc = edge.azimuth_of(verts[i]);
                    g.phi_obs = edge.azimuth_of(verts[i + 2]);
                    if (g.phi_inc > g.n * kPi + 1e-6 || g.phi_obs > g.n * kPi + 1e-6)
                        return std::nullopt;  // inside the wedge material
                    g.phi_inc = std::min(g.phi_inc, g.n * kPi);
                    g.phi_obs = std::min(g.phi_obs, g.n * kPi);
                    g.beta0 = std::acos(std::clamp(dot(in_dir, ehat), -1.0, 1.0));
                    if (std::sin(g.beta0) < 1e-6) return std::nullopt;
                    g.s_i = rho;
                    g.s_d = s_next;

                    WedgeFaces faces;
                    const Material& mo = scene_.material_of(edge.o_face_id);
                    const Material& mn = scene_.material_of(edge.n_face_id);
                    faces.eps_o = mo.eps_r; faces.pec_o = mo.perfect_conductor;
                    faces.eps_n = mn.eps_r; faces.pec_n = mn.perfect_conductor;
                    UtdCoefficients D = utd_diffraction(g, freq_, faces);

                    // edge-fixed bases at incidence and diffraction
                    Vec3 rho_i = (verts[i] - verts[i + 1]);
                    rho_i = rho_i - dot(rho_i, ehat) * ehat;
                    Vec3 rho_d = (verts[i + 2] - verts[i + 1]);
                    rho_d = rho_d - dot(rho_d, ehat) * ehat;
                    if (rho_i.norm() < 1e-9 || rho_d.norm() < 1e-9) return std::nullopt;
                    Vec3 phi_i = normalized(cross(ehat, normalized(rho_i)));
                    Vec3 phi_d = normalized(cross(ehat, normalized(rho_d)));
                    Vec3 beta_i = cross(phi_i, in_dir);
                    Vec3 beta_d = cross(phi_d, out_dir);

                    transport.rotate_to(beta_i, phi_i);
                    transport.scale_rows(D.d_soft, D.d_hard);
                    transport.dir = out_dir;
                    transport.e1 = beta_d;
                    transport.e2 = phi_d;

                    amp_extra *= std::sqrt(rho / (s_next * (rho + s_next)));
                    rho = 0.0;
                    path.interactions.push_back(
                        {ev.kind, ev.point, -1, ev.id, g.beta0});
                    break;
                }
                case InteractionKind::Scattering:
                    return std::nullopt;  // scatter paths composed separately
            }
            rho += seg_len[i + 1];
        }
        if (first_leg < 0.0) first_leg = total;

        transport.scale(std::polar(lambda_ / (4.0 * kPi * first_leg) * amp_extra,
                                   -k_ * total));
        path.coupling = transport.finish();
        path.coherent = true;
        path.length_m = total;
        path.delay_s = total / kSpeedOfLight;
        path.arrive_dir = normalized(verts.back() - verts[verts.size() - 2]);
        path.aod = AzEl::from_direction(path.depart_dir);
        path.aoa = AzEl::from_direction(-path.arrive_dir);  // seen from the RX
        path.signature = mechanism_signature(path);
        path.power_dBm_iso = cfg_.ptx_dBm + linear_to_db(
            std::max(path.coupling.iso_power_gain(), 1e-300));
        return path;
    }

    void emit(std::optional<RayPath> p) {
        if (!p) return;
        if (p->power_dBm_iso < cfg_.min_path_power_dBm) {
            result_->truncated_cutoff = true;
            return;
        }
        result_->paths.push_back(std::move(*p));
    }

    // Weave transmission crossings of each leg into the event chain, then
    // compose. `core` holds the non-transmission events in order;
    // `leg_crossings[i]` the crossings of the leg preceding core event i.
    void emit_with_transmissions(const std::vector<EventSpec>& core,
                                 const std::vector<std::vector<Crossing>>& leg_crossings) {
        std::vector<EventSpec> events;
        int n_inter = 0;
        for (size_t i = 0; i <= core.size(); ++i) {
            for (const auto& c : leg_crossings[i]) {
                events.push_back({InteractionKind::Transmission, c.facet_id, c.point});
                ++n_inter;
            }
            if (i < core.size()) {
                events.push_back(core[i]);
                ++n_inter;
            }
        }
        if (n_inter > cfg_.max_interactions) {
            result_->truncated_budget = true;
            return;
        }
        emit(compose(events));
    }

    // ---- LoS / transmission -----------------------------------------------

    void add_los() {
        std::vector<Crossing> cross;
        int budget = cfg_.max_transmissions;
        if (!validate_segment(tx_, rx_, {}, budget, cross)) return;
        emit_with_transmissions({}, {cross});
    }

    // ---- specular chains ----------------------------------------------------

    void add_specular_chains() {
        if (cfg_.max_reflections <= 0 || scene_.facets.empty()) return;
        std::vector<int> chain;
        std::vector<Point3> images;
        images.push_back(tx_);
        dfs_reflect(chain, images);
    }

    void dfs_reflect(std::vector<int>& chain, std::vector<Point3>& images) {
        for (int fi = 0; fi < int(scene_.facets.size()); ++fi) {
            if (!chain.empty() && chain.back() == fi) continue;
            const Facet& f = scene_.facets[fi];
            double side = dot(images.back() - f.vertices[0], f.normal);
            if (std::abs(side) < kGeomEps) continue;       // source on plane
            if (!f.two_sided && side < 0.0) continue;       // back side of one-sided facet
            chain.push_back(fi);
            images.push_back(mirror_point(images.back(), f));
            validate_chain(chain, images);
            if (int(chain.size()) < cfg_.max_reflections) dfs_reflect(chain, images);
            chain.pop_back();
            images.pop_back();
        }
    }

    void validate_chain(const std::vector<int>& chain, const std::vector<Point3>& images) {
        const int k = int(chain.size());
        std::vector<Point3> pts(k);
        Point3 target = rx_;
        for (int i = k - 1; i >= 0; --i) {
            const Facet& f = scene_.facets[chain[i]];
            double t = segment_plane_param(images[i + 1], target, f.vertices[0], f.normal);
            if (!(t == t) || t <= 0.0 || t >= 1.0) return;
            Point3 p = images[i + 1] + t * (target - images[i + 1]);
            if (!point_in_polygon(p, f.vertices, f.normal, kGeomEps)) return;
            pts[i] = p;
            target = p;
        }
        // occlusion / transmission validation along the real path
        int budget = cfg_.max_transmissions;
        std::vector<std::vector<Crossing>> legs(k + 1);
        std::vector<EventSpec> core(k);
        Point3 prev = tx_;
        for (int i = 0; i <= k; ++i) {
            Point3 next = (i == k) ? rx_ : pts[i];
            std::set<int> excl;
            if (i > 0) excl.insert(chain[i - 1]);
            if (i < k) excl.insert(chain[i]);
            if (!validate_segment(prev, next, excl, budget, legs[i])) return;
            if (i < k) core[i] = {InteractionKind::Reflection, chain[i], pts[i]};
            prev = next;
        }
        emit_with_transmissions(core, legs);
    }

    // ---- diffraction / mixed reflection-diffraction -------------------------

    struct Token {
        bool is_edge;
        int id;
    };

    void add_diffraction_paths() {
        if (diffractive_edges_.empty()) return;
        int max_events = cfg_.max_interactions;
        std::vector<Token> seq;
        enumerate_mixed(seq, 0, 0, max_events);
    }

    void enumerate_mixed(std::vector<Token>& seq, int n_refl, int n_diff, int max_events) {
        if (!seq.empty() && n_diff > 0) solve_mixed(seq);
        if (int(seq.size()) >= max_events) return;

        // extend with a diffraction
        if (n_diff < cfg_.max_diffractions &&
            (n_refl == 0 || n_refl + n_diff + 1 <= cfg_.max_mixed_refl_diff_events)) {
            for (int ei : diffractive_edges_) {
                if (!seq.empty() && seq.back().is_edge && seq.back().id == ei) continue;
                seq.push_back({true, ei});
                enumerate_mixed(seq, n_refl, n_diff + 1, max_events);
                seq.pop_back();
            }
        }
        // extend with a reflection; reflections only matter in mixed paths here
        if (n_refl < cfg_.max_reflections &&
            n_refl + 1 + std::max(n_diff, 1) <= cfg_.max_mixed_refl_diff_events) {
            for (int fi = 0; fi < int(scene_.facets.size()); ++fi) {
                if (!seq.empty() && !seq.back().is_edge && seq.back().id == fi) continue;
                seq.push_back({false, fi});
                enumerate_mixed(seq, n_refl + 1, n_diff, max_events);
                seq.pop_back();
            }
        }
    }

    // Fermat solve in unfolded space: mirrors straighten reflections, and the
    // path length is convex in the edge parameters.
    void solve_mixed(const std::vector<Token>& seq) {
        std::vector<int> edge_pos;
        for (int i = 0; i < int(seq.size()); ++i)
            if (seq[i].is_edge) edge_pos.push_back(i);
        if (edge_pos.empty() || int(edge_pos.size()) > 2) return;

        // virtual source: TX mirrored through the reflections before edge 1
        Point3 src = tx_;
        for (int i = 0; i < edge_pos[0]; ++i)
            src = mirror_point(src, scene_.facets[seq[i].id]);

        const Edge& E1 = scene_.edges[seq[edge_pos[0]].id];
        Point3 e1a = E1.a, e1b = E1.b;

        if (edge_pos.size() == 1) {
            // virtual receiver: RX mirrored through trailing reflections, last first
            Point3 dst = rx_;
            for (int i = int(seq.size()) - 1; i > edge_pos[0]; --i)
                dst = mirror_point(dst, scene_.facets[seq[i].id]);
            double t = ternary_min_1d([&](double u) {
                Point3 q = e1a + u * (e1b - e1a);
                return distance(src, q) + distance(q, dst);
            });
            if (t < 1e-4 || t > 1.0 - 1e-4) return;  // stationary point off the edge
            Point3 q1 = e1a + t * (e1b - e1a);
            materialize_mixed(seq, {q1});
            return;
        }

        // two edges: unfold edge 2 and everything after through the middle
        // mirrors; innermost mirror is the facet closest to edge 2
        const Edge& E2 = scene_.edges[seq[edge_pos[1]].id];
        Point3 e2a = E2.a, e2b = E2.b;
        Point3 dst = rx_;
        for (int i = int(seq.size()) - 1; i > edge_pos[1]; --i)
            dst = mirror_point(dst, scene_.facets[seq[i].id]);
        for (int i = edge_pos[1] - 1; i > edge_pos[0]; --i) {
            const Facet& f = scene_.facets[seq[i].id];
            e2a = mirror_point(e2a, f);
            e2b = mirror_point(e2b, f);
            dst = mirror_point(dst, f);
        }

        double t1 = 0.5, t2 = 0.5;
        for (int round = 0; round < 60; ++round) {
            double p2 = t2;
            Point3 q2 = e2a + t2 * (e2b - e2a);
            t1 = ternary_min_1d([&](double u) {
                Point3 q1 = e1a + u * (e1b - e1a);
                return distance(src, q1) + distance(q1, q2);
            });
            Point3 q1 = e1a + t1 * (e1b - e1a);
            t2 = ternary_min_1d([&](double u) {
                Point3 q = e2a + u * (e2b - e2a);
                return distance(q1, q) + distance(q, dst);
            });
            if (std::abs(t2 - p2) < 1e-12) break;
        }
        if (t1 < 1e-4 || t1 > 1.0 - 1e-4 || t2 < 1e-4 || t2 > 1.0 - 1e-4) return;
        Point3 q1 = e1a + t1 * (e1b - e1a);
        // fold the second diffraction point back into real space (mirrors are
        // involutions; undo them outermost-first)
        Point3 q2 = e2a + t2 * (e2b - e2a);
        for (int i = edge_pos[0] + 1; i < edge_pos[1]; ++i)
            q2 = mirror_point(q2, scene_.facets[seq[i].id]);
        materialize_mixed(seq, {q1, q2});
    }

    template <typename F>
    static double ternary_min_1d(F f) {
        double lo = 0.0, hi = 1.0;
        for (int i = 0; i < 80; ++i) {
            double m1 = lo + (hi - lo) / 3.0;
            double m2 = hi - (hi - lo) / 3.0;
            if (f(m1) < f(m2)) hi = m2; else lo = m1;
        }
        return (lo + hi) / 2.0;
    }

    // With the diffraction points fixed, the reflection groups reduce to
    // ordinary image-chain backtraces between consecutive anchors.
    void materialize_mixed(const std::vector<Token>& seq, const std::vector<Point3>& qpts) {
        std::vector<Point3> anchors;  // tx, diffraction points, rx
        anchors.push_back(tx_);
        for (const auto& q : qpts) anchors.push_back(q);
        anchors.push_back(rx_);

        std::vector<std::vector<int>> refl_groups;
        std::vector<int> edge_ids;
        {
            std::vector<int> group;
            for (const auto& tok : seq) {
                if (tok.is_edge) {
                    refl_groups.push_back(group);
                    group.clear();
                    edge_ids.push_back(tok.id);
                } else {
                    group.push_back(tok.id);
                }
            }
            refl_groups.push_back(group);
        }

        std::vector<EventSpec> events_core;
        for (size_t g = 0; g < refl_groups.size(); ++g) {
            auto pts = backtrace_group(refl_groups[g], anchors[g], anchors[g + 1]);
            if (!pts) return;
            for (size_t i = 0; i < pts->size(); ++i)
                events_core.push_back(
                    {InteractionKind::Reflection, refl_groups[g][i], (*pts)[i]});
            if (g < edge_ids.size())
                events_core.push_back({InteractionKind::Diffraction, edge_ids[g], qpts[g]});
        }

        // occlusion validation over the full ordered chain
        int budget = cfg_.max_transmissions;
        std::vector<std::vector<Crossing>> legs(events_core.size() + 1);
        Point3 prev = tx_;
        for (size_t i = 0; i <= events_core.size(); ++i) {
            Point3 next = (i == events_core.size()) ? rx_ : events_core[i].point;
            std::set<int> excl;
            auto shield = [&](const EventSpec& e) {
                if (e.kind == InteractionKind::Reflection) excl.insert(e.id);
                if (e.kind == InteractionKind::Diffraction)
                    for (int f : scene_.edges[e.id].facet_ids) excl.insert(f);
            };
            if (i > 0) shield(events_core[i - 1]);
            if (i < events_core.size()) shield(events_core[i]);
            if (distance(prev, next) < kGeomEps) return;
            if (!validate_segment(prev, next, excl, budget, legs[i])) return;
            prev = next;
        }
        emit_with_transmissions(events_core, legs);
    }

    std::optional<std::vector<Point3>> backtrace_group(const std::vector<int>& facets,
                                                       const Point3& from, const Point3& to) {
        std::vector<Point3> images;
        images.push_back(from);
        for (int fi : facets) {
            const Facet& f = scene_.facets[fi];
            double side = dot(images.back() - f.vertices[0], f.normal);
            if (std::abs(side) < kGeomEps) return std::nullopt;
            if (!f.two_sided && side < 0.0) return std::nullopt;
            images.push_back(mirror_point(images.back(), f));
        }
        const int k = int(facets.size());
        std::vector<Point3> pts(k);
        Point3 target = to;
        for (int i = k - 1; i >= 0; --i) {
            const Facet& f = scene_.facets[facets[i]];
            double t = segment_plane_param(images[i + 1], target, f.vertices[0], f.normal);
            if (!(t == t) || t <= 0.0 || t >= 1.0) return std::nullopt;
            Point3 p = images[i + 1] + t * (target - images[i + 1]);
            if (!point_in_polygon(p, f.vertices, f.normal, kGeomEps)) return std::nullopt;
            pts[i] = p;
            target = p;
        }
        return pts;
    }

    // ---- diffuse scattering --------------------------------------------------

    struct Tile {
        Point3 center;
        double area;
    };

    void add_scatter_paths() {
        for (int fi = 0; fi < int(scene_.facets.size()); ++fi) {
            const Material& m = scene_.material_of(fi);
            if (m.scattering_S <= 0.0) continue;
            auto tiles = tile_facet(scene_.facets[fi], cfg_.scatter_tile_size_m);
            for (const auto& tile : tiles) {
                scatter_tile(fi, tile, {}, {});
                if (cfg_.max_refl_combined_with_scatter > 0 &&
                    cfg_.max_reflections > 0) {
                    for (int g = 0; g < int(scene_.facets.size()); ++g) {
                        if (g == fi) continue;
                        scatter_tile(fi, tile, {g}, {});   // reflection before the tile
                        scatter_tile(fi, tile, {}, {g});   // reflection after the tile
                    }
                }
            }
        }
    }

    // One ER contribution: tx -> [pre refl] -> tile -> [post refl] -> rx.
    // Coherent polarization transport up to the tile, power bookkeeping
    // after it; the whole component enters the result incoherently.
    void scatter_tile(int facet_id, const Tile& tile, const std::vector<int>& pre,
                      const std::vector<int>& post) {
        const Facet& f = scene_.facets[facet_id];
        const Material& mat = scene_.material_of(facet_id);

        auto pre_pts = backtrace_group(pre, tx_, tile.center);
        if (!pre_pts) return;
        auto post_pts = backtrace_group(post, tile.center, rx_);
        if (!post_pts) return;

        const size_t tile_idx = 1 + pre.size();  // vertex index of the tile
        std::vector<Point3> verts;
        std::vector<EventSpec> core;
        verts.push_back(tx_);
        for (size_t i = 0; i < pre.size(); ++i) {
            verts.push_back((*pre_pts)[i]);
            core.push_back({InteractionKind::Reflection, pre[i], (*pre_pts)[i]});
        }
        verts.push_back(tile.center);
        core.push_back({InteractionKind::Scattering, facet_id, tile.center});
        for (size_t i = 0; i < post.size(); ++i) {
            verts.push_back((*post_pts)[i]);
            core.push_back({InteractionKind::Reflection, post[i], (*post_pts)[i]});
        }
        verts.push_back(rx_);

        Vec3 in_dir = normalized(verts[tile_idx] - verts[tile_idx - 1]);
        Vec3 out_dir = normalized(verts[tile_idx + 1] - verts[tile_idx]);
        if (!f.two_sided && dot(in_dir, f.normal) >= 0.0) return;  // back side
        Vec3 n_eff = dot(in_dir, f.normal) < 0.0 ? f.normal : -f.normal;
        double cos_i = -dot(in_dir, n_eff);
        double cos_s = dot(out_dir, n_eff);
        if (cos_i <= 1e-6 || cos_s <= 1e-6) return;  // tile unlit or rx behind

        int budget = cfg_.max_transmissions;
        std::vector<std::vector<Crossing>> legs(core.size() + 1);
        int n_trans = 0;
        for (size_t i = 0; i <= core.size(); ++i) {
            Point3 a = verts[i], b = verts[i + 1];
            if (distance(a, b) < kGeomEps) return;
            std::set<int> excl;
            if (i > 0) excl.insert(core[i - 1].id);
            if (i < core.size()) excl.insert(core[i].id);
            if (!validate_segment(a, b, excl, budget, legs[i])) return;
            n_trans += int(legs[i].size());
        }
        if (int(core.size()) + n_trans > cfg_.max_interactions) {
            result_->truncated_budget = true;
            return;
        }

        double r_in = 0.0, r_out = 0.0;
        for (size_t i = 0; i < tile_idx; ++i) r_in += distance(verts[i], verts[i + 1]);
        for (size_t i = tile_idx; i + 1 < verts.size(); ++i)
            r_out += distance(verts[i], verts[i + 1]);

        auto coeffs = [&](int fid, const Vec3& d, bool reflect) {
            const Facet& ff = scene_.facets[fid];
            const Material& mm = scene_.material_of(fid);
            Vec3 nn = dot(d, ff.normal) < 0.0 ? ff.normal : -ff.normal;
            double th = std::acos(std::clamp(-dot(d, nn), 0.0, 1.0));
            SlabResponse te = slab(th, mm.eps_r, mm.thickness_m, freq_, Polarization::TE,
                                   mm.perfect_conductor);
            SlabResponse tm = slab(th, mm.eps_r, mm.thickness_m, freq_, Polarization::TM,
                                   mm.perfect_conductor);
            Vec3 nd = reflect ? normalized(d - 2.0 * dot(d, nn) * nn) : d;
            return std::make_tuple(nn, reflect ? te.R : te.T, reflect ? tm.R : tm.T, nd, th);
        };

        auto transport = detail::PolTransport::start(normalized(verts[1] - verts[0]));
        double post_pow = 1.0;
        bool upstream = true;
        std::vector<Interaction> inters;
        for (size_t i = 0; i <= core.size(); ++i) {
            Vec3 dleg = normalized(verts[i + 1] - verts[i]);
            for (const auto& c : legs[i]) {
                auto [nn, cte, ctm, nd, th] = coeffs(c.facet_id, dleg, false);
                (void)nd;
                if (upstream)
                    transport.interface_event(nn, cte, ctm, dleg);
                else
                    post_pow *= 0.5 * (std::norm(cte) + std::norm(ctm));
                inters.push_back({InteractionKind::Transmission, c.point, c.facet_id, -1, th});
            }
            if (i == core.size()) break;
            const EventSpec& ev = core[i];
            if (ev.kind == InteractionKind::Scattering) {
                upstream = false;
                inters.push_back({InteractionKind::Scattering, ev.point, facet_id, -1,
                                  std::acos(std::clamp(cos_i, 0.0, 1.0))});
            } else {
                auto [nn, cte, ctm, nd, th] = coeffs(ev.id, dleg, true);
                if (upstream)
                    transport.interface_event(nn, cte, ctm, nd);
                else
                    post_pow *= 0.5 * (std::norm(cte) + std::norm(ctm));
                inters.push_back({InteractionKind::Reflection, ev.point, ev.id, -1, th});
            }
        }

        double amp_in = lambda_ / (4.0 * kPi * r_in);
        double g_v = transport.column_power_v() * amp_in * amp_in;
        double g_h = transport.column_power_h() * amp_in * amp_in;
        double er = er_scatter_factor(std::acos(std::clamp(cos_i, 0.0, 1.0)),
                                      std::acos(std::clamp(cos_s, 0.0, 1.0)), tile.area,
                                      r_out, mat.scattering_S, mat.er_variant,
                                      mat.scattering_alpha,
                                      scatter_azimuth(n_eff, in_dir, out_dir));
        if (er <= 0.0) return;
        double p_v = g_v * er * post_pow;  // power gain per tx polarization
        double p_h = g_h * er * post_pow;
        if (p_v + p_h <= 0.0) return;

        RayPath path;
        path.coherent = false;
        path.interactions = std::move(inters);
        path.length_m = r_in + r_out;
        path.delay_s = path.length_m / kSpeedOfLight;
        path.depart_dir = normalized(verts[1] - verts[0]);
        path.arrive_dir = normalized(verts.back() - verts[verts.size() - 2]);
        path.aod = AzEl::from_direction(path.depart_dir);
        path.aoa = AzEl::from_direction(-path.arrive_dir);
        path.coupling.vv = std::sqrt(p_v);
        path.coupling.hh = std::sqrt(p_h);
        path.signature = mechanism_signature(path);
        path.power_dBm_iso =
            cfg_.ptx_dBm + linear_to_db(std::max(path.coupling.iso_power_gain(), 1e-300));
        emit(path);
    }

    static double scatter_azimuth(const Vec3& n, const Vec3& in_dir, const Vec3& out_dir) {
        // azimuth of the scatter direction around the normal, measured from
        // the incidence plane (used by the directive lobe only)
        Vec3 in_t = in_dir - dot(in_dir, n) * n;
        Vec3 out_t = out_dir - dot(out_dir, n) * n;
        if (in_t.norm() < 1e-12 || out_t.norm() < 1e-12) return 0.0;
        Vec3 x = normalized(in_t);
        Vec3 y = cross(n, x);
        return std::atan2(dot(out_t, y), dot(out_t, x));
    }

    std::vector<Tile> tile_facet(const Facet& f, double tile_size) const {
        // exact cell/polygon clipping in the facet plane
        Vec3 n = f.normal;
        Vec3 u = normalized(f.vertices[1] - f.vertices[0]);
        Vec3 v = cross(n, u);
        Point3 o = f.vertices[0];
        std::vector<std::pair<double, double>> poly;
        double ulo = 1e300, uhi = -1e300, vlo = 1e300, vhi = -1e300;
        for (const auto& p : f.vertices) {
            double pu = dot(p - o, u), pv = dot(p - o, v);
            poly.push_back({pu, pv});
            ulo = std::min(ulo, pu); uhi = std::max(uhi, pu);
            vlo = std::min(vlo, pv); vhi = std::max(vhi, pv);
        }
        std::vector<Tile> tiles;
        int nu = std::max(1, int(std::ceil((uhi - ulo) / tile_size)));
        int nv = std::max(1, int(std::ceil((vhi - vlo) / tile_size)));
        for (int iu = 0; iu < nu; ++iu) {
            for (int iv = 0; iv < nv; ++iv) {
                double a0 = ulo + iu * tile_size, a1 = std::min(a0 + tile_size, uhi);
                double b0 = vlo + iv * tile_size, b1 = std::min(b0 + tile_size, vhi);
                auto clipped = clip_poly_rect(poly, a0, a1, b0, b1);
                double area = shoelace(clipped);
                if (area < 1e-6) continue;
                auto [cu, cv] = poly_centroid(clipped, area);
                tiles.push_back({o + cu * u + cv * v, area});
            }
        }
        return tiles;
    }

    static std::vector<std::pair<double, double>> clip_poly_rect(
        std::vector<std::pair<double, double>> p, double x0, double x1, double y0,
        double y1) {
        auto clip = [](const std::vector<std::pair<double, double>>& in,
                       auto inside, auto intersect) {
            std::vector<std::pair<double, double>> out;
            size_t m = in.size();
            for (size_t i = 0; i < m; ++i) {
                auto a = in[i], b = in[(i + 1) % m];
                bool ia = inside(a), ib = inside(b);
                if (ia) out.push_back(a);
                if (ia != ib) out.push_back(intersect(a, b));
            }
            return out;
        };
        using Pt = std::pair<double, double>;
        auto lerp = [](const Pt& a, const Pt& b, double t) {
            return Pt{a.first + t * (b.first - a.first), a.second + t * (b.second - a.second)};
        };
        p = clip(p, [&](const Pt& q) { return q.first >= x0; },
                 [&](const Pt& a, const Pt& b) {
                     return lerp(a, b, (x0 - a.first) / (b.first - a.first));
                 });
        if (p.empty()) return p;
        p = clip(p, [&](const Pt& q) { return q.first <= x1; },
                 [&](const Pt& a, const Pt& b) {
                     return lerp(a, b, (x1 - a.first) / (b.first - a.first));
                 });
        if (p.empty()) return p;
        p = clip(p, [&](const Pt& q) { return q.second >= y0; },
                 [&](const Pt& a, const Pt& b) {
                     return lerp(a, b, (y0 - a.second) / (b.second - a.second));
                 });
        if (p.empty()) return p;
        p = clip(p, [&](const Pt& q) { return q.second <= y1; },
                 [&](const Pt& a, const Pt& b) {
                     return lerp(a, b, (y1 - a.second) / (b.second - a.second));
                 });
        return p;
    }

    static double shoelace(const std::vector<std::pair<double, double>>& p) {
        double s = 0.0;
        size_t m = p.size();
        if (m < 3) return 0.0;
        for (size_t i = 0; i < m; ++i) {
            auto [x1, y1] = p[i];
            auto [x2, y2] = p[(i + 1) % m];
            s += x1 * y2 - x2 * y1;
        }
        return std::abs(s) / 2.0;
    }

    static std::pair<double, double> poly_centroid(
        const std::vector<std::pair<double, double>>& p, double area) {
        double cx = 0.0, cy = 0.0, s = 0.0;
        size_t m = p.size();
        for (size_t i = 0; i < m; ++i) {
            auto [x1, y1] = p[i];
            auto [x2, y2] = p[(i + 1) % m];
            double w = x1 * y2 - x2 * y1;
            s += w;
            cx += (x1 + x2) * w;
            cy += (y1 + y2) * w;
        }
        if (std::abs(s) < 1e-18) return p.empty() ? std::pair{0.0, 0.0} : p[0];
        (void)area;
        return {cx / (3.0 * s), cy / (3.0 * s)};
    }

    // ---- ordering / dedupe ---------------------------------------------------

    static void dedupe_and_sort(std::vector<RayPath>& paths) {
        auto key = [](const RayPath& p) {
            std::vector<std::int64_t> k;
            for (const auto& i : p.interactions) {
                k.push_back(int(i.kind));
                k.push_back(i.facet_id);
                k.push_back(i.edge_id);
                k.push_back(std::llround(i.point.x * 1e6));
                k.push_back(std::llround(i.point.y * 1e6));
                k.push_back(std::llround(i.point.z * 1e6));
            }
            return k;
        };
        std::sort(paths.begin(), paths.end(), [&](const RayPath& a, const RayPath& b) {
            if (a.signature != b.signature) return a.signature < b.signature;
            if (a.delay_s != b.delay_s) return a.delay_s < b.delay_s;
            return key(a) < key(b);
        });
        paths.erase(std::unique(paths.begin(), paths.end(),
                                [&](const RayPath& a, const RayPath& b) {
                                    return key(a) == key(b);
                                }),
                    paths.end());
    }
};

/// Find every multipath component between tx and rx subject to the budget.
inline ChannelResult trace(const Scene& scene, const Point3& tx, const Point3& rx,
                           double freq_GHz, const TraceConfig& cfg = {}) {
    Tracer t(scene, freq_GHz, cfg);
    return t.run(tx, rx);
}

struct SweepLink {
    std::string tx_id, rx_id;
    Point3 tx, rx;
    double freq_GHz;
};

struct SweepError {
    std::size_t link_index;
    std::string message;
};

/// Element-wise trace over links; results merged in input order regardless
/// of the worker count (env MMRAY_WORKERS or hardware concurrency).
inline std::vector<ChannelResult> sweep(const Scene& scene,
                                        const std::vector<SweepLink>& links,
                                        const TraceConfig& cfg,
                                        std::vector<SweepError>* errors = nullptr,
                                        int workers = 0) {
    if (workers <= 0) {
        if (const char* env = std::getenv("MMRAY_WORKERS")) workers = std::atoi(env);
        if (workers <= 0) workers = int(std::thread::hardware_concurrency());
        if (workers <= 0) workers = 1;
    }
    std::vector<ChannelResult> out(links.size());
    std::vector<std::pair<std::size_t, std::string>> errs;
    std::mutex err_mu;
    std::atomic<std::size_t> next{0};
    auto work = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= links.size()) return;
            try {
                out[i] = trace(scene, links[i].tx, links[i].rx, links[i].freq_GHz, cfg);
                out[i].tx_id = links[i].tx_id;
                out[i].rx_id = links[i].rx_id;
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lk(err_mu);
                errs.push_back({i, e.what()});
            }
        }
    };
    if (workers == 1 || links.size() <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < std::min<int>(workers, int(links.size())); ++w)
            pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (errors) {
        std::sort(errs.begin(), errs.end());
        for (auto& [i, msg] : errs) errors->push_back({i, msg});
    }
    return out;
}

}  // namespace mmray
