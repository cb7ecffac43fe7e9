#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "mmray/geometry.hpp"
#include "mmray/material.hpp"

namespace mmray {

/// Planar polygonal surface. Vertices are counterclockwise when viewed from
/// the normal side; the normal is recomputed from the winding at build time.
struct Facet {
    std::vector<Point3> vertices;
    Vec3 normal{0.0, 0.0, 1.0};
    int material_id = 0;
    bool two_sided = false;
    std::string tag;  // wall / floor / ceiling / column / window / ...

    Point3 centroid() const {
        Point3 c{0, 0, 0};
        for (const auto& v : vertices) c += v;
        return c / double(vertices.size());
    }
    Aabb bounds() const {
        Aabb b;
        for (const auto& v : vertices) b.expand(v);
        return b;
    }
    double area() const { return 0.5 * newell_normal(vertices).norm(); }
};

/// Straight diffraction edge. Wedge edges join two non-coplanar facets;
/// free edges bound a single facet (knife edge). interior_angle_rad is the
/// material wedge angle (0 for free edges); the exterior region spans
/// n * pi with n = 2 - interior/pi.
struct Edge {
    Point3 a, b;
    std::vector<int> facet_ids;   // 1 or 2
    double interior_angle_rad = 0.0;
    // Edge-fixed frame: tangent oriented so that azimuths from the o-face
    // sweep the exterior region in [0, n*pi].
    Vec3 tangent{0, 0, 1};
    Vec3 o_face_dir{1, 0, 0};   // into the o-face, perpendicular to tangent
    int o_face_id = -1;
    int n_face_id = -1;          // == o_face_id for free edges

    double exterior_n() const { return 2.0 - interior_angle_rad / kPi; }
    double length() const { return distance(a, b); }

    /// Azimuth of a point around the edge, measured from the o-face.
    /// Returns value in [0, 2*pi); valid exterior positions are <= n*pi.
    double azimuth_of(const Point3& p) const {
        Vec3 rel = p - a;
        Vec3 rho = rel - dot(rel, tangent) * tangent;
        Vec3 m = cross(tangent, o_face_dir);
        double phi = std::atan2(dot(rho, m), dot(rho, o_face_dir));
        if (phi < 0.0) phi += 2.0 * kPi;
        return phi;
    }
};

struct SegmentHit {
    int facet_id = -1;
    Point3 point;
    double t = 0.0;  // parameter along the segment, in (0,1)
};

struct SceneWarning {
    std::string message;
};

namespace detail {

inline std::tuple<std::int64_t, std::int64_t, std::int64_t> quantize(const Point3& p,
                                                                     double eps) {
    return {static_cast<std::int64_t>(std::llround(p.x / eps)),
            static_cast<std::int64_t>(std::llround(p.y / eps)),
            static_cast<std::int64_t>(std::llround(p.z / eps))};
}

using VertexKey = std::tuple<std::int64_t, std::int64_t, std::int64_t>;

}  // namespace detail

/// Immutable after build; safe for concurrent reads.
class Scene {
  public:
    std::vector<Facet> facets;
    std::vector<Material> materials;
    std::vector<Edge> edges;
    mutable std::vector<SceneWarning> warnings;

    Scene() = default;
    Scene(std::vector<Facet> f, std::vector<Material> m)
        : facets(std::move(f)), materials(std::move(m)) {
        build();
    }

    const Material& material_of(int facet_id) const {
        return materials[facets[facet_id].material_id];
    }

    Aabb bounds() const { return bbox_; }

    /// All facet crossings of the open segment (a,b), sorted by t. Hits
    /// within kGeomEps meters of either endpoint and hits on excluded facets
    /// are omitted.
    std::vector<SegmentHit> intersect_segment(const Point3& a, const Point3& b,
                                              const std::set<int>& exclude = {}) const {
        if (grid_built_) return intersect_grid(a, b, exclude);
        return intersect_brute(a, b, exclude);
    }

    /// Reference implementation: plane/polygon test over every facet.
    std::vector<SegmentHit> intersect_brute(const Point3& a, const Point3& b,
                                            const std::set<int>& exclude = {}) const {
        if (distance(a, b) < kGeomEps)
            throw std::invalid_argument("intersect_segment: endpoints coincide");
        std::vector<SegmentHit> hits;
        for (int i = 0; i < int(facets.size()); ++i) {
            if (exclude.count(i)) continue;
            test_facet(a, b, i, hits);
        }
        sort_hits(hits);
        return hits;
    }

    bool segment_clear(const Point3& a, const Point3& b,
                       const std::set<int>& exclude = {}) const {
        return intersect_segment(a, b, exclude).empty();
    }

    void build() {
        validate_facets();
        bbox_ = Aabb{};
        for (const auto& f : facets) bbox_.expand(f.bounds());
        edges = extract_edges();
        build_grid();
    }

    /// Deterministic edge list: one wedge edge per shared boundary of two
    /// non-coplanar facets, one free edge per unshared boundary, ordered
    /// lexicographically by quantized endpoints then facet ids.
    std::vector<Edge> extract_edges() const {
        struct Boundary {
            detail::VertexKey ka, kb;
            Point3 a, b;
            int facet;
        };
        std::map<std::pair<detail::VertexKey, detail::VertexKey>, std::vector<Boundary>> shared;
        for (int fi = 0; fi < int(facets.size()); ++fi) {
            const auto& vs = facets[fi].vertices;
            for (size_t i = 0; i < vs.size(); ++i) {
                Point3 pa = vs[i], pb = vs[(i + 1) % vs.size()];
                auto ka = detail::quantize(pa, kGeomEps), kb = detail::quantize(pb, kGeomEps);
                if (ka == kb) continue;  // degenerate side
                if (kb < ka) { std::swap(ka, kb); std::swap(pa, pb); }
                shared[{ka, kb}].push_back({ka, kb, pa, pb, fi});
            }
        }

        std::vector<Edge> out;
        for (const auto& [key, group] : shared) {
            if (group.size() == 1) {
                out.push_back(make_free_edge(group[0].a, group[0].b, group[0].facet));
                continue;
            }
            if (group.size() > 2) {
                warnings.push_back({"T-junction: edge shared by " +
                                    std::to_string(group.size()) +
                                    " facets; emitting one edge per pair"});
            }
            for (size_t i = 0; i < group.size(); ++i)
                for (size_t j = i + 1; j < group.size(); ++j) {
                    auto e = make_wedge_edge(group[i].a, group[i].b, group[i].facet,
                                             group[j].facet);
                    if (e) out.push_back(*e);
                }
        }
        std::sort(out.begin(), out.end(), [](const Edge& x, const Edge& y) {
            auto kx = std::make_tuple(detail::quantize(x.a, kGeomEps),
                                      detail::quantize(x.b, kGeomEps), x.facet_ids);
            auto ky = std::make_tuple(detail::quantize(y.a, kGeomEps),
                                      detail::quantize(y.b, kGeomEps), y.facet_ids);
            return kx < ky;
        });
        return out;
    }

  private:
    Aabb bbox_;

    // Uniform grid; candidates are a superset, so accelerated queries return
    // exactly the brute-force hit list.
    bool grid_built_ = false;
    Vec3 grid_origin_;
    double cell_ = 1.0;
    int nx_ = 1, ny_ = 1, nz_ = 1;
    std::vector<std::vector<int>> cells_;

    void validate_facets() const {
        for (int fi = 0; fi < int(facets.size()); ++fi) {
            const Facet& f = facets[fi];
            if (f.vertices.size() < 3)
                throw std::invalid_argument("facet " + std::to_string(fi) + ": needs >= 3 vertices");
            Vec3 nn = newell_normal(f.vertices);
            double area2 = nn.norm();
            if (area2 < 1e-12)
                throw std::invalid_argument("facet " + std::to_string(fi) + ": degenerate (zero area)");
            Vec3 n = nn / area2;
            // coplanarity within tolerance
            const Point3& p0 = f.vertices[0];
            for (const auto& v : f.vertices)
                if (std::abs(dot(v - p0, n)) > kGeomEps)
                    throw std::invalid_argument("facet " + std::to_string(fi) +
                                                ": vertices not coplanar within 1e-6 m");
            if (std::abs(dot(n, f.normal) - 1.0) > 1e-6)
                throw std::invalid_argument("facet " + std::to_string(fi) +
                                            ": stored normal inconsistent with winding");
            if (f.material_id < 0 || f.material_id >= int(materials.size()))
                throw std::invalid_argument("facet " + std::to_string(fi) +
                                            ": unknown material id");
        }
    }

    void test_facet(const Point3& a, const Point3& b, int fi,
                    std::vector<SegmentHit>& hits) const {
        const Facet& f = facets[fi];
        double t = segment_plane_param(a, b, f.vertices[0], f.normal);
        if (!(t == t)) return;  // NaN: parallel or outside
        double len = distance(a, b);
        if (t * len < kGeomEps || (1.0 - t) * len < kGeomEps) return;
        Point3 p = a + t * (b - a);
        if (!point_in_polygon(p, f.vertices, f.normal, 1e-9)) return;
        hits.push_back({fi, p, t});
    }

    static void sort_hits(std::vector<SegmentHit>& hits) {
        std::sort(hits.begin(), hits.end(), [](const SegmentHit& x, const SegmentHit& y) {
            if (x.t != y.t) return x.t < y.t;
            return x.facet_id < y.facet_id;
        });
    }

    Edge make_free_edge(const Point3& a, const Point3& b, int facet) const {
        Edge e;
        e.a = a; e.b = b;
        e.facet_ids = {facet};
        e.interior_angle_rad = 0.0;
        e.o_face_id = e.n_face_id = facet;
        const Facet& f = facets[facet];
        Vec3 t = normalized(b - a);
        // o-face direction: into the facet, perpendicular to the edge
        Vec3 into = f.centroid() - (a + b) * 0.5;
        Vec3 od = normalized(into - dot(into, t) * t);
        // orient tangent so the azimuth sweep starts on the normal side
        e.tangent = normalized(cross(od, f.normal));
        e.o_face_dir = od;
        return e;
    }

    std::optional<Edge> make_wedge_edge(const Point3& a, const Point3& b, int fa,
                                        int fb) const {
        const Facet& A = facets[fa];
        const Facet& B = facets[fb];
        if (std::abs(dot(A.normal, B.normal)) > 1.0 - 1e-6) return std::nullopt;  // coplanar

        Vec3 t = normalized(b - a);
        Point3 mid = (a + b) * 0.5;
        auto face_dir = [&](const Facet& f) {
            Vec3 into = f.centroid() - mid;
            return normalized(into - dot(into, t) * t);
        };
        Vec3 ta = face_dir(A), tb = face_dir(B);

        // Material occupies the sector whose bisector points behind both
        // face normals; the other sector is the propagation region.
        Vec3 bis = ta + tb;
        double alpha_short = std::acos(std::clamp(dot(ta, tb), -1.0, 1.0));
        double interior;
        bool material_is_short;
        if (bis.norm() < 1e-9) {
            interior = kPi;  // flat-ish; filtered below by n <= 1 checks
            material_is_short = true;
        } else {
            bis = normalized(bis);
            double score = dot(bis, A.normal) + dot(bis, B.normal);
            material_is_short = score < 0.0;
            interior = material_is_short ? alpha_short : 2.0 * kPi - alpha_short;
        }

        Edge e;
        e.a = a; e.b = b;
        e.facet_ids = {std::min(fa, fb), std::max(fa, fb)};
        e.interior_angle_rad = interior;
        e.o_face_id = fa;
        e.n_face_id = fb;
        e.o_face_dir = ta;
        // Tangent oriented so rotating from the o-face by +phi sweeps the
        // exterior: at small positive phi we must be on A's normal side.
        e.tangent = normalized(cross(ta, A.normal));
        return e;
    }

    void build_grid() {
        grid_built_ = false;
        if (facets.empty() || !bbox_.valid()) return;
        Vec3 ext = bbox_.extent();
        double longest = std::max({ext.x, ext.y, ext.z, 1e-3});
        double target_cells = std::cbrt(std::max<double>(facets.size(), 8.0)) * 2.0;
        cell_ = std::max(longest / target_cells, 0.25);
        grid_origin_ = bbox_.lo - Vec3{kGeomEps, kGeomEps, kGeomEps};
        auto count = [&](double e) {
            return std::max(1, int(std::ceil((e + 2.0 * kGeomEps) / cell_)) + 1);
        };
        nx_ = count(ext.x); ny_ = count(ext.y); nz_ = count(ext.z);
        if (std::int64_t(nx_) * ny_ * nz_ > 2'000'000) return;  // degenerate aspect: stay brute force
        cells_.assign(std::size_t(nx_) * ny_ * nz_, {});
        for (int fi = 0; fi < int(facets.size()); ++fi) {
            Aabb fb = facets[fi].bounds();
            int ix0 = cell_index(fb.lo.x - kGeomEps, grid_origin_.x, nx_);
            int iy0 = cell_index(fb.lo.y - kGeomEps, grid_origin_.y, ny_);
            int iz0 = cell_index(fb.lo.z - kGeomEps, grid_origin_.z, nz_);
            int ix1 = cell_index(fb.hi.x + kGeomEps, grid_origin_.x, nx_);
            int iy1 = cell_index(fb.hi.y + kGeomEps, grid_origin_.y, ny_);
            int iz1 = cell_index(fb.hi.z + kGeomEps, grid_origin_.z, nz_);
            for (int ix = ix0; ix <= ix1; ++ix)
                for (int iy = iy0; iy <= iy1; ++iy)
                    for (int iz = iz0; iz <= iz1; ++iz)
                        cells_[cell_flat(ix, iy, iz)].push_back(fi);
        }
        grid_built_ = true;
    }

    int cell_index(double v, double origin, int n) const {
        int i = int(std::floor((v - origin) / cell_));
        return std::clamp(i, 0, n - 1);
    }
    std::size_t cell_flat(int ix, int iy, int iz) const {
        return (std::size_t(iz) * ny_ + iy) * nx_ + ix;
    }

    std::vector<SegmentHit> intersect_grid(const Point3& a, const Point3& b,
                                           const std::set<int>& exclude) const {
        if (distance(a, b) < kGeomEps)
            throw std::invalid_argument("intersect_segment: endpoints coincide");
        // Conservative cell walk: visit every cell the segment AABB slab per
        // step touches (3D-DDA with one-cell padding).
        std::vector<char> seen(facets.size(), 0);
        std::vector<int> candidates;
        int ix0 = cell_index(std::min(a.x, b.x) - kGeomEps, grid_origin_.x, nx_);
        int iy0 = cell_index(std::min(a.y, b.y) - kGeomEps, grid_origin_.y, ny_);
        int iz0 = cell_index(std::min(a.z, b.z) - kGeomEps, grid_origin_.z, nz_);
        int ix1 = cell_index(std::max(a.x, b.x) + kGeomEps, grid_origin_.x, nx_);
        int iy1 = cell_index(std::max(a.y, b.y) + kGeomEps, grid_origin_.y, ny_);
        int iz1 = cell_index(std::max(a.z, b.z) + kGeomEps, grid_origin_.z, nz_);

        std::int64_t box_cells =
            std::int64_t(ix1 - ix0 + 1) * (iy1 - iy0 + 1) * (iz1 - iz0 + 1);
        auto collect = [&](int ix, int iy, int iz) {
            for (int fi : cells_[cell_flat(ix, iy, iz)]) {
                if (!seen[fi]) { seen[fi] = 1; candidates.push_back(fi); }
            }
        };
        if (box_cells <= 64) {
            for (int ix = ix0; ix <= ix1; ++ix)
                for (int iy = iy0; iy <= iy1; ++iy)
                    for (int iz = iz0; iz <= iz1; ++iz) collect(ix, iy, iz);
        } else {
            // padded DDA along the segment
            Vec3 d = b - a;
            double len = d.norm();
            int steps = int(std::ceil(len / cell_)) * 2 + 2;
            for (int s = 0; s <= steps; ++s) {
                Point3 p = a + d * (double(s) / steps);
                int cx = cell_index(p.x, grid_origin_.x, nx_);
                int cy = cell_index(p.y, grid_origin_.y, ny_);
                int cz = cell_index(p.z, grid_origin_.z, nz_);
                for (int ix = std::max(cx - 1, 0); ix <= std::min(cx + 1, nx_ - 1); ++ix)
                    for (int iy = std::max(cy - 1, 0); iy <= std::min(cy + 1, ny_ - 1); ++iy)
                        for (int iz = std::max(cz - 1, 0); iz <= std::min(cz + 1, nz_ - 1); ++iz)
                            collect(ix, iy, iz);
            }
        }
        std::sort(candidates.begin(), candidates.end());
        std::vector<SegmentHit> hits;
        for (int fi : candidates) {
            if (exclude.count(fi)) continue;
            test_facet(a, b, fi, hits);
        }
        sort_hits(hits);
        return hits;
    }
};

/// Reflection of p across the supporting plane of facet f.
inline Point3 mirror_point(const Point3& p, const Facet& f) {
    return mirror_across_plane(p, f.vertices[0], f.normal);
}

}  // namespace mmray
