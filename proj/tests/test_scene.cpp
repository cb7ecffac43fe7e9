#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "mmray/scene.hpp"

using namespace mmray;

namespace {

Facet quad(Point3 a, Point3 b, Point3 c, Point3 d, int mat = 0, bool two_sided = false) {
    Facet f;
    f.vertices = {a, b, c, d};
    f.normal = normalized(newell_normal(f.vertices));
    f.material_id = mat;
    f.two_sided = two_sided;
    return f;
}

Material air_wall() {
    Material m = default_material("concrete");
    return m;
}

// Axis-aligned box [0,sx]x[0,sy]x[0,sz] with inward normals.
std::vector<Facet> box_facets(double sx, double sy, double sz) {
    std::vector<Facet> f;
    f.push_back(quad({0, 0, 0}, {sx, 0, 0}, {sx, sy, 0}, {0, sy, 0}));          // floor z=0, n=+z
    f.push_back(quad({0, 0, sz}, {0, sy, sz}, {sx, sy, sz}, {sx, 0, sz}));      // ceiling, n=-z
    f.push_back(quad({0, 0, 0}, {0, sy, 0}, {0, sy, sz}, {0, 0, sz}));          // x=0, n=+x
    f.push_back(quad({sx, 0, 0}, {sx, 0, sz}, {sx, sy, sz}, {sx, sy, 0}));      // x=sx, n=-x
    f.push_back(quad({0, 0, 0}, {0, 0, sz}, {sx, 0, sz}, {sx, 0, 0}));          // y=0, n=+y
    f.push_back(quad({0, sy, 0}, {sx, sy, 0}, {sx, sy, sz}, {0, sy, sz}));      // y=sy, n=-y
    return f;
}

}  // namespace

TEST_CASE("segment through one wall") {
    Scene s({quad({2, -1, -1}, {2, 1, -1}, {2, 1, 1}, {2, -1, 1})}, {air_wall()});
    auto hits = s.intersect_segment({0, 0, 0}, {4, 0, 0});
    REQUIRE(hits.size() == 1);
    CHECK(hits[0].facet_id == 0);
    CHECK(hits[0].point.x == Catch::Approx(2.0));
    CHECK(hits[0].t == Catch::Approx(0.5));
}

TEST_CASE("segment inside an empty box has no hits") {
    Scene s(box_facets(10, 8, 3), {air_wall()});
    CHECK(s.intersect_segment({1, 1, 1}, {9, 7, 2}).empty());
}

TEST_CASE("segment through two parallel walls is ordered by t") {
    Scene s({quad({2, -5, -5}, {2, 5, -5}, {2, 5, 5}, {2, -5, 5}),
             quad({6, -5, -5}, {6, 5, -5}, {6, 5, 5}, {6, -5, 5})},
            {air_wall()});
    auto hits = s.intersect_segment({0, 0, 0}, {10, 0, 0});
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].facet_id == 0);
    CHECK(hits[1].facet_id == 1);
    CHECK(hits[0].t < hits[1].t);
}

TEST_CASE("hits near endpoints and excluded facets are omitted") {
    Scene s({quad({2, -1, -1}, {2, 1, -1}, {2, 1, 1}, {2, -1, 1})}, {air_wall()});
    // endpoint on the wall: no hit
    CHECK(s.intersect_segment({2, 0, 0}, {4, 0, 0}).empty());
    CHECK(s.intersect_segment({0, 0, 0}, {4, 0, 0}, {0}).empty());
}

TEST_CASE("reversed segments see the same facets with t -> 1-t") {
    Scene s(box_facets(10, 8, 3), {air_wall()});
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> ux(-2.0, 12.0), uy(-2.0, 10.0), uz(-1.0, 4.0);
    for (int i = 0; i < 500; ++i) {
        Point3 a{ux(rng), uy(rng), uz(rng)}, b{ux(rng), uy(rng), uz(rng)};
        if (distance(a, b) < 0.05) continue;
        auto fwd = s.intersect_segment(a, b);
        auto rev = s.intersect_segment(b, a);
        REQUIRE(fwd.size() == rev.size());
        for (const auto& h : fwd) {
            bool found = false;
            for (const auto& r : rev)
                if (r.facet_id == h.facet_id && std::abs(r.t - (1.0 - h.t)) < 1e-9)
                    found = true;
            REQUIRE(found);
        }
    }
}

TEST_CASE("accelerated intersection equals brute force on random scenes") {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> u(-25.0, 25.0), us(0.5, 6.0);
    std::vector<Facet> facets;
    for (int i = 0; i < 50; ++i) {
        Point3 c{u(rng), u(rng), u(rng)};
        double w = us(rng), h = us(rng);
        int axis = i % 3;
        Vec3 du = axis == 0 ? Vec3{0, 1, 0} : Vec3{1, 0, 0};
        Vec3 dv = axis == 2 ? Vec3{0, 1, 0} : Vec3{0, 0, 1};
        facets.push_back(quad(c, c + du * w, c + du * w + dv * h, c + dv * h));
    }
    Scene s(facets, {air_wall()});
    for (int i = 0; i < 1000; ++i) {
        Point3 a{u(rng), u(rng), u(rng)}, b{u(rng), u(rng), u(rng)};
        if (distance(a, b) < 0.05) continue;
        auto fast = s.intersect_segment(a, b);
        auto brute = s.intersect_brute(a, b);
        REQUIRE(fast.size() == brute.size());
        for (size_t k = 0; k < fast.size(); ++k) {
            REQUIRE(fast[k].facet_id == brute[k].facet_id);
            REQUIRE(distance(fast[k].point, brute[k].point) < 1e-9);
        }
    }
}

TEST_CASE("empty scene: all segments clear") {
    Scene s;
    CHECK(s.intersect_segment({0, 0, 0}, {1, 1, 1}).empty());
}

TEST_CASE("single rectangular facet yields 4 free edges") {
    Scene s({quad({0, 0, 0}, {2, 0, 0}, {2, 1, 0}, {0, 1, 0})}, {air_wall()});
    REQUIRE(s.edges.size() == 4);
    for (const auto& e : s.edges) {
        CHECK(e.facet_ids.size() == 1);
        CHECK(e.interior_angle_rad == 0.0);
        CHECK(e.exterior_n() == Catch::Approx(2.0));
    }
}

TEST_CASE("two perpendicular rectangles sharing a side form one wedge edge") {
    // vertical sheet meeting a horizontal sheet along the x-axis; normals
    // point +z and +y (convex material corner below/behind)
    Facet a = quad({0, 0, 0}, {2, 0, 0}, {2, 1, 0}, {0, 1, 0});    // z=0 plane, n=+z
    Facet b = quad({0, 0, 0}, {0, 0, -1}, {2, 0, -1}, {2, 0, 0});  // y=0 plane, n=+y
    Scene s({a, b}, {air_wall()});
    int wedge = 0, free_edges = 0;
    for (const auto& e : s.edges) {
        if (e.facet_ids.size() == 2) {
            ++wedge;
            CHECK(e.interior_angle_rad == Catch::Approx(kPi / 2.0).margin(1e-9));
            CHECK(e.exterior_n() == Catch::Approx(1.5).margin(1e-9));
        } else {
            ++free_edges;
        }
    }
    CHECK(wedge == 1);
    CHECK(free_edges == 6);
}

TEST_CASE("concave room corner has a reflex interior angle") {
    // floor with +z normal and wall with +x normal: the room occupies the
    // quadrant the normals point into, the material sector is 270 degrees
    Facet floor = quad({0, 0, 0}, {2, 0, 0}, {2, 1, 0}, {0, 1, 0});     // n=+z
    Facet wall = quad({0, 0, 0}, {0, 1, 0}, {0, 1, 2}, {0, 0, 2});      // n=+x
    Scene s({floor, wall}, {air_wall()});
    bool found = false;
    for (const auto& e : s.edges)
        if (e.facet_ids.size() == 2) {
            found = true;
            CHECK(e.interior_angle_rad == Catch::Approx(3.0 * kPi / 2.0).margin(1e-9));
            CHECK(e.exterior_n() < 1.0);
        }
    CHECK(found);
}

TEST_CASE("closed box yields 12 wedge edges") {
    Scene s(box_facets(4, 3, 2), {air_wall()});
    int wedges = 0;
    for (const auto& e : s.edges)
        if (e.facet_ids.size() == 2) ++wedges;
    CHECK(wedges == 12);
    CHECK(s.edges.size() == 12);  // closed surface: no free edges
}

TEST_CASE("extract_edges is idempotent and deterministic") {
    Scene s(box_facets(4, 3, 2), {air_wall()});
    auto again = s.extract_edges();
    REQUIRE(again.size() == s.edges.size());
    for (size_t i = 0; i < again.size(); ++i) {
        CHECK(distance(again[i].a, s.edges[i].a) < 1e-12);
        CHECK(distance(again[i].b, s.edges[i].b) < 1e-12);
        CHECK(again[i].facet_ids == s.edges[i].facet_ids);
    }
}

TEST_CASE("T-junction warns and emits pairwise edges") {
    Facet a = quad({0, 0, 0}, {2, 0, 0}, {2, 1, 0}, {0, 1, 0});     // z=0, n=+z
    Facet b = quad({0, 0, 0}, {0, 0, -1}, {2, 0, -1}, {2, 0, 0});   // y=0 below
    Facet c = quad({0, 0, 0}, {2, 0, 0}, {2, 0, 1}, {0, 0, 1});     // y=0 above
    Scene s({a, b, c}, {air_wall()});
    CHECK_FALSE(s.warnings.empty());
}

TEST_CASE("degenerate facets are rejected at build") {
    Facet bad;
    bad.vertices = {{0, 0, 0}, {1, 0, 0}, {2, 0, 0}};  // collinear
    bad.normal = {0, 0, 1};
    bad.material_id = 0;
    CHECK_THROWS_AS(Scene({bad}, {air_wall()}), std::invalid_argument);
}

TEST_CASE("non-coplanar facet is rejected") {
    Facet bad;
    bad.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0.1}, {0, 1, 0}};
    bad.normal = {0, 0, 1};
    bad.material_id = 0;
    CHECK_THROWS_AS(Scene({bad}, {air_wall()}), std::invalid_argument);
}

TEST_CASE("unknown material id is rejected") {
    Facet f = quad({0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, 3);
    CHECK_THROWS_AS(Scene({f}, {air_wall()}), std::invalid_argument);
}
