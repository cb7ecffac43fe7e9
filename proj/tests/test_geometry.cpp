#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "mmray/geometry.hpp"
#include "mmray/scene.hpp"

using namespace mmray;

namespace {

Facet make_facet(std::vector<Point3> verts, int mat = 0) {
    Facet f;
    f.vertices = std::move(verts);
    f.normal = normalized(newell_normal(f.vertices));
    f.material_id = mat;
    return f;
}

}  // namespace

TEST_CASE("mirror_point across axis-aligned plane") {
    Facet f = make_facet({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}});  // z = 0
    Point3 p{1, 2, 3};
    Point3 m = mirror_point(p, f);
    CHECK(m.x == Catch::Approx(1.0));
    CHECK(m.y == Catch::Approx(2.0));
    CHECK(m.z == Catch::Approx(-3.0));
}

TEST_CASE("mirror_point fixes points on the plane") {
    Facet f = make_facet({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}});
    Point3 p{0.3, 0.7, 0.0};
    Point3 m = mirror_point(p, f);
    CHECK(distance(m, p) < 1e-12);
}

TEST_CASE("mirror_point matches the Householder formula on a tilted plane") {
    // plane x + z = 0 through the origin
    Facet f = make_facet({{0, 0, 0}, {1, 0, -1}, {1, 1, -1}, {0, 1, 0}});
    Point3 m = mirror_point({0, 0, 1}, f);
    CHECK(m.x == Catch::Approx(-1.0).margin(1e-12));
    CHECK(m.y == Catch::Approx(0.0).margin(1e-12));
    CHECK(m.z == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("mirror_point is an involution on random planes") {
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    for (int i = 0; i < 10000; ++i) {
        Vec3 n{u(rng), u(rng), u(rng)};
        if (n.norm() < 1e-3) continue;
        n = normalized(n);
        Point3 q{u(rng), u(rng), u(rng)};
        Point3 p{u(rng), u(rng), u(rng)};
        Point3 twice = mirror_across_plane(mirror_across_plane(p, q, n), q, n);
        REQUIRE(distance(twice, p) < 1e-9);
    }
}

TEST_CASE("point_in_polygon basics") {
    std::vector<Point3> sq{{0, 0, 0}, {2, 0, 0}, {2, 2, 0}, {0, 2, 0}};
    Vec3 n{0, 0, 1};
    CHECK(point_in_polygon({1, 1, 0}, sq, n));
    CHECK_FALSE(point_in_polygon({3, 1, 0}, sq, n));
    // boundary points count as outside
    CHECK_FALSE(point_in_polygon({0, 1, 0}, sq, n));
    CHECK_FALSE(point_in_polygon({2, 2, 0}, sq, n));
}

TEST_CASE("point_in_polygon on a non-convex polygon") {
    // L-shape in the y=0 plane
    std::vector<Point3> L{{0, 0, 0}, {3, 0, 0}, {3, 0, 1}, {1, 0, 1}, {1, 0, 3}, {0, 0, 3}};
    Vec3 n = normalized(newell_normal(L));
    CHECK(point_in_polygon({0.5, 0, 2.5}, L, n));
    CHECK(point_in_polygon({2.5, 0, 0.5}, L, n));
    CHECK_FALSE(point_in_polygon({2.5, 0, 2.5}, L, n));
}

TEST_CASE("transverse basis is orthonormal and vertical-aligned") {
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        Vec3 d{u(rng), u(rng), u(rng)};
        if (d.norm() < 1e-3) continue;
        d = normalized(d);
        auto [ev, eh] = transverse_basis(d);
        CHECK(std::abs(dot(ev, d)) < 1e-12);
        CHECK(std::abs(dot(eh, d)) < 1e-12);
        CHECK(std::abs(dot(ev, eh)) < 1e-12);
        CHECK(ev.norm() == Catch::Approx(1.0));
        // ev lies in the plane spanned by z and d
        CHECK(std::abs(dot(ev, cross(Vec3{0, 0, 1}, d))) < 1e-9);
    }
}

TEST_CASE("azimuth/elevation round trip") {
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 1000; ++i) {
        Vec3 d{u(rng), u(rng), u(rng)};
        if (d.norm() < 1e-3) continue;
        d = normalized(d);
        AzEl a = AzEl::from_direction(d);
        CHECK(distance(a.direction(), d) < 1e-12);
    }
}
