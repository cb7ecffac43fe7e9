#include <catch2/catch_amalgamated.hpp>

#include "mmray/scattering.hpp"

using namespace mmray;

TEST_CASE("zero scattering coefficient kills the contribution") {
    CHECK(er_scatter_factor(0.3, 0.4, 0.25, 5.0, 0.0) == 0.0);
}

TEST_CASE("scattered power follows the S^2 law") {
    double p1 = er_scatter_factor(0.3, 0.4, 0.25, 5.0, 0.2);
    double p2 = er_scatter_factor(0.3, 0.4, 0.25, 5.0, 0.4);
    CHECK(p2 == Catch::Approx(4.0 * p1).epsilon(1e-12));
}

TEST_CASE("lambertian hemispherical energy closes to S^2 x intercepted power") {
    // integrate (scattered density * r^2) over the hemisphere; Gauss-style
    // midpoint quadrature is plenty at this smoothness
    double theta_i = 0.7;
    double S = 0.6, area = 0.25, r = 3.0;
    const int NT = 256, NP = 256;
    double sum = 0.0;
    for (int i = 0; i < NT; ++i) {
        double th = (i + 0.5) * (kPi / 2.0) / NT;
        for (int j = 0; j < NP; ++j) {
            double factor = er_scatter_factor(theta_i, th, area, r, S);
            sum += factor * r * r * std::sin(th);
        }
    }
    sum *= (kPi / 2.0 / NT) * (2.0 * kPi / NP);
    double intercepted = S * S * area * std::cos(theta_i);
    CHECK(sum / intercepted == Catch::Approx(1.0).epsilon(0.01));
}

TEST_CASE("directive lobe conserves the lambertian total for any alpha") {
    double theta_i = 0.5, S = 0.4, area = 0.25, r = 2.0;
    for (int alpha : {1, 3, 8}) {
        const int NT = 128, NP = 256;
        double sum = 0.0;
        for (int i = 0; i < NT; ++i) {
            double th = (i + 0.5) * (kPi / 2.0) / NT;
            for (int j = 0; j < NP; ++j) {
                double ph = -kPi + (j + 0.5) * 2.0 * kPi / NP;
                double factor = er_scatter_factor(theta_i, th, area, r, S,
                                                  ScatterVariant::Directive, alpha, ph);
                sum += factor * r * r * std::sin(th);
            }
        }
        sum *= (kPi / 2.0 / NT) * (2.0 * kPi / NP);
        double intercepted = S * S * area * std::cos(theta_i);
        REQUIRE(sum / intercepted == Catch::Approx(1.0).epsilon(0.02));
    }
}

TEST_CASE("directive lobe peaks at the specular direction") {
    double theta_i = 0.6;
    double at_spec = er_scatter_factor(theta_i, theta_i, 0.25, 2.0, 0.3,
                                       ScatterVariant::Directive, 6, 0.0);
    double off = er_scatter_factor(theta_i, theta_i, 0.25, 2.0, 0.3,
                                   ScatterVariant::Directive, 6, 1.5);
    CHECK(at_spec > off);
}

TEST_CASE("invalid inputs are rejected") {
    CHECK_THROWS_AS(er_scatter_factor(0.3, 0.4, 0.25, 5.0, 1.5), std::invalid_argument);
    CHECK_THROWS_AS(er_scatter_factor(0.3, 0.4, 0.25, -1.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(er_scatter_factor(2.0, 0.4, 0.25, 5.0, 0.5), std::invalid_argument);
}
