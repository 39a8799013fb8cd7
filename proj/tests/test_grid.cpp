#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "smspde/grid.hpp"

using namespace smspde;

TEST_CASE("1D grid arithmetic") {
    const Grid g = build_grid(0.0, 1.0, 101);
    CHECK(g.dim() == 1);
    CHECK(g.h(0) == doctest::Approx(0.01).epsilon(1e-14));
    CHECK(g.num_nodes() == 101);
    CHECK(g.num_interior() == 99);
    CHECK(g.coord(50)[0] == doctest::Approx(0.5));
    CHECK(!g.is_interior(0));
    CHECK(!g.is_interior(100));
    CHECK(g.is_interior(1));
}

TEST_CASE("2D grid arithmetic") {
    const Grid g = build_grid({{{0.0, 1.0}, {0.0, 1.0}}}, {11, 11});
    CHECK(g.num_nodes() == 121);
    CHECK(g.num_interior() == 81);
    CHECK(g.cell_volume() == doctest::Approx(0.01));
    const auto x = g.coord(g.index(5, 5));
    CHECK(x[0] == doctest::Approx(0.5));
    CHECK(x[1] == doctest::Approx(0.5));
}

TEST_CASE("grid preconditions") {
    CHECK_THROWS_AS(build_grid(0.0, 0.0, 11), std::invalid_argument);
    CHECK_THROWS_AS(build_grid(0.0, 1.0, 2), std::invalid_argument);
    CHECK_THROWS_AS(Grid(3, {{{0.0, 1.0}, {0.0, 1.0}}}, {11, 11}), std::invalid_argument);
}

TEST_CASE("l2 norm values") {
    const Grid g = build_grid(0.0, 1.0, 201);
    Field c(g, 2.0);
    CHECK(l2_norm(c) == doctest::Approx(2.0).epsilon(0.01));
    CHECK(l2_norm(Field(g)) == 0.0);
    Field s(g);
    for (int n = 0; n < g.num_nodes(); ++n) s[n] = std::sin(M_PI * g.coord(n)[0]);
    CHECK(l2_norm(s) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-3));
}

TEST_CASE("sobolev norm values") {
    const Grid g = build_grid(0.0, 1.0, 201);
    Field s(g);
    for (int n = 0; n < g.num_nodes(); ++n) s[n] = std::sin(M_PI * g.coord(n)[0]);
    CHECK(sobolev_norm(s) ==
          doctest::Approx(std::sqrt(0.5 + M_PI * M_PI / 2.0)).epsilon(1e-2));
    Field c(g, 3.0);
    CHECK(sobolev_norm(c) == doctest::Approx(3.0).epsilon(0.01));
    CHECK(sobolev_norm(Field(g)) == 0.0);
}

TEST_CASE("norm inequalities and homogeneity") {
    const Grid g = build_grid(0.0, 1.0, 51);
    std::mt19937_64 rng(11);
    for (int t = 0; t < 10; ++t) {
        const Field f = test_helpers::random_field(g, rng);
        CHECK(l2_norm(f) <= sobolev_norm(f));
        CHECK(l2_norm(3.5 * f) == doctest::Approx(3.5 * l2_norm(f)).epsilon(1e-14));
    }
}

TEST_CASE("zero extension outside the closed box") {
    const Grid g = build_grid(0.0, 1.0, 11);
    Field f(g, 7.0);
    CHECK(f.eval({-0.01, 0.0}) == 0.0);
    CHECK(f.eval({1.01, 0.0}) == 0.0);
    CHECK(f.eval({0.5, 0.0}) == 7.0);
}

TEST_CASE("trapezoid quadrature is exact on linear fields") {
    const Grid g = build_grid(0.0, 1.0, 101);
    Field f(g);
    for (int n = 0; n < g.num_nodes(); ++n) f[n] = 1.0 + g.coord(n)[0];
    CHECK(integrate(f) == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(quad_weight(g, 0) == doctest::Approx(0.5 * g.cell_volume()));
    CHECK(quad_weight(g, 50) == doctest::Approx(g.cell_volume()));

    const Grid g2 = build_grid({{{0.0, 1.0}, {0.0, 2.0}}}, {21, 21});
    Field f2(g2);
    for (int n = 0; n < g2.num_nodes(); ++n) f2[n] = g2.coord(n)[0] + g2.coord(n)[1];
    CHECK(integrate(f2) == doctest::Approx(1.0 + 2.0).epsilon(1e-13));  // |D| = 2
}

TEST_CASE("time field layout") {
    const Grid g = build_grid(0.0, 1.0, 11);
    TimeField tf(g, 2.0, 10);
    CHECK(tf.dt() == doctest::Approx(0.2));
    CHECK(static_cast<int>(tf.frames.size()) == 11);
    tf[3][5] = 1.5;
    CHECK(tf[3][5] == 1.5);
}
