#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "smspde/spacemean.hpp"

using namespace smspde;

TEST_CASE("kernel stencil size and weight") {
    const Grid g = build_grid(0.0, 1.0, 101);
    const BallKernel k = build_kernel(g, 0.05);
    // strict |d * h| < theta keeps d = -4..4
    CHECK(static_cast<int>(k.offsets.size()) == 9);
    CHECK(k.ball_volume == doctest::Approx(0.1));
    CHECK(k.weight == doctest::Approx(0.1));
}

TEST_CASE("kernel preconditions") {
    const Grid g = build_grid(0.0, 1.0, 101);
    CHECK_THROWS_AS(build_kernel(g, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(build_kernel(g, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(build_kernel(g, 0.005), std::invalid_argument);
}

TEST_CASE("averaging a constant") {
    const Grid g = build_grid(0.0, 1.0, 101);
    // theta = 9.5 h: the 19-point stencil carries total weight exactly 1,
    // so deep-interior averages of a constant are exact.
    const BallKernel k = build_kernel(g, 0.095);
    CHECK(static_cast<int>(k.offsets.size()) == 19);
    const Field out = apply_G(Field(g, 2.0), k);
    CHECK(out[50] == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(out[10] == doctest::Approx(2.0).epsilon(1e-14));
    // near the boundary the stencil is truncated (zero extension)
    CHECK(out[0] < 1.2);
    CHECK(out[0] == doctest::Approx(2.0 * 10.0 / 19.0).epsilon(1e-14));
}

TEST_CASE("averaging an indicator") {
    const Grid g = build_grid(0.0, 1.0, 101);
    const BallKernel k = build_kernel(g, 0.1);
    Field ind(g);
    for (int n = 1; n < 50; ++n) ind[n] = 1.0;
    const Field out = apply_G(ind, k);
    // discrete stencil at x = 0.5 sees nine unit nodes of nineteen
    CHECK(out[50] == doctest::Approx(0.45).epsilon(1e-14));
    // continuum value is 0.5; agreement at O(h / theta)
    CHECK(std::abs(out[50] - 0.5) < 2.0 * g.h(0) / k.theta + 1e-12);
    CHECK(apply_G(Field(g), k)[37] == 0.0);
}

TEST_CASE("dual is the exact transpose") {
    const Grid g = build_grid(0.0, 1.0, 101);
    std::mt19937_64 rng(7);
    for (double theta : {0.05, 0.1, 0.21}) {
        const BallKernel k = build_kernel(g, theta);
        for (int t = 0; t < 5; ++t) {
            const Field f = test_helpers::random_field(g, rng);
            const Field psi = test_helpers::random_field(g, rng);
            const double lhs = inner_product(apply_G(f, k), psi);
            const double rhs = inner_product(f, apply_G_dual(psi, k));
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
        }
    }
}

TEST_CASE("dual of a point mass is one stencil row") {
    const Grid g = build_grid(0.0, 1.0, 101);
    const BallKernel k = build_kernel(g, 0.05);
    Field delta(g);
    delta[50] = 1.0;
    const Field row = apply_G_dual(delta, k);
    int hit = 0;
    for (int n = 0; n < g.num_nodes(); ++n) {
        if (row[n] != 0.0) {
            ++hit;
            CHECK(row[n] == doctest::Approx(k.weight).epsilon(1e-14));
            CHECK(std::abs(n - 50) <= 4);
        }
    }
    CHECK(hit == 9);
}

TEST_CASE("matches the brute-force reference") {
    std::mt19937_64 rng(23);
    const Grid g1 = build_grid(0.0, 1.0, 81);
    const BallKernel k1 = build_kernel(g1, 0.07);
    const Grid g2 = build_grid({{{0.0, 1.0}, {0.0, 1.0}}}, {21, 21});
    // theta/h must keep every lattice offset strictly away from the ball
    // surface, so that the index-space and coordinate-space strict
    // comparisons cannot round differently
    const BallKernel k2 = build_kernel(g2, 0.16);

    for (int t = 0; t < 3; ++t) {
        const Field f1 = test_helpers::random_field(g1, rng);
        CHECK(test_helpers::max_abs_diff(apply_G(f1, k1), ref::apply_G(f1, k1)) < 1e-13);
        CHECK(test_helpers::max_abs_diff(apply_G_dual(f1, k1), ref::apply_G_dual(f1, k1)) <
              1e-13);
        const Field f2 = test_helpers::random_field(g2, rng);
        CHECK(test_helpers::max_abs_diff(apply_G(f2, k2), ref::apply_G(f2, k2)) < 1e-13);
        CHECK(test_helpers::max_abs_diff(apply_G_dual(f2, k2), ref::apply_G_dual(f2, k2)) <
              1e-13);
    }
}

TEST_CASE("linearity and non-expansiveness") {
    const Grid g = build_grid(0.0, 1.0, 101);
    std::mt19937_64 rng(99);
    for (double theta : {0.05, 0.1, 0.2}) {
        const BallKernel k = build_kernel(g, theta);
        const Field f = test_helpers::random_field(g, rng);
        const Field h = test_helpers::random_field(g, rng);
        const Field lin = apply_G(f + 2.0 * h, k) - (apply_G(f, k) + 2.0 * apply_G(h, k));
        CHECK(test_helpers::max_abs_diff(lin, Field(g)) < 1e-13);
        CHECK(l2_norm(apply_G(f, k)) <= l2_norm(f) * (1.0 + 1e-12));
    }
}

TEST_CASE("coverage fraction in 1D") {
    const Grid g = build_grid(0.0, 1.0, 101);
    const Field v = coverage_vD(g, 0.1);
    CHECK(v[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(v[100] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(v[5] == doctest::Approx(0.75).epsilon(1e-14));
    CHECK(v[50] == doctest::Approx(1.0).epsilon(1e-14));
    for (int n = 0; n < g.num_nodes(); ++n) {
        CHECK(v[n] > 0.0);
        CHECK(v[n] <= 1.0);
    }
}

TEST_CASE("coverage fraction in 2D") {
    const Grid g = build_grid({{{0.0, 1.0}, {0.0, 1.0}}}, {21, 21});
    const Field v = coverage_vD(g, 0.1);
    // quarter disc at a corner
    CHECK(v[g.index(0, 0)] == doctest::Approx(0.25).epsilon(1e-3));
    // half disc on an edge, far from corners
    CHECK(v[g.index(0, 10)] == doctest::Approx(0.5).epsilon(1e-3));
    CHECK(v[g.index(10, 10)] == 1.0);
    for (int n = 0; n < g.num_nodes(); ++n) {
        CHECK(v[n] > 0.0);
        CHECK(v[n] <= 1.0);
    }
}

TEST_CASE("averaged dual modes diverge near the boundary") {
    const Grid g = build_grid(0.0, 1.0, 101);
    const BallKernel k = build_kernel(g, 0.1);
    Field c(g);
    for (int n = 0; n < g.num_nodes(); ++n) c[n] = g.coord(n)[0];

    const Field exact = averaged_dual(c, k, DualMode::exact);
    const Field pw = averaged_dual(c, k, DualMode::coverage_pointwise);

    // row-integrated value near x = 0.05: continuum (1/0.2) * int_0^0.15 x dx
    CHECK(exact[5] == doctest::Approx(0.0525).epsilon(1e-12));
    CHECK(std::abs(exact[5] - 0.05625) / 0.05625 < 0.15);
    // coverage-scaled pointwise value is exactly v_D(x) * c(x)
    CHECK(pw[5] == doctest::Approx(0.75 * 0.05).epsilon(1e-14));

    // deep in the interior both modes agree with plain averaging
    CHECK(exact[50] == doctest::Approx(pw[50]).epsilon(0.02));

    // passing a precomputed coverage field changes nothing
    const Field v = coverage_vD(g, k.theta);
    const Field pw2 = averaged_dual(c, k, DualMode::coverage_pointwise, &v);
    CHECK(test_helpers::max_abs_diff(pw, pw2) == 0.0);
}
