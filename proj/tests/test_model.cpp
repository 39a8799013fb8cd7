#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "smspde/model.hpp"

using namespace smspde;

namespace {

const std::array<double, 2> X{0.3, 0.0};

LevyModel jump_model() {
    LevyModel levy;
    levy.intensity = 2.0;
    levy.law = MarkLaw::two_point;
    levy.zeta1 = 1.0;
    levy.zeta2 = -0.5;
    levy.prob1 = 0.5;
    return levy;
}

}  // namespace

TEST_CASE("hamiltonian hand values, log preset") {
    const ModelSpec spec = harvest_log(1.0, 0.0, LevyModel{}, ControlBounds{});
    HamiltonianInputs in;
    in.y = 1.0;
    in.ybar = 2.0;
    in.u = 1.0;
    in.p = 0.5;
    // log 1 + (alpha*ybar - u) * p = 0 + 1 * 0.5
    CHECK(hamiltonian(spec, 0.0, X, in) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(dH_du(spec, 0.0, X, in) == doctest::Approx(1.0 / in.u - in.p).epsilon(1e-14));

    const ModelSpec spec2 = harvest_log(1.0, 2.0, LevyModel{}, ControlBounds{});
    HamiltonianInputs in2 = in;
    in2.p = 1.0;
    in2.q = 3.0;
    // alpha * p + beta * q
    CHECK(dH_dybar(spec2, 0.0, X, in2) == doctest::Approx(7.0).epsilon(1e-14));
}

TEST_CASE("jump channel enters through c_r and the second moment") {
    const ModelSpec spec = harvest_log(0.5, 0.0, jump_model(), ControlBounds{});
    CHECK(spec.moments.m2 == doctest::Approx(1.25));
    HamiltonianInputs in;
    in.y = 1.0;
    in.ybar = 2.0;
    in.u = 1.0;
    in.c_r = 0.4;
    // log 1 + (0.5*2 - 1)*0 + ybar * c_r * m2
    CHECK(hamiltonian(spec, 0.0, X, in) == doctest::Approx(2.0 * 0.4 * 1.25).epsilon(1e-13));
    CHECK(dH_dybar(spec, 0.0, X, in) == doctest::Approx(0.5 * 0.0 + 0.4 * 1.25).epsilon(1e-13));
}

TEST_CASE("control domain is enforced") {
    const ModelSpec spec = harvest_log(1.0, 0.0, LevyModel{}, ControlBounds{0.01, 10.0});
    HamiltonianInputs in;
    in.y = 1.0;
    in.ybar = 1.0;
    in.u = 100.0;
    CHECK_THROWS_AS(hamiltonian(spec, 0.0, X, in), std::domain_error);
    in.u = 0.001;
    CHECK_THROWS_AS(dH_du(spec, 0.0, X, in), std::domain_error);
}

TEST_CASE("zero custom model has zero hamiltonian") {
    const ModelSpec spec = custom_linear(CustomCoeffs{}, LevyModel{}, ControlBounds{});
    HamiltonianInputs in;
    in.y = 3.0;
    in.ybar = -1.0;
    in.u = 2.0;
    in.p = 5.0;
    in.q = -4.0;
    in.c_r = 1.0;
    CHECK(hamiltonian(spec, 0.0, X, in) == 0.0);
    CHECK(dH_du(spec, 0.0, X, in) == 0.0);
    CHECK(dH_dy(spec, 0.0, X, in) == 0.0);
    CHECK(dH_dybar(spec, 0.0, X, in) == 0.0);
}

TEST_CASE("terminal slopes") {
    const ModelSpec lg = harvest_log(1.0, 0.0, LevyModel{}, ControlBounds{});
    const TerminalSlope s1 = terminal_slope(lg, X, 2.0, 1.0);
    CHECK(s1.dg_dy == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(s1.dg_dybar == 0.0);
    CHECK_THROWS_AS(terminal_slope(lg, X, -1.0, 0.0), std::domain_error);

    const ModelSpec pw = harvest_power(1.0, 0.0, 0.5,
                                       [](std::array<double, 2>) { return 3.0; },
                                       LevyModel{}, ControlBounds{});
    const TerminalSlope s2 = terminal_slope(pw, X, -1.0, 0.0);  // no sign constraint
    CHECK(s2.dg_dy == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("power preset parameter range") {
    auto mu = [](std::array<double, 2>) { return 1.0; };
    CHECK_THROWS_AS(harvest_power(1.0, 0.0, 0.0, mu, LevyModel{}, ControlBounds{}),
                    std::invalid_argument);
    CHECK_THROWS_AS(harvest_power(1.0, 0.0, 1.0, mu, LevyModel{}, ControlBounds{}),
                    std::invalid_argument);
    const ModelSpec pw = harvest_power(1.0, 0.0, 0.5, mu, LevyModel{}, ControlBounds{});
    HamiltonianInputs in;
    in.u = 4.0;
    CHECK(hamiltonian(pw, 0.0, X, in) == doctest::Approx(2.0 / 0.5).epsilon(1e-13));
    CHECK(dH_du(pw, 0.0, X, in) == doctest::Approx(0.5).epsilon(1e-13));
}

TEST_CASE("finite-difference check of the slope channels") {
    const ModelSpec specs[] = {
        harvest_log(0.7, 0.3, jump_model(), ControlBounds{}),
        harvest_power(0.7, 0.3, 0.6, [](std::array<double, 2> x) { return 1.0 + x[0]; },
                      jump_model(), ControlBounds{}),
        custom_linear({.b0 = 1, .by = 0.5, .bybar = -0.2, .bu = 0.3,
                       .s0 = 0.1, .sy = 0.2, .sybar = 0.3, .su = 0.4,
                       .c0 = 0.1, .cy = -0.1, .cybar = 0.2, .cu = 0.05,
                       .f0 = 1, .fy = 2, .fu = -1, .fuu = -0.5, .gy = 1},
                      jump_model(), ControlBounds{}),
    };
    const double eps = 1e-5;
    for (const ModelSpec& spec : specs) {
        HamiltonianInputs in;
        in.y = 1.3;
        in.ybar = 0.8;
        in.u = 2.0;
        in.p = 0.4;
        in.q = -0.6;
        in.c_r = 0.2;
        auto h_at = [&](double y, double yb, double u) {
            HamiltonianInputs t = in;
            t.y = y;
            t.ybar = yb;
            t.u = u;
            return hamiltonian(spec, 0.1, X, t);
        };
        const double fd_u =
            (h_at(in.y, in.ybar, in.u + eps) - h_at(in.y, in.ybar, in.u - eps)) / (2 * eps);
        const double fd_y =
            (h_at(in.y + eps, in.ybar, in.u) - h_at(in.y - eps, in.ybar, in.u)) / (2 * eps);
        const double fd_yb =
            (h_at(in.y, in.ybar + eps, in.u) - h_at(in.y, in.ybar - eps, in.u)) / (2 * eps);
        CHECK(dH_du(spec, 0.1, X, in) == doctest::Approx(fd_u).epsilon(1e-7));
        CHECK(dH_dy(spec, 0.1, X, in) == doctest::Approx(fd_y).epsilon(1e-7));
        CHECK(dH_dybar(spec, 0.1, X, in) == doctest::Approx(fd_yb).epsilon(1e-7));
    }
}

TEST_CASE("concavity probes") {
    const ModelSpec lg = harvest_log(1.0, 0.5, jump_model(), ControlBounds{});
    const ConcavityReport ok = check_concavity(lg, 500, 3);
    CHECK(ok.samples == 500);
    CHECK(ok.worst_violation <= 1e-12);

    // f quadratic in u with positive curvature breaks midpoint concavity
    CustomCoeffs convex;
    convex.fuu = 1.0;
    const ModelSpec bad = custom_linear(convex, LevyModel{}, ControlBounds{});
    CHECK(check_concavity(bad, 500, 3).worst_violation > 1e-6);

    CHECK_THROWS_AS(check_concavity(lg, 1, 3), std::invalid_argument);
}
