#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "helpers.hpp"
#include "smspde/control.hpp"

using namespace smspde;

namespace {

const BoundaryData one_eta = [](double, std::array<double, 2>) { return 1.0; };

struct HarvestDesk {
    Grid grid;
    BallKernel kernel;
    EllipticOperator op_forward;
    EllipticOperator op_adjoint;
    ModelSpec spec;

    HarvestDesk()
        : grid(build_grid(0.0, 1.0, 41)),
          kernel(build_kernel(grid, 0.1)),
          op_forward(laplacian_operator(grid, 0.5)),
          op_adjoint(laplacian_operator(grid, 0.5, true)),
          spec(harvest_log(0.2, 0.0, LevyModel{}, ControlBounds{})) {}

    Problem problem(int M = 40) const {
        Problem prob(grid);
        prob.spec = &spec;
        prob.op_forward = &op_forward;
        prob.op_adjoint = &op_adjoint;
        prob.kernel = &kernel;
        prob.xi = Field(grid, 1.0);
        prob.eta = one_eta;
        prob.M = M;
        return prob;
    }
};

std::vector<Field> frames(const Grid& g, int steps, const Field& f) {
    return std::vector<Field>(static_cast<std::size_t>(steps + 1), f);
}

}  // namespace

TEST_CASE("performance functional: exact terminal quadrature") {
    const Grid g = build_grid(0.0, 1.0, 41);
    const BallKernel k = build_kernel(g, 0.1);
    CustomCoeffs c;
    c.gy = 2.0;
    const ModelSpec spec = custom_linear(c, LevyModel{}, ControlBounds{});
    ForwardEnsemble ens;
    ens.grid = &g;
    ens.T = 1.0;
    ens.M = 1;
    Field lin(g);
    for (int n = 0; n < g.num_nodes(); ++n) lin[n] = 1.0 + g.coord(n)[0];
    ens.terminal = {lin};
    ens.running_cost = {0.25};
    ens.rejected = {0};
    // J = 0.25 + integral of 2 (1 + x) = 0.25 + 3, exact for linear data
    CHECK(eval_J(spec, ens, k) == doctest::Approx(3.25).epsilon(1e-13));
}

TEST_CASE("performance functional: rejected paths are dropped") {
    const Grid g = build_grid(0.0, 1.0, 21);
    const BallKernel k = build_kernel(g, 0.1);
    CustomCoeffs c;
    c.gy = 1.0;
    const ModelSpec spec = custom_linear(c, LevyModel{}, ControlBounds{});
    ForwardEnsemble ens;
    ens.grid = &g;
    ens.T = 1.0;
    ens.M = 1;
    ens.terminal = {Field(g, 1.0), Field(g, 100.0)};
    ens.running_cost = {0.5, 99.0};
    ens.rejected = {0, 1};
    CHECK(eval_J(spec, ens, k) == doctest::Approx(1.5).epsilon(1e-13));
    ens.rejected = {1, 1};
    CHECK_THROWS_AS(eval_J(spec, ens, k), std::runtime_error);
}

TEST_CASE("performance functional agrees with a manual path average") {
    const Grid g = build_grid(0.0, 1.0, 31);
    const BallKernel k = build_kernel(g, 0.1);
    CustomCoeffs c;
    c.s0 = 0.5;
    c.gy = 1.0;
    c.f0 = 0.2;
    const ModelSpec spec = custom_linear(c, LevyModel{}, ControlBounds{});
    const int M = 10, P = 8;
    const ControlField u = ControlField::constant_control(g, M, 1.0, 1.0);
    auto ens = solve_forward(g, laplacian_operator(g, 0.5), k, spec, u, Field(g, 1.0),
                             one_eta, sample_paths(M, 1.0, spec.levy, P, 3), M, 1.0);
    double manual = 0.0;
    for (int p = 0; p < P; ++p) {
        double Jp = ens.running_cost[p];
        for (int n = 0; n < g.num_nodes(); ++n)
            Jp += quad_weight(g, n) * ens.terminal[p][n];
        manual += Jp / P;
    }
    CHECK(eval_J(spec, ens, k) == doctest::Approx(manual).epsilon(1e-13));
}

TEST_CASE("pointwise update closed forms") {
    const Grid g = build_grid(0.0, 1.0, 21);
    const ModelSpec lg = harvest_log(0.2, 0.0, LevyModel{}, ControlBounds{});

    Field p(g, 0.01);
    const ControlField u = update_pointwise(lg, g, 1.0, frames(g, 4, p));
    CHECK(u.mode() == ControlMode::pointwise);
    CHECK(u.at(2, 10) == doctest::Approx(100.0).epsilon(1e-14));

    // tiny adjoint projects onto the upper bound
    Field small(g, 1e-5);
    CHECK(update_pointwise(lg, g, 1.0, frames(g, 4, small)).at(0, 10) ==
          doctest::Approx(1000.0).epsilon(1e-14));

    // p = 0 on the boundary is the normal adjoint situation
    Field mixed(g, 2.0);
    mixed[0] = 0.0;
    mixed[20] = 0.0;
    const ControlField um = update_pointwise(lg, g, 1.0, frames(g, 4, mixed));
    CHECK(um.at(0, 10) == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(um.at(0, 0) == doctest::Approx(1000.0).epsilon(1e-14));

    // nonpositive adjoint in the interior is a hard error
    Field neg(g, 2.0);
    neg[10] = -1.0;
    CHECK_THROWS_AS(update_pointwise(lg, g, 1.0, frames(g, 4, neg)), std::domain_error);

    const ModelSpec pw = harvest_power(0.2, 0.0, 0.5,
                                       [](std::array<double, 2>) { return 1.0; },
                                       LevyModel{}, ControlBounds{});
    // u = p^(1/(rho-1)) = p^-2
    CHECK(update_pointwise(pw, g, 1.0, frames(g, 4, Field(g, 2.0))).at(1, 5) ==
          doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("custom model takes a projected gradient step") {
    const Grid g = build_grid(0.0, 1.0, 21);
    CustomCoeffs c;
    c.fu = -1.0;
    c.bu = 0.5;
    const ModelSpec spec = custom_linear(c, LevyModel{}, ControlBounds{});
    const auto p = frames(g, 4, Field(g, 4.0));
    CHECK_THROWS_AS(update_pointwise(spec, g, 1.0, p), std::invalid_argument);

    const ControlField cur = ControlField::constant_control(g, 4, 1.0, 2.0);
    const ControlField next = update_pointwise(spec, g, 1.0, p, nullptr, nullptr, &cur, 0.5);
    // u + 0.5 * (fu + bu * p) = 2 + 0.5 * (-1 + 2)
    CHECK(next.at(0, 10) == doctest::Approx(2.5).epsilon(1e-14));
}

TEST_CASE("x-free and constant updates use the integrated condition") {
    const Grid g = build_grid(0.0, 1.0, 101);
    const ModelSpec lg = harvest_log(0.2, 0.0, LevyModel{}, ControlBounds{});
    Field p(g);
    for (int n = 0; n < g.num_nodes(); ++n) p[n] = 1.0 + g.coord(n)[0];
    // integral of (1 + x) over (0,1) is exactly 3/2
    const ControlField ux = update_xfree(lg, g, 1.0, frames(g, 4, p));
    CHECK(ux.mode() == ControlMode::xfree);
    CHECK(ux.at(2, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-13));

    const ModelSpec pw = harvest_power(0.2, 0.0, 0.5,
                                       [](std::array<double, 2>) { return 1.0; },
                                       LevyModel{}, ControlBounds{});
    CHECK(update_xfree(pw, g, 1.0, frames(g, 4, p)).at(0, 0) ==
          doctest::Approx(4.0 / 9.0).epsilon(1e-13));

    const ControlField uc = update_constant(lg, g, 1.0, frames(g, 4, Field(g, 2.5)));
    CHECK(uc.mode() == ControlMode::constant);
    CHECK(uc.constant_value() == doctest::Approx(0.4).epsilon(1e-13));

    // a spatially flat adjoint on the unit interval makes the pointwise and
    // x-free rules coincide
    const ControlField up = update_pointwise(lg, g, 1.0, frames(g, 4, Field(g, 2.5)));
    const ControlField uxf = update_xfree(lg, g, 1.0, frames(g, 4, Field(g, 2.5)));
    CHECK(up.at(1, 50) == doctest::Approx(uxf.at(1, 0)).epsilon(1e-12));
}

TEST_CASE("stationarity residual vanishes at the closed-form update") {
    const HarvestDesk desk;
    const int M = 20;
    const ControlField u0 = ControlField::constant_control(desk.grid, M, 1.0, 1.0);
    auto fwd = solve_forward(desk.grid, desk.op_forward, desk.kernel, desk.spec, u0,
                             Field(desk.grid, 1.0), one_eta,
                             sample_paths(M, 1.0, desk.spec.levy, 1, 1), M, 1.0);

    const auto p = frames(desk.grid, M, Field(desk.grid, 0.5));
    const ControlField star = update_pointwise(desk.spec, desk.grid, 1.0, p);
    CHECK(stationarity_residual(desk.spec, fwd, desk.kernel, star, p) < 1e-12);

    const ControlField star_x = update_xfree(desk.spec, desk.grid, 1.0, p);
    CHECK(stationarity_residual(desk.spec, fwd, desk.kernel, star_x, p) < 1e-10);

    // an off-stationary control shows a finite residual
    const ControlField off = ControlField::constant_control(desk.grid, M, 1.0, 1.0);
    CHECK(stationarity_residual(desk.spec, fwd, desk.kernel, off, p) ==
          doctest::Approx(0.5).epsilon(1e-12));  // |1/u - p| = |1 - 0.5|
}

TEST_CASE("optimizer: iteration cap and bookkeeping") {
    const HarvestDesk desk;
    const Problem prob = desk.problem();
    const ControlField u0 = ControlField::constant_control(desk.grid, prob.M, prob.T, 1.0);
    const auto [u, report] = optimize(prob, u0, {.max_iters = 1});
    CHECK(report.iterations == 1);
    CHECK(report.J_trace.size() == 1);
    CHECK(!report.converged);
    CHECK(report.mode == "constant");
}

TEST_CASE("optimizer: fixed point of the pointwise rule") {
    const HarvestDesk desk;
    const Problem prob = desk.problem();
    std::vector<Field> u0(prob.M + 1, Field(desk.grid, 1.0));
    const ControlField init = ControlField::pointwise(desk.grid, prob.M, prob.T, std::move(u0));
    const auto [u, report] = optimize(prob, init, {.max_iters = 60, .tol = 1e-7});
    CHECK(report.converged);
    CHECK(report.residual < 1e-7);
    CHECK(report.mode == "pointwise");
    CHECK(report.J_trace.back() > report.J_trace.front());
    // interior harvesting rates stay inside the box
    CHECK(u.at(prob.M / 2, 20) > 1e-3);
    CHECK(u.at(prob.M / 2, 20) < 1e3);
}

TEST_CASE("optimizer: constant mode improves the value") {
    const HarvestDesk desk;
    const Problem prob = desk.problem();
    const ControlField u0 = ControlField::constant_control(desk.grid, prob.M, prob.T, 0.3);
    const auto [u, report] = optimize(prob, u0, {.max_iters = 8});
    CHECK(!report.diverged);
    CHECK(report.J_trace.back() > report.J_trace.front());
    CHECK(u.constant_value() > 0.3);
}

TEST_CASE("three derivative routes agree") {
    const HarvestDesk desk;
    const Problem prob = desk.problem();
    const ControlField u_hat = ControlField::constant_control(desk.grid, prob.M, prob.T, 2.0);
    const ControlField dir = ControlField::constant_control(desk.grid, prob.M, prob.T, 1.0);

    const auto checks = directional_derivative_check(prob, u_hat, dir, {1e-2, 1e-3});
    REQUIRE(checks.size() == 2);
    for (const auto& c : checks) {
        CHECK(std::isfinite(c.finite_difference));
        CHECK(c.hamiltonian_form == doctest::Approx(checks[0].hamiltonian_form));
        CHECK(c.z_form == doctest::Approx(c.hamiltonian_form).epsilon(0.05));
    }
    CHECK(checks[1].max_pairwise_gap < 0.05);

    // zero direction: all routes are exactly zero
    const ControlField nil = ControlField::constant_control(desk.grid, prob.M, prob.T, 0.0);
    const auto zero = directional_derivative_check(prob, u_hat, nil, {1e-3});
    CHECK(zero[0].finite_difference == 0.0);
    CHECK(zero[0].hamiltonian_form == 0.0);
    CHECK(zero[0].z_form == 0.0);

    // stepping outside the admissible box is refused
    const ControlField low = ControlField::constant_control(desk.grid, prob.M, prob.T, 1e-3);
    const ControlField down = ControlField::constant_control(desk.grid, prob.M, prob.T, -1.0);
    CHECK_THROWS_AS(directional_derivative_check(prob, low, down, {1e-3}),
                    std::invalid_argument);
}

TEST_CASE("constant-control scan") {
    const HarvestDesk desk;
    const Problem prob = desk.problem();

    const auto single = brute_force_constant_oracle(prob, {1.5});
    CHECK(single.best_value == 1.5);
    CHECK(single.values.size() == 1);
    CHECK(single.best_J == single.J[0]);

    const auto scan = brute_force_constant_oracle(prob, {0.5, 1.0, 2.0, 3.0, 5.0});
    for (double J : scan.J) CHECK(scan.best_J >= J);
    CHECK(std::isfinite(scan.best_J));
    // the value climbs away from weak harvesting before declining again
    CHECK(scan.J[1] > scan.J[0]);

    CHECK_THROWS_AS(brute_force_constant_oracle(prob, {}), std::invalid_argument);
    CHECK_THROWS_AS(brute_force_constant_oracle(prob, {1e4}), std::invalid_argument);
}
