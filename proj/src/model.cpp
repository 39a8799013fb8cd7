#include "smspde/model.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace smspde {

namespace {

void check_control(const ModelSpec& spec, double u) {
    if (!spec.U.contains(u)) throw std::domain_error(spec.name + ": control outside U");
    if (spec.kind == PresetKind::harvest_log && u <= 0.0)
        throw std::domain_error("harvest-log: log(u) undefined for u <= 0");
}

}  // namespace

ModelSpec harvest_log(double alpha, double beta, LevyModel levy, ControlBounds U) {
    ModelSpec s;
    s.name = "harvest-log";
    s.kind = PresetKind::harvest_log;
    s.alpha = alpha;
    s.beta = beta;
    s.U = U;
    s.levy = std::move(levy);
    s.moments = levy_moments(s.levy);
    s.positive_state = true;
    s.concave_asserted = true;

    s.b = {[alpha](double, std::array<double, 2>, double, double yb, double u) { return alpha * yb - u; },
           [](double, std::array<double, 2>, double, double, double) { return 0.0; },
           [alpha](double, std::array<double, 2>, double, double, double) { return alpha; },
           [](double, std::array<double, 2>, double, double, double) { return -1.0; }};
    s.sigma = {[beta](double, std::array<double, 2>, double, double yb, double) { return beta * yb; },
               [](double, std::array<double, 2>, double, double, double) { return 0.0; },
               [beta](double, std::array<double, 2>, double, double, double) { return beta; },
               [](double, std::array<double, 2>, double, double, double) { return 0.0; }};
    s.gamma_core = {[](double, std::array<double, 2>, double, double yb, double) { return yb; },
                    [](double, std::array<double, 2>, double, double, double) { return 0.0; },
                    [](double, std::array<double, 2>, double, double, double) { return 1.0; },
                    [](double, std::array<double, 2>, double, double, double) { return 0.0; }};
    s.f = {[](double, std::array<double, 2>, double, double, double u) { return std::log(u); },
           [](double, std::array<double, 2>, double, double, double) { return 0.0; },
           [](double, std::array<double, 2>, double, double, double) { return 0.0; },
           [](double, std::array<double, 2>, double, double, double u) { return 1.0 / u; }};
    s.g = {[](std::array<double, 2>, double y, double) { return std::log(y); },
           [](std::array<double, 2>, double y, double) { return 1.0 / y; },
           [](std::array<double, 2>, double, double) { return 0.0; }};
    return s;
}

ModelSpec harvest_power(double alpha, double beta, double rho,
                        std::function<double(std::array<double, 2>)> mu,
                        LevyModel levy, ControlBounds U) {
    if (!(rho > 0.0 && rho < 1.0))
        throw std::invalid_argument("harvest-power: rho must lie in (0,1)");
    ModelSpec s = harvest_log(alpha, beta, std::move(levy), U);
    s.name = "harvest-power";
    s.kind = PresetKind::harvest_power;
    s.rho = rho;
    s.mu = std::move(mu);
    s.positive_state = false;  // linear terminal cost needs no sign constraint
    s.f = {[rho](double, std::array<double, 2>, double, double, double u) { return std::pow(u, rho) / rho; },
           [](double, std::array<double, 2>, double, double, double) { return 0.0; },
           [](double, std::array<double, 2>, double, double, double) { return 0.0; },
           [rho](double, std::array<double, 2>, double, double, double u) { return std::pow(u, rho - 1.0); }};
    auto muf = s.mu;
    s.g = {[muf](std::array<double, 2> x, double y, double) { return muf(x) * y; },
           [muf](std::array<double, 2> x, double, double) { return muf(x); },
           [](std::array<double, 2>, double, double) { return 0.0; }};
    return s;
}

ModelSpec custom_linear(const CustomCoeffs& c, LevyModel levy, ControlBounds U) {
    ModelSpec s;
    s.name = "custom-linear";
    s.kind = PresetKind::custom_linear;
    s.U = U;
    s.levy = std::move(levy);
    s.moments = levy_moments(s.levy);
    s.b = {[c](double, std::array<double, 2>, double y, double yb, double u) {
               return c.b0 + c.by * y + c.bybar * yb + c.bu * u;
           },
           [c](double, std::array<double, 2>, double, double, double) { return c.by; },
           [c](double, std::array<double, 2>, double, double, double) { return c.bybar; },
           [c](double, std::array<double, 2>, double, double, double) { return c.bu; }};
    s.sigma = {[c](double, std::array<double, 2>, double y, double yb, double u) {
                   return c.s0 + c.sy * y + c.sybar * yb + c.su * u;
               },
               [c](double, std::array<double, 2>, double, double, double) { return c.sy; },
               [c](double, std::array<double, 2>, double, double, double) { return c.sybar; },
               [c](double, std::array<double, 2>, double, double, double) { return c.su; }};
    s.gamma_core = {[c](double, std::array<double, 2>, double y, double yb, double u) {
                        return c.c0 + c.cy * y + c.cybar * yb + c.cu * u;
                    },
                    [c](double, std::array<double, 2>, double, double, double) { return c.cy; },
                    [c](double, std::array<double, 2>, double, double, double) { return c.cybar; },
                    [c](double, std::array<double, 2>, double, double, double) { return c.cu; }};
    s.f = {[c](double, std::array<double, 2>, double y, double, double u) {
               return c.f0 + c.fy * y + c.fu * u + c.fuu * u * u;
           },
           [c](double, std::array<double, 2>, double, double, double) { return c.fy; },
           [](double, std::array<double, 2>, double, double, double) { return 0.0; },
           [c](double, std::array<double, 2>, double, double, double u) { return c.fu + 2.0 * c.fuu * u; }};
    s.g = {[c](std::array<double, 2>, double y, double) { return c.gy * y; },
           [c](std::array<double, 2>, double, double) { return c.gy; },
           [](std::array<double, 2>, double, double) { return 0.0; }};
    return s;
}

double hamiltonian(const ModelSpec& spec, double t, std::array<double, 2> x,
                   const HamiltonianInputs& in) {
    check_control(spec, in.u);
    return spec.f.value(t, x, in.y, in.ybar, in.u) +
           spec.b.value(t, x, in.y, in.ybar, in.u) * in.p +
           spec.sigma.value(t, x, in.y, in.ybar, in.u) * in.q +
           spec.gamma_core.value(t, x, in.y, in.ybar, in.u) * in.c_r * spec.moments.m2;
}

double dH_du(const ModelSpec& spec, double t, std::array<double, 2> x,
             const HamiltonianInputs& in) {
    check_control(spec, in.u);
    return spec.f.du(t, x, in.y, in.ybar, in.u) +
           spec.b.du(t, x, in.y, in.ybar, in.u) * in.p +
           spec.sigma.du(t, x, in.y, in.ybar, in.u) * in.q +
           spec.gamma_core.du(t, x, in.y, in.ybar, in.u) * in.c_r * spec.moments.m2;
}

double dH_dy(const ModelSpec& spec, double t, std::array<double, 2> x,
             const HamiltonianInputs& in) {
    return spec.f.dy(t, x, in.y, in.ybar, in.u) +
           spec.b.dy(t, x, in.y, in.ybar, in.u) * in.p +
           spec.sigma.dy(t, x, in.y, in.ybar, in.u) * in.q +
           spec.gamma_core.dy(t, x, in.y, in.ybar, in.u) * in.c_r * spec.moments.m2;
}

double dH_dybar(const ModelSpec& spec, double t, std::array<double, 2> x,
                const HamiltonianInputs& in) {
    return spec.f.dybar(t, x, in.y, in.ybar, in.u) +
           spec.b.dybar(t, x, in.y, in.ybar, in.u) * in.p +
           spec.sigma.dybar(t, x, in.y, in.ybar, in.u) * in.q +
           spec.gamma_core.dybar(t, x, in.y, in.ybar, in.u) * in.c_r * spec.moments.m2;
}

TerminalSlope terminal_slope(const ModelSpec& spec, std::array<double, 2> x,
                             double y, double ybar) {
    if (!spec.state_admissible(y))
        throw std::domain_error(spec.name + ": terminal state outside S");
    return {spec.g.dy(x, y, ybar), spec.g.dybar(x, y, ybar)};
}

ConcavityReport check_concavity(const ModelSpec& spec, int sample_count, std::uint64_t seed) {
    if (sample_count < 2) throw std::invalid_argument("check_concavity: sample_count must be >= 2");
    std::mt19937_64 rng(seed);
    const double ylo = spec.positive_state ? 0.2 : -2.0;
    const double yhi = 5.0;
    const double ulo = spec.U.lo;
    const double uhi = std::min(spec.U.hi, ulo + 10.0);
    std::uniform_real_distribution<double> yd(ylo, yhi), ud(ulo, uhi), pd(-2.0, 2.0);
    const std::array<double, 2> x{0.5, 0.5};

    ConcavityReport rep;
    rep.samples = sample_count;
    for (int k = 0; k < sample_count; ++k) {
        HamiltonianInputs a{yd(rng), yd(rng), ud(rng), pd(rng), pd(rng), pd(rng)};
        HamiltonianInputs b{yd(rng), yd(rng), ud(rng), a.p, a.q, a.c_r};
        HamiltonianInputs mid{0.5 * (a.y + b.y), 0.5 * (a.ybar + b.ybar),
                              0.5 * (a.u + b.u), a.p, a.q, a.c_r};
        const double gap = 0.5 * (hamiltonian(spec, 0.0, x, a) + hamiltonian(spec, 0.0, x, b)) -
                           hamiltonian(spec, 0.0, x, mid);
        rep.worst_violation = std::max(rep.worst_violation, gap);
        const double ggap = 0.5 * (spec.g.value(x, a.y, a.ybar) + spec.g.value(x, b.y, b.ybar)) -
                            spec.g.value(x, mid.y, mid.ybar);
        rep.worst_violation = std::max(rep.worst_violation, ggap);
    }
    return rep;
}

}  // namespace smspde
