#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "smspde/backward.hpp"
#include "smspde/control_field.hpp"
#include "smspde/forward.hpp"
#include "smspde/grid.hpp"
#include "smspde/model.hpp"
#include "smspde/operators.hpp"
#include "smspde/spacemean.hpp"

namespace smspde {

/// One control problem instance: dynamics, discretization, and noise
/// sampling parameters. Referenced objects must outlive the Problem.
struct Problem {
    const Grid* grid = nullptr;
    const ModelSpec* spec = nullptr;
    const EllipticOperator* op_forward = nullptr;
    const EllipticOperator* op_adjoint = nullptr;
    const BallKernel* kernel = nullptr;
    Field xi;  // initial state
    BoundaryData eta = [](double, std::array<double, 2>) { return 0.0; };
    double T = 1.0;
    int M = 100;
    int paths = 1;
    std::uint64_t master_seed = 1234;
    DualMode dual_mode = DualMode::exact;

    explicit Problem(const Grid& g) : grid(&g), xi(g) {}
};

/// Monte Carlo value of the performance functional: per retained path,
/// the accumulated running-cost quadrature plus the terminal-cost grid
/// quadrature; throws if every path was rejected.
double eval_J(const ModelSpec& spec, const ForwardEnsemble& ensemble, const BallKernel& kernel);

/// Pointwise stationary control from the adjoint frames (steps+1 of them):
/// 1/p for the log preset, p^{1/(rho-1)} for the power preset, both
/// projected onto U; the custom preset takes one projected-gradient step
/// from `current` with step size `grad_step`. q/cr frames may be null
/// (treated as zero).
ControlField update_pointwise(const ModelSpec& spec, const Grid& grid, double T,
                              const std::vector<Field>& p,
                              const std::vector<Field>* q = nullptr,
                              const std::vector<Field>* cr = nullptr,
                              const ControlField* current = nullptr, double grad_step = 0.5);

/// Time-only control from the averaged stationarity condition
/// integral over D of dH/du dx = 0: closed forms for the presets,
/// scalar bisection on the integral for the custom preset.
ControlField update_xfree(const ModelSpec& spec, const Grid& grid, double T,
                          const std::vector<Field>& p,
                          const std::vector<Field>* q = nullptr,
                          const std::vector<Field>* cr = nullptr);

/// Single constant control from stationarity aggregated over time and
/// space (left-point in time over the first `steps` frames).
ControlField update_constant(const ModelSpec& spec, const Grid& grid, double T,
                             const std::vector<Field>& p,
                             const std::vector<Field>* q = nullptr,
                             const std::vector<Field>* cr = nullptr);

/// Stationarity residual of u against the adjoint frames: sup over
/// interior (t, x) of |dH/du| for pointwise controls, max over t of
/// |integral over D of dH/du dx| for x-free/constant controls. State
/// arguments (y, ybar) are taken from the ensemble mean.
double stationarity_residual(const ModelSpec& spec, const ForwardEnsemble& forward,
                             const BallKernel& kernel, const ControlField& u,
                             const std::vector<Field>& p, const std::vector<Field>* q = nullptr,
                             const std::vector<Field>* cr = nullptr);

struct OptimizeOptions {
    int max_iters = 50;
    double tol = 1e-7;
    double omega = 0.5;  // relaxation weight on the new control
    RegressionOptions regression;
};

struct OptimizerReport {
    int iterations = 0;
    std::vector<double> J_trace;
    double residual = 0.0;
    bool converged = false;
    bool diverged = false;  // non-finite J encountered
    std::string mode;       // "pointwise" | "xfree" | "constant"
};

/// Damped fixed-point loop: forward solve -> adjoint solve -> control
/// update, relaxed with weight omega and projected onto U, using common
/// random numbers across iterations. The control mode of u0 selects the
/// update rule.
std::pair<ControlField, OptimizerReport> optimize(const Problem& prob, const ControlField& u0,
                                                  const OptimizeOptions& opts = {});

struct DerivativeCheck {
    double theta = 0.0;
    double finite_difference = 0.0;  // (J(u + theta d) - J(u)) / theta
    double hamiltonian_form = 0.0;   // E[ integral of dH/du * d ]
    double z_form = 0.0;             // chain rule through the derivative process
    double max_pairwise_gap = 0.0;   // max relative gap between the three
};

/// Three independent routes to the directional derivative of J at u_hat
/// in the given direction, one entry per theta (the two analytic forms
/// do not depend on theta and are repeated for convenience).
std::vector<DerivativeCheck> directional_derivative_check(const Problem& prob,
                                                          const ControlField& u_hat,
                                                          const ControlField& direction,
                                                          const std::vector<double>& thetas);

struct OracleResult {
    double best_value = 0.0;
    double best_J = 0.0;
    std::vector<double> values;
    std::vector<double> J;
};

/// Exhaustive scan of constant-in-(t,x) controls with common random
/// numbers; returns the argmax and the full scan.
OracleResult brute_force_constant_oracle(const Problem& prob, const std::vector<double>& values);

}  // namespace smspde
