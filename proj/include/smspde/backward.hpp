#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "smspde/forward.hpp"
#include "smspde/grid.hpp"
#include "smspde/model.hpp"
#include "smspde/operators.hpp"
#include "smspde/spacemean.hpp"

namespace smspde {

/// Adjoint processes on the time grid, single (deterministic) trajectory.
/// The jump component is carried as the coefficient field c_r in
/// r(t,x,zeta) = c_r(t,x) * gamma0(zeta).
struct AdjointTriple {
    double T = 0.0;
    int M = 0;
    std::vector<Field> p, q, cr;  // M + 1 frames each

    double dt() const { return T / M; }
};

/// Driver arguments at one time level: the triple and its space means.
struct DriverArgs {
    double t = 0.0;
    const Field* p = nullptr;
    const Field* pbar = nullptr;
    const Field* q = nullptr;
    const Field* qbar = nullptr;
    const Field* cr = nullptr;
    const Field* crbar = nullptr;
};

using Driver = std::function<Field(const DriverArgs&)>;

/// Backward semi-implicit stepping of dp = -[A* p + F] dt in the
/// zero-noise regime (q = c_r = 0 consistently): the elliptic part is
/// implicit at the new (earlier) level, the driver explicit at the known
/// later level, boundary rows clamped to 0 for t < T.
AdjointTriple solve_bspde_deterministic(const Grid& grid, const EllipticOperator& op_adjoint,
                                        const BallKernel& kernel, const Driver& driver,
                                        const Field& terminal, int M, double T);

/// Per-path adjoint ensemble from the regression solver.
struct AdjointEnsemble {
    double T = 0.0;
    int M = 0;
    std::vector<std::vector<Field>> p, q, cr;  // [path][time]
    std::vector<Field> p_mean, q_mean, cr_mean;
    int regression_fallbacks = 0;  // nodes that fell back to the ensemble mean

    double dt() const { return T / M; }
    int paths() const { return static_cast<int>(p.size()); }
};

/// Source term for the regression sweep, evaluated per path at time index
/// m from the predictable estimates at t_m.
using EnsembleSource =
    std::function<Field(int path, int m, const Field& p_pred, const Field& q, const Field& cr)>;

struct RegressionOptions {
    int min_paths = 500;
    bool allow_few_paths = false;  // tests use small ensembles
};

/// Least-squares regression solver for the backward SPDE on a simulated
/// forward ensemble: conditional expectations are per-node projections on
/// degree-<=2 polynomials in (Y, Ybar); q and c_r come from centered
/// covariation regressions against the Brownian and compensated jump
/// increments.
AdjointEnsemble solve_bspde_regression(const Grid& grid, const EllipticOperator& op_adjoint,
                                       const BallKernel& kernel, const ModelSpec& spec,
                                       const ForwardEnsemble& forward,
                                       const std::vector<Field>& terminal,
                                       const EnsembleSource& source,
                                       const RegressionOptions& opts = {});

/// Adjoint source for a model along its forward ensemble:
/// dH/dy + averaged dual of the dH/dybar slope (exact or pointwise mode).
EnsembleSource make_model_source(const ModelSpec& spec, const ForwardEnsemble& forward,
                                 const ControlField& u, const BallKernel& kernel,
                                 DualMode mode, const Field& coverage);

/// Terminal slope fields per path from the model's terminal cost.
std::vector<Field> terminal_fields(const ModelSpec& spec, const ForwardEnsemble& forward,
                                   const BallKernel& kernel);

struct PicardOptions {
    int n_max = 50;
    double tol = 1e-8;
};

struct PicardTrace {
    std::vector<double> dp, dq, dr;  // time-integrated H-norm differences
    std::vector<double> ratio;       // successive total-difference ratios
    bool converged = false;
    int iterations = 0;
};

/// Explicit Picard iteration on the deterministic backward equation: each
/// iterate solves the linear equation with every driver argument frozen
/// at the previous iterate.
std::pair<AdjointTriple, PicardTrace> picard_solve(
    const Grid& grid, const EllipticOperator& op_adjoint, const BallKernel& kernel,
    const Driver& driver, const Field& terminal, int M, double T,
    const PicardOptions& opts, const AdjointTriple* initial = nullptr);

/// Driver for the ensemble Picard iteration, evaluated per path at one
/// time level of the frozen previous iterate.
using EnsembleDriver = std::function<Field(int path, int m, const DriverArgs&)>;

/// Picard iteration with the regression solver as the inner linear solve,
/// on a fixed forward ensemble (common random numbers across iterates).
/// This is the route that exercises qbar/rbar driver dependence.
std::pair<AdjointEnsemble, PicardTrace> picard_solve_ensemble(
    const Grid& grid, const EllipticOperator& op_adjoint, const BallKernel& kernel,
    const EnsembleDriver& driver, const ForwardEnsemble& forward,
    const LevyModel& levy, const std::vector<Field>& terminal, const PicardOptions& opts,
    const RegressionOptions& reg_opts = {}, const Field* initial_p = nullptr);

}  // namespace smspde
