#pragma once

#include <functional>
#include <vector>

#include "smspde/control_field.hpp"
#include "smspde/grid.hpp"
#include "smspde/model.hpp"
#include "smspde/noise.hpp"
#include "smspde/operators.hpp"
#include "smspde/spacemean.hpp"

namespace smspde {

/// Dirichlet boundary data eta(t, x).
using BoundaryData = std::function<double(double, std::array<double, 2>)>;

struct ForwardOptions {
    bool store_trajectories = true;
};

/// Monte Carlo ensemble of forward trajectories, with the running-cost
/// integral accumulated during stepping so J evaluation never needs the
/// full trajectory.
struct ForwardEnsemble {
    const Grid* grid = nullptr;
    double T = 0.0;
    int M = 0;
    std::vector<std::vector<Field>> Y;  // [path][time]; empty if not stored
    std::vector<Field> terminal;        // [path]
    std::vector<double> running_cost;   // per-path grid/time quadrature of f
    std::vector<char> rejected;         // terminal outside S
    std::vector<PathBundle> bundles;

    int paths() const { return static_cast<int>(terminal.size()); }
    double dt() const { return T / M; }
};

/// Semi-implicit (IMEX) stepping of the space-mean SPDE: the elliptic part
/// is implicit with one shared factorization, reaction/noise/nonlocal
/// terms explicit, boundary rows overwritten with eta each step.
ForwardEnsemble solve_forward(const Grid& grid, const EllipticOperator& op,
                              const BallKernel& kernel, const ModelSpec& spec,
                              const ControlField& u, const Field& xi,
                              const BoundaryData& eta,
                              std::vector<PathBundle> bundles, int M, double T,
                              const ForwardOptions& opts = {});

/// Linearized stepping of the derivative process in a control direction,
/// reusing the base ensemble's noise and trajectories. Z(0) = 0 and Z = 0
/// on the boundary.
ForwardEnsemble solve_derivative_Z(const Grid& grid, const EllipticOperator& op,
                                   const BallKernel& kernel, const ModelSpec& spec,
                                   const ControlField& u_hat, const ControlField& direction,
                                   const ForwardEnsemble& base,
                                   const ForwardOptions& opts = {});

}  // namespace smspde
