#pragma once

#include <array>
#include <vector>

#include "smspde/grid.hpp"

namespace smspde {

/// Discrete space-averaging kernel over the ball of radius theta.
///
/// The stencil keeps every index offset whose physical displacement lies
/// strictly inside the ball; each kept neighbor carries the uniform weight
/// cell_volume / V(K_theta). Neighbors falling outside the closed box are
/// dropped at application time, which realizes the zero-extension
/// convention (no renormalization near the boundary).
struct BallKernel {
    const Grid* grid = nullptr;
    double theta = 0.0;
    double ball_volume = 0.0;  // 2*theta in 1D, pi*theta^2 in 2D
    double weight = 0.0;       // cell_volume / ball_volume
    std::vector<std::array<int, 2>> offsets;  // includes the center offset
};

BallKernel build_kernel(const Grid& grid, double theta);

/// Space mean: out(x) = sum over stencil of weight * f(x + offset),
/// zero contribution outside the closed box.
Field apply_G(const Field& f, const BallKernel& k);

/// Exact transpose of apply_G's node-weight table.
Field apply_G_dual(const Field& psi, const BallKernel& k);

/// Coverage fraction v_D(x) = V((x + K_theta) ∩ D) / V(K_theta).
/// Analytic in 1D; deterministic midpoint sampling of the disc in 2D
/// (nodes farther than theta from the boundary short-circuit to 1).
Field coverage_vD(const Grid& grid, double theta);

enum class DualMode { exact, coverage_pointwise };

/// Row-integrated dual of the averaging channel applied to a pointwise
/// slope field c. `exact` integrates c over (x + K_theta) ∩ D (identical
/// node-weight table to apply_G_dual); `coverage_pointwise` returns
/// v_D(x) * c(x). `coverage` may be null; it is computed on demand.
Field averaged_dual(const Field& c, const BallKernel& k, DualMode mode,
                    const Field* coverage = nullptr);

namespace ref {

/// Brute-force double-sum reference for apply_G; serial, used by tests
/// and the benchmark as the independent route.
Field apply_G(const Field& f, const BallKernel& k);

/// Explicit transpose reference built from apply_G's row table.
Field apply_G_dual(const Field& psi, const BallKernel& k);

}  // namespace ref

}  // namespace smspde
