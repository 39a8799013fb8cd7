#include "smspde/forward.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "implicit_solver.hpp"

namespace smspde {

namespace {

void check_finite(const Field& f, int step, const char* what) {
    for (int n = 0; n < f.size(); ++n) {
        if (!std::isfinite(f[n]))
            throw std::runtime_error(std::string(what) + ": non-finite state at step " +
                                     std::to_string(step));
    }
}

}  // namespace

ForwardEnsemble solve_forward(const Grid& grid, const EllipticOperator& op,
                              const BallKernel& kernel, const ModelSpec& spec,
                              const ControlField& u, const Field& xi,
                              const BoundaryData& eta,
                              std::vector<PathBundle> bundles, int M, double T,
                              const ForwardOptions& opts) {
    if (M < 1) throw std::invalid_argument("solve_forward: M must be >= 1");
    const double dt = T / M;
    const int P = static_cast<int>(bundles.size());
    std::vector<double> w(static_cast<std::size_t>(grid.num_nodes()));
    for (int n = 0; n < grid.num_nodes(); ++n)
        w[static_cast<std::size_t>(n)] = quad_weight(grid, n);

    const detail::ImplicitSolver lu(op, dt);

    ForwardEnsemble ens;
    ens.grid = &grid;
    ens.T = T;
    ens.M = M;
    ens.terminal.assign(static_cast<std::size_t>(P), Field(grid));
    ens.running_cost.assign(static_cast<std::size_t>(P), 0.0);
    ens.rejected.assign(static_cast<std::size_t>(P), 0);
    if (opts.store_trajectories)
        ens.Y.assign(static_cast<std::size_t>(P),
                     std::vector<Field>(static_cast<std::size_t>(M + 1), Field(grid)));

    // Exceptions must not escape the parallel region; capture and rethrow.
    std::string error;
#pragma omp parallel for schedule(dynamic, 1)
    for (int p = 0; p < P; ++p) {
      try {
        const PathBundle& bun = bundles[static_cast<std::size_t>(p)];
        Field y = xi;
        double cost = 0.0;
        if (opts.store_trajectories) ens.Y[static_cast<std::size_t>(p)][0] = y;
        for (int m = 0; m < M; ++m) {
            const double t = m * dt;
            const Field ybar = apply_G(y, kernel);
            const double jump = compensated_increment(bun, m, spec.levy, spec.levy.gamma0);
            const double dB = bun.brownian[static_cast<std::size_t>(m)];
            Field rhs(grid);
            for (int n = 0; n < grid.num_nodes(); ++n) {
                const auto x = grid.coord(n);
                const double un = u.at(m, n);
                cost += dt * w[static_cast<std::size_t>(n)] * spec.f.value(t, x, y[n], ybar[n], un);
                if (!grid.is_interior(n)) {
                    rhs[n] = eta((m + 1) * dt, x);
                    continue;
                }
                rhs[n] = y[n] + dt * spec.b.value(t, x, y[n], ybar[n], un) +
                         spec.sigma.value(t, x, y[n], ybar[n], un) * dB +
                         spec.gamma_core.value(t, x, y[n], ybar[n], un) * jump;
            }
            y = lu.solve(rhs);
            check_finite(y, m + 1, "solve_forward");
            if (opts.store_trajectories) ens.Y[static_cast<std::size_t>(p)][m + 1] = y;
        }
        ens.terminal[static_cast<std::size_t>(p)] = y;
        ens.running_cost[static_cast<std::size_t>(p)] = cost;
        if (spec.positive_state) {
            for (int n = 0; n < grid.num_nodes(); ++n) {
                if (y[n] <= 0.0) {
                    ens.rejected[static_cast<std::size_t>(p)] = 1;
                    break;
                }
            }
        }
      } catch (const std::exception& e) {
#pragma omp critical
        if (error.empty()) error = e.what();
      }
    }
    if (!error.empty()) throw std::runtime_error(error);
    ens.bundles = std::move(bundles);
    return ens;
}

ForwardEnsemble solve_derivative_Z(const Grid& grid, const EllipticOperator& op,
                                   const BallKernel& kernel, const ModelSpec& spec,
                                   const ControlField& u_hat, const ControlField& direction,
                                   const ForwardEnsemble& base,
                                   const ForwardOptions& opts) {
    if (base.Y.empty())
        throw std::invalid_argument("solve_derivative_Z: base ensemble lacks trajectories");
    const int M = base.M;
    const double dt = base.dt();
    const int P = base.paths();

    const detail::ImplicitSolver lu(op, dt);

    ForwardEnsemble ens;
    ens.grid = &grid;
    ens.T = base.T;
    ens.M = M;
    ens.terminal.assign(static_cast<std::size_t>(P), Field(grid));
    ens.running_cost.assign(static_cast<std::size_t>(P), 0.0);
    ens.rejected.assign(static_cast<std::size_t>(P), 0);
    if (opts.store_trajectories)
        ens.Y.assign(static_cast<std::size_t>(P),
                     std::vector<Field>(static_cast<std::size_t>(M + 1), Field(grid)));

    std::string error;
#pragma omp parallel for schedule(dynamic, 1)
    for (int p = 0; p < P; ++p) {
      try {
        const PathBundle& bun = base.bundles[static_cast<std::size_t>(p)];
        const auto& ybase = base.Y[static_cast<std::size_t>(p)];
        Field z(grid);
        if (opts.store_trajectories) ens.Y[static_cast<std::size_t>(p)][0] = z;
        for (int m = 0; m < M; ++m) {
            const double t = m * dt;
            const Field& y = ybase[static_cast<std::size_t>(m)];
            const Field ybar = apply_G(y, kernel);
            const Field zbar = apply_G(z, kernel);
            const double jump = compensated_increment(bun, m, spec.levy, spec.levy.gamma0);
            const double dB = bun.brownian[static_cast<std::size_t>(m)];
            Field rhs(grid);
            for (int n = 0; n < grid.num_nodes(); ++n) {
                if (!grid.is_interior(n)) continue;  // Z = 0 on the boundary
                const auto x = grid.coord(n);
                const double un = u_hat.at(m, n);
                const double dn = direction.at(m, n);
                const double drift = spec.b.dy(t, x, y[n], ybar[n], un) * z[n] +
                                     spec.b.dybar(t, x, y[n], ybar[n], un) * zbar[n] +
                                     spec.b.du(t, x, y[n], ybar[n], un) * dn;
                const double diff = spec.sigma.dy(t, x, y[n], ybar[n], un) * z[n] +
                                    spec.sigma.dybar(t, x, y[n], ybar[n], un) * zbar[n] +
                                    spec.sigma.du(t, x, y[n], ybar[n], un) * dn;
                const double jmp = spec.gamma_core.dy(t, x, y[n], ybar[n], un) * z[n] +
                                   spec.gamma_core.dybar(t, x, y[n], ybar[n], un) * zbar[n] +
                                   spec.gamma_core.du(t, x, y[n], ybar[n], un) * dn;
                rhs[n] = z[n] + dt * drift + diff * dB + jmp * jump;
            }
            z = lu.solve(rhs);
            check_finite(z, m + 1, "solve_derivative_Z");
            if (opts.store_trajectories) ens.Y[static_cast<std::size_t>(p)][m + 1] = z;
        }
        ens.terminal[static_cast<std::size_t>(p)] = z;
      } catch (const std::exception& e) {
#pragma omp critical
        if (error.empty()) error = e.what();
      }
    }
    if (!error.empty()) throw std::runtime_error(error);
    ens.bundles = base.bundles;
    return ens;
}

}  // namespace smspde
