#include "smspde/backward.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "implicit_solver.hpp"

namespace smspde {

namespace {

constexpr int kBasis = 6;  // {1, Y, Ybar, Y^2, Y*Ybar, Ybar^2}

void fill_basis_row(double y, double ybar, Eigen::MatrixXd& X, int row) {
    X(row, 0) = 1.0;
    X(row, 1) = y;
    X(row, 2) = ybar;
    X(row, 3) = y * y;
    X(row, 4) = y * ybar;
    X(row, 5) = ybar * ybar;
}

void zero_boundary(Field& f) {
    const Grid& g = f.grid();
    for (int n = 0; n < g.num_nodes(); ++n)
        if (!g.is_interior(n)) f[n] = 0.0;
}

/// Time-integrated H-norm of the difference of two frame stacks.
double stack_diff(const std::vector<Field>& a, const std::vector<Field>& b, double dt) {
    double acc = 0.0;
    for (std::size_t m = 0; m < a.size(); ++m) {
        const double d = l2_norm(a[m] - b[m]);
        acc += dt * d * d;
    }
    return std::sqrt(acc);
}

double ensemble_stack_diff(const std::vector<std::vector<Field>>& a,
                           const std::vector<std::vector<Field>>& b, double dt) {
    double acc = 0.0;
    for (std::size_t p = 0; p < a.size(); ++p) {
        const double d = stack_diff(a[p], b[p], dt);
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(a.size()));
}

Field mean_field(const std::vector<std::vector<Field>>& stacks, int m, const Grid& grid) {
    Field out(grid);
    for (const auto& s : stacks) {
        const Field& f = s[static_cast<std::size_t>(m)];
        for (int n = 0; n < out.size(); ++n) out[n] += f[n];
    }
    const double inv = 1.0 / static_cast<double>(stacks.size());
    for (int n = 0; n < out.size(); ++n) out[n] *= inv;
    return out;
}

}  // namespace

AdjointTriple solve_bspde_deterministic(const Grid& grid, const EllipticOperator& op_adjoint,
                                        const BallKernel& kernel, const Driver& driver,
                                        const Field& terminal, int M, double T) {
    if (M < 1) throw std::invalid_argument("solve_bspde_deterministic: M must be >= 1");
    const double dt = T / M;
    const detail::ImplicitSolver lu(op_adjoint, dt);

    AdjointTriple out;
    out.T = T;
    out.M = M;
    out.p.assign(static_cast<std::size_t>(M + 1), Field(grid));
    out.q.assign(static_cast<std::size_t>(M + 1), Field(grid));
    out.cr.assign(static_cast<std::size_t>(M + 1), Field(grid));

    out.p[static_cast<std::size_t>(M)] = terminal;
    zero_boundary(out.p[static_cast<std::size_t>(M)]);

    const Field zero(grid);
    for (int m = M - 1; m >= 0; --m) {
        const Field& pnext = out.p[static_cast<std::size_t>(m + 1)];
        const Field pbar = apply_G(pnext, kernel);
        DriverArgs args;
        args.t = m * dt;
        args.p = &pnext;
        args.pbar = &pbar;
        args.q = &zero;
        args.qbar = &zero;
        args.cr = &zero;
        args.crbar = &zero;
        const Field src = driver(args);
        Field rhs(grid);
        for (int n = 0; n < grid.num_nodes(); ++n) {
            if (!grid.is_interior(n)) continue;  // p = 0 on the boundary
            rhs[n] = pnext[n] + dt * src[n];
        }
        out.p[static_cast<std::size_t>(m)] = lu.solve(rhs);
    }
    return out;
}

namespace detail_backward {

/// Shared backward regression sweep. `source` supplies the explicit part
/// of the right-hand side per path at level m, given the predictable
/// estimate of p and the freshly regressed (q, c_r) at that level.
AdjointEnsemble regression_sweep(const Grid& grid, const EllipticOperator& op_adjoint,
                                 const BallKernel& kernel, const LevyModel& levy,
                                 const ForwardEnsemble& forward,
                                 const std::vector<Field>& terminal,
                                 const EnsembleSource& source,
                                 const RegressionOptions& opts) {
    const int P = forward.paths();
    const int M = forward.M;
    if (P < 1) throw std::invalid_argument("regression solver: empty ensemble");
    if (forward.Y.empty())
        throw std::invalid_argument("regression solver: forward ensemble lacks trajectories");
    if (static_cast<int>(terminal.size()) != P)
        throw std::invalid_argument("regression solver: terminal field count mismatch");
    if (P < opts.min_paths && !opts.allow_few_paths)
        throw std::invalid_argument("regression solver: fewer than min_paths paths");

    const double dt = forward.dt();
    const int N = grid.num_nodes();
    const detail::ImplicitSolver lu(op_adjoint, dt);
    const LevyMoments mom = levy_moments(levy);
    const bool has_jumps = levy.intensity > 0.0 && mom.m2 > 0.0;

    AdjointEnsemble out;
    out.T = forward.T;
    out.M = M;
    out.p.assign(static_cast<std::size_t>(P),
                 std::vector<Field>(static_cast<std::size_t>(M + 1), Field(grid)));
    out.q = out.p;
    out.cr = out.p;

    for (int p = 0; p < P; ++p) {
        out.p[static_cast<std::size_t>(p)][static_cast<std::size_t>(M)] =
            terminal[static_cast<std::size_t>(p)];
        zero_boundary(out.p[static_cast<std::size_t>(p)][static_cast<std::size_t>(M)]);
    }

    std::vector<Field> ybar(static_cast<std::size_t>(P), Field(grid));
    std::vector<Field> p_pred(static_cast<std::size_t>(P), Field(grid));
    std::vector<double> dB(static_cast<std::size_t>(P), 0.0);
    std::vector<double> dJ(static_cast<std::size_t>(P), 0.0);
    int fallbacks = 0;
    std::string error;

    for (int m = M - 1; m >= 0; --m) {
#pragma omp parallel for schedule(dynamic, 1)
        for (int p = 0; p < P; ++p) {
            ybar[static_cast<std::size_t>(p)] =
                apply_G(forward.Y[static_cast<std::size_t>(p)][static_cast<std::size_t>(m)],
                        kernel);
            dB[static_cast<std::size_t>(p)] =
                forward.bundles[static_cast<std::size_t>(p)].brownian[static_cast<std::size_t>(m)];
            dJ[static_cast<std::size_t>(p)] =
                has_jumps ? compensated_increment(forward.bundles[static_cast<std::size_t>(p)],
                                                  m, levy, levy.gamma0)
                          : 0.0;
        }

        // Per-node least squares over the ensemble: conditional mean of the
        // next-level p, then centered covariation regressions for q and c_r.
#pragma omp parallel for schedule(dynamic, 8) reduction(+ : fallbacks)
        for (int n = 0; n < N; ++n) {
            Eigen::MatrixXd X(P, kBasis);
            Eigen::VectorXd target(P);
            for (int p = 0; p < P; ++p) {
                fill_basis_row(
                    forward.Y[static_cast<std::size_t>(p)][static_cast<std::size_t>(m)][n],
                    ybar[static_cast<std::size_t>(p)][n], X, p);
                target[p] = out.p[static_cast<std::size_t>(p)][static_cast<std::size_t>(m + 1)][n];
            }
            // Rank-revealing projection onto the fitted column space. The
            // basis may be rank deficient (collapsed ensembles, or states
            // whose space mean is proportional to the state itself); the
            // projection degrades gracefully there, and the ones column
            // keeps constant targets exact. Ensembles too small to carry
            // the regression fall back to the plain mean, which reproduces
            // the deterministic sweep when every path coincides.
            const bool use_regression = P >= kBasis;
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
            if (use_regression) qr.compute(X);
            Eigen::VectorXd fit(P);
            if (use_regression) {
                fit = X * qr.solve(target);
            } else {
                ++fallbacks;
                fit.setConstant(target.mean());
            }
            Eigen::VectorXd resid = target - fit;
            Eigen::VectorXd tq(P), qfit(P);
            for (int p = 0; p < P; ++p) tq[p] = resid[p] * dB[static_cast<std::size_t>(p)] / dt;
            if (use_regression)
                qfit = X * qr.solve(tq);
            else
                qfit.setConstant(tq.mean());
            Eigen::VectorXd rfit = Eigen::VectorXd::Zero(P);
            if (has_jumps) {
                Eigen::VectorXd tr(P);
                for (int p = 0; p < P; ++p)
                    tr[p] = resid[p] * dJ[static_cast<std::size_t>(p)] / (dt * mom.m2);
                if (use_regression)
                    rfit = X * qr.solve(tr);
                else
                    rfit.setConstant(tr.mean());
            }
            for (int p = 0; p < P; ++p) {
                p_pred[static_cast<std::size_t>(p)][n] = fit[p];
                out.q[static_cast<std::size_t>(p)][static_cast<std::size_t>(m)][n] = qfit[p];
                out.cr[static_cast<std::size_t>(p)][static_cast<std::size_t>(m)][n] = rfit[p];
            }
        }

        // One implicit step per path with the explicit source frozen at the
        // regressed level-m estimates.
#pragma omp parallel for schedule(dynamic, 1)
        for (int p = 0; p < P; ++p) {
          try {
            const Field src = source(p, m, p_pred[static_cast<std::size_t>(p)],
                                     out.q[static_cast<std::size_t>(p)][static_cast<std::size_t>(m)],
                                     out.cr[static_cast<std::size_t>(p)][static_cast<std::size_t>(m)]);
            Field rhs(grid);
            for (int n = 0; n < N; ++n) {
                if (!grid.is_interior(n)) continue;
                rhs[n] = p_pred[static_cast<std::size_t>(p)][n] + dt * src[n];
            }
            out.p[static_cast<std::size_t>(p)][static_cast<std::size_t>(m)] = lu.solve(rhs);
          } catch (const std::exception& e) {
#pragma omp critical
            if (error.empty()) error = e.what();
          }
        }
        if (!error.empty()) throw std::runtime_error(error);
    }

    out.regression_fallbacks = fallbacks;
    out.p_mean.reserve(static_cast<std::size_t>(M + 1));
    out.q_mean.reserve(static_cast<std::size_t>(M + 1));
    out.cr_mean.reserve(static_cast<std::size_t>(M + 1));
    for (int m = 0; m <= M; ++m) {
        out.p_mean.push_back(mean_field(out.p, m, grid));
        out.q_mean.push_back(mean_field(out.q, m, grid));
        out.cr_mean.push_back(mean_field(out.cr, m, grid));
    }
    return out;
}

}  // namespace detail_backward

AdjointEnsemble solve_bspde_regression(const Grid& grid, const EllipticOperator& op_adjoint,
                                       const BallKernel& kernel, const ModelSpec& spec,
                                       const ForwardEnsemble& forward,
                                       const std::vector<Field>& terminal,
                                       const EnsembleSource& source,
                                       const RegressionOptions& opts) {
    return detail_backward::regression_sweep(grid, op_adjoint, kernel, spec.levy, forward,
                                             terminal, source, opts);
}

EnsembleSource make_model_source(const ModelSpec& spec, const ForwardEnsemble& forward,
                                 const ControlField& u, const BallKernel& kernel,
                                 DualMode mode, const Field& coverage) {
    const double dt = forward.dt();
    return [&spec, &forward, &u, &kernel, mode, coverage, dt](
               int path, int m, const Field& p_pred, const Field& q, const Field& cr) {
        const Grid& grid = p_pred.grid();
        const Field& y = forward.Y[static_cast<std::size_t>(path)][static_cast<std::size_t>(m)];
        const Field ybar = apply_G(y, kernel);
        const double t = m * dt;
        Field slope_y(grid), slope_ybar(grid);
        for (int n = 0; n < grid.num_nodes(); ++n) {
            HamiltonianInputs in;
            in.y = y[n];
            in.ybar = ybar[n];
            in.u = u.at(m, n);
            in.p = p_pred[n];
            in.q = q[n];
            in.c_r = cr[n];
            const auto x = grid.coord(n);
            slope_y[n] = dH_dy(spec, t, x, in);
            slope_ybar[n] = dH_dybar(spec, t, x, in);
        }
        return slope_y + averaged_dual(slope_ybar, kernel, mode, &coverage);
    };
}

std::vector<Field> terminal_fields(const ModelSpec& spec, const ForwardEnsemble& forward,
                                   const BallKernel& kernel) {
    const Grid& grid = *forward.grid;
    std::vector<Field> out(static_cast<std::size_t>(forward.paths()), Field(grid));
    std::string error;
#pragma omp parallel for schedule(dynamic, 1)
    for (int p = 0; p < forward.paths(); ++p) {
      try {
        const Field& y = forward.terminal[static_cast<std::size_t>(p)];
        const Field ybar = apply_G(y, kernel);
        Field slope_y(grid), slope_ybar(grid);
        for (int n = 0; n < grid.num_nodes(); ++n) {
            const TerminalSlope s = terminal_slope(spec, grid.coord(n), y[n], ybar[n]);
            slope_y[n] = s.dg_dy;
            slope_ybar[n] = s.dg_dybar;
        }
        out[static_cast<std::size_t>(p)] = slope_y + apply_G_dual(slope_ybar, kernel);
      } catch (const std::exception& e) {
#pragma omp critical
        if (error.empty()) error = e.what();
      }
    }
    if (!error.empty()) throw std::runtime_error(error);
    return out;
}

std::pair<AdjointTriple, PicardTrace> picard_solve(
    const Grid& grid, const EllipticOperator& op_adjoint, const BallKernel& kernel,
    const Driver& driver, const Field& terminal, int M, double T,
    const PicardOptions& opts, const AdjointTriple* initial) {
    const double dt = T / M;
    const detail::ImplicitSolver lu(op_adjoint, dt);

    AdjointTriple prev;
    if (initial) {
        prev = *initial;
        if (prev.M != M)
            throw std::invalid_argument("picard_solve: initial iterate has wrong step count");
    } else {
        prev.T = T;
        prev.M = M;
        prev.p.assign(static_cast<std::size_t>(M + 1), Field(grid));
        prev.q = prev.p;
        prev.cr = prev.p;
    }
    prev.p[static_cast<std::size_t>(M)] = terminal;
    zero_boundary(prev.p[static_cast<std::size_t>(M)]);

    PicardTrace trace;
    for (int it = 0; it < opts.n_max; ++it) {
        AdjointTriple next;
        next.T = T;
        next.M = M;
        next.p.assign(static_cast<std::size_t>(M + 1), Field(grid));
        next.q = next.p;
        next.cr = next.p;
        next.p[static_cast<std::size_t>(M)] = prev.p[static_cast<std::size_t>(M)];

        // Linear solve with every driver argument frozen at the previous
        // iterate (evaluated at the known later level).
        for (int m = M - 1; m >= 0; --m) {
            const Field& pfrozen = prev.p[static_cast<std::size_t>(m + 1)];
            const Field pbar = apply_G(pfrozen, kernel);
            const Field& qfrozen = prev.q[static_cast<std::size_t>(m + 1)];
            const Field qbar = apply_G(qfrozen, kernel);
            const Field& crfrozen = prev.cr[static_cast<std::size_t>(m + 1)];
            const Field crbar = apply_G(crfrozen, kernel);
            DriverArgs args;
            args.t = m * dt;
            args.p = &pfrozen;
            args.pbar = &pbar;
            args.q = &qfrozen;
            args.qbar = &qbar;
            args.cr = &crfrozen;
            args.crbar = &crbar;
            const Field src = driver(args);
            const Field& pnext = next.p[static_cast<std::size_t>(m + 1)];
            Field rhs(grid);
            for (int n = 0; n < grid.num_nodes(); ++n) {
                if (!grid.is_interior(n)) continue;
                rhs[n] = pnext[n] + dt * src[n];
            }
            next.p[static_cast<std::size_t>(m)] = lu.solve(rhs);
        }

        const double dp = stack_diff(next.p, prev.p, dt);
        const double dq = stack_diff(next.q, prev.q, dt);
        const double dr = stack_diff(next.cr, prev.cr, dt);
        trace.dp.push_back(dp);
        trace.dq.push_back(dq);
        trace.dr.push_back(dr);
        const double total = dp + dq + dr;
        if (it > 0) {
            const double last = trace.dp[static_cast<std::size_t>(it - 1)] +
                                trace.dq[static_cast<std::size_t>(it - 1)] +
                                trace.dr[static_cast<std::size_t>(it - 1)];
            trace.ratio.push_back(last > 0.0 ? total / last : 0.0);
        }
        prev = std::move(next);
        trace.iterations = it + 1;
        if (total < opts.tol) {
            trace.converged = true;
            break;
        }
    }
    return {std::move(prev), std::move(trace)};
}

std::pair<AdjointEnsemble, PicardTrace> picard_solve_ensemble(
    const Grid& grid, const EllipticOperator& op_adjoint, const BallKernel& kernel,
    const EnsembleDriver& driver, const ForwardEnsemble& forward,
    const LevyModel& levy, const std::vector<Field>& terminal, const PicardOptions& opts,
    const RegressionOptions& reg_opts, const Field* initial_p) {
    const int P = forward.paths();
    const int M = forward.M;
    const double dt = forward.dt();

    AdjointEnsemble prev;
    prev.T = forward.T;
    prev.M = M;
    prev.p.assign(static_cast<std::size_t>(P),
                  std::vector<Field>(static_cast<std::size_t>(M + 1), Field(grid)));
    prev.q = prev.p;
    prev.cr = prev.p;
    for (int p = 0; p < P; ++p) {
        auto& stack = prev.p[static_cast<std::size_t>(p)];
        if (initial_p)
            for (int m = 0; m < M; ++m) stack[static_cast<std::size_t>(m)] = *initial_p;
        stack[static_cast<std::size_t>(M)] = terminal[static_cast<std::size_t>(p)];
        zero_boundary(stack[static_cast<std::size_t>(M)]);
    }

    PicardTrace trace;
    for (int it = 0; it < opts.n_max; ++it) {
        // Freeze the previous iterate in the source; the regression sweep
        // then solves a linear backward equation on the fixed ensemble.
        const AdjointEnsemble* frozen = &prev;
        EnsembleSource source = [&driver, frozen, dt, &kernel](
                                    int path, int m, const Field&, const Field&, const Field&) {
            const auto& ps = frozen->p[static_cast<std::size_t>(path)];
            const auto& qs = frozen->q[static_cast<std::size_t>(path)];
            const auto& rs = frozen->cr[static_cast<std::size_t>(path)];
            const Field& pf = ps[static_cast<std::size_t>(m + 1)];
            const Field& qf = qs[static_cast<std::size_t>(m + 1)];
            const Field& rf = rs[static_cast<std::size_t>(m + 1)];
            const Field pbar = apply_G(pf, kernel);
            const Field qbar = apply_G(qf, kernel);
            const Field rbar = apply_G(rf, kernel);
            DriverArgs args;
            args.t = m * dt;
            args.p = &pf;
            args.pbar = &pbar;
            args.q = &qf;
            args.qbar = &qbar;
            args.cr = &rf;
            args.crbar = &rbar;
            return driver(path, m, args);
        };
        AdjointEnsemble next = detail_backward::regression_sweep(
            grid, op_adjoint, kernel, levy, forward, terminal, source, reg_opts);

        const double dp = ensemble_stack_diff(next.p, prev.p, dt);
        const double dq = ensemble_stack_diff(next.q, prev.q, dt);
        const double dr = ensemble_stack_diff(next.cr, prev.cr, dt);
        trace.dp.push_back(dp);
        trace.dq.push_back(dq);
        trace.dr.push_back(dr);
        const double total = dp + dq + dr;
        if (it > 0) {
            const double last = trace.dp[static_cast<std::size_t>(it - 1)] +
                                trace.dq[static_cast<std::size_t>(it - 1)] +
                                trace.dr[static_cast<std::size_t>(it - 1)];
            trace.ratio.push_back(last > 0.0 ? total / last : 0.0);
        }
        prev = std::move(next);
        trace.iterations = it + 1;
        if (total < opts.tol) {
            trace.converged = true;
            break;
        }
    }
    return {std::move(prev), std::move(trace)};
}

}  // namespace smspde
