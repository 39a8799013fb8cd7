#include "smspde/control.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace smspde {

namespace {

void require_problem(const Problem& prob) {
    if (!prob.grid || !prob.spec || !prob.op_forward || !prob.op_adjoint || !prob.kernel)
        throw std::invalid_argument("control: incomplete problem setup");
    if (prob.paths < 1) throw std::invalid_argument("control: paths must be >= 1");
}

const Field* frame_or_null(const std::vector<Field>* frames, int m) {
    if (!frames) return nullptr;
    return &(*frames)[static_cast<std::size_t>(m)];
}

double at_or_zero(const Field* f, int n) { return f ? (*f)[n] : 0.0; }

/// dH/du at a node with the state arguments dropped (the presets and the
/// custom-linear coefficients are affine in u through coefficients that do
/// not mix u with y or ybar, so dH/du is state-free; state-dependent
/// custom drift derivatives would need the ensemble here).
double dhdu_node(const ModelSpec& spec, double t, std::array<double, 2> x, double u,
                 double p, double q, double cr) {
    HamiltonianInputs in;
    in.y = 1.0;  // harmless placeholder inside S
    in.ybar = 1.0;
    in.u = u;
    in.p = p;
    in.q = q;
    in.c_r = cr;
    return dH_du(spec, t, x, in);
}

/// Root of u -> integral over D of dH/du dx at one time level by
/// bisection on [U.lo, U.hi] (dH/du is decreasing in u for concave f).
double bisect_integral_root(const ModelSpec& spec, const Grid& grid, double t,
                            const Field& p, const Field* q, const Field* cr) {
    auto phi = [&](double u) {
        double s = 0.0;
        for (int n = 0; n < grid.num_nodes(); ++n)
            s += quad_weight(grid, n) *
                 dhdu_node(spec, t, grid.coord(n), u, p[n], at_or_zero(q, n), at_or_zero(cr, n));
        return s;
    };
    double lo = spec.U.lo, hi = spec.U.hi;
    double flo = phi(lo), fhi = phi(hi);
    if (flo <= 0.0) return lo;
    if (fhi >= 0.0) return hi;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = phi(mid);
        if (fm > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

double eval_J(const ModelSpec& spec, const ForwardEnsemble& ensemble, const BallKernel& kernel) {
    const Grid& grid = *ensemble.grid;
    double sum = 0.0;
    int retained = 0;
    for (int p = 0; p < ensemble.paths(); ++p) {
        if (ensemble.rejected[static_cast<std::size_t>(p)]) continue;
        const Field& yT = ensemble.terminal[static_cast<std::size_t>(p)];
        const Field ybarT = apply_G(yT, kernel);
        double Jp = ensemble.running_cost[static_cast<std::size_t>(p)];
        for (int n = 0; n < grid.num_nodes(); ++n)
            Jp += quad_weight(grid, n) * spec.g.value(grid.coord(n), yT[n], ybarT[n]);
        sum += Jp;
        ++retained;
    }
    if (retained == 0) throw std::runtime_error("eval_J: all paths rejected (state left S)");
    return sum / retained;
}

ControlField update_pointwise(const ModelSpec& spec, const Grid& grid, double T,
                              const std::vector<Field>& p, const std::vector<Field>* q,
                              const std::vector<Field>* cr, const ControlField* current,
                              double grad_step) {
    const int steps = static_cast<int>(p.size()) - 1;
    if (steps < 1) throw std::invalid_argument("update_pointwise: need at least two frames");
    const double expo = 1.0 / (spec.rho - 1.0);
    std::vector<Field> out(p.size(), Field(grid));
    const double tstep = T / steps;
    for (int m = 0; m <= steps; ++m) {
        const Field& pm = p[static_cast<std::size_t>(m)];
        for (int n = 0; n < grid.num_nodes(); ++n) {
            double u;
            switch (spec.kind) {
                case PresetKind::harvest_log:
                case PresetKind::harvest_power:
                    if (pm[n] <= 0.0) {
                        if (grid.is_interior(n))
                            throw std::domain_error(
                                "update_pointwise: adjoint not positive on an interior node");
                        // Boundary rows carry p = 0; the stationary value is
                        // unbounded there and projects to the upper bound.
                        u = spec.U.hi;
                        break;
                    }
                    u = spec.kind == PresetKind::harvest_log ? 1.0 / pm[n]
                                                             : std::pow(pm[n], expo);
                    break;
                default: {
                    if (!current)
                        throw std::invalid_argument(
                            "update_pointwise: custom model needs the current control");
                    const double uc = current->at(std::min(m, current->steps()), n);
                    u = uc + grad_step *
                                 dhdu_node(spec, m * tstep, grid.coord(n), uc, pm[n],
                                           at_or_zero(frame_or_null(q, m), n),
                                           at_or_zero(frame_or_null(cr, m), n));
                    break;
                }
            }
            out[static_cast<std::size_t>(m)][n] = spec.U.project(u);
        }
    }
    return ControlField::pointwise(grid, steps, T, std::move(out));
}

ControlField update_xfree(const ModelSpec& spec, const Grid& grid, double T,
                          const std::vector<Field>& p, const std::vector<Field>* q,
                          const std::vector<Field>* cr) {
    const int steps = static_cast<int>(p.size()) - 1;
    if (steps < 1) throw std::invalid_argument("update_xfree: need at least two frames");
    const double vol = grid.domain_volume();
    std::vector<double> out(p.size(), 0.0);
    const double tstep = T / steps;
    for (int m = 0; m <= steps; ++m) {
        const double ip = integrate(p[static_cast<std::size_t>(m)]);
        double u;
        switch (spec.kind) {
            case PresetKind::harvest_log:
                if (ip <= 0.0)
                    throw std::domain_error("update_xfree: nonpositive adjoint integral");
                u = 1.0 / ip;
                break;
            case PresetKind::harvest_power:
                if (ip <= 0.0)
                    throw std::domain_error("update_xfree: nonpositive adjoint integral");
                u = std::pow(ip / vol, 1.0 / (spec.rho - 1.0));
                break;
            default:
                u = bisect_integral_root(spec, grid, m * tstep, p[static_cast<std::size_t>(m)],
                                         frame_or_null(q, m), frame_or_null(cr, m));
                break;
        }
        out[static_cast<std::size_t>(m)] = spec.U.project(u);
    }
    return ControlField::xfree(grid, steps, T, std::move(out));
}

ControlField update_constant(const ModelSpec& spec, const Grid& grid, double T,
                             const std::vector<Field>& p, const std::vector<Field>* q,
                             const std::vector<Field>* cr) {
    const int steps = static_cast<int>(p.size()) - 1;
    if (steps < 1) throw std::invalid_argument("update_constant: need at least two frames");
    const double dt = T / steps;
    const double vol = grid.domain_volume();
    // Left-point aggregation of the stationarity condition over time and D.
    double ip = 0.0;
    for (int m = 0; m < steps; ++m) ip += dt * integrate(p[static_cast<std::size_t>(m)]);
    double u;
    switch (spec.kind) {
        case PresetKind::harvest_log:
            if (ip <= 0.0) throw std::domain_error("update_constant: nonpositive adjoint integral");
            u = T * vol / ip;
            break;
        case PresetKind::harvest_power:
            if (ip <= 0.0) throw std::domain_error("update_constant: nonpositive adjoint integral");
            u = std::pow(ip / (T * vol), 1.0 / (spec.rho - 1.0));
            break;
        default: {
            auto phi = [&](double uu) {
                double s = 0.0;
                for (int m = 0; m < steps; ++m) {
                    const Field& pm = p[static_cast<std::size_t>(m)];
                    for (int n = 0; n < grid.num_nodes(); ++n)
                        s += dt * quad_weight(grid, n) *
                             dhdu_node(spec, m * dt, grid.coord(n), uu, pm[n],
                                       at_or_zero(frame_or_null(q, m), n),
                                       at_or_zero(frame_or_null(cr, m), n));
                }
                return s;
            };
            double lo = spec.U.lo, hi = spec.U.hi;
            if (phi(lo) <= 0.0) {
                u = lo;
            } else if (phi(hi) >= 0.0) {
                u = hi;
            } else {
                for (int it = 0; it < 200; ++it) {
                    const double mid = 0.5 * (lo + hi);
                    (phi(mid) > 0.0 ? lo : hi) = mid;
                }
                u = 0.5 * (lo + hi);
            }
            break;
        }
    }
    return ControlField::constant_control(grid, steps, T, spec.U.project(u));
}

double stationarity_residual(const ModelSpec& spec, const ForwardEnsemble& forward,
                             const BallKernel& kernel, const ControlField& u,
                             const std::vector<Field>& p, const std::vector<Field>* q,
                             const std::vector<Field>* cr) {
    const Grid& grid = *forward.grid;
    if (forward.Y.empty())
        throw std::invalid_argument("stationarity_residual: forward ensemble lacks trajectories");
    const int M = forward.M;
    const double dt = forward.dt();
    const int P = forward.paths();
    double res = 0.0;
    for (int m = 0; m < M; ++m) {
        Field ymean(grid);
        for (int path = 0; path < P; ++path) {
            const Field& y = forward.Y[static_cast<std::size_t>(path)][static_cast<std::size_t>(m)];
            for (int n = 0; n < grid.num_nodes(); ++n) ymean[n] += y[n] / P;
        }
        const Field ybar = apply_G(ymean, kernel);
        const Field& pm = p[static_cast<std::size_t>(m)];
        const Field* qm = frame_or_null(q, m);
        const Field* crm = frame_or_null(cr, m);
        double integral = 0.0;
        for (int n = 0; n < grid.num_nodes(); ++n) {
            HamiltonianInputs in;
            in.y = ymean[n];
            in.ybar = ybar[n];
            in.u = u.at(m, n);
            in.p = pm[n];
            in.q = at_or_zero(qm, n);
            in.c_r = at_or_zero(crm, n);
            double d = dH_du(spec, m * dt, grid.coord(n), in);
            // First-order condition on a bounded control set: at an active
            // bound only the inward-pointing part of the gradient counts.
            const double slack = 1e-10 * (spec.U.hi - spec.U.lo);
            if (in.u >= spec.U.hi - slack && d > 0.0) d = 0.0;
            if (in.u <= spec.U.lo + slack && d < 0.0) d = 0.0;
            if (u.mode() == ControlMode::pointwise) {
                if (grid.is_interior(n)) res = std::max(res, std::abs(d));
            } else {
                integral += quad_weight(grid, n) * d;
            }
        }
        if (u.mode() != ControlMode::pointwise) {
            const double um = u.at(m, 0);
            const double slack = 1e-10 * (spec.U.hi - spec.U.lo);
            if (um >= spec.U.hi - slack && integral > 0.0) integral = 0.0;
            if (um <= spec.U.lo + slack && integral < 0.0) integral = 0.0;
            res = std::max(res, std::abs(integral));
        }
    }
    return res;
}

namespace {

ControlField run_update(const Problem& prob, ControlMode mode, const AdjointEnsemble& adj,
                        const ControlField& current) {
    switch (mode) {
        case ControlMode::pointwise:
            return update_pointwise(*prob.spec, *prob.grid, prob.T, adj.p_mean, &adj.q_mean,
                                    &adj.cr_mean, &current);
        case ControlMode::xfree:
            return update_xfree(*prob.spec, *prob.grid, prob.T, adj.p_mean, &adj.q_mean,
                                &adj.cr_mean);
        default:
            return update_constant(*prob.spec, *prob.grid, prob.T, adj.p_mean, &adj.q_mean,
                                   &adj.cr_mean);
    }
}

const char* mode_name(ControlMode mode) {
    switch (mode) {
        case ControlMode::pointwise: return "pointwise";
        case ControlMode::xfree: return "xfree";
        default: return "constant";
    }
}

}  // namespace

std::pair<ControlField, OptimizerReport> optimize(const Problem& prob, const ControlField& u0,
                                                  const OptimizeOptions& opts) {
    require_problem(prob);
    const ModelSpec& spec = *prob.spec;
    const Grid& grid = *prob.grid;

    const auto bundles = sample_paths(prob.M, prob.T, spec.levy, prob.paths, prob.master_seed);
    const Field coverage = coverage_vD(grid, prob.kernel->theta);
    RegressionOptions reg = opts.regression;
    reg.allow_few_paths = true;  // the caller fixed the path budget in Problem

    ControlField u = u0;
    u.clamp(spec.U.lo, spec.U.hi);

    OptimizerReport report;
    report.mode = mode_name(u.mode());
    for (int it = 0; it < opts.max_iters; ++it) {
        report.iterations = it + 1;
        const ForwardEnsemble ens =
            solve_forward(grid, *prob.op_forward, *prob.kernel, spec, u, prob.xi, prob.eta,
                          bundles, prob.M, prob.T);
        const double J = eval_J(spec, ens, *prob.kernel);
        report.J_trace.push_back(J);
        if (!std::isfinite(J)) {
            report.diverged = true;
            break;
        }
        const auto terminal = terminal_fields(spec, ens, *prob.kernel);
        const auto source = make_model_source(spec, ens, u, *prob.kernel, prob.dual_mode, coverage);
        const AdjointEnsemble adj = solve_bspde_regression(grid, *prob.op_adjoint, *prob.kernel,
                                                           spec, ens, terminal, source, reg);
        report.residual =
            stationarity_residual(spec, ens, *prob.kernel, u, adj.p_mean, &adj.q_mean,
                                  &adj.cr_mean);
        if (report.residual < opts.tol) {
            report.converged = true;
            break;
        }
        const ControlField u_new = run_update(prob, u.mode(), adj, u);
        u = u.blend(opts.omega, u_new);
        u.clamp(spec.U.lo, spec.U.hi);
    }
    return {std::move(u), std::move(report)};
}

std::vector<DerivativeCheck> directional_derivative_check(const Problem& prob,
                                                          const ControlField& u_hat,
                                                          const ControlField& direction,
                                                          const std::vector<double>& thetas) {
    require_problem(prob);
    const ModelSpec& spec = *prob.spec;
    const Grid& grid = *prob.grid;
    const double dt = prob.T / prob.M;

    const auto bundles = sample_paths(prob.M, prob.T, spec.levy, prob.paths, prob.master_seed);
    const ForwardEnsemble base = solve_forward(grid, *prob.op_forward, *prob.kernel, spec, u_hat,
                                               prob.xi, prob.eta, bundles, prob.M, prob.T);
    const double J0 = eval_J(spec, base, *prob.kernel);

    const Field coverage = coverage_vD(grid, prob.kernel->theta);
    const auto terminal = terminal_fields(spec, base, *prob.kernel);
    const auto source = make_model_source(spec, base, u_hat, *prob.kernel, prob.dual_mode,
                                          coverage);
    RegressionOptions reg;
    reg.allow_few_paths = true;
    const AdjointEnsemble adj = solve_bspde_regression(grid, *prob.op_adjoint, *prob.kernel, spec,
                                                       base, terminal, source, reg);

    // Hamiltonian form: E[ integral of dH/du(u_hat) * direction dx dt ].
    double form_h = 0.0;
    for (int path = 0; path < prob.paths; ++path) {
        for (int m = 0; m < prob.M; ++m) {
            const Field& y = base.Y[static_cast<std::size_t>(path)][static_cast<std::size_t>(m)];
            const Field ybar = apply_G(y, *prob.kernel);
            const auto& ps = adj.p[static_cast<std::size_t>(path)];
            const auto& qs = adj.q[static_cast<std::size_t>(path)];
            const auto& rs = adj.cr[static_cast<std::size_t>(path)];
            for (int n = 0; n < grid.num_nodes(); ++n) {
                HamiltonianInputs in;
                in.y = y[n];
                in.ybar = ybar[n];
                in.u = u_hat.at(m, n);
                in.p = ps[static_cast<std::size_t>(m)][n];
                in.q = qs[static_cast<std::size_t>(m)][n];
                in.c_r = rs[static_cast<std::size_t>(m)][n];
                form_h += dt * quad_weight(grid, n) * dH_du(spec, m * dt, grid.coord(n), in) *
                          direction.at(m, n);
            }
        }
    }
    form_h /= prob.paths;

    // Derivative-process form: chain rule of J through Z.
    const ForwardEnsemble zens =
        solve_derivative_Z(grid, *prob.op_forward, *prob.kernel, spec, u_hat, direction, base);
    double form_z = 0.0;
    for (int path = 0; path < prob.paths; ++path) {
        const auto& ys = base.Y[static_cast<std::size_t>(path)];
        const auto& zs = zens.Y[static_cast<std::size_t>(path)];
        for (int m = 0; m < prob.M; ++m) {
            const Field& y = ys[static_cast<std::size_t>(m)];
            const Field& z = zs[static_cast<std::size_t>(m)];
            const Field ybar = apply_G(y, *prob.kernel);
            const Field zbar = apply_G(z, *prob.kernel);
            const double t = m * dt;
            for (int n = 0; n < grid.num_nodes(); ++n) {
                const auto x = grid.coord(n);
                const double un = u_hat.at(m, n);
                form_z += dt * quad_weight(grid, n) *
                          (spec.f.dy(t, x, y[n], ybar[n], un) * z[n] +
                           spec.f.dybar(t, x, y[n], ybar[n], un) * zbar[n] +
                           spec.f.du(t, x, y[n], ybar[n], un) * direction.at(m, n));
            }
        }
        const Field& yT = ys[static_cast<std::size_t>(prob.M)];
        const Field& zT = zs[static_cast<std::size_t>(prob.M)];
        const Field ybarT = apply_G(yT, *prob.kernel);
        const Field zbarT = apply_G(zT, *prob.kernel);
        for (int n = 0; n < grid.num_nodes(); ++n) {
            const TerminalSlope s = terminal_slope(spec, grid.coord(n), yT[n], ybarT[n]);
            form_z += quad_weight(grid, n) * (s.dg_dy * zT[n] + s.dg_dybar * zbarT[n]);
        }
    }
    form_z /= prob.paths;

    std::vector<DerivativeCheck> out;
    for (const double theta : thetas) {
        ControlField u_theta = u_hat.axpy(theta, direction);
        ControlField projected = u_theta;
        projected.clamp(spec.U.lo, spec.U.hi);
        if (u_theta.max_diff(projected) > 0.0)
            throw std::invalid_argument("directional_derivative_check: control leaves U");
        DerivativeCheck c;
        c.theta = theta;
        c.hamiltonian_form = form_h;
        c.z_form = form_z;
        if (theta != 0.0) {
            const ForwardEnsemble pert =
                solve_forward(grid, *prob.op_forward, *prob.kernel, spec, u_theta, prob.xi,
                              prob.eta, bundles, prob.M, prob.T, {.store_trajectories = false});
            c.finite_difference = (eval_J(spec, pert, *prob.kernel) - J0) / theta;
        }
        const double vals[3] = {c.finite_difference, c.hamiltonian_form, c.z_form};
        double gap = 0.0;
        for (int i = 0; i < 3; ++i)
            for (int j = i + 1; j < 3; ++j) {
                const double scale =
                    std::max({std::abs(vals[i]), std::abs(vals[j]), 1e-300});
                gap = std::max(gap, std::abs(vals[i] - vals[j]) / scale);
            }
        c.max_pairwise_gap = gap;
        out.push_back(c);
    }
    return out;
}

OracleResult brute_force_constant_oracle(const Problem& prob, const std::vector<double>& values) {
    require_problem(prob);
    if (values.empty()) throw std::invalid_argument("oracle: empty value grid");
    const auto bundles =
        sample_paths(prob.M, prob.T, prob.spec->levy, prob.paths, prob.master_seed);
    OracleResult res;
    res.best_J = -std::numeric_limits<double>::infinity();
    for (const double v : values) {
        if (!prob.spec->U.contains(v))
            throw std::invalid_argument("oracle: value grid leaves the control bounds");
        const ControlField u = ControlField::constant_control(*prob.grid, prob.M, prob.T, v);
        double J;
        try {
            const ForwardEnsemble ens =
                solve_forward(*prob.grid, *prob.op_forward, *prob.kernel, *prob.spec, u, prob.xi,
                              prob.eta, bundles, prob.M, prob.T, {.store_trajectories = false});
            J = eval_J(*prob.spec, ens, *prob.kernel);
        } catch (const std::exception&) {
            J = -std::numeric_limits<double>::infinity();  // infeasible value
        }
        res.values.push_back(v);
        res.J.push_back(J);
        if (J > res.best_J) {
            res.best_J = J;
            res.best_value = v;
        }
    }
    return res;
}

}  // namespace smspde
