#include "smspde/operators.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace smspde {

double Coefficient::value(std::array<double, 2> x) const {
    double s = 0.0;
    double xi = 1.0;
    for (int i = 0; i < 3; ++i) {
        double yj = 1.0;
        for (int j = 0; j < 3; ++j) {
            s += c[i][j] * xi * yj;
            yj *= x[1];
        }
        xi *= x[0];
    }
    return s;
}

double Coefficient::deriv(int axis, std::array<double, 2> x) const {
    Coefficient d;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            if (axis == 0 && i > 0) d.c[i - 1][j] += i * c[i][j];
            if (axis == 1 && j > 0) d.c[i][j - 1] += j * c[i][j];
        }
    return d.value(x);
}

double Coefficient::deriv2(int a, int b, std::array<double, 2> x) const {
    Coefficient d;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            if (a == 0 && i > 0) d.c[i - 1][j] += i * c[i][j];
            if (a == 1 && j > 0) d.c[i][j - 1] += j * c[i][j];
        }
    Coefficient dd;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            if (b == 0 && i > 0) dd.c[i - 1][j] += i * d.c[i][j];
            if (b == 1 && j > 0) dd.c[i][j - 1] += j * d.c[i][j];
        }
    return dd.value(x);
}

namespace {

void check_alpha_definite(const Grid& grid,
                          const std::array<std::array<Coefficient, 2>, 2>& alpha) {
    const double tol = 1e-12;
    for (int n = 0; n < grid.num_nodes(); ++n) {
        const auto x = grid.coord(n);
        const double a00 = alpha[0][0].value(x);
        if (grid.dim() == 1) {
            if (a00 < -tol) throw std::invalid_argument("assemble: alpha not nonnegative definite");
            continue;
        }
        const double a01 = alpha[0][1].value(x);
        const double a10 = alpha[1][0].value(x);
        const double a11 = alpha[1][1].value(x);
        if (std::abs(a01 - a10) > 1e-12)
            throw std::invalid_argument("assemble: alpha not symmetric");
        if (a00 < -tol || a11 < -tol || a00 * a11 - a01 * a01 < -tol)
            throw std::invalid_argument("assemble: alpha not nonnegative definite");
    }
}

}  // namespace

EllipticOperator::EllipticOperator(const Grid& grid,
                                   std::array<std::array<Coefficient, 2>, 2> alpha,
                                   std::array<Coefficient, 2> beta,
                                   bool adjoint_form)
    : grid_(&grid), alpha_(alpha), beta_(beta), adjoint_form_(adjoint_form) {
    check_alpha_definite(grid, alpha_);
}

namespace {

// Stencil of one interior row as (neighbor node, weight) pairs.
struct Row {
    int nodes[9];
    double w[9];
    int count = 0;
};

}  // namespace

// Builds the row for interior node (i,j). Second derivatives use the
// 3-point per-axis stencil, cross terms the 4-point stencil, first
// derivatives central differences.
static Row make_row(const Grid& g,
                    const std::array<std::array<Coefficient, 2>, 2>& alpha,
                    const std::array<Coefficient, 2>& beta,
                    bool adjoint, int i, int j) {
    Row r;
    const auto x = g.coord(g.index(i, j));
    const int dim = g.dim();
    const double h0 = g.h(0);
    const double h1 = dim == 2 ? g.h(1) : 1.0;

    double wc = 0.0;                       // center
    double wax[2] = {0.0, 0.0};            // +/- along axis 0 (symmetric part)
    double way[2] = {0.0, 0.0};            // +/- along axis 1
    double wcross = 0.0;                   // (+,+)/(-,-) minus (+,-)/(-,+)
    double first0 = 0.0, first1 = 0.0;     // central first-derivative weights

    for (int a = 0; a < dim; ++a) {
        for (int b = 0; b < dim; ++b) {
            double coef = alpha[a][b].value(x);
            if (a == b) {
                const double h2 = (a == 0 ? h0 * h0 : h1 * h1);
                if (a == 0) {
                    wax[0] += coef / h2;
                    wax[1] += coef / h2;
                } else {
                    way[0] += coef / h2;
                    way[1] += coef / h2;
                }
                wc += -2.0 * coef / h2;
            } else {
                wcross += coef / (4.0 * h0 * h1);
            }
            if (adjoint) {
                // + d_a(alpha_ab) d_b + d_b(alpha_ab) d_a + d2_ab(alpha_ab)
                const double da = alpha[a][b].deriv(a, x);
                const double db = alpha[a][b].deriv(b, x);
                if (b == 0) first0 += da; else first1 += da;
                if (a == 0) first0 += db; else first1 += db;
                wc += alpha[a][b].deriv2(a, b, x);
            }
        }
    }
    for (int a = 0; a < dim; ++a) {
        const double bv = beta[a].value(x);
        if (!adjoint) {
            if (a == 0) first0 += bv; else first1 += bv;
        } else {
            if (a == 0) first0 -= bv; else first1 -= bv;
            wc -= beta[a].deriv(a, x);
        }
    }

    auto push = [&](int ii, int jj, double w) {
        if (w == 0.0) return;
        r.nodes[r.count] = g.index(ii, jj);
        r.w[r.count] = w;
        ++r.count;
    };
    push(i, j, wc);
    push(i + 1, j, wax[0] + first0 / (2.0 * h0));
    push(i - 1, j, wax[1] - first0 / (2.0 * h0));
    if (dim == 2) {
        push(i, j + 1, way[0] + first1 / (2.0 * h1));
        push(i, j - 1, way[1] - first1 / (2.0 * h1));
        if (wcross != 0.0) {
            push(i + 1, j + 1, wcross);
            push(i - 1, j - 1, wcross);
            push(i + 1, j - 1, -wcross);
            push(i - 1, j + 1, -wcross);
        }
    }
    return r;
}

Field EllipticOperator::apply(const Field& f) const {
    if (!f.grid().same_as(*grid_))
        throw std::invalid_argument("operator apply: grid mismatch");
    const Grid& g = *grid_;
    Field out(g);
    const int n0 = g.resolution(0);
    const int n1 = g.dim() == 2 ? g.resolution(1) : 1;
#pragma omp parallel for schedule(static)
    for (int i = 1; i < n0 - 1; ++i) {
        const int jlo = g.dim() == 2 ? 1 : 0;
        const int jhi = g.dim() == 2 ? n1 - 1 : 1;
        for (int j = jlo; j < jhi; ++j) {
            const Row r = make_row(g, alpha_, beta_, adjoint_form_, i, j);
            double s = 0.0;
            for (int kk = 0; kk < r.count; ++kk) s += r.w[kk] * f[r.nodes[kk]];
            out[g.index(i, j)] = s;
        }
    }
    return out;
}

Eigen::SparseMatrix<double> EllipticOperator::matrix() const {
    const Grid& g = *grid_;
    std::vector<Eigen::Triplet<double>> trips;
    const int n0 = g.resolution(0);
    const int n1 = g.dim() == 2 ? g.resolution(1) : 1;
    for (int i = 1; i < n0 - 1; ++i) {
        const int jlo = g.dim() == 2 ? 1 : 0;
        const int jhi = g.dim() == 2 ? n1 - 1 : 1;
        for (int j = jlo; j < jhi; ++j) {
            const Row r = make_row(g, alpha_, beta_, adjoint_form_, i, j);
            for (int kk = 0; kk < r.count; ++kk)
                trips.emplace_back(g.index(i, j), r.nodes[kk], r.w[kk]);
        }
    }
    Eigen::SparseMatrix<double> m(g.num_nodes(), g.num_nodes());
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
}

Eigen::SparseMatrix<double> EllipticOperator::implicit_matrix(double dt) const {
    const Grid& g = *grid_;
    Eigen::SparseMatrix<double> a = matrix();
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(a.nonZeros()) + g.num_nodes());
    for (int k = 0; k < a.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(a, k); it; ++it)
            trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()),
                               -dt * it.value());
    // matrix() has no boundary rows, so adding the unit diagonal leaves
    // boundary rows as pure identity.
    for (int n = 0; n < g.num_nodes(); ++n) trips.emplace_back(n, n, 1.0);
    Eigen::SparseMatrix<double> m(g.num_nodes(), g.num_nodes());
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
}

EllipticOperator assemble_operator(const Grid& grid,
                                   std::array<std::array<Coefficient, 2>, 2> alpha,
                                   std::array<Coefficient, 2> beta) {
    return EllipticOperator(grid, alpha, beta, false);
}

EllipticOperator assemble_adjoint(const Grid& grid,
                                  std::array<std::array<Coefficient, 2>, 2> alpha,
                                  std::array<Coefficient, 2> beta) {
    return EllipticOperator(grid, alpha, beta, true);
}

EllipticOperator laplacian_operator(const Grid& grid, double a, bool adjoint) {
    std::array<std::array<Coefficient, 2>, 2> alpha{};
    std::array<Coefficient, 2> beta{};
    alpha[0][0] = Coefficient::constant(a);
    if (grid.dim() == 2) alpha[1][1] = Coefficient::constant(a);
    return EllipticOperator(grid, alpha, beta, adjoint);
}

CoercivityReport check_coercivity(const EllipticOperator& op, double lambda,
                                  double alpha_coer, int trials, std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("check_coercivity: trials must be >= 1");
    const Grid& g = op.grid();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    CoercivityReport rep;
    rep.min_ratio = std::numeric_limits<double>::infinity();
    for (int t = 0; t < trials; ++t) {
        Field u(g);
        for (int n = 0; n < g.num_nodes(); ++n)
            if (g.is_interior(n)) u[n] = unif(rng);
        const Field au = op.apply(u);
        const double num = 2.0 * (-inner_product(au, u)) + lambda * l2_norm(u) * l2_norm(u);
        const double vn = sobolev_norm(u);
        const double ratio = num / (vn * vn);
        rep.min_ratio = std::min(rep.min_ratio, ratio);
    }
    rep.pass = rep.min_ratio >= alpha_coer;
    return rep;
}

}  // namespace smspde
