#include "smspde/spacemean.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace smspde {

BallKernel build_kernel(const Grid& grid, double theta) {
    if (!(theta > 0.0)) throw std::invalid_argument("build_kernel: theta must be > 0");
    double hmin = grid.h(0);
    if (grid.dim() == 2) hmin = std::min(hmin, grid.h(1));
    if (theta < hmin)
        throw std::invalid_argument("build_kernel: theta below cell width gives an empty stencil");

    BallKernel k;
    k.grid = &grid;
    k.theta = theta;
    k.ball_volume = grid.dim() == 1 ? 2.0 * theta : std::numbers::pi * theta * theta;
    k.weight = grid.cell_volume() / k.ball_volume;

    const int r0 = static_cast<int>(std::ceil(theta / grid.h(0)));
    const int r1 = grid.dim() == 2 ? static_cast<int>(std::ceil(theta / grid.h(1))) : 0;
    for (int di = -r0; di <= r0; ++di) {
        for (int dj = -r1; dj <= r1; ++dj) {
            const double dx = di * grid.h(0);
            const double dy = grid.dim() == 2 ? dj * grid.h(1) : 0.0;
            if (dx * dx + dy * dy < theta * theta) k.offsets.push_back({di, dj});
        }
    }
    return k;
}

namespace {

void require_kernel_grid(const Field& f, const BallKernel& k, const char* what) {
    if (!f.grid().same_as(*k.grid))
        throw std::invalid_argument(std::string(what) + ": grid mismatch");
}

// Shared gather: out(x) = w * sum f(x + sign*offset) over offsets with
// x + sign*offset inside the index box. sign=-1 gives the transpose row.
Field gather(const Field& f, const BallKernel& k, int sign) {
    const Grid& g = f.grid();
    Field out(g);
    const int n0 = g.resolution(0);
    const int n1 = g.dim() == 2 ? g.resolution(1) : 1;
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n0; ++i) {
        for (int j = 0; j < n1; ++j) {
            double s = 0.0;
            for (const auto& d : k.offsets) {
                const int ii = i + sign * d[0];
                const int jj = j + sign * d[1];
                if (ii < 0 || ii >= n0 || jj < 0 || jj >= n1) continue;
                s += f[g.index(ii, jj)];
            }
            out[g.index(i, j)] = k.weight * s;
        }
    }
    return out;
}

}  // namespace

Field apply_G(const Field& f, const BallKernel& k) {
    require_kernel_grid(f, k, "apply_G");
    return gather(f, k, +1);
}

Field apply_G_dual(const Field& psi, const BallKernel& k) {
    require_kernel_grid(psi, k, "apply_G_dual");
    return gather(psi, k, -1);
}

Field coverage_vD(const Grid& grid, double theta) {
    if (!(theta > 0.0)) throw std::invalid_argument("coverage_vD: theta must be > 0");
    Field v(grid);
    if (grid.dim() == 1) {
        const double a = grid.lo(0), b = grid.hi(0);
        for (int n = 0; n < grid.num_nodes(); ++n) {
            const double x = grid.coord(n)[0];
            if (x - a >= theta && b - x >= theta) {
                v[n] = 1.0;  // ball fully inside, avoid rounding below 1
                continue;
            }
            const double len = std::min(x + theta, b) - std::max(x - theta, a);
            v[n] = std::min(1.0, std::max(0.0, len) / (2.0 * theta));
        }
        return v;
    }
    // 2D: deterministic midpoint sampling of the disc against the box.
    const int K = 200;
    const double step = 2.0 * theta / K;
#pragma omp parallel for schedule(dynamic, 16)
    for (int n = 0; n < grid.num_nodes(); ++n) {
        const auto x = grid.coord(n);
        const double d0 = std::min(x[0] - grid.lo(0), grid.hi(0) - x[0]);
        const double d1 = std::min(x[1] - grid.lo(1), grid.hi(1) - x[1]);
        if (d0 >= theta && d1 >= theta) {
            v[n] = 1.0;
            continue;
        }
        long in_ball = 0, in_both = 0;
        for (int a = 0; a < K; ++a) {
            const double ya = -theta + (a + 0.5) * step;
            for (int b = 0; b < K; ++b) {
                const double yb = -theta + (b + 0.5) * step;
                if (ya * ya + yb * yb >= theta * theta) continue;
                ++in_ball;
                const double px = x[0] + ya, py = x[1] + yb;
                if (px > grid.lo(0) && px < grid.hi(0) && py > grid.lo(1) && py < grid.hi(1))
                    ++in_both;
            }
        }
        v[n] = static_cast<double>(in_both) / static_cast<double>(in_ball);
    }
    return v;
}

Field averaged_dual(const Field& c, const BallKernel& k, DualMode mode,
                    const Field* coverage) {
    require_kernel_grid(c, k, "averaged_dual");
    if (mode == DualMode::exact) return apply_G_dual(c, k);
    Field out(c.grid());
    if (coverage) {
        require_same_grid(c, *coverage, "averaged_dual");
        for (int n = 0; n < c.size(); ++n) out[n] = (*coverage)[n] * c[n];
    } else {
        const Field v = coverage_vD(c.grid(), k.theta);
        for (int n = 0; n < c.size(); ++n) out[n] = v[n] * c[n];
    }
    return out;
}

namespace ref {

Field apply_G(const Field& f, const BallKernel& k) {
    const Grid& g = f.grid();
    const double th2 = k.theta * k.theta;
    Field out(g);
    for (int n = 0; n < g.num_nodes(); ++n) {
        const auto x = g.coord(n);
        double s = 0.0;
        for (int m = 0; m < g.num_nodes(); ++m) {
            const auto y = g.coord(m);
            const double dx = y[0] - x[0];
            const double dy = y[1] - x[1];
            if (dx * dx + dy * dy < th2) s += f[m];
        }
        out[n] = k.weight * s;
    }
    return out;
}

Field apply_G_dual(const Field& psi, const BallKernel& k) {
    const Grid& g = psi.grid();
    const int n0 = g.resolution(0);
    const int n1 = g.dim() == 2 ? g.resolution(1) : 1;
    Field out(g);
    for (int i = 0; i < n0; ++i) {
        for (int j = 0; j < n1; ++j) {
            for (const auto& d : k.offsets) {
                const int ii = i + d[0];
                const int jj = j + d[1];
                if (ii < 0 || ii >= n0 || jj < 0 || jj >= n1) continue;
                out[g.index(ii, jj)] += k.weight * psi[g.index(i, j)];
            }
        }
    }
    return out;
}

}  // namespace ref

}  // namespace smspde
