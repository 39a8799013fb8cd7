#include "smspde/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace smspde {

Grid::Grid(int dim,
           std::array<std::array<double, 2>, 2> extents,
           std::array<int, 2> resolution)
    : dim_(dim), extents_(extents), res_(resolution) {
    if (dim != 1 && dim != 2) throw std::invalid_argument("grid: dim must be 1 or 2");
    for (int a = 0; a < dim_; ++a) {
        const double len = extents_[a][1] - extents_[a][0];
        if (!(len > 0.0)) throw std::invalid_argument("grid: degenerate extent");
        if (res_[a] < 3) throw std::invalid_argument("grid: resolution must be >= 3 per axis");
        h_[a] = len / (res_[a] - 1);
    }
    if (dim_ == 1) {
        res_[1] = 1;
        h_[1] = 1.0;
        extents_[1] = {0.0, 0.0};
    }
    num_nodes_ = res_[0] * res_[1];
    cell_volume_ = h_[0];
    if (dim_ == 2) cell_volume_ *= h_[1];

    interior_mask_.assign(static_cast<std::size_t>(num_nodes_), 0);
    for (int i = 0; i < res_[0]; ++i) {
        for (int j = 0; j < res_[1]; ++j) {
            bool interior = i > 0 && i < res_[0] - 1;
            if (dim_ == 2) interior = interior && j > 0 && j < res_[1] - 1;
            if (interior) {
                interior_mask_[static_cast<std::size_t>(index(i, j))] = 1;
                ++num_interior_;
            }
        }
    }
}

double Grid::domain_volume() const {
    double v = extents_[0][1] - extents_[0][0];
    if (dim_ == 2) v *= extents_[1][1] - extents_[1][0];
    return v;
}

std::array<double, 2> Grid::coord(int node) const {
    const auto ij = multi_index(node);
    std::array<double, 2> x{extents_[0][0] + ij[0] * h_[0], 0.0};
    if (dim_ == 2) x[1] = extents_[1][0] + ij[1] * h_[1];
    return x;
}

Grid build_grid(double lo, double hi, int resolution) {
    return Grid(1, {{{lo, hi}, {0.0, 0.0}}}, {resolution, 1});
}

Grid build_grid(std::array<std::array<double, 2>, 2> extents,
                std::array<int, 2> resolution) {
    return Grid(2, extents, resolution);
}

double Field::eval(std::array<double, 2> x) const {
    const Grid& g = *grid_;
    for (int a = 0; a < g.dim(); ++a) {
        if (x[a] < g.lo(a) || x[a] > g.hi(a)) return 0.0;
    }
    int ij[2] = {0, 0};
    for (int a = 0; a < g.dim(); ++a) {
        ij[a] = static_cast<int>(std::lround((x[a] - g.lo(a)) / g.h(a)));
        ij[a] = std::max(0, std::min(g.resolution(a) - 1, ij[a]));
    }
    return values_[static_cast<std::size_t>(g.index(ij[0], ij[1]))];
}

void require_same_grid(const Field& a, const Field& b, const char* what) {
    if (!a.grid().same_as(b.grid()))
        throw std::invalid_argument(std::string(what) + ": grid mismatch");
}

Field operator+(const Field& a, const Field& b) {
    require_same_grid(a, b, "field add");
    Field out(a.grid());
    for (int i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

Field operator-(const Field& a, const Field& b) {
    require_same_grid(a, b, "field sub");
    Field out(a.grid());
    for (int i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

Field operator*(double c, const Field& f) {
    Field out(f.grid());
    for (int i = 0; i < f.size(); ++i) out[i] = c * f[i];
    return out;
}

double quad_weight(const Grid& g, int node) {
    const auto ij = g.multi_index(node);
    double w = g.cell_volume();
    for (int a = 0; a < g.dim(); ++a)
        if (ij[a] == 0 || ij[a] == g.resolution(a) - 1) w *= 0.5;
    return w;
}

double integrate(const Field& f) {
    double s = 0.0;
    for (int i = 0; i < f.size(); ++i) s += quad_weight(f.grid(), i) * f[i];
    return s;
}

double l2_norm(const Field& f) {
    double s = 0.0;
    for (int i = 0; i < f.size(); ++i) s += f[i] * f[i];
    return std::sqrt(s * f.grid().cell_volume());
}

double inner_product(const Field& a, const Field& b) {
    require_same_grid(a, b, "inner product");
    double s = 0.0;
    for (int i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s * a.grid().cell_volume();
}

namespace {

// Gradient component along one axis: central in the interior of the index
// range, one-sided at the ends.
double grad_energy(const Field& f, int axis) {
    const Grid& g = f.grid();
    const int n0 = g.resolution(0);
    const int n1 = g.dim() == 2 ? g.resolution(1) : 1;
    const double h = g.h(axis);
    double s = 0.0;
    for (int i = 0; i < n0; ++i) {
        for (int j = 0; j < n1; ++j) {
            const int k = axis == 0 ? i : j;
            const int n = axis == 0 ? n0 : n1;
            double d;
            auto at = [&](int kk) {
                return axis == 0 ? f[g.index(kk, j)] : f[g.index(i, kk)];
            };
            if (k == 0)
                d = (at(1) - at(0)) / h;
            else if (k == n - 1)
                d = (at(n - 1) - at(n - 2)) / h;
            else
                d = (at(k + 1) - at(k - 1)) / (2.0 * h);
            s += d * d;
        }
    }
    return s * g.cell_volume();
}

}  // namespace

double sobolev_norm(const Field& f) {
    double s = 0.0;
    for (int i = 0; i < f.size(); ++i) s += f[i] * f[i];
    s *= f.grid().cell_volume();
    for (int a = 0; a < f.grid().dim(); ++a) s += grad_energy(f, a);
    return std::sqrt(s);
}

}  // namespace smspde
