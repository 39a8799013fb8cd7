#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace smspde {

/// Uniform tensor grid over a box D in R^n, n = 1 or 2.
///
/// Nodes are stored row-major; the outermost index ring is the discrete
/// boundary of D, everything strictly inside is interior. Fields bound to
/// the grid are zero-extended outside the closed box.
class Grid {
public:
    Grid(int dim,
         std::array<std::array<double, 2>, 2> extents,
         std::array<int, 2> resolution);

    int dim() const { return dim_; }
    int resolution(int axis) const { return res_[axis]; }
    double h(int axis) const { return h_[axis]; }
    double lo(int axis) const { return extents_[axis][0]; }
    double hi(int axis) const { return extents_[axis][1]; }
    int num_nodes() const { return num_nodes_; }
    double cell_volume() const { return cell_volume_; }
    double domain_volume() const;

    int index(int i, int j = 0) const { return dim_ == 1 ? i : i * res_[1] + j; }
    std::array<int, 2> multi_index(int node) const {
        if (dim_ == 1) return {node, 0};
        return {node / res_[1], node % res_[1]};
    }
    std::array<double, 2> coord(int node) const;

    bool is_interior(int node) const { return interior_mask_[node]; }
    const std::vector<char>& interior_mask() const { return interior_mask_; }
    int num_interior() const { return num_interior_; }

    bool same_as(const Grid& other) const { return this == &other; }

private:
    int dim_;
    std::array<std::array<double, 2>, 2> extents_;
    std::array<int, 2> res_;
    std::array<double, 2> h_;
    int num_nodes_ = 0;
    int num_interior_ = 0;
    double cell_volume_ = 0.0;
    std::vector<char> interior_mask_;
};

/// 1D convenience overload.
Grid build_grid(double lo, double hi, int resolution);
/// 2D box.
Grid build_grid(std::array<std::array<double, 2>, 2> extents,
                std::array<int, 2> resolution);

/// Real-valued function on grid nodes.
class Field {
public:
    explicit Field(const Grid& grid, double fill = 0.0)
        : grid_(&grid), values_(static_cast<std::size_t>(grid.num_nodes()), fill) {}

    const Grid& grid() const { return *grid_; }
    int size() const { return static_cast<int>(values_.size()); }
    double& operator[](int node) { return values_[static_cast<std::size_t>(node)]; }
    double operator[](int node) const { return values_[static_cast<std::size_t>(node)]; }
    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    /// Nearest-node evaluation with the zero-extension convention:
    /// points outside the closed box evaluate to exactly 0.
    double eval(std::array<double, 2> x) const;

private:
    const Grid* grid_;
    std::vector<double> values_;
};

Field operator+(const Field& a, const Field& b);
Field operator-(const Field& a, const Field& b);
Field operator*(double c, const Field& f);

/// Trapezoid-rule weight of a node (cell volume, halved per boundary layer).
double quad_weight(const Grid& g, int node);

/// Trapezoid-rule integral of f over the box (exact for multilinear f).
double integrate(const Field& f);

/// Discrete H = L2(D) norm: rectangle rule over all nodes of the closed box.
double l2_norm(const Field& f);

/// Discrete inner product matching l2_norm.
double inner_product(const Field& a, const Field& b);

/// Discrete V = W^{1,2}(D) norm: H-norm plus central-difference gradient
/// energy, one-sided differences at the index boundary.
double sobolev_norm(const Field& f);

void require_same_grid(const Field& a, const Field& b, const char* what);

/// Uniformly time-indexed stack of Fields on one grid, frames t_0..t_M.
struct TimeField {
    double T = 0.0;
    int steps = 0;  // M; frames.size() == M + 1
    std::vector<Field> frames;

    TimeField() = default;
    TimeField(const Grid& grid, double horizon, int M)
        : T(horizon), steps(M), frames(static_cast<std::size_t>(M + 1), Field(grid)) {}

    double dt() const { return T / steps; }
    Field& operator[](int m) { return frames[static_cast<std::size_t>(m)]; }
    const Field& operator[](int m) const { return frames[static_cast<std::size_t>(m)]; }
};

}  // namespace smspde
