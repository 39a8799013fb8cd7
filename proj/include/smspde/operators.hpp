#pragma once

#include <array>
#include <cstdint>

#include <Eigen/SparseCore>

#include "smspde/grid.hpp"

namespace smspde {

/// Coefficient descriptor: polynomial in x (degree <= 2 per axis) so the
/// analytic adjoint formula's derivatives are exact.
struct Coefficient {
    double c[3][3] = {};  // sum c[i][j] x^i y^j

    static Coefficient constant(double v) {
        Coefficient p;
        p.c[0][0] = v;
        return p;
    }

    double value(std::array<double, 2> x) const;
    double deriv(int axis, std::array<double, 2> x) const;
    double deriv2(int a, int b, std::array<double, 2> x) const;
};

/// Finite-difference discretization of the non-divergence-form operator
/// sum alpha_ij d2/dxi dxj + sum beta_i d/dxi, or of its formal adjoint
/// sum d2/dxi dxj (alpha_ij .) - sum d/dxi (beta_i .), expanded with the
/// exact coefficient derivatives.
///
/// Rows at boundary nodes are pass-through: apply() returns 0 there and
/// the time steppers impose Dirichlet data.
class EllipticOperator {
public:
    EllipticOperator(const Grid& grid,
                     std::array<std::array<Coefficient, 2>, 2> alpha,
                     std::array<Coefficient, 2> beta,
                     bool adjoint_form);

    const Grid& grid() const { return *grid_; }
    bool adjoint_form() const { return adjoint_form_; }

    Field apply(const Field& f) const;

    /// Matrix with the interior stencil rows; boundary rows are zero.
    Eigen::SparseMatrix<double> matrix() const;

    /// I - dt * A with identity boundary rows (for semi-implicit stepping).
    Eigen::SparseMatrix<double> implicit_matrix(double dt) const;

private:
    const Grid* grid_;
    std::array<std::array<Coefficient, 2>, 2> alpha_;
    std::array<Coefficient, 2> beta_;
    bool adjoint_form_;
};

EllipticOperator assemble_operator(const Grid& grid,
                                   std::array<std::array<Coefficient, 2>, 2> alpha,
                                   std::array<Coefficient, 2> beta);

EllipticOperator assemble_adjoint(const Grid& grid,
                                  std::array<std::array<Coefficient, 2>, 2> alpha,
                                  std::array<Coefficient, 2> beta);

/// a * Laplacian (self-adjoint preset).
EllipticOperator laplacian_operator(const Grid& grid, double a = 0.5, bool adjoint = false);

struct CoercivityReport {
    double min_ratio = 0.0;
    bool pass = false;
};

/// Random probe of the Garding inequality for the negative of the
/// operator: min over trials of (2<-Au,u> + lambda ||u||_H^2) / ||u||_V^2
/// on interior-supported fields.
CoercivityReport check_coercivity(const EllipticOperator& op, double lambda,
                                  double alpha_coer, int trials, std::uint64_t seed);

}  // namespace smspde
