#pragma once

#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/SparseLU>

#include "smspde/grid.hpp"
#include "smspde/operators.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace smspde::detail {

/// Factorization of (I - dt * A) with one SparseLU instance per OpenMP
/// thread, since Eigen solver objects must not run concurrent solves.
class ImplicitSolver {
public:
    ImplicitSolver(const EllipticOperator& op, double dt)
        : matrix_(op.implicit_matrix(dt)) {
#ifdef _OPENMP
        solvers_.resize(static_cast<std::size_t>(omp_get_max_threads()));
#else
        solvers_.resize(1);
#endif
    }

    Field solve(const Field& rhs) const {
#ifdef _OPENMP
        const int tid = omp_get_thread_num();
#else
        const int tid = 0;
#endif
        auto& lu = solvers_[static_cast<std::size_t>(tid)];
        if (!lu) {
            lu = std::make_unique<Eigen::SparseLU<Eigen::SparseMatrix<double>>>();
            lu->compute(matrix_);
            if (lu->info() != Eigen::Success)
                throw std::runtime_error("implicit solver: factorization failed");
        }
        const Eigen::Map<const Eigen::VectorXd> b(rhs.values().data(), rhs.size());
        Eigen::VectorXd x = lu->solve(b);
        if (lu->info() != Eigen::Success)
            throw std::runtime_error("implicit solver: linear solve failed");
        Field out(rhs.grid());
        for (int n = 0; n < out.size(); ++n) out[n] = x[n];
        // identity boundary rows must pass the Dirichlet data through
        // exactly, without LU rounding
        for (int n = 0; n < out.size(); ++n)
            if (!out.grid().is_interior(n)) out[n] = rhs[n];
        return out;
    }

private:
    Eigen::SparseMatrix<double> matrix_;
    mutable std::vector<std::unique_ptr<Eigen::SparseLU<Eigen::SparseMatrix<double>>>> solvers_;
};

}  // namespace smspde::detail
