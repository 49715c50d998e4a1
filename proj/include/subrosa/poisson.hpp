#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "subrosa/frame.hpp"
#include "subrosa/grid.hpp"

namespace subrosa {

/// Sub-Laplacian: div_nu of the horizontal gradient. Symmetric negative
/// semidefinite with constants in its kernel, exactly, by the adjoint
/// construction of the divergence.
ScalarField sub_laplacian(const ScalarField& u, const Frame& frame, const Density& nu,
                          int order = 4);

/// Matrix-free sub-Laplacian with reusable scratch buffers; the workhorse
/// behind the CG solvers.
class SubLaplacianOperator {
public:
    SubLaplacianOperator(const Frame& frame, const Density& nu, int order = 4);
    void apply(std::span<const double> in, std::span<double> out) const;
    const GridPtr& grid() const { return grid_; }

private:
    GridPtr grid_;
    const Frame& frame_;
    const Density& nu_;
    int order_;
    mutable std::vector<double> du_[3];
    mutable std::vector<double> flux_[3];
    mutable std::vector<double> tmp_;
};

/// Same operator with the horizontal gradient replaced by the orthogonal
/// projection of the full gradient. Agrees with sub_laplacian to round-off
/// exactly when the frame is orthonormal in the ambient coordinate metric.
ScalarField sub_laplacian_via_projection(const ScalarField& u, const Frame& frame,
                                         const Density& nu, int order = 4);

struct PoissonSolution {
    ScalarField u;          // gauge-fixed to nu-mean zero
    double residual_norm;   // relative L2 residual
    int iterations;
};

struct CgOptions {
    std::size_t max_iterations = 0;      // 0: 50 * sqrt(total nodes)
    const ScalarField* initial_guess = nullptr;
    int order = 4;
};

/// Conjugate-gradient solve of the subelliptic Poisson problem
/// laplacian^tau u = rho on the mean-zero subspace. The source must have
/// nu-mean below 1e-10 (the solvability condition); this is enforced, not
/// projected away.
PoissonSolution solve_poisson(const ScalarField& rho, const Frame& frame, const Density& nu,
                              double tol = 1e-8, const CgOptions& opts = {});

struct HodgeDecomposition {
    ScalarField potential;        // f with laplacian^tau f = div_nu W
    VectorField gradient_part;    // horizontal gradient of f
    VectorField divergence_free;  // U = W - gradient_part
    PoissonSolution poisson;
};

/// Nonholonomic Hodge decomposition W = P^tau grad f + U with div_nu U ~ 0.
HodgeDecomposition hodge_decompose(const VectorField& w, const Frame& frame, const Density& nu,
                                   double tol = 1e-8);

}  // namespace subrosa
