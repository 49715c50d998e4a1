#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "subrosa/expression.hpp"
#include "subrosa/grid.hpp"

namespace subrosa {

/// Symbolic vector field: one coefficient expression per coordinate axis.
struct ExprField {
    std::array<Expr, 3> comp;
};

/// Lie bracket [X, Y] = (X.grad)Y - (Y.grad)X formed symbolically.
ExprField bracket(const ExprField& x, const ExprField& y, int dim);

/// Orthonormal horizontal frame X_1..X_k spanning the distribution tau.
///
/// The frame fields are grid samples of closed-form coefficient expressions,
/// registered at construction so brackets and off-grid Hamiltonian
/// derivatives are exact. The subriemannian metric declares the X_i
/// orthonormal; the ambient coordinate metric is used only for the
/// orthogonal projection P^tau.
class Frame {
public:
    /// Builtins: "flat" (k = n, the classical full-rank case) and
    /// "sin-heisenberg" ({d/dx, d/dy + sin(2 pi x) d/dz} on T^3, which is
    /// bracket-generating of step 3 along x = 1/4 + Z/2).
    static Frame builtin(const std::string& name, GridPtr grid);
    static Frame from_expressions(GridPtr grid, const std::vector<std::vector<std::string>>& coeffs);
    static Frame from_expressions(GridPtr grid, std::vector<ExprField> fields,
                                  std::string name = "custom");

    const GridPtr& grid() const { return grid_; }
    int rank() const { return static_cast<int>(fields_.size()); }
    const VectorField& field(int i) const { return sampled_[static_cast<std::size_t>(i)]; }
    const ExprField& expr_field(int i) const { return fields_[static_cast<std::size_t>(i)]; }
    const Expr& coeff(int i, int c) const {
        return fields_[static_cast<std::size_t>(i)].comp[static_cast<std::size_t>(c)];
    }
    const Expr& coeff_derivative(int i, int c, int axis) const {
        return derivs_[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)]
                      [static_cast<std::size_t>(axis)];
    }
    const std::string& name() const { return name_; }

    /// Evaluate every frame vector at an arbitrary point (exact, through the
    /// registered expressions). out[i][c] = X_i^c(q).
    void eval_at(const std::array<double, 3>& q, double out[3][3]) const;
    /// Coefficient derivatives at a point: out[i][c][a] = d X_i^c / d x_a.
    void eval_derivatives_at(const std::array<double, 3>& q, double out[3][3][3]) const;

private:
    Frame(GridPtr grid, std::vector<ExprField> fields, std::string name);
    void validate() const;

    GridPtr grid_;
    std::vector<ExprField> fields_;
    std::vector<std::array<std::array<Expr, 3>, 3>> derivs_;
    std::vector<VectorField> sampled_;
    std::string name_;
};

/// Pointwise orthogonal projection onto span{X_i} in the ambient coordinate
/// metric: solves the k x k Gram system per node. Idempotent and symmetric.
VectorField project_tau(const VectorField& w, const Frame& frame);

/// Frame coefficients of the horizontal gradient: c_i = X_i . grad u.
std::vector<ScalarField> horizontal_coefficients(const ScalarField& u, const Frame& frame,
                                                 int order = 4);

/// Horizontal gradient sum_i (X_i . grad u) X_i. Coincides with
/// project_tau(grad u) exactly when the frame is orthonormal in the ambient
/// coordinate metric.
VectorField horizontal_gradient(const ScalarField& u, const Frame& frame, int order = 4);

/// Lie bracket of grid-sampled fields via the difference stencils.
VectorField bracket(const VectorField& x, const VectorField& y, int order = 4);

/// Frame coefficients of a field's tau-component: the Gram solve behind
/// project_tau, exposed for pairings. For horizontal fields this recovers
/// their exact expansion in the frame.
std::vector<ScalarField> tau_coefficients(const VectorField& w, const Frame& frame);

/// Subriemannian L2 pairing of the tau-components of two fields against nu:
/// the frame is orthonormal for the subriemannian metric, so this is the sum
/// over frame coefficients. For a horizontal U this satisfies
/// inner_tau(U, horizontal_gradient(f)) = <U, grad f> = -<div_nu U, f>.
double inner_tau(const VectorField& a, const VectorField& b, const Frame& frame,
                 const Density& nu);

double norm_tau(const VectorField& a, const Frame& frame, const Density& nu);

/// Growth vector of the distribution: dimensions spanned by the frame and its
/// iterated brackets at each node, per bracket depth.
struct GrowthReport {
    int max_depth = 0;
    int depth_needed = 0;        // first depth at which every node reaches full rank; 0 if never
    bool bracket_generating = false;
    std::vector<std::uint8_t> growth;  // node-major, max_depth entries per node

    std::vector<int> growth_at(std::size_t node) const;
    /// Smallest growth vector over all nodes, compared lexicographically.
    std::vector<int> minimal_growth() const;
};

/// Evaluates iterated symbolic brackets up to max_depth and reports the
/// per-node growth vector with rank threshold 1e-8.
GrowthReport check_bracket_generating(const Frame& frame, int max_depth);

}  // namespace subrosa
