#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "subrosa/grid.hpp"

namespace subrosa {

/// Lagrangian particle trajectories seeded at the grid nodes, with
/// per-particle log det(D phi) accumulators: the finite-dimensional shadow of
/// the diffeomorphism phi_t.
struct FlowMap {
    GridPtr grid;
    std::vector<std::array<double, 3>> positions;  // wrapped to [0, period)
    std::vector<double> log_jacobian;
    double t_final = 0.0;

    static FlowMap identity(const GridPtr& grid);
};

// --- periodic interpolation ---------------------------------------------------

/// Periodic multilinear interpolation of a scalar grid field.
double interpolate(const ScalarField& f, const std::array<double, 3>& p);

/// Periodic multilinear interpolation of a vector grid field.
std::array<double, 3> interpolate(const VectorField& v, const std::array<double, 3>& p);

/// Four-point (Catmull-Rom) periodic interpolation weights: smooth sampling
/// for particle advection through grid velocity fields.
struct CubicStencil {
    std::array<std::size_t, 3> first;  // lowest node index per axis
    double w[3][4];
};
CubicStencil cubic_stencil(const Grid& g, const std::array<double, 3>& p);

double interpolate_cubic(const ScalarField& f, const std::array<double, 3>& p);

// --- scatter ---------------------------------------------------------------------

/// Deposits particle-carried values onto the grid with the multilinear
/// weights (the transpose of the interpolation above) and divides by the
/// accumulated weight. A node receiving no weight at all raises an
/// integration error: the particle cloud no longer resolves the grid.
ScalarField scatter_values(const GridPtr& grid,
                           const std::vector<std::array<double, 3>>& positions,
                           const std::vector<double>& values);

struct PushforwardStats {
    double mass_defect = 0.0;   // |mass - 1| of the scattered density before renormalization
    double min_ratio = 0.0;
};

/// Pushforward of mu0 by the flow: each particle carries the mass-consistent
/// ratio r0(x)/exp(logJ(x)) to its endpoint; values are scattered with the
/// multilinear kernel and the result is renormalized to unit mass. The
/// renormalization magnitude is itself a discretization-error indicator.
Density pushforward_density(const FlowMap& flow, const Density& mu0,
                            PushforwardStats* stats = nullptr);

}  // namespace subrosa
