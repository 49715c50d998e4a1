#pragma once

#include <array>
#include <cstddef>
#include <utility>
#include <vector>

#include "subrosa/flowmap.hpp"
#include "subrosa/frame.hpp"

namespace subrosa {

/// A (position, covector) pair on the cotangent bundle of the torus.
struct CotangentState {
    std::array<double, 3> q{0.0, 0.0, 0.0};
    std::array<double, 3> p{0.0, 0.0, 0.0};
};

/// Subriemannian kinetic energy H(q,p) = 1/2 sum_i (p . X_i(q))^2, evaluated
/// through the frame's registered expressions (exact off-grid).
double sub_hamiltonian(const CotangentState& state, const Frame& frame);

/// One RK4 step of Hamilton's equations for the subriemannian Hamiltonian;
/// the single code path used for lone trajectories and particle ensembles
/// alike, so the two are bit-identical.
void hamiltonian_step(CotangentState& state, double dt, const Frame& frame);

/// Fixed step subdivision of [0, t]: full steps of size dt plus one closing
/// partial step. Shared by every integrator so schedules always agree.
std::vector<double> integration_schedule(double t, double dt);

struct GeodesicTrajectory {
    std::vector<double> times;
    std::vector<CotangentState> states;
    std::vector<double> hamiltonian;

    const CotangentState& endpoint() const { return states.back(); }
    /// max_t |H(t) - H(0)| / max(|H(0)|, eps)
    double relative_energy_drift() const;
};

/// Normal subriemannian geodesic: integrates the Hamiltonian flow from
/// (q0, p0) to time t and records H along the way. The endpoint projection is
/// the subriemannian exponential of t*p0.
GeodesicTrajectory exp_tau(const std::array<double, 3>& q0, const std::array<double, 3>& p0,
                           double t, const Frame& frame, double dt);

struct HorizontalExpReport {
    bool shock_flag = false;
    double min_neighbor_separation = 0.0;  // in units of the grid spacing
    double min_jacobian = 0.0;
};

/// Horizontal exponential: seeds (x, df(x)) at every node, integrates each
/// by the Hamiltonian flow to time t, and reads the log-Jacobians off central
/// differences of neighboring trajectories. Detects particle folding.
FlowMap horizontal_exponential(const ScalarField& f, double t, const Frame& frame, double dt,
                               HorizontalExpReport* report = nullptr, int order = 4);

struct PotentialPath {
    std::vector<double> times;
    std::vector<ScalarField> fields;
    std::vector<char> shock_flags;
};

/// Hamilton-Jacobi evolution d f/dt + H(grad f) = 0 by characteristics:
/// values ride the particles as f0(x) + t H0(x), which is exact because H is
/// quadratic and conserved; fields are scattered back to the grid at the
/// snapshot times. Post-shock snapshots are flagged, not trusted.
PotentialPath hj_evolve(const ScalarField& f0, double t_max, const Frame& frame, double dt,
                        std::size_t snapshots = 5, int order = 4);

/// Wasserstein geodesic through nu with potential f: the pushforward of nu
/// by the horizontal exponential at time t.
Density displacement_interpolation(const Density& nu, const ScalarField& f, double t,
                                   const Frame& frame, double dt,
                                   HorizontalExpReport* report = nullptr);

/// Pointwise transport defect h(phi(x)) det(D phi(x)) - g(x), indexed by seed.
ScalarField monge_ampere_residual(const FlowMap& flow, const ScalarField& g,
                                  const ScalarField& h);

/// Max over interior sample times of || d_t V + (V.grad)V ||_2, with V
/// reconstructed on the grid from particle velocities. Flat full-rank frames
/// only; rejects folded flows.
double burgers_residual(const std::vector<std::pair<double, FlowMap>>& path, const Frame& frame);

}  // namespace subrosa
