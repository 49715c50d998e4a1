#pragma once

#include <utility>
#include <vector>

#include "subrosa/frame.hpp"
#include "subrosa/poisson.hpp"

namespace subrosa {

/// Boltzmann relative entropy Ent(nu) = integral of log(nu/mu) d(nu).
/// Nonnegative for normalized densities (Jensen).
double entropy(const Density& nu);

enum class HeatStepper {
    ImplicitMidpoint,  // unconditionally stable, 2nd order; CG solve per step
    ExplicitRk4        // cross-check mode; requires dt under the stability bound
};

struct HeatOptions {
    HeatStepper stepper = HeatStepper::ImplicitMidpoint;
    double cg_tol = 1e-10;
    int order = 4;
};

struct HeatStepStat {
    double t;
    double entropy;
    double mass_drift;  // |mass(t) - mass(0)|
};

struct HeatTrajectory {
    std::vector<std::pair<double, Density>> snapshots;
    std::vector<HeatStepStat> steps;  // one entry per time step, including t = 0
};

/// Nonholonomic heat equation d(ratio)/dt = laplacian^tau(ratio) with respect
/// to the reference volume. Mass is conserved per step to round-off; loss of
/// positivity is an error (the continuous flow preserves it, so its numerical
/// loss signals under-resolution).
HeatTrajectory heat_evolve(const Density& nu0, double t_max, double dt, const Frame& frame,
                           const std::vector<double>& snapshot_times, const HeatOptions& opts = {});

/// Tangent vector at a density: a signed measure eta = eta_ratio * mu with
/// zero total integral.
struct TangentDensity {
    TangentDensity(Density base, ScalarField eta_ratio);
    Density base;
    ScalarField eta_ratio;
};

/// Nonholonomic Wasserstein metric on tangent densities: solves the
/// nu-weighted subriemannian Poisson equation -laplacian^tau_nu f_i =
/// eta_i/nu for both arguments and pairs the horizontal gradients against nu.
double wasserstein_metric(const TangentDensity& v1, const TangentDensity& v2, const Frame& frame,
                          double tol = 1e-8);

struct GradientFlowRow {
    double t;
    double entropy;
    double dent_dt;            // central difference (NaN at the ends)
    double metric_sq;          // |d nu/dt|^2 in the nonholonomic Wasserstein metric
    double defect;             // |dent_dt + metric_sq|
    double identity_residual;  // relative L2 of lap^tau_nu(log r) r - lap^tau_mu(r)
    double mass_drift;
};

struct GradientFlowReport {
    std::vector<GradientFlowRow> rows;
    double max_defect = 0.0;
    double max_identity_residual = 0.0;
    bool entropy_monotone = true;
};

/// Verifies the gradient-flow structure of the heat equation along a density
/// trajectory: dEnt/dt should equal -|d nu/dt|^2 in the nonholonomic
/// Wasserstein metric, and the two-Laplacian identity from its proof should
/// hold up to discretization.
GradientFlowReport gradient_flow_check(const std::vector<std::pair<double, Density>>& trajectory,
                                       const Frame& frame, double tol = 1e-8);

}  // namespace subrosa
