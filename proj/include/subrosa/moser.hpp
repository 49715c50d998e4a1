#pragma once

#include <utility>
#include <vector>

#include "subrosa/flowmap.hpp"
#include "subrosa/frame.hpp"
#include "subrosa/poisson.hpp"

namespace subrosa {

struct SubstepDiagnostics {
    double t;                        // midpoint time of the substep
    int cg_iterations;
    double cg_residual;
    double source_mean;              // integral of rho_t against mu_t (re-verified, not assumed)
    double horizontality_residual;   // max |V - P^tau V| over nodes
};

struct TransportReport {
    double l1_error = 0.0;
    double l2_error = 0.0;
    double linf_error = 0.0;
    double horizontality_residual = 0.0;  // max over substeps
    double mass_defect = 0.0;             // scatter renormalization magnitude
    double monge_ampere_l2 = 0.0;
    std::vector<SubstepDiagnostics> substeps;
};

struct MoserOptions {
    /// Stop the flow at this time along the density segment; 1.0 transports
    /// mu0 all the way to mu1. Must be a multiple of 1/steps.
    double t_end = 1.0;
    /// Re-solve the Poisson problem at each RK stage instead of freezing the
    /// midpoint velocity over the substep.
    bool per_stage_solves = false;
    int order = 4;
};

/// Nonholonomic Moser flow: transports mu0 to mu1 along the density segment
/// mu_t = mu0 + t(mu1 - mu0), solving laplacian^tau u = (r0 - r1)/r_t per
/// substep and advecting grid-seeded particles with the horizontal field
/// V = P^tau grad u. Requires equal total masses.
std::pair<FlowMap, TransportReport> moser_flow(const Density& mu0, const Density& mu1,
                                               const Frame& frame, int steps, double tol,
                                               const MoserOptions& opts = {});

/// Compares the pushforward of mu0 under the flow against mu1 in L1/L2/Linf
/// and evaluates the Monge-Ampere residual.
TransportReport verify_transport(const FlowMap& flow, const Density& mu0, const Density& mu1);

/// Cross-validation route: approximates the time-t_end density by backward
/// (semi-Lagrangian) characteristics instead of forward scatter. Uses the
/// same per-substep Poisson solves in reverse order.
Density moser_pullback(const Density& mu0, const Density& mu1, const Frame& frame, int steps,
                       double tol, const MoserOptions& opts = {});

/// Density on the linear segment at time t (convex combination of ratios).
Density segment_density(const Density& mu0, const Density& mu1, double t);

}  // namespace subrosa
