#include "subrosa/moser.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "subrosa/geodesics.hpp"
#include "subrosa/parallel.hpp"

namespace subrosa {

Density segment_density(const Density& mu0, const Density& mu1, double t) {
    require_same_grid(*mu0.grid(), *mu1.grid(), "segment_density");
    const std::size_t n = mu0.grid()->size();
    std::vector<double> r(n);
    for (std::size_t i = 0; i < n; ++i) r[i] = mu0[i] + t * (mu1[i] - mu0[i]);
    return Density::raw(mu0.grid(), std::move(r));
}

namespace {

struct VelocityField {
    const VectorField* v;
    const ScalarField* div_vol;
};

// Smooth fused sample of the velocity components and the volume divergence
// at one point: one cubic stencil, four fields.
void sample_stage(const VelocityField& f, const std::array<double, 3>& q, int n,
                  std::array<double, 3>& vel, double& div) {
    const Grid& g = *f.v->grid();
    const CubicStencil st = cubic_stencil(g, q);
    vel = {0.0, 0.0, 0.0};
    div = 0.0;
    const int stops = n == 2 ? 16 : 64;
    for (int corner = 0; corner < stops; ++corner) {
        int rem = corner;
        double w = 1.0;
        std::array<std::size_t, 3> idx{0, 0, 0};
        for (int a = 0; a < n; ++a) {
            const int k = rem % 4;
            rem /= 4;
            w *= st.w[a][k];
            idx[static_cast<std::size_t>(a)] =
                (st.first[static_cast<std::size_t>(a)] + static_cast<std::size_t>(k)) %
                g.extent(a);
        }
        const std::size_t node = g.flatten(idx);
        for (int a = 0; a < n; ++a)
            vel[static_cast<std::size_t>(a)] += w * f.v->at(a, node);
        div += w * (*f.div_vol)[node];
    }
}

// One RK4 step of the particle-plus-log-Jacobian system
//   dq/dt = V(q),  d(logJ)/dt = div_vol(V)(q)
// with the velocity fields held per stage. Positions stay unwrapped.
void advect_rk4(std::vector<std::array<double, 3>>& pos, std::vector<double>& logj,
                const VelocityField& f1, const VelocityField& f23, const VelocityField& f4,
                double dt, int n) {
    par::parallel_for(pos.size(), [&](std::size_t begin, std::size_t end) {
        std::array<double, 3> k1, k2, k3, k4;
        double j1, j2, j3, j4;
        for (std::size_t i = begin; i < end; ++i) {
            const std::array<double, 3> q = pos[i];
            sample_stage(f1, q, n, k1, j1);
            std::array<double, 3> q2 = q;
            for (int a = 0; a < n; ++a) q2[a] += 0.5 * dt * k1[a];
            sample_stage(f23, q2, n, k2, j2);
            std::array<double, 3> q3 = q;
            for (int a = 0; a < n; ++a) q3[a] += 0.5 * dt * k2[a];
            sample_stage(f23, q3, n, k3, j3);
            std::array<double, 3> q4 = q;
            for (int a = 0; a < n; ++a) q4[a] += dt * k3[a];
            sample_stage(f4, q4, n, k4, j4);
            for (int a = 0; a < n; ++a)
                pos[i][a] = q[a] + dt / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
            logj[i] += dt / 6.0 * (j1 + 2.0 * j2 + 2.0 * j3 + j4);
        }
    });
    // Exceptions cannot cross worker threads; validate on the calling thread.
    for (std::size_t i = 0; i < pos.size(); ++i)
        for (int a = 0; a < n; ++a)
            if (!std::isfinite(pos[i][a]) || !std::isfinite(logj[i]))
                throw integration_error("particle advection produced a non-finite state");
}

struct SubstepField {
    VectorField velocity;
    ScalarField div_vol;
    double horizontality;
};

}  // namespace

namespace detail {

// Warm-start state: the potential changes smoothly along the density segment,
// so a secant extrapolation of the two previous solves is a strong initial
// guess and cuts the CG iteration count substantially.
struct WarmStart {
    ScalarField prev;
    ScalarField prev2;
    int solves = 0;

    explicit WarmStart(const GridPtr& grid) : prev(grid), prev2(grid) {}

    ScalarField guess() const {
        if (solves == 0) return prev;  // zeros
        if (solves == 1) return prev;
        ScalarField g(prev.grid());
        for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * prev[i] - prev2[i];
        return g;
    }

    void push(const ScalarField& u) {
        prev2 = prev;
        prev = u;
        ++solves;
    }
};

// Solve the homological equation at segment time t and return the horizontal
// velocity field with its volume divergence.
SubstepField moser_velocity(const Density& mu0, const Density& mu1, const Frame& frame,
                            double t, double tol, int order, WarmStart* warm,
                            SubstepDiagnostics* diag) {
    const GridPtr& grid = mu0.grid();
    Density mu_t = segment_density(mu0, mu1, t);
    const std::size_t n = grid->size();
    std::vector<double> rho(n);
    for (std::size_t i = 0; i < n; ++i) rho[i] = (mu0[i] - mu1[i]) / mu_t[i];
    ScalarField rho_f(grid, std::move(rho));

    const double source_mean = integrate(rho_f, mu_t);
    if (std::abs(source_mean) > 1e-10)
        throw solver_error("moser flow: segment source lost its zero mean");

    CgOptions cg;
    cg.order = order;
    ScalarField guess(grid);
    if (warm) {
        guess = warm->guess();
        cg.initial_guess = &guess;
    }
    PoissonSolution sol = solve_poisson(rho_f, frame, mu_t, tol, cg);
    if (warm) warm->push(sol.u);

    SubstepField out{horizontal_gradient(sol.u, frame, order), ScalarField(grid), 0.0};
    Density uniform = Density::uniform(grid);
    out.div_vol = divergence(out.velocity, uniform, order);

    VectorField proj = project_tau(out.velocity, frame);
    out.horizontality = norm_linf(out.velocity - proj);

    if (diag) {
        diag->t = t;
        diag->cg_iterations = sol.iterations;
        diag->cg_residual = sol.residual_norm;
        diag->source_mean = source_mean;
        diag->horizontality_residual = out.horizontality;
    }
    return out;
}

}  // namespace detail

std::pair<FlowMap, TransportReport> moser_flow(const Density& mu0, const Density& mu1,
                                               const Frame& frame, int steps, double tol,
                                               const MoserOptions& opts) {
    require_same_grid(*mu0.grid(), *mu1.grid(), "moser_flow");
    require_same_grid(*mu0.grid(), *frame.grid(), "moser_flow");
    if (steps < 1) throw config_error("moser flow needs at least one substep");
    const double mass0 = mu0.mass();
    const double mass1 = mu1.mass();
    if (std::abs(mass0 - mass1) > 1e-10) {
        std::ostringstream os;
        os << "solvability violation: total volumes differ (" << mass0 << " vs " << mass1
           << "); the Moser flow requires equal masses";
        throw solver_error(os.str());
    }

    const double dt = 1.0 / static_cast<double>(steps);
    const double nsub_real = opts.t_end * static_cast<double>(steps);
    const int nsub = static_cast<int>(std::lround(nsub_real));
    if (nsub < 0 || std::abs(nsub_real - static_cast<double>(nsub)) > 1e-9)
        throw config_error("moser flow: t_end must be a multiple of 1/steps");

    const GridPtr& grid = mu0.grid();
    const int n = grid->dim();
    FlowMap flow = FlowMap::identity(grid);
    std::vector<std::array<double, 3>> pos = flow.positions;  // unwrapped during integration

    TransportReport report;
    report.substeps.reserve(static_cast<std::size_t>(nsub));
    detail::WarmStart warm(grid);

    for (int j = 0; j < nsub; ++j) {
        const double t0 = static_cast<double>(j) * dt;
        SubstepDiagnostics diag{};
        if (opts.per_stage_solves) {
            SubstepField fa = detail::moser_velocity(mu0, mu1, frame, t0, tol, opts.order,
                                                     &warm, nullptr);
            SubstepField fb = detail::moser_velocity(mu0, mu1, frame, t0 + 0.5 * dt, tol,
                                                     opts.order, &warm, &diag);
            SubstepField fc = detail::moser_velocity(mu0, mu1, frame, t0 + dt, tol, opts.order,
                                                     &warm, nullptr);
            advect_rk4(pos, flow.log_jacobian, {&fa.velocity, &fa.div_vol},
                       {&fb.velocity, &fb.div_vol}, {&fc.velocity, &fc.div_vol}, dt, n);
            diag.horizontality_residual =
                std::max({fa.horizontality, fb.horizontality, fc.horizontality});
        } else {
            SubstepField f = detail::moser_velocity(mu0, mu1, frame, t0 + 0.5 * dt, tol,
                                                    opts.order, &warm, &diag);
            const VelocityField vf{&f.velocity, &f.div_vol};
            advect_rk4(pos, flow.log_jacobian, vf, vf, vf, dt, n);
        }
        report.horizontality_residual =
            std::max(report.horizontality_residual, diag.horizontality_residual);
        report.substeps.push_back(diag);
    }

    flow.t_final = opts.t_end;
    flow.positions.resize(pos.size());
    for (std::size_t i = 0; i < pos.size(); ++i) flow.positions[i] = grid->wrap(pos[i]);

    Density target = (opts.t_end == 1.0) ? mu1 : segment_density(mu0, mu1, opts.t_end);
    TransportReport errors = verify_transport(flow, mu0, target);
    errors.horizontality_residual = report.horizontality_residual;
    errors.substeps = std::move(report.substeps);
    return {std::move(flow), std::move(errors)};
}

TransportReport verify_transport(const FlowMap& flow, const Density& mu0, const Density& mu1) {
    require_same_grid(*flow.grid, *mu0.grid(), "verify_transport");
    require_same_grid(*flow.grid, *mu1.grid(), "verify_transport");
    TransportReport report;
    PushforwardStats stats;
    Density pushed = pushforward_density(flow, mu0, &stats);
    report.mass_defect = stats.mass_defect;

    const Density uniform = Density::uniform(flow.grid);
    ScalarField diff = pushed.ratio() - mu1.ratio();
    report.l1_error = norm_l1(diff, uniform);
    report.l2_error = norm_l2(diff, uniform);
    report.linf_error = norm_linf(diff);

    ScalarField ma = monge_ampere_residual(flow, mu0.ratio(), mu1.ratio());
    report.monge_ampere_l2 = norm_l2(ma, uniform);
    return report;
}

Density moser_pullback(const Density& mu0, const Density& mu1, const Frame& frame, int steps,
                       double tol, const MoserOptions& opts) {
    require_same_grid(*mu0.grid(), *mu1.grid(), "moser_pullback");
    if (steps < 1) throw config_error("moser pullback needs at least one substep");
    if (std::abs(mu0.mass() - mu1.mass()) > 1e-10)
        throw solver_error("solvability violation: total volumes differ");

    const double dt = 1.0 / static_cast<double>(steps);
    const int nsub = static_cast<int>(std::lround(opts.t_end * steps));
    const GridPtr& grid = mu0.grid();
    const int n = grid->dim();

    std::vector<std::array<double, 3>> pos(grid->size());
    std::vector<double> logj(grid->size(), 0.0);
    for (std::size_t i = 0; i < grid->size(); ++i) pos[i] = grid->node(i);

    detail::WarmStart warm(grid);
    // Integrate characteristics backward: from t_end down to 0 against -V_t.
    for (int j = nsub - 1; j >= 0; --j) {
        const double t_mid = (static_cast<double>(j) + 0.5) * dt;
        SubstepField f = detail::moser_velocity(mu0, mu1, frame, t_mid, tol, opts.order, &warm,
                                                nullptr);
        VectorField neg_v = -1.0 * f.velocity;
        ScalarField neg_div = -1.0 * f.div_vol;
        const VelocityField vf{&neg_v, &neg_div};
        advect_rk4(pos, logj, vf, vf, vf, dt, n);
    }

    // Pullback ratio at each node: r0 at the preimage times det(D phi^{-1}),
    // whose log is exactly the backward-accumulated divergence integral.
    std::vector<double> ratio(grid->size());
    for (std::size_t i = 0; i < grid->size(); ++i)
        ratio[i] = interpolate_cubic(mu0.ratio(), grid->wrap(pos[i])) * std::exp(logj[i]);
    return Density::normalized(grid, std::move(ratio));
}

}  // namespace subrosa
