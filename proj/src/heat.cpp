#include "subrosa/heat.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <sstream>

#include "subrosa/parallel.hpp"

namespace subrosa {

double entropy(const Density& nu) {
    const auto rv = nu.ratio().values();
    for (const double r : rv)
        if (!(r > 1e-12))
            throw integration_error("entropy: density ratio at or below the positivity floor");
    const double s = par::indexed_sum(rv.size(),
                                      [&](std::size_t i) { return rv[i] * std::log(rv[i]); });
    return s / static_cast<double>(nu.grid()->size());
}

namespace {

ScalarField ratio_field(const Density& d) {
    return ScalarField(d.grid(), std::vector<double>(d.ratio().values().begin(),
                                                     d.ratio().values().end()));
}

// CG solve of (I - (dt/2) L) w = b in the mu-weighted inner product. The
// operator is symmetric positive definite (L is negative semidefinite), so no
// deflation is needed; starting from the previous ratio keeps the mean exact.
class MidpointSolver {
public:
    MidpointSolver(const Frame& frame, const Density& mu, double half_dt, double tol, int order)
        : op_(frame, mu, order), half_dt_(half_dt), tol_(tol) {
        const std::size_t n = frame.grid()->size();
        lw_.resize(n);
        r_.resize(n);
        p_.resize(n);
        ap_.resize(n);
    }

    void apply(std::span<const double> in, std::span<double> out) {
        op_.apply(in, lw_);
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[i] - half_dt_ * lw_[i];
    }

    // x holds the previous ratio on entry (the initial guess) and the new
    // ratio on exit.
    void solve(std::span<const double> b, std::span<double> x) {
        const std::size_t n = b.size();
        auto dot = [&](std::span<const double> u, std::span<const double> v) {
            return par::indexed_sum(n, [&](std::size_t i) { return u[i] * v[i]; }) /
                   static_cast<double>(n);
        };
        const double bnorm = std::sqrt(std::max(dot(b, b), 1e-300));
        apply(x, r_);
        for (std::size_t i = 0; i < n; ++i) r_[i] = b[i] - r_[i];
        std::copy(r_.begin(), r_.end(), p_.begin());
        double rr = dot(r_, r_);
        const std::size_t max_iter =
            static_cast<std::size_t>(50.0 * std::sqrt(static_cast<double>(n))) + 100;
        std::size_t it = 0;
        while (std::sqrt(rr) > tol_ * bnorm) {
            if (it++ >= max_iter)
                throw solver_error("heat step conjugate gradient failed to converge");
            apply(p_, ap_);
            const double alpha = rr / dot(p_, ap_);
            for (std::size_t i = 0; i < n; ++i) {
                x[i] += alpha * p_[i];
                r_[i] -= alpha * ap_[i];
            }
            const double rr_next = dot(r_, r_);
            const double beta = rr_next / rr;
            for (std::size_t i = 0; i < n; ++i) p_[i] = r_[i] + beta * p_[i];
            rr = rr_next;
        }
    }

    const SubLaplacianOperator& op() const { return op_; }

private:
    SubLaplacianOperator op_;
    double half_dt_;
    double tol_;
    std::vector<double> lw_, r_, p_, ap_;
};

}  // namespace

HeatTrajectory heat_evolve(const Density& nu0, double t_max, double dt, const Frame& frame,
                           const std::vector<double>& snapshot_times, const HeatOptions& opts) {
    require_same_grid(*nu0.grid(), *frame.grid(), "heat_evolve");
    if (!(dt > 0.0)) throw config_error("heat_evolve needs dt > 0");
    if (!(t_max >= 0.0)) throw config_error("heat_evolve needs t_max >= 0");
    const GridPtr& grid = nu0.grid();
    const Density mu = Density::uniform(grid);

    if (opts.stepper == HeatStepper::ExplicitRk4) {
        // Conservative stability estimate for the explicit mode: the largest
        // stencil symbol per axis times the frame magnitude.
        double lam = 0.0;
        for (int a = 0; a < grid->dim(); ++a) {
            const double mult = 1.4 / grid->spacing(a);  // peak of the order-4 symbol
            lam += mult * mult;
        }
        double frame_sq = 0.0;
        for (int i = 0; i < frame.rank(); ++i)
            frame_sq = std::max(frame_sq, norm_linf(frame.field(i)));
        lam *= std::max(1.0, frame_sq * frame_sq);
        if (dt * lam > 2.7)
            throw config_error("heat_evolve: dt exceeds the explicit stability bound");
    }

    const std::size_t nsteps = static_cast<std::size_t>(std::ceil(t_max / dt - 1e-9));

    // Snapshots snap to the nearest step boundary.
    std::vector<std::size_t> snap_steps;
    snap_steps.reserve(snapshot_times.size());
    for (const double ts : snapshot_times) {
        if (ts < -1e-12 || ts > t_max + 1e-9)
            throw config_error("heat_evolve snapshot time outside [0, t_max]");
        snap_steps.push_back(static_cast<std::size_t>(std::lround(
            std::clamp(ts / dt, 0.0, static_cast<double>(nsteps)))));
    }

    HeatTrajectory traj;
    ScalarField r = ratio_field(nu0);
    const double mass0 = par::sum(r.values()) / static_cast<double>(grid->size());

    auto record_step = [&](std::size_t step) {
        const double t = static_cast<double>(step) * dt;
        Density d = Density::raw(grid, std::vector<double>(r.values().begin(), r.values().end()));
        const double mass = par::sum(r.values()) / static_cast<double>(grid->size());
        traj.steps.push_back({t, entropy(d), std::abs(mass - mass0)});
        for (std::size_t s = 0; s < snap_steps.size(); ++s)
            if (snap_steps[s] == step) traj.snapshots.emplace_back(t, d);
    };

    MidpointSolver solver(frame, mu, 0.5 * dt, opts.cg_tol, opts.order);
    std::vector<double> b(grid->size());
    std::vector<double> lr(grid->size());

    record_step(0);
    for (std::size_t step = 1; step <= nsteps; ++step) {
        if (opts.stepper == HeatStepper::ImplicitMidpoint) {
            solver.op().apply(r.values(), lr);
            for (std::size_t i = 0; i < b.size(); ++i) b[i] = r[i] + 0.5 * dt * lr[i];
            solver.solve(b, r.values());
        } else {
            auto l = [&](const ScalarField& w) { return sub_laplacian(w, frame, mu, opts.order); };
            ScalarField k1 = l(r);
            ScalarField k2 = l(r + (0.5 * dt) * k1);
            ScalarField k3 = l(r + (0.5 * dt) * k2);
            ScalarField k4 = l(r + dt * k3);
            for (std::size_t i = 0; i < r.size(); ++i)
                r[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        double mn = r[0];
        for (const double v : r.values()) mn = std::min(mn, v);
        if (!(mn > 1e-12)) {
            std::ostringstream os;
            os << "heat flow lost positivity at t = " << static_cast<double>(step) * dt
               << " (minimum ratio " << mn << "); refine the discretization";
            throw integration_error(os.str());
        }
        record_step(step);
    }
    return traj;
}

TangentDensity::TangentDensity(Density base_in, ScalarField eta_in)
    : base(std::move(base_in)), eta_ratio(std::move(eta_in)) {
    require_same_grid(*base.grid(), *eta_ratio.grid(), "TangentDensity");
    const Density mu = Density::uniform(base.grid());
    const double mean = integrate(eta_ratio, mu);
    const double scale = std::max(1.0, norm_linf(eta_ratio));
    if (std::abs(mean) > 1e-12 * scale)
        throw structural_error("tangent density must have zero total integral");
}

double wasserstein_metric(const TangentDensity& v1, const TangentDensity& v2, const Frame& frame,
                          double tol) {
    require_same_grid(*v1.base.grid(), *frame.grid(), "wasserstein_metric");
    require_same_grid(*v1.base.grid(), *v2.base.grid(), "wasserstein_metric");
    const auto b1 = v1.base.ratio().values();
    const auto b2 = v2.base.ratio().values();
    if (std::memcmp(b1.data(), b2.data(), b1.size() * sizeof(double)) != 0)
        throw structural_error("wasserstein_metric: tangent vectors have different base densities");

    const GridPtr& grid = v1.base.grid();
    auto potential = [&](const TangentDensity& v) {
        std::vector<double> rho(grid->size());
        for (std::size_t i = 0; i < grid->size(); ++i)
            rho[i] = -v.eta_ratio[i] / v.base[i];
        return solve_poisson(ScalarField(grid, std::move(rho)), frame, v.base, tol);
    };
    const PoissonSolution f1 = potential(v1);
    const PoissonSolution f2 = potential(v2);

    const auto c1 = horizontal_coefficients(f1.u, frame);
    const auto c2 = horizontal_coefficients(f2.u, frame);
    double metric = 0.0;
    for (std::size_t i = 0; i < c1.size(); ++i)
        metric += inner(c1[i], c2[i], v1.base);
    return metric;
}

GradientFlowReport gradient_flow_check(const std::vector<std::pair<double, Density>>& trajectory,
                                       const Frame& frame, double tol) {
    if (trajectory.size() < 3)
        throw structural_error("gradient_flow_check needs at least three snapshots");
    const GridPtr& grid = trajectory.front().second.grid();
    const Density mu = Density::uniform(grid);
    GradientFlowReport report;
    const double mass0 = trajectory.front().second.mass();

    std::vector<double> entropies(trajectory.size());
    for (std::size_t j = 0; j < trajectory.size(); ++j)
        entropies[j] = entropy(trajectory[j].second);

    for (std::size_t j = 0; j < trajectory.size(); ++j) {
        const double t = trajectory[j].first;
        const Density& nu = trajectory[j].second;
        GradientFlowRow row{t, entropies[j], std::numeric_limits<double>::quiet_NaN(),
                            std::numeric_limits<double>::quiet_NaN(),
                            std::numeric_limits<double>::quiet_NaN(), 0.0,
                            std::abs(nu.mass() - mass0)};

        // Two-Laplacian identity from the gradient-flow proof:
        // lap^tau_nu(log r) * r = lap^tau_mu(r); reported as relative L2.
        ScalarField logr(grid);
        for (std::size_t i = 0; i < logr.size(); ++i) logr[i] = std::log(nu[i]);
        ScalarField lhs = sub_laplacian(logr, frame, nu);
        for (std::size_t i = 0; i < lhs.size(); ++i) lhs[i] *= nu[i];
        ScalarField rhs = sub_laplacian(ratio_field(nu), frame, mu);
        const double rhs_norm = norm_l2(rhs, mu);
        row.identity_residual = norm_l2(lhs - rhs, mu) / std::max(rhs_norm, 1e-300);
        report.max_identity_residual =
            std::max(report.max_identity_residual, row.identity_residual);

        if (j > 0 && j + 1 < trajectory.size()) {
            const double span = trajectory[j + 1].first - trajectory[j - 1].first;
            row.dent_dt = (entropies[j + 1] - entropies[j - 1]) / span;
            ScalarField eta(grid);
            for (std::size_t i = 0; i < eta.size(); ++i)
                eta[i] = (trajectory[j + 1].second[i] - trajectory[j - 1].second[i]) / span;
            // Remove the round-off mean so the tangent constraint holds exactly.
            const double mean = integrate(eta, mu);
            for (auto& v : eta.values()) v -= mean;
            TangentDensity tangent(nu, std::move(eta));
            row.metric_sq = wasserstein_metric(tangent, tangent, frame, tol);
            row.defect = std::abs(row.dent_dt + row.metric_sq);
            report.max_defect = std::max(report.max_defect, row.defect);
        }
        report.rows.push_back(std::move(row));
    }

    for (std::size_t j = 1; j < trajectory.size(); ++j)
        if (entropies[j] > entropies[j - 1] + 1e-12) report.entropy_monotone = false;
    return report;
}

}  // namespace subrosa
