#include "subrosa/geodesics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "subrosa/parallel.hpp"

namespace subrosa {

namespace {

struct HamiltonianRhs {
    std::array<double, 3> dq{0.0, 0.0, 0.0};
    std::array<double, 3> dp{0.0, 0.0, 0.0};
};

// dq/dt = dH/dp = sum_i c_i X_i,  dp/dt = -dH/dq with
// c_i = p . X_i(q) and the coefficient derivatives taken symbolically.
HamiltonianRhs rhs(const CotangentState& s, const Frame& frame) {
    const int k = frame.rank();
    const int n = frame.grid()->dim();
    double x[3][3];
    double dx[3][3][3];
    frame.eval_at(s.q, x);
    frame.eval_derivatives_at(s.q, dx);
    double c[3] = {0.0, 0.0, 0.0};
    for (int i = 0; i < k; ++i)
        for (int a = 0; a < n; ++a) c[i] += s.p[static_cast<std::size_t>(a)] * x[i][a];
    HamiltonianRhs out;
    for (int a = 0; a < n; ++a) {
        double dq = 0.0, dh = 0.0;
        for (int i = 0; i < k; ++i) {
            dq += c[i] * x[i][a];
            double pdxa = 0.0;
            for (int b = 0; b < n; ++b) pdxa += s.p[static_cast<std::size_t>(b)] * dx[i][b][a];
            dh += c[i] * pdxa;
        }
        out.dq[static_cast<std::size_t>(a)] = dq;
        out.dp[static_cast<std::size_t>(a)] = -dh;
    }
    return out;
}

CotangentState shifted(const CotangentState& s, const HamiltonianRhs& k, double scale, int n) {
    CotangentState out = s;
    for (int a = 0; a < n; ++a) {
        out.q[static_cast<std::size_t>(a)] += scale * k.dq[static_cast<std::size_t>(a)];
        out.p[static_cast<std::size_t>(a)] += scale * k.dp[static_cast<std::size_t>(a)];
    }
    return out;
}

}  // namespace

double sub_hamiltonian(const CotangentState& state, const Frame& frame) {
    const int k = frame.rank();
    const int n = frame.grid()->dim();
    double x[3][3];
    frame.eval_at(state.q, x);
    double h = 0.0;
    for (int i = 0; i < k; ++i) {
        double c = 0.0;
        for (int a = 0; a < n; ++a) c += state.p[static_cast<std::size_t>(a)] * x[i][a];
        h += 0.5 * c * c;
    }
    return h;
}

void hamiltonian_step(CotangentState& state, double dt, const Frame& frame) {
    const int n = frame.grid()->dim();
    const HamiltonianRhs k1 = rhs(state, frame);
    const HamiltonianRhs k2 = rhs(shifted(state, k1, 0.5 * dt, n), frame);
    const HamiltonianRhs k3 = rhs(shifted(state, k2, 0.5 * dt, n), frame);
    const HamiltonianRhs k4 = rhs(shifted(state, k3, dt, n), frame);
    for (int a = 0; a < n; ++a) {
        const auto ua = static_cast<std::size_t>(a);
        state.q[ua] += dt / 6.0 * (k1.dq[ua] + 2.0 * k2.dq[ua] + 2.0 * k3.dq[ua] + k4.dq[ua]);
        state.p[ua] += dt / 6.0 * (k1.dp[ua] + 2.0 * k2.dp[ua] + 2.0 * k3.dp[ua] + k4.dp[ua]);
    }
}

std::vector<double> integration_schedule(double t, double dt) {
    if (!(dt > 0.0)) throw config_error("integration step must be positive");
    if (t < 0.0) throw config_error("integration time must be nonnegative");
    std::vector<double> steps;
    const double nfull = std::floor(t / dt + 1e-9);
    steps.assign(static_cast<std::size_t>(nfull), dt);
    const double rest = t - nfull * dt;
    if (rest > 1e-12 * std::max(1.0, t)) steps.push_back(rest);
    return steps;
}

double GeodesicTrajectory::relative_energy_drift() const {
    if (hamiltonian.empty()) return 0.0;
    const double h0 = hamiltonian.front();
    double drift = 0.0;
    for (const double h : hamiltonian) drift = std::max(drift, std::abs(h - h0));
    return drift / std::max(std::abs(h0), 1e-30);
}

GeodesicTrajectory exp_tau(const std::array<double, 3>& q0, const std::array<double, 3>& p0,
                           double t, const Frame& frame, double dt) {
    GeodesicTrajectory traj;
    CotangentState s{q0, p0};
    const auto steps = integration_schedule(t, dt);
    traj.times.reserve(steps.size() + 1);
    traj.states.reserve(steps.size() + 1);
    traj.hamiltonian.reserve(steps.size() + 1);
    double time = 0.0;
    traj.times.push_back(time);
    traj.states.push_back(s);
    traj.hamiltonian.push_back(sub_hamiltonian(s, frame));
    for (const double h : steps) {
        hamiltonian_step(s, h, frame);
        time += h;
        for (int a = 0; a < frame.grid()->dim(); ++a) {
            const auto ua = static_cast<std::size_t>(a);
            if (!std::isfinite(s.q[ua]) || !std::isfinite(s.p[ua]))
                throw integration_error("geodesic integration produced a non-finite state");
        }
        traj.times.push_back(time);
        traj.states.push_back(s);
        traj.hamiltonian.push_back(sub_hamiltonian(s, frame));
    }
    return traj;
}

namespace {

// Log-Jacobian of the seed-to-position map from central differences of
// neighboring trajectories: D phi = I + grad(displacement) over the seed
// lattice. Displacements are periodic grid functions, so no unwrapping
// gymnastics are needed at the seam.
struct JacobianScan {
    std::vector<double> logj;
    double min_det = std::numeric_limits<double>::infinity();
    double min_separation = std::numeric_limits<double>::infinity();  // units of spacing
    bool shock = false;
};

JacobianScan jacobian_from_neighbors(const Grid& grid,
                                     const std::vector<std::array<double, 3>>& displacement) {
    const int n = grid.dim();
    const std::size_t size = grid.size();
    JacobianScan scan;
    scan.logj.assign(size, 0.0);
    std::vector<double> dets(size, 0.0);
    std::vector<double> seps(size, std::numeric_limits<double>::infinity());

    par::parallel_for(size, [&](std::size_t begin, std::size_t end) {
        for (std::size_t node = begin; node < end; ++node) {
            double jac[3][3] = {};
            double min_sep = std::numeric_limits<double>::infinity();
            const auto idx = grid.unflatten(node);
            for (int a = 0; a < n; ++a) {
                const auto ua = static_cast<std::size_t>(a);
                const std::size_t m = grid.extent(a);
                auto plus = idx;
                auto minus = idx;
                plus[ua] = (idx[ua] + 1) % m;
                minus[ua] = (idx[ua] + m - 1) % m;
                const std::size_t ip = grid.flatten(plus);
                const std::size_t im = grid.flatten(minus);
                const double h = grid.spacing(a);
                for (int c = 0; c < n; ++c) {
                    const auto uc = static_cast<std::size_t>(c);
                    jac[c][a] = ((c == a) ? 1.0 : 0.0) +
                                (displacement[ip][uc] - displacement[im][uc]) / (2.0 * h);
                }
                // separation between this particle and its +1 neighbor
                double sep2 = 0.0;
                for (int c = 0; c < n; ++c) {
                    const auto uc = static_cast<std::size_t>(c);
                    double d = displacement[ip][uc] - displacement[node][uc];
                    if (c == a) d += h;
                    sep2 += d * d;
                }
                min_sep = std::min(min_sep, std::sqrt(sep2) / h);
            }
            double det;
            if (n == 2) {
                det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            } else {
                det = jac[0][0] * (jac[1][1] * jac[2][2] - jac[1][2] * jac[2][1]) -
                      jac[0][1] * (jac[1][0] * jac[2][2] - jac[1][2] * jac[2][0]) +
                      jac[0][2] * (jac[1][0] * jac[2][1] - jac[1][1] * jac[2][0]);
            }
            dets[node] = det;
            seps[node] = min_sep;
            scan.logj[node] = std::log(std::max(std::abs(det), 1e-300));
        }
    });
    for (std::size_t node = 0; node < size; ++node) {
        scan.min_det = std::min(scan.min_det, dets[node]);
        scan.min_separation = std::min(scan.min_separation, seps[node]);
    }
    scan.shock = scan.min_det <= 0.0 || scan.min_separation < 0.01;
    return scan;
}

struct EnsembleState {
    std::vector<CotangentState> particles;  // q unwrapped
    std::vector<std::array<double, 3>> seeds;
};

EnsembleState seed_ensemble(const ScalarField& f, const Frame& frame, int order) {
    require_same_grid(*f.grid(), *frame.grid(), "horizontal_exponential");
    const GridPtr& grid = f.grid();
    VectorField df = grad(f, order);
    EnsembleState ens;
    ens.particles.resize(grid->size());
    ens.seeds.resize(grid->size());
    for (std::size_t i = 0; i < grid->size(); ++i) {
        CotangentState s;
        s.q = grid->node(i);
        for (int a = 0; a < grid->dim(); ++a)
            s.p[static_cast<std::size_t>(a)] = df.at(a, i);
        ens.particles[i] = s;
        ens.seeds[i] = s.q;
    }
    return ens;
}

void advance_ensemble(EnsembleState& ens, const Frame& frame, const std::vector<double>& steps) {
    par::parallel_for(ens.particles.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            CotangentState& s = ens.particles[i];
            for (const double h : steps) hamiltonian_step(s, h, frame);
        }
    });
    const int n = frame.grid()->dim();
    for (const CotangentState& s : ens.particles)
        for (int a = 0; a < n; ++a)
            if (!std::isfinite(s.q[static_cast<std::size_t>(a)]) ||
                !std::isfinite(s.p[static_cast<std::size_t>(a)]))
                throw integration_error("horizontal exponential produced a non-finite particle");
}

std::vector<std::array<double, 3>> displacements(const EnsembleState& ens, int n) {
    std::vector<std::array<double, 3>> d(ens.particles.size(), {0.0, 0.0, 0.0});
    for (std::size_t i = 0; i < ens.particles.size(); ++i)
        for (int a = 0; a < n; ++a) {
            const auto ua = static_cast<std::size_t>(a);
            d[i][ua] = ens.particles[i].q[ua] - ens.seeds[i][ua];
        }
    return d;
}

FlowMap ensemble_to_flowmap(const EnsembleState& ens, const GridPtr& grid, double t,
                            HorizontalExpReport* report) {
    const int n = grid->dim();
    const JacobianScan scan = jacobian_from_neighbors(*grid, displacements(ens, n));
    FlowMap flow;
    flow.grid = grid;
    flow.t_final = t;
    flow.log_jacobian = scan.logj;
    flow.positions.resize(ens.particles.size());
    for (std::size_t i = 0; i < ens.particles.size(); ++i)
        flow.positions[i] = grid->wrap(ens.particles[i].q);
    if (report) {
        report->shock_flag = scan.shock;
        report->min_neighbor_separation = scan.min_separation;
        report->min_jacobian = scan.min_det;
    }
    return flow;
}

}  // namespace

FlowMap horizontal_exponential(const ScalarField& f, double t, const Frame& frame, double dt,
                               HorizontalExpReport* report, int order) {
    EnsembleState ens = seed_ensemble(f, frame, order);
    advance_ensemble(ens, frame, integration_schedule(t, dt));
    return ensemble_to_flowmap(ens, f.grid(), t, report);
}

PotentialPath hj_evolve(const ScalarField& f0, double t_max, const Frame& frame, double dt,
                        std::size_t snapshots, int order) {
    if (snapshots < 2) throw config_error("hj_evolve needs at least two snapshots");
    if (!(t_max > 0.0)) throw config_error("hj_evolve needs t_max > 0");
    EnsembleState ens = seed_ensemble(f0, frame, order);
    const GridPtr& grid = f0.grid();

    // Carried values: f0 + t H0 along each characteristic (H is conserved and
    // the Lagrangian increment <p, dq/dt> - H equals H for quadratic H).
    std::vector<double> h0(ens.particles.size());
    for (std::size_t i = 0; i < ens.particles.size(); ++i)
        h0[i] = sub_hamiltonian(ens.particles[i], frame);

    PotentialPath path;
    const int n = grid->dim();
    double t = 0.0;
    for (std::size_t s = 0; s < snapshots; ++s) {
        const double target = t_max * static_cast<double>(s) / static_cast<double>(snapshots - 1);
        if (target > t) {
            advance_ensemble(ens, frame, integration_schedule(target - t, dt));
            t = target;
        }
        std::vector<std::array<double, 3>> pos(ens.particles.size());
        std::vector<double> values(ens.particles.size());
        for (std::size_t i = 0; i < ens.particles.size(); ++i) {
            pos[i] = grid->wrap(ens.particles[i].q);
            values[i] = f0[i] + t * h0[i];
        }
        ScalarField field = scatter_values(grid, pos, values);
        const JacobianScan scan = jacobian_from_neighbors(*grid, displacements(ens, n));
        path.times.push_back(t);
        path.fields.push_back(std::move(field));
        path.shock_flags.push_back(scan.shock ? 1 : 0);
    }
    return path;
}

Density displacement_interpolation(const Density& nu, const ScalarField& f, double t,
                                   const Frame& frame, double dt, HorizontalExpReport* report) {
    require_same_grid(*nu.grid(), *f.grid(), "displacement_interpolation");
    FlowMap flow = horizontal_exponential(f, t, frame, dt, report);
    return pushforward_density(flow, nu);
}

ScalarField monge_ampere_residual(const FlowMap& flow, const ScalarField& g,
                                  const ScalarField& h) {
    require_same_grid(*flow.grid, *g.grid(), "monge_ampere_residual");
    require_same_grid(*flow.grid, *h.grid(), "monge_ampere_residual");
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!(g[i] > 0.0) || !(h[i] > 0.0))
            throw structural_error("monge_ampere_residual requires positive densities");
    ScalarField out(flow.grid);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = interpolate_cubic(h, flow.positions[i]) * std::exp(flow.log_jacobian[i]) - g[i];
    return out;
}

namespace {

bool is_flat_full_rank(const Frame& frame) {
    const int n = frame.grid()->dim();
    if (frame.rank() != n) return false;
    for (int i = 0; i < n; ++i)
        for (int c = 0; c < n; ++c) {
            const Expr& e = frame.coeff(i, c);
            if (!e.is_constant()) return false;
            const double want = (i == c) ? 1.0 : 0.0;
            if (e.constant_value() != want) return false;
        }
    return true;
}

std::array<double, 3> min_image(const Grid& g, std::array<double, 3> d) {
    for (int a = 0; a < g.dim(); ++a) {
        const auto ua = static_cast<std::size_t>(a);
        const double l = g.period(a);
        d[ua] -= l * std::round(d[ua] / l);
    }
    return d;
}

}  // namespace

double burgers_residual(const std::vector<std::pair<double, FlowMap>>& path, const Frame& frame) {
    if (!is_flat_full_rank(frame))
        throw structural_error("burgers_residual is defined for the flat full-rank frame only");
    if (path.size() < 3)
        throw structural_error("burgers_residual needs at least three flow samples");
    const GridPtr& grid = path.front().second.grid;
    const int n = grid->dim();
    const std::size_t nparticles = grid->size();

    // Reject folded flows: re-derive the Jacobian from min-image displacements
    // of each sample and bail out on sign loss or particle collisions.
    for (const auto& [t, flow] : path) {
        (void)t;
        require_same_grid(*flow.grid, *grid, "burgers_residual");
        std::vector<std::array<double, 3>> disp(nparticles, {0.0, 0.0, 0.0});
        for (std::size_t i = 0; i < nparticles; ++i) {
            const auto seed = grid->node(i);
            std::array<double, 3> d{0.0, 0.0, 0.0};
            for (int a = 0; a < n; ++a) {
                const auto ua = static_cast<std::size_t>(a);
                d[ua] = flow.positions[i][ua] - seed[ua];
            }
            disp[i] = min_image(*grid, d);
        }
        if (jacobian_from_neighbors(*grid, disp).shock)
            throw integration_error("burgers_residual: flow sample is shock-flagged");
    }

    // Per-particle velocities by time differencing of positions (min-image),
    // then scattered to the grid at each sample's particle positions.
    const std::size_t m = path.size();
    std::vector<VectorField> v_fields;
    v_fields.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<std::array<double, 3>> vel(nparticles, {0.0, 0.0, 0.0});
        for (std::size_t i = 0; i < nparticles; ++i) {
            std::array<double, 3> d;
            double span;
            if (j == 0) {
                const auto d01 = min_image(*grid, {path[1].second.positions[i][0] - path[0].second.positions[i][0],
                                                   path[1].second.positions[i][1] - path[0].second.positions[i][1],
                                                   path[1].second.positions[i][2] - path[0].second.positions[i][2]});
                const auto d02 = min_image(*grid, {path[2].second.positions[i][0] - path[0].second.positions[i][0],
                                                   path[2].second.positions[i][1] - path[0].second.positions[i][1],
                                                   path[2].second.positions[i][2] - path[0].second.positions[i][2]});
                span = path[1].first - path[0].first;
                for (int a = 0; a < n; ++a)
                    d[static_cast<std::size_t>(a)] =
                        (4.0 * d01[static_cast<std::size_t>(a)] - d02[static_cast<std::size_t>(a)]) / 2.0;
            } else if (j + 1 == m) {
                const auto d01 = min_image(*grid, {path[m - 2].second.positions[i][0] - path[m - 1].second.positions[i][0],
                                                   path[m - 2].second.positions[i][1] - path[m - 1].second.positions[i][1],
                                                   path[m - 2].second.positions[i][2] - path[m - 1].second.positions[i][2]});
                const auto d02 = min_image(*grid, {path[m - 3].second.positions[i][0] - path[m - 1].second.positions[i][0],
                                                   path[m - 3].second.positions[i][1] - path[m - 1].second.positions[i][1],
                                                   path[m - 3].second.positions[i][2] - path[m - 1].second.positions[i][2]});
                span = path[m - 1].first - path[m - 2].first;
                for (int a = 0; a < n; ++a)
                    d[static_cast<std::size_t>(a)] =
                        -(4.0 * d01[static_cast<std::size_t>(a)] - d02[static_cast<std::size_t>(a)]) / 2.0;
            } else {
                const auto dc = min_image(*grid, {path[j + 1].second.positions[i][0] - path[j - 1].second.positions[i][0],
                                                  path[j + 1].second.positions[i][1] - path[j - 1].second.positions[i][1],
                                                  path[j + 1].second.positions[i][2] - path[j - 1].second.positions[i][2]});
                span = (path[j + 1].first - path[j - 1].first) / 2.0;
                for (int a = 0; a < n; ++a) d[static_cast<std::size_t>(a)] = dc[static_cast<std::size_t>(a)] / 2.0;
            }
            for (int a = 0; a < n; ++a)
                vel[i][static_cast<std::size_t>(a)] = d[static_cast<std::size_t>(a)] / span;
        }
        VectorField vf(grid);
        for (int a = 0; a < n; ++a) {
            std::vector<double> comp(nparticles);
            for (std::size_t i = 0; i < nparticles; ++i) comp[i] = vel[i][static_cast<std::size_t>(a)];
            ScalarField s = scatter_values(grid, path[j].second.positions, comp);
            std::copy(s.values().begin(), s.values().end(), vf.component(a).begin());
        }
        v_fields.push_back(std::move(vf));
    }

    const Density uniform = Density::uniform(grid);
    double worst = 0.0;
    for (std::size_t j = 1; j + 1 < m; ++j) {
        const double two_dt = path[j + 1].first - path[j - 1].first;
        VectorField residual(grid);
        for (int c = 0; c < n; ++c) {
            ScalarField vc(grid, std::vector<double>(v_fields[j].component(c).begin(),
                                                     v_fields[j].component(c).end()));
            VectorField dvc = grad(vc);
            auto rc = residual.component(c);
            for (std::size_t i = 0; i < nparticles; ++i) {
                double adv = 0.0;
                for (int a = 0; a < n; ++a) adv += v_fields[j].at(a, i) * dvc.at(a, i);
                rc[i] = (v_fields[j + 1].at(c, i) - v_fields[j - 1].at(c, i)) / two_dt + adv;
            }
        }
        worst = std::max(worst, norm_l2(residual, uniform));
    }
    return worst;
}

}  // namespace subrosa
