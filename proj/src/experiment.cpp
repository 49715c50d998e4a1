#include "subrosa/experiment.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "subrosa/geodesics.hpp"
#include "subrosa/heat.hpp"
#include "subrosa/io.hpp"
#include "subrosa/moser.hpp"
#include "subrosa/parallel.hpp"
#include "subrosa/random_fields.hpp"

namespace subrosa {

using nlohmann::json;

namespace fs = std::filesystem;

namespace {

struct Outputs {
    fs::path dir;
    bool enabled = false;

    void prepare(const ExperimentConfig& cfg) {
        if (cfg.out.empty()) return;
        dir = cfg.out;
        fs::create_directories(dir);
        enabled = true;
        std::ofstream echo(dir / "config.json");
        echo << cfg.echo_json() << '\n';
    }

    std::ofstream csv(const std::string& name) const {
        std::ofstream os(dir / name);
        os.precision(17);
        return os;
    }
};

struct Checker {
    json metrics;
    std::vector<std::string> failures;

    void metric(const std::string& name, double value) { metrics[name] = value; }

    void check(const std::string& name, double value, double bound) {
        metrics[name] = value;
        metrics[name + "_bound"] = bound;
        if (!(value <= bound)) failures.push_back(name);
    }

    void check_flag(const std::string& name, bool ok) {
        metrics[name] = ok;
        if (!ok) failures.push_back(name);
    }
};

void run_moser(const ExperimentConfig& cfg, const Outputs& out, Checker& ck) {
    const GridPtr grid = cfg.make_grid_ptr();
    const Frame frame = cfg.make_frame(grid);
    const Density mu0 = resolve_density(cfg.source, grid);
    const Density mu1 = resolve_density(cfg.target, grid);

    auto [flow, report] = moser_flow(mu0, mu1, frame, cfg.steps, cfg.tol);

    ck.metric("l1_error", report.l1_error);
    ck.metric("l2_error", report.l2_error);
    ck.metric("linf_error", report.linf_error);
    ck.metric("monge_ampere_l2", report.monge_ampere_l2);
    ck.metric("mass_defect", report.mass_defect);
    ck.check("horizontality_residual", report.horizontality_residual, 1e-12);
    double worst_mean = 0.0, worst_res = 0.0;
    int max_iters = 0;
    for (const auto& s : report.substeps) {
        worst_mean = std::max(worst_mean, std::abs(s.source_mean));
        worst_res = std::max(worst_res, s.cg_residual);
        max_iters = std::max(max_iters, s.cg_iterations);
    }
    ck.check("source_mean_max", worst_mean, 1e-10);
    ck.check("cg_residual_max", worst_res, cfg.tol);
    ck.metric("cg_iterations_max", max_iters);

    if (out.enabled) {
        auto os = out.csv("substeps.csv");
        os << "t,cg_iterations,cg_residual,source_mean,horizontality_residual\n";
        for (const auto& s : report.substeps)
            os << s.t << ',' << s.cg_iterations << ',' << s.cg_residual << ',' << s.source_mean
               << ',' << s.horizontality_residual << '\n';
        write_field(out.dir / "pushforward.srfld", pushforward_density(flow, mu0));
    }
    if (!cfg.dump_flow.empty()) write_flowmap(cfg.dump_flow, flow);
}

void run_geodesic(const ExperimentConfig& cfg, const Outputs& out, Checker& ck) {
    const GridPtr grid = cfg.make_grid_ptr();
    const Frame frame = cfg.make_frame(grid);

    const GeodesicTrajectory traj = exp_tau(cfg.q0, cfg.p0, cfg.t_max, frame, cfg.dt);
    const GeodesicTrajectory half = exp_tau(cfg.q0, cfg.p0, cfg.t_max, frame, cfg.dt / 2.0);
    const GeodesicTrajectory quarter = exp_tau(cfg.q0, cfg.p0, cfg.t_max, frame, cfg.dt / 4.0);

    auto endpoint_gap = [&](const GeodesicTrajectory& a, const GeodesicTrajectory& b) {
        double s = 0.0;
        for (int c = 0; c < grid->dim(); ++c) {
            const auto uc = static_cast<std::size_t>(c);
            const double d = a.endpoint().q[uc] - b.endpoint().q[uc];
            s += d * d;
        }
        return std::sqrt(s);
    };
    const double e1 = endpoint_gap(traj, half);
    const double e2 = endpoint_gap(half, quarter);

    ck.check("energy_drift", traj.relative_energy_drift(), 1e-8);
    ck.metric("endpoint_error_dt", e1);
    ck.metric("endpoint_error_dt_half", e2);
    ck.metric("endpoint_error_ratio", e2 > 0.0 ? e1 / e2 : 0.0);

    if (out.enabled) {
        auto os = out.csv("trajectory.csv");
        os << "t";
        for (int c = 0; c < grid->dim(); ++c) os << ",q" << c;
        for (int c = 0; c < grid->dim(); ++c) os << ",p" << c;
        os << ",H\n";
        for (std::size_t i = 0; i < traj.times.size(); ++i) {
            os << traj.times[i];
            for (int c = 0; c < grid->dim(); ++c)
                os << ',' << traj.states[i].q[static_cast<std::size_t>(c)];
            for (int c = 0; c < grid->dim(); ++c)
                os << ',' << traj.states[i].p[static_cast<std::size_t>(c)];
            os << ',' << traj.hamiltonian[i] << '\n';
        }
    }
}

void run_interp(const ExperimentConfig& cfg, const Outputs& out, Checker& ck) {
    const GridPtr grid = cfg.make_grid_ptr();
    const Frame frame = cfg.make_frame(grid);
    const Density nu = resolve_density(cfg.density, grid);
    const ScalarField f = resolve_scalar(cfg.potential, grid);
    std::vector<double> times = cfg.times.empty() ? std::vector<double>{0.0, 0.5, 1.0} : cfg.times;

    std::ofstream os;
    if (out.enabled) {
        os = out.csv("interp.csv");
        os << "t,mass_defect,min_ratio,shock,l2_vs_initial\n";
    }
    double worst_defect = 0.0;
    bool any_shock = false;
    const Density uniform = Density::uniform(grid);
    for (const double t : times) {
        HorizontalExpReport rep;
        FlowMap flow = horizontal_exponential(f, t, frame, cfg.dt, &rep);
        PushforwardStats stats;
        Density dt_density = pushforward_density(flow, nu, &stats);
        worst_defect = std::max(worst_defect, stats.mass_defect);
        any_shock = any_shock || rep.shock_flag;
        if (out.enabled) {
            ScalarField diff = dt_density.ratio() - nu.ratio();
            os << t << ',' << stats.mass_defect << ',' << stats.min_ratio << ','
               << (rep.shock_flag ? 1 : 0) << ',' << norm_l2(diff, uniform) << '\n';
            write_field(out.dir / ("interp_t" + std::to_string(t) + ".srfld"), dt_density);
        }
        ck.metric("mass_after_normalization_t" + std::to_string(t),
                  std::abs(dt_density.mass() - 1.0));
    }
    ck.metric("mass_defect_max", worst_defect);
    ck.check_flag("no_shock", !any_shock);
}

void run_heat(const ExperimentConfig& cfg, const Outputs& out, Checker& ck) {
    const GridPtr grid = cfg.make_grid_ptr();
    const Frame frame = cfg.make_frame(grid);
    const Density nu0 = resolve_density(cfg.density, grid);
    std::vector<double> times = cfg.times;
    if (times.empty()) {
        for (int i = 0; i <= 8; ++i)
            times.push_back(cfg.t_max * static_cast<double>(i) / 8.0);
    }

    const HeatTrajectory traj = heat_evolve(nu0, cfg.t_max, cfg.dt, frame, times);
    const GradientFlowReport flow_report = gradient_flow_check(traj.snapshots, frame, cfg.tol);

    double max_step_drift = 0.0;
    bool per_step_monotone = true;
    for (std::size_t i = 0; i < traj.steps.size(); ++i) {
        max_step_drift = std::max(max_step_drift, traj.steps[i].mass_drift);
        if (i > 0 && traj.steps[i].entropy > traj.steps[i - 1].entropy + 1e-12)
            per_step_monotone = false;
    }
    ck.check("mass_drift_max", max_step_drift, 1e-12);
    ck.check_flag("entropy_monotone", per_step_monotone);
    ck.metric("gradient_flow_defect_max", flow_report.max_defect);
    ck.metric("identity_residual_max", flow_report.max_identity_residual);
    ck.metric("final_entropy", traj.steps.back().entropy);

    if (out.enabled) {
        auto os = out.csv("heat.csv");
        os << "t,entropy,dent_dt,metric_sq_neg,identity_residual,mass_drift\n";
        for (const auto& row : flow_report.rows)
            os << row.t << ',' << row.entropy << ',' << row.dent_dt << ',' << -row.metric_sq
               << ',' << row.identity_residual << ',' << row.mass_drift << '\n';
        write_field(out.dir / "final.srfld", traj.snapshots.back().second);
    }
}

void run_hodge(const ExperimentConfig& cfg, const Outputs& out, Checker& ck) {
    const GridPtr grid = cfg.make_grid_ptr();
    const Frame frame = cfg.make_frame(grid);
    const Density nu = Density::uniform(grid);
    std::mt19937_64 rng(cfg.seed);

    std::ofstream os;
    if (out.enabled) {
        os = out.csv("hodge.csv");
        os << "trial,div_ratio,orthogonality_ratio,cg_iterations\n";
    }
    double worst_div = 0.0, worst_orth = 0.0;
    for (int trial = 0; trial < cfg.trials; ++trial) {
        VectorField w = cfg.field.empty()
                            ? random_horizontal_field(frame, rng)
                            : [&] {
                                  VectorField v(grid);
                                  for (int c = 0; c < grid->dim(); ++c) {
                                      ScalarField s = ScalarField::from_expression(
                                          grid, Expr::parse(cfg.field[static_cast<std::size_t>(c)]));
                                      std::copy(s.values().begin(), s.values().end(),
                                                v.component(c).begin());
                                  }
                                  return v;
                              }();
        const HodgeDecomposition dec = hodge_decompose(w, frame, nu, cfg.tol);
        const double div_w = norm_l2(divergence(w, nu), nu);
        const double div_u = norm_l2(divergence(dec.divergence_free, nu), nu);
        const double div_ratio = div_u / std::max(div_w, 1e-300);
        const double orth =
            std::abs(inner_tau(dec.divergence_free, dec.gradient_part, frame, nu));
        const double scale = std::max(norm_tau(dec.divergence_free, frame, nu) *
                                          norm_tau(dec.gradient_part, frame, nu), 1e-300);
        const double orth_ratio = orth / scale;
        worst_div = std::max(worst_div, div_ratio);
        worst_orth = std::max(worst_orth, orth_ratio);
        if (out.enabled)
            os << trial << ',' << div_ratio << ',' << orth_ratio << ','
               << dec.poisson.iterations << '\n';
        if (!cfg.field.empty()) break;  // a supplied field is a single trial
    }
    ck.check("div_ratio_max", worst_div, 10.0 * cfg.tol);
    ck.check("orthogonality_ratio_max", worst_orth, 10.0 * cfg.tol);
}

void run_growth(const ExperimentConfig& cfg, const Outputs& out, Checker& ck) {
    const GridPtr grid = cfg.make_grid_ptr();
    const Frame frame = cfg.make_frame(grid);
    const GrowthReport report = check_bracket_generating(frame, cfg.max_depth);

    ck.metric("bracket_generating", report.bracket_generating);
    ck.metric("depth_needed", report.depth_needed);
    json minimal = report.minimal_growth();
    ck.metrics["minimal_growth"] = minimal;

    if (out.enabled) {
        auto os = out.csv("growth.csv");
        os << "node";
        for (int a = 0; a < grid->dim(); ++a) os << (a == 0 ? ",x" : (a == 1 ? ",y" : ",z"));
        for (int d = 1; d <= report.max_depth; ++d) os << ",depth" << d;
        os << '\n';
        for (std::size_t i = 0; i < grid->size(); ++i) {
            os << i;
            const auto p = grid->node(i);
            for (int a = 0; a < grid->dim(); ++a) os << ',' << p[static_cast<std::size_t>(a)];
            for (const int g : report.growth_at(i)) os << ',' << g;
            os << '\n';
        }
    }
}

double refinement_metric(const ExperimentConfig& cfg, const json& metrics) {
    switch (cfg.kind) {
        case ExperimentKind::Moser: return metrics.at("l2_error").get<double>();
        case ExperimentKind::Heat: return metrics.at("gradient_flow_defect_max").get<double>();
        case ExperimentKind::Interp: return metrics.at("mass_defect_max").get<double>();
        case ExperimentKind::Geodesic: return metrics.at("endpoint_error_dt").get<double>();
        default:
            throw config_error("refinement studies support moser, heat, interp and geodesic");
    }
}

json run_single(const ExperimentConfig& cfg, Checker& ck) {
    Outputs out;
    out.prepare(cfg);
    const auto start = std::chrono::steady_clock::now();
    switch (cfg.kind) {
        case ExperimentKind::Moser: run_moser(cfg, out, ck); break;
        case ExperimentKind::Geodesic: run_geodesic(cfg, out, ck); break;
        case ExperimentKind::Interp: run_interp(cfg, out, ck); break;
        case ExperimentKind::Heat: run_heat(cfg, out, ck); break;
        case ExperimentKind::Hodge: run_hodge(cfg, out, ck); break;
        case ExperimentKind::Growth: run_growth(cfg, out, ck); break;
    }
    const auto stop = std::chrono::steady_clock::now();
    json j;
    j["kind"] = to_string(cfg.kind);
    j["config"] = json::parse(cfg.echo_json());
    j["metrics"] = ck.metrics;
    j["wall_seconds"] = std::chrono::duration<double>(stop - start).count();
    j["pass"] = ck.failures.empty();
    j["failures"] = ck.failures;
    if (out.enabled) {
        std::ofstream os(out.dir / "report.json");
        os << j.dump(2) << '\n';
    }
    if (!cfg.report.empty()) {
        std::ofstream os(cfg.report);
        os << j.dump(2) << '\n';
    }
    return j;
}

}  // namespace

double fit_order(const std::vector<double>& h, const std::vector<double>& metric) {
    if (h.size() != metric.size() || h.size() < 2)
        throw structural_error("order fit needs at least two levels");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double x = std::log(h[i]);
        const double y = std::log(std::max(metric[i], 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    if (cfg.threads > 0 || cfg.deterministic)
        par::set_thread_count(cfg.deterministic ? 1 : cfg.threads);
    Checker ck;
    const json j = run_single(cfg, ck);
    ExperimentReport report;
    report.summary_json = j.dump(2);
    report.pass = ck.failures.empty();
    report.failures = ck.failures;
    return report;
}

ExperimentReport run_with_refinement(const ExperimentConfig& cfg, int levels) {
    if (levels < 2) throw config_error("refinement studies need at least 2 levels");
    if (cfg.threads > 0 || cfg.deterministic)
        par::set_thread_count(cfg.deterministic ? 1 : cfg.threads);

    std::vector<double> hs, metrics;
    json level_reports = json::array();
    std::vector<std::string> failures;
    for (int level = 0; level < levels; ++level) {
        ExperimentConfig c = cfg;
        const int factor = 1 << level;
        for (auto& d : c.dims) d *= static_cast<std::size_t>(factor);
        c.steps = cfg.steps * factor;
        c.dt = cfg.dt / factor;
        if (!cfg.out.empty()) c.out = cfg.out + "/level" + std::to_string(level);
        Checker ck;
        const json j = run_single(c, ck);
        level_reports.push_back(j);
        for (const auto& f : ck.failures)
            failures.push_back("level" + std::to_string(level) + ":" + f);
        double h = c.make_grid_ptr()->spacing(0);
        for (int a = 1; a < static_cast<int>(c.dims.size()); ++a)
            h = std::min(h, c.make_grid_ptr()->spacing(a));
        hs.push_back(h);
        metrics.push_back(refinement_metric(c, ck.metrics));
    }
    const double order = fit_order(hs, metrics);

    json j;
    j["kind"] = to_string(cfg.kind);
    j["refinement"] = {{"levels", level_reports},
                       {"h", hs},
                       {"metric", metrics},
                       {"empirical_order", order}};
    ExperimentReport report;
    report.summary_json = j.dump(2);
    report.failures = failures;
    report.pass = failures.empty();
    if (!cfg.out.empty()) {
        fs::create_directories(cfg.out);
        std::ofstream os(fs::path(cfg.out) / "refinement.json");
        os << report.summary_json << '\n';
    }
    return report;
}

int exit_code_for_exception() {
    try {
        throw;
    } catch (const config_error&) {
        return 3;
    } catch (const structural_error&) {
        return 3;
    } catch (const solver_error&) {
        return 4;
    } catch (const integration_error&) {
        return 5;
    } catch (...) {
        return 1;
    }
}

}  // namespace subrosa
