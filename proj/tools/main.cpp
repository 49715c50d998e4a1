#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "subrosa/experiment.hpp"

namespace {

using nlohmann::json;

struct CommonFlags {
    std::string config_path;
    std::string grid;
    std::string frame;
    std::string out;
    std::string report;
    double tol = 0.0;
    std::uint64_t seed = 0;
    int refine = 0;
    unsigned threads = 0;
    bool deterministic = false;
};

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) parts.push_back(item);
    return parts;
}

json parse_grid_flag(const std::string& text) {
    json dims = json::array();
    for (const auto& part : split(text, 'x')) {
        try {
            dims.push_back(static_cast<std::size_t>(std::stoul(part)));
        } catch (...) {
            throw subrosa::config_error("bad --grid value '" + text + "' (expected e.g. 32x32x32)");
        }
    }
    json g;
    g["dims"] = dims;
    return g;
}

json parse_number_list(const std::string& text, const char* flag) {
    json arr = json::array();
    for (const auto& part : split(text, ',')) {
        try {
            arr.push_back(std::stod(part));
        } catch (...) {
            throw subrosa::config_error(std::string("bad ") + flag + " value '" + text + "'");
        }
    }
    return arr;
}

json load_config_document(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream is(path);
    if (!is) throw subrosa::config_error("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    try {
        return json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw subrosa::config_error(std::string("config parse error: ") + e.what());
    }
}

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON configuration file");
    cmd->add_option("--grid", flags.grid, "grid dims, e.g. 32x32x32");
    cmd->add_option("--frame", flags.frame, "builtin frame name (flat | sin-heisenberg)");
    cmd->add_option("--out", flags.out, "output directory for reports and field files");
    cmd->add_option("--report", flags.report, "extra path for the JSON summary");
    cmd->add_option("--tol", flags.tol, "Poisson/CG relative tolerance");
    cmd->add_option("--seed", flags.seed, "seed for randomized property runs");
    cmd->add_option("--refine", flags.refine,
                    "run a convergence study over N grid/step levels and fit the order");
    cmd->add_option("--threads", flags.threads, "worker threads (default: all cores)");
    cmd->add_flag("--deterministic", flags.deterministic,
                  "single-threaded fixed-order execution (reductions are always fixed-tree)");
}

void merge_common(json& doc, const CommonFlags& flags) {
    if (!flags.grid.empty()) doc["grid"] = parse_grid_flag(flags.grid);
    if (!flags.frame.empty()) doc["frame"] = flags.frame;
    if (!flags.out.empty()) doc["out"] = flags.out;
    if (!flags.report.empty()) doc["report"] = flags.report;
    if (flags.tol > 0.0) doc["tol"] = flags.tol;
    if (flags.seed != 0) doc["seed"] = flags.seed;
    if (flags.threads != 0) doc["threads"] = flags.threads;
    if (flags.deterministic) doc["deterministic"] = true;
}

int run(const std::string& kind, const json& doc, int refine) {
    const subrosa::ExperimentConfig cfg = subrosa::parse_config(doc.dump(), kind);
    const subrosa::ExperimentReport report = refine > 1
                                                 ? subrosa::run_with_refinement(cfg, refine)
                                                 : subrosa::run_experiment(cfg);
    std::cout << report.summary_json << '\n';
    if (!report.pass) {
        std::cerr << "declared tolerance failures:";
        for (const auto& f : report.failures) std::cerr << ' ' << f;
        std::cerr << '\n';
        return 2;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "subrosa: horizontal density transport, subelliptic Poisson solves,\n"
        "subriemannian geodesics and entropy gradient flows on periodic grids"};
    app.require_subcommand(1);
    app.footer("exit codes: 0 pass, 2 tolerance failure, 3 config error, 4 solver failure,\n"
               "5 integration failure");

    CommonFlags flags;

    auto* moser = app.add_subcommand("moser", "Moser transport between two densities");
    std::string source, target, dump_flow;
    int steps = 0;
    add_common(moser, flags);
    moser->add_option("--source", source, "initial density (expression or @file; default uniform)");
    moser->add_option("--target", target, "final density (expression or @file)");
    moser->add_option("--steps", steps, "time substeps on [0,1]");
    moser->add_option("--dump-flow", dump_flow, "write the flow container (SRFLW1) here");

    auto* geodesic = app.add_subcommand("geodesic", "single subriemannian geodesic");
    std::string q0, p0;
    double dt = 0.0, t_max = 0.0;
    add_common(geodesic, flags);
    geodesic->add_option("--q0", q0, "initial point, comma separated");
    geodesic->add_option("--p0", p0, "initial covector, comma separated");
    geodesic->add_option("--dt", dt, "integration step");
    geodesic->add_option("--t-max", t_max, "final time");

    auto* interp = app.add_subcommand("interp", "displacement interpolation snapshots");
    std::string density, potential, times;
    double interp_dt = 0.0;
    add_common(interp, flags);
    interp->add_option("--density", density, "transported density (default uniform)");
    interp->add_option("--potential", potential, "transport potential expression or @file");
    interp->add_option("--times", times, "snapshot times, comma separated");
    interp->add_option("--dt", interp_dt, "particle integration step");

    auto* heat = app.add_subcommand("heat", "nonholonomic heat flow with entropy diagnostics");
    std::string heat_density, heat_times;
    double heat_dt = 0.0, heat_tmax = 0.0;
    add_common(heat, flags);
    heat->add_option("--density", heat_density, "initial density (expression or @file)");
    heat->add_option("--dt", heat_dt, "time step");
    heat->add_option("--t-max", heat_tmax, "final time");
    heat->add_option("--times", heat_times, "snapshot times, comma separated");

    auto* hodge = app.add_subcommand("hodge", "nonholonomic Hodge decomposition trials");
    int trials = 0;
    std::string field;
    add_common(hodge, flags);
    hodge->add_option("--trials", trials, "number of random horizontal fields");
    hodge->add_option("--field", field,
                      "decompose this field instead (semicolon-separated components)");

    auto* growth = app.add_subcommand("growth", "bracket-generation growth vectors");
    int max_depth = 0;
    add_common(growth, flags);
    growth->add_option("--max-depth", max_depth, "bracket depth to explore");

    CLI11_PARSE(app, argc, argv);

    try {
        json doc = load_config_document(flags.config_path);
        merge_common(doc, flags);
        std::string kind;
        if (app.got_subcommand(moser)) {
            kind = "moser";
            if (!source.empty()) doc["source"] = source;
            if (!target.empty()) doc["target"] = target;
            if (steps > 0) doc["steps"] = steps;
            if (!dump_flow.empty()) doc["dump_flow"] = dump_flow;
        } else if (app.got_subcommand(geodesic)) {
            kind = "geodesic";
            if (!q0.empty()) doc["q0"] = parse_number_list(q0, "--q0");
            if (!p0.empty()) doc["p0"] = parse_number_list(p0, "--p0");
            if (dt > 0.0) doc["dt"] = dt;
            if (t_max > 0.0) doc["t_max"] = t_max;
        } else if (app.got_subcommand(interp)) {
            kind = "interp";
            if (!density.empty()) doc["density"] = density;
            if (!potential.empty()) doc["potential"] = potential;
            if (!times.empty()) doc["times"] = parse_number_list(times, "--times");
            if (interp_dt > 0.0) doc["dt"] = interp_dt;
        } else if (app.got_subcommand(heat)) {
            kind = "heat";
            if (!heat_density.empty()) doc["density"] = heat_density;
            if (!heat_times.empty()) doc["times"] = parse_number_list(heat_times, "--times");
            if (heat_dt > 0.0) doc["dt"] = heat_dt;
            if (heat_tmax > 0.0) doc["t_max"] = heat_tmax;
        } else if (app.got_subcommand(hodge)) {
            kind = "hodge";
            if (trials > 0) doc["trials"] = trials;
            if (!field.empty()) {
                json arr = json::array();
                for (const auto& c : split(field, ';')) arr.push_back(c);
                doc["field"] = arr;
            }
        } else if (app.got_subcommand(growth)) {
            kind = "growth";
            if (max_depth > 0) doc["max_depth"] = max_depth;
        }
        return run(kind, doc, flags.refine);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return subrosa::exit_code_for_exception();
    }
}
