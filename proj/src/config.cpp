#include "subrosa/config.hpp"

#include <filesystem>
#include <set>

#include <json.hpp>

#include "subrosa/io.hpp"

namespace subrosa {

using nlohmann::json;

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::Moser: return "moser";
        case ExperimentKind::Geodesic: return "geodesic";
        case ExperimentKind::Interp: return "interp";
        case ExperimentKind::Heat: return "heat";
        case ExperimentKind::Hodge: return "hodge";
        case ExperimentKind::Growth: return "growth";
    }
    return "?";
}

ExperimentKind kind_from_string(const std::string& name) {
    if (name == "moser") return ExperimentKind::Moser;
    if (name == "geodesic") return ExperimentKind::Geodesic;
    if (name == "interp") return ExperimentKind::Interp;
    if (name == "heat") return ExperimentKind::Heat;
    if (name == "hodge") return ExperimentKind::Hodge;
    if (name == "growth") return ExperimentKind::Growth;
    throw config_error("unknown experiment kind '" + name +
                       "' (expected moser|geodesic|interp|heat|hodge|growth)");
}

namespace {

FieldSpec field_spec_from(const json& j, const std::string& key) {
    if (!j.is_string())
        throw config_error("config key '" + key + "' must be a string (expression or @file)");
    const std::string s = j.get<std::string>();
    FieldSpec spec;
    if (!s.empty() && s.front() == '@') {
        spec.file = s.substr(1);
        if (!std::filesystem::exists(spec.file))
            throw config_error("config key '" + key + "': file '" + spec.file + "' does not exist");
    } else {
        spec.expression = s;
        Expr::parse(s);  // fail fast on malformed expressions
    }
    return spec;
}

template <class T>
T number_from(const json& j, const std::string& key) {
    if (!j.is_number())
        throw config_error("config key '" + key + "' must be a number");
    return j.get<T>();
}

std::array<double, 3> point_from(const json& j, const std::string& key) {
    if (!j.is_array() || j.size() < 2 || j.size() > 3)
        throw config_error("config key '" + key + "' must be an array of 2 or 3 numbers");
    std::array<double, 3> p{0.0, 0.0, 0.0};
    for (std::size_t i = 0; i < j.size(); ++i) p[i] = number_from<double>(j[i], key);
    return p;
}

const std::set<std::string>& allowed_keys(ExperimentKind kind) {
    static const std::set<std::string> common = {"kind",    "grid",   "frame",   "tol",
                                                 "seed",    "out",    "threads", "deterministic",
                                                 "report"};
    static const auto make = [](std::initializer_list<std::string> extra) {
        std::set<std::string> s = common;
        s.insert(extra);
        return s;
    };
    static const std::set<std::string> moser = make({"steps", "source", "target", "dump_flow"});
    static const std::set<std::string> geodesic = make({"q0", "p0", "t_max", "dt"});
    static const std::set<std::string> interp = make({"density", "potential", "times", "dt"});
    static const std::set<std::string> heat = make({"density", "t_max", "dt", "times"});
    static const std::set<std::string> hodge = make({"field", "trials"});
    static const std::set<std::string> growth = make({"max_depth"});
    switch (kind) {
        case ExperimentKind::Moser: return moser;
        case ExperimentKind::Geodesic: return geodesic;
        case ExperimentKind::Interp: return interp;
        case ExperimentKind::Heat: return heat;
        case ExperimentKind::Hodge: return hodge;
        case ExperimentKind::Growth: return growth;
    }
    return common;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& kind_override) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw config_error(std::string("config parse error: ") + e.what());
    }
    if (!doc.is_object()) throw config_error("config document must be a JSON object");

    ExperimentConfig cfg;
    std::string kind_name = kind_override;
    if (kind_name.empty()) {
        if (!doc.contains("kind"))
            throw config_error("config needs a 'kind' (moser|geodesic|interp|heat|hodge|growth)");
        if (!doc["kind"].is_string()) throw config_error("config key 'kind' must be a string");
        kind_name = doc["kind"].get<std::string>();
    } else if (doc.contains("kind") && doc["kind"].is_string() &&
               doc["kind"].get<std::string>() != kind_name) {
        throw config_error("config key 'kind' disagrees with the requested subcommand");
    }
    cfg.kind = kind_from_string(kind_name);

    const auto& allowed = allowed_keys(cfg.kind);
    for (const auto& [key, value] : doc.items()) {
        (void)value;
        if (!allowed.count(key))
            throw config_error("unknown config key '" + key + "' for kind '" + kind_name + "'");
    }

    if (doc.contains("grid")) {
        const json& g = doc["grid"];
        if (!g.is_object()) throw config_error("config key 'grid' must be an object");
        for (const auto& [key, value] : g.items()) {
            (void)value;
            if (key != "dims" && key != "period")
                throw config_error("unknown config key 'grid." + key + "'");
        }
        if (!g.contains("dims") || !g["dims"].is_array())
            throw config_error("config key 'grid.dims' must be an array of axis sizes");
        cfg.dims.clear();
        for (const auto& d : g["dims"]) {
            if (!d.is_number_unsigned() || d.get<std::size_t>() < 4)
                throw config_error("config key 'grid.dims' entries must be integers >= 4");
            cfg.dims.push_back(d.get<std::size_t>());
        }
        if (g.contains("period")) {
            if (!g["period"].is_array())
                throw config_error("config key 'grid.period' must be an array");
            cfg.periods.clear();
            for (const auto& p : g["period"])
                cfg.periods.push_back(number_from<double>(p, "grid.period"));
        }
    }

    if (doc.contains("frame")) {
        const json& f = doc["frame"];
        if (f.is_string()) {
            cfg.frame.builtin = f.get<std::string>();
        } else if (f.is_array()) {
            cfg.frame.expressions.clear();
            for (const auto& row : f) {
                if (!row.is_array())
                    throw config_error("config key 'frame' must be a name or a list of "
                                       "coefficient-expression lists");
                std::vector<std::string> coeffs;
                for (const auto& c : row) {
                    if (!c.is_string())
                        throw config_error("frame coefficients must be expression strings");
                    Expr::parse(c.get<std::string>());  // fail fast with position info
                    coeffs.push_back(c.get<std::string>());
                }
                cfg.frame.expressions.push_back(std::move(coeffs));
            }
        } else {
            throw config_error("config key 'frame' must be a builtin name or expression lists");
        }
    }

    if (doc.contains("source")) cfg.source = field_spec_from(doc["source"], "source");
    if (doc.contains("target")) cfg.target = field_spec_from(doc["target"], "target");
    if (doc.contains("density")) cfg.density = field_spec_from(doc["density"], "density");
    if (doc.contains("potential")) cfg.potential = field_spec_from(doc["potential"], "potential");
    if (doc.contains("field")) {
        if (!doc["field"].is_array())
            throw config_error("config key 'field' must be an array of component expressions");
        cfg.field.clear();
        for (const auto& c : doc["field"]) {
            if (!c.is_string()) throw config_error("field components must be expression strings");
            Expr::parse(c.get<std::string>());
            cfg.field.push_back(c.get<std::string>());
        }
    }

    if (doc.contains("steps")) {
        cfg.steps = number_from<int>(doc["steps"], "steps");
        if (cfg.steps < 1) throw config_error("config key 'steps' must be positive");
    }
    if (doc.contains("dt")) {
        cfg.dt = number_from<double>(doc["dt"], "dt");
        if (!(cfg.dt > 0.0)) throw config_error("config key 'dt' must be positive");
    }
    if (doc.contains("t_max")) {
        cfg.t_max = number_from<double>(doc["t_max"], "t_max");
        if (!(cfg.t_max > 0.0)) throw config_error("config key 't_max' must be positive");
    }
    if (doc.contains("tol")) {
        cfg.tol = number_from<double>(doc["tol"], "tol");
        if (!(cfg.tol > 0.0) || cfg.tol > 1e-4)
            throw config_error("config key 'tol' must lie in (0, 1e-4]");
    }
    if (doc.contains("times")) {
        if (!doc["times"].is_array())
            throw config_error("config key 'times' must be an array of snapshot times");
        cfg.times.clear();
        for (const auto& t : doc["times"]) cfg.times.push_back(number_from<double>(t, "times"));
    }
    if (doc.contains("q0")) cfg.q0 = point_from(doc["q0"], "q0");
    if (doc.contains("p0")) cfg.p0 = point_from(doc["p0"], "p0");
    if (doc.contains("max_depth")) {
        cfg.max_depth = number_from<int>(doc["max_depth"], "max_depth");
        if (cfg.max_depth < 1) throw config_error("config key 'max_depth' must be >= 1");
    }
    if (doc.contains("trials")) {
        cfg.trials = number_from<int>(doc["trials"], "trials");
        if (cfg.trials < 1) throw config_error("config key 'trials' must be >= 1");
    }
    if (doc.contains("seed")) cfg.seed = number_from<std::uint64_t>(doc["seed"], "seed");
    if (doc.contains("out")) {
        if (!doc["out"].is_string()) throw config_error("config key 'out' must be a string");
        cfg.out = doc["out"].get<std::string>();
    }
    if (doc.contains("report")) {
        if (!doc["report"].is_string()) throw config_error("config key 'report' must be a string");
        cfg.report = doc["report"].get<std::string>();
    }
    if (doc.contains("dump_flow")) {
        if (!doc["dump_flow"].is_string())
            throw config_error("config key 'dump_flow' must be a string");
        cfg.dump_flow = doc["dump_flow"].get<std::string>();
    }
    if (doc.contains("threads")) cfg.threads = number_from<unsigned>(doc["threads"], "threads");
    if (doc.contains("deterministic")) {
        if (!doc["deterministic"].is_boolean())
            throw config_error("config key 'deterministic' must be a boolean");
        cfg.deterministic = doc["deterministic"].get<bool>();
    }

    // Kind-specific requirements, checked before anything runs.
    if (cfg.kind == ExperimentKind::Moser && cfg.target.empty())
        throw config_error("moser experiments need a 'target' density");
    if (cfg.kind == ExperimentKind::Interp && cfg.potential.empty())
        throw config_error("interp experiments need a 'potential'");
    if (cfg.kind == ExperimentKind::Heat && cfg.density.empty())
        throw config_error("heat experiments need a 'density'");
    if (!cfg.field.empty() && cfg.field.size() != cfg.dims.size())
        throw config_error("config key 'field' needs one component expression per grid axis");
    (void)cfg.make_grid_ptr();  // validates dims/periods eagerly
    return cfg;
}

GridPtr ExperimentConfig::make_grid_ptr() const { return make_grid(dims, periods); }

Frame ExperimentConfig::make_frame(const GridPtr& grid) const {
    if (!frame.expressions.empty()) return Frame::from_expressions(grid, frame.expressions);
    return Frame::builtin(frame.builtin, grid);
}

std::string ExperimentConfig::echo_json() const {
    json j;
    j["kind"] = to_string(kind);
    j["grid"]["dims"] = dims;
    if (!periods.empty()) j["grid"]["period"] = periods;
    if (frame.expressions.empty()) {
        j["frame"] = frame.builtin;
    } else {
        j["frame"] = frame.expressions;
    }
    auto put_field = [&](const char* key, const FieldSpec& spec) {
        if (!spec.empty()) j[key] = spec.display();
    };
    put_field("source", source);
    put_field("target", target);
    put_field("density", density);
    put_field("potential", potential);
    if (!field.empty()) j["field"] = field;
    switch (kind) {
        case ExperimentKind::Moser:
            j["steps"] = steps;
            break;
        case ExperimentKind::Geodesic:
            j["q0"] = std::vector<double>(q0.begin(), q0.begin() + dims.size());
            j["p0"] = std::vector<double>(p0.begin(), p0.begin() + dims.size());
            j["t_max"] = t_max;
            j["dt"] = dt;
            break;
        case ExperimentKind::Interp:
            j["times"] = times;
            j["dt"] = dt;
            break;
        case ExperimentKind::Heat:
            j["t_max"] = t_max;
            j["dt"] = dt;
            j["times"] = times;
            break;
        case ExperimentKind::Hodge:
            j["trials"] = trials;
            break;
        case ExperimentKind::Growth:
            j["max_depth"] = max_depth;
            break;
    }
    j["tol"] = tol;
    j["seed"] = seed;
    if (!out.empty()) j["out"] = out;
    if (!dump_flow.empty()) j["dump_flow"] = dump_flow;
    j["threads"] = threads;
    j["deterministic"] = deterministic;
    return j.dump(2);
}

ScalarField resolve_scalar(const FieldSpec& spec, const GridPtr& grid) {
    if (spec.empty()) throw config_error("missing field specification");
    if (!spec.file.empty()) {
        LoadedField lf = read_field(spec.file);
        if (!(*lf.grid == *grid))
            throw config_error("field file '" + spec.file + "' was written for a different grid");
        return lf.as_scalar();
    }
    return ScalarField::from_expression(grid, Expr::parse(spec.expression));
}

Density resolve_density(const FieldSpec& spec, const GridPtr& grid) {
    if (spec.empty()) return Density::uniform(grid);
    ScalarField f = resolve_scalar(spec, grid);
    return Density::raw(grid, std::vector<double>(f.values().begin(), f.values().end()));
}

}  // namespace subrosa
