#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "subrosa/errors.hpp"
#include "subrosa/frame.hpp"
#include "subrosa/grid.hpp"

namespace subrosa {

enum class ExperimentKind { Moser, Geodesic, Interp, Heat, Hodge, Growth };

std::string to_string(ExperimentKind kind);
ExperimentKind kind_from_string(const std::string& name);

/// A density or potential input: either an inline expression or a field-file
/// reference written as "@path".
struct FieldSpec {
    std::string expression;
    std::string file;
    bool empty() const { return expression.empty() && file.empty(); }
    std::string display() const { return file.empty() ? expression : "@" + file; }
};

struct FrameSpec {
    std::string builtin = "sin-heisenberg";
    std::vector<std::vector<std::string>> expressions;  // overrides builtin when nonempty
};

/// Fully resolved experiment configuration. parse_config validates the
/// document eagerly: unknown keys, unparsable expressions and missing files
/// are all rejected before any computation starts.
struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::Moser;
    std::vector<std::size_t> dims{16, 16, 16};
    std::vector<double> periods;
    FrameSpec frame;

    FieldSpec source;     // moser: initial density (default uniform)
    FieldSpec target;     // moser: final density
    FieldSpec density;    // heat/interp: evolving density
    FieldSpec potential;  // interp: transport potential
    std::vector<std::string> field;  // hodge: vector field components

    int steps = 64;
    double dt = 1e-3;
    double t_max = 1.0;
    double tol = 1e-8;
    std::vector<double> times;
    std::array<double, 3> q0{0.0, 0.0, 0.0};
    std::array<double, 3> p0{1.0, 0.0, 0.0};
    int max_depth = 3;
    int trials = 20;
    std::uint64_t seed = 1234;

    std::string out;        // output directory; empty = no files written
    std::string report;     // extra copy of the JSON summary
    std::string dump_flow;  // moser: flow container dump
    unsigned threads = 0;   // 0 = all cores
    bool deterministic = false;

    GridPtr make_grid_ptr() const;
    Frame make_frame(const GridPtr& grid) const;
    /// Resolved-config echo, serialized as a JSON document.
    std::string echo_json() const;
};

/// Parse and validate a JSON configuration document. kind_override, when
/// nonempty, wins over the document's "kind".
ExperimentConfig parse_config(const std::string& text, const std::string& kind_override = "");

/// Sample a scalar input on the grid (expression or field file).
ScalarField resolve_scalar(const FieldSpec& spec, const GridPtr& grid);
/// Sample a density input; mass is kept as sampled (not normalized).
Density resolve_density(const FieldSpec& spec, const GridPtr& grid);

}  // namespace subrosa
