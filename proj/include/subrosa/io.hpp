#pragma once

#include <filesystem>
#include <string>

#include "subrosa/flowmap.hpp"
#include "subrosa/grid.hpp"

namespace subrosa {

/// Field container file "SRFLD1": magic, axis count, dims, periods, component
/// count, then little-endian f64 samples, one node after another in row-major
/// order with components interleaved per node.
void write_field(const std::filesystem::path& path, const ScalarField& f);
void write_field(const std::filesystem::path& path, const VectorField& v);
void write_field(const std::filesystem::path& path, const Density& d);

struct LoadedField {
    GridPtr grid;
    int components = 0;
    std::vector<double> data;  // node-major, components interleaved

    ScalarField as_scalar() const;
    VectorField as_vector() const;
    Density as_density(bool normalize = false) const;
};

LoadedField read_field(const std::filesystem::path& path);

/// CSV export: one row per node, coordinates first, then the values.
void write_csv(const std::filesystem::path& path, const ScalarField& f);
void write_csv(const std::filesystem::path& path, const VectorField& v);

/// Flow container file "SRFLW1": magic, axis count, dims, periods, final
/// time, then per node (row-major) the endpoint position and log-Jacobian.
void write_flowmap(const std::filesystem::path& path, const FlowMap& flow);
FlowMap read_flowmap(const std::filesystem::path& path);

}  // namespace subrosa
