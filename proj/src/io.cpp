#include "subrosa/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>

namespace subrosa {

namespace {

constexpr char kFieldMagic[6] = {'S', 'R', 'F', 'L', 'D', '1'};
constexpr char kFlowMagic[6] = {'S', 'R', 'F', 'L', 'W', '1'};

static_assert(std::endian::native == std::endian::little,
              "field files are little-endian; add byte swapping for this platform");

void put_u32(std::ofstream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void put_f64(std::ofstream& os, double v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint32_t get_u32(std::ifstream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

double get_f64(std::ifstream& is) {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw config_error("cannot open '" + path.string() + "' for writing");
    return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw config_error("cannot open '" + path.string() + "' for reading");
    return is;
}

void write_header(std::ofstream& os, const char magic[6], const Grid& g, std::uint32_t ncomp) {
    os.write(magic, 6);
    put_u32(os, static_cast<std::uint32_t>(g.dim()));
    for (int a = 0; a < g.dim(); ++a) put_u32(os, static_cast<std::uint32_t>(g.extent(a)));
    for (int a = 0; a < g.dim(); ++a) put_f64(os, g.period(a));
    put_u32(os, ncomp);
}

struct Header {
    GridPtr grid;
    std::uint32_t ncomp;
};

Header read_header(std::ifstream& is, const char magic[6], const std::filesystem::path& path) {
    char m[6];
    is.read(m, 6);
    if (!is || std::memcmp(m, magic, 6) != 0)
        throw config_error("'" + path.string() + "' is not a " + std::string(magic, 6) + " file");
    const std::uint32_t dim = get_u32(is);
    if (dim != 2 && dim != 3)
        throw config_error("'" + path.string() + "': unsupported axis count");
    std::vector<std::size_t> dims(dim);
    std::vector<double> periods(dim);
    for (auto& d : dims) d = get_u32(is);
    for (auto& p : periods) p = get_f64(is);
    const std::uint32_t ncomp = get_u32(is);
    if (!is) throw config_error("'" + path.string() + "': truncated header");
    return Header{make_grid(std::move(dims), std::move(periods)), ncomp};
}

}  // namespace

void write_field(const std::filesystem::path& path, const ScalarField& f) {
    std::ofstream os = open_out(path);
    write_header(os, kFieldMagic, *f.grid(), 1);
    for (const double v : f.values()) put_f64(os, v);
    if (!os) throw config_error("failed writing '" + path.string() + "'");
}

void write_field(const std::filesystem::path& path, const VectorField& v) {
    std::ofstream os = open_out(path);
    const int ncomp = v.components();
    write_header(os, kFieldMagic, *v.grid(), static_cast<std::uint32_t>(ncomp));
    for (std::size_t i = 0; i < v.grid()->size(); ++i)
        for (int c = 0; c < ncomp; ++c) put_f64(os, v.at(c, i));
    if (!os) throw config_error("failed writing '" + path.string() + "'");
}

void write_field(const std::filesystem::path& path, const Density& d) {
    write_field(path, d.ratio());
}

ScalarField LoadedField::as_scalar() const {
    if (components != 1)
        throw config_error("field file holds more than one component where a scalar is needed");
    return ScalarField(grid, data);
}

VectorField LoadedField::as_vector() const {
    if (components != grid->dim())
        throw config_error("field file component count does not match the grid dimension");
    VectorField v(grid);
    for (std::size_t i = 0; i < grid->size(); ++i)
        for (int c = 0; c < components; ++c)
            v.at(c, i) = data[i * static_cast<std::size_t>(components) +
                              static_cast<std::size_t>(c)];
    return v;
}

Density LoadedField::as_density(bool normalize) const {
    if (components != 1)
        throw config_error("density file must hold exactly one component");
    return normalize ? Density::normalized(grid, data) : Density::raw(grid, data);
}

LoadedField read_field(const std::filesystem::path& path) {
    std::ifstream is = open_in(path);
    const Header h = read_header(is, kFieldMagic, path);
    LoadedField out;
    out.grid = h.grid;
    out.components = static_cast<int>(h.ncomp);
    out.data.resize(out.grid->size() * h.ncomp);
    for (auto& v : out.data) v = get_f64(is);
    if (!is) throw config_error("'" + path.string() + "': truncated data section");
    return out;
}

namespace {

void write_csv_rows(std::ofstream& os, const Grid& g,
                    const std::function<void(std::size_t)>& emit_values) {
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto p = g.node(i);
        for (int a = 0; a < g.dim(); ++a) {
            if (a) os << ',';
            os << p[static_cast<std::size_t>(a)];
        }
        emit_values(i);
        os << '\n';
    }
}

}  // namespace

void write_csv(const std::filesystem::path& path, const ScalarField& f) {
    std::ofstream os(path);
    if (!os) throw config_error("cannot open '" + path.string() + "' for writing");
    os.precision(17);
    const Grid& g = *f.grid();
    os << (g.dim() == 2 ? "x,y,value\n" : "x,y,z,value\n");
    write_csv_rows(os, g, [&](std::size_t i) { os << ',' << f[i]; });
}

void write_csv(const std::filesystem::path& path, const VectorField& v) {
    std::ofstream os(path);
    if (!os) throw config_error("cannot open '" + path.string() + "' for writing");
    os.precision(17);
    const Grid& g = *v.grid();
    os << (g.dim() == 2 ? "x,y" : "x,y,z");
    for (int c = 0; c < v.components(); ++c) os << ",v" << c;
    os << '\n';
    write_csv_rows(os, g, [&](std::size_t i) {
        for (int c = 0; c < v.components(); ++c) os << ',' << v.at(c, i);
    });
}

void write_flowmap(const std::filesystem::path& path, const FlowMap& flow) {
    std::ofstream os = open_out(path);
    write_header(os, kFlowMagic, *flow.grid, static_cast<std::uint32_t>(flow.grid->dim() + 1));
    put_f64(os, flow.t_final);
    for (std::size_t i = 0; i < flow.grid->size(); ++i) {
        for (int a = 0; a < flow.grid->dim(); ++a)
            put_f64(os, flow.positions[i][static_cast<std::size_t>(a)]);
        put_f64(os, flow.log_jacobian[i]);
    }
    if (!os) throw config_error("failed writing '" + path.string() + "'");
}

FlowMap read_flowmap(const std::filesystem::path& path) {
    std::ifstream is = open_in(path);
    const Header h = read_header(is, kFlowMagic, path);
    if (h.ncomp != static_cast<std::uint32_t>(h.grid->dim() + 1))
        throw config_error("'" + path.string() + "': unexpected flow record width");
    FlowMap flow;
    flow.grid = h.grid;
    flow.t_final = get_f64(is);
    flow.positions.resize(h.grid->size());
    flow.log_jacobian.resize(h.grid->size());
    for (std::size_t i = 0; i < h.grid->size(); ++i) {
        std::array<double, 3> p{0.0, 0.0, 0.0};
        for (int a = 0; a < h.grid->dim(); ++a) p[static_cast<std::size_t>(a)] = get_f64(is);
        flow.positions[i] = p;
        flow.log_jacobian[i] = get_f64(is);
    }
    if (!is) throw config_error("'" + path.string() + "': truncated data section");
    return flow;
}

}  // namespace subrosa
