#include "subrosa/grid.hpp"

#include <cmath>
#include <sstream>

#include "subrosa/parallel.hpp"

namespace subrosa {

Grid::Grid(std::vector<std::size_t> dims, std::vector<double> periods) {
    if (dims.size() != 2 && dims.size() != 3)
        throw config_error("grid must have 2 or 3 axes");
    if (periods.empty()) periods.assign(dims.size(), 1.0);
    if (periods.size() != dims.size())
        throw config_error("grid periods must match the number of axes");
    dim_ = static_cast<int>(dims.size());
    size_ = 1;
    for (std::size_t a = 0; a < dims.size(); ++a) {
        if (dims[a] < 4) throw config_error("grid needs at least 4 nodes per axis");
        if (!(periods[a] > 0.0)) throw config_error("grid periods must be positive");
        dims_[a] = dims[a];
        period_[a] = periods[a];
        spacing_[a] = periods[a] / static_cast<double>(dims[a]);
        size_ *= dims[a];
    }
    // row-major, last axis fastest
    std::size_t s = 1;
    for (int a = dim_ - 1; a >= 0; --a) {
        stride_[static_cast<std::size_t>(a)] = s;
        s *= dims_[static_cast<std::size_t>(a)];
    }
}

std::array<std::size_t, 3> Grid::unflatten(std::size_t flat) const {
    std::array<std::size_t, 3> idx{0, 0, 0};
    for (int a = 0; a < dim_; ++a) {
        const auto ua = static_cast<std::size_t>(a);
        idx[ua] = (flat / stride_[ua]) % dims_[ua];
    }
    return idx;
}

std::size_t Grid::flatten(const std::array<std::size_t, 3>& idx) const {
    std::size_t flat = 0;
    for (int a = 0; a < dim_; ++a) {
        const auto ua = static_cast<std::size_t>(a);
        flat += idx[ua] * stride_[ua];
    }
    return flat;
}

std::array<double, 3> Grid::node(std::size_t flat) const {
    const auto idx = unflatten(flat);
    std::array<double, 3> p{0.0, 0.0, 0.0};
    for (int a = 0; a < dim_; ++a) {
        const auto ua = static_cast<std::size_t>(a);
        p[ua] = static_cast<double>(idx[ua]) * spacing_[ua];
    }
    return p;
}

std::array<double, 3> Grid::wrap(std::array<double, 3> p) const {
    for (int a = 0; a < dim_; ++a) {
        const auto ua = static_cast<std::size_t>(a);
        p[ua] -= period_[ua] * std::floor(p[ua] / period_[ua]);
        if (p[ua] >= period_[ua]) p[ua] = 0.0;  // guard against round-up at the seam
    }
    return p;
}

GridPtr make_grid(std::vector<std::size_t> dims, std::vector<double> periods) {
    return std::make_shared<const Grid>(std::move(dims), std::move(periods));
}

void require_same_grid(const Grid& a, const Grid& b, const char* context) {
    if (!(a == b)) throw structural_error(std::string(context) + ": fields live on different grids");
}

// --- ScalarField ---------------------------------------------------------------

ScalarField::ScalarField(GridPtr grid, double fill)
    : grid_(std::move(grid)), values_(grid_->size(), fill) {}

ScalarField::ScalarField(GridPtr grid, std::vector<double> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (values_.size() != grid_->size())
        throw structural_error("scalar field values do not match the grid size");
}

ScalarField ScalarField::sampled(const GridPtr& grid,
                                 const std::function<double(const std::array<double, 3>&)>& fn) {
    ScalarField f(grid);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = fn(grid->node(i));
    return f;
}

ScalarField ScalarField::from_expression(const GridPtr& grid, const Expr& e) {
    ScalarField f(grid);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = e.eval(grid->node(i));
    f.ensure_finite("expression sampling");
    return f;
}

void ScalarField::ensure_finite(const char* context) const {
    for (const double v : values_)
        if (!std::isfinite(v))
            throw integration_error(std::string(context) + ": non-finite field value");
}

// --- VectorField ---------------------------------------------------------------

VectorField::VectorField(GridPtr grid, double fill) : grid_(std::move(grid)) {
    for (int c = 0; c < grid_->dim(); ++c)
        comps_[static_cast<std::size_t>(c)].assign(grid_->size(), fill);
}

void VectorField::ensure_finite(const char* context) const {
    for (int c = 0; c < components(); ++c)
        for (const double v : component(c))
            if (!std::isfinite(v))
                throw integration_error(std::string(context) + ": non-finite field value");
}

// --- Density ---------------------------------------------------------------------

Density Density::uniform(GridPtr grid) {
    ScalarField one(grid, 1.0);
    return Density(std::move(grid), std::move(one));
}

Density Density::normalized(GridPtr grid, std::vector<double> ratio) {
    if (ratio.size() != grid->size())
        throw structural_error("density samples do not match the grid size");
    double total = par::sum(ratio);
    const double mean = total / static_cast<double>(grid->size());
    if (!(mean > 0.0) || !std::isfinite(mean))
        throw config_error("density must have positive finite mass");
    for (auto& r : ratio) {
        r /= mean;
        if (!(r > 0.0))
            throw config_error("density ratio must be positive everywhere");
    }
    return Density(grid, ScalarField(grid, std::move(ratio)));
}

Density Density::raw(GridPtr grid, std::vector<double> ratio) {
    if (ratio.size() != grid->size())
        throw structural_error("density samples do not match the grid size");
    for (const double r : ratio) {
        if (!(r > 0.0) || !std::isfinite(r))
            throw config_error("density ratio must be positive everywhere");
    }
    return Density(grid, ScalarField(grid, std::move(ratio)));
}

Density Density::from_expression(const GridPtr& grid, const Expr& e, bool normalize) {
    ScalarField f = ScalarField::from_expression(grid, e);
    std::vector<double> v(f.values().begin(), f.values().end());
    return normalize ? normalized(grid, std::move(v)) : raw(grid, std::move(v));
}

double Density::mass() const {
    return par::sum(ratio_.values()) / static_cast<double>(grid_->size());
}

// --- quadrature ------------------------------------------------------------------

double integrate(const ScalarField& f, const Density& nu) {
    require_same_grid(*f.grid(), *nu.grid(), "integrate");
    const auto fv = f.values();
    const auto rv = nu.ratio().values();
    const double s = par::indexed_sum(fv.size(), [&](std::size_t i) { return fv[i] * rv[i]; });
    return s / static_cast<double>(f.grid()->size());
}

double inner(const ScalarField& f, const ScalarField& g, const Density& nu) {
    require_same_grid(*f.grid(), *g.grid(), "inner");
    require_same_grid(*f.grid(), *nu.grid(), "inner");
    const auto fv = f.values();
    const auto gv = g.values();
    const auto rv = nu.ratio().values();
    const double s =
        par::indexed_sum(fv.size(), [&](std::size_t i) { return fv[i] * gv[i] * rv[i]; });
    return s / static_cast<double>(f.grid()->size());
}

double inner(const VectorField& v, const VectorField& w, const Density& nu) {
    require_same_grid(*v.grid(), *w.grid(), "inner");
    require_same_grid(*v.grid(), *nu.grid(), "inner");
    const auto rv = nu.ratio().values();
    double total = 0.0;
    for (int c = 0; c < v.components(); ++c) {
        const auto vc = v.component(c);
        const auto wc = w.component(c);
        total += par::indexed_sum(vc.size(),
                                  [&](std::size_t i) { return vc[i] * wc[i] * rv[i]; });
    }
    return total / static_cast<double>(v.grid()->size());
}

double norm_l1(const ScalarField& f, const Density& nu) {
    const auto fv = f.values();
    const auto rv = nu.ratio().values();
    const double s =
        par::indexed_sum(fv.size(), [&](std::size_t i) { return std::abs(fv[i]) * rv[i]; });
    return s / static_cast<double>(f.grid()->size());
}

double norm_l2(const ScalarField& f, const Density& nu) {
    return std::sqrt(std::max(0.0, inner(f, f, nu)));
}

double norm_linf(const ScalarField& f) {
    double m = 0.0;
    for (const double v : f.values()) m = std::max(m, std::abs(v));
    return m;
}

double norm_l2(const VectorField& v, const Density& nu) {
    return std::sqrt(std::max(0.0, inner(v, v, nu)));
}

double norm_linf(const VectorField& v) {
    double m = 0.0;
    for (int c = 0; c < v.components(); ++c)
        for (const double x : v.component(c)) m = std::max(m, std::abs(x));
    return m;
}

// --- stencils ---------------------------------------------------------------------

namespace {

struct Stencil {
    int radius;
    std::array<double, 3> weights;  // weights of +1, +2, +3 offsets; odd part only
};

Stencil stencil_for(int order, double h) {
    switch (order) {
        case 2: return {1, {1.0 / (2.0 * h), 0.0, 0.0}};
        case 4: return {2, {8.0 / (12.0 * h), -1.0 / (12.0 * h), 0.0}};
        case 6: return {3, {45.0 / (60.0 * h), -9.0 / (60.0 * h), 1.0 / (60.0 * h)}};
        default: throw config_error("derivative order must be 2, 4 or 6");
    }
}

}  // namespace

void derivative_into(const Grid& g, std::span<const double> in, std::span<double> out, int axis,
                     int order) {
    if (axis < 0 || axis >= g.dim()) throw structural_error("derivative axis out of range");
    if (in.size() != g.size() || out.size() != g.size())
        throw structural_error("derivative buffers do not match the grid size");
    const Stencil st = stencil_for(order, g.spacing(axis));
    const std::size_t m = g.extent(axis);
    const std::size_t stride = g.stride(axis);
    const std::size_t nlines = g.size() / m;
    const int radius = st.radius;
    const double w1 = st.weights[0], w2 = st.weights[1], w3 = st.weights[2];

    // One "line" per 1d slice along the axis; the wrap-free interior runs
    // unconditionally, the ends wrap explicitly.
    par::parallel_for(nlines, [&](std::size_t lbegin, std::size_t lend) {
        for (std::size_t line = lbegin; line < lend; ++line) {
            const std::size_t outer = line / stride;
            const std::size_t inner = line % stride;
            const std::size_t base = outer * m * stride + inner;
            auto at = [&](std::size_t j) { return in[base + j * stride]; };
            auto put = [&](std::size_t j, double v) { out[base + j * stride] = v; };
            const std::size_t lo = std::min(m, static_cast<std::size_t>(radius));
            const std::size_t hi =
                m > 2 * static_cast<std::size_t>(radius) ? m - static_cast<std::size_t>(radius)
                                                         : lo;
            for (std::size_t j = 0; j < lo; ++j) {
                double acc = 0.0;
                for (int r = 1; r <= radius; ++r) {
                    const std::size_t jp = j + static_cast<std::size_t>(r);
                    const std::size_t jm = j + m - static_cast<std::size_t>(r);
                    acc += st.weights[static_cast<std::size_t>(r - 1)] *
                           (at(jp >= m ? jp - m : jp) - at(jm >= m ? jm - m : jm));
                }
                put(j, acc);
            }
            if (radius == 1) {
                for (std::size_t j = lo; j < hi; ++j)
                    put(j, w1 * (at(j + 1) - at(j - 1)));
            } else if (radius == 2) {
                for (std::size_t j = lo; j < hi; ++j)
                    put(j, w1 * (at(j + 1) - at(j - 1)) + w2 * (at(j + 2) - at(j - 2)));
            } else {
                for (std::size_t j = lo; j < hi; ++j)
                    put(j, w1 * (at(j + 1) - at(j - 1)) + w2 * (at(j + 2) - at(j - 2)) +
                               w3 * (at(j + 3) - at(j - 3)));
            }
            for (std::size_t j = hi; j < m; ++j) {
                double acc = 0.0;
                for (int r = 1; r <= radius; ++r) {
                    std::size_t jp = j + static_cast<std::size_t>(r);
                    if (jp >= m) jp -= m;
                    std::size_t jm = j + m - static_cast<std::size_t>(r);
                    if (jm >= m) jm -= m;
                    acc += st.weights[static_cast<std::size_t>(r - 1)] * (at(jp) - at(jm));
                }
                put(j, acc);
            }
        }
    });
}

ScalarField derivative(const ScalarField& f, int axis, int order) {
    ScalarField out(f.grid());
    derivative_into(*f.grid(), f.values(), out.values(), axis, order);
    return out;
}

VectorField grad(const ScalarField& f, int order) {
    VectorField out(f.grid());
    for (int a = 0; a < f.grid()->dim(); ++a) {
        ScalarField d = derivative(f, a, order);
        std::copy(d.values().begin(), d.values().end(), out.component(a).begin());
    }
    return out;
}

ScalarField divergence(const VectorField& w, const Density& nu, int order) {
    require_same_grid(*w.grid(), *nu.grid(), "divergence");
    const GridPtr& g = w.grid();
    const auto rv = nu.ratio().values();
    ScalarField acc(g);
    ScalarField weighted(g);
    for (int a = 0; a < g->dim(); ++a) {
        const auto wc = w.component(a);
        auto wv = weighted.values();
        par::parallel_for(wv.size(), [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) wv[i] = rv[i] * wc[i];
        });
        ScalarField d = derivative(weighted, a, order);
        auto av = acc.values();
        const auto dv = d.values();
        par::parallel_for(av.size(), [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) av[i] += dv[i];
        });
    }
    auto av = acc.values();
    par::parallel_for(av.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) av[i] /= rv[i];
    });
    return acc;
}

// --- arithmetic ---------------------------------------------------------------------

ScalarField operator+(const ScalarField& a, const ScalarField& b) {
    require_same_grid(*a.grid(), *b.grid(), "field sum");
    ScalarField out(a.grid());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    return out;
}

ScalarField operator-(const ScalarField& a, const ScalarField& b) {
    require_same_grid(*a.grid(), *b.grid(), "field difference");
    ScalarField out(a.grid());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    return out;
}

ScalarField operator*(double s, const ScalarField& a) {
    ScalarField out(a.grid());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * a[i];
    return out;
}

VectorField operator+(const VectorField& a, const VectorField& b) {
    require_same_grid(*a.grid(), *b.grid(), "field sum");
    VectorField out(a.grid());
    for (int c = 0; c < a.components(); ++c)
        for (std::size_t i = 0; i < a.grid()->size(); ++i) out.at(c, i) = a.at(c, i) + b.at(c, i);
    return out;
}

VectorField operator-(const VectorField& a, const VectorField& b) {
    require_same_grid(*a.grid(), *b.grid(), "field difference");
    VectorField out(a.grid());
    for (int c = 0; c < a.components(); ++c)
        for (std::size_t i = 0; i < a.grid()->size(); ++i) out.at(c, i) = a.at(c, i) - b.at(c, i);
    return out;
}

VectorField operator*(double s, const VectorField& a) {
    VectorField out(a.grid());
    for (int c = 0; c < a.components(); ++c)
        for (std::size_t i = 0; i < a.grid()->size(); ++i) out.at(c, i) = s * a.at(c, i);
    return out;
}

}  // namespace subrosa
