#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "subrosa/errors.hpp"
#include "subrosa/expression.hpp"

namespace subrosa {

/// Periodic rectangular lattice on the n-torus, n = 2 or 3.
///
/// Node i along an axis sits at coordinate i*spacing, spacing = period/dims.
/// Storage of all fields is row-major with the last axis fastest. The
/// reference volume form mu is the uniform density of total mass 1, so the
/// quadrature weight of every node is 1/size().
class Grid {
public:
    Grid(std::vector<std::size_t> dims, std::vector<double> periods = {});

    int dim() const { return dim_; }
    std::size_t size() const { return size_; }
    std::size_t extent(int axis) const { return dims_[static_cast<std::size_t>(axis)]; }
    double period(int axis) const { return period_[static_cast<std::size_t>(axis)]; }
    double spacing(int axis) const { return spacing_[static_cast<std::size_t>(axis)]; }
    std::size_t stride(int axis) const { return stride_[static_cast<std::size_t>(axis)]; }

    std::array<double, 3> node(std::size_t flat) const;
    std::array<std::size_t, 3> unflatten(std::size_t flat) const;
    std::size_t flatten(const std::array<std::size_t, 3>& idx) const;

    /// Wrap a point into [0, period) per axis.
    std::array<double, 3> wrap(std::array<double, 3> p) const;

    bool operator==(const Grid& other) const {
        return dims_ == other.dims_ && period_ == other.period_;
    }

private:
    std::array<std::size_t, 3> dims_{1, 1, 1};
    std::array<double, 3> period_{1.0, 1.0, 1.0};
    std::array<double, 3> spacing_{0.0, 0.0, 0.0};
    std::array<std::size_t, 3> stride_{0, 0, 0};
    std::size_t size_ = 0;
    int dim_ = 0;
};

using GridPtr = std::shared_ptr<const Grid>;

GridPtr make_grid(std::vector<std::size_t> dims, std::vector<double> periods = {});

void require_same_grid(const Grid& a, const Grid& b, const char* context);

/// Grid-sampled real function.
class ScalarField {
public:
    explicit ScalarField(GridPtr grid, double fill = 0.0);
    ScalarField(GridPtr grid, std::vector<double> values);

    static ScalarField sampled(const GridPtr& grid,
                               const std::function<double(const std::array<double, 3>&)>& fn);
    static ScalarField from_expression(const GridPtr& grid, const Expr& e);

    const GridPtr& grid() const { return grid_; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }
    std::size_t size() const { return values_.size(); }

    void ensure_finite(const char* context) const;

private:
    GridPtr grid_;
    std::vector<double> values_;
};

/// Grid-sampled tangent field in the coordinate basis; one component per
/// grid dimension.
class VectorField {
public:
    explicit VectorField(GridPtr grid, double fill = 0.0);

    const GridPtr& grid() const { return grid_; }
    int components() const { return grid_->dim(); }
    std::span<const double> component(int c) const { return comps_[static_cast<std::size_t>(c)]; }
    std::span<double> component(int c) { return comps_[static_cast<std::size_t>(c)]; }
    double at(int c, std::size_t i) const { return comps_[static_cast<std::size_t>(c)][i]; }
    double& at(int c, std::size_t i) { return comps_[static_cast<std::size_t>(c)][i]; }

    void ensure_finite(const char* context) const;

private:
    GridPtr grid_;
    std::array<std::vector<double>, 3> comps_;
};

/// Normalized volume form nu = ratio * mu, represented by the positive ratio
/// against the uniform reference volume. Total mass is fixed to 1.
class Density {
public:
    static Density uniform(GridPtr grid);
    /// Normalizes the given samples to unit mass; rejects nonpositive values.
    static Density normalized(GridPtr grid, std::vector<double> ratio);
    /// Keeps the sampled mass as is; rejects nonpositive values. Pipelines
    /// that require equal or unit total volume check it explicitly rather
    /// than normalizing silently.
    static Density raw(GridPtr grid, std::vector<double> ratio);
    static Density from_expression(const GridPtr& grid, const Expr& e, bool normalize = false);

    const GridPtr& grid() const { return grid_; }
    const ScalarField& ratio() const { return ratio_; }
    double operator[](std::size_t i) const { return ratio_[i]; }

    /// Mass of f d(nu); the ratio itself integrates to 1.
    double mass() const;

private:
    Density(GridPtr grid, ScalarField ratio) : grid_(std::move(grid)), ratio_(std::move(ratio)) {}
    GridPtr grid_;
    ScalarField ratio_;
};

// --- quadrature and norms ----------------------------------------------------

/// Periodic trapezoidal (= midpoint) quadrature of f against nu; exact for
/// trigonometric polynomials below the Nyquist degree.
double integrate(const ScalarField& f, const Density& nu);

/// L2 pairings under the nu-weighted quadrature.
double inner(const ScalarField& f, const ScalarField& g, const Density& nu);
double inner(const VectorField& v, const VectorField& w, const Density& nu);

double norm_l1(const ScalarField& f, const Density& nu);
double norm_l2(const ScalarField& f, const Density& nu);
double norm_linf(const ScalarField& f);
double norm_l2(const VectorField& v, const Density& nu);
double norm_linf(const VectorField& v);

// --- differential operators --------------------------------------------------

/// Periodic central difference along one axis; order is 2, 4 (default) or 6.
ScalarField derivative(const ScalarField& f, int axis, int order = 4);

/// Same stencil into a caller-owned buffer (matrix-free operator plumbing).
void derivative_into(const Grid& g, std::span<const double> in, std::span<double> out, int axis,
                     int order = 4);

VectorField grad(const ScalarField& f, int order = 4);

/// Discrete div_nu, defined as the exact negative adjoint of grad under the
/// nu-weighted inner product: div_nu W = (1/r) sum_a D_a(r W_a). Consequence:
/// <div W, f>_nu = -<W, grad f>_nu to round-off, and the output has exact
/// zero nu-mean.
ScalarField divergence(const VectorField& w, const Density& nu, int order = 4);

// --- field arithmetic helpers ------------------------------------------------

ScalarField operator+(const ScalarField& a, const ScalarField& b);
ScalarField operator-(const ScalarField& a, const ScalarField& b);
ScalarField operator*(double s, const ScalarField& a);
VectorField operator+(const VectorField& a, const VectorField& b);
VectorField operator-(const VectorField& a, const VectorField& b);
VectorField operator*(double s, const VectorField& a);

}  // namespace subrosa
