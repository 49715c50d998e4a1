#include "subrosa/poisson.hpp"

#include <cmath>
#include <sstream>

#include "subrosa/parallel.hpp"

namespace subrosa {

SubLaplacianOperator::SubLaplacianOperator(const Frame& frame, const Density& nu, int order)
    : grid_(frame.grid()), frame_(frame), nu_(nu), order_(order) {
    require_same_grid(*frame.grid(), *nu.grid(), "SubLaplacianOperator");
    const std::size_t n = grid_->size();
    for (int a = 0; a < grid_->dim(); ++a) {
        du_[static_cast<std::size_t>(a)].resize(n);
        flux_[static_cast<std::size_t>(a)].resize(n);
    }
    tmp_.resize(n);
}

void SubLaplacianOperator::apply(std::span<const double> in, std::span<double> out) const {
    const Grid& g = *grid_;
    const int dim = g.dim();
    const int k = frame_.rank();
    const std::size_t n = g.size();
    if (in.size() != n || out.size() != n)
        throw structural_error("sub-Laplacian buffers do not match the grid size");

    for (int a = 0; a < dim; ++a)
        derivative_into(g, in, du_[static_cast<std::size_t>(a)], a, order_);

    // flux_a = r * sum_i (X_i . du) X_i^a, one pass over nodes
    const auto rv = nu_.ratio().values();
    std::span<const double> x[3][3];
    for (int i = 0; i < k; ++i)
        for (int a = 0; a < dim; ++a) x[i][a] = frame_.field(i).component(a);
    par::parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t node = begin; node < end; ++node) {
            double c[3] = {0.0, 0.0, 0.0};
            for (int i = 0; i < k; ++i) {
                double s = 0.0;
                for (int a = 0; a < dim; ++a)
                    s += x[i][a][node] * du_[static_cast<std::size_t>(a)][node];
                c[i] = s;
            }
            const double r = rv[node];
            for (int a = 0; a < dim; ++a) {
                double s = 0.0;
                for (int i = 0; i < k; ++i) s += c[i] * x[i][a][node];
                flux_[static_cast<std::size_t>(a)][node] = r * s;
            }
        }
    });

    std::fill(out.begin(), out.end(), 0.0);
    for (int a = 0; a < dim; ++a) {
        derivative_into(g, flux_[static_cast<std::size_t>(a)], tmp_, a, order_);
        par::parallel_for(n, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) out[i] += tmp_[i];
        });
    }
    par::parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) out[i] /= rv[i];
    });
}

ScalarField sub_laplacian(const ScalarField& u, const Frame& frame, const Density& nu,
                          int order) {
    require_same_grid(*u.grid(), *frame.grid(), "sub_laplacian");
    const SubLaplacianOperator op(frame, nu, order);
    ScalarField out(u.grid());
    op.apply(u.values(), out.values());
    return out;
}

ScalarField sub_laplacian_via_projection(const ScalarField& u, const Frame& frame,
                                         const Density& nu, int order) {
    return divergence(project_tau(grad(u, order), frame), nu, order);
}

namespace {

// nu-weighted dot product of raw buffers (fixed-tree reduction).
double dot_nu(std::span<const double> a, std::span<const double> b, std::span<const double> r) {
    return par::indexed_sum(a.size(), [&](std::size_t i) { return a[i] * b[i] * r[i]; }) /
           static_cast<double>(a.size());
}

void remove_nu_mean(std::span<double> v, std::span<const double> r) {
    const double mean =
        par::indexed_sum(v.size(), [&](std::size_t i) { return v[i] * r[i]; }) /
        static_cast<double>(v.size());
    par::parallel_for(v.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) v[i] -= mean;
    });
}

}  // namespace

PoissonSolution solve_poisson(const ScalarField& rho, const Frame& frame, const Density& nu,
                              double tol, const CgOptions& opts) {
    require_same_grid(*rho.grid(), *frame.grid(), "solve_poisson");
    require_same_grid(*rho.grid(), *nu.grid(), "solve_poisson");
    if (!(tol > 0.0) || tol > 1e-4)
        throw config_error("poisson tolerance must lie in (0, 1e-4]");
    const double mean = integrate(rho, nu);
    if (std::abs(mean) > 1e-10) {
        std::ostringstream os;
        os << "solvability violation: source has nonzero mean " << mean
           << " (the image of the sub-Laplacian is the mean-zero subspace)";
        throw solver_error(os.str());
    }

    const std::size_t n = rho.grid()->size();
    const std::size_t max_iter =
        opts.max_iterations ? opts.max_iterations
                            : static_cast<std::size_t>(50.0 * std::sqrt(static_cast<double>(n)));

    // A u = b with A = -laplacian^tau (PSD in the nu-weighted inner product,
    // kernel = constants) and b = -rho; the constant mode is deflated from
    // every iterate.
    const SubLaplacianOperator op(frame, nu, opts.order);
    const auto rvals = nu.ratio().values();
    auto apply = [&](std::span<const double> in, std::span<double> out) {
        op.apply(in, out);
        par::parallel_for(n, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) out[i] = -out[i];
        });
    };

    std::vector<double> b(n);
    for (std::size_t i = 0; i < n; ++i) b[i] = -rho[i];
    const double bnorm = std::sqrt(std::max(0.0, dot_nu(b, b, rvals)));

    PoissonSolution sol{ScalarField(rho.grid()), 0.0, 0};
    if (bnorm == 0.0) return sol;

    auto uv = sol.u.values();
    if (opts.initial_guess) {
        require_same_grid(*opts.initial_guess->grid(), *rho.grid(), "solve_poisson initial guess");
        std::copy(opts.initial_guess->values().begin(), opts.initial_guess->values().end(),
                  uv.begin());
        remove_nu_mean(uv, rvals);
    }

    std::vector<double> r(n), p(n), ap(n);
    apply(uv, r);
    par::parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) r[i] = b[i] - r[i];
    });
    remove_nu_mean(r, rvals);
    std::copy(r.begin(), r.end(), p.begin());
    double rr = dot_nu(r, r, rvals);

    std::size_t it = 0;
    while (std::sqrt(rr) / bnorm > tol) {
        if (it >= max_iter) {
            std::ostringstream os;
            os << "conjugate gradient failed to converge in " << max_iter
               << " iterations (relative residual " << std::sqrt(rr) / bnorm << ")";
            throw solver_error(os.str());
        }
        apply(p, ap);
        const double pap = dot_nu(p, ap, rvals);
        if (!(pap > 0.0))
            throw solver_error("conjugate gradient breakdown: operator lost definiteness");
        const double alpha = rr / pap;
        par::parallel_for(n, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) {
                uv[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
        });
        remove_nu_mean(r, rvals);
        const double rr_next = dot_nu(r, r, rvals);
        const double beta = rr_next / rr;
        par::parallel_for(n, [&](std::size_t begin, std::size_t end) {
            for (std::size_t i = begin; i < end; ++i) p[i] = r[i] + beta * p[i];
        });
        rr = rr_next;
        ++it;
    }

    remove_nu_mean(uv, rvals);
    apply(uv, ap);
    par::parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) ap[i] = b[i] - ap[i];
    });
    sol.residual_norm = std::sqrt(std::max(0.0, dot_nu(ap, ap, rvals))) / bnorm;
    sol.iterations = static_cast<int>(it);
    return sol;
}

HodgeDecomposition hodge_decompose(const VectorField& w, const Frame& frame, const Density& nu,
                                   double tol) {
    require_same_grid(*w.grid(), *frame.grid(), "hodge_decompose");
    ScalarField rho = divergence(w, nu);
    PoissonSolution sol = solve_poisson(rho, frame, nu, tol);
    VectorField v = horizontal_gradient(sol.u, frame);
    VectorField u = w - v;
    return HodgeDecomposition{sol.u, std::move(v), std::move(u), std::move(sol)};
}

}  // namespace subrosa
