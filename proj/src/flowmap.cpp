#include "subrosa/flowmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

#include "subrosa/parallel.hpp"

namespace subrosa {

FlowMap FlowMap::identity(const GridPtr& grid) {
    FlowMap f;
    f.grid = grid;
    f.positions.resize(grid->size());
    f.log_jacobian.assign(grid->size(), 0.0);
    for (std::size_t i = 0; i < grid->size(); ++i) f.positions[i] = grid->node(i);
    f.t_final = 0.0;
    return f;
}

namespace {

struct Cell {
    std::array<std::size_t, 3> base{0, 0, 0};  // lower node index per axis
    std::array<double, 3> frac{0.0, 0.0, 0.0};
};

Cell locate(const Grid& g, const std::array<double, 3>& p) {
    Cell cell;
    for (int a = 0; a < g.dim(); ++a) {
        const auto ua = static_cast<std::size_t>(a);
        const double h = g.spacing(a);
        double x = p[ua] / h;
        const double m = static_cast<double>(g.extent(a));
        x -= m * std::floor(x / m);
        if (x >= m) x = 0.0;
        double fl = std::floor(x);
        if (fl >= m) fl = m - 1.0;
        std::size_t base = static_cast<std::size_t>(fl);
        double frac = x - fl;
        // Snap points sitting on a node (up to round-off) exactly onto it, so
        // node-seated particles interact with that node alone.
        if (frac < 1e-12) {
            frac = 0.0;
        } else if (frac > 1.0 - 1e-12) {
            frac = 0.0;
            base = (base + 1) % g.extent(a);
        }
        cell.base[ua] = base;
        cell.frac[ua] = frac;
    }
    return cell;
}

template <class Visit>
void visit_corners(const Grid& g, const Cell& cell, Visit&& visit) {
    const int n = g.dim();
    const int corners = 1 << n;
    for (int corner = 0; corner < corners; ++corner) {
        double w = 1.0;
        std::array<std::size_t, 3> idx{0, 0, 0};
        for (int a = 0; a < n; ++a) {
            const auto ua = static_cast<std::size_t>(a);
            const bool hi = (corner >> a) & 1;
            w *= hi ? cell.frac[ua] : 1.0 - cell.frac[ua];
            idx[ua] = hi ? (cell.base[ua] + 1) % g.extent(a) : cell.base[ua];
        }
        visit(g.flatten(idx), w);
    }
}

}  // namespace

double interpolate(const ScalarField& f, const std::array<double, 3>& p) {
    const Grid& g = *f.grid();
    const Cell cell = locate(g, p);
    double acc = 0.0;
    visit_corners(g, cell, [&](std::size_t node, double w) { acc += w * f[node]; });
    return acc;
}

std::array<double, 3> interpolate(const VectorField& v, const std::array<double, 3>& p) {
    const Grid& g = *v.grid();
    const Cell cell = locate(g, p);
    std::array<double, 3> acc{0.0, 0.0, 0.0};
    visit_corners(g, cell, [&](std::size_t node, double w) {
        for (int c = 0; c < g.dim(); ++c)
            acc[static_cast<std::size_t>(c)] += w * v.at(c, node);
    });
    return acc;
}

namespace {

// Weighted least-squares moments of the particle cloud around one node,
// displacements in units of the spacing. The linear model is solved per
// node; third moments feed the curvature defect correction.
struct NodeMoments {
    double s0 = 0.0;
    double s1[3] = {};
    double s2[6] = {};      // (a,b), a <= b
    double s3[10] = {};     // (a,b,c), a <= b <= c
    double b0 = 0.0;
    double b1[3] = {};
};

inline int pair_index(int a, int b) {  // a <= b, n <= 3
    static constexpr int lut[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
    return lut[a][b];
}

inline int triple_index(int a, int b, int c) {  // sorted, n <= 3
    // (0,0,0)=0 (0,0,1)=1 (0,0,2)=2 (0,1,1)=3 (0,1,2)=4 (0,2,2)=5
    // (1,1,1)=6 (1,1,2)=7 (1,2,2)=8 (2,2,2)=9
    if (a == 0) {
        if (b == 0) return c;
        if (b == 1) return 2 + c;      // c in {1,2}
        return 5;                      // b == c == 2
    }
    if (a == 1) {
        if (b == 1) return 5 + c;      // c in {1,2}
        return 8;                      // b == c == 2
    }
    return 9;
}

// Cholesky solve of the (1+n) x (1+n) normal system for two right-hand
// sides: the data fit and the curvature-moment vector. Returns false on a
// degenerate cloud.
bool solve_linear_model(const NodeMoments& m, int n, const double rhs2[4], double& c0,
                        double& bias0) {
    const int k = n + 1;
    double a[4][4];
    a[0][0] = m.s0;
    for (int i = 0; i < n; ++i) {
        a[0][i + 1] = a[i + 1][0] = m.s1[i];
        for (int j = 0; j < n; ++j)
            a[i + 1][j + 1] = m.s2[pair_index(std::min(i, j), std::max(i, j))];
    }
    double l[4][4] = {};
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a[i][j];
            for (int t = 0; t < j; ++t) s -= l[i][t] * l[j][t];
            if (i == j) {
                if (!(s > 1e-9 * std::max(1.0, m.s0))) return false;
                l[i][i] = std::sqrt(s);
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    auto solve = [&](const double* rhs, double& first) {
        double w[4], c[4];
        for (int i = 0; i < k; ++i) {
            double s = rhs[i];
            for (int t = 0; t < i; ++t) s -= l[i][t] * w[t];
            w[i] = s / l[i][i];
        }
        for (int i = k - 1; i >= 0; --i) {
            double s = w[i];
            for (int t = i + 1; t < k; ++t) s -= l[t][i] * c[t];
            c[i] = s / l[i][i];
        }
        first = c[0];
    };
    double rhs1[4] = {m.b0, m.b1[0], m.b1[1], m.b1[2]};
    solve(rhs1, c0);
    solve(rhs2, bias0);
    return true;
}

}  // namespace

CubicStencil cubic_stencil(const Grid& g, const std::array<double, 3>& p) {
    CubicStencil st{};
    for (int a = 0; a < g.dim(); ++a) {
        const auto ua = static_cast<std::size_t>(a);
        const double h = g.spacing(a);
        const double m = static_cast<double>(g.extent(a));
        double x = p[ua] / h;
        x -= m * std::floor(x / m);
        if (x >= m) x = 0.0;
        double fl = std::floor(x);
        if (fl >= m) fl = m - 1.0;
        const double t = x - fl;
        const std::size_t base = static_cast<std::size_t>(fl);
        const std::size_t ext = g.extent(a);
        st.first[ua] = (base + ext - 1) % ext;
        const double t2 = t * t, t3 = t2 * t;
        st.w[a][0] = 0.5 * (-t3 + 2.0 * t2 - t);
        st.w[a][1] = 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0);
        st.w[a][2] = 0.5 * (-3.0 * t3 + 4.0 * t2 + t);
        st.w[a][3] = 0.5 * (t3 - t2);
    }
    return st;
}

double interpolate_cubic(const ScalarField& f, const std::array<double, 3>& p) {
    const Grid& g = *f.grid();
    const CubicStencil st = cubic_stencil(g, p);
    const int n = g.dim();
    const int stops = n == 2 ? 16 : 64;
    double acc = 0.0;
    for (int corner = 0; corner < stops; ++corner) {
        int rem = corner;
        double w = 1.0;
        std::array<std::size_t, 3> idx{0, 0, 0};
        for (int a = 0; a < n; ++a) {
            const int k = rem % 4;
            rem /= 4;
            w *= st.w[a][k];
            idx[static_cast<std::size_t>(a)] =
                (st.first[static_cast<std::size_t>(a)] + static_cast<std::size_t>(k)) %
                g.extent(a);
        }
        acc += w * f[g.flatten(idx)];
    }
    return acc;
}

ScalarField scatter_values(const GridPtr& grid,
                           const std::vector<std::array<double, 3>>& positions,
                           const std::vector<double>& values) {
    if (positions.size() != values.size())
        throw structural_error("scatter: positions and values disagree in length");
    const Grid& g = *grid;
    const int n = g.dim();
    std::vector<NodeMoments> moments(g.size());
    std::vector<std::uint8_t> exact_hit(g.size(), 0);
    std::vector<double> exact_value(g.size(), 0.0);

    // Cubic B-spline deposit, four nodes per axis, with a per-node linear
    // least-squares reconstruction. The wide stencil matters: a transported
    // lattice stretched by the flow can present a one-sided cloud to a node
    // within a narrower support, which starves the linear fit of spread
    // along the stretched axis (local spacings up to ~2h stay covered). A
    // particle sitting exactly on a node supplies its value outright, so
    // node-seated clouds reproduce their samples bit for bit.
    for (std::size_t pidx = 0; pidx < positions.size(); ++pidx) {
        const double v = values[pidx];
        std::size_t center[3] = {0, 0, 0};
        double t[3] = {0.0, 0.0, 0.0};
        bool on_node = true;
        for (int a = 0; a < n; ++a) {
            const auto ua = static_cast<std::size_t>(a);
            const double h = g.spacing(a);
            const double m = static_cast<double>(g.extent(a));
            double x = positions[pidx][ua] / h;
            x -= m * std::floor(x / m);
            if (x >= m) x = 0.0;
            double fl = std::floor(x);
            if (fl >= m) fl = m - 1.0;
            double frac = x - fl;
            if (frac < 1e-12) {
                frac = 0.0;
            } else if (frac > 1.0 - 1e-12) {
                frac = 0.0;
                fl = fl + 1.0 >= m ? 0.0 : fl + 1.0;
            }
            if (frac != 0.0) on_node = false;
            center[a] = static_cast<std::size_t>(fl);
            t[a] = frac;  // in [0, 1)
        }
        if (on_node) {
            std::array<std::size_t, 3> idx{center[0], center[1], center[2]};
            const std::size_t node = g.flatten(idx);
            exact_hit[node] = 1;
            exact_value[node] = v;
        }
        double w_axis[3][4];  // [axis][k+1], node offsets k in {-1, 0, 1, 2}
        for (int a = 0; a < n; ++a) {
            const double ta = t[a];
            const double u = 1.0 - ta;
            w_axis[a][0] = u * u * u / 6.0;
            w_axis[a][1] = (4.0 - 6.0 * ta * ta + 3.0 * ta * ta * ta) / 6.0;
            w_axis[a][2] = (4.0 - 6.0 * u * u + 3.0 * u * u * u) / 6.0;
            w_axis[a][3] = ta * ta * ta / 6.0;
        }
        const int stops = n == 2 ? 16 : 64;
        for (int corner = 0; corner < stops; ++corner) {
            int rem = corner;
            double w = 1.0;
            std::array<std::size_t, 3> idx{0, 0, 0};
            double d[3] = {0.0, 0.0, 0.0};
            for (int a = 0; a < n; ++a) {
                const int k = rem % 4 - 1;
                rem /= 4;
                const auto ua = static_cast<std::size_t>(a);
                const std::size_t m = g.extent(a);
                w *= w_axis[a][k + 1];
                idx[ua] = (center[a] + m + static_cast<std::size_t>(k + 1) - 1) % m;
                d[a] = t[a] - static_cast<double>(k);  // particle minus node, in h units
            }
            if (w == 0.0) continue;
            NodeMoments& mo = moments[g.flatten(idx)];
            mo.s0 += w;
            mo.b0 += w * v;
            for (int a = 0; a < n; ++a) {
                mo.s1[a] += w * d[a];
                mo.b1[a] += w * v * d[a];
                for (int b = a; b < n; ++b) {
                    mo.s2[pair_index(a, b)] += w * d[a] * d[b];
                    for (int c = b; c < n; ++c)
                        mo.s3[triple_index(a, b, c)] += w * d[a] * d[b] * d[c];
                }
            }
        }
    }

    // First pass: local linear fits.
    ScalarField fit(grid);
    std::vector<std::uint8_t> degenerate(g.size(), 0);
    par::parallel_for(g.size(), [&](std::size_t begin, std::size_t end) {
        const double zero_rhs[4] = {0.0, 0.0, 0.0, 0.0};
        for (std::size_t i = begin; i < end; ++i) {
            const NodeMoments& m = moments[i];
            if (!(m.s0 > 1e-12)) {
                fit[i] = std::numeric_limits<double>::quiet_NaN();
                continue;
            }
            double c0, unused;
            if (solve_linear_model(m, n, zero_rhs, c0, unused)) {
                fit[i] = c0;
            } else {
                fit[i] = m.b0 / m.s0;
                degenerate[i] = 1;
            }
        }
    });
    for (std::size_t i = 0; i < g.size(); ++i)
        if (std::isnan(fit[i]))
            throw integration_error(
                "scatter coverage failure: a grid node received no particle weight");

    // Defect correction: the linear fit of a smooth function carries the
    // curvature bias e0^T M^{-1} [sum w q; sum w d q] with q = 1/2 d^T H d.
    // The Hessian comes from stencils of the fitted field (noise-free), and
    // the moment tensors are already in hand.
    ScalarField hess[6] = {fit, fit, fit, fit, fit, fit};
    {
        std::vector<double> dfirst(g.size());
        for (int a = 0; a < n; ++a) {
            derivative_into(g, fit.values(), dfirst, a, 2);
            for (int b = a; b < n; ++b)
                derivative_into(g, dfirst, hess[pair_index(a, b)].values(), b, 2);
        }
    }
    ScalarField out(grid);
    par::parallel_for(g.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            if (exact_hit[i]) {
                out[i] = exact_value[i];
                continue;
            }
            if (degenerate[i]) {
                out[i] = fit[i];
                continue;
            }
            const NodeMoments& m = moments[i];
            // H in h^2 units so it pairs with the h-unit displacements
            double hmat[3][3];
            for (int a = 0; a < n; ++a)
                for (int b = a; b < n; ++b) {
                    const double scale = g.spacing(a) * g.spacing(b);
                    hmat[a][b] = hmat[b][a] = hess[pair_index(a, b)][i] * scale;
                }
            double rhs2[4] = {0.0, 0.0, 0.0, 0.0};
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) {
                    const double hab = 0.5 * hmat[a][b];
                    rhs2[0] += hab * m.s2[pair_index(std::min(a, b), std::max(a, b))];
                    for (int c = 0; c < n; ++c) {
                        int idx[3] = {a, b, c};
                        std::sort(idx, idx + 3);
                        rhs2[c + 1] += hab * m.s3[triple_index(idx[0], idx[1], idx[2])];
                    }
                }
            double c0, bias0;
            if (solve_linear_model(m, n, rhs2, c0, bias0)) {
                out[i] = c0 - bias0;
            } else {
                out[i] = fit[i];
            }
        }
    });
    return out;
}

Density pushforward_density(const FlowMap& flow, const Density& mu0, PushforwardStats* stats) {
    require_same_grid(*flow.grid, *mu0.grid(), "pushforward_density");
    const std::size_t n = flow.grid->size();
    std::vector<double> carried(n);
    for (std::size_t i = 0; i < n; ++i)
        carried[i] = mu0[i] / std::exp(flow.log_jacobian[i]);
    ScalarField scattered = scatter_values(flow.grid, flow.positions, carried);
    scattered.ensure_finite("pushforward_density");
    const double mass = par::sum(scattered.values()) / static_cast<double>(n);
    if (stats) {
        stats->mass_defect = std::abs(mass - 1.0);
        double mn = scattered[0];
        for (const double v : scattered.values()) mn = std::min(mn, v);
        stats->min_ratio = mn / mass;
    }
    return Density::normalized(flow.grid,
                               std::vector<double>(scattered.values().begin(),
                                                   scattered.values().end()));
}

}  // namespace subrosa
