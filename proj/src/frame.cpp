#include "subrosa/frame.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "subrosa/parallel.hpp"

namespace subrosa {

ExprField bracket(const ExprField& x, const ExprField& y, int dim) {
    ExprField out;
    for (int c = 0; c < dim; ++c) {
        Expr acc = Expr::constant(0.0);
        for (int a = 0; a < dim; ++a) {
            const auto ua = static_cast<std::size_t>(a);
            const auto uc = static_cast<std::size_t>(c);
            acc = acc + x.comp[ua] * y.comp[uc].derivative(a) -
                  y.comp[ua] * x.comp[uc].derivative(a);
        }
        out.comp[static_cast<std::size_t>(c)] = acc;
    }
    return out;
}

Frame::Frame(GridPtr grid, std::vector<ExprField> fields, std::string name)
    : grid_(std::move(grid)), fields_(std::move(fields)), name_(std::move(name)) {
    const int n = grid_->dim();
    const int k = static_cast<int>(fields_.size());
    if (k < 1 || k > n)
        throw config_error("frame rank must be between 1 and the grid dimension");
    derivs_.resize(fields_.size());
    for (int i = 0; i < k; ++i)
        for (int c = 0; c < n; ++c)
            for (int a = 0; a < n; ++a)
                derivs_[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)]
                       [static_cast<std::size_t>(a)] = coeff(i, c).derivative(a);
    sampled_.reserve(fields_.size());
    for (int i = 0; i < k; ++i) {
        VectorField v(grid_);
        for (int c = 0; c < n; ++c) {
            auto vc = v.component(c);
            const Expr& e = coeff(i, c);
            for (std::size_t node = 0; node < grid_->size(); ++node)
                vc[node] = e.eval(grid_->node(node));
        }
        v.ensure_finite("frame sampling");
        sampled_.push_back(std::move(v));
    }
    validate();
}

void Frame::validate() const {
    // Linear independence at every node: Gram determinant above threshold.
    const int k = rank();
    const std::size_t n = grid_->size();
    for (std::size_t node = 0; node < n; ++node) {
        double g[3][3] = {};
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) {
                double s = 0.0;
                for (int c = 0; c < grid_->dim(); ++c)
                    s += field(i).at(c, node) * field(j).at(c, node);
                g[i][j] = s;
            }
        double det = 1.0;
        if (k == 1) det = g[0][0];
        else if (k == 2) det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        else
            det = g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1]) -
                  g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0]) +
                  g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]);
        if (!(det > 1e-10))
            throw config_error("frame fields are linearly dependent at a grid node");
    }
}

Frame Frame::builtin(const std::string& name, GridPtr grid) {
    const int n = grid->dim();
    if (name == "flat") {
        std::vector<ExprField> fields(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i)
            fields[static_cast<std::size_t>(i)].comp[static_cast<std::size_t>(i)] =
                Expr::constant(1.0);
        return Frame(std::move(grid), std::move(fields), "flat");
    }
    if (name == "sin-heisenberg") {
        if (n != 3) throw config_error("the sin-heisenberg frame requires a 3d grid");
        const double two_pi_over_lx = 2.0 * std::numbers::pi / grid->period(0);
        std::vector<ExprField> fields(2);
        fields[0].comp[0] = Expr::constant(1.0);
        fields[1].comp[1] = Expr::constant(1.0);
        fields[1].comp[2] = Expr::sin(Expr::constant(two_pi_over_lx) * Expr::variable(0));
        return Frame(std::move(grid), std::move(fields), "sin-heisenberg");
    }
    throw config_error("unknown builtin frame '" + name + "' (available: flat, sin-heisenberg)");
}

Frame Frame::from_expressions(GridPtr grid,
                              const std::vector<std::vector<std::string>>& coeffs) {
    std::vector<ExprField> fields;
    fields.reserve(coeffs.size());
    for (const auto& row : coeffs) {
        if (static_cast<int>(row.size()) != grid->dim())
            throw config_error("each frame field needs one coefficient per grid axis");
        ExprField f;
        for (std::size_t c = 0; c < row.size(); ++c) f.comp[c] = Expr::parse(row[c]);
        fields.push_back(std::move(f));
    }
    return Frame(std::move(grid), std::move(fields), "custom");
}

Frame Frame::from_expressions(GridPtr grid, std::vector<ExprField> fields, std::string name) {
    return Frame(std::move(grid), std::move(fields), std::move(name));
}

void Frame::eval_at(const std::array<double, 3>& q, double out[3][3]) const {
    for (int i = 0; i < rank(); ++i)
        for (int c = 0; c < grid_->dim(); ++c)
            out[i][c] = coeff(i, c).eval(q);
}

void Frame::eval_derivatives_at(const std::array<double, 3>& q, double out[3][3][3]) const {
    for (int i = 0; i < rank(); ++i)
        for (int c = 0; c < grid_->dim(); ++c)
            for (int a = 0; a < grid_->dim(); ++a)
                out[i][c][a] = coeff_derivative(i, c, a).eval(q);
}

namespace {

// Solve the SPD system g*c = b (k <= 3) by Cholesky; throws on degeneracy.
void solve_gram(const double g[3][3], const double b[3], double c[3], int k) {
    double l[3][3] = {};
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = g[i][j];
            for (int m = 0; m < j; ++m) s -= l[i][m] * l[j][m];
            if (i == j) {
                if (!(s > 1e-12)) throw solver_error("degenerate frame: Gram matrix not positive");
                l[i][i] = std::sqrt(s);
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    double w[3];
    for (int i = 0; i < k; ++i) {
        double s = b[i];
        for (int m = 0; m < i; ++m) s -= l[i][m] * w[m];
        w[i] = s / l[i][i];
    }
    for (int i = k - 1; i >= 0; --i) {
        double s = w[i];
        for (int m = i + 1; m < k; ++m) s -= l[m][i] * c[m];
        c[i] = s / l[i][i];
    }
}

}  // namespace

VectorField project_tau(const VectorField& w, const Frame& frame) {
    require_same_grid(*w.grid(), *frame.grid(), "project_tau");
    const int k = frame.rank();
    const int n = frame.grid()->dim();
    const std::size_t size = frame.grid()->size();
    VectorField out(frame.grid());
    par::parallel_for(size, [&](std::size_t begin, std::size_t end) {
        for (std::size_t node = begin; node < end; ++node) {
            double g[3][3] = {}, b[3] = {}, c[3] = {};
            for (int i = 0; i < k; ++i) {
                for (int j = 0; j <= i; ++j) {
                    double s = 0.0;
                    for (int a = 0; a < n; ++a)
                        s += frame.field(i).at(a, node) * frame.field(j).at(a, node);
                    g[i][j] = g[j][i] = s;
                }
                double bi = 0.0;
                for (int a = 0; a < n; ++a) bi += frame.field(i).at(a, node) * w.at(a, node);
                b[i] = bi;
            }
            solve_gram(g, b, c, k);
            for (int a = 0; a < n; ++a) {
                double s = 0.0;
                for (int i = 0; i < k; ++i) s += c[i] * frame.field(i).at(a, node);
                out.at(a, node) = s;
            }
        }
    });
    return out;
}

std::vector<ScalarField> horizontal_coefficients(const ScalarField& u, const Frame& frame,
                                                 int order) {
    require_same_grid(*u.grid(), *frame.grid(), "horizontal_coefficients");
    const int n = frame.grid()->dim();
    VectorField du = grad(u, order);
    std::vector<ScalarField> coeffs;
    coeffs.reserve(static_cast<std::size_t>(frame.rank()));
    for (int i = 0; i < frame.rank(); ++i) {
        ScalarField ci(u.grid());
        auto cv = ci.values();
        par::parallel_for(cv.size(), [&](std::size_t begin, std::size_t end) {
            for (std::size_t node = begin; node < end; ++node) {
                double s = 0.0;
                for (int a = 0; a < n; ++a) s += frame.field(i).at(a, node) * du.at(a, node);
                cv[node] = s;
            }
        });
        coeffs.push_back(std::move(ci));
    }
    return coeffs;
}

VectorField horizontal_gradient(const ScalarField& u, const Frame& frame, int order) {
    const auto coeffs = horizontal_coefficients(u, frame, order);
    const int n = frame.grid()->dim();
    VectorField out(frame.grid());
    for (int i = 0; i < frame.rank(); ++i) {
        const auto ci = coeffs[static_cast<std::size_t>(i)].values();
        for (int a = 0; a < n; ++a) {
            auto oa = out.component(a);
            const auto xa = frame.field(i).component(a);
            par::parallel_for(oa.size(), [&](std::size_t begin, std::size_t end) {
                for (std::size_t node = begin; node < end; ++node)
                    oa[node] += ci[node] * xa[node];
            });
        }
    }
    return out;
}

VectorField bracket(const VectorField& x, const VectorField& y, int order) {
    require_same_grid(*x.grid(), *y.grid(), "bracket");
    const int n = x.grid()->dim();
    VectorField out(x.grid());
    for (int c = 0; c < n; ++c) {
        ScalarField yc(x.grid(), std::vector<double>(y.component(c).begin(), y.component(c).end()));
        ScalarField xc(x.grid(), std::vector<double>(x.component(c).begin(), x.component(c).end()));
        for (int a = 0; a < n; ++a) {
            ScalarField dyc = derivative(yc, a, order);
            ScalarField dxc = derivative(xc, a, order);
            auto oc = out.component(c);
            for (std::size_t node = 0; node < x.grid()->size(); ++node)
                oc[node] += x.at(a, node) * dyc[node] - y.at(a, node) * dxc[node];
        }
    }
    return out;
}

std::vector<ScalarField> tau_coefficients(const VectorField& w, const Frame& frame) {
    require_same_grid(*w.grid(), *frame.grid(), "tau_coefficients");
    const int k = frame.rank();
    const int n = frame.grid()->dim();
    const std::size_t size = frame.grid()->size();
    std::vector<ScalarField> coeffs(static_cast<std::size_t>(k),
                                    ScalarField(frame.grid()));
    par::parallel_for(size, [&](std::size_t begin, std::size_t end) {
        for (std::size_t node = begin; node < end; ++node) {
            double g[3][3] = {}, b[3] = {}, c[3] = {};
            for (int i = 0; i < k; ++i) {
                for (int j = 0; j <= i; ++j) {
                    double s = 0.0;
                    for (int a = 0; a < n; ++a)
                        s += frame.field(i).at(a, node) * frame.field(j).at(a, node);
                    g[i][j] = g[j][i] = s;
                }
                double bi = 0.0;
                for (int a = 0; a < n; ++a) bi += frame.field(i).at(a, node) * w.at(a, node);
                b[i] = bi;
            }
            solve_gram(g, b, c, k);
            for (int i = 0; i < k; ++i) coeffs[static_cast<std::size_t>(i)][node] = c[i];
        }
    });
    return coeffs;
}

double inner_tau(const VectorField& a, const VectorField& b, const Frame& frame,
                 const Density& nu) {
    const auto ca = tau_coefficients(a, frame);
    const auto cb = tau_coefficients(b, frame);
    double total = 0.0;
    for (std::size_t i = 0; i < ca.size(); ++i) total += inner(ca[i], cb[i], nu);
    return total;
}

double norm_tau(const VectorField& a, const Frame& frame, const Density& nu) {
    const auto ca = tau_coefficients(a, frame);
    double total = 0.0;
    for (const auto& c : ca) total += inner(c, c, nu);
    return std::sqrt(std::max(0.0, total));
}

std::vector<int> GrowthReport::growth_at(std::size_t node) const {
    std::vector<int> g(static_cast<std::size_t>(max_depth));
    for (int d = 0; d < max_depth; ++d)
        g[static_cast<std::size_t>(d)] =
            growth[node * static_cast<std::size_t>(max_depth) + static_cast<std::size_t>(d)];
    return g;
}

std::vector<int> GrowthReport::minimal_growth() const {
    const std::size_t n = growth.size() / static_cast<std::size_t>(max_depth);
    std::vector<int> best;
    for (std::size_t node = 0; node < n; ++node) {
        auto g = growth_at(node);
        if (best.empty() || g < best) best = g;
    }
    return best;
}

GrowthReport check_bracket_generating(const Frame& frame, int max_depth) {
    if (max_depth < 1) throw config_error("growth check needs max_depth >= 1");
    const int n = frame.grid()->dim();
    const int k = frame.rank();

    // Layered symbolic brackets: layer d holds all [L_a, L_b] with a + b = d.
    std::vector<std::vector<ExprField>> layers;
    layers.emplace_back();
    for (int i = 0; i < k; ++i) layers[0].push_back(frame.expr_field(i));
    std::size_t total = layers[0].size();
    for (int d = 2; d <= max_depth; ++d) {
        std::vector<ExprField> layer;
        for (int a = 1; 2 * a <= d; ++a) {
            const int b = d - a;
            const auto& la = layers[static_cast<std::size_t>(a - 1)];
            const auto& lb = layers[static_cast<std::size_t>(b - 1)];
            for (std::size_t i = 0; i < la.size(); ++i) {
                const std::size_t jstart = (a == b) ? i + 1 : 0;
                for (std::size_t j = jstart; j < lb.size(); ++j)
                    layer.push_back(bracket(la[i], lb[j], n));
            }
        }
        total += layer.size();
        if (total > 512)
            throw config_error("growth check bracket basis too large; reduce max_depth");
        layers.push_back(std::move(layer));
    }

    const std::size_t size = frame.grid()->size();
    GrowthReport report;
    report.max_depth = max_depth;
    report.growth.assign(size * static_cast<std::size_t>(max_depth), 0);

    constexpr double kRankThreshold = 1e-8;
    par::parallel_for(size, [&](std::size_t begin, std::size_t end) {
        for (std::size_t node = begin; node < end; ++node) {
            const auto p = frame.grid()->node(node);
            double basis[3][3];  // orthonormalized accepted directions
            int rank = 0;
            for (int d = 1; d <= max_depth; ++d) {
                for (const auto& f : layers[static_cast<std::size_t>(d - 1)]) {
                    double v[3] = {0, 0, 0};
                    double norm2 = 0.0;
                    for (int c = 0; c < n; ++c) {
                        v[c] = f.comp[static_cast<std::size_t>(c)].eval(p);
                        norm2 += v[c] * v[c];
                    }
                    if (rank == n) break;
                    // Gram-Schmidt against the accepted basis.
                    for (int r = 0; r < rank; ++r) {
                        double dot = 0.0;
                        for (int c = 0; c < n; ++c) dot += v[c] * basis[r][c];
                        for (int c = 0; c < n; ++c) v[c] -= dot * basis[r][c];
                    }
                    double res = 0.0;
                    for (int c = 0; c < n; ++c) res += v[c] * v[c];
                    res = std::sqrt(res);
                    if (res > kRankThreshold * std::max(1.0, std::sqrt(norm2))) {
                        for (int c = 0; c < n; ++c) basis[rank][c] = v[c] / res;
                        ++rank;
                    }
                }
                report.growth[node * static_cast<std::size_t>(max_depth) +
                              static_cast<std::size_t>(d - 1)] = static_cast<std::uint8_t>(rank);
            }
        }
    });

    report.bracket_generating = true;
    report.depth_needed = 0;
    for (std::size_t node = 0; node < size; ++node) {
        int reached = 0;
        for (int d = 1; d <= max_depth; ++d) {
            if (report.growth[node * static_cast<std::size_t>(max_depth) +
                              static_cast<std::size_t>(d - 1)] == n) {
                reached = d;
                break;
            }
        }
        if (reached == 0) {
            report.bracket_generating = false;
        } else {
            report.depth_needed = std::max(report.depth_needed, reached);
        }
    }
    if (!report.bracket_generating) report.depth_needed = 0;
    return report;
}

}  // namespace subrosa
