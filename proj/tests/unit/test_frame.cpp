#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "subrosa/frame.hpp"
#include "subrosa/random_fields.hpp"

using namespace subrosa;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

TEST_CASE("projection onto the sin-heisenberg planes") {
    auto g = make_grid({16, 16, 16});
    Frame fr = Frame::builtin("sin-heisenberg", g);

    // horizontal input is reproduced exactly
    VectorField x1(g);
    for (std::size_t i = 0; i < g->size(); ++i) x1.at(0, i) = 1.0;
    CHECK(norm_linf(project_tau(x1, fr) - x1) <= 1e-14);

    // 3x3 least-squares oracle: P(dz) = (0, s/(1+s^2), s^2/(1+s^2))
    VectorField dz(g);
    for (std::size_t i = 0; i < g->size(); ++i) dz.at(2, i) = 1.0;
    VectorField p = project_tau(dz, fr);
    for (std::size_t i = 0; i < g->size(); i += 97) {
        const double s = std::sin(kTwoPi * g->node(i)[0]);
        CHECK(p.at(0, i) == doctest::Approx(0.0).epsilon(1e-13));
        CHECK(p.at(1, i) == doctest::Approx(s / (1 + s * s)).epsilon(1e-12));
        CHECK(p.at(2, i) == doctest::Approx(s * s / (1 + s * s)).epsilon(1e-12));
    }

    // pointwise orthogonal input projects to zero: w = (0, -s, 1) is
    // perpendicular to both frame fields
    VectorField w(g);
    for (std::size_t i = 0; i < g->size(); ++i) {
        const double s = std::sin(kTwoPi * g->node(i)[0]);
        w.at(1, i) = -s;
        w.at(2, i) = 1.0;
    }
    CHECK(norm_linf(project_tau(w, fr)) <= 1e-13);
}

TEST_CASE("projection is idempotent and symmetric") {
    auto g = make_grid({12, 12, 12});
    Frame fr = Frame::builtin("sin-heisenberg", g);
    const Density uni = Density::uniform(g);
    std::mt19937_64 rng(5);
    VectorField v = random_vector_field(g, rng);
    VectorField w = random_vector_field(g, rng);

    VectorField pv = project_tau(v, fr);
    CHECK(norm_linf(project_tau(pv, fr) - pv) <= 1e-12 * std::max(1.0, norm_linf(pv)));

    const double a = inner(project_tau(v, fr), w, uni);
    const double b = inner(v, project_tau(w, fr), uni);
    CHECK(std::abs(a - b) <= 1e-12 * std::max(std::abs(a), 1.0));
}

TEST_CASE("horizontal gradient: constants, frame-sum oracle, horizontality") {
    auto g = make_grid({32, 32, 32});
    Frame fr = Frame::builtin("sin-heisenberg", g);
    CHECK(norm_linf(horizontal_gradient(ScalarField(g, 2.0), fr)) == 0.0);

    // u = sin(2 pi y): gradient along X_2 with coefficient 2 pi cos(2 pi y)
    auto u = ScalarField::from_expression(g, Expr::parse("sin(2*pi*y)"));
    VectorField hg = horizontal_gradient(u, fr);
    const double tol = 1.2 * kTwoPi * std::pow(kTwoPi / 32.0, 4) / 30.0;
    for (std::size_t i = 0; i < g->size(); i += 101) {
        const auto pnode = g->node(i);
        const double c = kTwoPi * std::cos(kTwoPi * pnode[1]);
        const double s = std::sin(kTwoPi * pnode[0]);
        CHECK(std::abs(hg.at(0, i)) <= tol);
        CHECK(std::abs(hg.at(1, i) - c) <= tol * 2);
        CHECK(std::abs(hg.at(2, i) - c * s) <= tol * 2);
    }

    // output lies in the span of the frame at every node
    std::mt19937_64 rng(9);
    ScalarField r = random_smooth_scalar(g, rng);
    VectorField h = horizontal_gradient(r, fr);
    CHECK(norm_linf(h - project_tau(h, fr)) <= 1e-12 * std::max(1.0, norm_linf(h)));
}

TEST_CASE("frame-sum and projection gradients coincide for orthonormal frames") {
    auto g = make_grid({16, 16, 16});
    // X_1 = dx, X_2 = cos(2 pi x) dy + sin(2 pi x) dz: orthonormal in the
    // coordinate metric and bracket-generating of step 2
    Frame tw = Frame::from_expressions(
        g, std::vector<std::vector<std::string>>{{"1", "0", "0"},
                                                 {"0", "cos(2*pi*x)", "sin(2*pi*x)"}});
    std::mt19937_64 rng(13);
    ScalarField u = random_smooth_scalar(g, rng);
    VectorField a = horizontal_gradient(u, tw);
    VectorField b = project_tau(grad(u), tw);
    CHECK(norm_linf(a - b) <= 1e-12 * std::max(1.0, norm_linf(grad(u))));
}

TEST_CASE("brackets: coordinate fields, sin-heisenberg oracle, antisymmetry") {
    auto g = make_grid({24, 24, 24});
    VectorField dx(g), dy(g);
    for (std::size_t i = 0; i < g->size(); ++i) {
        dx.at(0, i) = 1.0;
        dy.at(1, i) = 1.0;
    }
    CHECK(norm_linf(bracket(dx, dy)) <= 1e-13);

    Frame fr = Frame::builtin("sin-heisenberg", g);
    VectorField b = bracket(fr.field(0), fr.field(1));
    auto exact = ScalarField::from_expression(g, Expr::parse("2*pi*cos(2*pi*x)"));
    double err = 0.0;
    for (std::size_t i = 0; i < g->size(); ++i) {
        err = std::max(err, std::abs(b.at(0, i)));
        err = std::max(err, std::abs(b.at(1, i)));
        err = std::max(err, std::abs(b.at(2, i) - exact[i]));
    }
    CHECK(err <= 1.2 * kTwoPi * std::pow(kTwoPi / 24.0, 4) / 30.0);

    std::mt19937_64 rng(21);
    VectorField v = random_vector_field(g, rng);
    CHECK(norm_linf(bracket(v, v)) <= 1e-11 * std::max(1.0, norm_linf(v)));

    // symbolic route matches the oracle exactly
    ExprField eb = bracket(fr.expr_field(0), fr.expr_field(1), 3);
    const std::array<double, 3> q{0.11, 0.52, 0.83};
    CHECK(eb.comp[0].eval(q) == 0.0);
    CHECK(eb.comp[1].eval(q) == 0.0);
    CHECK(eb.comp[2].eval(q) == doctest::Approx(kTwoPi * std::cos(kTwoPi * 0.11)).epsilon(1e-14));
}

TEST_CASE("growth vectors match the symbolic oracles") {
    auto g = make_grid({16, 16, 16});

    Frame flat = Frame::builtin("flat", g);
    GrowthReport rf = check_bracket_generating(flat, 2);
    CHECK(rf.bracket_generating);
    CHECK(rf.depth_needed == 1);
    CHECK(rf.growth_at(0) == std::vector<int>{3, 3});

    Frame sh = Frame::builtin("sin-heisenberg", g);
    GrowthReport rs = check_bracket_generating(sh, 3);
    CHECK(rs.bracket_generating);
    CHECK(rs.depth_needed == 3);
    // at x = 0: [X1,X2] = 2 pi dz, so depth 2 suffices
    CHECK(rs.growth_at(g->flatten({0, 0, 0})) == std::vector<int>{2, 3, 3});
    // at x = 1/4 the first bracket vanishes and depth 3 is needed
    CHECK(rs.growth_at(g->flatten({4, 0, 0})) == std::vector<int>{2, 2, 3});
    // growth is nondecreasing and capped at n everywhere
    for (std::size_t node = 0; node < g->size(); node += 37) {
        auto gv = rs.growth_at(node);
        for (std::size_t d = 1; d < gv.size(); ++d) {
            CHECK(gv[d] >= gv[d - 1]);
            CHECK(gv[d] <= 3);
        }
    }

    // depth too small: reported, not an error
    GrowthReport shallow = check_bracket_generating(sh, 2);
    CHECK_FALSE(shallow.bracket_generating);
}

TEST_CASE("degenerate frames are rejected at construction") {
    auto g = make_grid({8, 8, 8});
    CHECK_THROWS_AS(Frame::from_expressions(
                        g, std::vector<std::vector<std::string>>{{"1", "0", "0"},
                                                                 {"2", "0", "0"}}),
                    config_error);
    CHECK_THROWS_AS(Frame::builtin("no-such-frame", g), config_error);
    auto g2 = make_grid({8, 8});
    CHECK_THROWS_AS(Frame::builtin("sin-heisenberg", g2), config_error);
}
