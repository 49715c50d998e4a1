#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "subrosa/poisson.hpp"
#include "subrosa/random_fields.hpp"

using namespace subrosa;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

TEST_CASE("sub-Laplacian: kernel, eigenfunction, self-adjointness") {
    auto g = make_grid({16, 16, 16});
    Frame fr = Frame::builtin("sin-heisenberg", g);
    const Density uni = Density::uniform(g);

    CHECK(norm_linf(sub_laplacian(ScalarField(g, 4.2), fr, uni)) <= 1e-13);

    // sin(2 pi y) is an eigenfunction: X_2 is volume-free and X_2 . grad u
    // depends on y alone; the discrete eigenvalue carries the two-fold
    // stencil symbol error 2(kh)^4/30
    auto u = ScalarField::from_expression(g, Expr::parse("sin(2*pi*y)"));
    ScalarField lap = sub_laplacian(u, fr, uni);
    ScalarField expected = (-kTwoPi * kTwoPi) * u;
    const double rel = norm_l2(lap - expected, uni) / norm_l2(expected, uni);
    const double truncation = 2.0 * std::pow(kTwoPi / 16.0, 4) / 30.0;
    CHECK(rel <= 1.2 * truncation);
    CHECK(rel >= 0.5 * truncation);  // the error really is the stencil symbol

    std::mt19937_64 rng(2);
    ScalarField h = random_smooth_scalar(g, rng);
    ScalarField v = random_smooth_scalar(g, rng);
    const double a = inner(h, sub_laplacian(v, fr, uni), uni);
    const double b = inner(sub_laplacian(h, fr, uni), v, uni);
    CHECK(std::abs(a - b) <= 1e-12 * std::max({std::abs(a), std::abs(b), 1e-6}));

    // negative semidefiniteness
    for (int trial = 0; trial < 5; ++trial) {
        ScalarField w = random_smooth_scalar(g, rng);
        CHECK(inner(w, sub_laplacian(w, fr, uni), uni) <=
              1e-12 * inner(w, w, uni));
    }
}

TEST_CASE("sub-Laplacian is nu-weighted self-adjoint") {
    auto g = make_grid({12, 12, 12});
    Frame fr = Frame::builtin("sin-heisenberg", g);
    std::mt19937_64 rng(8);
    ScalarField bump = random_smooth_scalar(g, rng, 2, 0.3);
    std::vector<double> vals(g->size());
    for (std::size_t i = 0; i < g->size(); ++i) vals[i] = 1.0 + bump[i];
    Density nu = Density::normalized(g, std::move(vals));

    ScalarField h = random_smooth_scalar(g, rng);
    ScalarField v = random_smooth_scalar(g, rng);
    const double a = inner(h, sub_laplacian(v, fr, nu), nu);
    const double b = inner(sub_laplacian(h, fr, nu), v, nu);
    CHECK(std::abs(a - b) <= 1e-12 * std::max({std::abs(a), std::abs(b), 1e-6}));
}

TEST_CASE("frame-sum and projection sub-Laplacians coincide for orthonormal frames") {
    auto g = make_grid({12, 12, 12});
    Frame tw = Frame::from_expressions(
        g, std::vector<std::vector<std::string>>{{"1", "0", "0"},
                                                 {"0", "cos(2*pi*x)", "sin(2*pi*x)"}});
    const Density uni = Density::uniform(g);
    std::mt19937_64 rng(4);
    ScalarField u = random_smooth_scalar(g, rng);
    ScalarField a = sub_laplacian(u, tw, uni);
    ScalarField b = sub_laplacian_via_projection(u, tw, uni);
    CHECK(norm_linf(a - b) <= 1e-11 * std::max(1.0, norm_linf(a)));
}

TEST_CASE("poisson solve: trivial source, inverse of the eigenfunction, gauge") {
    auto g = make_grid({16, 16, 16});
    Frame fr = Frame::builtin("sin-heisenberg", g);
    const Density uni = Density::uniform(g);

    PoissonSolution zero = solve_poisson(ScalarField(g, 0.0), fr, uni, 1e-8);
    CHECK(zero.iterations == 0);
    CHECK(norm_linf(zero.u) == 0.0);

    auto rho = ScalarField::from_expression(g, Expr::parse("-4*pi*pi*sin(2*pi*y)"));
    PoissonSolution sol = solve_poisson(rho, fr, uni, 1e-10);
    CHECK(sol.residual_norm <= 1e-10);
    CHECK(std::abs(integrate(sol.u, uni)) <= 1e-12);
    auto expected = ScalarField::from_expression(g, Expr::parse("sin(2*pi*y)"));
    const double truncation = 2.0 * std::pow(kTwoPi / 16.0, 4) / 30.0;
    CHECK(norm_linf(sol.u - expected) <= 1.5 * truncation);
}

TEST_CASE("poisson solvability dichotomy and round trips") {
    auto g = make_grid({12, 12, 12});
    Frame fr = Frame::builtin("sin-heisenberg", g);
    const Density uni = Density::uniform(g);

    CHECK_THROWS_AS(solve_poisson(ScalarField(g, 1.0), fr, uni, 1e-8), solver_error);
    CHECK_THROWS_AS(solve_poisson(ScalarField(g, 0.0), fr, uni, 1e-3), config_error);

    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 5; ++trial) {
        ScalarField rho = random_smooth_scalar(g, rng, 2, 1.0, /*zero_mean=*/true);
        PoissonSolution sol = solve_poisson(rho, fr, uni, 1e-8);
        ScalarField back = sub_laplacian(sol.u, fr, uni);
        CHECK(norm_l2(back - rho, uni) / norm_l2(rho, uni) <= 1e-8);
        CHECK(std::abs(integrate(sol.u, uni)) <= 1e-12);
    }

    // deterministic iteration counts for fixed inputs
    ScalarField rho = random_smooth_scalar(g, rng, 2, 1.0, true);
    PoissonSolution s1 = solve_poisson(rho, fr, uni, 1e-8);
    PoissonSolution s2 = solve_poisson(rho, fr, uni, 1e-8);
    CHECK(s1.iterations == s2.iterations);
    CHECK(norm_linf(s1.u - s2.u) == 0.0);
}

TEST_CASE("hodge decomposition") {
    auto g = make_grid({12, 12, 12});
    Frame fr = Frame::builtin("sin-heisenberg", g);
    const Density uni = Density::uniform(g);
    const double tol = 1e-9;
    std::mt19937_64 rng(23);

    SUBCASE("gradient input is recovered") {
        ScalarField f0 = random_smooth_scalar(g, rng, 2, 1.0, true);
        VectorField w = horizontal_gradient(f0, fr);
        HodgeDecomposition dec = hodge_decompose(w, fr, uni, tol);
        CHECK(norm_linf(dec.potential - f0) <= 1e-6 * std::max(1.0, norm_linf(f0)));
        CHECK(norm_l2(dec.divergence_free, uni) <= 1e-6 * norm_l2(w, uni));
    }

    SUBCASE("divergence-free input passes through") {
        // constant fields are volume-preserving
        VectorField w(g);
        for (std::size_t i = 0; i < g->size(); ++i) {
            w.at(0, i) = 0.7;
            w.at(2, i) = -0.4;
        }
        HodgeDecomposition dec = hodge_decompose(w, fr, uni, tol);
        CHECK(norm_linf(dec.potential) <= 1e-10);
        CHECK(norm_linf(dec.divergence_free - w) <= 1e-10);
    }

    SUBCASE("random horizontal fields split orthogonally") {
        for (int trial = 0; trial < 3; ++trial) {
            VectorField w = random_horizontal_field(fr, rng);
            HodgeDecomposition dec = hodge_decompose(w, fr, uni, tol);
            const double div_w = norm_l2(divergence(w, uni), uni);
            const double div_u = norm_l2(divergence(dec.divergence_free, uni), uni);
            CHECK(div_u <= 10.0 * tol * div_w);
            // orthogonality holds in the subriemannian pairing, where it is
            // the adjointness identity <U, grad f> = -<div U, f>
            const double orth =
                std::abs(inner_tau(dec.divergence_free, dec.gradient_part, fr, uni));
            const double scale = norm_tau(dec.divergence_free, fr, uni) *
                                 norm_tau(dec.gradient_part, fr, uni);
            CHECK(orth <= 10.0 * tol * std::max(scale, 1e-12));
        }
    }
}

TEST_CASE("near-horizontally-constant functions sit near their mean") {
    // discrete echo of the Chow-Rashevsky argument: with a bracket-generating
    // frame, only constants are annihilated by the horizontal gradient
    auto g = make_grid({12, 12, 12});
    Frame fr = Frame::builtin("sin-heisenberg", g);
    const Density uni = Density::uniform(g);
    std::mt19937_64 rng(31);
    ScalarField h = random_smooth_scalar(g, rng);
    const double hnorm = norm_l2(h, uni);
    const double gradnorm = norm_l2(horizontal_gradient(h, fr), uni);
    // a genuinely varying function has substantial horizontal gradient
    CHECK(gradnorm >= 0.5 * hnorm);
}
