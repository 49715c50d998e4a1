#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "subrosa/grid.hpp"
#include "subrosa/random_fields.hpp"

using namespace subrosa;

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
}

TEST_CASE("grid construction and node layout") {
    auto g = make_grid({8, 4, 16}, {1.0, 2.0, 1.0});
    CHECK(g->dim() == 3);
    CHECK(g->size() == 8 * 4 * 16);
    CHECK(g->spacing(1) == doctest::Approx(0.5));
    // row-major, last axis fastest
    CHECK(g->stride(2) == 1);
    CHECK(g->stride(1) == 16);
    CHECK(g->stride(0) == 64);
    const auto p = g->node(g->flatten({2, 1, 3}));
    CHECK(p[0] == doctest::Approx(2.0 / 8.0));
    CHECK(p[1] == doctest::Approx(0.5));
    CHECK(p[2] == doctest::Approx(3.0 / 16.0));

    CHECK_THROWS_AS(make_grid({3, 8, 8}), config_error);
    CHECK_THROWS_AS(make_grid({8}), config_error);
    CHECK_THROWS_AS(make_grid({8, 8}, {1.0, -1.0}), config_error);
}

TEST_CASE("wrap maps points into the fundamental domain") {
    auto g = make_grid({8, 8}, {1.0, 2.0});
    auto p = g->wrap({1.25, -0.5, 0.0});
    CHECK(p[0] == doctest::Approx(0.25));
    CHECK(p[1] == doctest::Approx(1.5));
    // seam round-up guard
    auto q = g->wrap({1.0 - 1e-18, 0.0, 0.0});
    CHECK(q[0] < 1.0);
}

TEST_CASE("quadrature: unit mass, odd mode, squared mode") {
    auto g = make_grid({16, 16, 16});
    const Density uni = Density::uniform(g);
    CHECK(integrate(ScalarField(g, 1.0), uni) == doctest::Approx(1.0).epsilon(1e-14));

    auto sinx = ScalarField::from_expression(g, Expr::parse("sin(2*pi*x)"));
    CHECK(std::abs(integrate(sinx, uni)) <= 1e-14);

    // analytic antiderivative: integral of sin^2 over one period is 1/2, and
    // the periodic quadrature is exact for this degree-2 integrand
    auto sin2 = ScalarField::from_expression(g, Expr::parse("sin(2*pi*x)*sin(2*pi*x)"));
    CHECK(std::abs(integrate(sin2, uni) - 0.5) <= 1e-13);
}

TEST_CASE("quadrature exactness for products of low Fourier modes") {
    auto g = make_grid({12, 12, 12});
    const Density uni = Density::uniform(g);
    // total degree per axis below dims/2: the lattice sum of any nonzero
    // surviving mode vanishes identically
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> mode(-2, 2);
    for (int trial = 0; trial < 10; ++trial) {
        const int k1 = mode(rng), k2 = mode(rng), k3 = mode(rng), l1 = mode(rng),
                  l2 = mode(rng), l3 = mode(rng);
        ScalarField f = ScalarField::sampled(g, [&](const std::array<double, 3>& p) {
            return std::cos(kTwoPi * (k1 * p[0] + k2 * p[1] + k3 * p[2])) *
                   std::cos(kTwoPi * (l1 * p[0] + l2 * p[1] + l3 * p[2]));
        });
        // closed form: 1/2 when the two wave vectors match up to sign (and
        // are nonzero), 1 when both vanish, else 0
        double expected = 0.0;
        const bool zero1 = k1 == 0 && k2 == 0 && k3 == 0;
        const bool zero2 = l1 == 0 && l2 == 0 && l3 == 0;
        if (zero1 && zero2) expected = 1.0;
        else if (!zero1 && !zero2 &&
                 ((k1 == l1 && k2 == l2 && k3 == l3) ||
                  (k1 == -l1 && k2 == -l2 && k3 == -l3)))
            expected = 0.5;
        else if (zero1 != zero2) expected = 0.0;
        CHECK(std::abs(integrate(f, uni) - expected) <= 1e-13);
    }
}

TEST_CASE("gradient: constants, symbolic oracle, linearity") {
    auto g = make_grid({32, 32, 32});
    CHECK(norm_linf(grad(ScalarField(g, 3.7))) == 0.0);

    auto u = ScalarField::from_expression(g, Expr::parse("sin(2*pi*y)"));
    VectorField du = grad(u);
    auto exact = ScalarField::from_expression(g, Expr::parse("2*pi*cos(2*pi*y)"));
    double err = 0.0;
    for (std::size_t i = 0; i < g->size(); ++i) {
        err = std::max(err, std::abs(du.at(1, i) - exact[i]));
        err = std::max(err, std::abs(du.at(0, i)));
        err = std::max(err, std::abs(du.at(2, i)));
    }
    // 4th-order stencil truncation: (kh)^4/30 relative
    const double kh = kTwoPi / 32.0;
    CHECK(err <= 1.2 * kTwoPi * std::pow(kh, 4) / 30.0);

    std::mt19937_64 rng(3);
    ScalarField a = random_smooth_scalar(g, rng);
    ScalarField b = random_smooth_scalar(g, rng);
    ScalarField combo(g);
    for (std::size_t i = 0; i < g->size(); ++i) combo[i] = 2.5 * a[i] - 1.25 * b[i];
    VectorField lhs = grad(combo);
    VectorField rhs = 2.5 * grad(a) - 1.25 * grad(b);
    CHECK(norm_linf(lhs - rhs) <= 1e-12 * std::max(1.0, norm_linf(rhs)));
}

TEST_CASE("derivative truncation improves with order") {
    auto g = make_grid({16, 16});
    auto u = ScalarField::from_expression(g, Expr::parse("sin(2*pi*x)"));
    auto exact = ScalarField::from_expression(g, Expr::parse("2*pi*cos(2*pi*x)"));
    double errs[3];
    int idx = 0;
    for (int order : {2, 4, 6}) {
        ScalarField d = derivative(u, 0, order);
        errs[idx++] = norm_linf(d - exact);
    }
    CHECK(errs[1] < 0.1 * errs[0]);
    CHECK(errs[2] < 0.1 * errs[1]);
}

TEST_CASE("divergence: constants, symbolic oracle, adjointness, mean zero") {
    auto g = make_grid({24, 24, 24});
    const Density uni = Density::uniform(g);

    VectorField constant(g, 0.0);
    for (std::size_t i = 0; i < g->size(); ++i) {
        constant.at(0, i) = 1.0;
        constant.at(1, i) = -2.0;
    }
    CHECK(norm_linf(divergence(constant, uni)) <= 1e-13);

    VectorField w(g);
    auto s = ScalarField::from_expression(g, Expr::parse("sin(2*pi*x)"));
    std::copy(s.values().begin(), s.values().end(), w.component(0).begin());
    ScalarField div = divergence(w, uni);
    auto exact = ScalarField::from_expression(g, Expr::parse("2*pi*cos(2*pi*x)"));
    const double kh = kTwoPi / 24.0;
    CHECK(norm_linf(div - exact) <= 1.2 * kTwoPi * std::pow(kh, 4) / 30.0);

    // adjointness against a non-uniform weight: the discrete backbone of
    // every integration-by-parts step
    std::mt19937_64 rng(11);
    Density nu = Density::normalized(
        g, [&] {
            ScalarField base = random_smooth_scalar(g, rng, 2, 0.3);
            std::vector<double> v(g->size());
            for (std::size_t i = 0; i < g->size(); ++i) v[i] = 1.0 + base[i];
            return v;
        }());
    VectorField rv = random_vector_field(g, rng);
    ScalarField rf = random_smooth_scalar(g, rng);
    const double lhs = inner(divergence(rv, nu), rf, nu);
    const double rhs = -inner(rv, grad(rf), nu);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max({std::abs(lhs), std::abs(rhs), 1e-6}));

    CHECK(std::abs(integrate(divergence(rv, nu), nu)) <= 1e-12);
}

TEST_CASE("density: normalization, positivity, raw mass") {
    auto g = make_grid({8, 8});
    std::vector<double> vals(g->size(), 2.0);
    Density d = Density::normalized(g, vals);
    CHECK(d.mass() == doctest::Approx(1.0).epsilon(1e-14));

    Density r = Density::raw(g, std::vector<double>(g->size(), 1.1));
    CHECK(r.mass() == doctest::Approx(1.1).epsilon(1e-14));

    std::vector<double> bad(g->size(), 1.0);
    bad[3] = -0.5;
    CHECK_THROWS_AS(Density::raw(g, bad), config_error);

    auto g2 = make_grid({16, 16});
    ScalarField f(g2, 1.0);
    CHECK_THROWS_AS(integrate(f, d), structural_error);
}
