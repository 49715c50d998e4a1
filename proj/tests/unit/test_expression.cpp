#include <doctest.h>

#include <cmath>
#include <numbers>

#include "subrosa/expression.hpp"

using namespace subrosa;

TEST_CASE("parse and evaluate the documented grammar") {
    const std::array<double, 3> p{0.3, 0.7, 0.1};
    CHECK(Expr::parse("0").eval(p) == 0.0);
    CHECK(Expr::parse("1 + 2*3").eval(p) == doctest::Approx(7.0));
    CHECK(Expr::parse("(1 + 2)*3").eval(p) == doctest::Approx(9.0));
    CHECK(Expr::parse("x - y/z").eval(p) == doctest::Approx(0.3 - 0.7 / 0.1));
    CHECK(Expr::parse("-x + +y").eval(p) == doctest::Approx(0.4));
    CHECK(Expr::parse("sin(2*pi*x)").eval(p) ==
          doctest::Approx(std::sin(2.0 * std::numbers::pi * 0.3)));
    CHECK(Expr::parse("exp(cos(y))").eval(p) == doctest::Approx(std::exp(std::cos(0.7))));
    CHECK(Expr::parse("1.5e-3").eval(p) == doctest::Approx(1.5e-3));
}

TEST_CASE("parse errors carry a position") {
    CHECK_THROWS_AS(Expr::parse("sin(2*pi*x"), expression_error);
    try {
        Expr::parse("sin(2*pi*x");
    } catch (const expression_error& e) {
        CHECK(e.position == 10);  // end of input
    }
    CHECK_THROWS_AS(Expr::parse("1 + "), expression_error);
    CHECK_THROWS_AS(Expr::parse("2*foo(x)"), expression_error);
    try {
        Expr::parse("2*foo(x)");
    } catch (const expression_error& e) {
        CHECK(e.position == 2);
    }
    CHECK_THROWS_AS(Expr::parse("1 2"), expression_error);
    CHECK_THROWS_AS(Expr::parse(""), expression_error);
}

TEST_CASE("symbolic derivatives agree with finite differences") {
    const char* exprs[] = {"sin(2*pi*x)*cos(2*pi*y)", "x*x*y + z/(1 + x*x)",
                           "exp(sin(x) - 0.5*y)", "(x + y)*(x - z)"};
    const std::array<double, 3> p{0.37, 0.54, 0.81};
    const double h = 1e-6;
    for (const char* text : exprs) {
        Expr e = Expr::parse(text);
        for (int axis = 0; axis < 3; ++axis) {
            auto pp = p, pm = p;
            pp[static_cast<std::size_t>(axis)] += h;
            pm[static_cast<std::size_t>(axis)] -= h;
            const double fd = (e.eval(pp) - e.eval(pm)) / (2.0 * h);
            const double sym = e.derivative(axis).eval(p);
            CHECK(sym == doctest::Approx(fd).epsilon(1e-7));
        }
    }
}

TEST_CASE("derivatives of constants and simplification") {
    Expr c = Expr::parse("3.5*pi");
    CHECK(c.is_constant());
    CHECK(c.derivative(0).is_zero());
    Expr x = Expr::variable(0);
    CHECK((x * Expr::constant(0.0)).is_zero());
    Expr lin = Expr::parse("2*x + 3*y");
    CHECK(lin.derivative(0).constant_value() == doctest::Approx(2.0));
    CHECK(lin.derivative(2).is_zero());
}

TEST_CASE("printed form reparses to the same function") {
    Expr e = Expr::parse("sin(2*pi*x)*cos(y) - z/(1 + exp(x))");
    Expr d = e.derivative(0);
    Expr r = Expr::parse(d.str());
    const std::array<double, 3> p{0.21, 0.43, 0.65};
    CHECK(r.eval(p) == doctest::Approx(d.eval(p)).epsilon(1e-15));
}
