#pragma once

#include <array>
#include <cstddef>
#include <memory>
#include <string>
#include <string_view>

#include "subrosa/errors.hpp"

namespace subrosa {

/// Expression parse failure; carries the byte offset of the offending token.
class expression_error : public config_error {
public:
    expression_error(const std::string& what, std::size_t position)
        : config_error(what), position(position) {}
    std::size_t position;
};

/// Immutable arithmetic expression over the torus coordinates.
///
/// Grammar: real literals, x, y, z, pi, + - * /, unary minus, sin, cos, exp,
/// parentheses. Expressions evaluate at arbitrary points and differentiate
/// symbolically, which is what makes exact off-grid frame evaluation and
/// exact Lie brackets possible.
class Expr {
public:
    Expr();  // the constant 0

    static Expr constant(double c);
    static Expr variable(int axis);  // 0 = x, 1 = y, 2 = z
    static Expr parse(std::string_view text);

    double eval(const std::array<double, 3>& p) const;
    Expr derivative(int axis) const;
    std::string str() const;

    bool is_constant() const;
    bool is_zero() const;
    /// Constant value if is_constant(), otherwise throws structural_error.
    double constant_value() const;

    friend Expr operator+(const Expr&, const Expr&);
    friend Expr operator-(const Expr&, const Expr&);
    friend Expr operator*(const Expr&, const Expr&);
    friend Expr operator/(const Expr&, const Expr&);
    friend Expr operator-(const Expr&);
    static Expr sin(const Expr&);
    static Expr cos(const Expr&);
    static Expr exp(const Expr&);

    struct Node;  // implementation detail, defined in expression.cpp

private:
    explicit Expr(std::shared_ptr<const Node> n) : node_(std::move(n)) {}
    std::shared_ptr<const Node> node_;
};

}  // namespace subrosa
