#include "subrosa/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <sstream>

namespace subrosa {

enum class Op { Const, Var, Add, Sub, Mul, Div, Neg, Sin, Cos, Exp };

struct Expr::Node {
    Op op = Op::Const;
    double value = 0.0;
    int axis = 0;
    std::shared_ptr<const Node> a, b;
};

namespace {

using NodePtr = std::shared_ptr<const Expr::Node>;

NodePtr make_const(double c) {
    auto n = std::make_shared<Expr::Node>();
    n->op = Op::Const;
    n->value = c;
    return n;
}

NodePtr make_node(Op op, NodePtr a, NodePtr b = nullptr) {
    auto n = std::make_shared<Expr::Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

bool is_const(const NodePtr& n, double v) { return n->op == Op::Const && n->value == v; }

double eval_node(const Expr::Node& n, const std::array<double, 3>& p) {
    switch (n.op) {
        case Op::Const: return n.value;
        case Op::Var: return p[static_cast<std::size_t>(n.axis)];
        case Op::Add: return eval_node(*n.a, p) + eval_node(*n.b, p);
        case Op::Sub: return eval_node(*n.a, p) - eval_node(*n.b, p);
        case Op::Mul: return eval_node(*n.a, p) * eval_node(*n.b, p);
        case Op::Div: return eval_node(*n.a, p) / eval_node(*n.b, p);
        case Op::Neg: return -eval_node(*n.a, p);
        case Op::Sin: return std::sin(eval_node(*n.a, p));
        case Op::Cos: return std::cos(eval_node(*n.a, p));
        case Op::Exp: return std::exp(eval_node(*n.a, p));
    }
    return 0.0;
}

// Simplifying constructors: constant folding plus the identities that keep
// iterated symbolic derivatives (brackets of brackets) from exploding.
NodePtr simp_add(NodePtr a, NodePtr b);
NodePtr simp_sub(NodePtr a, NodePtr b);
NodePtr simp_mul(NodePtr a, NodePtr b);
NodePtr simp_div(NodePtr a, NodePtr b);
NodePtr simp_neg(NodePtr a);

NodePtr simp_add(NodePtr a, NodePtr b) {
    if (a->op == Op::Const && b->op == Op::Const) return make_const(a->value + b->value);
    if (is_const(a, 0.0)) return b;
    if (is_const(b, 0.0)) return a;
    return make_node(Op::Add, std::move(a), std::move(b));
}

NodePtr simp_sub(NodePtr a, NodePtr b) {
    if (a->op == Op::Const && b->op == Op::Const) return make_const(a->value - b->value);
    if (is_const(b, 0.0)) return a;
    if (is_const(a, 0.0)) return simp_neg(std::move(b));
    return make_node(Op::Sub, std::move(a), std::move(b));
}

NodePtr simp_mul(NodePtr a, NodePtr b) {
    if (a->op == Op::Const && b->op == Op::Const) return make_const(a->value * b->value);
    if (is_const(a, 0.0) || is_const(b, 0.0)) return make_const(0.0);
    if (is_const(a, 1.0)) return b;
    if (is_const(b, 1.0)) return a;
    return make_node(Op::Mul, std::move(a), std::move(b));
}

NodePtr simp_div(NodePtr a, NodePtr b) {
    if (a->op == Op::Const && b->op == Op::Const && b->value != 0.0)
        return make_const(a->value / b->value);
    if (is_const(a, 0.0) && !is_const(b, 0.0)) return make_const(0.0);
    if (is_const(b, 1.0)) return a;
    return make_node(Op::Div, std::move(a), std::move(b));
}

NodePtr simp_neg(NodePtr a) {
    if (a->op == Op::Const) return make_const(-a->value);
    if (a->op == Op::Neg) return a->a;
    return make_node(Op::Neg, std::move(a));
}

NodePtr diff_node(const NodePtr& n, int axis) {
    switch (n->op) {
        case Op::Const: return make_const(0.0);
        case Op::Var: return make_const(n->axis == axis ? 1.0 : 0.0);
        case Op::Add: return simp_add(diff_node(n->a, axis), diff_node(n->b, axis));
        case Op::Sub: return simp_sub(diff_node(n->a, axis), diff_node(n->b, axis));
        case Op::Mul:
            return simp_add(simp_mul(diff_node(n->a, axis), n->b),
                            simp_mul(n->a, diff_node(n->b, axis)));
        case Op::Div:
            return simp_div(simp_sub(simp_mul(diff_node(n->a, axis), n->b),
                                     simp_mul(n->a, diff_node(n->b, axis))),
                            simp_mul(n->b, n->b));
        case Op::Neg: return simp_neg(diff_node(n->a, axis));
        case Op::Sin: return simp_mul(make_node(Op::Cos, n->a), diff_node(n->a, axis));
        case Op::Cos:
            return simp_neg(simp_mul(make_node(Op::Sin, n->a), diff_node(n->a, axis)));
        case Op::Exp: return simp_mul(make_node(Op::Exp, n->a), diff_node(n->a, axis));
    }
    return make_const(0.0);
}

void print_node(const Expr::Node& n, std::ostream& os) {
    const char* axes = "xyz";
    switch (n.op) {
        case Op::Const: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", n.value);
            os << buf;
            return;
        }
        case Op::Var: os << axes[n.axis]; return;
        case Op::Add: os << '('; print_node(*n.a, os); os << " + "; print_node(*n.b, os); os << ')'; return;
        case Op::Sub: os << '('; print_node(*n.a, os); os << " - "; print_node(*n.b, os); os << ')'; return;
        case Op::Mul: os << '('; print_node(*n.a, os); os << '*'; print_node(*n.b, os); os << ')'; return;
        case Op::Div: os << '('; print_node(*n.a, os); os << '/'; print_node(*n.b, os); os << ')'; return;
        case Op::Neg: os << "(-"; print_node(*n.a, os); os << ')'; return;
        case Op::Sin: os << "sin("; print_node(*n.a, os); os << ')'; return;
        case Op::Cos: os << "cos("; print_node(*n.a, os); os << ')'; return;
        case Op::Exp: os << "exp("; print_node(*n.a, os); os << ')'; return;
    }
}

// --- recursive-descent parser ------------------------------------------------

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    NodePtr parse() {
        NodePtr e = expr();
        skip_ws();
        if (pos_ != text_.size()) fail("unexpected trailing input");
        return e;
    }

private:
    std::string_view text_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        std::ostringstream os;
        os << "expression error at position " << pos_ << ": " << msg;
        throw expression_error(os.str(), pos_);
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr expr() {
        NodePtr lhs = term();
        for (;;) {
            if (eat('+')) lhs = simp_add(std::move(lhs), term());
            else if (eat('-')) lhs = simp_sub(std::move(lhs), term());
            else return lhs;
        }
    }

    NodePtr term() {
        NodePtr lhs = factor();
        for (;;) {
            if (eat('*')) lhs = simp_mul(std::move(lhs), factor());
            else if (eat('/')) lhs = simp_div(std::move(lhs), factor());
            else return lhs;
        }
    }

    NodePtr factor() {
        if (eat('-')) return simp_neg(factor());
        if (eat('+')) return factor();
        return primary();
    }

    NodePtr primary() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            NodePtr e = expr();
            if (!eat(')')) fail("expected ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
        fail(std::string("unexpected character '") + c + "'");
    }

    NodePtr number() {
        const char* begin = text_.data() + pos_;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) fail("malformed number");
        pos_ += static_cast<std::size_t>(end - begin);
        return make_const(v);
    }

    NodePtr identifier() {
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               std::isalpha(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
        const std::string_view name = text_.substr(start, pos_ - start);
        if (name == "x" || name == "y" || name == "z") {
            auto n = std::make_shared<Expr::Node>();
            n->op = Op::Var;
            n->axis = static_cast<int>(name[0] - 'x');
            return n;
        }
        if (name == "pi") return make_const(std::numbers::pi);
        if (name == "sin" || name == "cos" || name == "exp") {
            if (!eat('(')) fail("expected '(' after function name");
            NodePtr arg = expr();
            if (!eat(')')) fail("expected ')'");
            if (name == "sin") {
                if (arg->op == Op::Const) return make_const(std::sin(arg->value));
                return make_node(Op::Sin, std::move(arg));
            }
            if (name == "cos") {
                if (arg->op == Op::Const) return make_const(std::cos(arg->value));
                return make_node(Op::Cos, std::move(arg));
            }
            if (arg->op == Op::Const) return make_const(std::exp(arg->value));
            return make_node(Op::Exp, std::move(arg));
        }
        pos_ = start;
        fail("unknown identifier '" + std::string(name) + "'");
    }
};

}  // namespace

Expr::Expr() : node_(make_const(0.0)) {}

Expr Expr::constant(double c) { return Expr(make_const(c)); }

Expr Expr::variable(int axis) {
    if (axis < 0 || axis > 2) throw structural_error("expression variable axis out of range");
    auto n = std::make_shared<Node>();
    n->op = Op::Var;
    n->axis = axis;
    return Expr(std::move(n));
}

Expr Expr::parse(std::string_view text) { return Expr(Parser(text).parse()); }

double Expr::eval(const std::array<double, 3>& p) const { return eval_node(*node_, p); }

Expr Expr::derivative(int axis) const { return Expr(diff_node(node_, axis)); }

std::string Expr::str() const {
    std::ostringstream os;
    print_node(*node_, os);
    return os.str();
}

bool Expr::is_constant() const { return node_->op == Op::Const; }

bool Expr::is_zero() const { return node_->op == Op::Const && node_->value == 0.0; }

double Expr::constant_value() const {
    if (!is_constant()) throw structural_error("expression is not a constant");
    return node_->value;
}

Expr operator+(const Expr& a, const Expr& b) { return Expr(simp_add(a.node_, b.node_)); }
Expr operator-(const Expr& a, const Expr& b) { return Expr(simp_sub(a.node_, b.node_)); }
Expr operator*(const Expr& a, const Expr& b) { return Expr(simp_mul(a.node_, b.node_)); }
Expr operator/(const Expr& a, const Expr& b) { return Expr(simp_div(a.node_, b.node_)); }
Expr operator-(const Expr& a) { return Expr(simp_neg(a.node_)); }
Expr Expr::sin(const Expr& a) {
    if (a.node_->op == Op::Const) return constant(std::sin(a.node_->value));
    return Expr(make_node(Op::Sin, a.node_));
}
Expr Expr::cos(const Expr& a) {
    if (a.node_->op == Op::Const) return constant(std::cos(a.node_->value));
    return Expr(make_node(Op::Cos, a.node_));
}
Expr Expr::exp(const Expr& a) {
    if (a.node_->op == Op::Const) return constant(std::exp(a.node_->value));
    return Expr(make_node(Op::Exp, a.node_));
}

}  // namespace subrosa
