#include "heatls/expr.hpp"

#include <cctype>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace heatls::expr {

namespace {

enum class Fn { Ln, Exp, Sin, Cos, Tanh, Abs, Sqrt, Pow };

} // namespace

struct Node {
    enum class Kind { Num, Var, Pi, Add, Sub, Mul, Div, Pow, Neg, Call1, Call2 };
    Kind kind;
    double num = 0.0;
    Fn fn = Fn::Ln;
    std::shared_ptr<const Node> a, b;
};

namespace {

double eval(const Node& n, double v) {
    using K = Node::Kind;
    switch (n.kind) {
        case K::Num: return n.num;
        case K::Var: return v;
        case K::Pi: return M_PI;
        case K::Add: return eval(*n.a, v) + eval(*n.b, v);
        case K::Sub: return eval(*n.a, v) - eval(*n.b, v);
        case K::Mul: return eval(*n.a, v) * eval(*n.b, v);
        case K::Div: return eval(*n.a, v) / eval(*n.b, v);
        case K::Pow: return std::pow(eval(*n.a, v), eval(*n.b, v));
        case K::Neg: return -eval(*n.a, v);
        case K::Call1: {
            const double x = eval(*n.a, v);
            switch (n.fn) {
                case Fn::Ln: return std::log(x);
                case Fn::Exp: return std::exp(x);
                case Fn::Sin: return std::sin(x);
                case Fn::Cos: return std::cos(x);
                case Fn::Tanh: return std::tanh(x);
                case Fn::Abs: return std::fabs(x);
                case Fn::Sqrt: return std::sqrt(x);
                default: break;
            }
            return std::numeric_limits<double>::quiet_NaN();
        }
        case K::Call2:
            return std::pow(eval(*n.a, v), eval(*n.b, v));
    }
    return std::numeric_limits<double>::quiet_NaN();
}

class Parser {
public:
    Parser(const std::string& text, std::string var) : s_(text), var_(std::move(var)) {}

    std::shared_ptr<const Node> run() {
        auto e = parse_expr();
        skip_ws();
        if (pos_ != s_.size()) fail("trailing input");
        return e;
    }

private:
    using P = std::shared_ptr<const Node>;

    [[noreturn]] void fail(const std::string& what) const {
        throw std::invalid_argument("expression error at position " + std::to_string(pos_) +
                                    ": " + what + " in '" + s_ + "'");
    }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < s_.size() ? s_[pos_] : '\0';
    }

    P make(Node::Kind k, P a = nullptr, P b = nullptr) {
        auto n = std::make_shared<Node>();
        n->kind = k;
        n->a = std::move(a);
        n->b = std::move(b);
        return n;
    }

    P parse_expr() {
        P lhs = parse_term();
        for (;;) {
            if (eat('+')) lhs = make(Node::Kind::Add, lhs, parse_term());
            else if (eat('-')) lhs = make(Node::Kind::Sub, lhs, parse_term());
            else return lhs;
        }
    }

    P parse_term() {
        P lhs = parse_factor();
        for (;;) {
            if (eat('*')) lhs = make(Node::Kind::Mul, lhs, parse_factor());
            else if (eat('/')) lhs = make(Node::Kind::Div, lhs, parse_factor());
            else return lhs;
        }
    }

    P parse_factor() {
        P base = parse_unary();
        if (eat('^')) return make(Node::Kind::Pow, base, parse_factor());
        return base;
    }

    P parse_unary() {
        if (eat('-')) return make(Node::Kind::Neg, parse_unary());
        if (eat('+')) return parse_unary();
        return parse_primary();
    }

    P parse_primary() {
        skip_ws();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        const char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
        if (eat('(')) {
            P e = parse_expr();
            if (!eat(')')) fail("expected ')'");
            return e;
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    P parse_number() {
        std::size_t end = pos_;
        while (end < s_.size() &&
               (std::isdigit(static_cast<unsigned char>(s_[end])) || s_[end] == '.' ||
                s_[end] == 'e' || s_[end] == 'E' ||
                ((s_[end] == '+' || s_[end] == '-') && end > pos_ &&
                 (s_[end - 1] == 'e' || s_[end - 1] == 'E'))))
            ++end;
        try {
            std::size_t used = 0;
            const double v = std::stod(s_.substr(pos_, end - pos_), &used);
            pos_ += used;
            auto n = std::make_shared<Node>();
            n->kind = Node::Kind::Num;
            n->num = v;
            return n;
        } catch (const std::exception&) {
            fail("bad number literal");
        }
    }

    P parse_ident() {
        std::size_t end = pos_;
        while (end < s_.size() &&
               (std::isalnum(static_cast<unsigned char>(s_[end])) || s_[end] == '_'))
            ++end;
        const std::string id = s_.substr(pos_, end - pos_);
        pos_ = end;

        if (id == var_) return make(Node::Kind::Var);
        if (id == "pi") return make(Node::Kind::Pi);

        static const struct { const char* name; Fn fn; int arity; } fns[] = {
            {"ln", Fn::Ln, 1},    {"log", Fn::Ln, 1},   {"exp", Fn::Exp, 1},
            {"sin", Fn::Sin, 1},  {"cos", Fn::Cos, 1},  {"tanh", Fn::Tanh, 1},
            {"abs", Fn::Abs, 1},  {"sqrt", Fn::Sqrt, 1}, {"pow", Fn::Pow, 2},
        };
        for (const auto& f : fns) {
            if (id == f.name) {
                if (!eat('(')) fail("expected '(' after function name");
                P a = parse_expr();
                P b;
                if (f.arity == 2) {
                    if (!eat(',')) fail("expected ',' in two-argument call");
                    b = parse_expr();
                }
                if (!eat(')')) fail("expected ')'");
                auto n = std::make_shared<Node>();
                n->kind = f.arity == 2 ? Node::Kind::Call2 : Node::Kind::Call1;
                n->fn = f.fn;
                n->a = std::move(a);
                n->b = std::move(b);
                return n;
            }
        }
        fail("unknown identifier '" + id + "' (free variable is '" + var_ + "')");
    }

    const std::string& s_;
    std::string var_;
    std::size_t pos_ = 0;
};

} // namespace

double Expression::operator()(double v) const {
    return eval(*root_, v);
}

Expression parse(const std::string& text, const std::string& var) {
    Expression e;
    e.root_ = Parser(text, var).run();
    e.src_ = text;
    return e;
}

} // namespace heatls::expr
