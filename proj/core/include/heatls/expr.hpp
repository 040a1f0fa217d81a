#pragma once

#include <memory>
#include <string>

namespace heatls::expr {

struct Node;

/// A parsed scalar expression in one free variable.
///
/// Grammar (infix, usual precedence, right-assoc '^'):
///   expr   := term (('+'|'-') term)*
///   term   := factor (('*'|'/') factor)*
///   factor := unary ('^' factor)?
///   unary  := ('-'|'+')* primary
///   primary:= number | var | 'pi' | fn '(' expr (',' expr)? ')' | '(' expr ')'
/// Functions: ln, exp, sin, cos, tanh, abs, sqrt, pow(a,b).
class Expression {
public:
    Expression() = default;
    double operator()(double v) const;
    bool valid() const { return root_ != nullptr; }
    const std::string& source() const { return src_; }

private:
    friend Expression parse(const std::string&, const std::string&);
    std::shared_ptr<const Node> root_;
    std::string src_;
};

/// Parses `text` with `var` as the free variable name ("x" or "r").
/// Throws std::invalid_argument with a position-annotated message on error.
Expression parse(const std::string& text, const std::string& var);

} // namespace heatls::expr
