#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "quasilie/errors.hpp"

namespace qls {

// Immutable symbolic expression over IEEE doubles.
//
// Grammar (infix): + - * / ^ with conventional precedence, ^ right
// associative and binding tighter than unary minus, parentheses, decimal
// literals, named variables, and calls of: sin cos tan asin acos atan
// sinh cosh tanh sech exp ln log sqrt abs pow(a,b).
//
// Trees are shared and never mutated; all operations return new values.
// Construction folds constant subtrees and algebraic units (x+0, 1*x, x^1).

enum class UnaryOp : std::uint8_t {
    Neg, Sin, Cos, Tan, Asin, Acos, Atan, Sinh, Cosh, Tanh, Sech, Exp, Ln, Sqrt, Abs
};
enum class BinaryOp : std::uint8_t { Add, Sub, Mul, Div, Pow };

struct ExprNode;
using NodePtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    enum class Kind : std::uint8_t { Constant, Variable, Unary, Binary } kind;
    double value = 0.0;     // Constant
    std::string name;       // Variable
    UnaryOp uop() const { return static_cast<UnaryOp>(op); }
    BinaryOp bop() const { return static_cast<BinaryOp>(op); }
    std::uint8_t op = 0;
    NodePtr a, b;           // Unary uses a only
};

using Env = std::map<std::string, double>;

class Expression {
public:
    Expression();  // constant 0
    static Expression constant(double v);
    static Expression variable(std::string name);

    // Throws ParseError with byte offset on malformed input.
    static Expression parse(std::string_view src);

    // Strict tree evaluation. Throws EvalError for unbound variables and
    // DomainError (with the offending sub-expression) for ln/sqrt of a
    // negative, 0^negative, or a negative base under a fractional power.
    double evaluate(const Env& env) const;

    // Exact partial derivative with respect to one variable.
    Expression differentiate(const std::string& var) const;

    // Replace every occurrence of a variable by an expression.
    Expression substitute(const std::string& var, const Expression& replacement) const;

    // Infix form with minimal parentheses; parse(str()) rebuilds an
    // evaluation-equivalent tree. Constants use 17 significant digits.
    std::string str() const;

    std::set<std::string> free_variables() const;

    bool is_constant() const;
    double constant_value() const;  // requires is_constant()

    const NodePtr& root() const { return root_; }
    explicit Expression(NodePtr n) : root_(std::move(n)) {}

private:
    NodePtr root_;
};

Expression operator+(const Expression& a, const Expression& b);
Expression operator-(const Expression& a, const Expression& b);
Expression operator*(const Expression& a, const Expression& b);
Expression operator/(const Expression& a, const Expression& b);
Expression operator-(const Expression& a);
Expression pow(const Expression& a, const Expression& b);
Expression apply(UnaryOp op, const Expression& a);

// Expression compiled against a fixed variable ordering for tight loops.
// Unlike Expression::evaluate it never throws on domain violations: the
// IEEE result (NaN or infinity) propagates and callers treat non-finite
// output as numeric breakdown.
class CompiledExpr {
public:
    CompiledExpr() = default;
    CompiledExpr(const Expression& e, const std::vector<std::string>& order,
                 const Env& fixed = {});

    // values[i] binds order[i]; anything else was frozen at compile time.
    double eval(const double* values) const;

    static constexpr int kMaxStack = 128;

private:
    struct Instr {
        enum class Op : std::uint8_t { PushConst, PushVar, Unary, Binary } op;
        std::uint8_t sub = 0;
        std::uint16_t slot = 0;
        double value = 0.0;
    };
    std::vector<Instr> code_;
    int depth_ = 0;
};

}  // namespace qls
