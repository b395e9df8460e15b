#include "doctest.h"

#include <cmath>

#include "quasilie/expr.hpp"

using qls::CompiledExpr;
using qls::Env;
using qls::Expression;

namespace {

// Central difference with two step sizes, Richardson combined.
double numeric_partial(const Expression& e, const std::string& var, Env env) {
    const double x = env.at(var);
    const double h = 1e-5 * (1.0 + std::fabs(x));
    auto at = [&](double v) {
        env[var] = v;
        return e.evaluate(env);
    };
    double d1 = (at(x + h) - at(x - h)) / (2 * h);
    double d2 = (at(x + h / 2) - at(x - h / 2)) / h;
    return (4 * d2 - d1) / 3;
}

}  // namespace

TEST_CASE("parsing respects precedence and associativity") {
    Env env{{"x", 2.0}, {"y", 3.0}};
    CHECK(Expression::parse("1 + 2*3").evaluate({}) == 7.0);
    CHECK(Expression::parse("2^3^2").evaluate({}) == 512.0);     // right associative
    CHECK(Expression::parse("-x^2").evaluate(env) == -4.0);      // ^ binds tighter than unary -
    CHECK(Expression::parse("(-x)^2").evaluate(env) == 4.0);
    CHECK(Expression::parse("6 - 2 - 1").evaluate({}) == 3.0);
    CHECK(Expression::parse("12 / 2 / 3").evaluate({}) == 2.0);
    CHECK(Expression::parse("x*y^2").evaluate(env) == 18.0);
    CHECK(Expression::parse("pow(y, 2) + sin(0)").evaluate(env) == 9.0);
    CHECK(Expression::parse("+x - -y").evaluate(env) == 5.0);
    CHECK(Expression::parse("1.5e2 + .5").evaluate({}) == doctest::Approx(150.5));
}

TEST_CASE("parse errors carry the byte offset of the problem") {
    auto offset_of = [](std::string_view src) -> std::size_t {
        try {
            Expression::parse(src);
        } catch (const qls::ParseError& e) {
            return e.offset();
        }
        return static_cast<std::size_t>(-1);
    };
    CHECK(offset_of("1 + ") == 4);
    CHECK(offset_of("(1 + 2") == 6);
    CHECK(offset_of("1 + @") == 4);
    CHECK(offset_of("frob(3)") == 0);
    CHECK(offset_of("2 3") == 2);
    CHECK_THROWS_AS(Expression::parse(""), qls::ParseError);
}

TEST_CASE("strict evaluation flags unbound variables and domain violations") {
    CHECK_THROWS_AS(Expression::parse("x + y").evaluate({{"x", 1.0}}), qls::EvalError);
    CHECK_THROWS_AS(Expression::parse("ln(z)").evaluate({{"z", -1.0}}), qls::DomainError);
    CHECK_THROWS_AS(Expression::parse("sqrt(z)").evaluate({{"z", -4.0}}), qls::DomainError);
    CHECK_THROWS_AS(Expression::parse("z^0.5").evaluate({{"z", -4.0}}), qls::DomainError);
    CHECK_THROWS_AS(Expression::parse("z^-1").evaluate({{"z", 0.0}}), qls::DomainError);
    // Integer powers of negatives are fine.
    CHECK(Expression::parse("z^3").evaluate({{"z", -2.0}}) == -8.0);
    CHECK(Expression::parse("z^-2").evaluate({{"z", -2.0}}) == 0.25);
}

TEST_CASE("printing round-trips through the parser") {
    const char* sources[] = {
        "x + y*z",
        "(x + y)*z",
        "x - (y - z)",
        "x/(y*z)",
        "-(x + 1)",
        "(x + 1)^(y - 2)",
        "2^-x",
        "sin(x)*sech(y) + exp(-x^2)",
        "sqrt(abs(x))/tanh(y + 1)",
        "0.10000000000000001*x",
    };
    Env env{{"x", 0.7}, {"y", -1.3}, {"z", 2.9}};
    for (const char* src : sources) {
        Expression e = Expression::parse(src);
        Expression round = Expression::parse(e.str());
        CAPTURE(src);
        CAPTURE(e.str());
        CHECK(e.evaluate(env) == round.evaluate(env));
    }
}

TEST_CASE("construction folds constants and drops algebraic units") {
    Expression x = Expression::variable("x");
    CHECK((Expression::constant(2.0) * Expression::constant(3.0)).constant_value() == 6.0);
    CHECK((x + Expression::constant(0.0)).str() == "x");
    CHECK((Expression::constant(1.0) * x).str() == "x");
    CHECK(pow(x, Expression::constant(1.0)).str() == "x");
    CHECK((Expression::constant(0.0) * x).constant_value() == 0.0);
    CHECK(Expression::parse("x - 0 + 0*y").str() == "x");
    CHECK_FALSE(Expression::parse("x/0").is_constant());  // division by zero never folds
}

TEST_CASE("symbolic derivatives agree with central differences") {
    const char* sources[] = {
        "x^3 - 2*x + 1",
        "sin(x)*cos(x)",
        "tan(x/2)",
        "exp(-x^2)*sinh(x)",
        "ln(x^2 + 1)",
        "sqrt(x^2 + 4)",
        "sech(x)^2",
        "atan(x) + asin(x/3) + acos(x/3)",
        "x^x",
        "(x^2 + y)/(x - y)",
        "pow(x^2 + 1, y)",
    };
    Env env{{"x", 0.8}, {"y", -0.4}};
    for (const char* src : sources) {
        Expression e = Expression::parse(src);
        for (const std::string var : {"x", "y"}) {
            if (!e.free_variables().count(var)) continue;
            CAPTURE(src);
            CAPTURE(var);
            double sym = e.differentiate(var).evaluate(env);
            double num = numeric_partial(e, var, env);
            CHECK(sym == doctest::Approx(num).epsilon(1e-7));
        }
    }
}

TEST_CASE("derivative of a constant power uses the power rule") {
    Expression d = Expression::parse("x^4").differentiate("x");
    CHECK(d.evaluate({{"x", -2.0}}) == -32.0);  // no ln(x) in the result
    CHECK(Expression::parse("x^2").differentiate("y").constant_value() == 0.0);
}

TEST_CASE("substitution rewrites variables structurally") {
    Expression e = Expression::parse("u^2 + sin(u) + v");
    Expression r = e.substitute("u", Expression::parse("t + 1"));
    Env env{{"t", 0.5}, {"v", 2.0}};
    double expect = std::pow(1.5, 2) + std::sin(1.5) + 2.0;
    CHECK(r.evaluate(env) == doctest::Approx(expect).epsilon(1e-15));
    CHECK(r.free_variables() == std::set<std::string>{"t", "v"});
}

TEST_CASE("free variables are collected across the tree") {
    auto vars = Expression::parse("t1*x1 + sin(t2)*x2^2 - 4").free_variables();
    CHECK(vars == std::set<std::string>{"t1", "t2", "x1", "x2"});
    CHECK(Expression::constant(3.0).free_variables().empty());
}

TEST_CASE("compiled expressions match strict evaluation inside the domain") {
    Expression e = Expression::parse("sin(a)*b^2 + exp(-a*b)/(c + 2) + k*sqrt(c)");
    CompiledExpr c(e, {"a", "b", "c"}, {{"k", 2.5}});
    double vals[] = {0.3, -1.2, 4.0};
    Env env{{"a", 0.3}, {"b", -1.2}, {"c", 4.0}, {"k", 2.5}};
    CHECK(c.eval(vals) == e.evaluate(env));
}

TEST_CASE("compiled expressions propagate non-finite values instead of throwing") {
    CompiledExpr c(Expression::parse("ln(x)"), {"x"});
    double neg = -1.0;
    CHECK(std::isnan(c.eval(&neg)));
    CompiledExpr d(Expression::parse("1/x"), {"x"});
    double zero = 0.0;
    CHECK(std::isinf(d.eval(&zero)));
    CompiledExpr unbound_check = CompiledExpr();
    CHECK_THROWS_AS(CompiledExpr(Expression::parse("x + q"), {"x"}), qls::EvalError);
}

TEST_CASE("constants print with enough digits to survive a round trip") {
    double v = 0.1 + 0.2;  // not representable as 0.3
    Expression e = Expression::constant(v);
    CHECK(Expression::parse(e.str()).constant_value() == v);
}
