#include "quasilie/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <utility>

namespace qls {

namespace {

NodePtr make_node(ExprNode n) { return std::make_shared<const ExprNode>(std::move(n)); }

NodePtr nconst(double v) {
    ExprNode n;
    n.kind = ExprNode::Kind::Constant;
    n.value = v;
    return make_node(std::move(n));
}

NodePtr nvar(std::string name) {
    ExprNode n;
    n.kind = ExprNode::Kind::Variable;
    n.name = std::move(name);
    return make_node(std::move(n));
}

bool is_const(const NodePtr& n, double v) {
    return n->kind == ExprNode::Kind::Constant && n->value == v;
}

double apply_unary(UnaryOp op, double x) {
    switch (op) {
        case UnaryOp::Neg: return -x;
        case UnaryOp::Sin: return std::sin(x);
        case UnaryOp::Cos: return std::cos(x);
        case UnaryOp::Tan: return std::tan(x);
        case UnaryOp::Asin: return std::asin(x);
        case UnaryOp::Acos: return std::acos(x);
        case UnaryOp::Atan: return std::atan(x);
        case UnaryOp::Sinh: return std::sinh(x);
        case UnaryOp::Cosh: return std::cosh(x);
        case UnaryOp::Tanh: return std::tanh(x);
        case UnaryOp::Sech: return 1.0 / std::cosh(x);
        case UnaryOp::Exp: return std::exp(x);
        case UnaryOp::Ln: return std::log(x);
        case UnaryOp::Sqrt: return std::sqrt(x);
        case UnaryOp::Abs: return std::fabs(x);
    }
    return 0.0;
}

// Integer powers multiplied out so negative bases stay exact.
double apply_pow(double base, double exp) {
    if (exp == std::floor(exp) && std::fabs(exp) <= 64.0) {
        long long k = static_cast<long long>(exp);
        bool inv = k < 0;
        if (inv) k = -k;
        double r = 1.0, p = base;
        while (k > 0) {
            if (k & 1) r *= p;
            p *= p;
            k >>= 1;
        }
        return inv ? 1.0 / r : r;
    }
    return std::pow(base, exp);
}

double apply_binary(BinaryOp op, double x, double y) {
    switch (op) {
        case BinaryOp::Add: return x + y;
        case BinaryOp::Sub: return x - y;
        case BinaryOp::Mul: return x * y;
        case BinaryOp::Div: return x / y;
        case BinaryOp::Pow: return apply_pow(x, y);
    }
    return 0.0;
}

NodePtr nunary(UnaryOp op, NodePtr a);

NodePtr nbinary(BinaryOp op, NodePtr a, NodePtr b) {
    const bool ca = a->kind == ExprNode::Kind::Constant;
    const bool cb = b->kind == ExprNode::Kind::Constant;
    if (ca && cb) {
        if (!(op == BinaryOp::Div && b->value == 0.0)) {
            double v = apply_binary(op, a->value, b->value);
            if (std::isfinite(v)) return nconst(v);
        }
    }
    switch (op) {
        case BinaryOp::Add:
            if (is_const(a, 0.0)) return b;
            if (is_const(b, 0.0)) return a;
            break;
        case BinaryOp::Sub:
            if (is_const(b, 0.0)) return a;
            if (is_const(a, 0.0)) return nunary(UnaryOp::Neg, std::move(b));
            break;
        case BinaryOp::Mul:
            if (is_const(a, 0.0) || is_const(b, 0.0)) return nconst(0.0);
            if (is_const(a, 1.0)) return b;
            if (is_const(b, 1.0)) return a;
            break;
        case BinaryOp::Div:
            if (is_const(b, 1.0)) return a;
            if (is_const(a, 0.0)) return nconst(0.0);
            break;
        case BinaryOp::Pow:
            if (is_const(b, 1.0)) return a;
            if (is_const(b, 0.0)) return nconst(1.0);
            break;
    }
    ExprNode n;
    n.kind = ExprNode::Kind::Binary;
    n.op = static_cast<std::uint8_t>(op);
    n.a = std::move(a);
    n.b = std::move(b);
    return make_node(std::move(n));
}

NodePtr nunary(UnaryOp op, NodePtr a) {
    if (a->kind == ExprNode::Kind::Constant) {
        double v = apply_unary(op, a->value);
        if (std::isfinite(v)) return nconst(v);
    }
    if (op == UnaryOp::Neg && a->kind == ExprNode::Kind::Unary && a->uop() == UnaryOp::Neg)
        return a->a;
    ExprNode n;
    n.kind = ExprNode::Kind::Unary;
    n.op = static_cast<std::uint8_t>(op);
    n.a = std::move(a);
    return make_node(std::move(n));
}

struct FunctionEntry {
    const char* name;
    UnaryOp op;
};

constexpr FunctionEntry kFunctions[] = {
    {"sin", UnaryOp::Sin},   {"cos", UnaryOp::Cos},   {"tan", UnaryOp::Tan},
    {"asin", UnaryOp::Asin}, {"acos", UnaryOp::Acos}, {"atan", UnaryOp::Atan},
    {"sinh", UnaryOp::Sinh}, {"cosh", UnaryOp::Cosh}, {"tanh", UnaryOp::Tanh},
    {"sech", UnaryOp::Sech}, {"exp", UnaryOp::Exp},   {"ln", UnaryOp::Ln},
    {"log", UnaryOp::Ln},    {"sqrt", UnaryOp::Sqrt}, {"abs", UnaryOp::Abs},
};

const char* unary_name(UnaryOp op) {
    switch (op) {
        case UnaryOp::Neg: return "-";
        case UnaryOp::Sin: return "sin";
        case UnaryOp::Cos: return "cos";
        case UnaryOp::Tan: return "tan";
        case UnaryOp::Asin: return "asin";
        case UnaryOp::Acos: return "acos";
        case UnaryOp::Atan: return "atan";
        case UnaryOp::Sinh: return "sinh";
        case UnaryOp::Cosh: return "cosh";
        case UnaryOp::Tanh: return "tanh";
        case UnaryOp::Sech: return "sech";
        case UnaryOp::Exp: return "exp";
        case UnaryOp::Ln: return "ln";
        case UnaryOp::Sqrt: return "sqrt";
        case UnaryOp::Abs: return "abs";
    }
    return "?";
}

class Parser {
public:
    explicit Parser(std::string_view src) : src_(src) {}

    NodePtr run() {
        NodePtr e = parse_expression();
        skip_ws();
        if (pos_ != src_.size())
            fail("unexpected trailing input");
        return e;
    }

private:
    std::string_view src_;
    std::size_t pos_ = 0;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(msg + " at offset " + std::to_string(pos_), pos_);
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool eat(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < src_.size() ? src_[pos_] : '\0';
    }

    NodePtr parse_expression() {
        NodePtr lhs = parse_term();
        while (true) {
            if (eat('+')) lhs = nbinary(BinaryOp::Add, lhs, parse_term());
            else if (eat('-')) lhs = nbinary(BinaryOp::Sub, lhs, parse_term());
            else return lhs;
        }
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_unary();
        while (true) {
            if (eat('*')) lhs = nbinary(BinaryOp::Mul, lhs, parse_unary());
            else if (eat('/')) lhs = nbinary(BinaryOp::Div, lhs, parse_unary());
            else return lhs;
        }
    }

    NodePtr parse_unary() {
        if (eat('-')) return nunary(UnaryOp::Neg, parse_unary());
        if (eat('+')) return parse_unary();
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_primary();
        if (eat('^')) return nbinary(BinaryOp::Pow, base, parse_unary());
        return base;
    }

    NodePtr parse_primary() {
        skip_ws();
        if (pos_ >= src_.size()) fail("unexpected end of input, expected a value");
        char c = src_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_name();
        if (eat('(')) {
            NodePtr e = parse_expression();
            if (!eat(')')) fail("expected ')'");
            return e;
        }
        fail(std::string("unexpected character '") + c + "'");
    }

    NodePtr parse_number() {
        const char* begin = src_.data() + pos_;
        char* end = nullptr;
        double v = std::strtod(begin, &end);
        if (end == begin) fail("malformed number");
        pos_ += static_cast<std::size_t>(end - begin);
        return nconst(v);
    }

    NodePtr parse_name() {
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        std::string name(src_.substr(start, pos_ - start));
        if (peek() != '(') return nvar(std::move(name));

        eat('(');
        if (name == "pow") {
            NodePtr a = parse_expression();
            if (!eat(',')) fail("expected ',' in pow(a, b)");
            NodePtr b = parse_expression();
            if (!eat(')')) fail("expected ')'");
            return nbinary(BinaryOp::Pow, std::move(a), std::move(b));
        }
        for (const auto& f : kFunctions) {
            if (name == f.name) {
                NodePtr a = parse_expression();
                if (!eat(')')) fail("expected ')'");
                return nunary(f.op, std::move(a));
            }
        }
        pos_ = start;
        fail("unknown function '" + name + "'");
    }
};

std::string format_constant(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Precedence for printing: add/sub 1, mul/div 2, unary minus 3, pow 4, atom 5.
int node_prec(const ExprNode& n) {
    switch (n.kind) {
        case ExprNode::Kind::Constant: return n.value < 0 ? 3 : 5;
        case ExprNode::Kind::Variable: return 5;
        case ExprNode::Kind::Unary: return n.uop() == UnaryOp::Neg ? 3 : 5;
        case ExprNode::Kind::Binary:
            switch (n.bop()) {
                case BinaryOp::Add:
                case BinaryOp::Sub: return 1;
                case BinaryOp::Mul:
                case BinaryOp::Div: return 2;
                case BinaryOp::Pow: return 4;
            }
    }
    return 5;
}

void print_node(const NodePtr& n, std::string& out);

void print_child(const NodePtr& c, int min_prec, std::string& out) {
    if (node_prec(*c) < min_prec) {
        out += '(';
        print_node(c, out);
        out += ')';
    } else {
        print_node(c, out);
    }
}

void print_node(const NodePtr& n, std::string& out) {
    switch (n->kind) {
        case ExprNode::Kind::Constant:
            out += format_constant(n->value);
            return;
        case ExprNode::Kind::Variable:
            out += n->name;
            return;
        case ExprNode::Kind::Unary:
            if (n->uop() == UnaryOp::Neg) {
                out += '-';
                print_child(n->a, 3, out);
            } else {
                out += unary_name(n->uop());
                out += '(';
                print_node(n->a, out);
                out += ')';
            }
            return;
        case ExprNode::Kind::Binary: {
            const char* sym = nullptr;
            int prec = node_prec(*n);
            int lmin = prec, rmin = prec + 1;
            switch (n->bop()) {
                case BinaryOp::Add: sym = " + "; rmin = prec; break;
                case BinaryOp::Sub: sym = " - "; rmin = prec + 1; break;
                case BinaryOp::Mul: sym = "*"; rmin = prec; break;
                case BinaryOp::Div: sym = "/"; rmin = prec + 1; break;
                case BinaryOp::Pow: sym = "^"; lmin = 5; rmin = 3; break;
            }
            print_child(n->a, lmin, out);
            out += sym;
            print_child(n->b, rmin, out);
            return;
        }
    }
}

double eval_node(const NodePtr& n, const Env& env) {
    switch (n->kind) {
        case ExprNode::Kind::Constant:
            return n->value;
        case ExprNode::Kind::Variable: {
            auto it = env.find(n->name);
            if (it == env.end()) throw EvalError("unbound variable '" + n->name + "'");
            return it->second;
        }
        case ExprNode::Kind::Unary: {
            double x = eval_node(n->a, env);
            if ((n->uop() == UnaryOp::Ln && x < 0.0) || (n->uop() == UnaryOp::Sqrt && x < 0.0)) {
                std::string sub;
                print_node(n, sub);
                throw DomainError(std::string(unary_name(n->uop())) +
                                  " of a negative value in '" + sub + "'");
            }
            return apply_unary(n->uop(), x);
        }
        case ExprNode::Kind::Binary: {
            double x = eval_node(n->a, env);
            double y = eval_node(n->b, env);
            if (n->bop() == BinaryOp::Pow) {
                bool zero_neg = (x == 0.0 && y < 0.0);
                bool neg_frac = (x < 0.0 && y != std::floor(y));
                if (zero_neg || neg_frac) {
                    std::string sub;
                    print_node(n, sub);
                    throw DomainError(std::string(zero_neg ? "zero base with negative exponent"
                                                           : "negative base with fractional exponent") +
                                      " in '" + sub + "'");
                }
            }
            return apply_binary(n->bop(), x, y);
        }
    }
    return 0.0;
}

NodePtr diff_node(const NodePtr& n, const std::string& var) {
    switch (n->kind) {
        case ExprNode::Kind::Constant:
            return nconst(0.0);
        case ExprNode::Kind::Variable:
            return nconst(n->name == var ? 1.0 : 0.0);
        case ExprNode::Kind::Unary: {
            NodePtr u = n->a;
            NodePtr du = diff_node(u, var);
            if (is_const(du, 0.0)) return nconst(0.0);
            NodePtr outer;
            switch (n->uop()) {
                case UnaryOp::Neg: return nunary(UnaryOp::Neg, du);
                case UnaryOp::Sin: outer = nunary(UnaryOp::Cos, u); break;
                case UnaryOp::Cos: outer = nunary(UnaryOp::Neg, nunary(UnaryOp::Sin, u)); break;
                case UnaryOp::Tan:
                    outer = nbinary(BinaryOp::Add, nconst(1.0),
                                    nbinary(BinaryOp::Pow, nunary(UnaryOp::Tan, u), nconst(2.0)));
                    break;
                case UnaryOp::Asin:
                    outer = nbinary(BinaryOp::Div, nconst(1.0),
                                    nunary(UnaryOp::Sqrt,
                                           nbinary(BinaryOp::Sub, nconst(1.0),
                                                   nbinary(BinaryOp::Pow, u, nconst(2.0)))));
                    break;
                case UnaryOp::Acos:
                    outer = nunary(UnaryOp::Neg,
                                   nbinary(BinaryOp::Div, nconst(1.0),
                                           nunary(UnaryOp::Sqrt,
                                                  nbinary(BinaryOp::Sub, nconst(1.0),
                                                          nbinary(BinaryOp::Pow, u, nconst(2.0))))));
                    break;
                case UnaryOp::Atan:
                    outer = nbinary(BinaryOp::Div, nconst(1.0),
                                    nbinary(BinaryOp::Add, nconst(1.0),
                                            nbinary(BinaryOp::Pow, u, nconst(2.0))));
                    break;
                case UnaryOp::Sinh: outer = nunary(UnaryOp::Cosh, u); break;
                case UnaryOp::Cosh: outer = nunary(UnaryOp::Sinh, u); break;
                case UnaryOp::Tanh:
                    outer = nbinary(BinaryOp::Sub, nconst(1.0),
                                    nbinary(BinaryOp::Pow, nunary(UnaryOp::Tanh, u), nconst(2.0)));
                    break;
                case UnaryOp::Sech:
                    outer = nunary(UnaryOp::Neg,
                                   nbinary(BinaryOp::Mul, nunary(UnaryOp::Sech, u),
                                           nunary(UnaryOp::Tanh, u)));
                    break;
                case UnaryOp::Exp: outer = nunary(UnaryOp::Exp, u); break;
                case UnaryOp::Ln: outer = nbinary(BinaryOp::Div, nconst(1.0), u); break;
                case UnaryOp::Sqrt:
                    outer = nbinary(BinaryOp::Div, nconst(1.0),
                                    nbinary(BinaryOp::Mul, nconst(2.0), nunary(UnaryOp::Sqrt, u)));
                    break;
                case UnaryOp::Abs:
                    outer = nbinary(BinaryOp::Div, u, nunary(UnaryOp::Abs, u));
                    break;
            }
            return nbinary(BinaryOp::Mul, outer, du);
        }
        case ExprNode::Kind::Binary: {
            NodePtr a = n->a, b = n->b;
            NodePtr da = diff_node(a, var), db = diff_node(b, var);
            switch (n->bop()) {
                case BinaryOp::Add: return nbinary(BinaryOp::Add, da, db);
                case BinaryOp::Sub: return nbinary(BinaryOp::Sub, da, db);
                case BinaryOp::Mul:
                    return nbinary(BinaryOp::Add, nbinary(BinaryOp::Mul, da, b),
                                   nbinary(BinaryOp::Mul, a, db));
                case BinaryOp::Div:
                    return nbinary(
                        BinaryOp::Div,
                        nbinary(BinaryOp::Sub, nbinary(BinaryOp::Mul, da, b),
                                nbinary(BinaryOp::Mul, a, db)),
                        nbinary(BinaryOp::Pow, b, nconst(2.0)));
                case BinaryOp::Pow: {
                    if (b->kind == ExprNode::Kind::Constant) {
                        // d(a^k) = k a^(k-1) a'
                        return nbinary(
                            BinaryOp::Mul,
                            nbinary(BinaryOp::Mul, nconst(b->value),
                                    nbinary(BinaryOp::Pow, a, nconst(b->value - 1.0))),
                            da);
                    }
                    // d(a^b) = a^b (b' ln a + b a'/a)
                    NodePtr self = nbinary(BinaryOp::Pow, a, b);
                    NodePtr t1 = nbinary(BinaryOp::Mul, db, nunary(UnaryOp::Ln, a));
                    NodePtr t2 = nbinary(BinaryOp::Div, nbinary(BinaryOp::Mul, b, da), a);
                    return nbinary(BinaryOp::Mul, self, nbinary(BinaryOp::Add, t1, t2));
                }
            }
        }
    }
    return nconst(0.0);
}

NodePtr subst_node(const NodePtr& n, const std::string& var, const NodePtr& repl) {
    switch (n->kind) {
        case ExprNode::Kind::Constant:
            return n;
        case ExprNode::Kind::Variable:
            return n->name == var ? repl : n;
        case ExprNode::Kind::Unary:
            return nunary(n->uop(), subst_node(n->a, var, repl));
        case ExprNode::Kind::Binary:
            return nbinary(n->bop(), subst_node(n->a, var, repl), subst_node(n->b, var, repl));
    }
    return n;
}

void collect_vars(const NodePtr& n, std::set<std::string>& out) {
    switch (n->kind) {
        case ExprNode::Kind::Constant:
            return;
        case ExprNode::Kind::Variable:
            out.insert(n->name);
            return;
        case ExprNode::Kind::Unary:
            collect_vars(n->a, out);
            return;
        case ExprNode::Kind::Binary:
            collect_vars(n->a, out);
            collect_vars(n->b, out);
            return;
    }
}

}  // namespace

Expression::Expression() : root_(nconst(0.0)) {}

Expression Expression::constant(double v) { return Expression(nconst(v)); }

Expression Expression::variable(std::string name) { return Expression(nvar(std::move(name))); }

Expression Expression::parse(std::string_view src) { return Expression(Parser(src).run()); }

double Expression::evaluate(const Env& env) const { return eval_node(root_, env); }

Expression Expression::differentiate(const std::string& var) const {
    return Expression(diff_node(root_, var));
}

Expression Expression::substitute(const std::string& var, const Expression& replacement) const {
    return Expression(subst_node(root_, var, replacement.root_));
}

std::string Expression::str() const {
    std::string out;
    print_node(root_, out);
    return out;
}

std::set<std::string> Expression::free_variables() const {
    std::set<std::string> out;
    collect_vars(root_, out);
    return out;
}

bool Expression::is_constant() const { return root_->kind == ExprNode::Kind::Constant; }

double Expression::constant_value() const {
    if (!is_constant()) throw EvalError("expression is not a constant: " + str());
    return root_->value;
}

Expression operator+(const Expression& a, const Expression& b) {
    return Expression(nbinary(BinaryOp::Add, a.root(), b.root()));
}
Expression operator-(const Expression& a, const Expression& b) {
    return Expression(nbinary(BinaryOp::Sub, a.root(), b.root()));
}
Expression operator*(const Expression& a, const Expression& b) {
    return Expression(nbinary(BinaryOp::Mul, a.root(), b.root()));
}
Expression operator/(const Expression& a, const Expression& b) {
    return Expression(nbinary(BinaryOp::Div, a.root(), b.root()));
}
Expression operator-(const Expression& a) {
    return Expression(nunary(UnaryOp::Neg, a.root()));
}
Expression pow(const Expression& a, const Expression& b) {
    return Expression(nbinary(BinaryOp::Pow, a.root(), b.root()));
}
Expression apply(UnaryOp op, const Expression& a) {
    return Expression(nunary(op, a.root()));
}

CompiledExpr::CompiledExpr(const Expression& e, const std::vector<std::string>& order,
                           const Env& fixed) {
    std::map<std::string, std::uint16_t> slot;
    for (std::size_t i = 0; i < order.size(); ++i)
        slot[order[i]] = static_cast<std::uint16_t>(i);

    int cur = 0;
    auto emit = [&](const auto& self, const NodePtr& n) -> void {
        switch (n->kind) {
            case ExprNode::Kind::Constant:
                code_.push_back({Instr::Op::PushConst, 0, 0, n->value});
                depth_ = std::max(depth_, ++cur);
                return;
            case ExprNode::Kind::Variable: {
                auto it = slot.find(n->name);
                if (it != slot.end()) {
                    code_.push_back({Instr::Op::PushVar, 0, it->second, 0.0});
                } else {
                    auto f = fixed.find(n->name);
                    if (f == fixed.end())
                        throw EvalError("unbound variable '" + n->name + "' in compiled expression");
                    code_.push_back({Instr::Op::PushConst, 0, 0, f->second});
                }
                depth_ = std::max(depth_, ++cur);
                return;
            }
            case ExprNode::Kind::Unary:
                self(self, n->a);
                code_.push_back({Instr::Op::Unary, n->op, 0, 0.0});
                return;
            case ExprNode::Kind::Binary:
                self(self, n->a);
                self(self, n->b);
                code_.push_back({Instr::Op::Binary, n->op, 0, 0.0});
                --cur;
                return;
        }
    };
    emit(emit, e.root());
    if (depth_ > kMaxStack)
        throw NumericError("expression too deep to compile (stack depth " +
                           std::to_string(depth_) + ")");
}

double CompiledExpr::eval(const double* values) const {
    double stack[kMaxStack];
    int top = -1;
    for (const Instr& in : code_) {
        switch (in.op) {
            case Instr::Op::PushConst:
                stack[++top] = in.value;
                break;
            case Instr::Op::PushVar:
                stack[++top] = values[in.slot];
                break;
            case Instr::Op::Unary:
                stack[top] = apply_unary(static_cast<UnaryOp>(in.sub), stack[top]);
                break;
            case Instr::Op::Binary: {
                double rhs = stack[top--];
                stack[top] = apply_binary(static_cast<BinaryOp>(in.sub), stack[top], rhs);
                break;
            }
        }
    }
    return top >= 0 ? stack[top] : 0.0;
}

}  // namespace qls
