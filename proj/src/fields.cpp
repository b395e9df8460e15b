#include "quasilie/fields.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <set>

namespace qls {

std::string time_var(int pi) { return "t" + std::to_string(pi); }
std::string state_var(int i) { return "x" + std::to_string(i); }

namespace {

std::string format_point(const std::vector<double>& v) {
    char buf[48];
    std::string out = "(";
    for (std::size_t i = 0; i < v.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.9g", v[i]);
        if (i) out += ", ";
        out += buf;
    }
    out += ")";
    return out;
}

Env coordinate_env(const TimeVec& t, const StateVec& x) {
    Env env;
    for (std::size_t pi = 0; pi < t.size(); ++pi) env[time_var(int(pi) + 1)] = t[pi];
    for (std::size_t i = 0; i < x.size(); ++i) env[state_var(int(i) + 1)] = x[i];
    return env;
}

void check_index(int value, int hi, const char* what) {
    if (value < 1 || value > hi)
        throw ConfigError(std::string(what) + " index " + std::to_string(value) +
                          " outside 1.." + std::to_string(hi));
}

}  // namespace

PolyField::PolyField(int n, int s, std::vector<std::vector<Expression>> components,
                     Env parameters, std::string label)
    : n_(n), s_(s), raw_(std::move(components)), params_(std::move(parameters)),
      label_(std::move(label)) {
    if (n_ < 1 || s_ < 1)
        throw ConfigError("field needs n >= 1 state and s >= 1 time coordinates");
    if (static_cast<int>(raw_.size()) != n_)
        throw ConfigError("component matrix has " + std::to_string(raw_.size()) +
                          " rows, expected n = " + std::to_string(n_));
    std::set<std::string> allowed;
    for (int pi = 1; pi <= s_; ++pi) allowed.insert(time_var(pi));
    for (int i = 1; i <= n_; ++i) allowed.insert(state_var(i));

    bound_.resize(n_);
    for (int i = 0; i < n_; ++i) {
        if (static_cast<int>(raw_[i].size()) != s_)
            throw ConfigError("component row " + std::to_string(i + 1) + " has " +
                              std::to_string(raw_[i].size()) + " entries, expected s = " +
                              std::to_string(s_));
        bound_[i].reserve(s_);
        for (int pi = 0; pi < s_; ++pi) {
            Expression e = raw_[i][pi];
            for (const auto& [name, value] : params_)
                e = e.substitute(name, Expression::constant(value));
            for (const std::string& v : e.free_variables()) {
                if (!allowed.count(v))
                    throw ConfigError("component X^" + std::to_string(i + 1) + "_" +
                                      std::to_string(pi + 1) + " uses unknown variable '" + v +
                                      "' (coordinates are t1..t" + std::to_string(s_) +
                                      ", x1..x" + std::to_string(n_) + ")");
            }
            bound_[i].push_back(std::move(e));
        }
    }
}

PolyField PolyField::zero(int n, int s) {
    std::vector<std::vector<Expression>> comps(n, std::vector<Expression>(s, Expression()));
    return PolyField(n, s, std::move(comps));
}

const Expression& PolyField::component(int i, int pi) const {
    check_index(i, n_, "component");
    check_index(pi, s_, "time");
    return raw_[i - 1][pi - 1];
}

const Expression& PolyField::bound_component(int i, int pi) const {
    check_index(i, n_, "component");
    check_index(pi, s_, "time");
    return bound_[i - 1][pi - 1];
}

StateVec PolyField::eval(int pi, const TimeVec& t, const StateVec& x) const {
    check_index(pi, s_, "time");
    if (static_cast<int>(t.size()) != s_ || static_cast<int>(x.size()) != n_)
        throw ConfigError("eval expects t of size s and x of size n");
    Env env = coordinate_env(t, x);
    StateVec out(n_);
    for (int i = 0; i < n_; ++i) {
        try {
            out[i] = bound_[i][pi - 1].evaluate(env);
        } catch (const DomainError& e) {
            throw DomainError("component X^" + std::to_string(i + 1) + "_" +
                              std::to_string(pi) + ": " + e.what());
        }
    }
    return out;
}

std::vector<StateVec> PolyField::jacobian_x(int pi, const TimeVec& t, const StateVec& x) const {
    check_index(pi, s_, "time");
    Env env = coordinate_env(t, x);
    std::vector<StateVec> jac(n_, StateVec(n_));
    for (int i = 0; i < n_; ++i)
        for (int j = 0; j < n_; ++j)
            jac[i][j] = bound_[i][pi - 1].differentiate(state_var(j + 1)).evaluate(env);
    return jac;
}

std::vector<StateVec> central_jacobian(const StateMap& f, const StateVec& x, int m) {
    const int n = static_cast<int>(x.size());
    std::vector<StateVec> jac(m, StateVec(n));
    StateVec xp = x, fp(m), fm(m);
    for (int j = 0; j < n; ++j) {
        const double h = 1e-5 * (1.0 + std::fabs(x[j]));
        xp[j] = x[j] + h;
        f(xp.data(), fp.data());
        xp[j] = x[j] - h;
        f(xp.data(), fm.data());
        xp[j] = x[j];
        for (int i = 0; i < m; ++i) jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
    }
    return jac;
}

std::vector<Expression> lie_bracket_expr(const PolyField& A, int pi,
                                         const PolyField& B, int nu) {
    if (A.n() != B.n())
        throw ConfigError("bracket needs matching state dimensions, got " +
                          std::to_string(A.n()) + " and " + std::to_string(B.n()));
    const int n = A.n();
    std::vector<Expression> out;
    out.reserve(n);
    for (int i = 1; i <= n; ++i) {
        Expression acc = Expression::constant(0.0);
        for (int j = 1; j <= n; ++j) {
            const std::string xj = state_var(j);
            acc = acc + A.bound_component(j, pi) * B.bound_component(i, nu).differentiate(xj) -
                  B.bound_component(j, nu) * A.bound_component(i, pi).differentiate(xj);
        }
        out.push_back(acc);
    }
    return out;
}

StateVec lie_bracket(const PolyField& A, int pi, const PolyField& B, int nu,
                     const TimeVec& t, const StateVec& x) {
    std::vector<Expression> exprs = lie_bracket_expr(A, pi, B, nu);
    Env env = coordinate_env(t, x);
    StateVec out(exprs.size());
    for (std::size_t i = 0; i < exprs.size(); ++i) out[i] = exprs[i].evaluate(env);
    return out;
}

std::vector<Expression> zcc_residual_expr(const PolyField& F, int pi, int nu) {
    if (pi == nu) throw ConfigError("curvature residual needs two distinct time indices");
    std::vector<Expression> out = lie_bracket_expr(F, pi, F, nu);
    const std::string tp = time_var(pi), tn = time_var(nu);
    for (int i = 1; i <= F.n(); ++i) {
        out[i - 1] = F.bound_component(i, nu).differentiate(tp) -
                     F.bound_component(i, pi).differentiate(tn) + out[i - 1];
    }
    return out;
}

StateVec zcc_residual(const PolyField& F, int pi, int nu,
                      const TimeVec& t, const StateVec& x) {
    std::vector<Expression> exprs = zcc_residual_expr(F, pi, nu);
    Env env = coordinate_env(t, x);
    StateVec out(exprs.size());
    for (std::size_t i = 0; i < exprs.size(); ++i) out[i] = exprs[i].evaluate(env);
    return out;
}

namespace {

std::vector<std::string> flat_order(int n, int s) {
    std::vector<std::string> order;
    order.reserve(s + n);
    for (int pi = 1; pi <= s; ++pi) order.push_back(time_var(pi));
    for (int i = 1; i <= n; ++i) order.push_back(state_var(i));
    return order;
}

}  // namespace

CompiledField::CompiledField(const PolyField& F) : n_(F.n()), s_(F.s()) {
    if (n_ + s_ > kMaxVars) throw ConfigError("too many coordinates to compile");
    std::vector<std::string> order = flat_order(n_, s_);
    comp_.reserve(static_cast<std::size_t>(n_) * s_);
    for (int pi = 1; pi <= s_; ++pi)
        for (int i = 1; i <= n_; ++i)
            comp_.emplace_back(F.bound_component(i, pi), order);
}

void CompiledField::eval(int pi, const double* t, const double* x, double* out) const {
    double vals[kMaxVars];
    for (int k = 0; k < s_; ++k) vals[k] = t[k];
    for (int k = 0; k < n_; ++k) vals[s_ + k] = x[k];
    const CompiledExpr* row = comp_.data() + static_cast<std::size_t>(pi - 1) * n_;
    for (int i = 0; i < n_; ++i) out[i] = row[i].eval(vals);
}

ZccResidualEvaluator::ZccResidualEvaluator(const PolyField& F, int pi, int nu)
    : n_(F.n()), s_(F.s()), exprs_(zcc_residual_expr(F, pi, nu)) {
    if (n_ + s_ > CompiledField::kMaxVars)
        throw ConfigError("too many coordinates to compile");
    std::vector<std::string> order = flat_order(n_, s_);
    comp_.reserve(exprs_.size());
    for (const Expression& e : exprs_) comp_.emplace_back(e, order);
}

void ZccResidualEvaluator::eval(const double* t, const double* x, double* out) const {
    double vals[CompiledField::kMaxVars];
    for (int k = 0; k < s_; ++k) vals[k] = t[k];
    for (int k = 0; k < n_; ++k) vals[s_ + k] = x[k];
    for (int i = 0; i < n_; ++i) out[i] = comp_[i].eval(vals);
}

long GridSpec::total_points() const {
    long total = 1;
    for (const GridAxis& a : time_axes) total *= std::max(1, a.count);
    for (const GridAxis& a : state_axes) total *= std::max(1, a.count);
    return total;
}

ResidualReport zcc_report(const PolyField& F, const GridSpec& grid, double tol) {
    if (static_cast<int>(grid.time_axes.size()) != F.s() ||
        static_cast<int>(grid.state_axes.size()) != F.n())
        throw ConfigError("grid needs one axis per time coordinate and one per state coordinate");

    std::vector<std::vector<double>> axes;
    for (const GridAxis& a : grid.time_axes) axes.push_back(linspace(a.lo, a.hi, a.count));
    for (const GridAxis& a : grid.state_axes) axes.push_back(linspace(a.lo, a.hi, a.count));
    const int dims = static_cast<int>(axes.size());

    ResidualReport report;
    report.tol = tol;
    report.points = grid.total_points();

    StateVec r(F.n());
    for (int pi = 1; pi <= F.s(); ++pi) {
        for (int nu = pi + 1; nu <= F.s(); ++nu) {
            ZccResidualEvaluator eval(F, pi, nu);
            PairResidual pr;
            pr.pi = pi;
            pr.nu = nu;
            double sum = 0.0;
            std::vector<int> idx(dims, 0);
            double vals[CompiledField::kMaxVars];
            while (true) {
                for (int d = 0; d < dims; ++d) vals[d] = axes[d][idx[d]];
                eval.eval(vals, vals + F.s(), r.data());
                double norm = inf_norm(r.data(), r.size());
                if (!std::isfinite(norm)) norm = std::numeric_limits<double>::infinity();
                sum += norm;
                if (norm > pr.max_norm || pr.worst_t.empty()) {
                    pr.max_norm = norm;
                    pr.worst_t.assign(vals, vals + F.s());
                    pr.worst_x.assign(vals + F.s(), vals + F.s() + F.n());
                }
                int d = dims - 1;
                for (; d >= 0; --d) {
                    if (++idx[d] < static_cast<int>(axes[d].size())) break;
                    idx[d] = 0;
                }
                if (d < 0) break;
            }
            pr.mean_norm = sum / static_cast<double>(report.points);
            report.max_norm = std::max(report.max_norm, pr.max_norm);
            report.pairs.push_back(std::move(pr));
        }
    }
    report.pass = report.max_norm <= tol;
    return report;
}

PathTrajectory integrate_path(const PolyField& F, const TimePath& path, StateVec x0) {
    const int s = F.s(), n = F.n();
    if (path.points.size() < 2) throw ConfigError("path needs at least two points");
    for (const TimeVec& p : path.points)
        if (static_cast<int>(p.size()) != s)
            throw ConfigError("path point dimension does not match the field's s");
    if (static_cast<int>(x0.size()) != n)
        throw ConfigError("initial state dimension does not match the field's n");

    CompiledField cf(F);
    PathTrajectory traj;
    traj.push_back({path.points.front(), x0});

    StateVec x = std::move(x0);
    StateVec k1(n), k2(n), k3(n), k4(n), tmp(n), comp(n);
    TimeVec tbuf(s);

    // dx/ds = sum_pi (dt_pi/ds) X_pi(t(s), x) on s in [0,1] per segment.
    auto rhs = [&](const TimeVec& base, const TimeVec& delta, double sloc,
                   const double* xs, double* out) {
        for (int k = 0; k < s; ++k) tbuf[k] = base[k] + sloc * delta[k];
        for (int i = 0; i < n; ++i) out[i] = 0.0;
        for (int pi = 1; pi <= s; ++pi) {
            if (delta[pi - 1] == 0.0) continue;
            cf.eval(pi, tbuf.data(), xs, comp.data());
            for (int i = 0; i < n; ++i) out[i] += delta[pi - 1] * comp[i];
        }
    };

    for (std::size_t seg = 0; seg + 1 < path.points.size(); ++seg) {
        const TimeVec& P = path.points[seg];
        const TimeVec& Q = path.points[seg + 1];
        TimeVec delta(s);
        double len2 = 0.0;
        for (int k = 0; k < s; ++k) {
            delta[k] = Q[k] - P[k];
            len2 += delta[k] * delta[k];
        }
        if (len2 == 0.0) throw ConfigError("consecutive path points must be distinct");
        const int steps = path.steps_per_segment > 0 ? path.steps_per_segment
                                                     : steps_for_span(std::sqrt(len2));
        const double h = 1.0 / steps;
        for (int step = 0; step < steps; ++step) {
            const double sl = h * step;
            rhs(P, delta, sl, x.data(), k1.data());
            for (int j = 0; j < n; ++j) tmp[j] = x[j] + 0.5 * h * k1[j];
            rhs(P, delta, sl + 0.5 * h, tmp.data(), k2.data());
            for (int j = 0; j < n; ++j) tmp[j] = x[j] + 0.5 * h * k2[j];
            rhs(P, delta, sl + 0.5 * h, tmp.data(), k3.data());
            for (int j = 0; j < n; ++j) tmp[j] = x[j] + h * k3[j];
            rhs(P, delta, sl + h, tmp.data(), k4.data());
            for (int j = 0; j < n; ++j)
                x[j] += (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);

            if (!all_finite(x.data(), n) || inf_norm(x.data(), n) > kBlowUpThreshold) {
                const PathSample& last = traj.back();
                throw NumericError("trajectory blow-up near t = " + format_point(last.t) +
                                   ", last finite state " + format_point(last.x));
            }
            const double snext = step + 1 == steps ? 1.0 : sl + h;
            for (int k = 0; k < s; ++k) tbuf[k] = P[k] + snext * delta[k];
            if (step + 1 == steps) tbuf = Q;
            traj.push_back({tbuf, x});
        }
    }
    return traj;
}

double path_independence(const PolyField& F, const StateVec& x0,
                         const TimePath& path_a, const TimePath& path_b) {
    if (path_a.points.empty() || path_b.points.empty())
        throw ConfigError("paths must be non-empty");
    if (path_a.points.front() != path_b.points.front() ||
        path_a.points.back() != path_b.points.back())
        throw ConfigError("paths must share both endpoints");
    StateVec xa = integrate_path(F, path_a, x0).back().x;
    StateVec xb = integrate_path(F, path_b, x0).back().x;
    double dev = 0.0;
    for (std::size_t i = 0; i < xa.size(); ++i)
        dev = std::max(dev, std::fabs(xa[i] - xb[i]));
    return dev;
}

}  // namespace qls
