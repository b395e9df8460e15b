#include "quasilie/flows.hpp"

#include <Eigen/Dense>

#include <cmath>

namespace qls {

namespace {

Env coordinate_env(const TimeVec& t, const StateVec& x) {
    Env env;
    for (std::size_t pi = 0; pi < t.size(); ++pi) env[time_var(int(pi) + 1)] = t[pi];
    for (std::size_t i = 0; i < x.size(); ++i) env[state_var(int(i) + 1)] = x[i];
    return env;
}

Expression bind_params(Expression e, const Env& params) {
    for (const auto& [name, value] : params)
        e = e.substitute(name, Expression::constant(value));
    return e;
}

void check_time_only(const Expression& e, int s, const char* what) {
    for (const std::string& v : e.free_variables()) {
        bool ok = false;
        for (int pi = 1; pi <= s; ++pi)
            if (v == time_var(pi)) ok = true;
        if (!ok)
            throw ConfigError(std::string(what) + " must depend on time coordinates only, found '" +
                              v + "'");
    }
}

void check_coords_only(const Expression& e, int n, int s, const char* what) {
    for (const std::string& v : e.free_variables()) {
        bool ok = false;
        for (int pi = 1; pi <= s; ++pi)
            if (v == time_var(pi)) ok = true;
        for (int i = 1; i <= n; ++i)
            if (v == state_var(i)) ok = true;
        if (!ok)
            throw ConfigError(std::string(what) + " uses unknown variable '" + v + "'");
    }
}

// Straight time segment with a step count from per-unit density.
TimePath segment(const TimeVec& from, const TimeVec& to, int steps_per_unit) {
    double len2 = 0.0;
    for (std::size_t k = 0; k < from.size(); ++k) {
        double d = to[k] - from[k];
        len2 += d * d;
    }
    TimePath path;
    path.points = {from, to};
    path.steps_per_segment = steps_for_span(std::sqrt(len2), steps_per_unit);
    return path;
}

// Replace every state variable simultaneously: x_j -> repl[j-1].
Expression substitute_state(Expression e, const std::vector<Expression>& repl) {
    const int n = static_cast<int>(repl.size());
    for (int j = 1; j <= n; ++j)
        e = e.substitute(state_var(j), Expression::variable("__sub" + std::to_string(j)));
    for (int j = 1; j <= n; ++j)
        e = e.substitute("__sub" + std::to_string(j), repl[j - 1]);
    return e;
}

}  // namespace

GeneralisedFlow GeneralisedFlow::affine(Expression a, Expression b, int s, TimeVec foot,
                                        Env params) {
    if (s < 1) throw ConfigError("flow needs s >= 1");
    if (static_cast<int>(foot.size()) != s)
        throw ConfigError("foot point dimension must equal s");
    GeneralisedFlow g;
    g.kind_ = Kind::Affine;
    g.n_ = 1;
    g.s_ = s;
    g.foot_ = std::move(foot);
    g.scale_ = bind_params(std::move(a), params);
    g.shift_ = bind_params(std::move(b), params);
    check_time_only(g.scale_, s, "affine scale");
    check_time_only(g.shift_, s, "affine shift");
    Expression x = Expression::variable(state_var(1));
    g.forward_ = {g.scale_ * x + g.shift_};
    g.inverse_ = {(x - g.shift_) / g.scale_};
    return g;
}

GeneralisedFlow GeneralisedFlow::explicit_maps(int n, int s, std::vector<Expression> forward,
                                               std::vector<Expression> inverse, TimeVec foot,
                                               Env params) {
    if (n < 1 || s < 1) throw ConfigError("flow needs n >= 1 and s >= 1");
    if (static_cast<int>(forward.size()) != n || static_cast<int>(inverse.size()) != n)
        throw ConfigError("explicit flow needs n forward and n inverse maps");
    if (static_cast<int>(foot.size()) != s)
        throw ConfigError("foot point dimension must equal s");
    GeneralisedFlow g;
    g.kind_ = Kind::Explicit;
    g.n_ = n;
    g.s_ = s;
    g.foot_ = std::move(foot);
    for (Expression& e : forward) {
        e = bind_params(std::move(e), params);
        check_coords_only(e, n, s, "forward map");
    }
    for (Expression& e : inverse) {
        e = bind_params(std::move(e), params);
        check_coords_only(e, n, s, "inverse map");
    }
    g.forward_ = std::move(forward);
    g.inverse_ = std::move(inverse);
    return g;
}

GeneralisedFlow GeneralisedFlow::generated(PolyField field, TimeVec foot, int steps_per_unit) {
    if (static_cast<int>(foot.size()) != field.s())
        throw ConfigError("foot point dimension must equal the field's s");
    GeneralisedFlow g;
    g.kind_ = Kind::Generated;
    g.n_ = field.n();
    g.s_ = field.s();
    g.foot_ = std::move(foot);
    g.generator_.emplace(std::move(field));
    g.steps_per_unit_ = steps_per_unit;
    return g;
}

GeneralisedFlow GeneralisedFlow::identity(int n, int s, TimeVec foot) {
    std::vector<Expression> maps;
    for (int i = 1; i <= n; ++i) maps.push_back(Expression::variable(state_var(i)));
    return explicit_maps(n, s, maps, maps, std::move(foot));
}

double GeneralisedFlow::scale_at(const TimeVec& t) const {
    double a = scale_.evaluate(coordinate_env(t, {}));
    if (!(a > 0.0))
        throw NumericError("affine flow scale is not positive at the requested time");
    return a;
}

StateVec GeneralisedFlow::apply(const TimeVec& t, const StateVec& x) const {
    if (static_cast<int>(t.size()) != s_ || static_cast<int>(x.size()) != n_)
        throw ConfigError("flow apply expects t of size s and x of size n");
    switch (kind_) {
        case Kind::Affine: {
            double a = scale_at(t);
            double b = shift_.evaluate(coordinate_env(t, {}));
            return {a * x[0] + b};
        }
        case Kind::Explicit: {
            Env env = coordinate_env(t, x);
            StateVec out(n_);
            for (int i = 0; i < n_; ++i) out[i] = forward_[i].evaluate(env);
            return out;
        }
        case Kind::Generated: {
            if (t == foot_) return x;
            return integrate_path(*generator_, segment(foot_, t, steps_per_unit_), x).back().x;
        }
    }
    return x;
}

StateVec GeneralisedFlow::inverse_apply(const TimeVec& t, const StateVec& y) const {
    if (static_cast<int>(t.size()) != s_ || static_cast<int>(y.size()) != n_)
        throw ConfigError("flow inverse expects t of size s and y of size n");
    switch (kind_) {
        case Kind::Affine: {
            double a = scale_at(t);
            double b = shift_.evaluate(coordinate_env(t, {}));
            return {(y[0] - b) / a};
        }
        case Kind::Explicit: {
            Env env = coordinate_env(t, y);
            StateVec out(n_);
            for (int i = 0; i < n_; ++i) out[i] = inverse_[i].evaluate(env);
            return out;
        }
        case Kind::Generated: {
            if (t == foot_) return y;
            return integrate_path(*generator_, segment(t, foot_, steps_per_unit_), y).back().x;
        }
    }
    return y;
}

double GeneralisedFlow::based_defect(const std::vector<StateVec>& states) const {
    double worst = 0.0;
    for (const StateVec& x : states) {
        StateVec y = apply(foot_, x);
        for (int i = 0; i < n_; ++i) worst = std::max(worst, std::fabs(y[i] - x[i]));
    }
    return worst;
}

const Expression& GeneralisedFlow::scale() const {
    if (kind_ != Kind::Affine) throw ConfigError("scale() needs an affine flow");
    return scale_;
}

const Expression& GeneralisedFlow::shift() const {
    if (kind_ != Kind::Affine) throw ConfigError("shift() needs an affine flow");
    return shift_;
}

const std::vector<Expression>& GeneralisedFlow::forward_maps() const {
    if (kind_ == Kind::Generated) throw ConfigError("generated flows have no map expressions");
    return forward_;
}

const std::vector<Expression>& GeneralisedFlow::inverse_maps() const {
    if (kind_ == Kind::Generated) throw ConfigError("generated flows have no map expressions");
    return inverse_;
}

const PolyField& GeneralisedFlow::generator() const {
    if (kind_ != Kind::Generated) throw ConfigError("generator() needs a generated flow");
    return *generator_;
}

FlowComposition::FlowComposition(std::vector<GeneralisedFlow> factors)
    : factors_(std::move(factors)) {
    if (factors_.empty()) throw ConfigError("composition needs at least one factor");
    for (const GeneralisedFlow& g : factors_)
        if (g.n() != factors_[0].n() || g.s() != factors_[0].s())
            throw ConfigError("composition factors must share state and time dimensions");
}

int FlowComposition::n() const { return factors_[0].n(); }
int FlowComposition::s() const { return factors_[0].s(); }

StateVec FlowComposition::apply(const TimeVec& t, const StateVec& x) const {
    StateVec v = x;
    for (auto it = factors_.rbegin(); it != factors_.rend(); ++it) v = it->apply(t, v);
    return v;
}

StateVec FlowComposition::inverse_apply(const TimeVec& t, const StateVec& y) const {
    StateVec v = y;
    for (const GeneralisedFlow& g : factors_) v = g.inverse_apply(t, v);
    return v;
}

FlowComposition compose_flows(const GeneralisedFlow& g, const GeneralisedFlow& h) {
    return FlowComposition({g, h});
}

GeneralisedFlow compose_affine(const GeneralisedFlow& g, const GeneralisedFlow& h) {
    if (g.kind() != GeneralisedFlow::Kind::Affine || h.kind() != GeneralisedFlow::Kind::Affine)
        throw ConfigError("compose_affine needs two affine flows");
    if (g.s() != h.s()) throw ConfigError("composition factors must share time dimension");
    return GeneralisedFlow::affine(g.scale() * h.scale(),
                                   g.scale() * h.shift() + g.shift(), g.s(), g.foot());
}

StarAction star_action(const GeneralisedFlow& h, const PolyField& F) {
    if (h.n() != F.n() || h.s() != F.s())
        throw ConfigError("flow and field dimensions must match for the transform");
    const int n = F.n(), s = F.s();

    StarAction result;
    if (h.kind() != GeneralisedFlow::Kind::Generated) {
        const std::vector<Expression>& fwd = h.forward_maps();
        const std::vector<Expression>& inv = h.inverse_maps();
        std::vector<std::vector<Expression>> comps(n, std::vector<Expression>());
        for (int i = 0; i < n; ++i) {
            for (int pi = 1; pi <= s; ++pi) {
                Expression term = substitute_state(fwd[i].differentiate(time_var(pi)), inv);
                for (int j = 1; j <= n; ++j) {
                    term = term +
                           substitute_state(fwd[i].differentiate(state_var(j)), inv) *
                               substitute_state(F.bound_component(j, pi), inv);
                }
                comps[i].push_back(std::move(term));
            }
        }
        result.closed_form.emplace(n, s, std::move(comps), Env{}, F.label());
        const PolyField& tf = *result.closed_form;
        result.evaluator = {n, s, [tf](int pi, const TimeVec& t, const StateVec& y) {
                                return tf.eval(pi, t, y);
                            }};
        return result;
    }

    result.evaluator = {n, s, [h, F, n](int pi, const TimeVec& t, const StateVec& y) {
        StateVec x = h.inverse_apply(t, y);
        StateVec fx = F.eval(pi, t, x);

        // dh_t/dt_pi at fixed x by central difference.
        TimeVec tp = t, tm = t;
        const double dt = 1e-5 * (1.0 + std::fabs(t[pi - 1]));
        tp[pi - 1] += dt;
        tm[pi - 1] -= dt;
        StateVec hp = h.apply(tp, x), hm = h.apply(tm, x);

        auto map = [&](const double* xs, double* out) {
            StateVec v = h.apply(t, StateVec(xs, xs + n));
            for (int i = 0; i < n; ++i) out[i] = v[i];
        };
        auto jac = central_jacobian(map, x, n);

        StateVec out(n);
        for (int i = 0; i < n; ++i) {
            out[i] = (hp[i] - hm[i]) / (2.0 * dt);
            for (int j = 0; j < n; ++j) out[i] += jac[i][j] * fx[j];
        }
        return out;
    }};
    return result;
}

FieldEvaluator inverse_field(const PolyField& F, TimeVec t0, int steps_per_unit) {
    GeneralisedFlow g = GeneralisedFlow::generated(F, std::move(t0), steps_per_unit);
    const int n = F.n();
    return {n, F.s(), [g, F, n](int pi, const TimeVec& t, const StateVec& y) {
        StateVec gy = g.apply(t, y);
        StateVec fx = F.eval(pi, t, gy);

        auto map = [&](const double* xs, double* out) {
            StateVec v = g.apply(t, StateVec(xs, xs + n));
            for (int i = 0; i < n; ++i) out[i] = v[i];
        };
        auto jac = central_jacobian(map, y, n);

        Eigen::MatrixXd D(n, n);
        Eigen::VectorXd rhs(n);
        for (int i = 0; i < n; ++i) {
            rhs(i) = -fx[i];
            for (int j = 0; j < n; ++j) D(i, j) = jac[i][j];
        }
        Eigen::VectorXd sol = D.partialPivLu().solve(rhs);
        StateVec out(n);
        for (int i = 0; i < n; ++i) out[i] = sol(i);
        return out;
    }};
}

double autonomisation_check(const GeneralisedFlow& h, const PolyField& F,
                            const std::vector<std::pair<TimeVec, StateVec>>& samples,
                            double corrupt_time_term) {
    if (h.n() != F.n() || h.s() != F.s())
        throw ConfigError("flow and field dimensions must match");
    const int n = F.n(), s = F.s();
    double worst = 0.0;

    for (const auto& [t, x] : samples) {
        for (int pi = 1; pi <= s; ++pi) {
            StateVec fx = F.eval(pi, t, x);

            // Geometric side: one joint difference along (e_pi, X_pi).
            const double d = 1e-5 * (1.0 + std::fabs(t[pi - 1]));
            TimeVec tp = t, tm = t;
            tp[pi - 1] += d;
            tm[pi - 1] -= d;
            StateVec xp(n), xm(n);
            for (int i = 0; i < n; ++i) {
                xp[i] = x[i] + d * fx[i];
                xm[i] = x[i] - d * fx[i];
            }
            StateVec fwd = h.apply(tp, xp), bwd = h.apply(tm, xm);

            // Formula side: time term and state term evaluated separately.
            StateVec hp = h.apply(tp, x), hm = h.apply(tm, x);
            auto map = [&](const double* xs, double* out) {
                StateVec v = h.apply(t, StateVec(xs, xs + n));
                for (int i = 0; i < n; ++i) out[i] = v[i];
            };
            auto jac = central_jacobian(map, x, n);

            for (int i = 0; i < n; ++i) {
                double geometric = (fwd[i] - bwd[i]) / (2.0 * d);
                double formula = (1.0 + corrupt_time_term) * (hp[i] - hm[i]) / (2.0 * d);
                for (int j = 0; j < n; ++j) formula += jac[i][j] * fx[j];
                worst = std::max(worst, std::fabs(geometric - formula));
            }
        }
    }
    return worst;
}

}  // namespace qls
