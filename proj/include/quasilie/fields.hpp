#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "quasilie/expr.hpp"
#include "quasilie/numeric.hpp"

namespace qls {

using TimeVec = std::vector<double>;    // (t_1, ..., t_s)
using StateVec = std::vector<double>;   // (x^1, ..., x^n)

// Canonical variable names: time coordinates t1..ts, state coordinates x1..xn.
std::string time_var(int pi);   // pi is 1-based
std::string state_var(int i);   // i is 1-based

// A system of first-order equations dx^i/dt_pi = X^i_pi(t, x): one vector
// field per time coordinate, sharing the state space. Components may use
// named parameters, bound to reals at construction. All public indices are
// 1-based to match the coordinate names.
class PolyField {
public:
    // components[i-1][pi-1] is X^i_pi. Free variables of every component
    // must be canonical coordinates or bound parameter names.
    PolyField(int n, int s, std::vector<std::vector<Expression>> components,
              Env parameters = {}, std::string label = {});

    static PolyField zero(int n, int s);

    int n() const { return n_; }
    int s() const { return s_; }
    const std::string& label() const { return label_; }
    const Env& parameters() const { return params_; }

    // Component as written (parameters still symbolic).
    const Expression& component(int i, int pi) const;
    // Component with parameter values substituted in; what the math uses.
    const Expression& bound_component(int i, int pi) const;

    StateVec eval(int pi, const TimeVec& t, const StateVec& x) const;

    // Exact matrix d X^i_pi / d x^j, row i, column j.
    std::vector<StateVec> jacobian_x(int pi, const TimeVec& t, const StateVec& x) const;

private:
    int n_, s_;
    std::vector<std::vector<Expression>> raw_;    // [i-1][pi-1]
    std::vector<std::vector<Expression>> bound_;  // parameters substituted
    Env params_;
    std::string label_;
};

// Jacobian of an opaque state map R^n -> R^m by central differences with
// h = 1e-5 * (1 + |x_j|) per column.
using StateMap = std::function<void(const double* x, double* out)>;
std::vector<StateVec> central_jacobian(const StateMap& f, const StateVec& x, int m);

// Commutator of two single-pi slices over the same state space:
// [A,B]^i = sum_j (A^j dB^i/dx^j - B^j dA^i/dx^j).
std::vector<Expression> lie_bracket_expr(const PolyField& A, int pi,
                                         const PolyField& B, int nu);
StateVec lie_bracket(const PolyField& A, int pi, const PolyField& B, int nu,
                     const TimeVec& t, const StateVec& x);

// Curvature of the pair (pi, nu):
// R_{pi nu} = d X_nu / d t_pi - d X_pi / d t_nu + [X_pi, X_nu].
// The system is integrable for arbitrary initial data iff this vanishes.
std::vector<Expression> zcc_residual_expr(const PolyField& F, int pi, int nu);
StateVec zcc_residual(const PolyField& F, int pi, int nu,
                      const TimeVec& t, const StateVec& x);

// Field compiled against the flat variable order (t1..ts, x1..xn).
class CompiledField {
public:
    explicit CompiledField(const PolyField& F);
    int n() const { return n_; }
    int s() const { return s_; }
    // out must hold n values; non-finite results propagate, never throw.
    void eval(int pi, const double* t, const double* x, double* out) const;

    static constexpr int kMaxVars = 64;

private:
    int n_, s_;
    std::vector<CompiledExpr> comp_;  // [(pi-1)*n + (i-1)]
};

// One (pi, nu) curvature residual compiled for grid sweeps.
class ZccResidualEvaluator {
public:
    ZccResidualEvaluator(const PolyField& F, int pi, int nu);
    int n() const { return n_; }
    void eval(const double* t, const double* x, double* out) const;
    const std::vector<Expression>& exprs() const { return exprs_; }

private:
    int n_, s_;
    std::vector<Expression> exprs_;
    std::vector<CompiledExpr> comp_;
};

struct GridAxis {
    double lo = 0.0;
    double hi = 0.0;
    int count = 1;
};

// Cartesian sample grid: one axis per time coordinate, one per state
// coordinate, in that order.
struct GridSpec {
    std::vector<GridAxis> time_axes;
    std::vector<GridAxis> state_axes;
    long total_points() const;
};

struct PairResidual {
    int pi = 0, nu = 0;
    double max_norm = 0.0;
    double mean_norm = 0.0;
    TimeVec worst_t;
    StateVec worst_x;
};

struct ResidualReport {
    std::vector<PairResidual> pairs;
    double tol = 0.0;
    double max_norm = 0.0;   // over all pairs
    long points = 0;         // grid points per pair
    bool pass = false;
};

// Max/mean of |R_{pi nu}|_inf over the grid for every pair pi < nu.
ResidualReport zcc_report(const PolyField& F, const GridSpec& grid, double tol);

// Piecewise-linear integration contour in time space. steps_per_segment 0
// means automatic: 1000 steps per unit of segment length.
struct TimePath {
    std::vector<TimeVec> points;
    int steps_per_segment = 0;
};

struct PathSample {
    TimeVec t;
    StateVec x;
};
using PathTrajectory = std::vector<PathSample>;

// Integrate dx/ds = sum_pi (dt_pi/ds) X_pi(t(s), x) along the path with
// fixed-step classical 4th-order stepping. Throws NumericError carrying the
// last finite (t, x) on blow-up.
PathTrajectory integrate_path(const PolyField& F, const TimePath& path, StateVec x0);

// Endpoint deviation |x_A - x_B|_inf for two paths sharing both endpoints;
// near zero iff the zero-curvature property holds along the explored region.
double path_independence(const PolyField& F, const StateVec& x0,
                         const TimePath& path_a, const TimePath& path_b);

}  // namespace qls
