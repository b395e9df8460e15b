#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "quasilie/fields.hpp"

namespace qls {

// Field available only through evaluation, e.g. the transform of a field
// under a numerically integrated flow.
struct FieldEvaluator {
    int n = 0, s = 0;
    std::function<StateVec(int pi, const TimeVec& t, const StateVec& x)> eval;
};

// A time-indexed family of invertible state-space maps g_t with a declared
// foot point t0. Three representations:
//   Affine    (n = 1): x -> a(t) x + b(t), a(t) > 0.
//   Explicit  forward maps y^i(t, x) with supplied inverses x^i(t, y);
//             inverse expressions use the x-names for the target point.
//   Generated the map transports states along a field from the foot point
//             to t on the straight time segment.
class GeneralisedFlow {
public:
    enum class Kind { Affine, Explicit, Generated };

    static GeneralisedFlow affine(Expression a, Expression b, int s, TimeVec foot,
                                  Env params = {});
    static GeneralisedFlow explicit_maps(int n, int s, std::vector<Expression> forward,
                                         std::vector<Expression> inverse, TimeVec foot,
                                         Env params = {});
    static GeneralisedFlow generated(PolyField field, TimeVec foot,
                                     int steps_per_unit = 1000);
    static GeneralisedFlow identity(int n, int s, TimeVec foot);

    Kind kind() const { return kind_; }
    int n() const { return n_; }
    int s() const { return s_; }
    const TimeVec& foot() const { return foot_; }

    StateVec apply(const TimeVec& t, const StateVec& x) const;
    StateVec inverse_apply(const TimeVec& t, const StateVec& y) const;

    // Max |g_{t0}(x) - x| over the given states; zero for foot-normalised flows.
    double based_defect(const std::vector<StateVec>& states) const;

    // Affine accessors; throw ConfigError for other kinds.
    const Expression& scale() const;
    const Expression& shift() const;
    // Explicit accessors (affine flows also expose their generated maps).
    const std::vector<Expression>& forward_maps() const;
    const std::vector<Expression>& inverse_maps() const;
    // Generated accessor.
    const PolyField& generator() const;

private:
    GeneralisedFlow() = default;

    Kind kind_ = Kind::Explicit;
    int n_ = 0, s_ = 0;
    TimeVec foot_;
    Expression scale_, shift_;                  // affine
    std::vector<Expression> forward_, inverse_; // explicit (and affine view)
    std::optional<PolyField> generator_;        // generated
    int steps_per_unit_ = 1000;

    double scale_at(const TimeVec& t) const;
};

// Composition acting as factors[0] o factors[1] o ... at each fixed t.
class FlowComposition {
public:
    explicit FlowComposition(std::vector<GeneralisedFlow> factors);
    const std::vector<GeneralisedFlow>& factors() const { return factors_; }
    int n() const;
    int s() const;
    StateVec apply(const TimeVec& t, const StateVec& x) const;
    StateVec inverse_apply(const TimeVec& t, const StateVec& y) const;

private:
    std::vector<GeneralisedFlow> factors_;
};

FlowComposition compose_flows(const GeneralisedFlow& g, const GeneralisedFlow& h);

// Two affine flows collapse to one affine flow: a = a_g a_h, b = a_g b_h + b_g.
GeneralisedFlow compose_affine(const GeneralisedFlow& g, const GeneralisedFlow& h);

// Transform of a system under a flow:
// (h * F)_pi(t, y) = dh_t/dt_pi (x) + Dh_t(x) X_pi(t, x) at x = h_t^{-1}(y).
// Solutions of F map to solutions of the transformed system under h_t.
struct StarAction {
    FieldEvaluator evaluator;               // always usable
    std::optional<PolyField> closed_form;   // for expression-backed flows
};
StarAction star_action(const GeneralisedFlow& h, const PolyField& F);

// Field whose flow inverts the flow of F:
// X^{-1}_pi(t, y) = -[Dg_t(y)]^{-1} X_pi(t, g_t(y)) with g the flow of F.
FieldEvaluator inverse_field(const PolyField& F, TimeVec t0, int steps_per_unit = 1000);

// Consistency of the transform formula against the geometric definition:
// pushes the suspended field (d/dt_pi + X_pi) through (t, x) -> (t, h_t(x))
// by one joint directional difference and compares with the two-term
// formula at each sample. corrupt_time_term scales the dh/dt term on the
// formula side and serves as the negative control.
double autonomisation_check(const GeneralisedFlow& h, const PolyField& F,
                            const std::vector<std::pair<TimeVec, StateVec>>& samples,
                            double corrupt_time_term = 0.0);

}  // namespace qls
