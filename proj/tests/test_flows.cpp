#include "doctest.h"

#include <cmath>

#include "quasilie/flows.hpp"

using qls::Env;
using qls::Expression;
using qls::GeneralisedFlow;
using qls::PolyField;
using qls::StateVec;
using qls::TimeVec;

namespace {

Expression ex(const std::string& src) { return Expression::parse(src); }

// dx/dt = a(t) + c(t) x + f(t) x^(eps-1) + g(t) x^eps with eps = 3.
PolyField abel_field(const std::string& a, const std::string& c,
                     const std::string& f, const std::string& g) {
    Expression comp = ex(a) + ex(c) * ex("x1") + ex(f) * ex("x1^2") + ex(g) * ex("x1^3");
    return PolyField(1, 1, {{comp}});
}

}  // namespace

TEST_CASE("flow application per representation") {
    GeneralisedFlow id = GeneralisedFlow::identity(2, 1, {0.0});
    CHECK(id.apply({3.0}, {1.5, -2.0}) == StateVec{1.5, -2.0});
    CHECK(id.based_defect({{0.4, 0.8}, {-1.0, 2.0}}) == 0.0);

    // Ratio scale: y = f(t) x / g(t).
    GeneralisedFlow ratio = GeneralisedFlow::affine(ex("exp(t1)/(1 + t1^2)"),
                                                    Expression::constant(0.0), 1, {0.0});
    double t = 0.7;
    CHECK(ratio.apply({t}, {2.0})[0] ==
          doctest::Approx(std::exp(t) * 2.0 / (1 + t * t)).epsilon(1e-15));

    GeneralisedFlow generated =
        GeneralisedFlow::generated(PolyField(1, 1, {{ex("x1")}}), {0.0});
    CHECK(generated.apply({1.0}, {1.0})[0] == doctest::Approx(std::exp(1.0)).epsilon(1e-8));
    CHECK(generated.apply({0.0}, {0.6}) == StateVec{0.6});
}

TEST_CASE("inverse application undoes the flow") {
    GeneralisedFlow aff = GeneralisedFlow::affine(Expression::constant(2.0),
                                                  Expression::constant(1.0), 1, {0.0});
    CHECK(aff.inverse_apply({0.0}, {5.0}) == StateVec{2.0});

    // Explicit monotone map y = sinh(x) + t with a written-out inverse.
    GeneralisedFlow expl = GeneralisedFlow::explicit_maps(
        1, 1, {ex("sinh(x1) + t1")},
        {ex("ln(x1 - t1 + sqrt((x1 - t1)^2 + 1))")}, {0.0});
    qls::Rng rng(17);
    for (int i = 0; i < 20; ++i) {
        TimeVec t{rng.uniform(-1, 1)};
        StateVec x{rng.uniform(-2, 2)};
        StateVec back = expl.inverse_apply(t, expl.apply(t, x));
        CHECK(std::fabs(back[0] - x[0]) <= 1e-9);
        StateVec fwd = aff.apply(t, aff.inverse_apply(t, x));
        CHECK(std::fabs(fwd[0] - x[0]) <= 1e-12);
    }

    GeneralisedFlow generated =
        GeneralisedFlow::generated(PolyField(1, 1, {{ex("x1")}}), {0.0});
    CHECK(generated.inverse_apply({1.0}, {std::exp(1.0)})[0] ==
          doctest::Approx(1.0).epsilon(1e-7));

    GeneralisedFlow degenerate =
        GeneralisedFlow::affine(ex("t1"), Expression::constant(0.0), 1, {1.0});
    CHECK_THROWS_AS(degenerate.apply({-2.0}, {1.0}), qls::NumericError);
}

TEST_CASE("transform under the identity flow returns the field unchanged") {
    PolyField F = abel_field("sin(t1)", "t1", "1 + t1^2", "2 + cos(t1)");
    auto act = qls::star_action(GeneralisedFlow::identity(1, 1, {0.0}), F);
    REQUIRE(act.closed_form.has_value());
    CHECK(act.closed_form->component(1, 1).str() == F.bound_component(1, 1).str());
}

TEST_CASE("translation flow shifts the constant slot by the time derivative") {
    // h_t(x) = x + sin(t1) applied to dx/dt = 1 gives dy/dt = cos(t1) + 1.
    GeneralisedFlow h = GeneralisedFlow::affine(Expression::constant(1.0), ex("sin(t1)"),
                                                1, {0.0});
    auto act = qls::star_action(h, PolyField(1, 1, {{Expression::constant(1.0)}}));
    REQUIRE(act.closed_form.has_value());
    for (double t : {-0.4, 0.0, 1.1})
        CHECK(act.closed_form->eval(1, {t}, {0.3})[0] ==
              doctest::Approx(std::cos(t) + 1.0).epsilon(1e-14));
}

TEST_CASE("scaling flow transforms generalised Abel coefficients slotwise") {
    // x -> beta(t) x sends coefficients (a, c, f, g) to
    // (a beta, beta'/beta + c, f beta^(2-eps), g beta^(1-eps)), eps = 3.
    PolyField F = abel_field("sin(t1)", "t1", "1 + t1^2", "2 + cos(t1)");
    GeneralisedFlow h = GeneralisedFlow::affine(ex("exp(t1/2)"), Expression::constant(0.0),
                                                1, {0.0});
    auto act = qls::star_action(h, F);
    REQUIRE(act.closed_form.has_value());

    Expression beta = ex("exp(t1/2)");
    Expression dbeta = beta.differentiate("t1");
    Expression y = ex("x1");
    Expression expected = ex("sin(t1)") * beta + (dbeta / beta + ex("t1")) * y +
                          ex("1 + t1^2") * pow(beta, Expression::constant(-1.0)) * y * y +
                          ex("2 + cos(t1)") * pow(beta, Expression::constant(-2.0)) * y * y * y;

    qls::Rng rng(5);
    for (int i = 0; i < 25; ++i) {
        double t = rng.uniform(-1, 1), v = rng.uniform(-2, 2);
        Env env{{"t1", t}, {"x1", v}};
        CHECK(act.closed_form->eval(1, {t}, {v})[0] ==
              doctest::Approx(expected.evaluate(env)).epsilon(1e-12));
        CHECK(act.evaluator.eval(1, {t}, {v})[0] ==
              doctest::Approx(expected.evaluate(env)).epsilon(1e-12));
    }
}

TEST_CASE("affine flows compose and the transform respects composition") {
    GeneralisedFlow g = GeneralisedFlow::affine(ex("1 + t1^2"), ex("sin(t1)"), 1, {0.0});
    GeneralisedFlow h = GeneralisedFlow::affine(ex("exp(t1/3)"), ex("t1/2"), 1, {0.0});
    GeneralisedFlow gh = qls::compose_affine(g, h);

    qls::Rng rng(99);
    for (int i = 0; i < 10; ++i) {
        TimeVec t{rng.uniform(-1, 1)};
        StateVec x{rng.uniform(-2, 2)};
        double nested = g.apply(t, h.apply(t, x))[0];
        CHECK(gh.apply(t, x)[0] == doctest::Approx(nested).epsilon(1e-14));
        CHECK(qls::compose_flows(g, h).apply(t, x)[0] ==
              doctest::Approx(nested).epsilon(1e-14));
    }

    // Group action: (g o h) * F = g * (h * F).
    PolyField F = abel_field("1", "t1", "t1^2", "cos(t1)");
    auto whole = qls::star_action(gh, F);
    auto inner = qls::star_action(h, F);
    REQUIRE(inner.closed_form.has_value());
    auto outer = qls::star_action(g, *inner.closed_form);
    for (int i = 0; i < 25; ++i) {
        TimeVec t{rng.uniform(-1, 1)};
        StateVec y{rng.uniform(-2, 2)};
        double lhs = whole.closed_form->eval(1, t, y)[0];
        double rhs = outer.closed_form->eval(1, t, y)[0];
        CHECK(std::fabs(lhs - rhs) <= 1e-8 * (1.0 + std::fabs(lhs)));
    }
}

TEST_CASE("solutions transport through the flow onto the transformed system") {
    PolyField F = abel_field("sin(t1)", "t1/2", "t1^2/4", "cos(t1)/5");
    GeneralisedFlow h = GeneralisedFlow::affine(ex("exp(t1/2)"), ex("t1/3"), 1, {0.0});
    auto act = qls::star_action(h, F);
    REQUIRE(act.closed_form.has_value());

    qls::TimePath line{{{0.0}, {0.8}}, 2000};
    StateVec x0{0.25};
    double x_end = qls::integrate_path(F, line, x0).back().x[0];
    double y0 = h.apply({0.0}, x0)[0];
    double y_end = qls::integrate_path(*act.closed_form, line, {y0}).back().x[0];
    CHECK(y_end == doctest::Approx(h.apply({0.8}, {x_end})[0]).epsilon(1e-6));
}

TEST_CASE("inverse field negates autonomous fields and inverts flows") {
    PolyField quad(1, 1, {{ex("x1^2")}});
    auto inv = qls::inverse_field(quad, {0.0}, 800);
    for (double y : {-0.5, 0.2, 0.7})
        CHECK(inv.eval(1, {0.3}, {y})[0] == doctest::Approx(-y * y).epsilon(1e-6));

    auto zero_inv = qls::inverse_field(PolyField::zero(1, 1), {0.0}, 100);
    CHECK(zero_inv.eval(1, {0.5}, {1.2})[0] == 0.0);

    // Integrating the inverse field from the flowed point returns the start.
    PolyField drift(1, 1, {{ex("x1/2 + sin(t1)/4")}});
    GeneralisedFlow g = GeneralisedFlow::generated(drift, {0.0}, 500);
    const double T = 0.3;
    double moved = g.apply({T}, {0.4})[0];
    auto drift_inv = qls::inverse_field(drift, {0.0}, 500);
    auto rhs = [&](double t, const double* x, double* dx) {
        dx[0] = drift_inv.eval(1, {t}, {x[0]})[0];
    };
    double back = qls::integrate_to(rhs, 0.0, T, {0.4}, 60)[0];
    // Flow of the inverse field composed with the flow of F stays at x0.
    double closed = g.apply({T}, {0.4})[0];
    CHECK(closed == doctest::Approx(moved).epsilon(1e-12));
    StateVec together = g.apply({T}, {back});
    CHECK(together[0] == doctest::Approx(0.4).epsilon(1e-5));
}

TEST_CASE("joint-difference transport identity holds and detects corruption") {
    PolyField F = abel_field("sin(t1)", "t1/2", "t1^2/3", "cos(t1)/4");
    GeneralisedFlow h = GeneralisedFlow::affine(ex("exp(t1/2)"), ex("t1/4"), 1, {0.0});

    qls::Rng rng(31);
    std::vector<std::pair<TimeVec, StateVec>> samples;
    for (int i = 0; i < 100; ++i)
        samples.push_back({{rng.uniform(-1, 1)}, {rng.uniform(-2, 2)}});

    CHECK(qls::autonomisation_check(GeneralisedFlow::identity(1, 1, {0.0}), F, samples) <
          1e-9);
    CHECK(qls::autonomisation_check(h, F, samples) < 1e-8);
    CHECK(qls::autonomisation_check(h, F, samples, 0.05) > 1e-2);
}
