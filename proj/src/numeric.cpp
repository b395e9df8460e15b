#include "quasilie/numeric.hpp"

#include <cmath>
#include <cstdio>
#include <string>

namespace qls {

double inf_norm(const double* x, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::fabs(x[i]));
    return m;
}

bool all_finite(const double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        if (!std::isfinite(x[i])) return false;
    return true;
}

int steps_for_span(double span, int per_unit) {
    double want = std::ceil(std::fabs(span) * per_unit);
    return std::max(16, static_cast<int>(want));
}

namespace {

[[noreturn]] void report_blow_up(double s_last, const std::vector<double>& x_last) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", s_last);
    std::string msg = "trajectory blow-up past s = ";
    msg += buf;
    msg += ", last finite state (";
    for (std::size_t i = 0; i < x_last.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.9g", x_last[i]);
        if (i) msg += ", ";
        msg += buf;
    }
    msg += ")";
    throw NumericError(msg);
}

}  // namespace

Trajectory integrate_ode(const OdeRhs& f, double s0, double s1,
                         std::vector<double> x0, int steps) {
    const std::size_t n = x0.size();
    if (steps < 1) throw ConfigError("integration needs at least one step");
    if (!all_finite(x0.data(), n) || inf_norm(x0.data(), n) > kBlowUpThreshold)
        throw NumericError("initial state is not finite");

    Trajectory out;
    out.s.reserve(steps + 1);
    out.x.reserve(steps + 1);
    out.s.push_back(s0);
    out.x.push_back(x0);

    const double h = (s1 - s0) / steps;
    std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
    std::vector<double> x = std::move(x0);

    for (int i = 0; i < steps; ++i) {
        const double s = s0 + h * i;
        f(s, x.data(), k1.data());
        for (std::size_t j = 0; j < n; ++j) tmp[j] = x[j] + 0.5 * h * k1[j];
        f(s + 0.5 * h, tmp.data(), k2.data());
        for (std::size_t j = 0; j < n; ++j) tmp[j] = x[j] + 0.5 * h * k2[j];
        f(s + 0.5 * h, tmp.data(), k3.data());
        for (std::size_t j = 0; j < n; ++j) tmp[j] = x[j] + h * k3[j];
        f(s + h, tmp.data(), k4.data());
        for (std::size_t j = 0; j < n; ++j)
            x[j] += (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);

        if (!all_finite(x.data(), n) || inf_norm(x.data(), n) > kBlowUpThreshold)
            report_blow_up(out.s.back(), out.x.back());

        out.s.push_back(i + 1 == steps ? s1 : s0 + h * (i + 1));
        out.x.push_back(x);
    }
    return out;
}

std::vector<double> integrate_to(const OdeRhs& f, double s0, double s1,
                                 std::vector<double> x0, int steps) {
    const std::size_t n = x0.size();
    if (steps < 1) throw ConfigError("integration needs at least one step");
    if (!all_finite(x0.data(), n) || inf_norm(x0.data(), n) > kBlowUpThreshold)
        throw NumericError("initial state is not finite");

    const double h = (s1 - s0) / steps;
    std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n), prev(n);
    std::vector<double> x = std::move(x0);

    for (int i = 0; i < steps; ++i) {
        const double s = s0 + h * i;
        prev = x;
        f(s, x.data(), k1.data());
        for (std::size_t j = 0; j < n; ++j) tmp[j] = x[j] + 0.5 * h * k1[j];
        f(s + 0.5 * h, tmp.data(), k2.data());
        for (std::size_t j = 0; j < n; ++j) tmp[j] = x[j] + 0.5 * h * k2[j];
        f(s + 0.5 * h, tmp.data(), k3.data());
        for (std::size_t j = 0; j < n; ++j) tmp[j] = x[j] + h * k3[j];
        f(s + h, tmp.data(), k4.data());
        for (std::size_t j = 0; j < n; ++j)
            x[j] += (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);

        if (!all_finite(x.data(), n) || inf_norm(x.data(), n) > kBlowUpThreshold)
            report_blow_up(s, prev);
    }
    return x;
}

double simpson(const ScalarFn& f, double a, double b, int n) {
    if (n < 2) n = 2;
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double acc = f(a) + f(b);
    for (int i = 1; i < n; ++i) acc += f(a + h * i) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

double central_difference(const ScalarFn& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

double second_central_difference(const ScalarFn& f, double x, double h) {
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

std::vector<double> linspace(double a, double b, int count) {
    if (count < 1) throw ConfigError("linspace needs at least one point");
    std::vector<double> out(count);
    if (count == 1) {
        out[0] = a;
        return out;
    }
    const double h = (b - a) / (count - 1);
    for (int i = 0; i < count; ++i) out[i] = (i + 1 == count) ? b : a + h * i;
    return out;
}

}  // namespace qls
