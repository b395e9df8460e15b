#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "quasilie/errors.hpp"

namespace qls {

// Right-hand side of dx/ds = f(s, x) with x of fixed dimension.
using OdeRhs = std::function<void(double s, const double* x, double* dx)>;

// Scalar function of one real argument, for quadrature and differencing.
using ScalarFn = std::function<double(double)>;

// Integration aborts once the state norm passes this; Abel and Riccati
// solutions reach poles in finite time and must fail loudly, not drift.
inline constexpr double kBlowUpThreshold = 1e12;

struct Trajectory {
    std::vector<double> s;                // parameter samples, endpoints included
    std::vector<std::vector<double>> x;   // state at each sample
    const std::vector<double>& final_state() const { return x.back(); }
};

double inf_norm(const double* x, std::size_t n);
bool all_finite(const double* x, std::size_t n);

// Step count for a fixed-step run: per_unit per unit of |span|, at least 16.
int steps_for_span(double span, int per_unit = 1000);

// Classical fixed-step 4th-order integration from s0 to s1 (either order).
// Throws NumericError naming the last finite sample when the state leaves
// the finite range or crosses kBlowUpThreshold.
Trajectory integrate_ode(const OdeRhs& f, double s0, double s1,
                         std::vector<double> x0, int steps);

// Same integration, returning only the final state.
std::vector<double> integrate_to(const OdeRhs& f, double s0, double s1,
                                 std::vector<double> x0, int steps);

// Composite Simpson quadrature; n is rounded up to the next even count.
double simpson(const ScalarFn& f, double a, double b, int n);

// (f(x+h) - f(x-h)) / 2h.
double central_difference(const ScalarFn& f, double x, double h);

// (f(x+h) - 2 f(x) + f(x-h)) / h^2.
double second_central_difference(const ScalarFn& f, double x, double h);

std::vector<double> linspace(double a, double b, int count);

// Deterministic uniform variates built directly from mt19937_64 output so
// sequences are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t bits() { return gen_(); }

    // Uniform in [0, 1) with 53 random bits.
    double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

private:
    std::mt19937_64 gen_;
};

}  // namespace qls
