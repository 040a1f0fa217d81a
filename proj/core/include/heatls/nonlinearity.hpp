#pragma once

#include <functional>
#include <string>

namespace heatls {

/// Growth majorant psi(r) = alpha + beta * ln^(3/2)(1 + |r|).
struct GrowthBound {
    double alpha = 0.0;
    double beta = 0.0;
    double operator()(double r) const;
};

/// A reaction term g with its derivative, the Picard quotient
/// gtilde(r) = g(r)/r (value g'(0) at 0), growth data and Hoelder data.
/// g(0) = 0 is required throughout.
struct NonlinearitySpec {
    std::string name;
    std::function<double(double)> g;
    std::function<double(double)> gprime;
    double alpha = 0.0;            // |g'| <= alpha + beta ln^(3/2)(1+|r|)
    double beta = 0.0;
    double p = 1.0;                // Hoelder exponent of g' in [0,1]
    double holder_seminorm = 0.0;  // [g']_p (2*sup|g'| by convention when p=0)

    double gtilde(double r) const {
        return std::abs(r) < 1e-8 ? gprime(0.0) : g(r) / r;
    }
    GrowthBound growth() const { return {alpha, beta}; }
};

/// Catalog entries: zero, linear(b), loglim(b,c), saturated_tanh(kappa),
/// lipschitz_sin(kappa). Each pins (alpha, beta, p, [g']_p); loglim's
/// seminorm is a dense numeric sup of |g''| (no usable closed form).
NonlinearitySpec builtin_zero();
NonlinearitySpec builtin_linear(double b);
NonlinearitySpec builtin_loglim(double b, double c);
NonlinearitySpec builtin_saturated_tanh(double kappa);
NonlinearitySpec builtin_lipschitz_sin(double kappa);

/// Parses "name" or "name(arg1[,arg2])". Throws std::invalid_argument for
/// unknown names or bad arity.
NonlinearitySpec builtin(const std::string& name);

/// User-supplied g from expression strings in r. If gprime_expr is empty,
/// g' falls back to a central difference with step 1e-6. alpha/beta/p/
/// seminorm must be supplied or estimated by the caller.
NonlinearitySpec from_expressions(const std::string& g_expr, const std::string& gprime_expr,
                                  double p);

/// Empirical lower bound on [g']_p from stratified random pairs in [-R, R]
/// (uniform pairs plus log-spaced near pairs). Deterministic for fixed seed.
double estimate_holder(const NonlinearitySpec& spec, double p, double R = 1e3,
                       int samples = 20000, unsigned long long seed = 0x5EED);

/// Linearization remainder g(y + dy) - g(y) - g'(y) dy.
inline double linearization_remainder(const NonlinearitySpec& g, double y, double dy) {
    return g.g(y + dy) - g.g(y) - g.gprime(y) * dy;
}

} // namespace heatls
