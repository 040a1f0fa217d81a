#include "heatls/nonlinearity.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "heatls/expr.hpp"

namespace heatls {

double GrowthBound::operator()(double r) const {
    return alpha + beta * std::pow(std::log1p(std::fabs(r)), 1.5);
}

NonlinearitySpec builtin_zero() {
    NonlinearitySpec s;
    s.name = "zero";
    s.g = [](double) { return 0.0; };
    s.gprime = [](double) { return 0.0; };
    s.alpha = 0.0;
    s.beta = 0.0;
    s.p = 1.0;
    s.holder_seminorm = 0.0;
    return s;
}

NonlinearitySpec builtin_linear(double b) {
    NonlinearitySpec s;
    s.name = "linear(" + std::to_string(b) + ")";
    s.g = [b](double r) { return b * r; };
    s.gprime = [b](double) { return b; };
    s.alpha = std::fabs(b);
    s.beta = 0.0;
    s.p = 1.0;
    s.holder_seminorm = 0.0;
    return s;
}

NonlinearitySpec builtin_loglim(double b, double c) {
    NonlinearitySpec s;
    s.name = "loglim(" + std::to_string(b) + "," + std::to_string(c) + ")";
    s.g = [b, c](double r) {
        return b * r + c * r * std::pow(std::log1p(std::fabs(r)), 1.5);
    };
    s.gprime = [b, c](double r) {
        const double a = std::fabs(r);
        const double L = std::log1p(a);
        return b + c * (std::pow(L, 1.5) + 1.5 * a * std::sqrt(L) / (1.0 + a));
    };
    // |g'| <= |b| + 1.5c + 2.5c ln^{3/2}(1+|r|), using sqrt(L) <= 1 + L^{3/2}.
    s.alpha = std::fabs(b) + 1.5 * std::fabs(c);
    s.beta = 2.5 * std::fabs(c);
    s.p = 1.0;
    // sup |g''| has no convenient closed form; dense one-time numeric sup.
    {
        double m = 0.0;
        const auto& gp = s.gprime;
        double prev = gp(0.0);
        const int n = 200000;
        for (int i = 1; i <= n; ++i) {
            const double r = 50.0 * i / n;
            const double cur = gp(r);
            m = std::max(m, std::fabs(cur - prev) / (50.0 / n));
            prev = cur;
        }
        s.holder_seminorm = m;
    }
    return s;
}

NonlinearitySpec builtin_saturated_tanh(double kappa) {
    NonlinearitySpec s;
    s.name = "saturated_tanh(" + std::to_string(kappa) + ")";
    s.g = [kappa](double r) { return kappa * std::tanh(r); };
    s.gprime = [kappa](double r) {
        const double t = std::tanh(r);
        return kappa * (1.0 - t * t);
    };
    s.alpha = std::fabs(kappa);
    s.beta = 0.0;
    s.p = 1.0;
    // sup|g''| = kappa * max|2 tanh (1-tanh^2)| = 4 kappa / (3 sqrt 3).
    s.holder_seminorm = 4.0 * std::fabs(kappa) / (3.0 * std::sqrt(3.0));
    return s;
}

NonlinearitySpec builtin_lipschitz_sin(double kappa) {
    NonlinearitySpec s;
    s.name = "lipschitz_sin(" + std::to_string(kappa) + ")";
    s.g = [kappa](double r) { return kappa * std::sin(r); };
    s.gprime = [kappa](double r) { return kappa * std::cos(r); };
    s.alpha = std::fabs(kappa);
    s.beta = 0.0;
    s.p = 0.0;
    s.holder_seminorm = 2.0 * std::fabs(kappa);  // [g']_0 = 2 sup|g'|
    return s;
}

NonlinearitySpec builtin(const std::string& name) {
    const auto open = name.find('(');
    std::string head = name.substr(0, open);
    std::vector<double> args;
    if (open != std::string::npos) {
        const auto close = name.rfind(')');
        if (close == std::string::npos || close < open)
            throw std::invalid_argument("builtin nonlinearity: unbalanced parentheses in '" +
                                        name + "'");
        std::string body = name.substr(open + 1, close - open - 1);
        std::size_t pos = 0;
        while (pos < body.size()) {
            std::size_t comma = body.find(',', pos);
            if (comma == std::string::npos) comma = body.size();
            args.push_back(std::stod(body.substr(pos, comma - pos)));
            pos = comma + 1;
        }
    }
    auto want = [&](std::size_t n) {
        if (args.size() != n)
            throw std::invalid_argument("builtin nonlinearity '" + head + "' expects " +
                                        std::to_string(n) + " argument(s)");
    };
    if (head == "zero") {
        want(0);
        return builtin_zero();
    }
    if (head == "linear") {
        want(1);
        return builtin_linear(args[0]);
    }
    if (head == "loglim") {
        want(2);
        return builtin_loglim(args[0], args[1]);
    }
    if (head == "saturated_tanh") {
        want(1);
        return builtin_saturated_tanh(args[0]);
    }
    if (head == "lipschitz_sin") {
        want(1);
        return builtin_lipschitz_sin(args[0]);
    }
    throw std::invalid_argument("unknown builtin nonlinearity '" + head + "'");
}

NonlinearitySpec from_expressions(const std::string& g_expr, const std::string& gprime_expr,
                                  double p) {
    NonlinearitySpec s;
    s.name = "expr:" + g_expr;
    const auto ge = expr::parse(g_expr, "r");
    s.g = [ge](double r) { return ge(r); };
    if (!gprime_expr.empty()) {
        const auto gpe = expr::parse(gprime_expr, "r");
        s.gprime = [gpe](double r) { return gpe(r); };
    } else {
        // Documented finite-difference fallback, step 1e-6.
        s.gprime = [ge](double r) { return (ge(r + 1e-6) - ge(r - 1e-6)) / 2e-6; };
    }
    if (std::fabs(s.g(0.0)) > 1e-12)
        throw std::invalid_argument("user nonlinearity must satisfy g(0) = 0");
    s.p = p;
    s.holder_seminorm = estimate_holder(s, p > 0 ? p : 1.0);
    return s;
}

double estimate_holder(const NonlinearitySpec& spec, double p, double R, int samples,
                       unsigned long long seed) {
    if (!(p > 0.0 && p <= 1.0))
        throw std::invalid_argument("estimate_holder: p must lie in (0,1]");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-R, R);
    double sup = 0.0;
    auto probe = [&](double a, double b) {
        if (a == b) return;
        const double num = std::fabs(spec.gprime(a) - spec.gprime(b));
        const double den = std::pow(std::fabs(a - b), p);
        if (den > 0.0) sup = std::max(sup, num / den);
    };
    for (int i = 0; i < samples; ++i) probe(uni(rng), uni(rng));
    // Near pairs: |a-b| log-spaced down to 1e-6 around stratified centers.
    const int decades = 7;
    for (int i = 0; i < samples / 2; ++i) {
        const double x = uni(rng);
        const double d = std::pow(10.0, -6.0 + (decades * (i % 64)) / 64.0 * 6.0 / decades);
        probe(x, x + d);
    }
    return sup;
}

} // namespace heatls
