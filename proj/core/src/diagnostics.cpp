#include "heatls/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

namespace heatls {

std::vector<double> order_estimate(const std::vector<double>& E_trace, double floor) {
    std::vector<double> sq;
    sq.reserve(E_trace.size());
    for (const double E : E_trace) {
        if (E <= floor || !std::isfinite(E)) break;  // post-floor tail ignored
        sq.push_back(std::sqrt(E));
    }
    if (sq.size() < 3) return {};
    std::vector<double> q;
    for (std::size_t k = 1; k + 1 < sq.size(); ++k) {
        const double den = std::log(sq[k] / sq[k - 1]);
        if (std::fabs(den) < 1e-12) continue;
        q.push_back(std::log(sq[k + 1] / sq[k]) / den);
    }
    return q;
}

C1Fit fit_c1(const std::vector<double>& E_trace, const std::vector<double>& lambdas, double p,
             double floor) {
    C1Fit fit;
    fit.lo = std::numeric_limits<double>::infinity();
    fit.hi = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (std::size_t k = 0; k + 1 < E_trace.size() && k < lambdas.size(); ++k) {
        if (E_trace[k] <= floor || E_trace[k + 1] <= floor) break;
        const double lam = lambdas[k];
        if (!(lam > 0.0)) continue;
        const double prev = std::sqrt(E_trace[k]);
        const double next = std::sqrt(E_trace[k + 1]);
        const double den = std::pow(lam, 1.0 + p) * std::pow(prev, 1.0 + p);
        if (!(den > 0.0)) continue;
        const double c = (next - std::fabs(1.0 - lam) * prev) / den;
        sum += c;
        fit.lo = std::min(fit.lo, c);
        fit.hi = std::max(fit.hi, c);
        ++fit.count;
    }
    if (fit.count == 0) {
        fit.lo = fit.hi = 0.0;
        return fit;
    }
    fit.value = sum / fit.count;
    return fit;
}

ConvergenceReport analyze_leastsquares(const LSResult& result, double p, double tol_sqrtE) {
    ConvergenceReport rep;
    for (std::size_t i = result.final_phase_begin; i < result.records.size(); ++i)
        rep.E_trace.push_back(result.records[i].E);
    rep.lambda_trace = result.lambdas;
    rep.E_floor = std::max(1e-2 * tol_sqrtE * tol_sqrtE, result.E_strict > 0 ? 0.0 : 0.0);
    rep.E_floor = std::max(rep.E_floor, 1e-30 * (rep.E_trace.empty() ? 1.0 : rep.E_trace[0]));
    rep.orders = order_estimate(rep.E_trace, rep.E_floor);
    rep.c1 = fit_c1(rep.E_trace, rep.lambda_trace, p, rep.E_floor);
    if (!rep.orders.empty()) rep.final_order = rep.orders.back();

    if (p > 0.0 && rep.c1.value > 0.0 && !rep.E_trace.empty()) {
        const double c2 = std::pow(rep.c1.value, 1.0 / p);
        rep.k0_predicted = predicted_k0(rep.E_trace[0], c2, p);
        for (std::size_t i = 0; i < rep.orders.size(); ++i)
            if (rep.orders[i] >= 1.5) {
                // orders[i] estimates the rate at trace index i+1
                rep.k0_observed = static_cast<int>(i) + 1;
                break;
            }
    }
    return rep;
}

void write_markdown_report(const ConvergenceReport& report, const RefinementTable* refinement,
                           const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "# Convergence report\n\n";
    out << "| k | E | sqrtE | lambda | order |\n|---|---|---|---|---|\n";
    for (std::size_t k = 0; k < report.E_trace.size(); ++k) {
        out << "| " << k << " | " << report.E_trace[k] << " | " << std::sqrt(report.E_trace[k])
            << " | " << (k < report.lambda_trace.size() ? std::to_string(report.lambda_trace[k])
                                                        : std::string("-"))
            << " | "
            << (k >= 1 && k - 1 < report.orders.size() ? std::to_string(report.orders[k - 1])
                                                       : std::string("-"))
            << " |\n";
    }
    out << "\n- fitted c1: " << report.c1.value << " (range [" << report.c1.lo << ", "
        << report.c1.hi << "], n=" << report.c1.count << ")\n";
    out << "- E floor: " << report.E_floor << "\n";
    out << "- final order estimate: " << report.final_order << "\n";
    if (report.k0_predicted >= 0)
        out << "- superlinear onset: predicted k0=" << report.k0_predicted
            << ", observed=" << report.k0_observed << "\n";
    if (refinement) {
        out << "\n## Refinement study\n\n";
        out << "| nx | nt | terminal | terminal/|u0| | E_strict | sqrtE | iters | converged |\n";
        out << "|---|---|---|---|---|---|---|---|\n";
        for (const auto& r : refinement->rows)
            out << "| " << r.nx << " | " << r.nt << " | " << r.terminal_l2 << " | "
                << r.terminal_rel << " | " << r.E_floor << " | " << r.sqrtE_final << " | "
                << r.iterations << " | " << (r.converged ? "yes" : "no") << " |\n";
    }
}

void write_long_csv(const ConvergenceReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out.precision(17);
    out << "series,x,y\n";
    for (std::size_t k = 0; k < report.E_trace.size(); ++k)
        out << "sqrtE," << k << ',' << std::sqrt(report.E_trace[k]) << '\n';
    for (std::size_t k = 0; k < report.lambda_trace.size(); ++k)
        out << "lambda," << k << ',' << report.lambda_trace[k] << '\n';
    for (std::size_t k = 0; k < report.orders.size(); ++k)
        out << "order," << k + 1 << ',' << report.orders[k] << '\n';
}

void write_refinement_csv(const RefinementTable& table, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out.precision(17);
    out << "nx,nt,terminal_l2,terminal_rel,E_strict,sqrtE_final,monitored_est1,iterations,"
           "converged,seconds\n";
    for (const auto& r : table.rows)
        out << r.nx << ',' << r.nt << ',' << r.terminal_l2 << ',' << r.terminal_rel << ','
            << r.E_floor << ',' << r.sqrtE_final << ',' << r.monitored_est1 << ','
            << r.iterations << ',' << (r.converged ? 1 : 0) << ',' << r.seconds << '\n';
}

} // namespace heatls
