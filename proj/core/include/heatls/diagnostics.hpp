#pragma once

#include <string>
#include <vector>

#include "heatls/leastsquares.hpp"

namespace heatls {

/// q_k = ln(sqrtE_{k+1}/sqrtE_k) / ln(sqrtE_k/sqrtE_{k-1}) for interior k.
/// Entries with E at or below the floor, or with denominators under 1e-12 in
/// magnitude, are dropped. Fewer than three usable points yields {}.
std::vector<double> order_estimate(const std::vector<double>& E_trace, double floor = 0.0);

struct C1Fit {
    double value = 0.0;  // least-squares (mean) fit of the per-step constants
    double lo = 0.0;
    double hi = 0.0;
    int count = 0;
};

/// Per-step contraction constants (sqrtE_{k+1} - |1-l_k| sqrtE_k) /
/// (l_k^(1+p) sqrtE_k^(1+p)) over steps with E above the floor.
C1Fit fit_c1(const std::vector<double>& E_trace, const std::vector<double>& lambdas, double p,
             double floor = 0.0);

struct ConvergenceReport {
    std::vector<double> E_trace;
    std::vector<double> lambda_trace;
    std::vector<double> orders;
    C1Fit c1;
    double E_floor = 0.0;
    int k0_predicted = -1;
    int k0_observed = -1;
    double final_order = 0.0;
};

/// Extracts the final fixed-s phase of a least-squares run and derives the
/// order trace, the contraction fit, and predicted-vs-observed onset of the
/// superlinear regime (p > 0 only).
ConvergenceReport analyze_leastsquares(const LSResult& result, double p, double tol_sqrtE);

struct RefinementRow {
    int nx = 0, nt = 0;
    double terminal_l2 = 0.0;
    double terminal_rel = 0.0;
    double E_floor = 0.0;       // strict residual of the exported pair
    double sqrtE_final = 0.0;
    double monitored_est1 = 0.0;
    int iterations = 0;
    bool converged = false;
    double seconds = 0.0;
};

struct RefinementTable {
    std::vector<RefinementRow> rows;
};

void write_markdown_report(const ConvergenceReport& report, const RefinementTable* refinement,
                           const std::string& path);
/// Plot-ready long format: series,x,y.
void write_long_csv(const ConvergenceReport& report, const std::string& path);
void write_refinement_csv(const RefinementTable& table, const std::string& path);

} // namespace heatls
