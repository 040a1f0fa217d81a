#include <doctest.h>

#include <cmath>
#include <vector>

#include "heatls/diagnostics.hpp"

using namespace heatls;

TEST_CASE("order estimate reproduces synthetic rates exactly") {
    // geometric: E_k = 4^-k  ->  q = 1 everywhere
    std::vector<double> geo;
    for (int k = 0; k < 8; ++k) geo.push_back(std::pow(4.0, -k));
    for (const double q : order_estimate(geo)) CHECK(q == doctest::Approx(1.0).epsilon(1e-12));

    // quadratic: sqrtE_{k+1} = sqrtE_k^2 from 0.1  ->  q = 2 everywhere
    std::vector<double> quad;
    double sq = 0.1;
    for (int k = 0; k < 5; ++k) {
        quad.push_back(sq * sq);
        sq = sq * sq;
    }
    for (const double q : order_estimate(quad)) CHECK(q == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("order estimate edge cases") {
    CHECK(order_estimate({1.0, 0.5}).empty());
    CHECK(order_estimate({}).empty());
    // constant trace: denominators below 1e-12 are dropped
    CHECK(order_estimate({1.0, 1.0, 1.0, 1.0}).empty());
    // entries at/below the floor cut the usable range
    std::vector<double> tr{1.0, 1e-2, 1e-4, 1e-40, 1e-41};
    const auto q = order_estimate(tr, 1e-30);
    CHECK(q.size() == 1);
}

TEST_CASE("fit_c1 on exact damped-linear traces is zero") {
    // E_{k+1} = (1 - lambda)^2 E_k exactly (no remainder): c1 = 0.
    const double lam = 0.7;
    std::vector<double> E{1.0};
    std::vector<double> lams;
    for (int k = 0; k < 6; ++k) {
        E.push_back((1.0 - lam) * (1.0 - lam) * E.back());
        lams.push_back(lam);
    }
    const C1Fit fit = fit_c1(E, lams, 1.0);
    CHECK(fit.count == 6);
    CHECK(std::fabs(fit.value) <= 1e-12);
}

TEST_CASE("fit_c1 reduces to the geometric ratio for p = 0, lambda = 1") {
    std::vector<double> E{1.0, 0.25, 0.0625, 0.015625};
    std::vector<double> lams{1.0, 1.0, 1.0};
    const C1Fit fit = fit_c1(E, lams, 0.0);
    CHECK(fit.value == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(fit.lo == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(fit.hi == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("fit_c1 is scale invariant in the p = 0 case") {
    std::vector<double> E{1.0, 0.49, 0.2401, 0.117649};
    std::vector<double> lams{1.0, 1.0, 1.0};
    const double base = fit_c1(E, lams, 0.0).value;
    for (double& e : E) e *= 1e4;
    CHECK(fit_c1(E, lams, 0.0).value == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("report writers emit the documented formats") {
    ConvergenceReport rep;
    rep.E_trace = {1.0, 1e-2, 1e-6};
    rep.lambda_trace = {1.0, 0.9};
    rep.orders = order_estimate(rep.E_trace);
    rep.c1 = fit_c1(rep.E_trace, rep.lambda_trace, 1.0);

    write_long_csv(rep, "/tmp/heatls_trace_long.csv");
    std::ifstream in("/tmp/heatls_trace_long.csv");
    std::string header;
    std::getline(in, header);
    CHECK(header == "series,x,y");
    int lines = 0;
    std::string line;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 3 + 2 + 1);  // sqrtE + lambda + orders

    write_markdown_report(rep, nullptr, "/tmp/heatls_report.md");
    std::ifstream md("/tmp/heatls_report.md");
    std::string all((std::istreambuf_iterator<char>(md)), std::istreambuf_iterator<char>());
    CHECK(all.find("fitted c1") != std::string::npos);

    RefinementTable table;
    table.rows.push_back({16, 16, 1e-4, 1e-4, 1e-8, 1e-9, 0.9, 3, true, 0.1});
    write_refinement_csv(table, "/tmp/heatls_refine.csv");
    std::ifstream rf("/tmp/heatls_refine.csv");
    std::getline(rf, header);
    CHECK(header ==
          "nx,nt,terminal_l2,terminal_rel,E_strict,sqrtE_final,monitored_est1,iterations,"
          "converged,seconds");
}
