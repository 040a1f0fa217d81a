#include <doctest.h>

#include <cmath>
#include <random>

#include "heatls/leastsquares.hpp"

using namespace heatls;

namespace {

const SpatialFunction kSin{[](double x) { return std::sin(M_PI * x); },
                           [](double x) { return M_PI * std::cos(M_PI * x); }};
const SpatialFunction kZero{[](double) { return 0.0; }, [](double) { return 0.0; }};

LSContext make_ctx(const NonlinearitySpec& g, double s = 1.0, int n = 32,
                   WeightOptions opts = {true, true, 0.0}) {
    auto grid = make_grid(n, n, 0.5, {0.2, 0.8});
    WeightParams wp;
    wp.s = s;
    return LSContext(grid, WeightSet(wp, {grid->omega_a(), grid->omega_b()}, grid->T(), opts),
                     g);
}

} // namespace

TEST_CASE("energy: zero pairs, cache recomputation, non-finite detection") {
    LSContext ctx = make_ctx(builtin_lipschitz_sin(1.0));
    const std::size_t n = ctx.grid().quad_count();

    std::vector<double> r(n, 0.0);
    CHECK(ctx.energy(r) == 0.0);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uni(-1, 1);
    for (double& v : r) v = uni(rng);
    const double e = ctx.energy(r);
    CHECK(e > 0.0);
    CHECK(ctx.energy_recomputed(r) == doctest::Approx(e).epsilon(1e-12));

    r[n / 2] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_WITH_AS(static_cast<void>(ctx.energy(r)),
                         doctest::Contains("non-finite residual at"), SolverError);
}

TEST_CASE("linear initializer: zero datum and the g = 0 case are exact") {
    LSContext zero_ctx = make_ctx(builtin_zero());
    const ControlPair p0 = zero_ctx.initialize_linear(kZero);
    CHECK(p0.E == 0.0);
    CHECK(p0.y.max_abs_value() == 0.0);

    const ControlPair plin = zero_ctx.initialize_linear(kSin);
    CHECK(plin.E == 0.0);  // residual is exactly g(y0) = 0
    CHECK(plin.y.value(0, 16) == doctest::Approx(std::sin(M_PI * 0.5)).epsilon(1e-14));
}

TEST_CASE("linear initializer: E equals the weighted norm of g(y0)") {
    LSContext ctx = make_ctx(builtin_lipschitz_sin(5.0));
    const ControlPair pair = ctx.initialize_linear(kSin);
    std::vector<double> gy(ctx.grid().quad_count());
    for (std::size_t q = 0; q < gy.size(); ++q) gy[q] = ctx.g().g(pair.y_v[q]);
    CHECK(pair.E == doctest::Approx(ctx.energy_recomputed(gy)).epsilon(1e-10));
    CHECK(pair.space == PairSpace::A);
}

TEST_CASE("cutoff initializer: exact datum, vanishing after T/2") {
    LSContext ctx = make_ctx(builtin_lipschitz_sin(1.0));
    const ControlPair zero = ctx.initialize_cutoff(kZero);
    CHECK(zero.E == 0.0);

    const ControlPair pair = ctx.initialize_cutoff(kSin);
    const auto& g = ctx.grid();
    for (int i = 0; i <= g.nx(); ++i)
        CHECK(pair.y.value(0, i) == doctest::Approx(kSin.f(g.x(i))).epsilon(1e-14));
    for (int j = 0; j <= g.nt(); ++j)
        if (g.t(j) >= 0.5 * g.T() - 1e-12)
            for (int i = 0; i <= g.nx(); ++i) {
                CHECK(pair.y.value(j, i) == 0.0);
                CHECK(pair.y.deriv(j, i) == 0.0);
            }
    CHECK(pair.E > 0.0);
}

TEST_CASE("minimal pair of a zero-residual pair vanishes") {
    LSContext ctx = make_ctx(builtin_lipschitz_sin(1.0));
    ControlPair pair = ctx.initialize_linear(kZero);
    const MinimalPair mp = ctx.minimal_pair(pair);
    for (const double v : mp.Y_v) CHECK(v == 0.0);
    CHECK(mp.log_a0_norm == -std::numeric_limits<double>::infinity());
}

TEST_CASE("directional derivative equals twice the energy") {
    for (auto g : {builtin_lipschitz_sin(1.0), builtin_loglim(0.0, 0.5)}) {
        LSContext ctx = make_ctx(g);
        ControlPair pair = ctx.initialize_cutoff(kSin);
        const MinimalPair mp = ctx.minimal_pair(pair);
        const double eta = 1e-4;
        auto energy_at = [&](double sgn) {
            std::vector<double> r(pair.r.size());
            for (std::size_t q = 0; q < r.size(); ++q) {
                const double ell = g.g(pair.y_v[q] + sgn * eta * mp.Y_v[q]) - g.g(pair.y_v[q]) -
                                   sgn * eta * g.gprime(pair.y_v[q]) * mp.Y_v[q];
                r[q] = (1.0 + sgn * eta) * pair.r[q] + ell;
            }
            return ctx.energy(r);
        };
        const double deriv = (energy_at(+1.0) - energy_at(-1.0)) / (2.0 * eta);
        CHECK(deriv == doctest::Approx(2.0 * pair.E).epsilon(1e-3));
    }
}

TEST_CASE("norm-bound monitor is finite and scales with sqrt(E)") {
    LSContext ctx = make_ctx(builtin_lipschitz_sin(2.0));
    ControlPair pair = ctx.initialize_cutoff(kSin);
    const MinimalPair mp = ctx.minimal_pair(pair);
    const double ratio_log = mp.log_a0_norm - 0.5 * std::log(pair.E);
    CHECK(std::isfinite(ratio_log));
    CHECK(mp.defect_norm >= 0.0);
    CHECK(mp.solve_residual <= 1e-10);
}

TEST_CASE("line search on a linear reaction finds lambda = 1 exactly") {
    LSContext ctx = make_ctx(builtin_linear(2.0));
    ControlPair pair = ctx.initialize_linear(kSin);
    REQUIRE(pair.E > 0.0);  // r = 2 y0
    const MinimalPair mp = ctx.minimal_pair(pair);
    const LineSearchResult ls = ctx.line_search(pair, mp, 2.0);
    CHECK(ls.lambda == 1.0);
    CHECK(ls.E_next == 0.0);  // remainder vanishes identically for linear g
    CHECK(ls.evaluations <= 40);
}

TEST_CASE("line search never loses to the endpoints") {
    LSContext ctx = make_ctx(builtin_loglim(0.0, 0.5));
    ControlPair pair = ctx.initialize_cutoff(kSin);
    const MinimalPair mp = ctx.minimal_pair(pair);
    const LineSearchResult ls = ctx.line_search(pair, mp, 2.0);
    CHECK(ls.lambda >= 0.0);
    CHECK(ls.lambda <= 2.0);
    CHECK(ls.E_next <= pair.E);
}

TEST_CASE("apply_step keeps the recursion consistent with the fields") {
    LSContext ctx = make_ctx(builtin_loglim(0.0, 0.5));
    ControlPair pair = ctx.initialize_cutoff(kSin);
    const double scale = std::sqrt(2.0 * pair.E);
    for (int k = 0; k < 3; ++k) {
        const MinimalPair mp = ctx.minimal_pair(pair);
        const LineSearchResult ls = ctx.line_search(pair, mp, 2.0);
        const double drift = ctx.apply_step(pair, mp, ls.lambda, scale);
        CHECK(drift <= 1e-8);
        CHECK(pair.E == doctest::Approx(ls.E_next).epsilon(1e-12));
    }
}

TEST_CASE("solve: linear reaction converges at the initial iterate") {
    auto grid = make_grid(32, 32, 0.5, {0.2, 0.8});
    WeightParams wp;
    const LSResult res =
        leastsquares_solve(grid, wp, {true, true, 0.0}, builtin_zero(), kSin, LSConfig{});
    CHECK(res.converged);
    CHECK(res.records.size() == 1);  // zero outer iterations
    CHECK(res.pair.E == 0.0);
}

TEST_CASE("solve: monotone decay, drift guard, and the lambda trace") {
    auto grid = make_grid(32, 32, 0.5, {0.2, 0.8});
    WeightParams wp;
    LSConfig cfg;
    cfg.init = LSInit::Cutoff;
    cfg.tol_sqrtE = 1e-10;
    const LSResult res = leastsquares_solve(grid, wp, {true, true, 0.0},
                                            builtin_loglim(0.0, 0.5), kSin, cfg);
    CHECK(res.converged);
    CHECK(res.max_drift <= 1e-8);
    for (std::size_t i = res.final_phase_begin + 1; i < res.records.size(); ++i)
        CHECK(res.records[i].E <= res.records[i - 1].E);
    CHECK(res.lambdas.size() + 1 == res.records.size() - res.final_phase_begin);
    CHECK(res.terminal_l2 <= 1e-6);
    CHECK(res.E_strict >= 0.0);
}

TEST_CASE("solve: update algebra matches the stored state") {
    auto grid = make_grid(16, 16, 0.5, {0.2, 0.8});
    WeightParams wp;
    LSConfig cfg;
    cfg.init = LSInit::Cutoff;
    cfg.record_directions = true;
    cfg.tol_sqrtE = 1e-10;
    const LSResult res = leastsquares_solve(grid, wp, {true, true, 0.0},
                                            builtin_loglim(0.0, 0.5), kSin, cfg);
    REQUIRE(res.converged);
    REQUIRE(res.directions.size() == res.lambdas.size());
    Field reconstructed = res.y_initial;
    for (std::size_t k = 0; k < res.lambdas.size(); ++k)
        reconstructed.axpy(-res.lambdas[k], res.directions[k]);
    double scale = 0.0;
    for (std::size_t i = 0; i < reconstructed.dof_count(); ++i)
        scale = std::max(scale, std::fabs(res.pair.y.dof(i)));
    for (std::size_t i = 0; i < reconstructed.dof_count(); ++i)
        CHECK(reconstructed.dof(i) ==
              doctest::Approx(res.pair.y.dof(i)).epsilon(0).scale(scale * 1e-10));
}

TEST_CASE("solve: admissibility restart grows s") {
    auto grid = make_grid(16, 16, 0.5, {0.2, 0.8});
    WeightParams wp;
    LSConfig cfg;
    cfg.s_init = 1.0;
    cfg.s_growth = 2.0;
    // |g'| = 8 requires s >= 4: two restarts from s = 1.
    const LSResult res =
        leastsquares_solve(grid, wp, {true, true, 0.0}, builtin_linear(8.0), kSin, cfg);
    CHECK(res.converged);
    CHECK(res.restarts == 2);
    CHECK(res.s_final == doctest::Approx(4.0));
}

TEST_CASE("minimal_pair signals NeedLargerS") {
    LSContext ctx = make_ctx(builtin_linear(8.0), 1.0);
    ControlPair pair = ctx.initialize_cutoff(kSin);
    CHECK_THROWS_AS(static_cast<void>(ctx.minimal_pair(pair)), NeedLargerS);
}

TEST_CASE("predicted_k0 formula") {
    CHECK(predicted_k0(0.25, 1.0, 1.0) == 1);    // 2 * c2 * sqrtE0 = 1 -> arg 0 -> 1
    CHECK(predicted_k0(1.0, 1.0, 1.0) == 3);     // c2 sqrtE0 = 1: floor(2*(2-1)) + 1
    CHECK(predicted_k0(6.25, 1.0, 1.0) == 9);    // c2 sqrtE0 = 2.5: floor(2*4) + 1
    CHECK(predicted_k0(1e-8, 1.0, 1.0) == 1);
    CHECK_THROWS_AS(predicted_k0(1.0, 1.0, 0.0), std::invalid_argument);
}
