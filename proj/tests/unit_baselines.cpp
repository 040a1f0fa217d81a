#include <doctest.h>

#include <cmath>

#include "heatls/baselines.hpp"

using namespace heatls;

namespace {

const SpatialFunction kSin{[](double x) { return std::sin(M_PI * x); },
                           [](double x) { return M_PI * std::cos(M_PI * x); }};

LSContext make_ctx(const NonlinearitySpec& g, double s = 1.0, int n = 32, double T = 0.5) {
    auto grid = make_grid(n, n, T, {0.2, 0.8});
    WeightParams wp;
    wp.s = s;
    return LSContext(grid,
                     WeightSet(wp, {grid->omega_a(), grid->omega_b()}, grid->T(),
                               {true, true, 0.0}),
                     g);
}

ControlPair zero_pair(const LSContext& ctx) {
    ControlPair p{Field(ctx.grid_ptr(), true), Field(ctx.grid_ptr(), true), {}, {}, {}, {},
                  0.0, PairSpace::A};
    ctx.refresh_sweeps(p);
    p.r.assign(ctx.grid().quad_count(), 0.0);
    p.f_all.assign(ctx.grid().quad_count(), 0.0);
    return p;
}

double max_dof_gap(const Field& a, const Field& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.dof_count(); ++i)
        m = std::max(m, std::fabs(a.dof(i) - b.dof(i)));
    return m;
}

} // namespace

TEST_CASE("picard with g = 0 reaches its fixed point in one step") {
    LSContext ctx = make_ctx(builtin_zero());
    const ControlPair y1 = picard_step(ctx, zero_pair(ctx), kSin);
    CHECK(y1.E == 0.0);
    const ControlPair y2 = picard_step(ctx, y1, kSin);
    CHECK(max_dof_gap(y1.y, y2.y) <= 1e-12);
    CHECK(y1.y.value(0, 16) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("picard contraction on small Lipschitz data") {
    LSContext ctx = make_ctx(builtin_lipschitz_sin(0.5));
    ControlPair prev = picard_step(ctx, zero_pair(ctx), kSin);
    double last_diff = 1e300;
    for (int k = 0; k < 6; ++k) {
        const ControlPair next = picard_step(ctx, prev, kSin);
        double diff = 0.0;
        for (std::size_t q = 0; q < next.y_v.size(); ++q)
            diff = std::max(diff, std::fabs(next.y_v[q] - prev.y_v[q]));
        CHECK(diff < last_diff);
        last_diff = diff;
        prev = next;
    }
    CHECK(std::sqrt(prev.E) <= 1e-4);
}

TEST_CASE("every baseline iterate is null controlled") {
    LSContext ctx = make_ctx(builtin_lipschitz_sin(0.5));
    ControlPair pair = zero_pair(ctx);
    for (int k = 0; k < 3; ++k) {
        pair = picard_step(ctx, pair, kSin);
        CHECK(pair.y.spatial_l2(ctx.grid().nt()) <= 1e-8);
    }
}

TEST_CASE("undamped newton solves a linear reaction in one step") {
    LSContext ctx = make_ctx(builtin_linear(0.5));
    ControlPair pair = ctx.initialize_linear(kSin);
    REQUIRE(pair.E > 0.0);
    newton_step(ctx, pair);
    CHECK(pair.E <= 1e-25);
}

TEST_CASE("newton equals the damped iterate whenever lambda = 1") {
    // For a linear reaction the line search lands exactly on lambda = 1, so
    // the two updates coincide dof for dof.
    LSContext ctx = make_ctx(builtin_linear(0.5));
    ControlPair damped = ctx.initialize_linear(kSin);
    ControlPair undamped = damped;

    const MinimalPair mp = ctx.minimal_pair(damped);
    const LineSearchResult ls = ctx.line_search(damped, mp, 2.0);
    REQUIRE(ls.lambda == 1.0);
    ctx.apply_step(damped, mp, ls.lambda);
    newton_step(ctx, undamped);
    CHECK(max_dof_gap(damped.y, undamped.y) <= 1e-12);
    CHECK(std::fabs(damped.E - undamped.E) <= 1e-12 * (1.0 + damped.E));
}

TEST_CASE("variant linearization: linear case and g = 0 reduce to known pairs") {
    // linear g: the source g'(y) y - g(y) vanishes, so the variant step is the
    // controlled pair of the linear equation; with g = 0 it equals picard's.
    LSContext lin = make_ctx(builtin_linear(0.7));
    const ControlPair start = zero_pair(lin);
    const ControlPair v1 = variant_step(lin, start, kSin);
    CHECK(v1.E <= 1e-20);

    LSContext zero = make_ctx(builtin_zero());
    const ControlPair a = variant_step(zero, zero_pair(zero), kSin);
    const ControlPair b = picard_step(zero, zero_pair(zero), kSin);
    CHECK(max_dof_gap(a.y, b.y) == 0.0);
}

TEST_CASE("variant iteration stagnates at a zero of the energy") {
    LSContext ctx = make_ctx(builtin_lipschitz_sin(0.5));
    ControlPair pair = zero_pair(ctx);
    for (int k = 0; k < 10; ++k) pair = variant_step(ctx, pair, kSin);
    CHECK(std::sqrt(pair.E) <= 1e-6);
}

TEST_CASE("simple fixed-point map: one-step fixed point for g = 0") {
    LSContext ctx = make_ctx(builtin_zero());
    const ControlPair k1 = fixedpointK_step(ctx, zero_pair(ctx), kSin);
    const ControlPair k2 = fixedpointK_step(ctx, k1, kSin);
    CHECK(max_dof_gap(k1.y, k2.y) == 0.0);
}

TEST_CASE("simple fixed-point map contracts harder as s grows") {
    double prev_ratio = 1e300;
    for (const double s : {1.0, 2.0, 4.0}) {
        LSContext ctx = make_ctx(builtin_lipschitz_sin(1.0), s);
        ControlPair z1 = zero_pair(ctx);
        ControlPair z2 = ctx.initialize_cutoff(kSin);
        const double ratio = fixedpointK_contraction(ctx, z1, z2, kSin);
        CHECK(ratio < prev_ratio);
        prev_ratio = ratio;
    }
    CHECK(prev_ratio < 1.0);
}

TEST_CASE("fixed-point iteration converges for Lipschitz g at large s") {
    LSContext ctx = make_ctx(builtin_lipschitz_sin(1.0), 2.0);
    ControlPair pair = zero_pair(ctx);
    for (int k = 0; k < 12; ++k) pair = fixedpointK_step(ctx, pair, kSin);
    CHECK(std::sqrt(pair.E) <= 1e-5);
}

TEST_CASE("run_baseline reports a structured trace and classification") {
    auto grid = make_grid(16, 16, 0.5, {0.2, 0.8});
    WeightParams wp;
    BaselineConfig bc;
    bc.max_iter = 10;
    const BaselineResult res = run_baseline(BaselineKind::PicardGtilde, grid, wp,
                                            {true, true, 0.0}, builtin_lipschitz_sin(0.3),
                                            kSin, bc);
    CHECK(res.converged);
    CHECK(!res.diverged);
    CHECK(res.method == std::string("picard"));
    CHECK(res.records.size() >= 2);
    CHECK(res.terminal_l2 <= 1e-8);
}

TEST_CASE("amplified anti-dissipative data: picard diverges, damped solver converges") {
    // Program-scale contrast: the fixed-point linearization loses contraction
    // while the damped iteration (with its adaptive Carleman parameter)
    // drives the residual to zero on the same instance.
    auto grid = make_grid(32, 32, 1.0, {0.2, 0.8});
    WeightParams wp;
    wp.s = 1.5;
    const SpatialFunction u0{[](double x) { return 30.0 * std::sin(M_PI * x); },
                             [](double x) { return 30.0 * M_PI * std::cos(M_PI * x); }};
    const NonlinearitySpec g = builtin_loglim(0.0, -4.0);

    BaselineConfig bc;
    bc.max_iter = 40;
    bc.M_cap = 50.0;
    const BaselineResult picard =
        run_baseline(BaselineKind::PicardGtilde, grid, wp, {true, true, 0.0}, g, u0, bc);
    CHECK(picard.diverged);

    // Fixed-s undamped Newton cannot follow the required Carleman growth.
    const BaselineResult newton =
        run_baseline(BaselineKind::NewtonUndamped, grid, wp, {true, true, 0.0}, g, u0, bc);
    CHECK(newton.diverged);

    LSConfig cfg;
    cfg.s_init = 1.5;
    cfg.s_growth = 2.0;
    cfg.M_cap = 50.0;
    const LSResult ls = leastsquares_solve(grid, wp, {true, true, 0.0}, g, u0, cfg);
    CHECK(ls.converged);
    CHECK(ls.restarts >= 1);
}

TEST_CASE("weighted picard shares the picard implementation") {
    auto grid = make_grid(16, 16, 0.5, {0.2, 0.8});
    WeightParams wp;
    BaselineConfig bc;
    bc.max_iter = 5;
    const BaselineResult a = run_baseline(BaselineKind::PicardGtilde, grid, wp,
                                          {true, true, 0.0}, builtin_lipschitz_sin(0.3),
                                          kSin, bc);
    const BaselineResult b = run_baseline(BaselineKind::WeightedPicard, grid, wp,
                                          {true, true, 0.0}, builtin_lipschitz_sin(0.3),
                                          kSin, bc);
    CHECK(a.pair.E == b.pair.E);
    CHECK(b.method == std::string("weighted_picard"));
}

TEST_CASE("baseline name round trip") {
    for (const auto kind : {BaselineKind::PicardGtilde, BaselineKind::NewtonUndamped,
                            BaselineKind::ControlledVariant, BaselineKind::FixedPointK,
                            BaselineKind::WeightedPicard})
        CHECK(baseline_from_name(baseline_name(kind)) == kind);
    CHECK_THROWS_AS(baseline_from_name("gradient_descent"), std::invalid_argument);
}
