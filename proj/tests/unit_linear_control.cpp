#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "heatls/linear_control.hpp"

using namespace heatls;

namespace {

struct Setup {
    std::shared_ptr<const SpaceTimeGrid> grid;
    WeightSet weights;
    WeightedQuadrature wq;
    SpatialFunction u0;

    explicit Setup(int n = 32, double s = 1.0, WeightOptions opts = {true, true, 0.0})
        : grid(make_grid(n, n, 0.5, {0.2, 0.8})),
          weights(WeightParams{s, 1.0, -1.0, 1.0, -1.0},
                  {grid->omega_a(), grid->omega_b()}, grid->T(), opts),
          wq(grid, weights),
          u0{[](double x) { return std::sin(M_PI * x); },
             [](double x) { return M_PI * std::cos(M_PI * x); }} {}

    LinearControlProblem problem(bool with_u0 = true) {
        LinearControlProblem p;
        p.grid = grid;
        p.weights = &weights;
        p.wq = &wq;
        if (with_u0) p.z0 = &u0;
        return p;
    }
};

Eigen::VectorXd reduced_vector(const PSystem& sys, const Field& p) {
    Eigen::VectorXd v(sys.full_of_red.size());
    for (std::size_t k = 0; k < sys.full_of_red.size(); ++k)
        v(k) = p.dof(static_cast<std::size_t>(sys.full_of_red[k]));
    return v;
}

} // namespace

TEST_CASE("zero data produces the zero solution") {
    Setup su(16);
    LinearControlProblem prob = su.problem(false);
    const PSystem sys = assemble_p_system(prob);
    CHECK(sys.rhs.norm() == 0.0);
    const AdjointSolution adj = solve_adjoint(prob, sys);
    const ControlledSolution sol = reconstruct(prob, adj);
    CHECK(sol.J == 0.0);
    for (const double z : sol.z_q) CHECK(z == 0.0);
    for (const double v : sol.v_q) CHECK(v == 0.0);
}

TEST_CASE("assembled system is symmetric") {
    Setup su(16);
    LinearControlProblem prob = su.problem();
    const PSystem sys = assemble_p_system(prob);
    const Eigen::SparseMatrix<double> D = sys.M - Eigen::SparseMatrix<double>(sys.M.transpose());
    double dmax = 0.0, mmax = 0.0;
    for (int c = 0; c < D.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(D, c); it; ++it)
            dmax = std::max(dmax, std::fabs(it.value()));
    for (int c = 0; c < sys.M.outerSize(); ++c)
        for (Eigen::SparseMatrix<double>::InnerIterator it(sys.M, c); it; ++it)
            mmax = std::max(mmax, std::fabs(it.value()));
    CHECK(dmax <= 1e-12 * mmax);
}

TEST_CASE("assembled system is positive definite on the coarsest mesh") {
    Setup su(8);
    LinearControlProblem prob = su.problem();
    const PSystem sys = assemble_p_system(prob);
    const Eigen::MatrixXd dense = Eigen::MatrixXd(sys.M);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(dense);
    REQUIRE(eig.info() == Eigen::Success);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("adjoint solve is linear in the data") {
    Setup su(16);
    SpatialFunction za{[](double x) { return std::sin(M_PI * x); },
                       [](double x) { return M_PI * std::cos(M_PI * x); }};
    SpatialFunction zb{[](double x) { return x * (1.0 - x); },
                       [](double x) { return 1.0 - 2.0 * x; }};
    SpatialFunction zab{[&](double x) { return za.f(x) + zb.f(x); },
                        [&](double x) { return za.df(x) + zb.df(x); }};
    SpatialFunction za2{[&](double x) { return 2.0 * za.f(x); },
                        [&](double x) { return 2.0 * za.df(x); }};

    auto solve_for = [&](const SpatialFunction& z0) {
        LinearControlProblem prob = su.problem(false);
        prob.z0 = &z0;
        const PSystem sys = assemble_p_system(prob);
        return solve_adjoint(prob, sys).p;
    };
    const Field pa = solve_for(za), pb = solve_for(zb), pab = solve_for(zab), pa2 = solve_for(za2);

    double scale = 0.0;
    for (std::size_t i = 0; i < pa.dof_count(); ++i)
        scale = std::max(scale, std::fabs(pa.dof(i)) + std::fabs(pb.dof(i)));
    for (std::size_t i = 0; i < pa.dof_count(); ++i) {
        CHECK(pab.dof(i) == doctest::Approx(pa.dof(i) + pb.dof(i)).epsilon(0).scale(scale * 1e-9));
        CHECK(pa2.dof(i) == doctest::Approx(2.0 * pa.dof(i)).epsilon(0).scale(scale * 1e-9));
    }
}

TEST_CASE("duality identity holds for random discrete test functions") {
    Setup su(32);
    LinearControlProblem prob = su.problem();
    const NullControlResult nc = solve_null_control(prob);
    CHECK(transposition_residual(prob, nc.adjoint, 10, 2024) <= 1e-8);
}

TEST_CASE("Galerkin duality and the cost identity at the solution") {
    Setup su(32);
    LinearControlProblem prob = su.problem();
    const PSystem sys = assemble_p_system(prob);
    const AdjointSolution adj = solve_adjoint(prob, sys);
    const ControlledSolution sol = reconstruct(prob, adj);

    const Eigen::VectorXd pr = reduced_vector(sys, adj.p);
    const double app = pr.dot(sys.M * pr);
    const double lp = sys.rhs.dot(pr);
    CHECK(app == doctest::Approx(lp).epsilon(1e-9));         // a(p,p) = l(p)
    CHECK(sol.J == doctest::Approx(0.5 * app).epsilon(1e-6));  // J = a(p,p)/2
}

TEST_CASE("optimality of the weighted cost under feasible perturbations") {
    Setup su(32);
    LinearControlProblem prob = su.problem();
    const NullControlResult nc = solve_null_control(prob);
    const OptimalityReport rep = verify_optimality(prob, nc.adjoint, 10, 99);
    CHECK(rep.all_increase);
    CHECK(rep.max_first_order_rel <= 1e-6);
    for (const auto& c : rep.checks) CHECK(c.delta_J >= -1e-8 * c.J_base);
}

TEST_CASE("control field vanishes identically outside the control region") {
    Setup su(32);
    LinearControlProblem prob = su.problem();
    const NullControlResult nc = solve_null_control(prob);
    const auto& g = *su.grid;
    for (int j = 0; j <= g.nt(); ++j)
        for (int i = 0; i <= g.nx(); ++i)
            if (i <= g.omega_begin() || i >= g.omega_end()) {
                CHECK(nc.solution.v.value(j, i) == 0.0);
                CHECK(nc.solution.v.deriv(j, i) == 0.0);
            }
    // outside the closure the function itself is exactly zero
    CHECK(nc.solution.v.jet(g.omega_a() * 0.5, 0.21).v == 0.0);
    CHECK(nc.solution.v.jet(g.omega_b() + 0.5 * (1 - g.omega_b()), 0.33).v == 0.0);
    // and it is not the zero field
    CHECK(nc.solution.norm_rho0_v > 0.0);
}

TEST_CASE("admissibility gate raises NeedLargerS") {
    Setup su(16);
    LinearControlProblem prob = su.problem();
    std::vector<double> A(su.grid->quad_count(), 8.0);
    prob.A = &A;
    prob.A_sup = 8.0;
    CHECK_THROWS_AS(solve_null_control(prob), NeedLargerS);
    try {
        solve_null_control(prob);
    } catch (const NeedLargerS& e) {
        CHECK(e.required == doctest::Approx(std::pow(8.0, 2.0 / 3.0)));
    }
    prob.enforce_admissibility = false;
    CHECK_NOTHROW(solve_null_control(prob));
}

TEST_CASE("terminal trace shrinks under refinement (linear problem)") {
    double prev = -1.0;
    for (const int n : {16, 32}) {
        Setup su(n);
        LinearControlProblem prob = su.problem();
        const NullControlResult nc = solve_null_control(prob);
        const double rel = nc.solution.terminal_l2 / su.u0.l2(*su.grid);
        CHECK(rel <= 1e-3);
        if (prev >= 0.0) CHECK(rel <= prev / 3.0 + 1e-30);
        prev = rel;
    }
}

TEST_CASE("monitored estimate logs are finite and reported") {
    Setup su(16);
    LinearControlProblem prob = su.problem();
    const NullControlResult nc = solve_null_control(prob);
    CHECK(std::isfinite(nc.solution.est1_log_lhs));
    CHECK(std::isfinite(nc.solution.est1_log_rhs));
    CHECK(nc.solution.est1_ratio() > 0.0);
    CHECK(std::isfinite(nc.solution.est1bis_ratio()));
}
