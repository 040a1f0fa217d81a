#include "heatls/linear_control.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "heatls/parallel.hpp"

namespace heatls {

namespace {

// exp(ln_scale + ln|v|) with v's sign; keeps huge*tiny products representable.
inline double scaled_value(double ln_scale, double v) {
    if (v == 0.0) return 0.0;
    const double m = std::exp(ln_scale + std::log(std::fabs(v)));
    return v > 0.0 ? m : -m;
}

} // namespace

double SpatialFunction::l2(const SpaceTimeGrid& g) const {
    double acc = 0.0;
    for (int ix = 0; ix < g.nx(); ++ix)
        for (int a = 0; a < g.nqx(); ++a) {
            const double v = f(g.quad_x(ix, a));
            acc += g.qx().weight[a] * g.hx() * v * v;
        }
    return std::sqrt(acc);
}

double SpatialFunction::h1_semi(const SpaceTimeGrid& g) const {
    double acc = 0.0;
    for (int ix = 0; ix < g.nx(); ++ix)
        for (int a = 0; a < g.nqx(); ++a) {
            const double v = df(g.quad_x(ix, a));
            acc += g.qx().weight[a] * g.hx() * v * v;
        }
    return std::sqrt(acc);
}

WeightedQuadrature::WeightedQuadrature(std::shared_ptr<const SpaceTimeGrid> grid,
                                       const WeightSet& w)
    : grid_(std::move(grid)) {
    const std::size_t n = grid_->quad_count();
    log_rho_.resize(n);
    ln_xi_.resize(n);
    const double t_cap = grid_->weight_time_cap();
    grid_->for_each_quad([&](std::size_t g, int, int, int, int, double x, double t, double) {
        const auto lw = w.eval(x, std::min(t, t_cap));
        log_rho_[g] = lw.log_rho;
        ln_xi_[g] = std::log(lw.xi);
    });
}

double WeightedQuadrature::norm_rho0(const std::vector<double>& vals) const {
    double acc = 0.0;
    grid_->for_each_quad([&](std::size_t g, int, int, int, int, double, double, double w) {
        const double term = scaled_value(log_rho0(g), vals[g]);
        acc += w * term * term;
    });
    return std::sqrt(acc);
}

double WeightedQuadrature::norm_rho0_omega_complement(const std::vector<double>& vals) const {
    double acc = 0.0;
    grid_->for_each_quad([&](std::size_t g, int ix, int, int, int, double, double, double w) {
        if (grid_->element_in_omega(ix)) return;
        const double term = scaled_value(log_rho0(g), vals[g]);
        acc += w * term * term;
    });
    return std::sqrt(acc);
}

LogValue WeightedQuadrature::norm_rho0_log(const std::vector<double>& vals) const {
    LogSum acc;
    grid_->for_each_quad([&](std::size_t g, int, int, int, int, double, double, double w) {
        if (vals[g] == 0.0) return;
        acc.add_log(std::log(w) + 2.0 * log_rho0(g) + 2.0 * std::log(std::fabs(vals[g])));
    });
    return acc.total().sqrt();
}

double LinearControlProblem::required_s() const {
    return std::max(std::pow(A_sup, 2.0 / 3.0), weights->s0());
}

void LinearControlProblem::check_s() const {
    if (!enforce_admissibility) return;
    const double req = required_s();
    if (weights->s() < req * (1.0 - 1e-12)) throw NeedLargerS(req);
}

// ---------------------------------------------------------------------------
// Assembly

PSystem assemble_p_system(const LinearControlProblem& prob) {
    const SpaceTimeGrid& g = *prob.grid;
    const WeightedQuadrature& wq = *prob.wq;
    const int nx = g.nx(), nt = g.nt();
    const int S = 2 * (nx + 1);
    const std::size_t nfull = static_cast<std::size_t>(nt + 1) * S;

    PSystem sys;
    sys.penalty = std::pow(prob.weights->s(), 3.0) * std::pow(prob.weights->lambda0(), 4.0);

    sys.red_of_full.assign(nfull, -1);
    for (int j = 0; j <= nt; ++j)
        for (int i = 0; i <= nx; ++i)
            for (int c = 0; c < 2; ++c) {
                if (c == 0 && (i == 0 || i == nx)) continue;  // p = 0 on the lateral boundary
                sys.red_of_full[static_cast<std::size_t>(j) * S + 2 * i + c] =
                    static_cast<int>(sys.full_of_red.size());
                sys.full_of_red.push_back(static_cast<int>(j) * S + 2 * i + c);
            }
    const int n = static_cast<int>(sys.full_of_red.size());

    // 1D basis tables at the quadrature nodes.
    const int nqx = g.nqx(), nqt = g.nqt();
    std::vector<std::array<double, 4>> Bv(nqx), Bxx(nqx);
    for (int a = 0; a < nqx; ++a) {
        HermiteBasis::eval(g.qx().node[a], g.hx(), Bv[a].data());
        HermiteBasis::eval_dxx(g.qx().node[a], g.hx(), Bxx[a].data());
    }
    std::vector<std::array<double, 2>> Nv(nqt);
    for (int b = 0; b < nqt; ++b) Nv[b] = {1.0 - g.qt().node[b], g.qt().node[b]};
    const double Ndt[2] = {-1.0 / g.ht(), 1.0 / g.ht()};

    const std::size_t nelem = static_cast<std::size_t>(nx) * nt;
    const std::size_t chunk = 1024;
    const std::size_t nchunks = (nelem + chunk - 1) / chunk;
    std::vector<std::vector<Eigen::Triplet<double>>> parts(nchunks);
    std::vector<Eigen::VectorXd> rhs_parts(nchunks, Eigen::VectorXd::Zero(n));

    parallel_chunks(nelem, chunk, [&](std::size_t ci, std::size_t lo, std::size_t hi) {
        auto& out = parts[ci];
        out.reserve((hi - lo) * 36);
        auto& rhs = rhs_parts[ci];
        double L[8], ph[8];
        int red[8];
        for (std::size_t e = lo; e < hi; ++e) {
            const int jt = static_cast<int>(e) / nx;
            const int ix = static_cast<int>(e) % nx;
            const bool in_omega = g.element_in_omega(ix);
            double Mloc[8][8] = {};
            double rloc[8] = {};
            for (int k = 0; k < 8; ++k) {
                const int a2 = k / 4, sb = k % 4;
                const int node = ix + sb / 2, comp = sb % 2;
                red[k] = sys.red_of_full[static_cast<std::size_t>(jt + a2) * S + 2 * node + comp];
            }
            for (int b = 0; b < nqt; ++b)
                for (int a = 0; a < nqx; ++a) {
                    const std::size_t q = g.quad_index(ix, jt, a, b);
                    const double w = g.quad_w(a, b);
                    const double Av = prob.A ? (*prob.A)[q] : 0.0;
                    const double wP = std::exp(-2.0 * wq.log_rho(q));
                    const double wpen =
                        in_omega ? sys.penalty * std::exp(-2.0 * wq.log_rho0(q)) : 0.0;
                    for (int k = 0; k < 8; ++k) {
                        const int a2 = k / 4, sb = k % 4;
                        ph[k] = Nv[b][a2] * Bv[a][sb];
                        L[k] = -Ndt[a2] * Bv[a][sb] - Nv[b][a2] * Bxx[a][sb] + Av * ph[k];
                    }
                    for (int r = 0; r < 8; ++r) {
                        if (red[r] < 0) continue;
                        for (int c = 0; c < 8; ++c) {
                            if (red[c] < 0) continue;
                            Mloc[r][c] += w * (wP * L[r] * L[c] + wpen * ph[r] * ph[c]);
                        }
                        if (prob.B) {
                            const double Bval = (*prob.B)[q];
                            if (Bval != 0.0) rloc[r] += w * Bval * ph[r];
                        }
                    }
                }
            for (int r = 0; r < 8; ++r) {
                if (red[r] < 0) continue;
                rhs(red[r]) += rloc[r];
                for (int c = 0; c < 8; ++c)
                    if (red[c] >= 0 && Mloc[r][c] != 0.0)
                        out.emplace_back(red[r], red[c], Mloc[r][c]);
            }
        }
    });

    sys.rhs = Eigen::VectorXd::Zero(n);
    for (const auto& part : rhs_parts) sys.rhs += part;

    // Initial-datum part of the right-hand side (level-0 trace integral).
    if (prob.z0) {
        double B0[4];
        for (int ix = 0; ix < nx; ++ix)
            for (int a = 0; a < nqx; ++a) {
                HermiteBasis::eval(g.qx().node[a], g.hx(), B0);
                const double w = g.qx().weight[a] * g.hx();
                const double z0v = prob.z0->f(g.quad_x(ix, a));
                if (z0v == 0.0) continue;
                for (int sb = 0; sb < 4; ++sb) {
                    const int node = ix + sb / 2, comp = sb % 2;
                    const int r = sys.red_of_full[2 * node + comp];
                    if (r >= 0) sys.rhs(r) += w * z0v * B0[sb];
                }
            }
    }

    // Detect dofs whose whole row underflowed (weights vanish near t = T on
    // fine meshes); they carry no information and are pinned to zero. The
    // form is a Gram matrix, so a vanished diagonal bounds the whole row.
    Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
    for (const auto& part : parts)
        for (const auto& tr : part)
            if (tr.row() == tr.col()) diag(tr.row()) += tr.value();

    // Dofs whose diagonal sits dozens of decades below the top carry only
    // weight-suppressed content; by the Gram structure (Cauchy-Schwarz) their
    // couplings are equally suppressed, so pinning them to zero perturbs the
    // retained equations below solver tolerance while keeping the scaled
    // system numerically positive definite.
    const double dmax = diag.size() > 0 ? diag.maxCoeff() : 0.0;
    const double cut = std::max(1e-280, dmax * 1e-48);
    sys.pinned.assign(n, 0);
    for (int k = 0; k < n; ++k)
        if (!(diag(k) > cut)) {
            sys.pinned[k] = 1;
            ++sys.pinned_count;
            sys.rhs(k) = 0.0;
        }

    std::vector<Eigen::Triplet<double>> trips;
    std::size_t total = 0;
    for (const auto& part : parts) total += part.size();
    trips.reserve(total + sys.pinned_count);
    for (const auto& part : parts)
        for (const auto& tr : part) {
            if (sys.pinned[tr.row()] || sys.pinned[tr.col()]) continue;
            trips.push_back(tr);
        }
    for (int k = 0; k < n; ++k)
        if (sys.pinned[k]) trips.emplace_back(k, k, 1.0);

    sys.M.resize(n, n);
    sys.M.setFromTriplets(trips.begin(), trips.end());
    return sys;
}

// ---------------------------------------------------------------------------
// Solve

namespace {

// Residual rhs - M x accumulated in long double: lets iterative refinement
// reach ~eps backward error instead of flooring at cond * eps.
Eigen::VectorXd residual_xp(const Eigen::SparseMatrix<double>& M, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& rhs) {
    std::vector<long double> acc(static_cast<std::size_t>(rhs.size()), 0.0L);
    for (int col = 0; col < M.outerSize(); ++col)
        for (Eigen::SparseMatrix<double>::InnerIterator it(M, col); it; ++it)
            acc[static_cast<std::size_t>(it.row())] +=
                static_cast<long double>(it.value()) * static_cast<long double>(x(col));
    Eigen::VectorXd r(rhs.size());
    for (int i = 0; i < rhs.size(); ++i)
        r(i) = static_cast<double>(static_cast<long double>(rhs(i)) - acc[i]);
    return r;
}

} // namespace

AdjointSolution solve_adjoint(const LinearControlProblem& prob, const PSystem& sys) {
    const int n = static_cast<int>(sys.full_of_red.size());

    Eigen::VectorXd dscale(n);
    for (int k = 0; k < n; ++k) {
        const double d = sys.M.coeff(k, k);
        dscale(k) = d > 0.0 ? 1.0 / std::sqrt(d) : 1.0;
    }
    Eigen::SparseMatrix<double> Ms = sys.M;
    for (int col = 0; col < Ms.outerSize(); ++col)
        for (Eigen::SparseMatrix<double>::InnerIterator it(Ms, col); it; ++it)
            it.valueRef() *= dscale(it.row()) * dscale(col);
    const Eigen::VectorXd rhs_s = dscale.asDiagonal() * sys.rhs;

    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    ldlt.compute(Ms);
    if (ldlt.info() != Eigen::Success) {
        // Rebalance once with a tiny diagonal lift, then give up.
        Eigen::SparseMatrix<double> lifted = Ms;
        for (int k = 0; k < n; ++k) lifted.coeffRef(k, k) += 1e-12;
        ldlt.compute(lifted);
        if (ldlt.info() != Eigen::Success)
            throw SolverError("adjoint system factorization failed (indefinite or singular "
                              "assembly; representation bug)");
    }

    AdjointSolution out{Field(prob.grid, true), 0.0, 0.0, 0, sys.pinned_count};

    // Normwise backward error ||Ms x - rhs|| / (||Ms||_inf ||x|| + ||rhs||).
    double Ms_norm = 0.0;
    {
        Eigen::VectorXd rowsum = Eigen::VectorXd::Zero(n);
        for (int col = 0; col < Ms.outerSize(); ++col)
            for (Eigen::SparseMatrix<double>::InnerIterator it(Ms, col); it; ++it)
                rowsum(it.row()) += std::fabs(it.value());
        Ms_norm = rowsum.maxCoeff();
    }
    const double rhs_norm = rhs_s.norm();
    auto backward_error = [&](const Eigen::VectorXd& xv, const Eigen::VectorXd& rv) {
        return rv.norm() / (Ms_norm * xv.norm() + rhs_norm + 1e-300);
    };

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    if (rhs_norm > 0.0) {
        x = ldlt.solve(rhs_s);
        Eigen::VectorXd resid = residual_xp(Ms, x, rhs_s);
        out.rel_residual = backward_error(x, resid);
        while (out.refine_steps < 20 && out.rel_residual > 1e-14) {
            const Eigen::VectorXd dx = ldlt.solve(resid);
            const Eigen::VectorXd x_next = x + dx;
            const Eigen::VectorXd resid_next = residual_xp(Ms, x_next, rhs_s);
            const double rel_next = backward_error(x_next, resid_next);
            ++out.refine_steps;
            if (rel_next >= out.rel_residual) break;  // stagnated
            x = x_next;
            resid = resid_next;
            out.rel_residual = rel_next;
        }
        if (!(out.rel_residual <= 1e-10)) {
            std::ostringstream msg;
            msg << "adjoint solve residual " << out.rel_residual
                << " exceeds tolerance 1e-10 after " << out.refine_steps << " refinements";
            throw SolverError(msg.str());
        }
    }

    const auto& D = ldlt.vectorD();
    double dmin = std::numeric_limits<double>::infinity(), dmax = 0.0;
    for (int k = 0; k < n; ++k) {
        const double a = std::fabs(D(k));
        if (a > 0.0) {
            dmin = std::min(dmin, a);
            dmax = std::max(dmax, a);
        }
    }
    out.cond_estimate = dmin > 0.0 ? dmax / dmin : std::numeric_limits<double>::infinity();

    for (int k = 0; k < n; ++k)
        out.p.set_dof(static_cast<std::size_t>(sys.full_of_red[k]), dscale(k) * x(k));
    return out;
}

// ---------------------------------------------------------------------------
// Reconstruction

namespace {

struct LevelJet {
    double v, dxx, dt;
};

LevelJet level_jet(const Field& p, int level, double x) {
    const int nt = p.grid().nt();
    const double ht = p.grid().ht();
    const SpatialJet sj = p.eval_level(level, x);
    double dt;
    if (level == 0)
        dt = (p.eval_level(1, x).v - sj.v) / ht;
    else if (level == nt)
        dt = (sj.v - p.eval_level(nt - 1, x).v) / ht;
    else
        dt = (p.eval_level(level + 1, x).v - p.eval_level(level - 1, x).v) / (2.0 * ht);
    return {sj.v, sj.dxx, dt};
}

// rho^-2 L*_A p at one quadrature point, exponent-balanced.
inline double z_value(double log_rho, double lstar) {
    return scaled_value(-2.0 * log_rho, lstar);
}

} // namespace

ControlledSolution reconstruct(const LinearControlProblem& prob, const AdjointSolution& adj,
                               Level0Pin pin) {
    const SpaceTimeGrid& g = *prob.grid;
    const WeightedQuadrature& wq = *prob.wq;
    const WeightSet& w = *prob.weights;
    const double s = w.s(), l0 = w.lambda0();
    const double vcoef = std::pow(s, 1.5) * l0 * l0;

    ControlledSolution out{Field(prob.grid, true), Field(prob.grid, true),
                           std::vector<double>(g.quad_count(), 0.0),
                           std::vector<double>(g.quad_count(), 0.0)};

    double nz2 = 0.0, nv2 = 0.0, zsup = 0.0;
    g.for_each_quad([&](std::size_t q, int ix, int, int, int, double x, double t, double wgt) {
        const Jet pj = adj.p.jet(x, t);
        const double Av = prob.A ? (*prob.A)[q] : 0.0;
        const double lstar = -pj.dt - pj.dxx + Av * pj.v;
        const double zq = z_value(wq.log_rho(q), lstar);
        out.z_q[q] = zq;
        zsup = std::max(zsup, std::fabs(zq));
        const double rz = scaled_value(-wq.log_rho(q), lstar);
        nz2 += wgt * rz * rz;
        if (g.element_in_omega(ix)) {
            const double vq = -vcoef * scaled_value(-2.0 * wq.log_rho0(q), pj.v);
            out.v_q[q] = vq;
            const double rv = vcoef * scaled_value(-wq.log_rho0(q), pj.v);
            nv2 += wgt * rv * rv;
        }
    });
    out.norm_rho_z = std::sqrt(nz2);
    out.norm_rho0_v = std::sqrt(nv2);
    out.J = 0.5 * (nz2 + nv2);
    out.z_sup = zsup;

    // Per-level spatial L2 projections onto the conforming field space.
    const double t_cap = g.weight_time_cap();
    SpatialProjector proj_z(prob.grid, SpatialProjector::Mode::FullDirichlet);
    SpatialProjector proj_v(prob.grid, SpatialProjector::Mode::OmegaInside);
    for (int j = 0; j <= g.nt(); ++j) {
        const double t = std::min(g.t(j), t_cap);
        proj_z.project_level(
            [&](int ix, int a) {
                const double x = g.quad_x(ix, a);
                const LevelJet pj = level_jet(adj.p, j, x);
                const double Av = prob.A
                                      ? (*prob.A)[g.quad_index(ix, std::min(j, g.nt() - 1), a, 0)]
                                      : 0.0;
                const auto lw = w.eval(x, t);
                return z_value(lw.log_rho, -pj.dt - pj.dxx + Av * pj.v);
            },
            j, out.z);
        proj_v.project_level(
            [&](int ix, int a) {
                if (!g.element_in_omega(ix)) return 0.0;
                const double x = g.quad_x(ix, a);
                const auto lw = w.eval(x, t);
                return -vcoef * scaled_value(-2.0 * lw.log_rho0, adj.p.eval_level(j, x).v);
            },
            j, out.v);
    }

    if (pin == Level0Pin::Zero) {
        for (int i = 0; i <= g.nx(); ++i) {
            out.z.set_value(0, i, 0.0);
            out.z.set_deriv(0, i, 0.0);
        }
    } else if (pin == Level0Pin::Interpolant && prob.z0) {
        out.z.set_level(0, prob.z0->f, prob.z0->df);
    }

    out.terminal_l2 = out.z.spatial_l2(g.nt());

    // rho0-weighted gap between the projected field and the quadrature values.
    {
        double acc = 0.0, vol = 0.0;
        g.for_each_quad([&](std::size_t q, int, int, int, int, double x, double t, double wgt) {
            const double gap = out.z.jet(x, t).v - out.z_q[q];
            const double term = scaled_value(wq.log_rho0(q), gap);
            acc += wgt * term * term;
            vol += wgt;
        });
        out.projection_error = std::sqrt(acc / vol);
    }

    // Monitored a-priori bounds, in logs.
    {
        const double nB = prob.B ? wq.norm_rho0(*prob.B) : 0.0;
        const double z0_l2 = prob.z0 ? prob.z0->l2(g) : 0.0;
        const double z0_h1 = prob.z0 ? prob.z0->h1_semi(g) : 0.0;
        LogSum rhs1;
        rhs1.add_value(nB);
        if (z0_l2 > 0.0) rhs1.add_log(w.c() * s + std::log(z0_l2));
        out.est1_log_lhs = std::log(out.norm_rho_z + out.norm_rho0_v);
        out.est1_log_rhs = -1.5 * std::log(s) + rhs1.total().ln;

        LogSum rhs2;
        rhs2.add_value(nB);
        if (z0_h1 > 0.0) rhs2.add_log(w.c() * s + std::log(z0_h1));
        out.est1bis_log_lhs = std::log(std::max(out.z_sup, 1e-300));
        out.est1bis_log_rhs =
            -1.5 * s + std::log1p(prob.A_sup) + rhs2.total().ln;
    }
    return out;
}

NullControlResult solve_null_control(const LinearControlProblem& prob, Level0Pin pin) {
    prob.check_s();
    const PSystem sys = assemble_p_system(prob);
    AdjointSolution adj = solve_adjoint(prob, sys);
    ControlledSolution sol = reconstruct(prob, adj, pin);
    return {std::move(adj), std::move(sol)};
}

// ---------------------------------------------------------------------------
// Duality identity and optimality checks

double transposition_residual(const LinearControlProblem& prob, const AdjointSolution& adj,
                              int count, unsigned long long seed) {
    const SpaceTimeGrid& g = *prob.grid;
    const WeightedQuadrature& wq = *prob.wq;
    const double pen =
        std::pow(prob.weights->s(), 3.0) * std::pow(prob.weights->lambda0(), 4.0);

    std::vector<double> z_q(g.quad_count()), v_form(g.quad_count(), 0.0);
    g.for_each_quad([&](std::size_t q, int ix, int, int, int, double x, double t, double) {
        const Jet pj = adj.p.jet(x, t);
        const double Av = prob.A ? (*prob.A)[q] : 0.0;
        z_q[q] = z_value(wq.log_rho(q), -pj.dt - pj.dxx + Av * pj.v);
        if (g.element_in_omega(ix))
            v_form[q] = -pen * scaled_value(-2.0 * wq.log_rho0(q), pj.v);
    });

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < count; ++trial) {
        Field qf(prob.grid, true);
        for (int j = 0; j <= g.nt(); ++j)
            for (int i = 0; i <= g.nx(); ++i) {
                if (i != 0 && i != g.nx()) qf.set_value(j, i, uni(rng));
                qf.set_deriv(j, i, uni(rng));
            }
        double t1 = 0.0, t2 = 0.0, t4 = 0.0;
        g.for_each_quad([&](std::size_t q, int ix, int, int, int, double x, double t, double w) {
            const Jet qj = qf.jet(x, t);
            const double Av = prob.A ? (*prob.A)[q] : 0.0;
            t1 += w * z_q[q] * (-qj.dt - qj.dxx + Av * qj.v);
            if (g.element_in_omega(ix)) t2 += w * v_form[q] * qj.v;
            if (prob.B) t4 += w * (*prob.B)[q] * qj.v;
        });
        double t3 = 0.0;
        if (prob.z0)
            for (int ix = 0; ix < g.nx(); ++ix)
                for (int a = 0; a < g.nqx(); ++a) {
                    const double x = g.quad_x(ix, a);
                    t3 += g.qx().weight[a] * g.hx() * prob.z0->f(x) * qf.eval_level(0, x).v;
                }
        const double scale = std::fabs(t1) + std::fabs(t2) + std::fabs(t3) + std::fabs(t4);
        const double defect = std::fabs(t1 - t2 - t3 - t4);
        worst = std::max(worst, scale > 0.0 ? defect / scale : defect);
    }
    return worst;
}

OptimalityReport verify_optimality(const LinearControlProblem& prob, const AdjointSolution& base,
                                   int count, unsigned long long seed) {
    const SpaceTimeGrid& g = *prob.grid;
    const WeightedQuadrature& wq = *prob.wq;
    const double pen =
        std::pow(prob.weights->s(), 3.0) * std::pow(prob.weights->lambda0(), 4.0);

    // Base pair in form-consistent variables; everything below is evaluated
    // in the base family's weights.
    std::vector<double> rz(g.quad_count(), 0.0), rv(g.quad_count(), 0.0);
    auto fill = [&](const Field& p, const std::vector<double>* A, std::vector<double>& out_rz,
                    std::vector<double>& out_rv) {
        g.for_each_quad([&](std::size_t q, int ix, int, int, int, double x, double t, double) {
            const Jet pj = p.jet(x, t);
            const double Av = A ? (*A)[q] : 0.0;
            const double lstar = -pj.dt - pj.dxx + Av * pj.v;
            out_rz[q] = scaled_value(-wq.log_rho(q), lstar);  // rho z
            if (g.element_in_omega(ix))                        // rho0 v (form control)
                out_rv[q] = -pen * scaled_value(-wq.log_rho0(q), pj.v);
        });
    };
    fill(base.p, prob.A, rz, rv);

    auto Jform = [&](const std::vector<double>& az, const std::vector<double>& av) {
        double acc = 0.0;
        g.for_each_quad([&](std::size_t q, int ix, int, int, int, double, double, double w) {
            acc += 0.5 * w * az[q] * az[q];
            if (g.element_in_omega(ix)) acc += 0.5 / pen * w * av[q] * av[q];
        });
        return acc;
    };
    const double J_base = Jform(rz, rv);

    OptimalityReport report;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> s_jitter(1.05, 1.9);
    std::uniform_real_distribution<double> t1_jitter(0.7, 1.0);

    std::vector<double> rz2(g.quad_count()), rv2(g.quad_count());
    for (int trial = 0; trial < count; ++trial) {
        WeightParams wp = prob.weights->params();
        wp.s = prob.weights->s() * s_jitter(rng);
        wp.T1 = prob.weights->T1() * t1_jitter(rng);
        const WeightSet w2(wp, {g.omega_a(), g.omega_b()}, g.T(), prob.weights->options());
        const WeightedQuadrature wq2(prob.grid, w2);
        LinearControlProblem p2 = prob;
        p2.weights = &w2;
        p2.wq = &wq2;
        const PSystem sys2 = assemble_p_system(p2);
        const AdjointSolution adj2 = solve_adjoint(p2, sys2);

        // The perturbed pair solves the same duality constraint (same data),
        // so its difference from the base pair is an exact feasible direction.
        const double pen2 = std::pow(w2.s(), 3.0) * std::pow(w2.lambda0(), 4.0);
        std::fill(rz2.begin(), rz2.end(), 0.0);
        std::fill(rv2.begin(), rv2.end(), 0.0);
        g.for_each_quad([&](std::size_t q, int ix, int, int, int, double x, double t, double) {
            const Jet pj = adj2.p.jet(x, t);
            const double Av = prob.A ? (*prob.A)[q] : 0.0;
            const double lstar = -pj.dt - pj.dxx + Av * pj.v;
            const double zq = z_value(wq2.log_rho(q), lstar);
            rz2[q] = scaled_value(wq.log_rho(q), zq);
            if (g.element_in_omega(ix)) {
                const double vq = -pen2 * scaled_value(-2.0 * wq2.log_rho0(q), pj.v);
                rv2[q] = scaled_value(wq.log_rho0(q), vq);
            }
        });

        PerturbationCheck chk;
        chk.J_base = J_base;
        chk.J_perturbed = Jform(rz2, rv2);
        chk.delta_J = chk.J_perturbed - J_base;
        double fo = 0.0;
        g.for_each_quad([&](std::size_t q, int ix, int, int, int, double, double, double w) {
            fo += w * rz[q] * (rz2[q] - rz[q]);
            if (g.element_in_omega(ix)) fo += w / pen * rv[q] * (rv2[q] - rv[q]);
        });
        chk.first_order = fo;
        report.checks.push_back(chk);
        if (chk.delta_J < -1e-8 * std::max(J_base, 1e-300)) report.all_increase = false;
        report.max_first_order_rel =
            std::max(report.max_first_order_rel, std::fabs(fo) / std::max(J_base, 1e-300));
    }
    return report;
}

} // namespace heatls
