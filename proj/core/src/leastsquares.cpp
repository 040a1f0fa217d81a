#include "heatls/leastsquares.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "heatls/logsum.hpp"

namespace heatls {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline double scaled_value(double ln_scale, double v) {
    if (v == 0.0) return 0.0;
    const double m = std::exp(ln_scale + std::log(std::fabs(v)));
    return v > 0.0 ? m : -m;
}

} // namespace

LSContext::LSContext(std::shared_ptr<const SpaceTimeGrid> grid, WeightSet weights,
                     NonlinearitySpec g)
    : grid_(grid), weights_(std::move(weights)), wq_(grid, weights_), g_(std::move(g)) {}

double LSContext::energy(const std::vector<double>& r) const {
    double acc = 0.0;
    bool bad = false;
    double bad_x = 0.0, bad_t = 0.0;
    grid_->for_each_quad([&](std::size_t q, int, int, int, int, double x, double t, double w) {
        if (bad) return;
        if (!std::isfinite(r[q])) {
            bad = true;
            bad_x = x;
            bad_t = t;
            return;
        }
        const double term = scaled_value(wq_.log_rho0(q), r[q]);
        acc += w * term * term;
    });
    if (bad)
        throw SolverError("non-finite residual at (x=" + std::to_string(bad_x) +
                          ", t=" + std::to_string(bad_t) + ")");
    return 0.5 * acc;
}

double LSContext::energy_recomputed(const std::vector<double>& r) const {
    // Level-major traversal with compensated summation: an accumulation path
    // independent of energy()'s element-major loop.
    const SpaceTimeGrid& g = *grid_;
    KahanSum acc;
    for (int b = 0; b < g.nqt(); ++b)
        for (int a = 0; a < g.nqx(); ++a)
            for (int jt = 0; jt < g.nt(); ++jt)
                for (int ix = 0; ix < g.nx(); ++ix) {
                    const std::size_t q = g.quad_index(ix, jt, a, b);
                    const double term = scaled_value(wq_.log_rho0(q), r[q]);
                    acc.add(g.quad_w(a, b) * term * term);
                }
    return 0.5 * acc.total();
}

void LSContext::refresh_sweeps(ControlPair& pair) const {
    pair.y_v.resize(grid_->quad_count());
    pair.y_lin.resize(grid_->quad_count());
    grid_->for_each_quad([&](std::size_t q, int, int, int, int, double x, double t, double) {
        const Jet j = pair.y.jet(x, t);
        pair.y_v[q] = j.v;
        pair.y_lin[q] = j.dt - j.dxx;
    });
}

ControlPair LSContext::from_null_control(const NullControlResult& nc,
                                         const SpatialFunction* u0) const {
    ControlPair pair{nc.solution.z, nc.solution.v, {}, {}, {}, {},
                     0.0, u0 ? PairSpace::A : PairSpace::A0};
    if (u0) pair.y.set_level(0, u0->f, u0->df);
    refresh_sweeps(pair);
    // Fold the solve defect: the accumulated control takes the whole linear
    // part, so the canonical residual is exactly g(y).
    pair.f_all = pair.y_lin;
    pair.r.resize(grid_->quad_count());
    for (std::size_t q = 0; q < pair.r.size(); ++q) pair.r[q] = g_.g(pair.y_v[q]);
    pair.E = energy(pair.r);
    return pair;
}

ControlPair LSContext::initialize_linear(const SpatialFunction& u0) const {
    LinearControlProblem prob;
    prob.grid = grid_;
    prob.weights = &weights_;
    prob.wq = &wq_;
    prob.z0 = &u0;
    const NullControlResult nc = solve_null_control(prob, Level0Pin::Interpolant);
    return from_null_control(nc, &u0);
}

ControlPair LSContext::initialize_cutoff(const SpatialFunction& u0) const {
    const SpaceTimeGrid& g = *grid_;
    const int modes = 2 * g.nx();
    std::vector<double> coef(modes + 1, 0.0);
    for (int k = 1; k <= modes; ++k) {
        double acc = 0.0;
        for (int ix = 0; ix < g.nx(); ++ix)
            for (int a = 0; a < g.nqx(); ++a) {
                const double x = g.quad_x(ix, a);
                acc += g.qx().weight[a] * g.hx() * u0.f(x) * std::sin(k * M_PI * x);
            }
        coef[k] = 2.0 * acc;
    }
    auto ystar = [&](double x, double t) {
        double v = 0.0;
        for (int k = 1; k <= modes; ++k)
            v += coef[k] * std::sin(k * M_PI * x) * std::exp(-k * k * M_PI * M_PI * t);
        return v;
    };
    auto ystar_dx = [&](double x, double t) {
        double v = 0.0;
        for (int k = 1; k <= modes; ++k)
            v += coef[k] * k * M_PI * std::cos(k * M_PI * x) * std::exp(-k * k * M_PI * M_PI * t);
        return v;
    };
    auto bump = [](double w) { return w > 0.0 ? std::exp(-1.0 / w) : 0.0; };
    auto chi = [&](double t) {
        const double u = 2.0 * t / g.T();
        if (u <= 0.0) return 1.0;
        if (u >= 1.0) return 0.0;
        return bump(1.0 - u) / (bump(u) + bump(1.0 - u));
    };

    ControlPair pair{Field(grid_, true), Field(grid_, true), {}, {}, {}, {},
                     0.0, PairSpace::A};
    for (int j = 0; j <= g.nt(); ++j) {
        const double t = g.t(j);
        const double c = chi(t);
        pair.y.set_level(
            j, [&](double x) { return c * ystar(x, t); },
            [&](double x) { return c * ystar_dx(x, t); });
    }
    pair.y.set_level(0, u0.f, u0.df);  // exact initial datum at nodes
    refresh_sweeps(pair);
    pair.f_all.assign(g.quad_count(), 0.0);
    pair.r.resize(g.quad_count());
    for (std::size_t q = 0; q < pair.r.size(); ++q)
        pair.r[q] = pair.y_lin[q] + g_.g(pair.y_v[q]);
    pair.E = energy(pair.r);
    return pair;
}

double LSContext::gprime_sup(const ControlPair& pair) const {
    double m = 0.0;
    for (const double v : pair.y_v) m = std::max(m, std::fabs(g_.gprime(v)));
    return m;
}

MinimalPair LSContext::minimal_pair(const ControlPair& pair) const {
    std::vector<double> A(grid_->quad_count());
    double A_sup = 0.0;
    for (std::size_t q = 0; q < A.size(); ++q) {
        A[q] = g_.gprime(pair.y_v[q]);
        A_sup = std::max(A_sup, std::fabs(A[q]));
    }

    LinearControlProblem prob;
    prob.grid = grid_;
    prob.weights = &weights_;
    prob.wq = &wq_;
    prob.A = &A;
    prob.B = &pair.r;
    prob.A_sup = A_sup;
    const NullControlResult nc = solve_null_control(prob, Level0Pin::Zero);

    MinimalPair mp{nc.solution.z, nc.solution.v, {}, {}, {}, 0.0, 0.0,
                   nc.adjoint.rel_residual, nc.adjoint.cond_estimate};
    mp.Y_v.resize(grid_->quad_count());
    mp.Y_lin.resize(grid_->quad_count());
    grid_->for_each_quad([&](std::size_t q, int, int, int, int, double x, double t, double) {
        const Jet j = mp.Y.jet(x, t);
        mp.Y_v[q] = j.v;
        mp.Y_lin[q] = j.dt - j.dxx;
    });
    mp.Ftilde.resize(grid_->quad_count());
    for (std::size_t q = 0; q < mp.Ftilde.size(); ++q)
        mp.Ftilde[q] = mp.Y_lin[q] + A[q] * mp.Y_v[q] - pair.r[q];
    mp.defect_norm = wq_.norm_rho0_omega_complement(mp.Ftilde);

    // Weighted graph norm ||(Y,F)||: rho-weighted state, rho0-weighted control
    // (on omega) and rho0-weighted heat part, accumulated in log space.
    LogSum acc;
    grid_->for_each_quad([&](std::size_t q, int ix, int, int, int, double, double, double w) {
        const double lnw = std::log(w);
        if (mp.Y_v[q] != 0.0)
            acc.add_log(lnw + 2.0 * wq_.log_rho(q) + 2.0 * std::log(std::fabs(mp.Y_v[q])));
        if (mp.Y_lin[q] != 0.0)
            acc.add_log(lnw + 2.0 * wq_.log_rho0(q) + 2.0 * std::log(std::fabs(mp.Y_lin[q])));
        if (grid_->element_in_omega(ix) && mp.Ftilde[q] != 0.0)
            acc.add_log(lnw + 2.0 * wq_.log_rho0(q) + 2.0 * std::log(std::fabs(mp.Ftilde[q])));
    });
    mp.log_a0_norm = acc.total().sqrt().ln;
    return mp;
}

LineSearchResult LSContext::line_search(const ControlPair& pair, const MinimalPair& mp,
                                        double m) const {
    const std::size_t n = grid_->quad_count();
    std::vector<double> g_y(n);
    std::vector<double> gp_y(n);
    for (std::size_t q = 0; q < n; ++q) {
        g_y[q] = g_.g(pair.y_v[q]);
        gp_y[q] = g_.gprime(pair.y_v[q]);
    }

    int evals = 0;
    auto phi = [&](double lam) {
        ++evals;
        double acc = 0.0;
        grid_->for_each_quad([&](std::size_t q, int, int, int, int, double, double, double w) {
            const double ell =
                g_.g(pair.y_v[q] - lam * mp.Y_v[q]) - g_y[q] + lam * gp_y[q] * mp.Y_v[q];
            const double res = (1.0 - lam) * pair.r[q] + ell;
            const double term = scaled_value(wq_.log_rho0(q), res);
            acc += w * term * term;
        });
        return 0.5 * acc;
    };

    double best_l = 0.0, best_E = pair.E;
    auto consider = [&](double lam, double E) {
        if (E < best_E) {
            best_E = E;
            best_l = lam;
        }
    };
    consider(1.0, phi(1.0));  // Newton step first

    // Golden-section bracket on [0, m] to lambda-tolerance 1e-4.
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = 0.0, b = m;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = phi(x1), f2 = phi(x2);
    consider(x1, f1);
    consider(x2, f2);
    while (b - a > 1e-4 && evals < 38) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = phi(x1);
            consider(x1, f1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = phi(x2);
            consider(x2, f2);
        }
    }
    // One parabolic refinement through the bracket midpoints.
    {
        const double xm = 0.5 * (a + b);
        const double fm = phi(xm);
        consider(xm, fm);
        const double d1 = (f1 - fm) * (b - xm), d2 = (f2 - fm) * (xm - a);
        const double den = 2.0 * (d1 - d2);
        if (std::fabs(den) > 0.0) {
            const double cand = xm - ((xm - a) * d2 * (xm - a) - (b - xm) * d1 * (b - xm)) /
                                          ((xm - a) * d2 - (b - xm) * d1) * 0.5;
            if (std::isfinite(cand) && cand > 0.0 && cand < m) consider(cand, phi(cand));
        }
    }
    return {best_l, best_E, evals};
}

double LSContext::apply_step(ControlPair& pair, const MinimalPair& mp, double lambda,
                             double scale) const {
    const std::size_t n = grid_->quad_count();
    // Residual recursion (exact given the folded update of f_all).
    for (std::size_t q = 0; q < n; ++q) {
        const double ell = g_.g(pair.y_v[q] - lambda * mp.Y_v[q]) - g_.g(pair.y_v[q]) +
                           lambda * g_.gprime(pair.y_v[q]) * mp.Y_v[q];
        pair.r[q] = (1.0 - lambda) * pair.r[q] + ell;
        pair.f_all[q] -= lambda * mp.Ftilde[q];
        pair.y_v[q] -= lambda * mp.Y_v[q];
        pair.y_lin[q] -= lambda * mp.Y_lin[q];
    }
    pair.y.axpy(-lambda, mp.Y);
    pair.f.axpy(-lambda, mp.v_field);
    pair.E = energy(pair.r);

    // Drift guard: recompute the residual from the fields and compare.
    double num = 0.0, den = 0.0;
    grid_->for_each_quad([&](std::size_t q, int, int, int, int, double x, double t, double w) {
        const Jet j = pair.y.jet(x, t);
        const double direct = (j.dt - j.dxx) + g_.g(j.v) - pair.f_all[q];
        const double dterm = scaled_value(wq_.log_rho0(q), direct - pair.r[q]);
        const double rterm = scaled_value(wq_.log_rho0(q), direct);
        num += w * dterm * dterm;
        den += w * rterm * rterm;
    });
    return std::sqrt(num) / (std::max(std::sqrt(den), scale) + 1e-300);
}

double LSContext::energy_strict(const ControlPair& pair) const {
    std::vector<double> r(grid_->quad_count());
    grid_->for_each_quad([&](std::size_t q, int ix, int, int, int, double x, double t, double) {
        const Jet j = pair.y.jet(x, t);
        const double fv = grid_->element_in_omega(ix) ? pair.f.jet(x, t).v : 0.0;
        r[q] = (j.dt - j.dxx) + g_.g(j.v) - fv;
    });
    return energy(r);
}

double LSContext::defect_l2(const ControlPair& pair) const {
    // f_all minus the exported control, rho0-weighted: the accumulated crime.
    std::vector<double> d(grid_->quad_count());
    grid_->for_each_quad([&](std::size_t q, int ix, int, int, int, double x, double t, double) {
        const double fv = grid_->element_in_omega(ix) ? pair.f.jet(x, t).v : 0.0;
        d[q] = pair.f_all[q] - fv;
    });
    return wq_.norm_rho0(d);
}

// ---------------------------------------------------------------------------

int predicted_k0(double E0, double c2, double p) {
    if (!(p > 0.0 && p <= 1.0))
        throw std::invalid_argument("predicted_k0: requires p in (0,1]");
    const double arg = std::pow(1.0 + p, 1.0 / p) * c2 * std::sqrt(E0) - 1.0;
    if (arg <= 0.0) return 1;
    return static_cast<int>(std::floor((1.0 + p) / p * arg)) + 1;
}

LSResult leastsquares_solve(std::shared_ptr<const SpaceTimeGrid> grid, WeightParams wp,
                            WeightOptions wopts, const NonlinearitySpec& g,
                            const SpatialFunction& u0, const LSConfig& config) {
    using clock = std::chrono::steady_clock;
    if (!(config.m >= 1.0)) throw std::invalid_argument("LSConfig: m must be >= 1");

    LSResult result;
    double s = config.s_init > 0 ? config.s_init : wp.s;

    const Interval omega{grid->omega_a(), grid->omega_b()};
    double u0_sup = 0.0;
    for (int i = 0; i <= grid->nx() * 4; ++i)
        u0_sup = std::max(u0_sup, std::fabs(u0.f(i / (grid->nx() * 4.0))));
    const double m_cap = config.M_cap > 0 ? config.M_cap : 50.0 * (1.0 + u0_sup);

    for (int phase = 0; phase <= config.max_restarts; ++phase) {
        wp.s = s;
        LSContext ctx(grid, WeightSet(wp, omega, grid->T(), wopts), g);

        ControlPair pair = config.init == LSInit::Linear ? ctx.initialize_linear(u0)
                                                         : ctx.initialize_cutoff(u0);
        result.y_initial = pair.y;
        result.f_initial = pair.f;
        const double tol = config.tol_sqrtE > 0
                               ? config.tol_sqrtE
                               : 1e-8 * (1.0 + std::sqrt(pair.E));

        result.final_phase_begin = result.records.size();
        result.sqrtE0 = std::sqrt(pair.E);
        result.lambdas.clear();
        result.directions.clear();

        std::vector<double> sqrtE_hist{std::sqrt(pair.E)};
        std::vector<double> lambda_hist;
        auto push_record = [&](double lambda, double seconds, double drift) {
            IterationRecord rec;
            rec.k = static_cast<int>(sqrtE_hist.size()) - 1;
            rec.E = pair.E;
            rec.sqrtE = sqrtE_hist.back();
            rec.lambda = lambda;
            rec.y_sup = pair.y.max_abs_value();
            rec.s = s;
            rec.seconds = seconds;
            rec.drift = drift;
            rec.order = kNaN;
            rec.c1 = kNaN;
            const std::size_t k = sqrtE_hist.size() - 1;
            if (k >= 2 && sqrtE_hist[k] > 0 && sqrtE_hist[k - 1] > 0 && sqrtE_hist[k - 2] > 0) {
                const double dn = std::log(sqrtE_hist[k - 1] / sqrtE_hist[k - 2]);
                if (std::fabs(dn) > 1e-12)
                    rec.order = std::log(sqrtE_hist[k] / sqrtE_hist[k - 1]) / dn;
            }
            if (k >= 1 && lambda_hist.size() >= k && sqrtE_hist[k - 1] > 0) {
                const double lam = lambda_hist[k - 1];
                const double prev = sqrtE_hist[k - 1];
                const double denom = std::pow(lam, 1.0 + g.p) * std::pow(prev, 1.0 + g.p);
                if (lam > 0 && denom > 0)
                    rec.c1 = (sqrtE_hist[k] - std::fabs(1.0 - lam) * prev) / denom;
            }
            result.records.push_back(rec);
        };
        push_record(kNaN, 0.0, 0.0);

        bool restart = false;
        int stall = 0;
        std::string phase_stop;
        for (int k = 0; k < config.max_iter; ++k) {
            if (std::sqrt(pair.E) <= tol) {
                result.converged = true;
                phase_stop = "converged";
                break;
            }
            const double y_sup = result.records.back().y_sup;
            if (y_sup > m_cap) {
                restart = true;
                phase_stop = "sup-norm guard";
                break;
            }
            const auto t0 = clock::now();
            MinimalPair mp;
            try {
                mp = ctx.minimal_pair(pair);
            } catch (const NeedLargerS&) {
                restart = true;
                phase_stop = "admissibility (s too small)";
                break;
            }
            const LineSearchResult ls = ctx.line_search(pair, mp, config.m);
            const double E_prev = pair.E;
            const double drift =
                ctx.apply_step(pair, mp, ls.lambda, std::sqrt(2.0 * result.sqrtE0 * result.sqrtE0));
            result.max_drift = std::max(result.max_drift, drift);
            const double seconds = std::chrono::duration<double>(clock::now() - t0).count();

            sqrtE_hist.push_back(std::sqrt(pair.E));
            lambda_hist.push_back(ls.lambda);
            result.lambdas.push_back(ls.lambda);
            if (config.record_directions) result.directions.push_back(mp.Y);
            push_record(kNaN, seconds, drift);
            result.records[result.records.size() - 2].lambda = ls.lambda;

            if (pair.E >= E_prev * (1.0 - 1e-14)) {
                if (++stall >= 2) {
                    if (std::sqrt(pair.E) <= tol) break;
                    restart = true;
                    phase_stop = "stalled above tolerance";
                    break;
                }
            } else {
                stall = 0;
            }
        }
        if (std::sqrt(pair.E) <= tol) result.converged = true;

        result.pair = std::move(pair);
        result.s_final = s;
        result.restarts = phase;
        if (result.converged) {
            result.stop_reason = "converged";
        } else if (!restart) {
            result.stop_reason = "max iterations";
        } else {
            result.stop_reason = phase_stop;
        }

        if (result.converged || !restart) break;
        if (phase == config.max_restarts) {
            result.stop_reason = "restart budget exhausted (" + phase_stop + ")";
            break;
        }
        s *= config.s_growth;
    }

    LSContext final_ctx(grid, WeightSet(wp, omega, grid->T(), wopts), g);
    result.E_strict = final_ctx.energy_strict(result.pair);
    result.defect_l2 = final_ctx.defect_l2(result.pair);
    result.terminal_l2 = result.pair.y.spatial_l2(grid->nt());
    return result;
}

} // namespace heatls
