#include "heatls/baselines.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace heatls {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

inline double scaled_value(double ln_scale, double v) {
    if (v == 0.0) return 0.0;
    const double m = std::exp(ln_scale + std::log(std::fabs(v)));
    return v > 0.0 ? m : -m;
}

/// Shared body: solve the linear control problem with potential A and source
/// B at quadrature points, then fold so r = g(y) - A y + B.
ControlPair linearized_pair(const LSContext& ctx, const std::vector<double>* A, double A_sup,
                            const std::vector<double>* B, const SpatialFunction& u0) {
    LinearControlProblem prob;
    prob.grid = ctx.grid_ptr();
    prob.weights = &ctx.weights();
    prob.wq = &ctx.wq();
    prob.A = A;
    prob.B = B;
    prob.A_sup = A_sup;
    prob.z0 = &u0;
    prob.enforce_admissibility = false;  // run on; divergence is classified, not prevented
    const NullControlResult nc = solve_null_control(prob, Level0Pin::Interpolant);

    ControlPair pair{nc.solution.z, nc.solution.v, {}, {}, {}, {}, 0.0, PairSpace::A};
    pair.y.set_level(0, u0.f, u0.df);
    ctx.refresh_sweeps(pair);
    const std::size_t n = ctx.grid().quad_count();
    pair.r.resize(n);
    pair.f_all.resize(n);
    for (std::size_t q = 0; q < n; ++q) {
        const double Av = A ? (*A)[q] : 0.0;
        const double Bv = B ? (*B)[q] : 0.0;
        pair.r[q] = ctx.g().g(pair.y_v[q]) - Av * pair.y_v[q] + Bv;
        pair.f_all[q] = pair.y_lin[q] + Av * pair.y_v[q] - Bv;
    }
    pair.E = ctx.energy(pair.r);
    return pair;
}

} // namespace

const char* baseline_name(BaselineKind kind) {
    switch (kind) {
        case BaselineKind::PicardGtilde: return "picard";
        case BaselineKind::NewtonUndamped: return "newton";
        case BaselineKind::ControlledVariant: return "variant";
        case BaselineKind::FixedPointK: return "fixedpoint";
        case BaselineKind::WeightedPicard: return "weighted_picard";
    }
    return "?";
}

BaselineKind baseline_from_name(const std::string& name) {
    if (name == "picard") return BaselineKind::PicardGtilde;
    if (name == "newton") return BaselineKind::NewtonUndamped;
    if (name == "variant") return BaselineKind::ControlledVariant;
    if (name == "fixedpoint") return BaselineKind::FixedPointK;
    if (name == "weighted_picard") return BaselineKind::WeightedPicard;
    throw std::invalid_argument("unknown baseline '" + name + "'");
}

ControlPair picard_step(const LSContext& ctx, const ControlPair& prev,
                        const SpatialFunction& u0) {
    const std::size_t n = ctx.grid().quad_count();
    std::vector<double> A(n);
    double A_sup = 0.0;
    for (std::size_t q = 0; q < n; ++q) {
        A[q] = ctx.g().gtilde(prev.y_v[q]);
        A_sup = std::max(A_sup, std::fabs(A[q]));
    }
    return linearized_pair(ctx, &A, A_sup, nullptr, u0);
}

ControlPair variant_step(const LSContext& ctx, const ControlPair& prev,
                         const SpatialFunction& u0) {
    const std::size_t n = ctx.grid().quad_count();
    std::vector<double> A(n), B(n);
    double A_sup = 0.0;
    for (std::size_t q = 0; q < n; ++q) {
        const double y = prev.y_v[q];
        A[q] = ctx.g().gprime(y);
        B[q] = A[q] * y - ctx.g().g(y);
        A_sup = std::max(A_sup, std::fabs(A[q]));
    }
    return linearized_pair(ctx, &A, A_sup, &B, u0);
}

ControlPair fixedpointK_step(const LSContext& ctx, const ControlPair& prev,
                             const SpatialFunction& u0) {
    const std::size_t n = ctx.grid().quad_count();
    std::vector<double> B(n);
    for (std::size_t q = 0; q < n; ++q) B[q] = -ctx.g().g(prev.y_v[q]);
    return linearized_pair(ctx, nullptr, 0.0, &B, u0);
}

void newton_step(const LSContext& ctx, ControlPair& pair) {
    const double scale = std::sqrt(2.0 * pair.E);
    const MinimalPair mp = ctx.minimal_pair(pair);
    ctx.apply_step(pair, mp, 1.0, scale);
}

double fixedpointK_contraction(const LSContext& ctx, const ControlPair& z1,
                               const ControlPair& z2, const SpatialFunction& u0) {
    const ControlPair k1 = fixedpointK_step(ctx, z1, u0);
    const ControlPair k2 = fixedpointK_step(ctx, z2, u0);
    const auto& wq = ctx.wq();
    double num = 0.0, den = 0.0;
    ctx.grid().for_each_quad([&](std::size_t q, int, int, int, int, double, double, double w) {
        const double dn = scaled_value(wq.log_rho(q), k1.y_v[q] - k2.y_v[q]);
        const double dd = scaled_value(wq.log_rho(q), z1.y_v[q] - z2.y_v[q]);
        num += w * dn * dn;
        den += w * dd * dd;
    });
    return std::sqrt(num) / (std::sqrt(den) + 1e-300);
}

BaselineResult run_baseline(BaselineKind kind, std::shared_ptr<const SpaceTimeGrid> grid,
                            WeightParams wp, WeightOptions wopts, const NonlinearitySpec& g,
                            const SpatialFunction& u0, const BaselineConfig& config) {
    using clock = std::chrono::steady_clock;
    const Interval omega{grid->omega_a(), grid->omega_b()};
    LSContext ctx(grid, WeightSet(wp, omega, grid->T(), wopts), g);

    BaselineResult result;
    result.method = baseline_name(kind);

    double u0_sup = 0.0;
    for (int i = 0; i <= grid->nx() * 4; ++i)
        u0_sup = std::max(u0_sup, std::fabs(u0.f(i / (grid->nx() * 4.0))));
    const double m_cap = config.M_cap > 0 ? config.M_cap : 50.0 * (1.0 + u0_sup);
    const double blow = 10.0 * m_cap;

    // Start pair: zero state (Picard family starts from any bounded guess;
    // the first step then reproduces the linear controlled pair), the damped
    // machinery's own initializer for Newton.
    ControlPair pair = kind == BaselineKind::NewtonUndamped
                           ? ctx.initialize_linear(u0)
                           : [&] {
                                 ControlPair p0{Field(grid, true), Field(grid, true), {}, {}, {},
                                                {}, 0.0, PairSpace::A};
                                 ctx.refresh_sweeps(p0);
                                 p0.r.assign(grid->quad_count(), 0.0);
                                 p0.f_all.assign(grid->quad_count(), 0.0);
                                 return p0;
                             }();
    result.y_initial = pair.y;
    result.f_initial = pair.f;

    const double tol =
        config.tol_sqrtE > 0 ? config.tol_sqrtE : 1e-8 * (1.0 + std::sqrt(pair.E));
    double E_ref = std::max(pair.E, 1e-300);  // rebased on the first real step

    std::vector<double> sqrtE_hist;
    auto push_record = [&](int k, double lambda, double seconds) {
        IterationRecord rec;
        rec.k = k;
        rec.E = pair.E;
        rec.sqrtE = std::sqrt(pair.E);
        rec.lambda = lambda;
        rec.y_sup = pair.y.max_abs_value();
        rec.s = ctx.weights().s();
        rec.seconds = seconds;
        rec.drift = 0.0;
        rec.order = kNaN;
        rec.c1 = kNaN;
        sqrtE_hist.push_back(rec.sqrtE);
        const std::size_t m = sqrtE_hist.size();
        if (m >= 3 && sqrtE_hist[m - 1] > 0 && sqrtE_hist[m - 2] > 0 && sqrtE_hist[m - 3] > 0) {
            const double dn = std::log(sqrtE_hist[m - 2] / sqrtE_hist[m - 3]);
            if (std::fabs(dn) > 1e-12)
                rec.order = std::log(sqrtE_hist[m - 1] / sqrtE_hist[m - 2]) / dn;
        }
        result.records.push_back(rec);
        return rec.y_sup;
    };
    push_record(0, kNaN, 0.0);

    for (int k = 0; k < config.max_iter; ++k) {
        if (std::sqrt(pair.E) <= tol && k > 0) {
            result.converged = true;
            result.stop_reason = "converged";
            break;
        }
        const auto t0 = clock::now();
        ControlPair prev_snapshot = pair;
        try {
            switch (kind) {
                case BaselineKind::PicardGtilde:
                case BaselineKind::WeightedPicard:
                    pair = picard_step(ctx, pair, u0);
                    break;
                case BaselineKind::ControlledVariant:
                    pair = variant_step(ctx, pair, u0);
                    break;
                case BaselineKind::FixedPointK:
                    pair = fixedpointK_step(ctx, pair, u0);
                    break;
                case BaselineKind::NewtonUndamped:
                    newton_step(ctx, pair);
                    break;
            }
        } catch (const NeedLargerS& e) {
            result.diverged = true;
            result.stop_reason = std::string("admissibility lost: ") + e.what();
            break;
        }
        const double seconds = std::chrono::duration<double>(clock::now() - t0).count();
        const double y_sup = push_record(k + 1, kind == BaselineKind::NewtonUndamped ? 1.0 : kNaN,
                                         seconds);
        double diff = 0.0;
        for (std::size_t q = 0; q < pair.y_v.size(); ++q)
            diff = std::max(diff, std::fabs(pair.y_v[q] - prev_snapshot.y_v[q]));
        result.max_step_diff = diff;

        if (k == 0) E_ref = std::max(pair.E, E_ref);
        if (y_sup > blow || !std::isfinite(pair.E) || pair.E > 1e6 * E_ref) {
            result.diverged = true;
            result.stop_reason = "divergence: sup-norm or residual growth beyond guard";
            break;
        }
    }
    if (!result.converged && !result.diverged) {
        if (std::sqrt(pair.E) <= tol) {
            result.converged = true;
            result.stop_reason = "converged";
        } else {
            // Step cap reached. No residual contraction over the whole run is
            // classified as divergence (the harness terminates and classifies
            // rather than iterating forever); a clear downward trend is a
            // plain non-convergence.
            double first = 0.0;
            for (std::size_t i = 1; i < result.records.size(); ++i)
                if (result.records[i].sqrtE > 0.0) {
                    first = result.records[i].sqrtE;
                    break;
                }
            const double last = result.records.back().sqrtE;
            if (first > 0.0 && last > 0.1 * first) {
                result.diverged = true;
                result.stop_reason = "divergence: no contraction within the step cap";
            } else {
                result.stop_reason = "max iterations";
            }
        }
    }

    result.terminal_l2 = pair.y.spatial_l2(grid->nt());
    result.E_strict = ctx.energy_strict(pair);
    result.pair = std::move(pair);
    return result;
}

} // namespace heatls
