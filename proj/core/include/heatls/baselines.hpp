#pragma once

#include <string>
#include <vector>

#include "heatls/leastsquares.hpp"

namespace heatls {

enum class BaselineKind {
    PicardGtilde,      // potential gtilde(y_k), zero source
    NewtonUndamped,    // least-squares step with lambda forced to 1
    ControlledVariant, // potential g'(y_k), source g'(y_k) y_k - g(y_k)
    FixedPointK,       // zero potential, source -g(z_k)
    WeightedPicard,    // same linearization as PicardGtilde under the weighted cost
};

const char* baseline_name(BaselineKind kind);
BaselineKind baseline_from_name(const std::string& name);

/// One baseline linearization step: solves the weighted null-control problem
/// of the step's linear equation with initial datum u0 and returns the fresh
/// controlled pair, residual folded as in the least-squares module so
/// E(pair) = 0 exactly at a fixed point.
ControlPair picard_step(const LSContext& ctx, const ControlPair& prev,
                        const SpatialFunction& u0);
ControlPair variant_step(const LSContext& ctx, const ControlPair& prev,
                         const SpatialFunction& u0);
ControlPair fixedpointK_step(const LSContext& ctx, const ControlPair& prev,
                             const SpatialFunction& u0);
/// Identical to the damped update with lambda = 1 (no line search).
void newton_step(const LSContext& ctx, ControlPair& pair);

/// rho-weighted contraction ratio ||rho(K z1 - K z2)|| / ||rho(z1 - z2)|| of
/// the simple fixed-point map.
double fixedpointK_contraction(const LSContext& ctx, const ControlPair& z1,
                               const ControlPair& z2, const SpatialFunction& u0);

struct BaselineResult {
    std::string method;
    ControlPair pair;
    Field y_initial, f_initial;
    std::vector<IterationRecord> records;
    bool converged = false;
    bool diverged = false;
    std::string stop_reason;
    double terminal_l2 = 0.0;
    double E_strict = 0.0;
    double max_step_diff = 0.0;  // sup-norm move of the last step
};

struct BaselineConfig {
    double tol_sqrtE = -1.0;  // auto as in LSConfig
    int max_iter = 50;
    double M_cap = -1.0;      // divergence flagged at 10 * M_cap
    double m = 2.0;           // Newton ignores this (lambda = 1)
};

BaselineResult run_baseline(BaselineKind kind, std::shared_ptr<const SpaceTimeGrid> grid,
                            WeightParams wp, WeightOptions wopts, const NonlinearitySpec& g,
                            const SpatialFunction& u0, const BaselineConfig& config);

} // namespace heatls
