#pragma once

#include <optional>
#include <string>
#include <vector>

#include "heatls/field.hpp"
#include "heatls/grid.hpp"
#include "heatls/linear_control.hpp"
#include "heatls/nonlinearity.hpp"
#include "heatls/weights.hpp"

namespace heatls {

enum class PairSpace { A0, A };

/// A state-control pair with its cached residual at quadrature points.
///
/// The canonical residual r is maintained by the exact update recursion
///   r_next = (1 - lambda) r + [g(y - lambda Y) - g(y) + lambda g'(y) Y],
/// which is an identity as long as the linear-solve defect of each direction
/// is folded into the accumulated control values f_all (control on omega,
/// defect elsewhere). The exported field f collects the projected controls;
/// the gap between r and the exported pair's strong residual is the tracked
/// discretization floor.
struct ControlPair {
    Field y;
    Field f;
    std::vector<double> r;      // canonical residual at quadrature points
    std::vector<double> f_all;  // accumulated control-plus-defect values
    std::vector<double> y_v;    // y at quadrature points
    std::vector<double> y_lin;  // (dt - dxx) y at quadrature points
    double E = 0.0;
    PairSpace space = PairSpace::A;
};

/// Descent direction: the null-controlled pair of the linearized equation
/// driven by the residual, plus the defect-folded control values.
struct MinimalPair {
    Field Y;
    Field v_field;                // projected control of the linear solve
    std::vector<double> Y_v;
    std::vector<double> Y_lin;
    std::vector<double> Ftilde;   // (dt - dxx + g'(y)) Y - r at every point
    double log_a0_norm = 0.0;     // ln of the weighted graph norm of (Y, F)
    double defect_norm = 0.0;     // rho0-weighted norm of Ftilde outside omega
    double solve_residual = 0.0;
    double cond_estimate = 0.0;
};

struct LineSearchResult {
    double lambda = 0.0;
    double E_next = 0.0;
    int evaluations = 0;
};

enum class LSInit { Linear, Cutoff };

struct LSConfig {
    double m = 2.0;             // line-search cap, >= 1
    double tol_sqrtE = -1.0;    // stop when sqrt(E) <= tol; auto 1e-8 (1+sqrt(E0))
    int max_iter = 50;
    double s_init = 1.0;
    double s_growth = 1.5;
    int max_restarts = 5;
    double M_cap = -1.0;        // sup-norm guard; auto 50 (1 + sup|u0|)
    LSInit init = LSInit::Linear;
    bool record_directions = false;  // keep (lambda_k, Y_k) for algebra checks
};

struct IterationRecord {
    int k = 0;
    double E = 0.0;
    double sqrtE = 0.0;
    double lambda = 0.0;   // step chosen at this iterate (nan on the last row)
    double y_sup = 0.0;
    double s = 0.0;
    double order = 0.0;    // trailing convergence-order estimate (nan early)
    double c1 = 0.0;       // instantaneous contraction-constant fit (nan early)
    double seconds = 0.0;
    double drift = 0.0;    // recursion-vs-direct residual consistency
};

struct LSResult {
    ControlPair pair;
    Field y_initial, f_initial;  // initializer of the final phase
    std::vector<IterationRecord> records;
    std::size_t final_phase_begin = 0;  // index of the last fixed-s phase
    int restarts = 0;
    bool converged = false;
    std::string stop_reason;
    double s_final = 0.0;
    double sqrtE0 = 0.0;     // at the start of the final phase
    double E_strict = 0.0;   // rho0-weighted residual of the exported (y, f)
    double defect_l2 = 0.0;  // accumulated fold defect, rho0-weighted
    double terminal_l2 = 0.0;
    double max_drift = 0.0;
    std::vector<double> lambdas;        // final phase
    std::vector<Field> directions;      // only when record_directions
};

/// Shared context for one fixed-s phase: grid + weights + nonlinearity.
class LSContext {
public:
    LSContext(std::shared_ptr<const SpaceTimeGrid> grid, WeightSet weights,
              NonlinearitySpec g);

    const SpaceTimeGrid& grid() const { return *grid_; }
    std::shared_ptr<const SpaceTimeGrid> grid_ptr() const { return grid_; }
    const WeightSet& weights() const { return weights_; }
    const WeightedQuadrature& wq() const { return wq_; }
    const NonlinearitySpec& g() const { return g_; }

    /// 1/2 || rho0 r ||^2 with a non-finite check that names the offending
    /// quadrature point.
    double energy(const std::vector<double>& r) const;
    /// Independent accumulation path (compensated sum, level-major traversal)
    /// for the cached-energy oracle.
    double energy_recomputed(const std::vector<double>& r) const;

    /// Minimal controlled pair for the linearized equation at (y, f):
    /// potential g'(y), source r, zero initial datum. Throws NeedLargerS when
    /// s < max(|g'(y)|_inf^(2/3), s0).
    MinimalPair minimal_pair(const ControlPair& pair) const;

    /// argmin over [0, m] of E((y,f) - lambda (Y,F)) via the residual
    /// recursion; guarantees E(out) <= min(E(0), E(1)).
    LineSearchResult line_search(const ControlPair& pair, const MinimalPair& mp,
                                 double m) const;

    /// In-place damped update by lambda along the direction; returns the
    /// recursion-vs-direct drift of the updated residual, relative to the
    /// larger of the updated residual norm and `scale` (pass the phase's
    /// initial residual norm so converged iterates are not divided by noise).
    double apply_step(ControlPair& pair, const MinimalPair& mp, double lambda,
                      double scale = 0.0) const;

    /// Controlled pair of the linear problem (g = 0 data path): the standard
    /// initial guess. E = 1/2 ||rho0 g(y0)||^2 by construction.
    ControlPair initialize_linear(const SpatialFunction& u0) const;

    /// Cut-off of the free heat evolution: y = chi(t) y*, f = 0, with
    /// chi smooth, 1 at t=0 and 0 on [T/2, T].
    ControlPair initialize_cutoff(const SpatialFunction& u0) const;

    /// Strong residual of the exported pair (field f, not the folded values).
    double energy_strict(const ControlPair& pair) const;
    double defect_l2(const ControlPair& pair) const;

    double gprime_sup(const ControlPair& pair) const;

    /// Rebuilds quadrature sweeps (y_v, y_lin) of a pair from its fields.
    void refresh_sweeps(ControlPair& pair) const;

private:
    ControlPair from_null_control(const NullControlResult& nc, const SpatialFunction* u0) const;

    std::shared_ptr<const SpaceTimeGrid> grid_;
    WeightSet weights_;
    WeightedQuadrature wq_;
    NonlinearitySpec g_;
};

/// Full damped-Newton loop with the adaptive-s restart policy: a fixed-s
/// phase runs until convergence; the sup-norm guard, an admissibility
/// violation, or a two-step stall restarts from scratch at s * s_growth.
LSResult leastsquares_solve(std::shared_ptr<const SpaceTimeGrid> grid, WeightParams wp,
                            WeightOptions wopts, const NonlinearitySpec& g,
                            const SpatialFunction& u0, const LSConfig& config);

/// Iteration count after which the order-(1+p) regime is guaranteed:
/// floor((1+p)/p ((1+p)^(1/p) c2 sqrt(E0) - 1)) + 1, clamped to 1 when the
/// argument is nonpositive. p = 0 is not applicable (throws).
int predicted_k0(double E0, double c2, double p);

} // namespace heatls
