#pragma once

#include <memory>

#include "heatls/field.hpp"
#include "heatls/grid.hpp"

namespace heatls {

struct WeightParams {
    double s = 1.0;        // Carleman parameter, >= 1
    double lambda0 = 1.0;  // fixed lambda, >= 1
    double T1 = -1.0;      // bridge width; auto: 0.9 * min(1/4, 3T/8)
    double s0 = 1.0;       // admissibility threshold, >= 1
    double xstar = -1.0;   // critical point of psi_tilde; auto: omega midpoint
};

struct WeightOptions {
    /// Divide the spatial envelope lambda0*e^(12*lambda0) - e^(lambda0*psi_hat)
    /// by its sup, so log-weights grow like s*theta(t). The exact family makes
    /// exp(s*phi) span far beyond double range on any practical mesh; the
    /// normalized family keeps every solver quantity representable while
    /// preserving all ratios, trends and the blow-up structure. Identity and
    /// bound checks on the exact family run with this off.
    bool normalize_amplitude = false;
    /// Shift log rho so its infimum over Q_T is zero (a global constant factor
    /// on all three weights; every algorithmic decision is invariant under it).
    bool center_log = false;
    /// Offset added to psi_tilde inside xi and the envelope (psi_hat =
    /// psi_tilde + offset). The exact family uses 6; solver runs may peel it
    /// to 0: the offset inflates the control-to-state price ratio xi^(3/2)
    /// by e^(9 lambda0 offset/6), which at desk scale collapses the damped
    /// phase into a single Newton step. All within-family identities
    /// (rho0 = xi^(-3/2) rho, rho1 = xi^(-1) rho) hold for any offset.
    double psi_offset = 6.0;
};

/// Spatial profile psi_tilde(x) = 0.99 * x^g1 (1-x)^g2 / max, with exponents
/// >= 1 chosen so the sole critical point sits at xstar inside omega.
class PsiTilde {
public:
    PsiTilde(Interval omega, double xstar);
    double operator()(double x) const;
    double deriv(double x) const;
    double xstar() const { return xstar_; }

private:
    double g1_, g2_, scale_, xstar_;
};

/// The weight family: theta(t), phi, xi and the logs of rho, rho_0, rho_1.
/// Everything is evaluated through logs; rho itself is never materialized.
class WeightSet {
public:
    WeightSet(WeightParams params, Interval omega, double T,
              WeightOptions options = {});

    struct Logs {
        double phi;       // phi(x,t) of this family
        double xi;        // xi(x,t) (never normalized)
        double log_rho;   // s*phi + shift
        double log_rho0;  // log_rho - (3/2) ln xi
        double log_rho1;  // log_rho - ln xi
    };

    /// Requires 0 <= t < T; throws std::domain_error otherwise.
    double theta(double t) const;
    Logs eval(double x, double t) const;

    double s() const { return params_.s; }
    double lambda0() const { return params_.lambda0; }
    double s0() const { return params_.s0; }
    double T1() const { return T1_; }
    double T() const { return T_; }
    double mu() const { return mu_; }
    const WeightParams& params() const { return params_; }
    const WeightOptions& options() const { return options_; }
    const PsiTilde& psi_tilde() const { return psi_; }
    double psi_hat(double x) const { return psi_(x) + options_.psi_offset; }

    /// c = sup_x phi(x,0) for this family (phi(.,0) = 2 * envelope).
    double c() const { return c_; }
    /// Spatial envelope K(x) (normalized by its sup when the option is set).
    double envelope(double x) const;
    double envelope_min() const { return env_min_; }
    double envelope_max() const { return env_max_; }
    double log_shift() const { return log_shift_; }

    /// Same parameters and envelope, different s (weights for a new phase).
    WeightSet with_s(double s) const;

private:
    double theta_bridge(double t) const;

    WeightParams params_;
    WeightOptions options_;
    Interval omega_;
    double T_;
    double T1_;
    double mu_;
    PsiTilde psi_;
    double amplitude_;  // sup_x of the raw envelope
    double env_min_, env_max_;
    double log_shift_;
    double c_;
};

/// Empirical constant of the observability-type inequality: ratio of the
/// four-term left side to the right side, with this family's s, lambda0
/// powers. Both sides are quadratic in p, so the ratio is scale-invariant;
/// accumulation runs in log space so the exact family is usable. Returns 0
/// for p identically zero (both sides vanish).
double carleman_ratio(const Field& p, const Field* A, const WeightSet& w);

} // namespace heatls
