#include "heatls/weights.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace heatls {

PsiTilde::PsiTilde(Interval omega, double xstar) : xstar_(xstar) {
    if (!(xstar > omega.a && xstar < omega.b))
        throw std::invalid_argument("PsiTilde: xstar must lie inside omega");
    // g1/(g1+g2) = xstar with both exponents >= 1.
    if (xstar <= 0.5) {
        g1_ = 1.0;
        g2_ = (1.0 - xstar) / xstar;
    } else {
        g2_ = 1.0;
        g1_ = xstar / (1.0 - xstar);
    }
    const double peak = std::pow(xstar, g1_) * std::pow(1.0 - xstar, g2_);
    scale_ = 0.99 / peak;
}

double PsiTilde::operator()(double x) const {
    if (x <= 0.0 || x >= 1.0) return 0.0;
    return scale_ * std::pow(x, g1_) * std::pow(1.0 - x, g2_);
}

double PsiTilde::deriv(double x) const {
    if (x <= 0.0)
        return g1_ == 1.0 ? scale_ : 0.0;
    if (x >= 1.0)
        return g2_ == 1.0 ? -scale_ : 0.0;
    return scale_ * std::pow(x, g1_ - 1.0) * std::pow(1.0 - x, g2_ - 1.0) *
           (g1_ * (1.0 - x) - g2_ * x);
}

namespace {

// Quintic Hermite shape functions on [0,1] with (value, d, d2) data at both
// ends; only the four non-trivially-weighted ones are needed here.
double q_h0(double u) { return 1.0 + u * u * u * (-10.0 + u * (15.0 - 6.0 * u)); }
double q_h3(double u) { return u * u * u * (10.0 + u * (-15.0 + 6.0 * u)); }
double q_h4(double u) { return u * u * u * (-4.0 + u * (7.0 - 3.0 * u)); }
double q_h5(double u) { return u * u * u * (0.5 + u * (-1.0 + 0.5 * u)); }

double bridge_value(double u, double T1) {
    return q_h0(u) + q_h3(u) / T1 + q_h4(u) / T1 + 2.0 * q_h5(u) / T1;
}

bool bridge_monotone(double T1) {
    double prev = bridge_value(0.0, T1);
    for (int i = 1; i <= 2000; ++i) {
        const double cur = bridge_value(i / 2000.0, T1);
        if (cur < prev - 1e-12) return false;
        prev = cur;
    }
    return true;
}

} // namespace

WeightSet::WeightSet(WeightParams params, Interval omega, double T, WeightOptions options)
    : params_(params), options_(options), omega_(omega), T_(T),
      psi_(omega, params.xstar > 0 ? params.xstar : 0.5 * (omega.a + omega.b)) {
    if (!(params_.s >= 1.0))
        throw std::invalid_argument("WeightSet: s must be >= 1");
    if (!(params_.lambda0 >= 1.0))
        throw std::invalid_argument("WeightSet: lambda0 must be >= 1");
    if (!(params_.s0 >= 1.0))
        throw std::invalid_argument("WeightSet: s0 must be >= 1");
    if (!(T > 0.0)) throw std::invalid_argument("WeightSet: T must be positive");
    params_.xstar = psi_.xstar();

    const double cap = std::min(0.25, 3.0 * T / 8.0);
    T1_ = params_.T1 > 0.0 ? params_.T1 : 0.9 * cap;
    if (!(T1_ > 0.0 && T1_ < cap))
        throw std::invalid_argument("WeightSet: T1 must satisfy 0 < T1 < min(1/4, 3T/8)");
    // The quintic bridge is only admissible while increasing; shrink T1 until
    // the numeric check passes.
    int guard = 0;
    while (!bridge_monotone(T1_)) {
        T1_ *= 0.75;
        if (++guard > 60)
            throw std::runtime_error("WeightSet: could not find a monotone theta bridge");
    }
    params_.T1 = T1_;

    mu_ = params_.s * params_.lambda0 * params_.lambda0 * std::exp(2.0 * params_.lambda0);

    const double l = params_.lambda0;
    const double off = options_.psi_offset;
    // Envelope sup is at the boundary where psi_tilde = 0.
    amplitude_ = l * std::exp(12.0 * l) - std::exp(l * off);
    if (!(amplitude_ > 0.0))
        throw std::invalid_argument("WeightSet: envelope is not positive; psi_offset too large");
    env_max_ = options_.normalize_amplitude ? 1.0 : amplitude_;
    const double raw_min = l * std::exp(12.0 * l) - std::exp(l * (psi_(psi_.xstar()) + off));
    env_min_ = options_.normalize_amplitude ? raw_min / amplitude_ : raw_min;

    // theta >= 1 on [0,T) with equality on the plateau, so the infimum of
    // log rho over Q_T is s * env_min.
    log_shift_ = options_.center_log ? -params_.s * env_min_ : 0.0;
    c_ = 2.0 * env_max_;
}

double WeightSet::envelope(double x) const {
    const double l = params_.lambda0;
    const double raw = l * std::exp(12.0 * l) - std::exp(l * (psi_(x) + options_.psi_offset));
    return options_.normalize_amplitude ? raw / amplitude_ : raw;
}

double WeightSet::theta(double t) const {
    if (!(t >= 0.0 && t < T_))
        throw std::domain_error("WeightSet::theta: t must satisfy 0 <= t < T (t=" +
                                std::to_string(t) + ")");
    if (t <= 0.25 * T_) {
        const double arg = 1.0 - 4.0 * t / T_;
        // exp(mu*log(arg)) underflows to 0 near the branch end; theta -> 1.
        if (arg <= 0.0) return 1.0;
        return 1.0 + std::exp(mu_ * std::log(arg));
    }
    if (t <= T_ - 2.0 * T1_) return 1.0;
    if (t < T_ - T1_) return theta_bridge(t);
    return 1.0 / (T_ - t);
}

double WeightSet::theta_bridge(double t) const {
    const double u = (t - (T_ - 2.0 * T1_)) / T1_;
    return bridge_value(u, T1_);
}

WeightSet::Logs WeightSet::eval(double x, double t) const {
    const double th = theta(t);
    const double l = params_.lambda0;
    const double psih = psi_(x) + options_.psi_offset;
    const double xi = th * std::exp(l * psih);
    const double phi = th * envelope(x);
    const double ln_xi = std::log(th) + l * psih;
    const double log_rho = params_.s * phi + log_shift_;
    return {phi, xi, log_rho, log_rho - 1.5 * ln_xi, log_rho - ln_xi};
}

WeightSet WeightSet::with_s(double s) const {
    WeightParams p = params_;
    p.s = s;
    return WeightSet(p, omega_, T_, options_);
}

double carleman_ratio(const Field& p, const Field* A, const WeightSet& w) {
    const SpaceTimeGrid& g = p.grid();
    const double s = w.s(), l0 = w.lambda0();
    const double ln_s = std::log(s), ln_l0 = std::log(l0);
    const double t_cap = g.weight_time_cap();

    LogSum lhs_grad0, lhs_val0, lhs_grad, lhs_val, rhs_op, rhs_obs;

    // t = 0 boundary terms (spatial quadrature on the initial level).
    for (int ix = 0; ix < g.nx(); ++ix)
        for (int a = 0; a < g.nqx(); ++a) {
            const double x = g.quad_x(ix, a);
            const double wq = g.qx().weight[a] * g.hx();
            const auto lw = w.eval(x, 0.0);
            const SpatialJet j = p.eval_level(0, x);
            if (j.dx != 0.0)
                lhs_grad0.add_log(std::log(wq) - 2.0 * lw.log_rho + 2.0 * std::log(std::fabs(j.dx)));
            if (j.v != 0.0)
                lhs_val0.add_log(std::log(wq) + 3.0 * ln_s + 4.0 * ln_l0 + 14.0 * l0 -
                                 2.0 * lw.log_rho + 2.0 * std::log(std::fabs(j.v)));
        }

    g.for_each_quad([&](std::size_t, int ix, int, int, int, double x, double t, double wq) {
        const auto lw = w.eval(x, std::min(t, t_cap));
        const Jet j = p.jet(x, t);
        const double av = A ? A->jet(x, t).v : 0.0;
        const double lstar = -j.dt - j.dxx + av * j.v;
        const double ln_w = std::log(wq);
        if (j.dx != 0.0)
            lhs_grad.add_log(ln_w + ln_s + 2.0 * ln_l0 - 2.0 * lw.log_rho1 +
                             2.0 * std::log(std::fabs(j.dx)));
        if (j.v != 0.0)
            lhs_val.add_log(ln_w + 3.0 * ln_s + 4.0 * ln_l0 - 2.0 * lw.log_rho0 +
                            2.0 * std::log(std::fabs(j.v)));
        if (lstar != 0.0)
            rhs_op.add_log(ln_w - 2.0 * lw.log_rho + 2.0 * std::log(std::fabs(lstar)));
        if (g.element_in_omega(ix) && j.v != 0.0)
            rhs_obs.add_log(ln_w + 3.0 * ln_s + 4.0 * ln_l0 - 2.0 * lw.log_rho0 +
                            2.0 * std::log(std::fabs(j.v)));
    });

    LogSum lhs, rhs;
    for (const LogSum* part : {&lhs_grad0, &lhs_val0, &lhs_grad, &lhs_val})
        if (!part->total().is_zero()) lhs.add_log(part->total().ln);
    for (const LogSum* part : {&rhs_op, &rhs_obs})
        if (!part->total().is_zero()) rhs.add_log(part->total().ln);

    const LogValue num = lhs.total(), den = rhs.total();
    if (num.is_zero() && den.is_zero()) return 0.0;  // p == 0 convention
    return (num / den).value();
}

} // namespace heatls
