#pragma once

#include <cmath>
#include <limits>

namespace heatls {

/// Nonnegative scalar stored by its natural logarithm, for quantities whose
/// magnitude can leave the double range (weighted norms, Carleman-side
/// integrals). ln == -inf encodes zero.
struct LogValue {
    double ln = -std::numeric_limits<double>::infinity();

    static LogValue zero() { return {}; }
    static LogValue from_log(double l) { return {l}; }
    static LogValue from_value(double v) {
        return v > 0.0 ? LogValue{std::log(v)} : LogValue{};
    }

    bool is_zero() const { return std::isinf(ln) && ln < 0; }
    /// May overflow to inf / underflow to 0; that is the honest answer.
    double value() const { return std::exp(ln); }

    friend LogValue operator*(LogValue a, LogValue b) { return {a.ln + b.ln}; }
    friend LogValue operator/(LogValue a, LogValue b) { return {a.ln - b.ln}; }
    friend bool operator<(LogValue a, LogValue b) { return a.ln < b.ln; }

    LogValue sqrt() const { return {0.5 * ln}; }
    LogValue pow(double e) const { return {e * ln}; }
};

/// Streaming sum of nonnegative terms given by their logs, kept stable by
/// rescaling against the running maximum (one-pass log-sum-exp).
class LogSum {
public:
    void add_log(double ln_term) {
        if (std::isinf(ln_term) && ln_term < 0) return;
        if (empty_) {
            max_ = ln_term;
            acc_ = 1.0;
            empty_ = false;
            return;
        }
        if (ln_term <= max_) {
            acc_ += std::exp(ln_term - max_);
        } else {
            acc_ = acc_ * std::exp(max_ - ln_term) + 1.0;
            max_ = ln_term;
        }
    }

    void add_value(double v) {
        if (v > 0.0) add_log(std::log(v));
    }

    LogValue total() const {
        if (empty_ || acc_ <= 0.0) return LogValue::zero();
        return LogValue::from_log(max_ + std::log(acc_));
    }

private:
    double max_ = 0.0;
    double acc_ = 0.0;
    bool empty_ = true;
};

/// Compensated (Kahan) accumulator, used by the recomputation oracles so a
/// second summation path does not share the naive path's rounding pattern.
class KahanSum {
public:
    void add(double x) {
        const double y = x - c_;
        const double t = s_ + y;
        c_ = (t - s_) - y;
        s_ = t;
    }
    double total() const { return s_; }

private:
    double s_ = 0.0;
    double c_ = 0.0;
};

} // namespace heatls
