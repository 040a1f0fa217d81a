#pragma once

#include <array>
#include <memory>
#include <vector>

namespace heatls {

struct Interval {
    double a = 0.0;
    double b = 0.0;
};

/// 1D Gauss-Legendre rule mapped to [0,1]. n in [2,5].
struct GaussRule {
    std::vector<double> node;
    std::vector<double> weight;
    explicit GaussRule(int n);
};

/// Tensor-product space-time mesh of Q_T = (0,1) x (0,T).
///
/// Space: nx uniform cells on (0,1); nodes carry value + x-derivative dofs
/// (C1 cubic Hermite). Time: nt uniform cells; continuous piecewise-linear.
/// The control region omega = (a,b) is snapped to the nearest spatial nodes
/// at construction so its indicator is exact on every element.
class SpaceTimeGrid {
public:
    SpaceTimeGrid(int nx, int nt, double T, Interval omega);

    int nx() const { return nx_; }
    int nt() const { return nt_; }
    double T() const { return T_; }
    double hx() const { return hx_; }
    double ht() const { return ht_; }

    double x(int i) const { return i * hx_; }
    double t(int j) const { return j * ht_; }

    int omega_begin() const { return ia_; }  // node index of snapped a
    int omega_end() const { return ib_; }    // node index of snapped b
    double omega_a() const { return ia_ * hx_; }
    double omega_b() const { return ib_ * hx_; }
    bool element_in_omega(int ix) const { return ix >= ia_ && ix < ib_; }

    /// Weights are only evaluated at times <= this cap; beyond it the
    /// blow-up profile is saturated (last half-cell clip).
    double weight_time_cap() const { return T_ * (1.0 - 1.0 / (2.0 * nt_)); }

    /// Quadrature: 4 Gauss points per x-cell (exact through degree 7, so
    /// products of cubics are handled), 3 per t-cell.
    const GaussRule& qx() const { return qx_; }
    const GaussRule& qt() const { return qt_; }
    int nqx() const { return static_cast<int>(qx_.node.size()); }
    int nqt() const { return static_cast<int>(qt_.node.size()); }

    std::size_t quad_count() const {
        return static_cast<std::size_t>(nx_) * nt_ * nqx() * nqt();
    }
    /// Flat index of quadrature point (ix, jt, a, b); element-major, time-slab
    /// outermost so points are t-ordered within an element column.
    std::size_t quad_index(int ix, int jt, int a, int b) const {
        return ((static_cast<std::size_t>(jt) * nx_ + ix) * nqt() + b) * nqx() + a;
    }
    double quad_x(int ix, int a) const { return (ix + qx_.node[a]) * hx_; }
    double quad_t(int jt, int b) const { return (jt + qt_.node[b]) * ht_; }
    double quad_w(int a, int b) const { return qx_.weight[a] * hx_ * qt_.weight[b] * ht_; }

    /// Loop helper: calls fn(g, ix, jt, a, b, x, t, w) for every point.
    template <typename Fn>
    void for_each_quad(const Fn& fn) const {
        for (int jt = 0; jt < nt_; ++jt)
            for (int ix = 0; ix < nx_; ++ix)
                for (int b = 0; b < nqt(); ++b)
                    for (int a = 0; a < nqx(); ++a)
                        fn(quad_index(ix, jt, a, b), ix, jt, a, b,
                           quad_x(ix, a), quad_t(jt, b), quad_w(a, b));
    }

private:
    int nx_, nt_;
    double T_, hx_, ht_;
    int ia_, ib_;
    GaussRule qx_;
    GaussRule qt_;
};

/// Builds a grid, snapping omega to mesh nodes. Preconditions: nx, nt >= 4,
/// T > 0, 0 < a < b < 1 with the snapped region staying strictly interior.
/// Throws std::invalid_argument otherwise.
std::shared_ptr<const SpaceTimeGrid> make_grid(int nx, int nt, double T, Interval omega);

} // namespace heatls
