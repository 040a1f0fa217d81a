#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "heatls/grid.hpp"
#include "heatls/logsum.hpp"

namespace heatls {

/// Point values of a field and its derivatives. dxx is piecewise polynomial
/// (no distributional part) because the spatial representation is C1; dt is
/// the slab derivative of the piecewise-linear-in-time representation.
struct Jet {
    double v = 0.0;
    double dx = 0.0;
    double dxx = 0.0;
    double dt = 0.0;
};

struct SpatialJet {
    double v = 0.0;
    double dx = 0.0;
    double dxx = 0.0;
};

/// Cubic Hermite shape functions on one cell, local coordinate u in [0,1],
/// cell width h. Index order: value-left, deriv-left, value-right, deriv-right.
struct HermiteBasis {
    static void eval(double u, double h, double out[4]) {
        const double u2 = u * u, u3 = u2 * u;
        out[0] = 2.0 * u3 - 3.0 * u2 + 1.0;
        out[1] = h * (u3 - 2.0 * u2 + u);
        out[2] = -2.0 * u3 + 3.0 * u2;
        out[3] = h * (u3 - u2);
    }
    static void eval_dx(double u, double h, double out[4]) {
        const double u2 = u * u;
        out[0] = (6.0 * u2 - 6.0 * u) / h;
        out[1] = 3.0 * u2 - 4.0 * u + 1.0;
        out[2] = (-6.0 * u2 + 6.0 * u) / h;
        out[3] = 3.0 * u2 - 2.0 * u;
    }
    static void eval_dxx(double u, double h, double out[4]) {
        out[0] = (12.0 * u - 6.0) / (h * h);
        out[1] = (6.0 * u - 4.0) / h;
        out[2] = (-12.0 * u + 6.0) / (h * h);
        out[3] = (6.0 * u - 2.0) / h;
    }
};

/// Scalar function on Q_T: C1 cubic Hermite in x, continuous piecewise-linear
/// in t. Dof layout is level-major; each time level stores (value, x-deriv)
/// per spatial node. Fields flagged homogeneous-Dirichlet keep their boundary
/// value dofs exactly zero.
class Field {
public:
    Field() = default;  // empty placeholder; usable only after assignment
    Field(std::shared_ptr<const SpaceTimeGrid> grid, bool dirichlet);

    const SpaceTimeGrid& grid() const { return *grid_; }
    std::shared_ptr<const SpaceTimeGrid> grid_ptr() const { return grid_; }
    bool dirichlet() const { return dirichlet_; }

    int stride() const { return 2 * (grid_->nx() + 1); }
    std::size_t dof_count() const { return dofs_.size(); }
    const std::vector<double>& dofs() const { return dofs_; }

    double value(int level, int node) const { return dofs_[idx(level, node, 0)]; }
    double deriv(int level, int node) const { return dofs_[idx(level, node, 1)]; }
    void set_value(int level, int node, double v);
    void set_deriv(int level, int node, double v) { dofs_[idx(level, node, 1)] = v; }
    void set_dof(std::size_t flat, double v);
    double dof(std::size_t flat) const { return dofs_[flat]; }

    std::size_t idx(int level, int node, int comp) const {
        return static_cast<std::size_t>(level) * stride() + 2 * node + comp;
    }

    Jet jet(double x, double t) const;
    SpatialJet eval_level(int level, double x) const;

    /// this += a * other (same grid required).
    void axpy(double a, const Field& other);
    void scale(double a);

    /// Interpolates nodal dofs of one time level from (f, f').
    void set_level(int level, const std::function<double(double)>& f,
                   const std::function<double(double)>& df);

    double max_abs_value() const;          // sup over quadrature points
    double spatial_l2(int level) const;    // L2(0,1) norm of the level trace
    double spatial_h1_semi(int level) const;

    void dump_csv(const std::string& path) const;
    void dump_binary(const std::string& path) const;

private:
    std::shared_ptr<const SpaceTimeGrid> grid_;
    std::vector<double> dofs_;
    bool dirichlet_ = false;
};

/// Residual evaluator for the linear part of the heat operator applied to a
/// field: (x,t) -> dt y - dxx y.
class HeatResidual {
public:
    explicit HeatResidual(const Field& y) : y_(&y) {}
    double operator()(double x, double t) const {
        const Jet j = y_->jet(x, t);
        return j.dt - j.dxx;
    }

private:
    const Field* y_;
};

inline HeatResidual heat_operator(const Field& y) { return HeatResidual(y); }

enum class Region { QT, OmegaT };

/// Gauss-quadrature approximation of (integral of w^2 u^2)^(1/2) over the
/// region. The weight callable returns log w(x,t); each term is formed from
/// the combined exponent log w + log|u| so balanced products of huge weights
/// and tiny values stay representable.
template <typename LogW>
double weighted_l2_norm(const Field& u, const LogW& logw, Region region) {
    const SpaceTimeGrid& g = u.grid();
    double acc = 0.0;
    g.for_each_quad([&](std::size_t, int ix, int, int, int, double x, double t, double w) {
        if (region == Region::OmegaT && !g.element_in_omega(ix)) return;
        const double uv = u.jet(x, t).v;
        if (uv == 0.0) return;
        const double term = std::exp(logw(x, t) + std::log(std::fabs(uv)));
        acc += w * term * term;
    });
    return std::sqrt(acc);
}

template <typename LogW>
LogValue weighted_l2_norm_log(const Field& u, const LogW& logw, Region region) {
    const SpaceTimeGrid& g = u.grid();
    LogSum acc;
    g.for_each_quad([&](std::size_t, int ix, int, int, int, double x, double t, double w) {
        if (region == Region::OmegaT && !g.element_in_omega(ix)) return;
        const double uv = u.jet(x, t).v;
        if (uv == 0.0) return;
        acc.add_log(std::log(w) + 2.0 * logw(x, t) + 2.0 * std::log(std::fabs(uv)));
    });
    return acc.total().sqrt();
}

/// Per-time-level spatial L2 projector onto the Hermite space (dense LDLT of
/// the 1D mass matrix, factored once per grid). Modes:
///   FullDirichlet - all dofs except boundary value dofs (pinned to 0),
///   Full          - all dofs,
///   OmegaInside   - value/deriv dofs of nodes strictly inside omega, so the
///                   projected function is supported exactly in closure(omega).
class SpatialProjector {
public:
    enum class Mode { Full, FullDirichlet, OmegaInside };

    SpatialProjector(std::shared_ptr<const SpaceTimeGrid> grid, Mode mode);
    ~SpatialProjector();
    SpatialProjector(SpatialProjector&&) noexcept;
    SpatialProjector& operator=(SpatialProjector&&) noexcept;

    /// values(ix, a) = function value at quadrature node a of x-cell ix.
    /// Writes the projected dofs of `level` into `out`.
    void project_level(const std::function<double(int, int)>& values, int level,
                       Field& out) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace heatls
