#include "heatls/field.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace heatls {

Field::Field(std::shared_ptr<const SpaceTimeGrid> grid, bool dirichlet)
    : grid_(std::move(grid)), dirichlet_(dirichlet) {
    dofs_.assign(static_cast<std::size_t>(grid_->nt() + 1) * stride(), 0.0);
}

void Field::set_value(int level, int node, double v) {
    if (dirichlet_ && (node == 0 || node == grid_->nx()) && v != 0.0)
        throw std::logic_error("Field: attempt to set a boundary value dof of a "
                               "homogeneous-Dirichlet field to a nonzero value");
    dofs_[idx(level, node, 0)] = v;
}

void Field::set_dof(std::size_t flat, double v) {
    dofs_[flat] = v;
}

Jet Field::jet(double x, double t) const {
    const int nx = grid_->nx(), nt = grid_->nt();
    const double hx = grid_->hx(), ht = grid_->ht();

    int ix = static_cast<int>(x / hx);
    ix = std::clamp(ix, 0, nx - 1);
    const double u = x / hx - ix;

    int jt = static_cast<int>(t / ht);
    jt = std::clamp(jt, 0, nt - 1);
    const double v = t / ht - jt;

    double B[4], Bx[4], Bxx[4];
    HermiteBasis::eval(u, hx, B);
    HermiteBasis::eval_dx(u, hx, Bx);
    HermiteBasis::eval_dxx(u, hx, Bxx);

    double lv[2] = {0, 0}, ldx[2] = {0, 0}, ldxx[2] = {0, 0};
    for (int a = 0; a < 2; ++a) {
        const int level = jt + a;
        const double c0 = dofs_[idx(level, ix, 0)];
        const double c1 = dofs_[idx(level, ix, 1)];
        const double c2 = dofs_[idx(level, ix + 1, 0)];
        const double c3 = dofs_[idx(level, ix + 1, 1)];
        lv[a] = c0 * B[0] + c1 * B[1] + c2 * B[2] + c3 * B[3];
        ldx[a] = c0 * Bx[0] + c1 * Bx[1] + c2 * Bx[2] + c3 * Bx[3];
        ldxx[a] = c0 * Bxx[0] + c1 * Bxx[1] + c2 * Bxx[2] + c3 * Bxx[3];
    }

    Jet out;
    out.v = (1.0 - v) * lv[0] + v * lv[1];
    out.dx = (1.0 - v) * ldx[0] + v * ldx[1];
    out.dxx = (1.0 - v) * ldxx[0] + v * ldxx[1];
    out.dt = (lv[1] - lv[0]) / ht;
    return out;
}

SpatialJet Field::eval_level(int level, double x) const {
    const int nx = grid_->nx();
    const double hx = grid_->hx();
    int ix = static_cast<int>(x / hx);
    ix = std::clamp(ix, 0, nx - 1);
    const double u = x / hx - ix;

    double B[4], Bx[4], Bxx[4];
    HermiteBasis::eval(u, hx, B);
    HermiteBasis::eval_dx(u, hx, Bx);
    HermiteBasis::eval_dxx(u, hx, Bxx);

    const double c0 = dofs_[idx(level, ix, 0)];
    const double c1 = dofs_[idx(level, ix, 1)];
    const double c2 = dofs_[idx(level, ix + 1, 0)];
    const double c3 = dofs_[idx(level, ix + 1, 1)];
    return {c0 * B[0] + c1 * B[1] + c2 * B[2] + c3 * B[3],
            c0 * Bx[0] + c1 * Bx[1] + c2 * Bx[2] + c3 * Bx[3],
            c0 * Bxx[0] + c1 * Bxx[1] + c2 * Bxx[2] + c3 * Bxx[3]};
}

void Field::axpy(double a, const Field& other) {
    if (other.grid_.get() != grid_.get())
        throw std::invalid_argument("Field::axpy: grid mismatch");
    for (std::size_t i = 0; i < dofs_.size(); ++i) dofs_[i] += a * other.dofs_[i];
}

void Field::scale(double a) {
    for (double& d : dofs_) d *= a;
}

void Field::set_level(int level, const std::function<double(double)>& f,
                      const std::function<double(double)>& df) {
    const int nx = grid_->nx();
    for (int i = 0; i <= nx; ++i) {
        double v = f(grid_->x(i));
        if (dirichlet_ && (i == 0 || i == nx)) v = 0.0;
        dofs_[idx(level, i, 0)] = v;
        dofs_[idx(level, i, 1)] = df(grid_->x(i));
    }
}

double Field::max_abs_value() const {
    double m = 0.0;
    grid_->for_each_quad([&](std::size_t, int, int, int, int, double x, double t, double) {
        m = std::max(m, std::fabs(jet(x, t).v));
    });
    return m;
}

double Field::spatial_l2(int level) const {
    const auto& g = *grid_;
    double acc = 0.0;
    for (int ix = 0; ix < g.nx(); ++ix)
        for (int a = 0; a < g.nqx(); ++a) {
            const double v = eval_level(level, g.quad_x(ix, a)).v;
            acc += g.qx().weight[a] * g.hx() * v * v;
        }
    return std::sqrt(acc);
}

double Field::spatial_h1_semi(int level) const {
    const auto& g = *grid_;
    double acc = 0.0;
    for (int ix = 0; ix < g.nx(); ++ix)
        for (int a = 0; a < g.nqx(); ++a) {
            const double v = eval_level(level, g.quad_x(ix, a)).dx;
            acc += g.qx().weight[a] * g.hx() * v * v;
        }
    return std::sqrt(acc);
}

void Field::dump_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("Field::dump_csv: cannot open " + path);
    out << "x,t,value\n";
    out.precision(17);
    for (int j = 0; j <= grid_->nt(); ++j)
        for (int i = 0; i <= grid_->nx(); ++i)
            out << grid_->x(i) << ',' << grid_->t(j) << ',' << value(j, i) << '\n';
}

void Field::dump_binary(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("Field::dump_binary: cannot open " + path);
    const char magic[8] = {'H', 'L', 'S', 'F', 'L', 'D', '0', '1'};
    out.write(magic, 8);
    const std::uint32_t nx = grid_->nx(), nt = grid_->nt();
    const double T = grid_->T();
    out.write(reinterpret_cast<const char*>(&nx), 4);
    out.write(reinterpret_cast<const char*>(&nt), 4);
    out.write(reinterpret_cast<const char*>(&T), 8);
    for (int j = 0; j <= grid_->nt(); ++j)
        for (int i = 0; i <= grid_->nx(); ++i) {
            const double v = value(j, i);
            out.write(reinterpret_cast<const char*>(&v), 8);
        }
}

// ---------------------------------------------------------------------------
// SpatialProjector

struct SpatialProjector::Impl {
    std::shared_ptr<const SpaceTimeGrid> grid;
    Mode mode;
    std::vector<int> dof_of_full;  // full spatial dof (2i+c) -> compact index or -1
    std::vector<int> full_of_dof;
    int elem_begin = 0, elem_end = 0;
    Eigen::LDLT<Eigen::MatrixXd> mass;
};

SpatialProjector::SpatialProjector(std::shared_ptr<const SpaceTimeGrid> grid, Mode mode)
    : impl_(std::make_unique<Impl>()) {
    impl_->grid = std::move(grid);
    impl_->mode = mode;
    const auto& g = *impl_->grid;
    const int nx = g.nx();
    const int nfull = 2 * (nx + 1);

    impl_->dof_of_full.assign(nfull, -1);
    auto keep = [&](int node, int comp) {
        switch (mode) {
            case Mode::Full: return true;
            case Mode::FullDirichlet: return !(comp == 0 && (node == 0 || node == nx));
            case Mode::OmegaInside:
                return node > g.omega_begin() && node < g.omega_end();
        }
        return false;
    };
    for (int i = 0; i <= nx; ++i)
        for (int c = 0; c < 2; ++c)
            if (keep(i, c)) {
                impl_->dof_of_full[2 * i + c] = static_cast<int>(impl_->full_of_dof.size());
                impl_->full_of_dof.push_back(2 * i + c);
            }

    impl_->elem_begin = mode == Mode::OmegaInside ? g.omega_begin() : 0;
    impl_->elem_end = mode == Mode::OmegaInside ? g.omega_end() : nx;

    const int n = static_cast<int>(impl_->full_of_dof.size());
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    double B[4];
    for (int ix = impl_->elem_begin; ix < impl_->elem_end; ++ix) {
        for (int a = 0; a < g.nqx(); ++a) {
            HermiteBasis::eval(g.qx().node[a], g.hx(), B);
            const double w = g.qx().weight[a] * g.hx();
            const int local_full[4] = {2 * ix, 2 * ix + 1, 2 * (ix + 1), 2 * (ix + 1) + 1};
            for (int r = 0; r < 4; ++r) {
                const int ri = impl_->dof_of_full[local_full[r]];
                if (ri < 0) continue;
                for (int c = 0; c < 4; ++c) {
                    const int ci = impl_->dof_of_full[local_full[c]];
                    if (ci < 0) continue;
                    M(ri, ci) += w * B[r] * B[c];
                }
            }
        }
    }
    impl_->mass.compute(M);
    if (impl_->mass.info() != Eigen::Success)
        throw std::runtime_error("SpatialProjector: mass matrix factorization failed");
}

SpatialProjector::~SpatialProjector() = default;
SpatialProjector::SpatialProjector(SpatialProjector&&) noexcept = default;
SpatialProjector& SpatialProjector::operator=(SpatialProjector&&) noexcept = default;

void SpatialProjector::project_level(const std::function<double(int, int)>& values, int level,
                                     Field& out) const {
    const auto& g = *impl_->grid;
    const int n = static_cast<int>(impl_->full_of_dof.size());
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
    double B[4];
    for (int ix = impl_->elem_begin; ix < impl_->elem_end; ++ix) {
        for (int a = 0; a < g.nqx(); ++a) {
            HermiteBasis::eval(g.qx().node[a], g.hx(), B);
            const double w = g.qx().weight[a] * g.hx();
            const double f = values(ix, a);
            if (f == 0.0) continue;
            const int local_full[4] = {2 * ix, 2 * ix + 1, 2 * (ix + 1), 2 * (ix + 1) + 1};
            for (int r = 0; r < 4; ++r) {
                const int ri = impl_->dof_of_full[local_full[r]];
                if (ri >= 0) rhs(ri) += w * f * B[r];
            }
        }
    }
    const Eigen::VectorXd sol = impl_->mass.solve(rhs);
    const std::size_t base = static_cast<std::size_t>(level) * out.stride();
    for (int full = 0; full < 2 * (g.nx() + 1); ++full) {
        const int ci = impl_->dof_of_full[full];
        out.set_dof(base + full, ci >= 0 ? sol(ci) : 0.0);
    }
}

} // namespace heatls
