#include "heatls/grid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace heatls {

GaussRule::GaussRule(int n) {
    // Gauss-Legendre on [-1,1], closed forms, then mapped to [0,1].
    std::vector<double> xs, ws;
    switch (n) {
        case 2: {
            const double a = 1.0 / std::sqrt(3.0);
            xs = {-a, a};
            ws = {1.0, 1.0};
            break;
        }
        case 3: {
            const double a = std::sqrt(3.0 / 5.0);
            xs = {-a, 0.0, a};
            ws = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
            break;
        }
        case 4: {
            const double c = 2.0 / 7.0 * std::sqrt(6.0 / 5.0);
            const double a = std::sqrt(3.0 / 7.0 - c);
            const double b = std::sqrt(3.0 / 7.0 + c);
            const double wa = (18.0 + std::sqrt(30.0)) / 36.0;
            const double wb = (18.0 - std::sqrt(30.0)) / 36.0;
            xs = {-b, -a, a, b};
            ws = {wb, wa, wa, wb};
            break;
        }
        case 5: {
            const double c = 2.0 * std::sqrt(10.0 / 7.0);
            const double a = std::sqrt(5.0 - c) / 3.0;
            const double b = std::sqrt(5.0 + c) / 3.0;
            const double wa = (322.0 + 13.0 * std::sqrt(70.0)) / 900.0;
            const double wb = (322.0 - 13.0 * std::sqrt(70.0)) / 900.0;
            xs = {-b, -a, 0.0, a, b};
            ws = {wb, wa, 128.0 / 225.0, wa, wb};
            break;
        }
        default:
            throw std::invalid_argument("GaussRule: n must be in [2,5], got " + std::to_string(n));
    }
    node.resize(xs.size());
    weight.resize(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        node[i] = 0.5 * (1.0 + xs[i]);
        weight[i] = 0.5 * ws[i];
    }
}

SpaceTimeGrid::SpaceTimeGrid(int nx, int nt, double T, Interval omega)
    : nx_(nx), nt_(nt), T_(T), hx_(1.0 / nx), ht_(T / nt), ia_(0), ib_(0), qx_(4), qt_(3) {
    ia_ = static_cast<int>(std::lround(omega.a * nx));
    ib_ = static_cast<int>(std::lround(omega.b * nx));
}

std::shared_ptr<const SpaceTimeGrid> make_grid(int nx, int nt, double T, Interval omega) {
    if (nx < 4 || nt < 4)
        throw std::invalid_argument("make_grid: need nx >= 4 and nt >= 4");
    if (!(T > 0.0))
        throw std::invalid_argument("make_grid: need T > 0");
    if (!(omega.a > 0.0) || !(omega.b < 1.0) || !(omega.a < omega.b))
        throw std::invalid_argument("make_grid: control region must satisfy 0 < a < b < 1");

    auto g = std::make_shared<SpaceTimeGrid>(nx, nt, T, omega);
    if (g->omega_begin() < 1 || g->omega_end() > nx - 1 || g->omega_begin() >= g->omega_end())
        throw std::invalid_argument("make_grid: control region collapses or touches the boundary "
                                    "after node snapping (a=" + std::to_string(g->omega_a()) +
                                    ", b=" + std::to_string(g->omega_b()) + ")");
    return g;
}

} // namespace heatls
