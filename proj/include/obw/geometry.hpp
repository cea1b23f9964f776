#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "obw/numeric.hpp"

namespace obw {

/// Oval billiard boundary x^2/a^2 + (1 + theta*x) * y^2/b^2 = 1.
/// theta = 0 is an ellipse with semi-axes (a, b); theta deforms it along x.
struct OvalShape {
    double a = 1.2;
    double b = 1.0;
    double theta = 0.0;

    OvalShape() = default;
    OvalShape(double a_, double b_, double theta_) : a(a_), b(b_), theta(theta_) {
        validate();
    }
    void validate() const {
        if (!(a > 0.0) || !(b > 0.0))
            throw std::invalid_argument("OvalShape: semi-axes must be positive");
        if (!(std::abs(theta) < 1.0 / a))
            throw std::invalid_argument("OvalShape: |theta| must be < 1/a");
    }
};

/// Uniform rectilinear grid of nodes x_i = x_min + i*dx, y_j = y_min + j*dy.
struct Grid2D {
    double x_min = 0.0, y_min = 0.0;
    double dx = 1.0, dy = 1.0;
    int nx = 0, ny = 0;

    Grid2D() = default;
    Grid2D(double x0, double y0, double hx, double hy, int n_x, int n_y)
        : x_min(x0), y_min(y0), dx(hx), dy(hy), nx(n_x), ny(n_y) {
        if (!(dx > 0.0) || !(dy > 0.0))
            throw std::invalid_argument("Grid2D: spacings must be positive");
        if (nx < 1 || ny < 1 || static_cast<long>(nx) * ny < 4)
            throw std::invalid_argument("Grid2D: need nx*ny >= 4 nodes");
    }

    double x(int i) const { return x_min + i * dx; }
    double y(int j) const { return y_min + j * dy; }
    double x_max() const { return x_min + (nx - 1) * dx; }
    double y_max() const { return y_min + (ny - 1) * dy; }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(i) * ny + j; }
    std::size_t node_count() const { return static_cast<std::size_t>(nx) * ny; }
    double cell_area() const { return dx * dy; }
    bool same_layout(const Grid2D& o) const {
        return nx == o.nx && ny == o.ny && x_min == o.x_min && y_min == o.y_min &&
               dx == o.dx && dy == o.dy;
    }
};

struct BoundingBox {
    double x_min, x_max, y_min, y_max;
};

/// Left-hand side of the boundary equation; < 1 inside, = 1 on the wall.
inline double boundary_value(const OvalShape& s, double x, double y) {
    const double w = 1.0 + s.theta * x;
    if (!(w > 0.0))
        throw std::domain_error("boundary_value: 1 + theta*x <= 0");
    return (x * x) / (s.a * s.a) + w * (y * y) / (s.b * s.b);
}

/// Nodes landing on the wall within this tolerance are treated as outside
/// (they carry the Dirichlet zero).
inline constexpr double kBoundaryTol = 1e-12;

inline bool is_inside(const OvalShape& s, double x, double y) {
    const double w = 1.0 + s.theta * x;
    if (!(w > 0.0)) return false;
    const double f = (x * x) / (s.a * s.a) + w * (y * y) / (s.b * s.b);
    return f < 1.0 - kBoundaryTol;
}

/// Extent of the domain. The y extremum of b^2 (1 - x^2/a^2)/(1 + theta x)
/// is at a root of theta x^2 + 2x + theta a^2 = 0.
inline BoundingBox bounding_box(const OvalShape& s) {
    s.validate();
    double y_max;
    if (std::abs(s.theta) < 1e-14) {
        y_max = s.b;
    } else {
        const double disc = 1.0 - s.theta * s.theta * s.a * s.a;
        const double x_star = (-1.0 + std::sqrt(disc)) / s.theta;
        const double g = (1.0 - (x_star * x_star) / (s.a * s.a)) / (1.0 + s.theta * x_star);
        y_max = s.b * std::sqrt(g);
    }
    return {-s.a, s.a, -y_max, y_max};
}

/// Interior flags for one shape on one grid.
struct DomainMask {
    Grid2D grid;
    std::vector<std::uint8_t> inside;
    int interior_count = 0;

    bool at(int i, int j) const { return inside[grid.index(i, j)] != 0; }
};

inline DomainMask build_mask(const OvalShape& shape, const Grid2D& grid) {
    const BoundingBox bb = bounding_box(shape);
    if (grid.x_min > bb.x_min || grid.x_max() < bb.x_max ||
        grid.y_min > bb.y_min || grid.y_max() < bb.y_max)
        throw std::invalid_argument("build_mask: grid does not cover the bounding box");
    DomainMask m;
    m.grid = grid;
    m.inside.assign(grid.node_count(), 0);
    for (int i = 0; i < grid.nx; ++i)
        for (int j = 0; j < grid.ny; ++j)
            if (is_inside(shape, grid.x(i), grid.y(j))) {
                m.inside[grid.index(i, j)] = 1;
                ++m.interior_count;
            }
    if (m.interior_count == 0)
        throw std::invalid_argument("build_mask: no grid node lies inside the domain");
    return m;
}

/// Fraction t in (0,1] of the step (dx,dy) from an interior point (x0,y0) at
/// which the wall is crossed. The boundary value is quadratic along any axis
/// step, so the crossing is a closed-form root.
inline double boundary_crossing_fraction(const OvalShape& s, double x0, double y0,
                                         double dx, double dy) {
    double q2, q1;
    const double q0 = boundary_value(s, x0, y0) - 1.0;
    if (dy == 0.0) {
        q2 = (dx * dx) / (s.a * s.a);
        q1 = 2.0 * x0 * dx / (s.a * s.a) + s.theta * dx * (y0 * y0) / (s.b * s.b);
    } else {
        const double w = 1.0 + s.theta * x0;
        q2 = w * (dy * dy) / (s.b * s.b);
        q1 = 2.0 * y0 * dy * w / (s.b * s.b);
    }
    double t;
    if (std::abs(q2) < 1e-300) {
        t = -q0 / q1;
    } else {
        const double disc = q1 * q1 - 4.0 * q2 * q0;
        const double sq = std::sqrt(std::max(disc, 0.0));
        const double r1 = (-q1 + sq) / (2.0 * q2);
        const double r2 = (-q1 - sq) / (2.0 * q2);
        t = 2.0;
        for (double r : {r1, r2})
            if (r > 0.0 && r <= 1.0 + 1e-12 && r < t) t = r;
        if (t > 1.5) t = 1.0;  // neighbor classified outside by the node rule only
    }
    if (!(t > 1e-6)) t = 1e-6;
    return std::min(t, 1.0);
}

/// Grid covering the bounding box of each shape, padded by `pad` cells per side.
inline Grid2D make_covering_grid(const std::vector<OvalShape>& shapes, double h, int pad = 1) {
    if (shapes.empty()) throw std::invalid_argument("make_covering_grid: no shapes");
    BoundingBox u = bounding_box(shapes.front());
    for (const auto& s : shapes) {
        const BoundingBox bb = bounding_box(s);
        u.x_min = std::min(u.x_min, bb.x_min);
        u.x_max = std::max(u.x_max, bb.x_max);
        u.y_min = std::min(u.y_min, bb.y_min);
        u.y_max = std::max(u.y_max, bb.y_max);
    }
    const double x0 = u.x_min - pad * h;
    const double y0 = u.y_min - pad * h;
    const int nx = static_cast<int>(std::ceil((u.x_max - u.x_min + 2 * pad * h) / h)) + 1;
    const int ny = static_cast<int>(std::ceil((u.y_max - u.y_min + 2 * pad * h) / h)) + 1;
    return Grid2D(x0, y0, h, h, nx, ny);
}

}  // namespace obw
