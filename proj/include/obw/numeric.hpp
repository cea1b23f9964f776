#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

namespace obw {

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Dense row-major 2D array of doubles.
struct Array2D {
    int n0 = 0, n1 = 0;
    std::vector<double> v;

    Array2D() = default;
    Array2D(int a, int b) : n0(a), n1(b), v(static_cast<std::size_t>(a) * b, 0.0) {}

    double& operator()(int i, int j) { return v[static_cast<std::size_t>(i) * n1 + j]; }
    double operator()(int i, int j) const { return v[static_cast<std::size_t>(i) * n1 + j]; }
    std::size_t size() const { return v.size(); }
};

/// Dense row-major 4D array, index order (i0, i1, i2, i3).
struct Array4D {
    int n0 = 0, n1 = 0, n2 = 0, n3 = 0;
    std::vector<double> v;

    Array4D() = default;
    Array4D(int a, int b, int c, int d)
        : n0(a), n1(b), n2(c), n3(d),
          v(static_cast<std::size_t>(a) * b * c * d, 0.0) {}

    std::size_t idx(int i, int j, int m, int n) const {
        return ((static_cast<std::size_t>(i) * n1 + j) * n2 + m) * n3 + n;
    }
    double& operator()(int i, int j, int m, int n) { return v[idx(i, j, m, n)]; }
    double operator()(int i, int j, int m, int n) const { return v[idx(i, j, m, n)]; }
    std::size_t size() const { return v.size(); }
    bool same_shape(const Array4D& o) const {
        return n0 == o.n0 && n1 == o.n1 && n2 == o.n2 && n3 == o.n3;
    }
};

namespace detail {
template <class F>
double pairwise_reduce_impl(std::size_t lo, std::size_t hi, const F& f) {
    const std::size_t n = hi - lo;
    if (n <= 32) {
        double s = 0.0;
        for (std::size_t i = lo; i < hi; ++i) s += f(i);
        return s;
    }
    const std::size_t mid = lo + n / 2;
    return pairwise_reduce_impl(lo, mid, f) + pairwise_reduce_impl(mid, hi, f);
}
}  // namespace detail

/// Deterministic pairwise reduction of f(0..n-1); fixed association order so
/// results are bit-identical run to run regardless of threading elsewhere.
template <class F>
double pairwise_reduce(std::size_t n, const F& f) {
    if (n == 0) return 0.0;
    return detail::pairwise_reduce_impl(0, n, f);
}

inline double pairwise_sum(const std::vector<double>& v) {
    return pairwise_reduce(v.size(), [&](std::size_t i) { return v[i]; });
}

/// Catmull-Rom cubic weights for fractional offset t in [0,1).
inline void catmull_rom_weights(double t, double w[4]) {
    const double t2 = t * t, t3 = t2 * t;
    w[0] = 0.5 * (-t + 2.0 * t2 - t3);
    w[1] = 1.0 + 0.5 * (-5.0 * t2 + 3.0 * t3);
    w[2] = 0.5 * (t + 4.0 * t2 - 3.0 * t3);
    w[3] = 0.5 * (-t2 + t3);
}

/// Bicubic (Catmull-Rom) sampler over a uniform 2D grid; zero outside the array.
/// Used for the half-step displacement samples, where the sampled field is a
/// wavefunction that vanishes at and beyond the array rim.
struct BicubicSampler {
    const Array2D* field = nullptr;
    double x0 = 0, y0 = 0, dx = 1, dy = 1;

    BicubicSampler() = default;
    BicubicSampler(const Array2D& f, double x_origin, double y_origin, double hx, double hy)
        : field(&f), x0(x_origin), y0(y_origin), dx(hx), dy(hy) {}

    double operator()(double x, double y) const {
        const Array2D& f = *field;
        const double fx = (x - x0) / dx;
        const double fy = (y - y0) / dy;
        if (fx < -2.0 || fy < -2.0 || fx > f.n0 + 1.0 || fy > f.n1 + 1.0) return 0.0;
        const int i0 = static_cast<int>(std::floor(fx));
        const int j0 = static_cast<int>(std::floor(fy));
        double wx[4], wy[4];
        catmull_rom_weights(fx - i0, wx);
        catmull_rom_weights(fy - j0, wy);
        double acc = 0.0;
        for (int a = 0; a < 4; ++a) {
            const int i = i0 + a - 1;
            if (i < 0 || i >= f.n0) continue;
            double row = 0.0;
            for (int c = 0; c < 4; ++c) {
                const int j = j0 + c - 1;
                if (j < 0 || j >= f.n1) continue;
                row += wy[c] * f(i, j);
            }
            acc += wx[a] * row;
        }
        return acc;
    }
};

}  // namespace obw
