#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "obw/geometry.hpp"
#include "obw/helmholtz.hpp"
#include "obw/numeric.hpp"

namespace obw {

struct ResolutionError : NumericalError {
    using NumericalError::NumericalError;
};

/// Centered momentum grid, p_m = (m - np/2) dp, np even. The conjugate
/// displacement grid has the same count with ds = 2 pi / (np dp), hbar = 1.
struct MomentumGrid {
    int np_x = 0, np_y = 0;
    double dp_x = 0.0, dp_y = 0.0;

    MomentumGrid() = default;
    MomentumGrid(int nx, int ny, double dpx, double dpy)
        : np_x(nx), np_y(ny), dp_x(dpx), dp_y(dpy) {
        if (np_x < 2 || np_y < 2 || np_x % 2 || np_y % 2)
            throw std::invalid_argument("MomentumGrid: counts must be positive even");
        if (!(dp_x > 0.0) || !(dp_y > 0.0))
            throw std::invalid_argument("MomentumGrid: spacings must be positive");
    }
    static MomentumGrid from_pmax(int np, double p_max) {
        return MomentumGrid(np, np, 2.0 * p_max / np, 2.0 * p_max / np);
    }

    double p_x(int m) const { return (m - np_x / 2) * dp_x; }
    double p_y(int m) const { return (m - np_y / 2) * dp_y; }
    double ds_x() const { return 2.0 * std::numbers::pi / (np_x * dp_x); }
    double ds_y() const { return 2.0 * std::numbers::pi / (np_y * dp_y); }
    double s_x(int j) const { return (j - np_x / 2) * ds_x(); }
    double s_y(int j) const { return (j - np_y / 2) * ds_y(); }
    bool same_layout(const MomentumGrid& o) const {
        return np_x == o.np_x && np_y == o.np_y && dp_x == o.dp_x && dp_y == o.dp_y;
    }
};

/// Real 4D Wigner function W(x, y, px, py) on its grids, normalized so that
/// the plain Riemann sum over all cells equals 1.
struct WignerField {
    Array4D values;
    Grid2D positions;   // sample points (cell centers of the mode's box)
    MomentumGrid momenta;
    double raw_drift = 0.0;      // integral before renormalization, minus 1
    double imag_residual = 0.0;  // max |Im| / max |Re| of the raw transform

    double cell_volume() const {
        return positions.dx * positions.dy * momenta.dp_x * momenta.dp_y;
    }
    bool same_layout(const WignerField& o) const {
        return values.same_shape(o.values) && positions.same_layout(o.positions) &&
               momenta.same_layout(o.momenta);
    }
};

struct WignerOptions {
    double drift_abort = 1e-4;
    double span_tol = 1e-6;  // max edge-row |C| / max |C| before aborting
};

/// npos x npos cell centers spanning the node box of `grid`.
inline Grid2D wigner_position_grid(const Grid2D& grid, int npos) {
    const double wx = grid.x_max() - grid.x_min;
    const double wy = grid.y_max() - grid.y_min;
    const double hx = wx / npos, hy = wy / npos;
    return Grid2D(grid.x_min + 0.5 * hx, grid.y_min + 0.5 * hy, hx, hy, npos, npos);
}

namespace detail {

/// DFT kernel e^{i p_m s_j}: the phase is 2 pi (m - n/2)(j - n/2) / n exactly,
/// so the kernel is an integer-indexed root-of-unity table. Entries for
/// mirrored rows are copied with a sign flip on the imaginary part, which
/// makes W(r,p) = W(r,-p) hold bitwise for the real correlation input.
struct DftKernel {
    int n;
    std::vector<double> re, im;  // n*n, row m, column j

    explicit DftKernel(int n_) : n(n_), re(static_cast<std::size_t>(n_) * n_), im(re.size()) {
        std::vector<double> ct(n / 2 + 1), st(n / 2 + 1);
        for (int r = 0; r <= n / 2; ++r) {
            const double ang = 2.0 * std::numbers::pi * r / n;
            ct[r] = std::cos(ang);
            st[r] = std::sin(ang);
        }
        for (int m = 0; m < n; ++m) {
            const long mm = m - n / 2;
            for (int j = 0; j < n; ++j) {
                const long jj = j - n / 2;
                long r = (mm * jj) % n;
                if (r < 0) r += n;
                double c, s;
                if (r <= n / 2) {
                    c = ct[r];
                    s = st[r];
                } else {
                    c = ct[n - r];
                    s = -st[n - r];
                }
                re[static_cast<std::size_t>(m) * n + j] = c;
                im[static_cast<std::size_t>(m) * n + j] = s;
            }
        }
    }
};

}  // namespace detail

/// Wigner transform core: per position node, the displacement correlation
/// psi(r - s/2) psi(r + s/2) is sampled and Fourier transformed over s. The
/// output is renormalized so its Riemann sum is exactly 1; the raw drift is
/// kept as a resolution diagnostic and aborts above `drift_abort`. A
/// correlation that has not decayed at the edge of the displacement grid
/// (span shorter than the mode support) also aborts.
template <class Sampler>
WignerField wigner_transform_sampled(const Sampler& sample, const MomentumGrid& mom,
                                     const Grid2D& positions, const WignerOptions& opts = {}) {
    const int npx = mom.np_x, npy = mom.np_y;
    WignerField f;
    f.positions = positions;
    f.momenta = mom;
    f.values = Array4D(positions.nx, positions.ny, npx, npy);

    const detail::DftKernel Ex(npx), Ey(npy);
    const double dsx = mom.ds_x(), dsy = mom.ds_y();
    const double scale = dsx * dsy / (4.0 * std::numbers::pi * std::numbers::pi);

    std::vector<double> sxv(npx), syv(npy);
    for (int j = 0; j < npx; ++j) sxv[j] = mom.s_x(j);
    for (int j = 0; j < npy; ++j) syv[j] = mom.s_y(j);

    double max_im = 0.0, max_re = 0.0, max_c = 0.0, max_edge = 0.0;
#ifdef _OPENMP
#pragma omp parallel reduction(max : max_im, max_re, max_c, max_edge)
#endif
    {
        std::vector<double> C(static_cast<std::size_t>(npx) * npy);
        std::vector<double> Tre(static_cast<std::size_t>(npx) * npy), Tim(Tre.size());
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
        for (int ij = 0; ij < positions.nx * positions.ny; ++ij) {
            const int i = ij / positions.ny;
            const int j = ij % positions.ny;
            const double xr = positions.x(i), yr = positions.y(j);
            for (int jx = 0; jx < npx; ++jx) {
                const double hx = 0.5 * sxv[jx];
                for (int jy = 0; jy < npy; ++jy) {
                    const double hy = 0.5 * syv[jy];
                    const double c = sample(xr - hx, yr - hy) * sample(xr + hx, yr + hy);
                    C[static_cast<std::size_t>(jx) * npy + jy] = c;
                    max_c = std::max(max_c, std::abs(c));
                    if (jx == 0 || jy == 0) max_edge = std::max(max_edge, std::abs(c));
                }
            }
            // T[jx][my] = sum_jy C[jx][jy] E_y[my][jy]
            for (int jx = 0; jx < npx; ++jx) {
                const double* Crow = &C[static_cast<std::size_t>(jx) * npy];
                for (int my = 0; my < npy; ++my) {
                    const double* er = &Ey.re[static_cast<std::size_t>(my) * npy];
                    const double* ei = &Ey.im[static_cast<std::size_t>(my) * npy];
                    double ar = 0.0, ai = 0.0;
                    for (int jy = 0; jy < npy; ++jy) {
                        ar += Crow[jy] * er[jy];
                        ai += Crow[jy] * ei[jy];
                    }
                    Tre[static_cast<std::size_t>(jx) * npy + my] = ar;
                    Tim[static_cast<std::size_t>(jx) * npy + my] = ai;
                }
            }
            // W[mx][my] = Re sum_jx E_x[mx][jx] T[jx][my]
            double* Wij = &f.values.v[f.values.idx(i, j, 0, 0)];
            for (int mx = 0; mx < npx; ++mx) {
                const double* er = &Ex.re[static_cast<std::size_t>(mx) * npx];
                const double* ei = &Ex.im[static_cast<std::size_t>(mx) * npx];
                for (int my = 0; my < npy; ++my) {
                    double ar = 0.0, ai = 0.0;
                    for (int jx = 0; jx < npx; ++jx) {
                        const double tr = Tre[static_cast<std::size_t>(jx) * npy + my];
                        const double ti = Tim[static_cast<std::size_t>(jx) * npy + my];
                        ar += er[jx] * tr - ei[jx] * ti;
                        ai += er[jx] * ti + ei[jx] * tr;
                    }
                    Wij[static_cast<std::size_t>(mx) * npy + my] = ar * scale;
                    max_im = std::max(max_im, std::abs(ai * scale));
                    max_re = std::max(max_re, std::abs(ar * scale));
                }
            }
        }
    }
    if (max_c > 0.0 && max_edge > opts.span_tol * max_c)
        throw ResolutionError(
            "wigner_transform: correlation has not decayed at the displacement-grid edge "
            "(edge/max = " +
            std::to_string(max_edge / max_c) +
            "); enlarge the momentum grid or shrink the momentum window");
    f.imag_residual = max_re > 0.0 ? max_im / max_re : 0.0;
    if (f.imag_residual > 1e-10)
        throw NumericalError("wigner_transform: transform is not real (residual " +
                             std::to_string(f.imag_residual) + ")");

    const double dV = f.cell_volume();
    const double total = pairwise_sum(f.values.v) * dV;
    f.raw_drift = total - 1.0;
    if (std::abs(f.raw_drift) > opts.drift_abort)
        throw ResolutionError(
            "wigner_transform: normalization drift " + std::to_string(f.raw_drift) +
            " exceeds " + std::to_string(opts.drift_abort) +
            "; refine the mode grid or widen the displacement span (momentum grid size / window)");
    const double inv = 1.0 / total;
    for (double& v : f.values.v) v *= inv;
    return f;
}

/// Wigner transform of a grid-sampled mode: the half-step displacement points
/// are taken from the bicubic interpolant, zero outside the mode box.
inline WignerField wigner_transform(const EigenMode& mode, const MomentumGrid& mom,
                                    const Grid2D& positions, const WignerOptions& opts = {}) {
    Array2D psi2d(mode.grid.nx, mode.grid.ny);
    for (int i = 0; i < mode.grid.nx; ++i)
        for (int j = 0; j < mode.grid.ny; ++j) psi2d(i, j) = mode.psi[mode.grid.index(i, j)];
    const BicubicSampler sample(psi2d, mode.grid.x_min, mode.grid.y_min, mode.grid.dx,
                                mode.grid.dy);
    return wigner_transform_sampled(sample, mom, positions, opts);
}

/// Convenience transform on the default grids: npos x npos cell centers over
/// the mode box, square momentum grid with |p| <= p_max.
inline WignerField wigner_transform(const EigenMode& mode, int npos, int nmom, double p_max,
                                    const WignerOptions& opts = {}) {
    return wigner_transform(mode, MomentumGrid::from_pmax(nmom, p_max),
                            wigner_position_grid(mode.grid, npos), opts);
}

/// Transform of an analytically known wavefunction (synthetic reference
/// states); the correlation samples are exact, so there is no interpolation
/// error in the field.
template <class F>
WignerField wigner_transform_fn(const F& psi, const MomentumGrid& mom, const Grid2D& positions,
                                const WignerOptions& opts = {}) {
    return wigner_transform_sampled(psi, mom, positions, opts);
}

/// Position and momentum marginals (each a plain Riemann sum over the other
/// pair of axes; both integrate to 1 by the field normalization).
inline std::pair<Array2D, Array2D> marginals(const WignerField& f) {
    const int nx = f.values.n0, ny = f.values.n1, npx = f.values.n2, npy = f.values.n3;
    Array2D pos(nx, ny), mompdf(npx, npy);
    const double dp2 = f.momenta.dp_x * f.momenta.dp_y;
    const double dr2 = f.positions.dx * f.positions.dy;
    for (int i = 0; i < nx; ++i)
        for (int j = 0; j < ny; ++j) {
            const double* W = &f.values.v[f.values.idx(i, j, 0, 0)];
            pos(i, j) = pairwise_reduce(static_cast<std::size_t>(npx) * npy,
                                        [&](std::size_t q) { return W[q]; }) *
                        dp2;
        }
    for (int m = 0; m < npx; ++m)
        for (int n = 0; n < npy; ++n) {
            mompdf(m, n) = pairwise_reduce(static_cast<std::size_t>(nx) * ny, [&](std::size_t q) {
                               const int i = static_cast<int>(q) / ny;
                               const int j = static_cast<int>(q) % ny;
                               return f.values(i, j, m, n);
                           }) *
                           dr2;
        }
    return {pos, mompdf};
}

/// Pure-state check (2 pi)^2 integral of W^2; equals 1 for an exact pure state.
inline double purity(const WignerField& f) {
    const double s =
        pairwise_reduce(f.values.size(), [&](std::size_t q) { return f.values.v[q] * f.values.v[q]; });
    const double tp = 2.0 * std::numbers::pi;
    return tp * tp * s * f.cell_volume();
}

enum class SliceAxis { X, Y };  // X: W(x, 0, px, 0); Y: W(0, y, 0, py)

/// Phase-space cut through the full Wigner function. The section at y = 0,
/// py = 0 still integrates the correlation over the transverse displacement
/// (only the transverse phase drops), so the cut is a genuine section of the
/// 4D field, not the Wigner function of a restricted 1D wavefunction.
struct WignerSlice {
    SliceAxis axis = SliceAxis::X;
    Array2D values;  // (position, momentum)
    double q_min = 0.0, dq = 0.0;
    int nq = 0;
    int np = 0;
    double dp = 0.0;

    double q(int i) const { return q_min + i * dq; }
    double p(int m) const { return (m - np / 2) * dp; }
};

/// `match` ties the slice normalization to a renormalized full field so the
/// slice agrees with the field section cell for cell; without it the slice is
/// left on the raw mode normalization (visualization use).
inline WignerSlice wigner_slice(const EigenMode& mode, SliceAxis axis, int n_pos, int n_mom,
                                double p_max, const WignerField* match = nullptr) {
    if (n_mom % 2) throw std::invalid_argument("wigner_slice: momentum count must be even");
    WignerSlice sl;
    sl.axis = axis;
    sl.nq = n_pos;
    sl.np = n_mom;
    sl.dp = 2.0 * p_max / n_mom;
    const double ds = 2.0 * std::numbers::pi / (n_mom * sl.dp);

    const Grid2D& g = mode.grid;
    const double q_lo = axis == SliceAxis::X ? g.x_min : g.y_min;
    const double q_hi = axis == SliceAxis::X ? g.x_max() : g.y_max();
    sl.dq = (q_hi - q_lo) / n_pos;
    sl.q_min = q_lo + 0.5 * sl.dq;

    bool hit = false;
    for (int i = 0; i < n_pos && !hit; ++i) {
        const double q = sl.q(i);
        hit = axis == SliceAxis::X ? is_inside(mode.shape, q, 0.0) : is_inside(mode.shape, 0.0, q);
    }
    if (!hit) throw std::invalid_argument("wigner_slice: cut line does not intersect the domain");

    Array2D psi2d(g.nx, g.ny);
    for (int i = 0; i < g.nx; ++i)
        for (int j = 0; j < g.ny; ++j) psi2d(i, j) = mode.psi[g.index(i, j)];
    const BicubicSampler sample(psi2d, g.x_min, g.y_min, g.dx, g.dy);

    const detail::DftKernel E(n_mom);
    const double scale = ds * ds / (4.0 * std::numbers::pi * std::numbers::pi) /
                         (match ? 1.0 + match->raw_drift : 1.0);
    sl.values = Array2D(n_pos, n_mom);

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (int i = 0; i < n_pos; ++i) {
        const double q = sl.q(i);
        std::vector<double> rowsum(n_mom);
        for (int ja = 0; ja < n_mom; ++ja) {
            const double sa = (ja - n_mom / 2) * ds;
            // integrate the transverse displacement at zero transverse momentum
            double acc = 0.0;
            for (int jb = 0; jb < n_mom; ++jb) {
                const double sb = (jb - n_mom / 2) * ds;
                double c;
                if (axis == SliceAxis::X)
                    c = sample(q - 0.5 * sa, -0.5 * sb) * sample(q + 0.5 * sa, 0.5 * sb);
                else
                    c = sample(-0.5 * sb, q - 0.5 * sa) * sample(0.5 * sb, q + 0.5 * sa);
                acc += c;
            }
            rowsum[ja] = acc;
        }
        for (int m = 0; m < n_mom; ++m) {
            const double* er = &E.re[static_cast<std::size_t>(m) * n_mom];
            double ar = 0.0;
            for (int ja = 0; ja < n_mom; ++ja) ar += er[ja] * rowsum[ja];
            sl.values(i, m) = ar * scale;
        }
    }
    return sl;
}

}  // namespace obw
