#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "obw/geometry.hpp"
#include "obw/numeric.hpp"

namespace obw {

/// One Dirichlet eigenmode (Delta + k^2) psi = 0 on the masked grid.
/// psi lives on the full grid, zero on non-interior nodes, with the discrete
/// L2 normalization sum(psi^2) dx dy = 1.
struct EigenMode {
    double k = 0.0;
    std::vector<double> psi;  // grid.node_count() values
    OvalShape shape;
    Grid2D grid;
    double residual = 0.0;  // ||A v - lambda v|| / max(1, lambda), unit v
};

struct SolverError : NumericalError {
    using NumericalError::NumericalError;
};

struct TrackingError : NumericalError {
    double theta;
    TrackingError(const std::string& msg, double th) : NumericalError(msg), theta(th) {}
};

struct DiscreteOperator {
    Eigen::SparseMatrix<double> matrix;   // SPD, interior nodes only
    std::vector<std::size_t> nodes;       // flat grid index per row
};

/// Negative 5-point Laplacian restricted to interior nodes; couplings to
/// exterior nodes are dropped (homogeneous Dirichlet).
inline DiscreteOperator assemble_operator(const DomainMask& mask) {
    const Grid2D& g = mask.grid;
    std::vector<int> row_of(g.node_count(), -1);
    DiscreteOperator op;
    for (int i = 0; i < g.nx; ++i)
        for (int j = 0; j < g.ny; ++j)
            if (mask.at(i, j)) {
                row_of[g.index(i, j)] = static_cast<int>(op.nodes.size());
                op.nodes.push_back(g.index(i, j));
            }
    const int n = static_cast<int>(op.nodes.size());
    const double ax = 1.0 / (g.dx * g.dx);
    const double ay = 1.0 / (g.dy * g.dy);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n) * 5);
    for (int r = 0; r < n; ++r) {
        const int i = static_cast<int>(op.nodes[r] / g.ny);
        const int j = static_cast<int>(op.nodes[r] % g.ny);
        trip.emplace_back(r, r, 2.0 * (ax + ay));
        const int di[4] = {1, -1, 0, 0};
        const int dj[4] = {0, 0, 1, -1};
        for (int d = 0; d < 4; ++d) {
            const int i2 = i + di[d], j2 = j + dj[d];
            if (i2 < 0 || i2 >= g.nx || j2 < 0 || j2 >= g.ny) continue;
            const int r2 = row_of[g.index(i2, j2)];
            if (r2 >= 0) trip.emplace_back(r, r2, d < 2 ? -ax : -ay);
        }
    }
    op.matrix.resize(n, n);
    op.matrix.setFromTriplets(trip.begin(), trip.end());
    return op;
}

/// Same stencil with a ghost-value Dirichlet correction: an arm whose neighbor
/// lies outside gets its contribution replaced by the linear extrapolation to
/// the actual wall crossing at fraction t of the step, which only rescales the
/// diagonal term by 1/t. The matrix stays symmetric positive definite and the
/// disk eigenvalues converge at second order, which the plain staircase mask
/// does not deliver.
inline DiscreteOperator assemble_operator(const DomainMask& mask, const OvalShape& shape) {
    const Grid2D& g = mask.grid;
    std::vector<int> row_of(g.node_count(), -1);
    DiscreteOperator op;
    for (int i = 0; i < g.nx; ++i)
        for (int j = 0; j < g.ny; ++j)
            if (mask.at(i, j)) {
                row_of[g.index(i, j)] = static_cast<int>(op.nodes.size());
                op.nodes.push_back(g.index(i, j));
            }
    const int n = static_cast<int>(op.nodes.size());
    const double ax = 1.0 / (g.dx * g.dx);
    const double ay = 1.0 / (g.dy * g.dy);
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(n) * 5);
    for (int r = 0; r < n; ++r) {
        const int i = static_cast<int>(op.nodes[r] / g.ny);
        const int j = static_cast<int>(op.nodes[r] % g.ny);
        const double x = g.x(i), y = g.y(j);
        const int di[4] = {1, -1, 0, 0};
        const int dj[4] = {0, 0, 1, -1};
        double diag = 0.0;
        for (int d = 0; d < 4; ++d) {
            const int i2 = i + di[d], j2 = j + dj[d];
            const double coef = d < 2 ? ax : ay;
            int r2 = -1;
            if (i2 >= 0 && i2 < g.nx && j2 >= 0 && j2 < g.ny) r2 = row_of[g.index(i2, j2)];
            if (r2 >= 0) {
                diag += coef;
                trip.emplace_back(r, r2, -coef);
            } else {
                const double t = boundary_crossing_fraction(shape, x, y, di[d] * g.dx, dj[d] * g.dy);
                diag += coef / t;
            }
        }
        trip.emplace_back(r, r, diag);
    }
    op.matrix.resize(n, n);
    op.matrix.setFromTriplets(trip.begin(), trip.end());
    return op;
}

struct KWindow {
    double k_lo = 0.0;
    double k_hi = 0.0;
};

struct SolveOptions {
    double tol = 1e-8;          // relative eigenvalue residual
    int max_iters = 400;
    int block_extra = 6;        // subspace columns beyond `count`
    bool corrected_boundary = true;
    std::uint64_t seed = 0x9e3779b97f4a7c15ull;
};

namespace detail {

inline double lcg_unit(std::uint64_t& s) {
    s = s * 6364136223846793005ull + 1442695040888963407ull;
    return static_cast<double>(s >> 11) / 9007199254740992.0 - 0.5;
}

}  // namespace detail

/// Shift-invert block subspace iteration for the lowest `count` eigenpairs
/// above the window start (or the global lowest when no window is given).
/// Blocked iteration with a sparse LU of (A - sigma I) handles degenerate
/// pairs, which the billiard spectrum contains at symmetric shapes.
inline std::vector<EigenMode> solve_eigenpairs(const DiscreteOperator& op, const Grid2D& grid,
                                               int count, std::optional<KWindow> window = {},
                                               const SolveOptions& opts = {}) {
    if (count < 1) throw std::invalid_argument("solve_eigenpairs: count must be >= 1");
    const int n = static_cast<int>(op.nodes.size());
    const double lam_lo = window ? window->k_lo * window->k_lo : 0.0;
    const double lam_hi = window ? window->k_hi * window->k_hi : 0.0;
    const double sigma = window ? 0.5 * (lam_lo + lam_hi) : 0.0;

    Eigen::SparseMatrix<double> M = op.matrix;
    if (sigma != 0.0) {
        Eigen::SparseMatrix<double> I(n, n);
        I.setIdentity();
        M = op.matrix - sigma * I;
    }
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(M);
    if (lu.info() != Eigen::Success)
        throw SolverError("solve_eigenpairs: sparse factorization failed (shift may equal an eigenvalue)");

    int p = std::min(count + opts.block_extra, n);
    std::uint64_t seed = opts.seed;
    Eigen::MatrixXd X(n, p);
    for (int c = 0; c < p; ++c)
        for (int r = 0; r < n; ++r) X(r, c) = detail::lcg_unit(seed);

    Eigen::VectorXd lam;
    Eigen::MatrixXd AX;
    double worst_res = 0.0;
    bool converged = false;
    for (int it = 0; it < opts.max_iters; ++it) {
        Eigen::MatrixXd Y = lu.solve(X);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(Y);
        Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
        Eigen::MatrixXd AQ = op.matrix * Q;
        Eigen::MatrixXd B = Q.transpose() * AQ;
        B = 0.5 * (B + B.transpose()).eval();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B);
        X = Q * es.eigenvectors();
        AX = AQ * es.eigenvectors();
        lam = es.eigenvalues();

        // residuals of the columns that selection would pick right now
        std::vector<int> pick;
        for (int c = 0; c < p && static_cast<int>(pick.size()) < count; ++c)
            if (!window || lam(c) >= lam_lo - 1e-9 * std::max(1.0, lam_lo)) pick.push_back(c);
        if (static_cast<int>(pick.size()) == count) {
            worst_res = 0.0;
            for (int c : pick) {
                const double r = (AX.col(c) - lam(c) * X.col(c)).norm() / std::max(1.0, lam(c));
                worst_res = std::max(worst_res, r);
            }
            if (worst_res <= opts.tol) {
                // the subspace must reach past the last picked value, otherwise
                // a wanted eigenvalue may still be missing from the block
                if (lam(p - 1) > lam(pick.back()) + 1e-12 * std::max(1.0, lam(pick.back())) ||
                    p == n) {
                    converged = true;
                    break;
                }
            }
        }
        if (it == opts.max_iters - 1) break;
    }
    if (!converged)
        throw SolverError("solve_eigenpairs: no convergence after iteration cap, residual " +
                          std::to_string(worst_res));

    std::vector<int> pick;
    for (int c = 0; c < p && static_cast<int>(pick.size()) < count; ++c)
        if (!window || lam(c) >= lam_lo - 1e-9 * std::max(1.0, lam_lo)) pick.push_back(c);
    if (static_cast<int>(pick.size()) < count)
        throw SolverError("solve_eigenpairs: fewer eigenvalues than requested above the window start");

    std::vector<EigenMode> out;
    out.reserve(pick.size());
    const double scale = 1.0 / std::sqrt(grid.cell_area());
    for (int c : pick) {
        EigenMode m;
        m.k = std::sqrt(lam(c));
        m.grid = grid;
        m.residual = (AX.col(c) - lam(c) * X.col(c)).norm() / std::max(1.0, lam(c));
        m.psi.assign(grid.node_count(), 0.0);
        for (int r = 0; r < n; ++r) m.psi[op.nodes[r]] = X(r, c) * scale;
        // fixed sign convention: the largest-magnitude sample is positive
        std::size_t arg = 0;
        double best = 0.0;
        for (std::size_t q = 0; q < m.psi.size(); ++q)
            if (std::abs(m.psi[q]) > best) {
                best = std::abs(m.psi[q]);
                arg = q;
            }
        if (m.psi[arg] < 0.0)
            for (double& v : m.psi) v = -v;
        out.push_back(std::move(m));
    }
    std::sort(out.begin(), out.end(), [](const EigenMode& a, const EigenMode& b) { return a.k < b.k; });
    return out;
}

/// Eigenmodes of the oval billiard on `grid` (ghost-corrected Dirichlet
/// operator unless opts say otherwise).
inline std::vector<EigenMode> solve_modes(const OvalShape& shape, const Grid2D& grid, int count,
                                          std::optional<KWindow> window = {},
                                          const SolveOptions& opts = {}) {
    const DomainMask mask = build_mask(shape, grid);
    const DiscreteOperator op =
        opts.corrected_boundary ? assemble_operator(mask, shape) : assemble_operator(mask);
    std::vector<EigenMode> out = solve_eigenpairs(op, grid, count, window, opts);
    for (EigenMode& m : out) m.shape = shape;
    return out;
}

/// Discrete L2 inner product sum(psi_a psi_b) dx dy; modes must share a grid.
inline double overlap(const EigenMode& a, const EigenMode& b) {
    if (!a.grid.same_layout(b.grid))
        throw std::invalid_argument("overlap: modes live on different grids");
    const double s = pairwise_reduce(a.psi.size(), [&](std::size_t i) { return a.psi[i] * b.psi[i]; });
    return s * a.grid.cell_area();
}

/// Real eigenmodes carry an arbitrary sign; fix it against a reference.
inline EigenMode align_gauge(const EigenMode& reference, const EigenMode& mode) {
    const double o = overlap(reference, mode);
    if (!(std::abs(o) > 0.5))
        throw NumericalError("align_gauge: |overlap| <= 0.5, gauge is ambiguous");
    EigenMode m = mode;
    if (o < 0.0)
        for (double& v : m.psi) v = -v;
    return m;
}

/// One eigenvalue curve k(theta) with its gauge-aligned modes.
struct SpectrumBranch {
    int label = 0;
    std::vector<double> thetas;
    std::vector<EigenMode> modes;

    double k(std::size_t i) const { return modes[i].k; }
    std::size_t size() const { return modes.size(); }
};

/// Greedy maximum-|overlap| matching between consecutive theta samples.
/// Branch identity follows wavefunction continuity, not eigenvalue order;
/// modes drifting through the selection window may start or end branches.
inline std::vector<SpectrumBranch> track_branches(const std::vector<double>& thetas,
                                                  const std::vector<std::vector<EigenMode>>& per_theta) {
    if (per_theta.size() < 2 || thetas.size() != per_theta.size())
        throw std::invalid_argument("track_branches: need >= 2 theta samples");
    std::vector<SpectrumBranch> branches;
    std::vector<int> tip;  // branch index per mode of the previous sample
    for (std::size_t m = 0; m < per_theta[0].size(); ++m) {
        SpectrumBranch br;
        br.label = static_cast<int>(branches.size()) + 1;
        br.thetas.push_back(thetas[0]);
        br.modes.push_back(per_theta[0][m]);
        branches.push_back(std::move(br));
        tip.push_back(static_cast<int>(m));
    }
    std::vector<int> prev_branch = tip;  // branch id per previous-sample mode
    for (std::size_t m = 0; m < prev_branch.size(); ++m) prev_branch[m] = static_cast<int>(m);

    for (std::size_t t = 1; t < per_theta.size(); ++t) {
        const auto& prev = per_theta[t - 1];
        const auto& cur = per_theta[t];
        struct Cand {
            double ov;
            int i, j;
        };
        std::vector<Cand> cands;
        for (int i = 0; i < static_cast<int>(prev.size()); ++i)
            for (int j = 0; j < static_cast<int>(cur.size()); ++j) {
                const double o = std::abs(overlap(branches[prev_branch[i]].modes.back(), cur[j]));
                if (o > 0.5) cands.push_back({o, i, j});
            }
        std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
            if (a.ov != b.ov) return a.ov > b.ov;
            if (a.i != b.i) return a.i < b.i;
            return a.j < b.j;
        });
        std::vector<int> match_prev(prev.size(), -1), match_cur(cur.size(), -1);
        for (const Cand& c : cands)
            if (match_prev[c.i] < 0 && match_cur[c.j] < 0) {
                match_prev[c.i] = c.j;
                match_cur[c.j] = c.i;
            }
        const bool prev_unmatched = std::any_of(match_prev.begin(), match_prev.end(),
                                                [](int v) { return v < 0; });
        const bool cur_unmatched = std::any_of(match_cur.begin(), match_cur.end(),
                                               [](int v) { return v < 0; });
        if (prev_unmatched && cur_unmatched)
            throw TrackingError("track_branches: best |overlap| <= 0.5 at theta = " +
                                    std::to_string(thetas[t]) + " (theta step too coarse)",
                                thetas[t]);
        std::vector<int> new_prev_branch(cur.size(), -1);
        for (int j = 0; j < static_cast<int>(cur.size()); ++j) {
            if (match_cur[j] >= 0) {
                const int bidx = prev_branch[match_cur[j]];
                SpectrumBranch& br = branches[bidx];
                br.thetas.push_back(thetas[t]);
                br.modes.push_back(align_gauge(br.modes.back(), cur[j]));
                new_prev_branch[j] = bidx;
            } else {
                SpectrumBranch br;
                br.label = static_cast<int>(branches.size()) + 1;
                br.thetas.push_back(thetas[t]);
                br.modes.push_back(cur[j]);
                new_prev_branch[j] = static_cast<int>(branches.size());
                branches.push_back(std::move(br));
            }
        }
        prev_branch = new_prev_branch;
    }
    return branches;
}

struct AvoidedCrossing {
    double theta_star = 0.0;
    double gap = 0.0;   // interpolated minimum of |k2 - k1|, > 0
    int index = 0;      // sample index of the discrete minimum
};

enum class CrossingStatus {
    avoided,       // interior |gap| minimum, no sign change
    monotone_gap,  // no interior minimum
    crossing       // signed gap changes sign: a true crossing, not avoided
};

struct CrossingDetection {
    CrossingStatus status;
    std::optional<AvoidedCrossing> ac;
};

/// Locate the minimum gap between two branches sharing the same theta samples.
/// A sign change of k2 - k1 along the samples marks a true crossing (the
/// branches belong to different symmetry sectors); an interior minimum of the
/// unsigned gap without sign change is an avoided crossing, refined by a
/// parabola through the three samples around the discrete minimum.
inline CrossingDetection detect_avoided_crossing(const SpectrumBranch& b1,
                                                 const SpectrumBranch& b2) {
    if (b1.thetas != b2.thetas)
        throw std::invalid_argument("detect_avoided_crossing: branches sample different thetas");
    const std::size_t n = b1.thetas.size();
    if (n < 3) throw std::invalid_argument("detect_avoided_crossing: need >= 3 samples");
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = b2.k(i) - b1.k(i);
    for (std::size_t i = 0; i + 1 < n; ++i)
        if (g[i] == 0.0 || g[i] * g[i + 1] < 0.0) return {CrossingStatus::crossing, {}};
    std::size_t m = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (std::abs(g[i]) < std::abs(g[m])) m = i;
    if (m == 0 || m == n - 1) return {CrossingStatus::monotone_gap, {}};

    const double t0 = b1.thetas[m - 1], t1 = b1.thetas[m], t2 = b1.thetas[m + 1];
    const double f0 = std::abs(g[m - 1]), f1 = std::abs(g[m]), f2 = std::abs(g[m + 1]);
    AvoidedCrossing ac;
    ac.index = static_cast<int>(m);
    // Lagrange parabola vertex (handles non-uniform spacing)
    const double d0 = f0 / ((t0 - t1) * (t0 - t2));
    const double d1 = f1 / ((t1 - t0) * (t1 - t2));
    const double d2 = f2 / ((t2 - t0) * (t2 - t1));
    const double a2 = d0 + d1 + d2;
    const double a1 = -(d0 * (t1 + t2) + d1 * (t0 + t2) + d2 * (t0 + t1));
    if (a2 > 0.0) {
        double ts = -a1 / (2.0 * a2);
        ts = std::clamp(ts, t0, t2);
        const double val = d0 * (ts - t1) * (ts - t2) + d1 * (ts - t0) * (ts - t2) +
                           d2 * (ts - t0) * (ts - t1);
        ac.theta_star = ts;
        ac.gap = std::max(val, 0.0);
    } else {
        ac.theta_star = t1;
        ac.gap = f1;
    }
    return {CrossingStatus::avoided, ac};
}

}  // namespace obw
