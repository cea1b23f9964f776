#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "obw/negativity.hpp"
#include "obw/numeric.hpp"
#include "obw/wigner.hpp"

namespace obw {

/// Finite-difference score S = d ln|W| / d theta on the shared negative
/// support of the flanking fields, above the floor.
struct ScoreField {
    std::vector<double> values;      // full cell count; zero off the mask
    std::vector<std::uint8_t> mask;
    std::size_t mask_count = 0;
    double delta = 0.0;
    double floor_value = 0.0;        // absolute |W| threshold used
};

/// ln|W| is singular on the moving zero contour of W, the dominant numerical
/// hazard of the whole pipeline; the relative floor tau cuts those cells and
/// their excluded share is reported alongside every Fisher number.
inline ScoreField score_field(const WignerField& w_minus, const WignerField& w_plus,
                              double delta, double tau, double floor_abs = 0.0) {
    if (!w_minus.same_layout(w_plus))
        throw std::invalid_argument("score_field: flanking fields on different grids");
    if (!(delta > 0.0)) throw std::invalid_argument("score_field: delta must be positive");
    ScoreField s;
    s.delta = delta;
    double mx = 0.0;
    if (floor_abs > 0.0) {
        s.floor_value = floor_abs;
    } else {
        for (std::size_t q = 0; q < w_minus.values.size(); ++q)
            mx = std::max(mx, std::max(std::abs(w_minus.values.v[q]), std::abs(w_plus.values.v[q])));
        s.floor_value = tau * mx;
    }
    s.values.assign(w_minus.values.size(), 0.0);
    s.mask.assign(w_minus.values.size(), 0);
    const double inv2d = 1.0 / (2.0 * delta);
    for (std::size_t q = 0; q < s.values.size(); ++q) {
        const double wm = w_minus.values.v[q], wp = w_plus.values.v[q];
        if (wm < 0.0 && wp < 0.0 && -wm > s.floor_value && -wp > s.floor_value) {
            s.values[q] = (std::log(-wp) - std::log(-wm)) * inv2d;
            s.mask[q] = 1;
            ++s.mask_count;
        }
    }
    if (s.mask_count == 0)
        throw NumericalError("score_field: empty mask (no shared negative support above the floor)");
    return s;
}

struct ChannelFisherResult {
    double fisher = 0.0;
    double masked_fraction = 0.0;  // channel mass excluded by the floor
    bool floor_warning = false;    // masked_fraction > 0.05
    std::size_t mask_count = 0;
};

/// Core quadrature for the channel Fisher information: given the central
/// channel density and the two flanking densities on a common cell layout,
/// F = E_P[ (d ln P / d theta)^2 ] with central-density weights renormalized
/// on the mask {all three above tau * max(central)}. Synthetic 1D families in
/// the tests run through this same routine.
inline ChannelFisherResult channel_fisher_core(std::span<const double> p_center,
                                               std::span<const double> p_minus,
                                               std::span<const double> p_plus,
                                               double cell_volume, double delta, double tau) {
    if (p_center.size() != p_minus.size() || p_center.size() != p_plus.size())
        throw std::invalid_argument("channel_fisher_core: size mismatch");
    if (!(delta > 0.0)) throw std::invalid_argument("channel_fisher_core: delta must be positive");
    double mx = 0.0;
    for (double v : p_center) mx = std::max(mx, v);
    const double floor = tau * mx;
    ChannelFisherResult r;
    const double total = pairwise_reduce(p_center.size(), [&](std::size_t q) {
        return p_center[q] > 0.0 ? p_center[q] : 0.0;
    });
    const double on_mask = pairwise_reduce(p_center.size(), [&](std::size_t q) {
        return (p_center[q] > floor && p_minus[q] > floor && p_plus[q] > floor) ? p_center[q] : 0.0;
    });
    if (!(on_mask > 0.0))
        throw NumericalError("channel_fisher_core: empty mask");
    for (std::size_t q = 0; q < p_center.size(); ++q)
        if (p_center[q] > floor && p_minus[q] > floor && p_plus[q] > floor) ++r.mask_count;
    r.masked_fraction = 1.0 - on_mask / total;
    const double inv2d = 1.0 / (2.0 * delta);
    r.fisher = pairwise_reduce(p_center.size(), [&](std::size_t q) {
                   if (!(p_center[q] > floor && p_minus[q] > floor && p_plus[q] > floor)) return 0.0;
                   const double sc = (std::log(p_plus[q]) - std::log(p_minus[q])) * inv2d;
                   return p_center[q] * sc * sc;
               }) /
               on_mask;
    r.floor_warning = r.masked_fraction > 0.05;
    (void)cell_volume;  // weights are self-normalizing on the mask
    return r;
}

/// Channel Fisher information from three sign-resolved decompositions.
inline ChannelFisherResult channel_fisher(const ChannelDecomposition& at_minus,
                                          const ChannelDecomposition& at_center,
                                          const ChannelDecomposition& at_plus, bool positive,
                                          double delta, double tau, double cell_volume) {
    const Array4D& pc = positive ? at_center.P_plus : at_center.P_minus;
    const Array4D& pm = positive ? at_minus.P_plus : at_minus.P_minus;
    const Array4D& pp = positive ? at_plus.P_plus : at_plus.P_minus;
    return channel_fisher_core(pc.v, pm.v, pp.v, cell_volume, delta, tau);
}

/// Everything the sweep records about one theta triple.
struct FisherReport {
    double theta = 0.0, delta = 0.0, tau = 0.0;
    double N = 0.0;          // negative volume of the central field
    double Z_plus = 0.0;
    double F_plus = 0.0;
    double F_minus = 0.0;           // Var_{P-}(S), mask-consistent
    double F_tilde_minus = 0.0;     // E_{P-}[S^2]
    double mean_score = 0.0;        // E_{P-}[S] = d ln N / d theta (score route)
    double dN_fd = 0.0;             // (N(+d) - N(-d)) / (2 d), independent route
    double dhi_fd = 0.0;            // pi * dN_fd
    double dhi_score = 0.0;         // pi * N * mean_score
    double bound_rhs = 0.0;         // pi * N * sqrt(F_tilde_minus)
    double slack = 0.0;             // bound_rhs - |dhi_score|
    double decomposition_residual = 0.0;  // F_tilde - F_minus - mean^2
    double masked_fraction = 0.0;   // negative mass excluded by the floor
    double masked_dN_fd = 0.0;      // FD contribution of the excluded cells
    double plus_masked_fraction = 0.0;
    bool floor_warning = false;
    bool degenerate = false;
};

/// Noncentered second moment E_{P-}[S^2] with the central negative channel
/// renormalized on the score mask.
inline double noncentered_fisher(const ScoreField& s, const WignerField& central) {
    if (s.values.size() != central.values.size())
        throw std::invalid_argument("noncentered_fisher: layout mismatch");
    const double on_mask = pairwise_reduce(s.values.size(), [&](std::size_t q) {
        const double w = central.values.v[q];
        return (s.mask[q] && w < 0.0) ? -w : 0.0;
    });
    if (!(on_mask > 0.0)) throw NumericalError("noncentered_fisher: empty mask");
    return pairwise_reduce(s.values.size(), [&](std::size_t q) {
               const double w = central.values.v[q];
               if (!(s.mask[q] && w < 0.0)) return 0.0;
               return -w * s.values[q] * s.values[q];
           }) /
           on_mask;
}

/// Full mask-consistent Fisher analysis of a gauge-aligned theta triple.
/// The mask is the intersection of the three negative supports above the
/// floor tau * max|W_center|; P- weights are renormalized on it, so the
/// variance decomposition and the Cauchy-Schwarz bound hold exactly for the
/// discrete data. The independent central difference of N is reported next to
/// the score-mean route, with the excluded-cell contribution made explicit.
inline FisherReport analyze_fisher_triple(const WignerField& w_minus, const WignerField& w_center,
                                          const WignerField& w_plus, double theta, double delta,
                                          double tau) {
    if (!w_center.same_layout(w_minus) || !w_center.same_layout(w_plus))
        throw std::invalid_argument("analyze_fisher_triple: fields on different grids");
    if (!(delta > 0.0)) throw std::invalid_argument("analyze_fisher_triple: delta must be positive");

    FisherReport r;
    r.theta = theta;
    r.delta = delta;
    r.tau = tau;
    const double dV = w_center.cell_volume();
    const std::size_t n = w_center.values.size();
    const double* wc = w_center.values.v.data();
    const double* wm = w_minus.values.v.data();
    const double* wp = w_plus.values.v.data();

    double mxc = 0.0;
    for (std::size_t q = 0; q < n; ++q) mxc = std::max(mxc, std::abs(wc[q]));
    const double floor = tau * mxc;

    r.N = negative_volume(w_center);
    r.Z_plus = pairwise_reduce(n, [&](std::size_t q) { return wc[q] > 0.0 ? wc[q] : 0.0; }) * dV;
    const double Nm = negative_volume(w_minus);
    const double Np = negative_volume(w_plus);
    r.dN_fd = (Np - Nm) / (2.0 * delta);
    r.dhi_fd = std::numbers::pi * r.dN_fd;

    auto on_mask = [&](std::size_t q) {
        return wc[q] < -floor && wm[q] < -floor && wp[q] < -floor;
    };
    const double mass_on = pairwise_reduce(n, [&](std::size_t q) {
        return on_mask(q) ? -wc[q] : 0.0;
    }) * dV;
    if (!(mass_on > 0.0))
        throw NumericalError("analyze_fisher_triple: empty negative-channel mask");
    r.masked_fraction = 1.0 - mass_on / r.N;

    const double inv2d = 1.0 / (2.0 * delta);
    const double inv_mass = dV / mass_on;
    r.mean_score = pairwise_reduce(n, [&](std::size_t q) {
                       if (!on_mask(q)) return 0.0;
                       return -wc[q] * (std::log(-wp[q]) - std::log(-wm[q])) * inv2d;
                   }) *
                   inv_mass;
    r.F_tilde_minus = pairwise_reduce(n, [&](std::size_t q) {
                          if (!on_mask(q)) return 0.0;
                          const double s = (std::log(-wp[q]) - std::log(-wm[q])) * inv2d;
                          return -wc[q] * s * s;
                      }) *
                      inv_mass;
    r.F_minus = pairwise_reduce(n, [&](std::size_t q) {
                    if (!on_mask(q)) return 0.0;
                    const double s = (std::log(-wp[q]) - std::log(-wm[q])) * inv2d - r.mean_score;
                    return -wc[q] * s * s;
                }) *
                inv_mass;

    // cells outside the mask carry the rest of the central difference of N
    r.masked_dN_fd = (pairwise_reduce(n, [&](std::size_t q) {
                          if (on_mask(q)) return 0.0;
                          return wp[q] < 0.0 ? -wp[q] : 0.0;
                      }) -
                      pairwise_reduce(n, [&](std::size_t q) {
                          if (on_mask(q)) return 0.0;
                          return wm[q] < 0.0 ? -wm[q] : 0.0;
                      })) *
                     dV * inv2d;

    // positive channel through the shape-density route
    const double Zp_m = pairwise_reduce(n, [&](std::size_t q) { return wm[q] > 0.0 ? wm[q] : 0.0; }) * dV;
    const double Zp_p = pairwise_reduce(n, [&](std::size_t q) { return wp[q] > 0.0 ? wp[q] : 0.0; }) * dV;
    const double lnZ = (std::log(Zp_p) - std::log(Zp_m)) * inv2d;
    const double plus_total = r.Z_plus;
    const double plus_on = pairwise_reduce(n, [&](std::size_t q) {
        return (wc[q] > floor && wm[q] > floor && wp[q] > floor) ? wc[q] : 0.0;
    }) * dV;
    if (!(plus_on > 0.0))
        throw NumericalError("analyze_fisher_triple: empty positive-channel mask");
    r.plus_masked_fraction = 1.0 - plus_on / plus_total;
    r.F_plus = pairwise_reduce(n, [&](std::size_t q) {
                   if (!(wc[q] > floor && wm[q] > floor && wp[q] > floor)) return 0.0;
                   const double s = (std::log(wp[q]) - std::log(wm[q])) * inv2d - lnZ;
                   return wc[q] * s * s;
               }) *
               dV / plus_on;

    r.dhi_score = std::numbers::pi * r.N * r.mean_score;
    r.bound_rhs = std::numbers::pi * r.N * std::sqrt(r.F_tilde_minus);
    r.slack = r.bound_rhs - std::abs(r.dhi_score);
    r.decomposition_residual = r.F_tilde_minus - r.F_minus - r.mean_score * r.mean_score;
    r.floor_warning = r.masked_fraction > 0.05 || r.plus_masked_fraction > 0.05;
    return r;
}

/// Residual of F~ = F- + (dN/dtheta / N)^2 with the mask-consistent
/// score-mean derivative route.
inline double verify_decomposition(const FisherReport& r) {
    return r.F_tilde_minus - r.F_minus - r.mean_score * r.mean_score;
}

/// Slack of |dh_i/dtheta| <= pi N sqrt(F~). Non-negative for consistent
/// discrete data (Cauchy-Schwarz in the mask-weighted probability space).
inline double fisher_bound_check(const FisherReport& r) {
    return r.bound_rhs - std::abs(r.dhi_score);
}

struct AcCenterReport {
    bool extremum_found = false;  // false: no interior maximum of h_i
    int index = -1;
    double theta = 0.0;
    double mean_score_over_rms = 0.0;   // |E[S]| / sqrt(F~)
    double rel_fisher_gap = 0.0;        // |F~ - F-| / F~
};

/// At the h_i extremum the negativity growth rate vanishes, so the centered
/// and noncentered Fisher quantities should coincide there.
inline AcCenterReport ac_center_diagnostics(std::span<const double> thetas,
                                            std::span<const double> h_i,
                                            std::span<const double> mean_score,
                                            std::span<const double> f_tilde,
                                            std::span<const double> f_minus) {
    const std::size_t n = thetas.size();
    if (n < 3 || h_i.size() != n || mean_score.size() != n || f_tilde.size() != n ||
        f_minus.size() != n)
        throw std::invalid_argument("ac_center_diagnostics: need >= 3 aligned samples");
    AcCenterReport rep;
    std::size_t m = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (h_i[i] > h_i[m]) m = i;
    if (m == 0 || m == n - 1) return rep;  // monotone: no interior extremum
    rep.extremum_found = true;
    rep.index = static_cast<int>(m);
    rep.theta = thetas[m];
    rep.mean_score_over_rms =
        f_tilde[m] > 0.0 ? std::abs(mean_score[m]) / std::sqrt(f_tilde[m]) : 0.0;
    rep.rel_fisher_gap = f_tilde[m] > 0.0 ? std::abs(f_tilde[m] - f_minus[m]) / f_tilde[m] : 0.0;
    return rep;
}

}  // namespace obw
