#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "obw/numeric.hpp"
#include "obw/wigner.hpp"

namespace obw {

struct DegenerateChannelError : NumericalError {
    using NumericalError::NumericalError;
};

/// Complex Gibbs-Shannon entropy of a real Wigner function on the principal
/// branch: h_r = -int W ln|W|, h_i = pi * (negative volume).
struct ComplexEntropy {
    double h_r = 0.0;
    double h_i = 0.0;
    double N = 0.0;
};

/// Cells below this magnitude contribute zero to h_r (the t ln t -> 0 limit).
inline constexpr double kEntropyFloor = 1e-300;

/// Negative volume N = integral of |W| over the cells with W < 0 (strict sign).
inline double negative_volume(const WignerField& f) {
    const double s = pairwise_reduce(f.values.size(), [&](std::size_t q) {
        const double w = f.values.v[q];
        return w < 0.0 ? -w : 0.0;
    });
    return s * f.cell_volume();
}

inline ComplexEntropy complex_entropy(const WignerField& f) {
    ComplexEntropy e;
    e.h_r = -pairwise_reduce(f.values.size(), [&](std::size_t q) {
                const double w = f.values.v[q];
                const double a = std::abs(w);
                return a < kEntropyFloor ? 0.0 : w * std::log(a);
            }) *
            f.cell_volume();
    e.N = negative_volume(f);
    e.h_i = std::numbers::pi * e.N;
    return e;
}

/// Imaginary entropy by the principal-branch argument route: arg W = pi on the
/// negative support contributes -W * pi per cell. Kept as an independent code
/// path against h_i = pi * N.
inline double imag_entropy_arg_route(const WignerField& f) {
    const double s = pairwise_reduce(f.values.size(), [&](std::size_t q) {
        const double w = f.values.v[q];
        return w < 0.0 ? -w * std::numbers::pi : 0.0;
    });
    return s * f.cell_volume();
}

/// Sign-resolved channels W = Z+ P+ - Z- P- with normalized shapes and
/// disjoint supports (strict sign test; exact zeros belong to neither support).
struct ChannelDecomposition {
    double Z_plus = 0.0;
    double Z_minus = 0.0;
    Array4D P_plus, P_minus;
    std::vector<std::uint8_t> support_plus, support_minus;
};

inline ChannelDecomposition split_channels(const WignerField& f) {
    ChannelDecomposition d;
    const double dV = f.cell_volume();
    d.Z_plus = pairwise_reduce(f.values.size(), [&](std::size_t q) {
                   const double w = f.values.v[q];
                   return w > 0.0 ? w : 0.0;
               }) *
               dV;
    d.Z_minus = negative_volume(f);
    if (d.Z_minus < 1e-12)
        throw DegenerateChannelError(
            "split_channels: Z- < 1e-12, the negative shape is undefined (state is negativity-free)");
    d.P_plus = Array4D(f.values.n0, f.values.n1, f.values.n2, f.values.n3);
    d.P_minus = Array4D(f.values.n0, f.values.n1, f.values.n2, f.values.n3);
    d.support_plus.assign(f.values.size(), 0);
    d.support_minus.assign(f.values.size(), 0);
    for (std::size_t q = 0; q < f.values.size(); ++q) {
        const double w = f.values.v[q];
        if (w > 0.0) {
            d.P_plus.v[q] = w / d.Z_plus;
            d.support_plus[q] = 1;
        } else if (w < 0.0) {
            d.P_minus.v[q] = -w / d.Z_minus;
            d.support_minus[q] = 1;
        }
    }
    return d;
}

}  // namespace obw
