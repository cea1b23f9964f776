#include <catch2/catch_amalgamated.hpp>

#include "obw/wigner.hpp"
#include "oracles.hpp"
#include "states.hpp"

using namespace obw;

TEST_CASE("Gaussian Wigner matches the closed form") {
    const WignerField f = wigner_transform_fn(
        states::gaussian_fn, MomentumGrid::from_pmax(32, 6.0), states::centered_positions(6.0, 33));
    CHECK(std::abs(f.raw_drift) < 1e-8);
    double max_err = 0.0, min_w = 0.0;
    for (int i = 0; i < 33; ++i)
        for (int j = 0; j < 33; ++j)
            for (int m = 0; m < 32; ++m)
                for (int n = 0; n < 32; ++n) {
                    const double x = f.positions.x(i), y = f.positions.y(j);
                    const double px = f.momenta.p_x(m), py = f.momenta.p_y(n);
                    const double ref =
                        std::exp(-(x * x + y * y + px * px + py * py)) /
                        (std::numbers::pi * std::numbers::pi);
                    max_err = std::max(max_err, std::abs(f.values(i, j, m, n) - ref));
                    min_w = std::min(min_w, f.values(i, j, m, n));
                }
    CHECK(max_err < 1e-9);
    CHECK(min_w > -1e-12);  // coherent state: no genuine negativity
}

TEST_CASE("product state value at the phase-space origin") {
    const EigenMode mode = states::prod10_mode(7.0, 0.05);
    const WignerField f = wigner_transform(mode, 33, 32, 6.5);
    const int ic = 16, mc = 16;  // (0,0) position node, p = 0 momentum node
    REQUIRE(f.positions.x(ic) == Catch::Approx(0.0).margin(1e-12));
    const double w0 = f.values(ic, ic, mc, mc);
    const double ref = oracle::ho_wigner1(0.0, 0.0) * oracle::ho_wigner0(0.0, 0.0);
    REQUIRE(ref == Catch::Approx(-1.0 / (std::numbers::pi * std::numbers::pi)).margin(1e-15));
    CHECK(w0 == Catch::Approx(ref).margin(1e-4));
}

TEST_CASE("normalization and position marginal identity") {
    const EigenMode mode = states::prod10_mode(7.0, 0.05);
    const WignerField f = wigner_transform(mode, 32, 32, 6.5);
    const double total = pairwise_sum(f.values.v) * f.cell_volume();
    CHECK(std::abs(total - 1.0) < 1e-6);

    const auto [mpos, mmom] = marginals(f);
    // the marginal reproduces the (renormalized) interpolated intensity
    Array2D psi2d(mode.grid.nx, mode.grid.ny);
    for (int i = 0; i < mode.grid.nx; ++i)
        for (int j = 0; j < mode.grid.ny; ++j) psi2d(i, j) = mode.psi[mode.grid.index(i, j)];
    const BicubicSampler samp(psi2d, mode.grid.x_min, mode.grid.y_min, mode.grid.dx, mode.grid.dy);
    double max_dev = 0.0;
    for (int i = 0; i < f.positions.nx; ++i)
        for (int j = 0; j < f.positions.ny; ++j) {
            const double p = samp(f.positions.x(i), f.positions.y(j));
            max_dev = std::max(max_dev,
                               std::abs(mpos(i, j) - p * p / (1.0 + f.raw_drift)));
        }
    CHECK(max_dev < 1e-6);

    double pos_sum = 0.0, mom_sum = 0.0, mom_min = 0.0;
    for (double v : mpos.v) pos_sum += v;
    for (double v : mmom.v) {
        mom_sum += v;
        mom_min = std::min(mom_min, v);
    }
    CHECK(pos_sum * f.positions.dx * f.positions.dy == Catch::Approx(1.0).margin(1e-9));
    CHECK(mom_sum * f.momenta.dp_x * f.momenta.dp_y == Catch::Approx(1.0).margin(1e-9));
    CHECK(mom_min > -1e-9);
}

TEST_CASE("momentum inversion symmetry is exact") {
    const EigenMode mode = states::prod10_mode(6.0, 0.08);
    const WignerField f = wigner_transform(mode, 24, 24, 6.0);
    double max_asym = 0.0;
    for (int i = 0; i < f.values.n0; ++i)
        for (int j = 0; j < f.values.n1; ++j)
            for (int m = 1; m < f.values.n2; ++m)
                for (int n = 1; n < f.values.n3; ++n)
                    max_asym = std::max(max_asym,
                                        std::abs(f.values(i, j, m, n) -
                                                 f.values(i, j, f.values.n2 - m, f.values.n3 - n)));
    CHECK(max_asym == 0.0);
}

TEST_CASE("sign flip of the wavefunction leaves the field unchanged") {
    const EigenMode mode = states::gaussian_mode(5.0, 0.1);
    EigenMode flipped = mode;
    for (double& v : flipped.psi) v = -v;
    const WignerField f1 = wigner_transform(mode, 16, 16, 5.0);
    const WignerField f2 = wigner_transform(flipped, 16, 16, 5.0);
    CHECK(f1.values.v == f2.values.v);
}

TEST_CASE("billiard mode: purity, drift, momentum ring", "[slow]") {
    OvalShape shape(1.2, 1.0, 0.59);
    const Grid2D g = make_covering_grid({shape}, 1.0 / 48);
    const auto modes = solve_modes(shape, g, 3, KWindow{8.95, 9.42});
    const EigenMode& mode = modes[0];
    const double pmax = 2.5 * mode.k;
    const WignerField f = wigner_transform(mode, 48, 48, pmax);
    CHECK(std::abs(f.raw_drift) < 1e-4);
    CHECK(purity(f) == Catch::Approx(1.0).margin(0.02));

    // angular average of the momentum marginal peaks near |p| = k
    const auto [mpos, mmom] = marginals(f);
    const int nbins = 24;
    std::vector<double> acc(nbins, 0.0), cnt(nbins, 0.0);
    for (int m = 0; m < f.momenta.np_x; ++m)
        for (int n = 0; n < f.momenta.np_y; ++n) {
            const double pr = std::hypot(f.momenta.p_x(m), f.momenta.p_y(n));
            const int bin = static_cast<int>(pr / pmax * nbins);
            if (bin < nbins) {
                acc[bin] += mmom(m, n);
                cnt[bin] += 1.0;
            }
        }
    int best = 0;
    for (int i = 0; i < nbins; ++i)
        if (cnt[i] > 0 && acc[i] / cnt[i] > (cnt[best] > 0 ? acc[best] / cnt[best] : 0.0)) best = i;
    const double peak_radius = (best + 0.5) * pmax / nbins;
    CHECK(peak_radius == Catch::Approx(mode.k).epsilon(0.15));
}

TEST_CASE("purity improves with position resolution; drift ignores momentum count") {
    const EigenMode mode = states::prod10_mode(6.5, 0.26);  // coarse mode grid
    const WignerField coarse = wigner_transform(mode, 12, 24, 6.0);
    const WignerField fine = wigner_transform(mode, 48, 24, 6.0);
    CHECK(std::abs(purity(fine) - 1.0) <= std::abs(purity(coarse) - 1.0) + 1e-12);
    // the raw integral equals the position-sampled intensity sum exactly,
    // independent of the momentum grid
    const WignerField more_mom = wigner_transform(mode, 12, 48, 6.0);
    CHECK(more_mom.raw_drift == Catch::Approx(coarse.raw_drift).margin(1e-12));
}

TEST_CASE("slice equals the section of the full field at matching resolution") {
    const EigenMode mode = states::prod10_mode(6.0, 0.05);
    const MomentumGrid mom = MomentumGrid::from_pmax(32, 6.0);
    const Grid2D pos = wigner_position_grid(mode.grid, 33);
    const WignerField f = wigner_transform(mode, mom, pos);
    const int jc = 16;  // y = 0 row
    REQUIRE(pos.y(jc) == Catch::Approx(0.0).margin(1e-12));

    const WignerSlice sl = wigner_slice(mode, SliceAxis::X, 33, 32, 6.0, &f);
    double max_dev = 0.0;
    for (int i = 0; i < 33; ++i)
        for (int m = 0; m < 32; ++m)
            max_dev = std::max(max_dev, std::abs(sl.values(i, m) - f.values(i, jc, m, 16)));
    CHECK(max_dev < 1e-8);

    const WignerSlice sy = wigner_slice(mode, SliceAxis::Y, 33, 32, 6.0, &f);
    double max_dev_y = 0.0;
    for (int j = 0; j < 33; ++j)
        for (int n = 0; n < 32; ++n)
            max_dev_y = std::max(max_dev_y, std::abs(sy.values(j, n) - f.values(16, j, 16, n)));
    CHECK(max_dev_y < 1e-8);
}

TEST_CASE("slice parity and separability for symmetric states") {
    const EigenMode mode = states::gaussian_mode(6.0, 0.05);
    const WignerSlice sl = wigner_slice(mode, SliceAxis::X, 33, 32, 6.0);
    // x -> -x symmetry of the cut for a theta = 0 shape
    for (int i = 0; i < 33; ++i)
        for (int m = 0; m < 32; ++m)
            CHECK(sl.values(i, m) == Catch::Approx(sl.values(32 - i, m)).margin(1e-12));
    // separable Gaussian: W(x,0,px,0) = (1/pi e^{-x^2-px^2}) * W_y(0,0)
    const int ic = 16, mc = 16;
    const double wy00 = 1.0 / std::numbers::pi;
    CHECK(sl.values(ic, mc) ==
          Catch::Approx((1.0 / std::numbers::pi) * wy00).margin(1e-5));
}

TEST_CASE("slice empty-cut error") {
    EigenMode mode = states::gaussian_mode(4.0, 0.5);
    mode.shape = OvalShape(0.05, 0.05, 0.0);
    // 4 cut samples at +-3, +-1: all outside the tiny domain
    CHECK_THROWS_AS(wigner_slice(mode, SliceAxis::X, 4, 8, 4.0), std::invalid_argument);
}

TEST_CASE("transform rejects a truncated displacement span") {
    // huge momentum window -> displacement span far below the support diameter
    const EigenMode mode = states::gaussian_mode(6.0, 0.05);
    CHECK_THROWS_AS(wigner_transform(mode, 16, 16, 40.0), NumericalError);
}
