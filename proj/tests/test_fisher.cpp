#include <catch2/catch_amalgamated.hpp>

#include "obw/fisher.hpp"
#include "oracles.hpp"
#include "states.hpp"

using namespace obw;

namespace {

// small synthetic 4D field: values vary along x only
WignerField field_from_profile(int nx, double x0, double dx,
                               const std::function<double(double)>& f) {
    WignerField w;
    w.positions = Grid2D(x0, 0.0, dx, 1.0, nx, 2);
    w.momenta = MomentumGrid(2, 2, 1.0, 1.0);
    w.values = Array4D(nx, 2, 2, 2);
    for (int i = 0; i < nx; ++i) {
        const double v = f(x0 + i * dx);
        for (int j = 0; j < 2; ++j)
            for (int m = 0; m < 2; ++m)
                for (int n = 0; n < 2; ++n) w.values(i, j, m, n) = v;
    }
    return w;
}

constexpr double kDelta = 1e-3;
constexpr double kTau = 1e-6;

}  // namespace

TEST_CASE("mass-scaling family: no shape response") {
    // W(theta) = (1 + theta) W0 with both channels present, evaluated at theta = 0
    auto lobe = [](double x) { return (x < 0 ? -1.0 : 0.5) * std::exp(-x * x); };
    const WignerField w0 = field_from_profile(64, -4.0, 0.125, lobe);
    WignerField wm = w0, wp = w0;
    for (double& v : wm.values.v) v *= 1.0 - kDelta;
    for (double& v : wp.values.v) v *= 1.0 + kDelta;

    const FisherReport r = analyze_fisher_triple(wm, w0, wp, 0.0, kDelta, kTau);
    const double s_exact = std::log((1.0 + kDelta) / (1.0 - kDelta)) / (2.0 * kDelta);
    CHECK(r.F_minus <= 1e-6);
    CHECK(r.F_plus <= 1e-6);  // shapes are rigid in both channels
    CHECK(r.mean_score == Catch::Approx(s_exact).margin(1e-12));
    CHECK(r.F_tilde_minus == Catch::Approx(1.0).margin(1e-5));
    CHECK(r.F_tilde_minus - r.mean_score * r.mean_score ==
          Catch::Approx(0.0).margin(1e-6));  // F~ = (N'/N)^2 for pure rescaling
    CHECK(std::abs(verify_decomposition(r)) <= 1e-6 * r.F_tilde_minus + 1e-300);
    // constant score: Cauchy-Schwarz equality
    CHECK(std::abs(fisher_bound_check(r)) <= 1e-9 * r.bound_rhs);
    // the independent central difference of N recovers N exactly here
    CHECK(r.dN_fd == Catch::Approx(r.N).epsilon(1e-12));
    CHECK(r.dhi_score == Catch::Approx(std::numbers::pi * r.N * s_exact).epsilon(1e-12));
}

TEST_CASE("identical flanking fields: zero scores everywhere") {
    auto lobe = [](double x) { return x < 0 ? -std::exp(-x * x) : std::exp(-x * x); };
    const WignerField w0 = field_from_profile(64, -4.0, 0.125, lobe);
    const FisherReport r = analyze_fisher_triple(w0, w0, w0, 0.0, kDelta, kTau);
    CHECK(r.F_tilde_minus == 0.0);
    CHECK(r.F_minus == 0.0);
    CHECK(r.mean_score == 0.0);
    CHECK(r.dhi_fd == 0.0);
    CHECK(r.dhi_score == 0.0);
    CHECK(r.slack == 0.0);

    const ScoreField s = score_field(w0, w0, kDelta, kTau);
    for (std::size_t q = 0; q < s.values.size(); ++q) CHECK(s.values[q] == 0.0);
}

TEST_CASE("score_field on a drifting lobe matches the analytic log-derivative") {
    const double sig = 0.8, c0 = -1.0;
    // theta-drifting negative lobe at c0 plus a rigid positive bump at +3
    auto lobe_at = [&](double theta) {
        return [theta, sig, c0](double x) {
            const double u = x - c0 - theta;
            return -std::exp(-u * u / (2.0 * sig * sig)) +
                   0.6 * std::exp(-2.0 * (x - 3.0) * (x - 3.0));
        };
    };
    const WignerField wm = field_from_profile(128, -5.0, 0.078125, lobe_at(-kDelta));
    const WignerField wc = field_from_profile(128, -5.0, 0.078125, lobe_at(0.0));
    const WignerField wp = field_from_profile(128, -5.0, 0.078125, lobe_at(kDelta));

    const ScoreField s = score_field(wm, wp, kDelta, kTau);
    REQUIRE(s.mask_count > 0);
    for (int i = 0; i < 128; ++i) {
        const std::size_t q = wc.values.idx(i, 0, 0, 0);
        if (!s.mask[q]) continue;
        const double x = wc.positions.x(i);
        if (x > -0.5) continue;  // stay clear of the rigid bump's tail
        // central difference of a quadratic exponent is exact
        CHECK(s.values[q] == Catch::Approx((x - c0) / (sig * sig)).margin(1e-9));
    }

    const FisherReport r = analyze_fisher_triple(wm, wc, wp, 0.0, kDelta, kTau);
    CHECK(r.F_tilde_minus == Catch::Approx(1.0 / (sig * sig)).epsilon(0.02));
    // symmetric lobe: mean score vanishes, F~ = F-
    CHECK(r.mean_score * r.mean_score <= 0.01 * r.F_tilde_minus);
    CHECK(std::abs(verify_decomposition(r)) <= 1e-12 * r.F_tilde_minus);
    CHECK(fisher_bound_check(r) >= -1e-9 * r.bound_rhs);
    CHECK(noncentered_fisher(s, wc) == Catch::Approx(r.F_tilde_minus).epsilon(1e-6));
}

TEST_CASE("channel Fisher of a Gaussian location family equals 1/sigma^2") {
    const double sig = 0.5;
    const int n = 4001;
    const double z0 = -4.0, dz = 8.0 / (n - 1);
    auto density = [&](double mu) {
        std::vector<double> p(n);
        for (int i = 0; i < n; ++i) {
            const double z = z0 + i * dz;
            p[i] = std::exp(-(z - mu) * (z - mu) / (2.0 * sig * sig)) /
                   (sig * std::sqrt(2.0 * std::numbers::pi));
        }
        return p;
    };
    const auto pc = density(0.0), pm = density(-kDelta), pp = density(kDelta);
    const ChannelFisherResult r = channel_fisher_core(pc, pm, pp, dz, kDelta, kTau);
    CHECK(r.fisher == Catch::Approx(1.0 / (sig * sig)).epsilon(0.02));

    // direct-quadrature oracle with the analytic score
    const double f_oracle = oracle::simpson(
        [&](double z) {
            const double p = std::exp(-z * z / (2.0 * sig * sig)) /
                             (sig * std::sqrt(2.0 * std::numbers::pi));
            const double sc = z / (sig * sig);
            return p * sc * sc;
        },
        -4.0, 4.0, 4000);
    CHECK(f_oracle == Catch::Approx(1.0 / (sig * sig)).epsilon(1e-4));
    CHECK(r.fisher == Catch::Approx(f_oracle).epsilon(0.02));
}

TEST_CASE("theta-independent family has zero channel Fisher") {
    std::vector<double> p(512);
    for (int i = 0; i < 512; ++i) p[i] = std::exp(-0.01 * (i - 256) * (i - 256));
    const ChannelFisherResult r = channel_fisher_core(p, p, p, 1.0, kDelta, kTau);
    CHECK(r.fisher == 0.0);
}

TEST_CASE("channel_fisher via decompositions matches the score-variance route") {
    const EigenMode mode_c = states::prod10_mode(7.0, 0.05);
    // squeeze the state slightly to emulate a parameter family psi_theta
    auto scaled_mode = [&](double theta) {
        const double s = 1.0 + theta;
        EigenMode m = mode_c;
        const double c0 = std::pow(std::numbers::pi, -0.25);
        for (int i = 0; i < m.grid.nx; ++i)
            for (int j = 0; j < m.grid.ny; ++j) {
                const double x = m.grid.x(i) * s, y = m.grid.y(j) / s;
                const double p1 = std::numbers::sqrt2 * c0 * x * std::exp(-0.5 * x * x);
                const double p0 = c0 * std::exp(-0.5 * y * y);
                m.psi[m.grid.index(i, j)] = p1 * p0;
            }
        return m;
    };
    const double d = 1e-3;
    const WignerField wm = wigner_transform(scaled_mode(-d), 32, 32, 6.5);
    const WignerField wc = wigner_transform(scaled_mode(0.0), 32, 32, 6.5);
    const WignerField wp = wigner_transform(scaled_mode(d), 32, 32, 6.5);

    const FisherReport r = analyze_fisher_triple(wm, wc, wp, 0.0, d, kTau);
    const ChannelDecomposition dm = split_channels(wm), dc = split_channels(wc),
                               dp = split_channels(wp);
    const ChannelFisherResult fplus =
        channel_fisher(dm, dc, dp, true, d, kTau, wc.cell_volume());
    const ChannelFisherResult fminus =
        channel_fisher(dm, dc, dp, false, d, kTau, wc.cell_volume());
    // floors are referenced to max P vs max |W|, so the masks differ slightly
    CHECK(fplus.fisher == Catch::Approx(r.F_plus).epsilon(0.01));
    // the pure-shape route and the centered-variance route agree closely
    CHECK(fminus.fisher == Catch::Approx(r.F_minus).epsilon(0.02));
    CHECK(r.F_tilde_minus >= r.F_minus);
    CHECK(fisher_bound_check(r) >= -1e-9 * r.bound_rhs);
}

TEST_CASE("empty mask is reported") {
    auto pos = [](double x) { return std::exp(-x * x); };
    const WignerField w = field_from_profile(32, -3.0, 0.2, pos);
    CHECK_THROWS_AS(score_field(w, w, kDelta, kTau), NumericalError);
    CHECK_THROWS_AS(analyze_fisher_triple(w, w, w, 0.0, kDelta, kTau), NumericalError);
}

TEST_CASE("grid mismatch is rejected") {
    auto lobe = [](double x) { return -std::exp(-x * x); };
    const WignerField w1 = field_from_profile(32, -3.0, 0.2, lobe);
    const WignerField w2 = field_from_profile(48, -3.0, 0.2, lobe);
    CHECK_THROWS_AS(analyze_fisher_triple(w1, w1, w2, 0.0, kDelta, kTau), std::invalid_argument);
    CHECK_THROWS_AS(score_field(w1, w2, kDelta, kTau), std::invalid_argument);
}

TEST_CASE("ac_center_diagnostics") {
    std::vector<double> th, hi, ms, ft, fm;
    for (int i = 0; i <= 20; ++i) {
        const double t = -1.0 + 0.1 * i;
        th.push_back(t);
        hi.push_back(1.0 - t * t);
        ms.push_back(-2.0 * t);         // d ln N / d theta ~ -2 t near the peak
        ft.push_back(100.0 + 4.0 * t * t);
        fm.push_back(100.0);
    }
    const AcCenterReport rep = ac_center_diagnostics(th, hi, ms, ft, fm);
    REQUIRE(rep.extremum_found);
    CHECK(rep.theta == Catch::Approx(0.0).margin(1e-12));
    CHECK(rep.mean_score_over_rms <= 0.05);
    CHECK(rep.rel_fisher_gap <= 0.05);

    // monotone h_i: no extremum
    std::vector<double> hi2;
    for (int i = 0; i <= 20; ++i) hi2.push_back(0.1 * i);
    CHECK_FALSE(ac_center_diagnostics(th, hi2, ms, ft, fm).extremum_found);
}
