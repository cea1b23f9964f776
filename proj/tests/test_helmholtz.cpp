#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "obw/helmholtz.hpp"
#include "oracles.hpp"

using namespace obw;

namespace {

// all-inside rectangular mask of nx x ny interior nodes with one exterior ring
DomainMask rect_mask(int nx, int ny, double h) {
    DomainMask m;
    m.grid = Grid2D(0.0, 0.0, h, h, nx + 2, ny + 2);
    m.inside.assign(m.grid.node_count(), 0);
    for (int i = 1; i <= nx; ++i)
        for (int j = 1; j <= ny; ++j) {
            m.inside[m.grid.index(i, j)] = 1;
            ++m.interior_count;
        }
    return m;
}

EigenMode synthetic_mode(double k, std::vector<double> psi) {
    EigenMode m;
    m.k = k;
    m.grid = Grid2D(0.0, 0.0, 1.0, 1.0, 2, 2);
    m.psi = std::move(psi);
    return m;
}

}  // namespace

TEST_CASE("assemble_operator single node and two-node line") {
    const double h = 0.25;
    {
        DomainMask m = rect_mask(1, 1, h);
        const DiscreteOperator op = assemble_operator(m);
        REQUIRE(op.matrix.rows() == 1);
        CHECK(op.matrix.coeff(0, 0) == Catch::Approx(4.0 / (h * h)));
    }
    {
        DomainMask m = rect_mask(2, 1, h);
        const DiscreteOperator op = assemble_operator(m);
        REQUIRE(op.matrix.rows() == 2);
        CHECK(op.matrix.coeff(0, 0) == Catch::Approx(4.0 / (h * h)));
        CHECK(op.matrix.coeff(1, 1) == Catch::Approx(4.0 / (h * h)));
        CHECK(op.matrix.coeff(0, 1) == Catch::Approx(-1.0 / (h * h)));
        CHECK(op.matrix.coeff(1, 0) == Catch::Approx(-1.0 / (h * h)));
    }
}

TEST_CASE("assemble_operator reproduces the discrete sine spectrum") {
    const int nx = 9, ny = 6;
    const double h = 0.1;
    DomainMask m = rect_mask(nx, ny, h);
    const DiscreteOperator op = assemble_operator(m);
    Eigen::MatrixXd dense(op.matrix);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
    const std::vector<double> ref = oracle::discrete_rectangle_spectrum(nx, ny, h, h);
    REQUIRE(es.eigenvalues().size() == static_cast<int>(ref.size()));
    for (int i = 0; i < es.eigenvalues().size(); ++i)
        CHECK(es.eigenvalues()(i) == Catch::Approx(ref[i]).epsilon(1e-12));
}

TEST_CASE("solve_eigenpairs: unit square lowest mode") {
    const int n = 63;  // h = 1/64
    const double h = 1.0 / (n + 1);
    DomainMask m = rect_mask(n, n, h);
    const DiscreteOperator op = assemble_operator(m);
    const auto modes = solve_eigenpairs(op, m.grid, 3);
    // discrete eigenvalue, then the continuum limit within O(h^2)
    const auto ref = oracle::discrete_rectangle_spectrum(n, n, h, h);
    CHECK(modes[0].k == Catch::Approx(std::sqrt(ref[0])).epsilon(1e-9));
    CHECK(modes[0].k == Catch::Approx(std::numbers::pi * std::sqrt(2.0)).epsilon(2e-4));
    for (const auto& md : modes) CHECK(md.residual <= 1e-8);
    // normalization
    double s = 0.0;
    for (double v : modes[0].psi) s += v * v;
    CHECK(s * h * h == Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("solve_modes: unit disk against Bessel zeros", "[slow]") {
    OvalShape disk(1.0, 1.0, 0.0);
    const double j01 = oracle::bessel_zero(0, 1);
    const double j11 = oracle::bessel_zero(1, 1);
    REQUIRE(j01 == Catch::Approx(2.404825557695773).margin(1e-9));
    REQUIRE(j11 == Catch::Approx(3.831705970207512).margin(1e-9));
    const Grid2D g = make_covering_grid({disk}, 1.0 / 64);
    const auto modes = solve_modes(disk, g, 4);
    CHECK(modes[0].k == Catch::Approx(j01).epsilon(2e-3));
    CHECK(modes[1].k == Catch::Approx(j11).epsilon(2e-3));
    CHECK(modes[2].k == Catch::Approx(j11).epsilon(2e-3));  // double eigenvalue
    // pairwise orthogonality
    for (int i = 0; i < 4; ++i)
        for (int j = i + 1; j < 4; ++j)
            CHECK(std::abs(overlap(modes[i], modes[j])) < 1e-8);
    // staircase operator is first order only; the corrected one is what solve uses
    SolveOptions plain;
    plain.corrected_boundary = false;
    const auto stair = solve_modes(disk, g, 1, {}, plain);
    CHECK(std::abs(stair[0].k - j01) > 5.0 * std::abs(modes[0].k - j01));
}

TEST_CASE("overlap and align_gauge") {
    EigenMode a = synthetic_mode(1.0, {0.6, 0.8, 0.0, 0.0});
    EigenMode b = synthetic_mode(1.0, {-0.6, -0.8, 0.0, 0.0});
    EigenMode c = synthetic_mode(1.0, {0.8, -0.6, 0.0, 0.0});
    CHECK(overlap(a, a) == Catch::Approx(1.0).margin(1e-14));
    CHECK(overlap(a, b) == Catch::Approx(-1.0).margin(1e-14));
    CHECK(overlap(a, c) == Catch::Approx(0.0).margin(1e-14));

    const EigenMode flipped = align_gauge(a, b);
    CHECK(overlap(a, flipped) == Catch::Approx(1.0).margin(1e-14));
    const EigenMode kept = align_gauge(a, a);
    CHECK(overlap(a, kept) == Catch::Approx(1.0).margin(1e-14));
    CHECK_THROWS_AS(align_gauge(a, c), NumericalError);

    EigenMode other = synthetic_mode(1.0, {1.0, 0.0, 0.0, 0.0});
    other.grid = Grid2D(0.0, 0.0, 0.5, 0.5, 2, 2);
    CHECK_THROWS_AS(overlap(a, other), std::invalid_argument);
}

namespace {

// modes of H(theta) = [[theta, g], [g, -theta]] embedded as 2-component
// wavefunctions; k offset keeps wavenumbers positive
std::vector<std::vector<EigenMode>> two_level_family(const std::vector<double>& thetas, double g,
                                                     double k_offset) {
    std::vector<std::vector<EigenMode>> out;
    for (double th : thetas) {
        Eigen::Matrix2d H;
        H << th, g, g, -th;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(H);
        std::vector<EigenMode> modes;
        for (int c = 0; c < 2; ++c) {
            const Eigen::Vector2d v = es.eigenvectors().col(c);
            modes.push_back(synthetic_mode(es.eigenvalues()(c) + k_offset,
                                           {v(0), v(1), 0.0, 0.0}));
        }
        out.push_back(std::move(modes));
    }
    return out;
}

}  // namespace

TEST_CASE("track_branches follows the two-level avoided crossing") {
    std::vector<double> thetas;
    for (int i = 0; i <= 40; ++i) thetas.push_back(-1.0 + 0.05 * i);
    const double g = 0.15;
    auto fam = two_level_family(thetas, g, 3.0);
    const auto branches = track_branches(thetas, fam);
    REQUIRE(branches.size() == 2);
    for (const auto& br : branches) {
        REQUIRE(br.size() == thetas.size());
        // adiabatic continuity: consecutive overlaps near one
        for (std::size_t t = 1; t < br.size(); ++t)
            CHECK(overlap(br.modes[t - 1], br.modes[t]) > 0.9);
    }
    // character exchange: at theta = -1 the lower state is ~(1, -...); by +1 it rotated
    const auto& lower = branches[0].k(0) < branches[1].k(0) ? branches[0] : branches[1];
    const double o_start_end = std::abs(overlap(lower.modes.front(), lower.modes.back()));
    CHECK(o_start_end < 0.5);  // spatial character moved to the other branch

    CHECK_THROWS_AS(track_branches({0.0}, {fam[0]}), std::invalid_argument);
}

TEST_CASE("track_branches rejects discontinuous chains") {
    // two samples with orthogonal mode sets and equal counts
    std::vector<std::vector<EigenMode>> fam = {
        {synthetic_mode(1.0, {1.0, 0.0, 0.0, 0.0})},
        {synthetic_mode(1.0, {0.0, 0.0, 0.0, 1.0})}};
    CHECK_THROWS_AS(track_branches({0.0, 0.1}, fam), TrackingError);
}

TEST_CASE("detect_avoided_crossing on the analytic two-level family") {
    std::vector<double> thetas;
    for (int i = 0; i <= 40; ++i) thetas.push_back(-1.0 + 0.05 * i);
    const double g = 0.05;
    auto fam = two_level_family(thetas, g, 3.0);
    auto branches = track_branches(thetas, fam);
    REQUIRE(branches.size() == 2);
    const auto det = detect_avoided_crossing(branches[0], branches[1]);
    REQUIRE(det.status == CrossingStatus::avoided);
    CHECK(det.ac->theta_star == Catch::Approx(0.0).margin(1e-12));
    CHECK(det.ac->gap == Catch::Approx(2.0 * g).margin(1e-12));
}

TEST_CASE("detect_avoided_crossing statuses") {
    auto make_branch = [](const std::vector<double>& thetas, const std::vector<double>& ks) {
        SpectrumBranch b;
        b.thetas = thetas;
        for (double k : ks) b.modes.push_back(synthetic_mode(k, {1.0, 0.0, 0.0, 0.0}));
        return b;
    };
    const std::vector<double> th = {-1.0, 0.0, 1.0};
    // parallel branches: monotone-gap warning
    auto b1 = make_branch(th, {1.0, 1.0, 1.0});
    auto b2 = make_branch(th, {1.5, 1.5, 1.5});
    CHECK(detect_avoided_crossing(b1, b2).status == CrossingStatus::monotone_gap);
    // symmetric dip: theta* at the center
    auto b3 = make_branch(th, {1.3, 1.1, 1.3});
    CHECK(detect_avoided_crossing(b1, b3).status == CrossingStatus::avoided);
    CHECK(detect_avoided_crossing(b1, b3).ac->theta_star == Catch::Approx(0.0).margin(1e-12));
    // sign change marks a true crossing
    auto b4 = make_branch(th, {0.8, 1.1, 1.4});
    CHECK(detect_avoided_crossing(b1, b4).status == CrossingStatus::crossing);
    // mismatched samples rejected
    auto b5 = make_branch({-1.0, 0.5, 1.0}, {1.0, 1.0, 1.0});
    CHECK_THROWS_AS(detect_avoided_crossing(b1, b5), std::invalid_argument);
}

TEST_CASE("disk spectrum convergence order", "[slow]") {
    OvalShape disk(1.0, 1.0, 0.0);
    const double j01 = oracle::bessel_zero(0, 1);
    std::vector<double> errs;
    for (double h : {1.0 / 32, 1.0 / 64}) {
        const Grid2D g = make_covering_grid({disk}, h);
        const auto modes = solve_modes(disk, g, 1);
        errs.push_back(std::abs(modes[0].k - j01) / j01);
    }
    const double order = std::log2(errs[0] / errs[1]);
    CHECK(order >= 1.7);
}
