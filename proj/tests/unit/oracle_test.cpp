#include "../support/generators.hpp"
#include "../support/models.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace defect_bands;

TEST(Truncation, OpenChainIsTridiagonal) {
    const auto t = assemble_truncated(fixtures::chain_plain(), {5}, {Boundary::Open});
    ASSERT_EQ(t.matrix.rows(), 11);
    for (Eigen::Index i = 0; i < 11; ++i) {
        for (Eigen::Index j = 0; j < 11; ++j) {
            EXPECT_EQ(t.matrix(i, j), Complex(std::abs(i - j) == 1 ? 1.0 : 0.0, 0.0)) << i << "," << j;
        }
    }
}

TEST(Truncation, PointDefectSitsAtCentre) {
    const auto t = assemble_truncated(fixtures::chain_point_defect(0.7), {5}, {Boundary::Open});
    EXPECT_EQ(t.matrix(5, 5), Complex(0.7, 0.0));
    EXPECT_EQ(t.matrix(4, 4), Complex(0.0, 0.0));
}

TEST(Truncation, PeriodicChainIsCirculant) {
    const auto t = assemble_truncated(fixtures::chain_plain(), {6}, {Boundary::Periodic});
    EXPECT_EQ(t.matrix(0, 5), Complex(1.0, 0.0));
    EXPECT_EQ(t.matrix(5, 0), Complex(1.0, 0.0));
    for (Eigen::Index i = 0; i < 6; ++i) EXPECT_EQ(t.matrix.row(i).sum(), Complex(2.0, 0.0));
}

TEST(Truncation, LineDefectOccupiesOneColumnOfCells) {
    const auto t = assemble_truncated(fixtures::square_line_defect(1.0), {2, 3}, {Boundary::Open, Boundary::Periodic});
    for (long cell = 0; cell < t.cells(); ++cell) {
        const auto c = t.coords(cell);
        EXPECT_EQ(t.matrix(cell, cell).real(), c[0] == 0 ? 1.0 : 0.0);
    }
}

TEST(Truncation, RejectsQuadraticAndOversize) {
    auto wave = fixtures::chain_plain();
    TrigMatrixPolynomial q(1, 1);
    q.set({0}, -identity(1));
    wave.bulk.set_term(2, q);
    EXPECT_THROW(assemble_truncated(wave, {4}, {Boundary::Open}), InputError);
    EXPECT_THROW(assemble_truncated(fixtures::square_plain(), {100, 100}, {Boundary::Open, Boundary::Open}),
                 InputError);
    EXPECT_THROW(assemble_truncated(fixtures::chain_plain(), {0}, {Boundary::Periodic}), InputError);
}

TEST(OracleEigenvalues, OpenElevenSiteChain) {
    const auto ev = oracle_eigenvalues(assemble_truncated(fixtures::chain_plain(), {5}, {Boundary::Open}));
    ASSERT_EQ(ev.size(), 11u);
    for (int m = 1; m <= 11; ++m) {
        // ascending order: the m-th smallest is 2 cos(pi (12 - m) / 12)
        EXPECT_NEAR(ev[static_cast<std::size_t>(m - 1)], 2.0 * std::cos(kPi * (12 - m) / 12.0), 1e-13);
    }
}

TEST(OracleEigenvalues, SingleSiteDefect) {
    ProblemSpec spec = fixtures::plain(Stencil(1, 1), {-2, 2});
    spec.defects.push_back(fixtures::onsite_defect(1, 1, 1.0));
    const auto ev = oracle_eigenvalues(assemble_truncated(spec, {0}, {Boundary::Open}));
    EXPECT_EQ(ev, std::vector<double>{1.0});
}

TEST(PeriodicBox, IdentityHoldsForBundledShapes) {
    for (long l : {4L, 8L, 16L}) {
        EXPECT_LT(periodic_box_check(fixtures::chain_plain(), l), 1e-12);
        EXPECT_LT(periodic_box_check(fixtures::square_plain(), l), 1e-12);
        EXPECT_LT(periodic_box_check(fixtures::bipartite_chain(1.0, 0.5), l), 1e-12);
    }
}

TEST(PeriodicBoxProperty, RandomSelfAdjointModels) {
    gen::Source src(101);
    for (int trial = 0; trial < 15; ++trial) {
        const int dim = src.integer(1, 2);
        const auto m = src.integer(1, 3);
        const auto spec = fixtures::plain(src.stencil(dim, m, 4, 2, true), {-20, 20});
        const long l = dim == 1 ? src.integer(5, 12) : src.integer(5, 8);
        EXPECT_LT(periodic_box_check(spec, l), 1e-11);
    }
}

TEST(Compare, PlainChainHasNothingOutsideBand) {
    const auto spec = fixtures::chain_point_defect(0.0);
    const auto r = full_spectrum(spec, SweepGrids{});
    const auto t = assemble_truncated(spec, {30}, {Boundary::Open});
    const auto cmp = compare_spectra(r, t, 1e-10);
    EXPECT_TRUE(cmp.ok);
    for (double e : oracle_eigenvalues(t)) {
        EXPECT_GE(e, -2.0 - 1e-10);
        EXPECT_LE(e, 2.0 + 1e-10);
    }
}

TEST(Compare, BoundStateMatchesOracle) {
    const auto spec = fixtures::chain_point_defect(1.0);
    const auto r = full_spectrum(spec, SweepGrids{});
    const auto cmp = compare_spectra(r, assemble_truncated(spec, {100}, {Boundary::Open}), 1e-10);
    EXPECT_TRUE(cmp.ok);
    ASSERT_EQ(cmp.points.size(), 1u);
    EXPECT_LT(cmp.points[0].gap, 1e-10);
}

TEST(Compare, EdgeStatesOfDimerizedChainAreFlagged) {
    // Weak intra-cell bond at both ends of the box: two near-zero edge modes
    // in the gap (-0.5, 0.5) of the infinite chain.
    const auto spec = fixtures::bipartite_chain(0.5, 1.0);
    const auto r = full_spectrum(spec, SweepGrids{});
    const auto cmp = compare_spectra(r, assemble_truncated(spec, {20}, {Boundary::Open}), 1e-8);
    EXPECT_EQ(cmp.flagged_edge, 2u);
    EXPECT_TRUE(cmp.ok);
}

TEST(Compare, LineDefectStripContainsGuidedModes) {
    const auto spec = fixtures::square_line_defect(1.0);
    const auto ev = oracle_eigenvalues(assemble_truncated(spec, {30, 8}, {Boundary::Open, Boundary::Periodic}));
    for (int m = 0; m < 8; ++m) {
        const double k2 = kTwoPi * m / 8.0 - kPi;
        const double w = 2.0 * std::cos(k2) + std::sqrt(5.0);
        EXPECT_LT(std::abs(nearest_to(ev, w) - w), 1e-9) << k2;
    }
}

TEST(Compare, LineAndPointDefectBoundStateIsApproachedByOracle) {
    // The bound state sits close to the top of the guided branch, so it
    // decays slowly along the line; the box error must shrink geometrically.
    const auto spec = fixtures::square_line_and_point(1.0, 1.0);
    const auto r = full_spectrum(spec, SweepGrids{});
    std::vector<double> points;
    for (const auto& p : r.pieces) {
        if (p.kind == PieceKind::IsolatedPoint) points.push_back(p.range.lo);
    }
    ASSERT_EQ(points.size(), 1u);
    auto gap = [&](long l) {
        const auto ev = oracle_eigenvalues(assemble_truncated(spec, {l, l}, {Boundary::Open, Boundary::Open}));
        return std::abs(nearest_to(ev, points[0]) - points[0]);
    };
    const double coarse = gap(10), fine = gap(20);
    EXPECT_LT(fine, 1e-5);
    EXPECT_LT(fine, coarse / 100.0);
}
