#include "../support/generators.hpp"
#include "../support/models.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace defect_bands;

namespace {

std::vector<SpectrumPiece> pieces_of(const SpectralResult& r, PieceKind kind) {
    std::vector<SpectrumPiece> out;
    for (const auto& p : r.pieces) {
        if (p.kind == kind) out.push_back(p);
    }
    return out;
}

}  // namespace

TEST(BandRanges, ChainFullImage) {
    const auto spec = fixtures::chain_plain();
    const std::vector<double> base{0.0};
    const auto r = band_ranges(spec, 1, base, 32);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_NEAR(r[0].lo, -2.0, 1e-12);
    EXPECT_NEAR(r[0].hi, 2.0, 1e-12);
}

TEST(BandRanges, OffGridExtremaAreRefined) {
    // Band 2 cos(k - 0.3) peaks between nodes of a 16-point grid.
    Stencil st(1, 1);
    st.hop({1}, ComplexMatrix::Constant(1, 1, std::polar(1.0, -0.3)))
        .hop({-1}, ComplexMatrix::Constant(1, 1, std::polar(1.0, 0.3)));
    const auto spec = fixtures::plain(st, {-3, 3});
    const std::vector<double> base{0.0};
    const auto r = band_ranges(spec, 1, base, 16);
    ASSERT_EQ(r.size(), 1u);
    EXPECT_NEAR(r[0].hi, 2.0, 1e-12);
    EXPECT_NEAR(r[0].lo, -2.0, 1e-12);
}

TEST(Exclusion, ChainLevelOneIsBand) {
    const auto spec = fixtures::chain_point_defect(1.0);
    const auto ex = exclusion_set(spec, 1, {}, SweepGrids{});
    ASSERT_EQ(ex.intervals.size(), 1u);
    ASSERT_EQ(ex.intervals[0].size(), 1u);
    EXPECT_NEAR(ex.intervals[0][0].lo, -2.0, 1e-12);
    EXPECT_NEAR(ex.intervals[0][0].hi, 2.0, 1e-12);
}

TEST(Exclusion, LineDefectSliceIsShiftedBand) {
    const auto spec = fixtures::square_line_defect(1.0);
    const auto ex = exclusion_set(spec, 1, {}, SweepGrids{});
    for (std::size_t node = 0; node < ex.grid.size(); ++node) {
        const double k2 = ex.grid.point(node)[1];
        ASSERT_EQ(ex.intervals[node].size(), 1u);
        EXPECT_NEAR(ex.intervals[node][0].lo, -2.0 + 2.0 * std::cos(k2), 1e-12);
        EXPECT_NEAR(ex.intervals[node][0].hi, 2.0 + 2.0 * std::cos(k2), 1e-12);
    }
}

TEST(Branch, ZeroStrengthHasNoRoots) {
    const auto spec = fixtures::chain_point_defect(0.0);
    const auto ex = exclusion_set(spec, 1, {}, SweepGrids{});
    EXPECT_TRUE(dispersion_branch(spec, 1, ex, SweepGrids{}).samples.empty());
}

TEST(Branch, PointDefectBoundStates) {
    for (double eps : {0.5, 1.0, 2.0, -0.5, -2.0}) {
        const auto spec = fixtures::chain_point_defect(eps);
        const auto ex = exclusion_set(spec, 1, {}, SweepGrids{});
        const auto br = dispersion_branch(spec, 1, ex, SweepGrids{});
        ASSERT_EQ(br.samples.size(), 1u) << eps;
        EXPECT_NEAR(br.samples[0].omega, fixtures::point_state(eps), 1e-10) << eps;
        EXPECT_FALSE(br.samples[0].near_band);
    }
}

TEST(Branch, GuidedModeFollowsClosedForm) {
    const auto spec = fixtures::square_line_defect(1.0);
    const auto ex = exclusion_set(spec, 1, {}, SweepGrids{});
    const auto br = dispersion_branch(spec, 1, ex, SweepGrids{});
    ASSERT_EQ(br.samples.size(), ex.grid.size());
    for (const auto& s : br.samples) {
        EXPECT_NEAR(s.omega, 2.0 * std::cos(s.k[1]) + std::sqrt(5.0), 1e-9);
        EXPECT_GE(s.omega - (2.0 + 2.0 * std::cos(s.k[1])), spec.tolerances.band_guard);
    }
}

TEST(Branch, WeakLineDefectModesStayOutsideGuard) {
    // eps = 0.1: the mode sits sqrt(4.01) - 2 ~ 2.5e-3 above the slice band.
    const auto spec = fixtures::square_line_defect(0.1);
    const auto ex = exclusion_set(spec, 1, {}, SweepGrids{});
    const auto br = dispersion_branch(spec, 1, ex, SweepGrids{});
    for (const auto& s : br.samples) {
        EXPECT_NEAR(s.omega, 2.0 * std::cos(s.k[1]) + std::sqrt(4.01), 1e-9);
    }
}

TEST(FullSpectrum, NoDefectsIsBandsOnly) {
    const auto r = full_spectrum(fixtures::square_plain(), SweepGrids{});
    ASSERT_EQ(r.pieces.size(), 1u);
    EXPECT_EQ(r.pieces[0].kind, PieceKind::BandInterval);
    EXPECT_NEAR(r.pieces[0].range.lo, -4.0, 1e-12);
    EXPECT_NEAR(r.pieces[0].range.hi, 4.0, 1e-12);
}

TEST(FullSpectrum, PointDefectAddsIsolatedPoint) {
    const auto r = full_spectrum(fixtures::chain_point_defect(1.0), SweepGrids{});
    const auto pts = pieces_of(r, PieceKind::IsolatedPoint);
    ASSERT_EQ(pts.size(), 1u);
    EXPECT_NEAR(pts[0].range.lo, std::sqrt(5.0), 1e-10);
    EXPECT_EQ(pts[0].codim, 1);
    EXPECT_TRUE(r.inconclusive.empty());
}

TEST(FullSpectrum, LineDefectAddsBranchInterval) {
    const auto r = full_spectrum(fixtures::square_line_defect(1.0), SweepGrids{});
    const auto br = pieces_of(r, PieceKind::BranchInterval);
    ASSERT_EQ(br.size(), 1u);
    EXPECT_NEAR(br[0].range.lo, std::sqrt(5.0) - 2.0, 1e-9);
    EXPECT_NEAR(br[0].range.hi, std::sqrt(5.0) + 2.0, 1e-9);
}

TEST(FullSpectrum, OmegaSetIsClippedToWindow) {
    auto spec = fixtures::chain_point_defect(1.0);
    spec.omega_window = {-1.0, 1.0};
    const auto r = full_spectrum(spec, SweepGrids{});
    ASSERT_EQ(r.omega_set.size(), 1u);
    EXPECT_EQ(r.omega_set[0], (Interval{-1.0, 1.0}));
}

TEST(FullSpectrum, InvalidSpecIsRejected) {
    auto spec = fixtures::chain_point_defect(1.0);
    spec.defects.push_back(fixtures::onsite_defect(1, 1, 2.0));
    EXPECT_THROW(full_spectrum(spec, SweepGrids{}), InputError);
}

TEST(FullSpectrum, ResultIsIndependentOfThreadCount) {
    const auto spec = fixtures::square_line_and_point(1.0, 1.0);
    SweepGrids one, many;
    many.threads = 4;
    const auto a = full_spectrum(spec, one);
    const auto b = full_spectrum(spec, many);
    ASSERT_EQ(a.pieces.size(), b.pieces.size());
    for (std::size_t i = 0; i < a.pieces.size(); ++i) EXPECT_EQ(a.pieces[i].range, b.pieces[i].range);
    ASSERT_EQ(a.branches.size(), b.branches.size());
    for (std::size_t j = 0; j < a.branches.size(); ++j) {
        ASSERT_EQ(a.branches[j].samples.size(), b.branches[j].samples.size());
        for (std::size_t i = 0; i < a.branches[j].samples.size(); ++i) {
            EXPECT_EQ(a.branches[j].samples[i].omega, b.branches[j].samples[i].omega);
        }
    }
}

TEST(SpectrumProperty, MembershipAgreesWithOmegaOnPointDefects) {
    gen::Source src(81);
    for (int trial = 0; trial < 6; ++trial) {
        // |eps| >= 0.5 keeps the bound state clear of the band guard.
        const double eps = std::copysign(src.uniform(0.5, 3), src.uniform(-1, 1));
        const auto spec = fixtures::chain_point_defect(eps);
        const auto r = full_spectrum(spec, SweepGrids{});
        for (int probe = 0; probe < 15; ++probe) {
            const double lambda = src.uniform(-4, 4);
            const auto c = membership(spec, lambda, SweepGrids{});
            if (c.verdict == Verdict::Inconclusive || r.in_inconclusive(lambda)) continue;
            EXPECT_EQ(c.verdict == Verdict::In, r.contains(lambda, spec.tolerances.root_tol_omega))
                << "eps " << eps << " lambda " << lambda;
        }
        // The bound state itself is a member.
        const double bound = fixtures::point_state(eps);
        EXPECT_TRUE(r.contains(bound, 1e-9));
        EXPECT_EQ(membership(spec, bound, SweepGrids{}).verdict, Verdict::In);
    }
}
