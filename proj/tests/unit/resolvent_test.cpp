#include "../support/generators.hpp"
#include "../support/models.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace defect_bands;

namespace {

TrigVectorPolynomial random_rhs(gen::Source& src, int dim, Eigen::Index m, int terms) {
    TrigVectorPolynomial g{dim, m, {}};
    for (int t = 0; t < terms; ++t) {
        ComplexVector v(m);
        for (Eigen::Index i = 0; i < m; ++i) v(i) = src.complex();
        g.coeffs[src.offset(dim, 3)] = v;
    }
    return g;
}

}  // namespace

TEST(Resolvent, ForwardOperatorOfPlainChainIsMultiplication) {
    const auto spec = fixtures::chain_plain();
    const FullGrid grid(1, 16);
    std::vector<ComplexVector> f(grid.size(), ComplexVector::Ones(1));
    const auto out = apply_operator(spec, 3.0, grid, f);
    for (std::size_t i = 0; i < out.size(); ++i) {
        EXPECT_NEAR(out[i](0).real(), 2.0 * std::cos(grid.point(0, i)[0]) - 3.0, 1e-15);
    }
}

// For a constant right-hand side c the point-defect equation closes on the
// bracket u = <f>: with G = <1/(2 cos k - omega)> = -sqrt(2 pi) / sqrt(omega^2 - 4),
// u = c G / (1 + eps G / sqrt(2 pi)) and f(k) = (c - eps u / sqrt(2 pi)) / (2 cos k - omega).
TEST(Resolvent, PointDefectConstantSourceMatchesClosedForm) {
    const double eps = 1.0, omega = 3.0;
    const auto spec = fixtures::chain_point_defect(eps);
    TrigVectorPolynomial g{1, 1, {}};
    g.coeffs[{0}] = ComplexVector::Constant(1, Complex(0.7, -0.2));
    const auto res = resolvent_apply(spec, omega, g, 128);
    const double root = std::sqrt(2.0 * std::numbers::pi);
    const Complex c(0.7, -0.2);
    const double green = -root / std::sqrt(omega * omega - 4.0);
    const Complex u = c * green / (1.0 + eps * green / root);
    const FullGrid grid(1, 128);
    for (std::size_t i = 0; i < res.f.size(); ++i) {
        const double k = grid.point(0, i)[0];
        const Complex expected = (c - eps * u / root) / (2.0 * std::cos(k) - omega);
        EXPECT_LT(std::abs(res.f[i](0) - expected), 1e-12);
    }
}

TEST(Resolvent, RoundTripResidualIsSmall) {
    gen::Source src(91);
    const auto spec = fixtures::chain_point_defect(1.0);
    for (int trial = 0; trial < 5; ++trial) {
        const auto res = resolvent_apply(spec, 3.0, random_rhs(src, 1, 1, 5), 64);
        EXPECT_LT(res.residual, 1e-12);
    }
}

TEST(Resolvent, LineAndPointDefectRoundTrip) {
    gen::Source src(92);
    const auto spec = fixtures::square_line_and_point(1.0, 1.0);
    for (double omega : {5.0, -4.5}) {
        const auto res = resolvent_apply(spec, omega, random_rhs(src, 2, 1, 6), 32);
        EXPECT_LT(res.residual, 1e-12) << omega;
        EXPECT_EQ(res.min_sigma_per_level.size(), 3u);
    }
}

TEST(Resolvent, BoundStateFrequencyIsRejected) {
    const auto spec = fixtures::chain_point_defect(1.0);
    gen::Source src(93);
    EXPECT_THROW(resolvent_apply(spec, std::sqrt(5.0), random_rhs(src, 1, 1, 3), 64), SingularMatrix);
}

TEST(Resolvent, BandFrequencyOnANodeIsRejected) {
    const auto spec = fixtures::chain_plain();
    gen::Source src(94);
    EXPECT_THROW(resolvent_apply(spec, 2.0, random_rhs(src, 1, 1, 3), 16), SingularMatrix);
}

TEST(ResolventProperty, RandomModelsRoundTrip) {
    gen::Source src(95);
    for (int trial = 0; trial < 12; ++trial) {
        const int dim = src.integer(1, 2);
        const auto m = src.integer(1, 2);
        auto spec = fixtures::plain(src.stencil(dim, m, 3, 1, true), {-50, 50});
        for (int j = 1; j <= dim; ++j) {
            spec.defects.push_back(DefectLayer::from_stencils(j, dim, {{0, src.stencil(dim - j, m, 2, 1, true)}}));
        }
        // Far above every band and bound state of these bounded operators.
        const double omega = 40.0;
        const auto res = resolvent_apply(spec, omega, random_rhs(src, dim, m, 4), 16);
        EXPECT_LT(res.residual, 1e-12);
    }
}
