#include "../support/generators.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace defect_bands;

namespace {

const double kRootTwoPi = std::sqrt(2.0 * std::numbers::pi);

MatrixFunction constant(const ComplexMatrix& a) {
    return [a](std::span<const double>) { return a; };
}

MatrixFunction green_chain(double lambda) {
    return [lambda](std::span<const double> k) {
        return ComplexMatrix::Constant(1, 1, Complex(1.0 / (lambda - 2.0 * std::cos(k[0])), 0.0));
    };
}

}  // namespace

TEST(Bracket, ConstantIdentityGivesRootTwoPi) {
    const std::vector<double> base{0.0};
    const auto v = bracket(constant(identity(2)), KGrid({0}, 16), base);
    EXPECT_LT((v - kRootTwoPi * identity(2)).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Bracket, PlaneWaveAveragesToZero) {
    const MatrixFunction wave = [](std::span<const double> k) {
        return ComplexMatrix(std::polar(1.0, k[0]) * identity(2));
    };
    const std::vector<double> base{0.0};
    EXPECT_LT(bracket(wave, KGrid({0}, 16), base).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Bracket, TwoAxisNormalizationIsTwoPi) {
    const std::vector<double> base{0.0, 0.0, 0.4};
    const auto v = bracket(constant(identity(1)), KGrid({0, 1}, 8), base);
    EXPECT_NEAR(v(0, 0).real(), 2.0 * std::numbers::pi, 1e-13);
}

TEST(Bracket, RejectsBadGrid) {
    EXPECT_THROW(KGrid({0}, 12), InputError);
    EXPECT_THROW(KGrid({0}, 2), InputError);
    EXPECT_THROW(KGrid({0, 0}, 8), InputError);
}

TEST(Adaptive, ConstantConvergesAtFirstRefinementWithZeroError) {
    const std::vector<double> base{0.0};
    const auto r = adaptive_bracket_at(constant(identity(1)), {0}, base, AdaptiveOptions{});
    EXPECT_EQ(r.error, 0.0);
    EXPECT_EQ(r.points_per_axis, 32);
}

// (2 pi)^{-1} int dk / (lambda - 2 cos k) = (lambda^2 - 4)^{-1/2} for lambda > 2.
TEST(Adaptive, LatticeGreenIntegralMatchesClosedForm) {
    const std::vector<double> base{0.0};
    for (double lambda : {2.5, 3.0, 5.0, -3.0}) {
        const auto r = adaptive_bracket_at(green_chain(lambda), {0}, base, AdaptiveOptions{});
        const double closed = std::copysign(1.0, lambda) / std::sqrt(lambda * lambda - 4.0);
        EXPECT_NEAR(r.value(0, 0).real() / kRootTwoPi, closed, 1e-12) << lambda;
        EXPECT_LE(r.points_per_axis, 256);
    }
}

TEST(Adaptive, SingularIntegrandFailsWithMonitor) {
    const std::vector<double> base{0.0};
    AdaptiveOptions opt;
    opt.n_max = 1 << 10;
    opt.monitor = [](std::span<const double> k) { return std::abs(1.0 - 2.0 * std::cos(k[0])); };
    try {
        adaptive_bracket_at(green_chain(1.0), {0}, base, opt);
        FAIL() << "expected NonConvergence";
    } catch (const NonConvergence& e) {
        EXPECT_LT(e.min_sigma(), 0.2);
        EXPECT_EQ(e.points_per_axis(), 1 << 10);
    }
}

TEST(Adaptive, PoleOnANodeIsReportedNotReturned) {
    // lambda = 2 puts the pole exactly on k = 0, a grid node for every n.
    const std::vector<double> base{0.0};
    EXPECT_THROW(adaptive_bracket_at(green_chain(2.0), {0}, base, AdaptiveOptions{}), NonConvergence);
}

TEST(Adaptive, AveragedFunctionUsesRemainingAxes) {
    // <1 / (lambda - 2 cos k1 - 2 cos k2)>_1 depends on k2 through the shift
    // lambda - 2 cos k2, so it must equal the 1D closed form there.
    const MatrixFunction f = [](std::span<const double> k) {
        return ComplexMatrix::Constant(1, 1, Complex(1.0 / (6.0 - 2.0 * std::cos(k[0]) - 2.0 * std::cos(k[1])), 0.0));
    };
    const auto avg = adaptive_bracket(f, {0}, 2, AdaptiveOptions{});
    EXPECT_EQ(avg.function.remaining_axes(), std::vector<int>{1});
    for (double k2 : {-2.0, 0.0, 1.3}) {
        const std::vector<double> k{123.0, k2};
        const double shift = 6.0 - 2.0 * std::cos(k2);
        EXPECT_NEAR(avg.function(k)(0, 0).real() / kRootTwoPi, 1.0 / std::sqrt(shift * shift - 4.0), 1e-12);
    }
}

TEST(QuadratureProperty, TrigPolynomialBracketIsRootTwoPiTimesConstantTerm) {
    gen::Source src(51);
    for (int trial = 0; trial < 30; ++trial) {
        const int dim = src.integer(1, 3);
        const auto m = src.integer(1, 3);
        const auto poly = stencil_to_symbol(src.stencil(dim, m, 5, 3, false));
        const int j = src.integer(1, dim);
        std::vector<int> axes(static_cast<std::size_t>(j));
        std::iota(axes.begin(), axes.end(), 0);
        const auto k = src.point(dim);
        const MatrixFunction f = [&](std::span<const double> kk) { return poly.eval(kk); };
        const ComplexMatrix v = bracket(f, KGrid(axes, 8), k);
        // Surviving coefficients: offsets vanishing on the averaged axes.
        ComplexMatrix expected = ComplexMatrix::Zero(m, m);
        for (const auto& [n, a] : poly.coefficients()) {
            bool averaged_zero = true;
            double phase = 0.0;
            for (int ax = 0; ax < dim; ++ax) {
                if (ax < j) averaged_zero = averaged_zero && n[static_cast<std::size_t>(ax)] == 0;
                else phase += n[static_cast<std::size_t>(ax)] * k[static_cast<std::size_t>(ax)];
            }
            if (averaged_zero) expected += std::polar(1.0, phase) * a;
        }
        expected *= std::pow(2.0 * std::numbers::pi, 0.5 * j);
        EXPECT_LT((v - expected).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(QuadratureProperty, BracketIsLinear) {
    gen::Source src(52);
    for (int trial = 0; trial < 20; ++trial) {
        const double a = src.uniform(-2, 2), b = src.uniform(-2, 2);
        const double s1 = src.uniform(2.5, 4), s2 = src.uniform(2.5, 4);
        const std::vector<double> base{0.0};
        const KGrid g({0}, 64);
        const MatrixFunction both = [&](std::span<const double> k) {
            return ComplexMatrix(a * green_chain(s1)(k) + b * green_chain(s2)(k));
        };
        const auto lhs = bracket(both, g, base);
        const ComplexMatrix rhs = a * bracket(green_chain(s1), g, base) + b * bracket(green_chain(s2), g, base);
        EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-13);
    }
}

TEST(QuadratureProperty, ResultDoesNotDependOnThreadCount) {
    const std::vector<double> base{0.0, 0.7};
    const MatrixFunction f = [](std::span<const double> k) {
        return ComplexMatrix::Constant(1, 1, Complex(1.0 / (5.0 - 2.0 * std::cos(k[0]) - std::cos(k[1])), std::sin(k[0])));
    };
    const KGrid g({0}, 256);
    const auto one = bracket(f, g, base, 1);
    for (int t : {2, 3, 8}) EXPECT_EQ(bracket(f, g, base, t), one);
}

TEST(Parallel, LowestIndexExceptionIsRethrown) {
    try {
        parallel_map<int>(16, 4, [](std::size_t i) -> int {
            if (i == 5 || i == 11) throw std::runtime_error(std::to_string(i));
            return static_cast<int>(i);
        });
        FAIL();
    } catch (const std::runtime_error& e) {
        EXPECT_STREQ(e.what(), "5");
    }
}
