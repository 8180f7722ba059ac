#include "../support/generators.hpp"
#include "../support/models.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace defect_bands;

namespace {

/// term_0 = 3 + 2 cos k, term_2 = -1: roots +-sqrt(3 + 2 cos k).
ProblemSpec wave_chain() {
    ProblemSpec p;
    p.lattice_dim = 1;
    Stencil st(1, 1);
    st.hop({0}, fixtures::scalar(3)).hop({1}, fixtures::scalar(1)).hop({-1}, fixtures::scalar(1));
    p.bulk = OmegaSymbol(1, 1);
    p.bulk.set_term(0, stencil_to_symbol(st));
    TrigMatrixPolynomial q(1, 1);
    q.set({0}, -identity(1));
    p.bulk.set_term(2, q);
    p.omega_window = {-4, 4};
    return p;
}

}  // namespace

TEST(Bands, ChainAtZero) {
    const std::vector<double> k{0.0};
    EXPECT_EQ(bands(fixtures::chain_plain(), k), std::vector<double>{2.0});
}

TEST(Bands, SquareAtCorner) {
    const std::vector<double> k{kPi, kPi};
    const auto v = bands(fixtures::square_plain(), k);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_NEAR(v[0], -4.0, 1e-15);
}

TEST(Bands, BipartiteTouchesAtZoneEdge) {
    const std::vector<double> k{kPi};
    const auto v = bands(fixtures::bipartite_chain(), k);
    ASSERT_EQ(v.size(), 2u);
    EXPECT_NEAR(v[0], 0.0, 1e-15);
    EXPECT_NEAR(v[1], 0.0, 1e-15);
}

TEST(Bands, BipartiteMatchesClosedForm) {
    gen::Source src(71);
    for (int i = 0; i < 20; ++i) {
        const double t1 = src.uniform(0.2, 2), t2 = src.uniform(0.2, 2);
        const auto k = src.point(1);
        const auto v = bands(fixtures::bipartite_chain(t1, t2), k);
        const double e = std::abs(Complex(t1, 0.0) + t2 * std::polar(1.0, k[0]));
        EXPECT_NEAR(v[0], -e, 1e-14);
        EXPECT_NEAR(v[1], e, 1e-14);
    }
}

TEST(Bands, QuadraticFamilyUsesCompanionForm) {
    const auto spec = wave_chain();
    for (double k : {-2.0, 0.0, 0.9, kPi}) {
        const std::vector<double> kk{k};
        const auto v = bands(spec, kk);
        ASSERT_EQ(v.size(), 2u);
        const double w = std::sqrt(3.0 + 2.0 * std::cos(k));
        EXPECT_NEAR(v[0], -w, 1e-12);
        EXPECT_NEAR(v[1], w, 1e-12);
    }
}

TEST(Bands, ScaledLinearFamilyUsesPencil) {
    auto spec = fixtures::chain_plain();
    TrigMatrixPolynomial two(1, 1);
    two.set({0}, -2.0 * identity(1));
    spec.bulk.set_term(1, two);
    EXPECT_FALSE(spec.bulk.is_standard_shift());
    const std::vector<double> k{0.5};
    const auto v = bands(spec, k);
    ASSERT_EQ(v.size(), 1u);
    EXPECT_NEAR(v[0], std::cos(0.5), 1e-13);
}

TEST(Bands, RejectsUnsupportedFamilies) {
    const std::vector<double> k{0.0};
    auto flat = fixtures::chain_plain();
    OmegaSymbol only(1, 1);
    only.set_term(0, flat.bulk.term(0));
    flat.bulk = only;
    EXPECT_THROW(bands(flat, k), InputError);
    auto skew = fixtures::chain_plain();
    TrigMatrixPolynomial t(1, 1);
    t.set({1}, fixtures::scalar(1));
    skew.bulk.set_term(0, t);
    EXPECT_THROW(bands(skew, k), InputError);
}

TEST(BandsProperty, PencilAgreesWithHermitianEigenvaluesOnRandomModels) {
    // Writing the shift as -c I with c > 0 must give the Hermitian bands divided by c.
    gen::Source src(72);
    for (int trial = 0; trial < 25; ++trial) {
        const auto m = src.integer(1, 3);
        const auto st = src.stencil(1, m, 3, 2, true);
        auto std_spec = fixtures::plain(st, {-10, 10});
        auto scaled = std_spec;
        const double c = src.uniform(0.5, 3);
        TrigMatrixPolynomial shift(1, m);
        shift.set({0}, -c * identity(m));
        scaled.bulk.set_term(1, shift);
        const auto k = src.point(1);
        const auto a = bands(std_spec, k);
        const auto b = bands(scaled, k);
        ASSERT_EQ(a.size(), b.size());
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(b[i], a[i] / c, 1e-10 * std::max(1.0, std::abs(a[i])));
    }
}

TEST(BandsProperty, SelfAdjointRealStencilsAreEvenInK) {
    gen::Source src(73);
    for (int trial = 0; trial < 25; ++trial) {
        const int dim = src.integer(1, 3);
        Stencil st(dim, 1);
        for (int t = 0; t < 3; ++t) {
            const auto n = src.offset(dim, 2);
            const double h = src.uniform(-1, 1);
            st.hop(n, fixtures::scalar(h)).hop(negate(n), fixtures::scalar(h));
        }
        const auto spec = fixtures::plain(st, {-20, 20});
        auto k = src.point(dim);
        const auto v = bands(spec, k);
        for (auto& x : k) x = -x;
        const auto w = bands(spec, k);
        for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(v[i], w[i], 1e-13);
    }
}
