#include "qma/identities.hpp"
#include "qma/moore.hpp"
#include "qma/poly.hpp"

#include <gtest/gtest.h>

using namespace qma;

namespace {

PolyField x(int n, int m) { return PolyField::variable(n, m); }
PolyField c(int n, int v) { return PolyField::constant(n, ComplexRational(Rational(v))); }
ComplexRational I() { return ComplexRational(Rational(0), Rational(1)); }

} // namespace

TEST(Nabla, Examples) {
    EXPECT_EQ(nabla_apply(1, 0, 0, x(1, 0)), c(1, 1));
    EXPECT_EQ(nabla_apply(1, 0, 0, x(1, 1)), PolyField::constant(1, I()));
    EXPECT_TRUE(nabla_apply(1, 0, 1, x(1, 0) * x(1, 0)).is_zero());
    EXPECT_THROW(nabla_apply(1, 2, 0, x(1, 0)), DomainError);
    EXPECT_THROW(nabla_apply(1, 0, 2, x(1, 0)), DomainError);
}

TEST(Nabla, SecondBlockFollowsFirst) {
    // n = 2: rows 2,3 act on x4..x7 exactly like rows 0,1 on x0..x3
    EXPECT_EQ(nabla_apply(2, 2, 0, x(2, 5)), PolyField::constant(2, I()));
    EXPECT_EQ(nabla_apply(2, 3, 1, x(2, 5)), PolyField::constant(2, -I()));
    EXPECT_EQ(nabla_apply(2, 2, 1, x(2, 6)), c(2, -1));
    EXPECT_TRUE(nabla_apply(2, 2, 0, x(2, 0)).is_zero());
}

TEST(D0, ConstantAndTopDegree) {
    EXPECT_TRUE(d0(as_form(1, c(1, 5))).is_zero());
    EXPECT_THROW(d0(PolyForm::top(1, x(1, 0))), DomainError);
}

TEST(Baston, KillsConstants) {
    EXPECT_TRUE(baston(2, c(2, 3)).is_zero());
}

TEST(Baston, QuaternionicNormSquaredN1) {
    // u = x0^2 + x1^2 + x2^2 + x3^2; Omega_2 coefficient equals the 4-d Laplacian of u
    PolyField u(1);
    for (int m = 0; m < 4; ++m) u += x(1, m) * x(1, m);
    PolyForm du = baston(1, u);
    EXPECT_EQ(top_coefficient(du), c(1, 8));
    EXPECT_EQ(du, baston_d0d1(1, u));
}

TEST(Baston, TableAgreesWithD0D1OnRandomQuadratics) {
    RandomPoly gen(11);
    for (int n = 1; n <= 2; ++n)
        for (int t = 0; t < 50; ++t) {
            PolyField u = gen.real_poly(n, 2, 6);
            EXPECT_EQ(baston(n, u), baston_d0d1(n, u));
        }
}

TEST(MaProduct, ConstantFactorAndSymmetry) {
    RandomPoly gen(3);
    PolyField u = gen.real_poly(2), v = gen.real_poly(2);
    std::vector<PolyField> with_const{u, c(2, 4)};
    EXPECT_TRUE(ma_product(2, with_const).is_zero());
    std::vector<PolyField> uv{u, v}, vu{v, u};
    EXPECT_EQ(ma_product(2, uv), ma_product(2, vu));
    std::vector<PolyField> three{u, v, u};
    EXPECT_THROW(ma_product(2, three), DomainError);
}

TEST(MaProduct, NormSquaredMatchesBruteForceDeltaSum) {
    PolyField u(2);
    for (int m = 0; m < 8; ++m) u += x(2, m) * x(2, m);
    std::vector<PolyField> uu{u, u};
    const PolyField wedge_route = top_coefficient(ma_product(2, uu));
    EXPECT_EQ(wedge_route, delta_sum(2, uu));
    // frozen from the delta-sum route: 2! * Mdet(diag(8, 8)) = 128
    EXPECT_EQ(wedge_route, c(2, 128));
}

TEST(MaProduct, MultilinearOnRandomInputs) {
    RandomPoly gen(5);
    for (int t = 0; t < 10; ++t) {
        PolyField a = gen.real_poly(2), b = gen.real_poly(2), w = gen.real_poly(2);
        ComplexRational s(gen.rational());
        std::vector<PolyField> lhs{s * a + b, w}, ra{a, w}, rb{b, w};
        EXPECT_EQ(ma_product(2, lhs), PolyField::constant(2, s) * ma_product(2, ra) + ma_product(2, rb));
    }
}

TEST(MooreDet, SmallCases) {
    QuaternionMatrix<Rational> one(1);
    one(0, 0) = Quaternion<Rational>(Rational(7, 3), 0, 0, 0);
    EXPECT_EQ(moore_det(one), Rational(7, 3));

    QuaternionMatrix<Rational> id(2);
    id(0, 0) = Quaternion<Rational>::unit(0);
    id(1, 1) = Quaternion<Rational>::unit(0);
    id(0, 1) = Quaternion<Rational>::zero();
    id(1, 0) = Quaternion<Rational>::zero();
    EXPECT_EQ(moore_det(id), 1);

    QuaternionMatrix<Rational> bad(2);
    bad = id;
    bad(0, 1) = Quaternion<Rational>::unit(2);
    EXPECT_THROW(moore_det(bad), DomainError);
}

TEST(MooreDet, TwoByTwoMatchesExplicitFormulaAndEmbedding) {
    RandomPoly gen(21);
    for (int t = 0; t < 40; ++t) {
        QuaternionMatrix<Rational> m(2);
        const Rational a = gen.rational(), b = gen.rational();
        Quaternion<Rational> q(gen.rational(), gen.rational(), gen.rational(), gen.rational());
        m(0, 0) = Quaternion<Rational>(a, 0, 0, 0);
        m(1, 1) = Quaternion<Rational>(b, 0, 0, 0);
        m(0, 1) = q;
        m(1, 0) = q.conj();
        const Rational md = moore_det(m);
        EXPECT_EQ(md, a * b - q.norm2());
        const auto ed = embedding_det(m);
        EXPECT_EQ(ed.im, 0);
        EXPECT_EQ(ed.re, md * md);
    }
}

TEST(MooreDet, ThreeByThreeSquareRelation) {
    RandomPoly gen(4);
    for (int t = 0; t < 10; ++t) {
        QuaternionMatrix<Rational> m(3);
        for (int r = 0; r < 3; ++r) {
            m(r, r) = Quaternion<Rational>(gen.rational(), 0, 0, 0);
            for (int s = r + 1; s < 3; ++s) {
                Quaternion<Rational> q(gen.rational(), gen.rational(), gen.rational(), gen.rational());
                m(r, s) = q;
                m(s, r) = q.conj();
            }
        }
        const Rational md = moore_det(m);
        EXPECT_EQ(embedding_det(m).re, md * md);
    }
}

TEST(QuaternionicHessian, NormSquaredIsScalar) {
    PolyField u(2);
    for (int m = 0; m < 8; ++m) u += x(2, m) * x(2, m);
    auto h = quaternionic_hessian(2, u);
    EXPECT_TRUE(h.is_hyperhermitian());
    EXPECT_EQ(h(0, 0).c[0], c(2, 8));
    EXPECT_TRUE(h(0, 1).c[0].is_zero());
    EXPECT_EQ(moore_det(h), c(2, 64));
}

TEST(Identities, AllExactForBothDimensions) {
    for (int n = 1; n <= 2; ++n)
        for (auto tag : all_identity_tags()) {
            auto r = verify_identity(tag, n, 20, 1234);
            EXPECT_TRUE(r.passed) << to_string(tag) << " n=" << n << " worst=" << r.worst_residual;
            EXPECT_EQ(r.worst_residual, "0");
        }
}

TEST(Identities, KappaIsOne) {
    for (int n = 1; n <= 2; ++n) {
        auto r = verify_identity(IdentityTag::MooreCorrespondence, n, 10, 99);
        EXPECT_EQ(r.kappa, "1");
    }
}

TEST(Identities, CorruptedOperatorIsDetected) {
    IdentityOptions bad;
    bad.corrupt_operator = true;
    EXPECT_FALSE(verify_identity(IdentityTag::Leibniz, 2, 20, 1, bad).passed);
    EXPECT_FALSE(verify_identity(IdentityTag::DSquared, 2, 20, 1, bad).passed);
}

TEST(Identities, UnknownTag) { EXPECT_THROW(parse_identity_tag("bogus"), DomainError); }

TEST(Identities, JsonRecordShape) {
    auto j = verify_identity(IdentityTag::Leibniz, 1, 3, 5).to_json();
    EXPECT_EQ(j["tag"], "leibniz");
    EXPECT_EQ(j["status"], "pass");
    EXPECT_EQ(j["worst_residual"], "0");
}
