#include "helpers.hpp"

#include "locperiod/induced.hpp"

using namespace locperiod;
using locperiod::induced::InducedVector;
using locperiod::induced::atkin_lehner_apply;
using locperiod::induced::atkin_lehner_sign;
using locperiod::induced::hecke_apply;
using locperiod::induced::k0_basis;
using locperiod::num::ApproxScalar;
using locperiod::num::ExactScalar;
using locperiod::num::Rat;
using locperiod::padic::LocalField;
using locperiod::padic::Mat2;
using locperiod::repn::Repn;
using testutil::ex;
using testutil::rat;

namespace {
ExactScalar exq(long an, long ad, long bn, long bd, long q) {
    return ExactScalar(Rat(an, ad), Rat(bn, bd), q);
}
Mat2 a_pow(long p, long r) { return Mat2::a_diag(num::pow_rat(Rat(p), r)); }
} // namespace

TEST_CASE("spherical vector: evaluation against hand-computed points") {
    LocalField F(2);
    auto pi = Repn<ExactScalar>::unramified_from_alpha(F, ex(3, 4));
    auto f = InducedVector<ExactScalar>::new_vector(pi);
    REQUIRE(f.level() == 0);
    REQUIRE(f.scale2() == rat(1));

    CHECK(f.evaluate(Mat2::identity()) == ex(1));
    // f(a(y)) = (alpha / sqrt q)^{v(y)}
    CHECK(f.evaluate(a_pow(2, 2)) == ex(9, 32));
    CHECK(f.evaluate(a_pow(2, -1)) == exq(0, 1, 4, 3, 2)); // sqrt2 * 4/3
    // K-invariance at sample points
    CHECK(f.evaluate(Mat2(rat(1), rat(0), rat(2), rat(1))) == ex(1));
    CHECK(f.evaluate(Mat2(rat(0), rat(1), rat(-1), rat(0))) == ex(1));
    // upper unipotent and center are invisible
    CHECK(f.evaluate(Mat2(rat(1), rat(7, 3), rat(0), rat(1))) == ex(1));
    CHECK(f.evaluate(Mat2::scalar(rat(3, 7)) * a_pow(2, 1)) == exq(0, 1, 3, 8, 2));
}

TEST_CASE("spherical vector is the exact Hecke eigenvector") {
    // unitary principal series, complementary series, and an override point
    struct Case { long q; Rat alpha; bool ovr; };
    for (const Case& c : {Case{2, rat(1), false}, Case{2, rat(3, 4), false},
                          Case{3, rat(3, 2), false}, Case{2, rat(2), true}}) {
        LocalField F(c.q);
        auto pi = Repn<ExactScalar>::unramified_from_alpha(F, ExactScalar(c.alpha), c.ovr);
        auto f = InducedVector<ExactScalar>::new_vector(pi);
        auto Tf = hecke_apply(f);
        REQUIRE(Tf.level() == 0);
        CHECK(Tf == pi.hecke_eigenvalue() * f);
    }
}

TEST_CASE("eigenvalue-only vectors refuse pointwise work but keep expansions") {
    LocalField F(2);
    auto pi = Repn<ExactScalar>::unramified_from_lambda(F, ex(1));
    auto f = InducedVector<ExactScalar>::new_vector(pi);
    REQUIRE(f.has_values());
    CHECK_THROWS_AS(f.evaluate(a_pow(2, 1)), UnsupportedOperation);
    CHECK_THROWS_AS(hecke_apply(f), UnsupportedOperation);

    auto raised = f.translate(Mat2(rat(1), rat(0), rat(0), rat(2)));
    REQUIRE(!raised.has_values());
    REQUIRE(raised.has_combo());
    REQUIRE(raised.combo().size() == 1);
    CHECK(raised.combo()[0].first == ex(1));
    CHECK(raised.combo()[0].second == 1);
    CHECK_THROWS_AS(raised.translate(Mat2(rat(1), rat(1), rat(0), rat(2))),
                    UnsupportedOperation);
}

TEST_CASE("torus translates track the shift convention") {
    LocalField F(2);
    auto pi = Repn<ExactScalar>::unramified_from_alpha(F, ex(3, 4));
    auto f = InducedVector<ExactScalar>::new_vector(pi);

    auto lower = f.translate(a_pow(2, 1)); // diag(p, 1): shift -1
    REQUIRE(lower.level() == 1);
    REQUIRE(lower.combo().size() == 1);
    CHECK(lower.combo()[0].second == -1);
    CHECK(lower.evaluate(Mat2::identity()) == exq(0, 1, 3, 8, 2)); // alpha/sqrt2

    auto raised = f.translate(Mat2(rat(1), rat(0), rat(0), rat(2))); // shift +1
    REQUIRE(raised.level() == 1);
    CHECK(raised.combo()[0].second == 1);
    CHECK(raised.evaluate(Mat2::identity()) == exq(0, 1, 4, 3, 2)); // sqrt2/alpha

    // unit-diagonal torus elements leave the new vector alone
    CHECK(f.translate(Mat2(rat(3), rat(0), rat(0), rat(5))) == f);
    // central elements always act trivially
    CHECK(f.translate(Mat2::scalar(rat(3, 7))) == f);
}

TEST_CASE("Steinberg new vector: cell values, kernel condition, invariance") {
    for (int chi : {1, -1}) {
        for (long q : {2L, 3L, 5L}) {
            LocalField F(q);
            auto pi = Repn<ExactScalar>::steinberg(F, chi);
            auto f = InducedVector<ExactScalar>::new_vector(pi);
            REQUIRE(f.level() == 1);
            REQUIRE(static_cast<long>(f.values().size()) == q + 1);
            CHECK(f.values()[0] == ex(1));
            for (std::size_t i = 1; i < f.values().size(); ++i)
                CHECK(f.values()[i] == ex(-1, q));
            CHECK(num::is_zero(f.k_average()));

            // Iwahori invariance, and a genuine move under the Weyl element
            CHECK(f.translate(Mat2(rat(1), rat(0), rat(q), rat(1))) == f);
            CHECK(f.translate(Mat2(rat(1), rat(1), rat(0), rat(1))) == f);
            CHECK_FALSE(f.translate(Mat2(rat(0), rat(1), rat(-1), rat(0))) == f);

            // torus values (chi/q)^r, including negative r
            for (long r = -3; r <= 5; ++r)
                CHECK(f.evaluate(a_pow(q, r)) ==
                      ExactScalar(num::pow_rat(Rat(chi, q), r)));
        }
    }
}

TEST_CASE("involution acts on the Steinberg new line by minus the twist sign") {
    for (int chi : {1, -1}) {
        for (long q : {2L, 3L}) {
            LocalField F(q);
            auto pi = Repn<ExactScalar>::steinberg(F, chi);
            CHECK(atkin_lehner_sign(pi) == -chi);

            auto f = InducedVector<ExactScalar>::new_vector(pi);
            CHECK(atkin_lehner_apply(atkin_lehner_apply(f)) == f);
        }
    }
    LocalField F(2);
    auto pi = Repn<ExactScalar>::unramified_from_alpha(F, ex(1));
    CHECK_THROWS_AS(atkin_lehner_sign(pi), UnsupportedOperation);
    // the involution squares to a central element on every vector
    auto f = InducedVector<ExactScalar>::new_vector(pi);
    CHECK(atkin_lehner_apply(atkin_lehner_apply(f)) == f);
    CHECK_FALSE(atkin_lehner_apply(f) == f);
}

TEST_CASE("level-raise overlap basis: frozen values and square-scales") {
    LocalField F(2);
    auto pi = Repn<ExactScalar>::unramified_from_alpha(F, ex(1)); // lambda = 2
    auto [f, g] = k0_basis(pi);
    REQUIRE(f.level() == 0);
    REQUIRE(g.level() == 1);
    // kappa = 2 sqrt2 / 3, values of f^raise: (sqrt2, 1/sqrt2, 1/sqrt2)
    CHECK(g.values()[0] == exq(0, 1, 1, 3, 2));
    CHECK(g.values()[1] == exq(0, 1, -1, 6, 2));
    CHECK(g.values()[2] == exq(0, 1, -1, 6, 2));
    CHECK(g.scale2() == rat(9));
    REQUIRE(g.combo().size() == 2);
    CHECK(g.combo()[0].first == exq(0, 1, -2, 3, 2)); // -kappa at shift 0
    CHECK(g.combo()[0].second == 0);
    CHECK(g.combo()[1].first == ex(1));
    CHECK(g.combo()[1].second == 1);

    auto pi34 = Repn<ExactScalar>::unramified_from_alpha(F, ex(3, 4));
    auto [f2, g2] = k0_basis(pi34);
    CHECK(g2.scale2() == rat(648, 23));

    // lambda-only route carries the same expansion without values
    auto pil = Repn<ExactScalar>::unramified_from_lambda(F, ex(2));
    auto [f3, g3] = k0_basis(pil);
    CHECK(!g3.has_values());
    CHECK(g3.scale2() == rat(9));
    REQUIRE(g3.combo().size() == 2);
    CHECK(g3.combo()[0].first == exq(0, 1, -2, 3, 2));
    CHECK(g3.combo()[1].second == 1);

    // outside the unitary set the completion degenerates
    auto piovr = Repn<ExactScalar>::unramified_from_alpha(F, ex(2), true);
    CHECK_THROWS_AS(k0_basis(piovr), InvariantViolation);
    auto pist = Repn<ExactScalar>::steinberg(F, 1);
    CHECK_THROWS_AS(k0_basis(pist), UnsupportedOperation);
}

TEST_CASE("translate levels shrink back when invariance allows") {
    LocalField F(3);
    auto pi = Repn<ExactScalar>::steinberg(F, -1);
    auto f = InducedVector<ExactScalar>::new_vector(pi);
    auto t = atkin_lehner_apply(f); // guaranteed level 2, true level 1
    CHECK(t.level() == 1);
    CHECK(f.at_level(2) == f);

    LocalField F2(2);
    auto pi2 = Repn<ExactScalar>::unramified_from_alpha(F2, ex(3, 4));
    auto f2 = InducedVector<ExactScalar>::new_vector(pi2);
    CHECK(f2.translate(Mat2::identity()).level() == 0);
    auto round = f2.translate(a_pow(2, 1)).translate(a_pow(2, -1));
    CHECK(round == f2);
    CHECK(round.combo()[0].second == 0);
}

TEST_CASE("approximate backend reproduces the Hecke eigenvector numerically") {
    LocalField F(5);
    // alpha = exp(2 pi i / 8) on the unit circle
    auto [c, s] = num::BigFloat::cis(rat(1, 8));
    ApproxScalar alpha{c, s, 1e-35};
    auto pi = Repn<ApproxScalar>::unramified_from_alpha(F, alpha);
    auto f = InducedVector<ApproxScalar>::new_vector(pi);
    auto Tf = hecke_apply(f);
    auto lf = (pi.hecke_eigenvalue() * f).at_level(Tf.level());
    REQUIRE(Tf.level() >= 0);
    REQUIRE(Tf.values().size() == lf.values().size());
    for (std::size_t i = 0; i < Tf.values().size(); ++i)
        CHECK(testutil::residual(Tf.values()[i], lf.values()[i]) < 1e-25);
}
