#include "helpers.hpp"

#include <random>
#include <set>

#include "locperiod/padic.hpp"

using namespace locperiod;
using namespace locperiod::padic;
using testutil::rat;

namespace {

Mat2 random_invertible(std::mt19937_64& rng) {
    std::uniform_int_distribution<long> num(-20, 20);
    const long dens[4] = {1, 2, 3, 5};
    std::uniform_int_distribution<int> den(0, 3);
    for (;;) {
        Mat2 g(Rat(num(rng), dens[den(rng)]), Rat(num(rng), dens[den(rng)]),
               Rat(num(rng), dens[den(rng)]), Rat(num(rng), dens[den(rng)]));
        if (g.det() != 0) return g;
    }
}

} // namespace

TEST_CASE("valuations and p-adic absolute value") {
    CHECK(valuation(Rat(12), 2) == 2);
    CHECK(valuation(rat(1, 6), 3) == -1);
    CHECK(valuation(rat(-45, 8), 2) == -3);
    CHECK(valuation(Rat(0), 7) == VAL_INFTY);
    CHECK(p_abs(rat(1, 4), 2) == Rat(4));
    CHECK(p_abs(Rat(0), 2) == Rat(0));

    CHECK(rat_mod(rat(7, 3), 2, 3) == 5);  // 3^{-1} = 3 mod 8, 21 = 5 mod 8
    CHECK_THROWS_AS(rat_mod(rat(1, 2), 2, 3), NotIntegral);

    CHECK_THROWS_AS(LocalField(4), InvariantViolation);
    CHECK_THROWS_AS(LocalField(1), InvariantViolation);
}

TEST_CASE("iwasawa decomposition remultiplies exactly") {
    std::mt19937_64 rng(20260815);
    for (long p : {2L, 3L, 5L}) {
        for (int trial = 0; trial < 60; ++trial) {
            Mat2 g = random_invertible(rng);
            Iwasawa iw = iwasawa(g, p);
            CHECK(iw.remultiplied() == g);
            CHECK(in_K(iw.k, p));
            CHECK(iw.y != 0);
        }
    }

    // Tie v(c) = v(d) stays on the unpivoted branch: k is lower triangular.
    Mat2 tie(Rat(1), Rat(0), Rat(3), Rat(5));
    Iwasawa iw = iwasawa(tie, 2);
    CHECK(iw.k.b == 0);
    CHECK(iw.remultiplied() == tie);

    // v(c) < v(d) pivots through w.
    Mat2 piv(Rat(1), Rat(0), Rat(1), Rat(4));
    Iwasawa iw2 = iwasawa(piv, 2);
    CHECK(iw2.k.b != 0);
    CHECK(iw2.remultiplied() == piv);

    CHECK_THROWS_AS(iwasawa(Mat2(Rat(1), Rat(2), Rat(2), Rat(4)), 2), SingularMatrix);
}

TEST_CASE("hecke coset representatives") {
    for (long p : {2L, 3L, 5L}) {
        LocalField F(p);
        auto reps = hecke_cosets(F);
        REQUIRE(reps.size() == static_cast<std::size_t>(p) + 1);
        for (const auto& g : reps) {
            CHECK(cartan_gap(g, p) == 1);
            CHECK(valuation(g.det(), p) == 1);
        }
        // Pairwise distinct right cosets g K.
        for (std::size_t i = 0; i < reps.size(); ++i)
            for (std::size_t j = i + 1; j < reps.size(); ++j)
                CHECK_FALSE(in_K(reps[i].inverse() * reps[j], p));
    }
}

TEST_CASE("iwahori coset representatives cover P1(F_p)") {
    for (long p : {2L, 3L, 5L}) {
        LocalField F(p);
        auto reps = iwahori_reps(F);
        REQUIRE(reps.size() == static_cast<std::size_t>(p) + 1);
        for (const auto& g : reps) CHECK(in_K(g, p));
        // Distinct cosets K_0 g.
        for (std::size_t i = 0; i < reps.size(); ++i)
            for (std::size_t j = i + 1; j < reps.size(); ++j)
                CHECK_FALSE(in_K0(reps[i] * reps[j].inverse(), p));
        // Their bottom rows exhaust P^1 over the residue field.
        P1Grid grid(F, 1);
        std::set<long> seen;
        for (const auto& g : reps) seen.insert(grid.index_of_k(g));
        CHECK(seen.size() == static_cast<std::size_t>(grid.size()));
    }
}

TEST_CASE("shell volumes match the Hermite-form census") {
    // Left cosets K\{integral, det = p^r, primitive} are classified by
    // Hermite forms [[p^i, b],[0, p^{r-i}]], b mod p^{r-i}; counting the
    // primitive ones is an independent census of K a(p^r) K / K.
    for (long p : {2L, 3L, 5L}) {
        LocalField F(p);
        CHECK(cartan_shell_volume(F, 0) == 1);
        for (long r = 1; r <= 4; ++r) {
            long count = 0;
            for (long i = 0; i <= r; ++i) {
                long dpow = 1;
                for (long t = 0; t < r - i; ++t) dpow *= p;
                for (long b = 0; b < dpow; ++b) {
                    bool all_div = (i >= 1) && (r - i >= 1) && (b % p == 0);
                    if (!all_div) ++count;
                }
            }
            CHECK(cartan_shell_volume(F, r) == count);
        }
    }
    CHECK(cartan_shell_volume(LocalField(3), 2) == 12);
}

TEST_CASE("cartan invariant is bi-K-invariant") {
    std::mt19937_64 rng(777);
    for (long p : {2L, 3L}) {
        LocalField F(p);
        auto reps = iwahori_reps(F);
        P1Grid grid(F, 2);
        for (long r = 0; r <= 3; ++r) {
            Mat2 ar = Mat2::a_diag(num::pow_rat(Rat(p), r));
            for (const auto& k1 : reps)
                for (long idx = 0; idx < grid.size(); idx += 3) {
                    Mat2 k2 = grid.lift(idx);
                    CHECK(cartan_gap(k1 * ar * k2, p) == r);
                }
        }
    }
    // Central scaling is invisible.
    CHECK(cartan_gap(Mat2::scalar(rat(1, 9)) * Mat2::a_diag(Rat(27)), 3) == 3);
}

TEST_CASE("projective grid over O/p^m") {
    for (long p : {2L, 3L, 5L}) {
        LocalField F(p);
        for (int m : {1, 2}) {
            P1Grid grid(F, m);
            long pm = 1;
            for (int i = 0; i < m; ++i) pm *= p;
            CHECK(grid.size() == pm + pm / p);

            // Brute census: all primitive rows mod p^m, up to unit scaling.
            std::set<long> classes;
            for (long c = 0; c < pm; ++c)
                for (long d = 0; d < pm; ++d) {
                    if (c % p == 0 && d % p == 0) continue;
                    classes.insert(grid.index_of_row(Rat(c), Rat(d)));
                }
            CHECK(classes.size() == static_cast<std::size_t>(grid.size()));

            // Unit scaling fixes the class; lift round-trips.
            for (long idx = 0; idx < grid.size(); ++idx) {
                Mat2 k = grid.lift(idx);
                CHECK(in_K(k, p));
                CHECK(grid.index_of_k(k) == idx);
                for (const Rat& u : unit_reps(F, m))
                    CHECK(grid.index_of_row(u * k.c, u * k.d) == idx);
            }
        }
        // Level zero: the single class.
        P1Grid g0(F, 0);
        CHECK(g0.size() == 1);
        CHECK(g0.index_of_row(Rat(1), Rat(0)) == 0);
    }
    CHECK_THROWS_AS(P1Grid(LocalField(2), 1).index_of_row(Rat(2), Rat(4)), NotIntegral);
}
