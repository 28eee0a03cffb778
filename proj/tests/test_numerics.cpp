#include "helpers.hpp"

#include <random>

using namespace locperiod;
using namespace locperiod::num;
using testutil::ex;
using testutil::rat;

TEST_CASE("decimal strings parse exactly") {
    CHECK(parse_decimal_rational("1.25") == rat(5, 4));
    CHECK(parse_decimal_rational("-3e-2") == rat(-3, 100));
    CHECK(parse_decimal_rational("2.5e3") == rat(2500));
    CHECK(parse_decimal_rational("+0.000") == rat(0));
    CHECK(parse_decimal_rational("0031") == rat(31));
    CHECK(parse_decimal_rational("9.806650") == rat(980665, 100000));

    for (const char* bad : {"", ".", "1.", "--1", "1e", "nan", "inf", "1/2", "0x10", "1.2.3", "1 "}) {
        CHECK_THROWS_AS(parse_decimal_rational(bad), SchemaViolation);
    }
}

TEST_CASE("quadratic ring arithmetic") {
    ExactScalar s2 = ExactScalar::sqrt_of(2);
    ExactScalar x = ex(1) + ex(2) * s2;   // 1 + 2*sqrt(2)
    ExactScalar y = ex(3) - s2;           // 3 - sqrt(2)
    ExactScalar p = x * y;
    CHECK(p == ExactScalar(rat(-1), rat(5), 2));

    // Division is exact and inverts multiplication.
    CHECK(p / y == x);
    CHECK((x / y) * y == x);

    // Rational collapse: (1+s2)(1-s2) = -1 with no radical part.
    ExactScalar c = (ex(1) + s2) * (ex(1) - s2);
    CHECK(c.is_rational());
    CHECK(c == ex(-1));

    CHECK(galois_flip(x) == ExactScalar(rat(1), rat(-2), 2));
    CHECK(pow_int(s2, -2) == ex(1, 2));
    CHECK(pow_int(s2, 3) == ExactScalar(rat(0), rat(2), 2));

    ExactScalar s3 = ExactScalar::sqrt_of(3);
    CHECK_THROWS_AS(s2 + s3, MixedRadicand);
    CHECK_THROWS_AS(ex(1) / ex(0), DivisionByZero);
}

TEST_CASE("sqrt(q) against an interval-bisection oracle") {
    // Independent oracle: bisect x^2 = q over the rationals, then demand the
    // library value lands inside the bracket.
    for (long q : {2L, 3L, 5L}) {
        Rat lo(1), hi(q);
        for (int it = 0; it < 90; ++it) {
            Rat mid = (lo + hi) / 2;
            if (mid * mid <= q) lo = mid; else hi = mid;
        }
        ApproxScalar s = to_approx(ExactScalar::sqrt_of(q));
        BigFloat blo{lo}, bhi{hi};
        CHECK((blo < s.re || blo == s.re));
        CHECK((s.re < bhi || s.re == bhi));
        CHECK(s.err < 1e-30);
    }
}

TEST_CASE("cyclotomic scalars") {
    // zeta_4^2 = -1 (order 4 over q = 2).
    CycScalar z4 = CycScalar::root_of_unity(2, rat(1, 4));
    CHECK(z4 * z4 == CycScalar(rat(-1)));
    CHECK_FALSE(z4.is_scalar());

    // 1 + zeta_3 + zeta_3^2 = 0.
    CycScalar z3 = CycScalar::root_of_unity(3, rat(1, 3));
    CycScalar sum = CycScalar(rat(1)) + z3 + z3 * z3;
    CHECK(num::is_zero(sum));

    // zeta * conj(zeta) = 1 and conj is the inverse root.
    CycScalar z9 = CycScalar::root_of_unity(3, rat(2, 9));
    CHECK(z9 * conj(z9) == CycScalar(rat(1)));

    // zeta_4 + zeta_4^{-1} = 0 collapses to a scalar.
    CycScalar tr = z4 + conj(z4);
    CHECK(tr.is_scalar());
    CHECK(tr.scalar_part().is_zero());

    // Denominators that are not q-powers are rejected.
    CHECK_THROWS_AS(CycScalar::root_of_unity(2, rat(1, 6)), IrrationalResult);

    // e^{2 pi i/8} has real part sqrt(2)/2: numeric embedding agrees with the
    // quadratic-ring embedding.
    CycScalar z8 = CycScalar::root_of_unity(2, rat(1, 8));
    ApproxScalar emb = to_approx(z8);
    ApproxScalar half_s2 = to_approx(ExactScalar(rat(0), rat(1, 2), 2));
    CHECK(testutil::residual(emb - ApproxScalar(BigFloat(), emb.im, 0.0), half_s2) < 1e-30);

    // Scalar extraction refuses genuinely irrational values.
    CHECK_THROWS_AS(z8.scalar_part(), IrrationalResult);
}

TEST_CASE("approximate scalars track certified error") {
    ApproxScalar third{rat(1, 3)};
    CHECK(third.err > 0);
    ApproxScalar one = third * ApproxScalar(3L);
    CHECK(testutil::close_real(one, 1.0, 1e-35));

    ApproxScalar tiny(BigFloat(), BigFloat(), 1.0);  // 0 +- 1
    CHECK_THROWS_AS(one / tiny, DivisionByZero);

    ApproxScalar z(BigFloat(3L), BigFloat(-4L), 0.0);
    CHECK(z.mag_up() >= 5.0);
    CHECK(z.mag_down() <= 5.0);
    CHECK(conj(z).im.to_double() == 4.0);

    ApproxScalar nine(9L);
    CHECK(testutil::close_real(nine.sqrt_real(), 3.0, 1e-35));
}

TEST_CASE("recurrence tails: exact closed forms") {
    // Geometric: sum_{r>=5} 3^{-r} = 1/162.
    {
        std::vector<ExactScalar> a{ex(1, 3)};
        std::vector<ExactScalar> head{ex(1, 243)};
        CHECK(recurrence_tail(a, head) == ex(1, 162));
    }
    // Two roots 1/2, 1/3: u_r = 2^{-r} + 3^{-r}, tail from R=3 is 11/36.
    {
        std::vector<ExactScalar> a{ex(-1, 6), ex(5, 6)};
        std::vector<ExactScalar> head{ex(1, 8) + ex(1, 27), ex(1, 16) + ex(1, 81)};
        CHECK(recurrence_tail(a, head) == ex(11, 36));
    }
    // Divergent data evaluates the rational continuation: sum_{r>=1} 2^r -> -2.
    {
        std::vector<ExactScalar> a{ex(2)};
        std::vector<ExactScalar> head{ex(2)};
        CHECK(recurrence_tail(a, head) == ex(-2));
    }
    // A unit root is a genuine pole.
    {
        std::vector<ExactScalar> a{ex(1)};
        std::vector<ExactScalar> head{ex(1)};
        CHECK_THROWS_AS(recurrence_tail(a, head), NonconvergentIntegral);
    }
}

TEST_CASE("recurrence tails agree with brute partial sums (approx)") {
    // u_r = (0.4 e^{i 0.7})^r + (0.3 e^{-i 1.1})^r summed from R = 4.
    auto root = [](double m, double th) {
        return ApproxScalar(BigFloat(m * std::cos(th)), BigFloat(m * std::sin(th)), 0.0);
    };
    ApproxScalar r1 = root(0.4, 0.7), r2 = root(0.3, -1.1);
    ApproxScalar a1 = r1 + r2;          // sum
    ApproxScalar a0 = -(r1 * r2);       // -product
    auto u = [&](long r) { return pow_int(r1, r) + pow_int(r2, r); };
    std::vector<ApproxScalar> a{a0, a1};
    std::vector<ApproxScalar> head{u(4), u(5)};
    ApproxScalar tail = recurrence_tail(a, head);
    ApproxScalar brute;
    for (long r = 4; r < 220; ++r) brute += u(r);
    CHECK(testutil::residual(tail, brute) < 1e-30);
}

TEST_CASE("polynomial-geometric tails") {
    // Telescoping oracle: T(S) - T(S+1) = S^d x^S exactly, for each degree.
    ExactScalar x = ex(2, 5);
    for (int d = 0; d <= 4; ++d) {
        for (long s0 = 0; s0 <= 5; ++s0) {
            ExactScalar lhs = power_tail(d, s0, x) - power_tail(d, s0 + 1, x);
            ExactScalar rhs = ExactScalar(pow_rat(rat(s0), d)) * pow_int(x, s0);
            CHECK(lhs == rhs);
        }
    }
    // Spot value: sum_{s>=3} (1/2)^s = 1/4.
    CHECK(power_tail(0, 3, ex(1, 2)) == ex(1, 4));

    // Certified double bound dominates brute sums of (r+1)^d x^r.
    for (int d = 0; d <= 4; ++d) {
        double x2 = 0.61, brute = 0.0;
        for (long r = 8; r < 600; ++r) brute += std::pow(r + 1.0, d) * std::pow(x2, double(r));
        CHECK(power_tail_bound(d, 7, x2) >= brute);
        CHECK(power_tail_bound(d, 7, x2) < brute * 1.001);
    }
    CHECK(power_tail_bound(2, 10, 0.0) == 0.0);
    CHECK_THROWS_AS(power_tail_bound(1, 5, 1.0), TailBoundUnavailable);
}

TEST_CASE("precision control") {
    CHECK_THROWS_AS(set_precision_bits(40), PrecisionUnderflow);
    long saved = precision_bits();
    set_precision_bits(256);
    CHECK(BigFloat::prec() == 256);
    ApproxScalar third{rat(1, 3)};
    CHECK(third.err < 1e-70);
    set_precision_bits(saved);

    auto [c, s] = BigFloat::cis(rat(1, 8));
    ApproxScalar c2(c * c, BigFloat(), 0.0);
    CHECK(testutil::close_real(c2, 0.5, 1e-30));
}
