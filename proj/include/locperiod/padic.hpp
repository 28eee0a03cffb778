#pragma once

#include <array>
#include <limits>
#include <string>
#include <vector>

#include "numerics.hpp"

namespace locperiod::padic {

using num::Int;
using num::Rat;

constexpr long VAL_INFTY = std::numeric_limits<long>::max() / 4;

/// The base field is described by its residue characteristic only; all
/// matrix entries live in Q and the uniformizer is the prime itself.
struct LocalField {
    long p;

    explicit LocalField(long prime) : p(prime) {
        if (p < 2) throw InvariantViolation("residue characteristic must be >= 2");
        for (long d = 2; d * d <= p; ++d)
            if (p % d == 0) throw InvariantViolation("residue characteristic must be prime");
    }

    long q() const { return p; }
    Rat uniformizer() const { return Rat(p); }
};

inline long valuation(const Int& n, long p) {
    if (n == 0) return VAL_INFTY;
    mpz_t r;
    mpz_init(r);
    long v = static_cast<long>(mpz_remove(r, n.backend().data(), Int(p).backend().data()));
    mpz_clear(r);
    return v;
}

inline long valuation(const Rat& x, long p) {
    if (x == 0) return VAL_INFTY;
    return valuation(num::numer(x), p) - valuation(num::denom(x), p);
}

/// |x|_p as an exact rational: p^{-v(x)}.
inline Rat p_abs(const Rat& x, long p) {
    if (x == 0) return Rat(0);
    return num::pow_rat(Rat(p), -valuation(x, p));
}

/// x mod p^m as an integer in [0, p^m); x must be a p-adic integer
/// (denominator prime to p).
inline Int rat_mod(const Rat& x, long p, int m) {
    Int M = boost::multiprecision::pow(Int(p), static_cast<unsigned>(m));
    Int den = num::denom(x);
    if (den % p == 0) throw NotIntegral("rat_mod of a non-integral value");
    Int dinv;
    mpz_t inv;
    mpz_init(inv);
    if (mpz_invert(inv, den.backend().data(), M.backend().data()) == 0) {
        mpz_clear(inv);
        throw NotIntegral("denominator not invertible at p");
    }
    dinv = Int(inv);
    mpz_clear(inv);
    Int r = (num::numer(x) % M) * dinv % M;
    if (r < 0) r += M;
    return r;
}

// ---------------------------------------------------------------------------
// Exact 2x2 matrices over Q.
// ---------------------------------------------------------------------------

struct Mat2 {
    Rat a{1}, b{0}, c{0}, d{1};

    Mat2() = default;
    Mat2(Rat aa, Rat bb, Rat cc, Rat dd)
        : a(std::move(aa)), b(std::move(bb)), c(std::move(cc)), d(std::move(dd)) {}

    static Mat2 identity() { return {}; }
    /// Upper unipotent n(x).
    static Mat2 n(const Rat& x) { return {Rat(1), x, Rat(0), Rat(1)}; }
    /// Torus a(y) = diag(y, 1).
    static Mat2 a_diag(const Rat& y) { return {y, Rat(0), Rat(0), Rat(1)}; }
    static Mat2 diag(const Rat& u, const Rat& v) { return {u, Rat(0), Rat(0), v}; }
    /// The Weyl element w = [[0,1],[-1,0]].
    static Mat2 w() { return {Rat(0), Rat(1), Rat(-1), Rat(0)}; }
    static Mat2 scalar(const Rat& z) { return {z, Rat(0), Rat(0), z}; }

    Rat det() const { return a * d - b * c; }

    friend Mat2 operator*(const Mat2& x, const Mat2& y) {
        return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d,
                x.c * y.a + x.d * y.c, x.c * y.b + x.d * y.d};
    }

    Mat2 inverse() const {
        Rat dt = det();
        if (dt == 0) throw SingularMatrix("Mat2::inverse");
        return {d / dt, -b / dt, -c / dt, a / dt};
    }

    friend bool operator==(const Mat2& x, const Mat2& y) {
        return x.a == y.a && x.b == y.b && x.c == y.c && x.d == y.d;
    }

    std::string str() const {
        return "[[" + num::format_rat(a) + ", " + num::format_rat(b) + "], [" +
               num::format_rat(c) + ", " + num::format_rat(d) + "]]";
    }
};

inline long min_entry_val(const Mat2& g, long p) {
    return std::min(std::min(valuation(g.a, p), valuation(g.b, p)),
                    std::min(valuation(g.c, p), valuation(g.d, p)));
}

inline bool in_K(const Mat2& g, long p) {
    return min_entry_val(g, p) >= 0 && valuation(g.det(), p) == 0;
}

/// Iwahori subgroup K_0(p): integral, unit determinant, c = 0 mod p.
inline bool in_K0(const Mat2& g, long p) {
    return in_K(g, p) && valuation(g.c, p) >= 1;
}

/// Principal congruence subgroup 1 + p^m M_2(O).
inline bool in_congruence(const Mat2& g, long p, int m) {
    return in_K(g, p) && valuation(g.a - 1, p) >= m && valuation(g.d - 1, p) >= m &&
           valuation(g.b, p) >= m && valuation(g.c, p) >= m;
}

/// Distance between the two elementary-divisor valuations; r for the
/// double coset K a(p^r) K (projectively).  Always >= 0.
inline long cartan_gap(const Mat2& g, long p) {
    if (g.det() == 0) throw SingularMatrix("cartan_gap");
    long vmin = min_entry_val(g, p);
    return valuation(g.det(), p) - 2 * vmin;
}

// ---------------------------------------------------------------------------
// Iwasawa decomposition g = z(z) n(x) a(y) k, pivoting through w exactly
// when v(c) < v(d).
// ---------------------------------------------------------------------------

struct Iwasawa {
    Rat z;   // central part
    Rat x;   // unipotent coordinate
    Rat y;   // torus coordinate
    Mat2 k;  // maximal compact part

    Mat2 remultiplied() const {
        return Mat2::scalar(z) * Mat2::n(x) * Mat2::a_diag(y) * k;
    }
};

inline Iwasawa iwasawa(const Mat2& g, long p) {
    if (g.det() == 0) throw SingularMatrix("iwasawa");
    long vc = valuation(g.c, p), vd = valuation(g.d, p);
    Iwasawa r;
    if (vc >= vd) {
        // No pivot: ties break to this branch.
        Rat t = g.c / g.d;
        r.z = g.d;
        r.x = g.b / g.d;
        r.y = (g.a - g.b * t) / g.d;
        r.k = Mat2(Rat(1), Rat(0), t, Rat(1));
    } else {
        Rat t = -g.d / g.c;
        r.z = -g.c;
        r.x = g.a / g.c;
        r.y = g.det() / (g.c * g.c);
        r.k = Mat2(Rat(1), Rat(0), t, Rat(1)) * Mat2::w();
    }
    return r;
}

// ---------------------------------------------------------------------------
// Coset data.
// ---------------------------------------------------------------------------

/// Right-coset representatives for K \ K a(p) K: the p matrices
/// [[p, b],[0, 1]] and the single [[1, 0],[0, p]].
inline std::vector<Mat2> hecke_cosets(const LocalField& F) {
    std::vector<Mat2> reps;
    reps.reserve(static_cast<std::size_t>(F.p) + 1);
    for (long b = 0; b < F.p; ++b)
        reps.push_back(Mat2(Rat(F.p), Rat(b), Rat(0), Rat(1)));
    reps.push_back(Mat2::diag(Rat(1), Rat(F.p)));
    return reps;
}

/// Representatives of K_0(p) \ K: identity plus w n(b), b mod p.
/// Their inverses represent K / K_0(p).
inline std::vector<Mat2> iwahori_reps(const LocalField& F) {
    std::vector<Mat2> reps;
    reps.reserve(static_cast<std::size_t>(F.p) + 1);
    reps.push_back(Mat2::identity());
    for (long b = 0; b < F.p; ++b)
        reps.push_back(Mat2::w() * Mat2::n(Rat(b)));
    return reps;
}

/// Number of right K-cosets in K a(p^r) K (the shell measure with
/// vol(K) = 1): 1, then (p+1) p^{r-1}.
inline Int cartan_shell_volume(const LocalField& F, long r) {
    if (r < 0) throw InvariantViolation("cartan_shell_volume: negative radius");
    if (r == 0) return Int(1);
    return Int(F.p + 1) * boost::multiprecision::pow(Int(F.p), static_cast<unsigned>(r - 1));
}

/// Unit representatives mod p^m (all of O^x / (1 + p^m O); for m = 0 the
/// single class 1).
inline std::vector<Rat> unit_reps(const LocalField& F, int m) {
    if (m <= 0) return {Rat(1)};
    long pm = 1;
    for (int i = 0; i < m; ++i) pm *= F.p;
    std::vector<Rat> us;
    for (long u = 1; u < pm; ++u)
        if (u % F.p != 0) us.push_back(Rat(u));
    return us;
}

// ---------------------------------------------------------------------------
// P^1(O/p^m): primitive bottom rows up to unit scaling, in two charts.
// Indices [0, p^m) are the points (t : 1); indices p^m + t' enumerate
// (1 : p t') for t' in [0, p^{m-1}).
// ---------------------------------------------------------------------------

struct P1Grid {
    long p;
    int m;
    long pm;  // p^m

    P1Grid(const LocalField& F, int level) : p(F.p), m(level) {
        if (m < 0) throw InvariantViolation("P1Grid: negative level");
        pm = 1;
        for (int i = 0; i < m; ++i) pm *= p;
    }

    long size() const { return m == 0 ? 1 : pm + pm / p; }

    /// Class of a row (c, d) with min(v(c), v(d)) = 0.
    long index_of_row(const Rat& c, const Rat& d) const {
        if (m == 0) return 0;
        long vc = valuation(c, p), vd = valuation(d, p);
        if (std::min(vc, vd) != 0) throw NotIntegral("P1Grid: row is not primitive");
        if (vd == 0) return rat_mod(c / d, p, m).convert_to<long>();
        Int t = rat_mod(d / c, p, m);
        return pm + (t / p).convert_to<long>();
    }

    long index_of_k(const Mat2& k) const { return index_of_row(k.c, k.d); }

    /// A representative in K whose bottom row lands in the class.
    Mat2 lift(long idx) const {
        if (idx < 0 || idx >= size()) throw InvariantViolation("P1Grid: index out of range");
        if (m == 0) return Mat2::identity();
        if (idx < pm) return Mat2(Rat(1), Rat(0), Rat(idx), Rat(1));
        long t = (idx - pm) * p;
        return Mat2(Rat(0), Rat(-1), Rat(1), Rat(t));
    }
};

} // namespace locperiod::padic
