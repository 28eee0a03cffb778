#pragma once

#include <mpfr.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <boost/multiprecision/gmp.hpp>

#include "errors.hpp"

namespace locperiod::num {

using Int = boost::multiprecision::mpz_int;
using Rat = boost::multiprecision::mpq_rational;

inline Int numer(const Rat& x) { return boost::multiprecision::numerator(x); }
inline Int denom(const Rat& x) { return boost::multiprecision::denominator(x); }

/// x^e for integer e of either sign.
inline Rat pow_rat(const Rat& x, long e) {
    if (e == 0) return Rat(1);
    if (x == 0) {
        if (e < 0) throw DivisionByZero("pow_rat: 0 to a negative power");
        return Rat(0);
    }
    const auto a = static_cast<unsigned long>(e < 0 ? -e : e);
    Rat r(boost::multiprecision::pow(numer(x), a), boost::multiprecision::pow(denom(x), a));
    return e < 0 ? Rat(1) / r : r;
}

/// Exact decimal-string parsing: [-+]ddd[.ddd][eE[-+]ddd].  Anything else
/// (including NaN/Inf spellings) is a SchemaViolation; values round-trip
/// exactly as rationals.
inline Rat parse_decimal_rational(const std::string& s) {
    auto fail = [&] { throw SchemaViolation("not a decimal string: '" + s + "'"); };
    std::size_t i = 0;
    bool neg = false;
    if (i < s.size() && (s[i] == '+' || s[i] == '-')) neg = (s[i++] == '-');
    std::string digits;
    long scale = 0;
    bool any = false;
    while (i < s.size() && s[i] >= '0' && s[i] <= '9') { digits += s[i++]; any = true; }
    if (i < s.size() && s[i] == '.') {
        ++i;
        bool frac = false;
        while (i < s.size() && s[i] >= '0' && s[i] <= '9') {
            digits += s[i++];
            ++scale;
            frac = true;
        }
        if (!frac) fail();
    }
    if (!any) fail();
    long exp10 = 0;
    if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
        ++i;
        bool eneg = false;
        if (i < s.size() && (s[i] == '+' || s[i] == '-')) eneg = (s[i++] == '-');
        if (i >= s.size()) fail();
        long e = 0;
        while (i < s.size() && s[i] >= '0' && s[i] <= '9') {
            e = e * 10 + (s[i++] - '0');
            if (e > 100000) fail();
        }
        exp10 = eneg ? -e : e;
    }
    if (i != s.size()) fail();
    // Leading zeros would trip GMP's base autodetection.
    std::size_t nz = digits.find_first_not_of('0');
    digits = (nz == std::string::npos) ? "0" : digits.substr(nz);
    Rat v(Int(digits.c_str()), 1);
    v *= pow_rat(Rat(10), exp10 - scale);
    return neg ? -v : v;
}

/// Canonical text form of a rational: "n" or "n/d".
inline std::string format_rat(const Rat& x) {
    std::string s = numer(x).str();
    if (denom(x) != 1) s += "/" + denom(x).str();
    return s;
}

// ---------------------------------------------------------------------------
// Working precision for the approximate backend.  Set once per run, before
// any worker threads start; every BigFloat allocates at the current value.
// ---------------------------------------------------------------------------

inline std::atomic<long>& precision_bits_slot() {
    static std::atomic<long> bits{128};
    return bits;
}

inline long precision_bits() { return precision_bits_slot().load(std::memory_order_relaxed); }

inline void set_precision_bits(long bits) {
    if (bits < 53) throw PrecisionUnderflow("working precision below 53 bits");
    if (bits > 16384) throw UnsupportedOperation("working precision above 16384 bits");
    precision_bits_slot().store(bits, std::memory_order_relaxed);
}

/// Outward inflation for double-valued error bounds: keeps accumulated
/// bounds sound under the double rounding of the bookkeeping itself.
inline double inflate(double e) {
    return e * (1.0 + 1e-9) + 1e-290;
}

/// One rounding of a P-bit operation whose result has magnitude <= mag.
inline double round_term(double mag) {
    return inflate(std::ldexp(std::max(mag, 0.0), static_cast<int>(1 - precision_bits())));
}

// ---------------------------------------------------------------------------
// BigFloat: thin RAII wrapper over mpfr_t at the global working precision.
// Deterministic: round-to-nearest everywhere, precision fixed per run.
// ---------------------------------------------------------------------------

class BigFloat {
public:
    BigFloat() { mpfr_init2(v_, prec()); mpfr_set_zero(v_, 1); }
    explicit BigFloat(long n) { mpfr_init2(v_, prec()); mpfr_set_si(v_, n, MPFR_RNDN); }
    explicit BigFloat(double d) { mpfr_init2(v_, prec()); mpfr_set_d(v_, d, MPFR_RNDN); }
    explicit BigFloat(const Rat& r) {
        mpfr_init2(v_, prec());
        mpfr_set_q(v_, r.backend().data(), MPFR_RNDN);
    }
    BigFloat(const BigFloat& o) { mpfr_init2(v_, mpfr_get_prec(o.v_)); mpfr_set(v_, o.v_, MPFR_RNDN); }
    BigFloat(BigFloat&& o) noexcept {
        mpfr_init2(v_, 53);
        mpfr_set_zero(v_, 1);
        mpfr_swap(v_, o.v_);
    }
    BigFloat& operator=(BigFloat o) noexcept { mpfr_swap(v_, o.v_); return *this; }
    ~BigFloat() { mpfr_clear(v_); }

    static long prec() { return precision_bits(); }

    friend BigFloat operator+(const BigFloat& a, const BigFloat& b) {
        BigFloat r; mpfr_add(r.v_, a.v_, b.v_, MPFR_RNDN); return r;
    }
    friend BigFloat operator-(const BigFloat& a, const BigFloat& b) {
        BigFloat r; mpfr_sub(r.v_, a.v_, b.v_, MPFR_RNDN); return r;
    }
    friend BigFloat operator*(const BigFloat& a, const BigFloat& b) {
        BigFloat r; mpfr_mul(r.v_, a.v_, b.v_, MPFR_RNDN); return r;
    }
    friend BigFloat operator/(const BigFloat& a, const BigFloat& b) {
        if (mpfr_zero_p(b.v_)) throw DivisionByZero("BigFloat division by zero");
        BigFloat r; mpfr_div(r.v_, a.v_, b.v_, MPFR_RNDN); return r;
    }
    BigFloat operator-() const { BigFloat r(*this); mpfr_neg(r.v_, r.v_, MPFR_RNDN); return r; }

    BigFloat& operator+=(const BigFloat& o) { mpfr_add(v_, v_, o.v_, MPFR_RNDN); return *this; }
    BigFloat& operator-=(const BigFloat& o) { mpfr_sub(v_, v_, o.v_, MPFR_RNDN); return *this; }
    BigFloat& operator*=(const BigFloat& o) { mpfr_mul(v_, v_, o.v_, MPFR_RNDN); return *this; }

    bool is_zero() const { return mpfr_zero_p(v_) != 0; }
    int sign() const { return mpfr_sgn(v_); }
    friend bool operator==(const BigFloat& a, const BigFloat& b) { return mpfr_cmp(a.v_, b.v_) == 0; }
    friend bool operator<(const BigFloat& a, const BigFloat& b) { return mpfr_cmp(a.v_, b.v_) < 0; }

    BigFloat abs() const { BigFloat r(*this); mpfr_abs(r.v_, r.v_, MPFR_RNDN); return r; }
    BigFloat sqrt() const {
        if (sign() < 0) throw UnsupportedOperation("BigFloat::sqrt of a negative value");
        BigFloat r; mpfr_sqrt(r.v_, v_, MPFR_RNDN); return r;
    }

    double to_double() const { return mpfr_get_d(v_, MPFR_RNDN); }
    double to_double_up() const { return mpfr_get_d(v_, MPFR_RNDU); }
    double to_double_down() const { return mpfr_get_d(v_, MPFR_RNDD); }

    /// cos(2 pi x), sin(2 pi x) as a pair; x rational.
    static std::pair<BigFloat, BigFloat> cis(const Rat& x) {
        BigFloat ang;
        mpfr_const_pi(ang.v_, MPFR_RNDN);
        BigFloat two_pi_x = ang * BigFloat(2L) * BigFloat(x);
        BigFloat c, s;
        mpfr_sin_cos(s.v_, c.v_, two_pi_x.v_, MPFR_RNDN);
        return {c, s};
    }

    std::string str(int digits = 40) const {
        char* out = nullptr;
        mpfr_asprintf(&out, "%.*Re", digits, v_);
        std::string s(out);
        mpfr_free_str(out);
        return s;
    }

private:
    mpfr_t v_;
};

// ---------------------------------------------------------------------------
// ExactScalar: a + b*sqrt(q) with rational a, b.  The radicand q rides along
// (0 when the value is plainly rational); mixing distinct radicands is an
// error rather than a silent tower extension.
// ---------------------------------------------------------------------------

struct ExactScalar {
    Rat a{0};
    Rat b{0};
    long q{0};

    ExactScalar() = default;
    explicit ExactScalar(const Rat& r) : a(r) {}
    explicit ExactScalar(long n) : a(n) {}
    ExactScalar(Rat ra, Rat rb, long rq) : a(std::move(ra)), b(std::move(rb)), q(rq) {
        normalize();
    }

    static ExactScalar sqrt_of(long q) {
        if (q <= 1) throw UnsupportedOperation("sqrt_of wants a radicand > 1");
        return ExactScalar(Rat(0), Rat(1), q);
    }

    void normalize() {
        if (b == 0) q = 0;
        if (b != 0 && q <= 1) throw InvariantViolation("ExactScalar with radical part but no radicand");
    }

    bool is_rational() const { return b == 0; }
    bool is_zero() const { return a == 0 && b == 0; }

    friend long merged_q(const ExactScalar& x, const ExactScalar& y) {
        if (x.q == 0) return y.q;
        if (y.q == 0 || x.q == y.q) return x.q;
        throw MixedRadicand("sqrt(" + std::to_string(x.q) + ") vs sqrt(" + std::to_string(y.q) + ")");
    }

    friend ExactScalar operator+(const ExactScalar& x, const ExactScalar& y) {
        return ExactScalar(x.a + y.a, x.b + y.b, merged_q(x, y));
    }
    friend ExactScalar operator-(const ExactScalar& x, const ExactScalar& y) {
        return ExactScalar(x.a - y.a, x.b - y.b, merged_q(x, y));
    }
    ExactScalar operator-() const { return ExactScalar(-a, -b, q); }
    friend ExactScalar operator*(const ExactScalar& x, const ExactScalar& y) {
        long qq = merged_q(x, y);
        return ExactScalar(x.a * y.a + Rat(qq) * x.b * y.b, x.a * y.b + x.b * y.a, qq);
    }
    friend ExactScalar operator/(const ExactScalar& x, const ExactScalar& y) {
        if (y.is_zero()) throw DivisionByZero("ExactScalar division by zero");
        long qq = merged_q(x, y);
        Rat n = y.a * y.a - Rat(qq) * y.b * y.b;  // nonzero: q squarefree > 1
        ExactScalar ybar(y.a, -y.b, y.q);
        ExactScalar z = x * ybar;
        return ExactScalar(z.a / n, z.b / n, qq);
    }
    ExactScalar& operator+=(const ExactScalar& o) { return *this = *this + o; }
    ExactScalar& operator-=(const ExactScalar& o) { return *this = *this - o; }
    ExactScalar& operator*=(const ExactScalar& o) { return *this = *this * o; }

    friend bool operator==(const ExactScalar& x, const ExactScalar& y) {
        return x.a == y.a && x.b == y.b && (x.b == 0 || x.q == y.q);
    }

    std::string str() const {
        if (is_rational()) return format_rat(a);
        std::string s = format_rat(a) + (b > 0 ? " + " : " - ");
        Rat babs = b > 0 ? b : Rat(-b);
        return s + format_rat(babs) + "*sqrt(" + std::to_string(q) + ")";
    }
};

inline ExactScalar conj(const ExactScalar& x) { return x; }  // all values real
inline bool is_zero(const ExactScalar& x) { return x.is_zero(); }

/// Field conjugate sqrt(q) -> -sqrt(q) (not complex conjugation).
inline ExactScalar galois_flip(const ExactScalar& x) { return ExactScalar(x.a, -x.b, x.q); }

template <class S>
S pow_int(const S& x, long e) {
    if (e < 0) {
        if constexpr (requires(S u, S v) { u / v; })
            return S(Rat(1)) / pow_int(x, -e);
        else
            throw UnsupportedOperation("negative power in a ring without division");
    }
    S r{Rat(1)};
    S base = x;
    for (unsigned long k = static_cast<unsigned long>(e); k; k >>= 1) {
        if (k & 1) r = r * base;
        base = base * base;
    }
    return r;
}

// ---------------------------------------------------------------------------
// ApproxScalar: complex value at working precision plus a certified absolute
// error radius (double, maintained outward).  First-order propagation with a
// rounding term per operation.
// ---------------------------------------------------------------------------

struct ApproxScalar {
    BigFloat re;
    BigFloat im;
    double err{0.0};

    ApproxScalar() = default;
    explicit ApproxScalar(long n) : re(n) {}
    explicit ApproxScalar(const Rat& r) : re(r), err(round_term(std::abs(BigFloat(r).to_double()))) {}
    ApproxScalar(BigFloat r, BigFloat i, double e) : re(std::move(r)), im(std::move(i)), err(e) {}

    /// Upper bound for |value| (not counting err).
    double mag_up() const {
        return inflate(std::abs(re.to_double_up()) + std::abs(im.to_double_up()));
    }
    /// Lower bound for |value|.
    double mag_down() const {
        double m = std::max(std::abs(re.to_double()), std::abs(im.to_double()));
        return std::max(0.0, m * (1.0 - 1e-9) - 1e-290);
    }
    /// Upper bound for |true value|.
    double bound_up() const { return inflate(mag_up() + err); }

    bool is_zero() const { return re.is_zero() && im.is_zero() && err == 0.0; }

    friend ApproxScalar operator+(const ApproxScalar& x, const ApproxScalar& y) {
        ApproxScalar r(x.re + y.re, x.im + y.im, 0.0);
        r.err = inflate(x.err + y.err + round_term(r.mag_up()));
        return r;
    }
    friend ApproxScalar operator-(const ApproxScalar& x, const ApproxScalar& y) {
        ApproxScalar r(x.re - y.re, x.im - y.im, 0.0);
        r.err = inflate(x.err + y.err + round_term(r.mag_up()));
        return r;
    }
    ApproxScalar operator-() const { return ApproxScalar(-re, -im, err); }
    friend ApproxScalar operator*(const ApproxScalar& x, const ApproxScalar& y) {
        ApproxScalar r(x.re * y.re - x.im * y.im, x.re * y.im + x.im * y.re, 0.0);
        r.err = inflate(x.mag_up() * y.err + y.mag_up() * x.err + x.err * y.err +
                        round_term(r.mag_up()));
        return r;
    }
    friend ApproxScalar operator/(const ApproxScalar& x, const ApproxScalar& y) {
        double ylow = std::max(0.0, y.mag_down() - y.err);
        if (ylow <= 0.0) throw DivisionByZero("ApproxScalar divisor not bounded away from zero");
        BigFloat n = y.re * y.re + y.im * y.im;
        ApproxScalar r((x.re * y.re + x.im * y.im) / n, (x.im * y.re - x.re * y.im) / n, 0.0);
        r.err = inflate((x.err + r.mag_up() * y.err) / ylow + round_term(r.mag_up()));
        return r;
    }
    ApproxScalar& operator+=(const ApproxScalar& o) { return *this = *this + o; }
    ApproxScalar& operator-=(const ApproxScalar& o) { return *this = *this - o; }
    ApproxScalar& operator*=(const ApproxScalar& o) { return *this = *this * o; }

    /// Square root of a nonnegative real scalar.
    ApproxScalar sqrt_real() const {
        if (!im.is_zero()) throw UnsupportedOperation("sqrt_real of a non-real scalar");
        if (re.sign() < 0) throw UnsupportedOperation("sqrt_real of a negative scalar");
        ApproxScalar r(re.sqrt(), BigFloat(), 0.0);
        double xlow = std::max(0.0, re.to_double_down() - err);
        double e = (err == 0.0) ? 0.0
                                : (xlow >= err ? err / (2.0 * std::sqrt(xlow)) : std::sqrt(err));
        r.err = inflate(e + round_term(r.mag_up()));
        return r;
    }

    std::string str(int digits = 40) const {
        char ebuf[32];
        std::snprintf(ebuf, sizeof ebuf, "%.3e", err);
        return re.str(digits) + " + " + im.str(digits) + "i (err<=" + ebuf + ")";
    }
};

inline ApproxScalar conj(const ApproxScalar& x) { return ApproxScalar(x.re, -x.im, x.err); }
inline bool is_zero(const ApproxScalar& x) { return x.is_zero(); }

inline ApproxScalar to_approx(const ApproxScalar& x) { return x; }
inline ApproxScalar to_approx(const ExactScalar& x) {
    ApproxScalar r(BigFloat(x.a), BigFloat(), 0.0);
    if (x.b != 0) {
        BigFloat rad = BigFloat(static_cast<long>(x.q)).sqrt();
        r.re += BigFloat(x.b) * rad;
    }
    r.err = inflate(4.0 * round_term(r.mag_up()));
    return r;
}

// ---------------------------------------------------------------------------
// CycScalar: ExactScalar coefficients over the group ring of mu_{q^k};
// canonical reduction modulo the prime-power cyclotomic polynomial turns it
// into exact arithmetic in Q(sqrt(q), zeta_{q^k}).  Used for additive
// character phases in the exact integrator.
// ---------------------------------------------------------------------------

struct CycScalar {
    long q{0};                   // residue characteristic (0 while k == 0)
    int k{0};                    // root order q^k
    std::vector<ExactScalar> c;  // coefficients of zeta^i, i in [0, q^k)

    CycScalar() : c(1) {}
    explicit CycScalar(const ExactScalar& s) : c{s} {}
    explicit CycScalar(const Rat& r) : c{ExactScalar(r)} {}
    explicit CycScalar(long n) : c{ExactScalar(n)} {}

    long order() const {
        long n = 1;
        for (int i = 0; i < k; ++i) n *= q;
        return n;
    }

    static CycScalar root_of_unity(long q, const Rat& x) {
        // e^{2 pi i x}; the denominator of x must be a power of q.
        Int den = denom(x);
        int k = 0;
        Int pw(1);
        while (pw < den) { pw *= q; ++k; if (k > 64) break; }
        if (pw != den) throw IrrationalResult("character phase with non-q-power denominator");
        CycScalar z;
        z.q = q;
        z.k = k;
        long n = 1;
        for (int i = 0; i < k; ++i) n *= q;
        z.c.assign(static_cast<std::size_t>(n), ExactScalar());
        Int idx = numer(x) % n;
        if (idx < 0) idx += n;
        z.c[static_cast<std::size_t>(idx.convert_to<long>())] = ExactScalar(Rat(1));
        if (k == 0) z.q = 0;
        return z;
    }

    CycScalar promoted(int knew) const {
        require(knew >= k, "CycScalar: promotion must not lower the order");
        if (knew == k) return *this;
        require(q >= 2, "CycScalar: promotion needs a characteristic");
        CycScalar r;
        r.q = q;
        r.k = knew;
        long n = 1;
        for (int i = 0; i < knew; ++i) n *= q;
        long step = n / order();
        r.c.assign(static_cast<std::size_t>(n), ExactScalar());
        for (std::size_t i = 0; i < c.size(); ++i) r.c[i * static_cast<std::size_t>(step)] = c[i];
        return r;
    }

    static std::pair<CycScalar, CycScalar> aligned(const CycScalar& x, const CycScalar& y) {
        long qq = x.q != 0 ? x.q : y.q;
        if (x.q != 0 && y.q != 0 && x.q != y.q)
            throw MixedRadicand("cyclotomic orders over distinct primes");
        CycScalar a = x, b = y;
        a.q = b.q = qq;
        int kk = std::max(x.k, y.k);
        return {a.promoted(kk), b.promoted(kk)};
    }

    friend CycScalar operator+(const CycScalar& x, const CycScalar& y) {
        auto [a, b] = aligned(x, y);
        for (std::size_t i = 0; i < a.c.size(); ++i) a.c[i] += b.c[i];
        return a;
    }
    friend CycScalar operator-(const CycScalar& x, const CycScalar& y) {
        auto [a, b] = aligned(x, y);
        for (std::size_t i = 0; i < a.c.size(); ++i) a.c[i] -= b.c[i];
        return a;
    }
    CycScalar operator-() const {
        CycScalar r = *this;
        for (auto& v : r.c) v = -v;
        return r;
    }
    friend CycScalar operator*(const CycScalar& x, const CycScalar& y) {
        auto [a, b] = aligned(x, y);
        const std::size_t n = a.c.size();
        CycScalar r = a;
        r.c.assign(n, ExactScalar());
        for (std::size_t i = 0; i < n; ++i) {
            if (a.c[i].is_zero()) continue;
            for (std::size_t j = 0; j < n; ++j) {
                if (b.c[j].is_zero()) continue;
                r.c[(i + j) % n] += a.c[i] * b.c[j];
            }
        }
        return r;
    }
    CycScalar& operator+=(const CycScalar& o) { return *this = *this + o; }
    CycScalar& operator*=(const CycScalar& o) { return *this = *this * o; }

    /// Rewrite coefficients into the power basis zeta^0..zeta^{phi(q^k)-1}
    /// using Phi_{q^k}(zeta) = sum_{i<q} zeta^{i q^{k-1}} = 0.
    CycScalar canonical() const {
        if (k == 0) return *this;
        CycScalar r = *this;
        long n = order();
        long m = n / q;            // q^{k-1}
        long phi = n - m;          // degree of Phi
        for (long j = n - 1; j >= phi; --j) {
            if (r.c[static_cast<std::size_t>(j)].is_zero()) continue;
            ExactScalar v = r.c[static_cast<std::size_t>(j)];
            r.c[static_cast<std::size_t>(j)] = ExactScalar();
            long t = j - phi;  // in [0, m)
            for (long i = 0; i + 1 < q; ++i)
                r.c[static_cast<std::size_t>(i * m + t)] -= v;
        }
        return r;
    }

    bool is_scalar() const {
        CycScalar r = canonical();
        for (std::size_t i = 1; i < r.c.size(); ++i)
            if (!r.c[i].is_zero()) return false;
        return true;
    }

    ExactScalar scalar_part() const {
        CycScalar r = canonical();
        for (std::size_t i = 1; i < r.c.size(); ++i)
            if (!r.c[i].is_zero())
                throw IrrationalResult("cyclotomic components do not cancel");
        return r.c[0];
    }

    friend bool operator==(const CycScalar& x, const CycScalar& y) {
        auto [a, b] = aligned(x, y);
        CycScalar d = a - b;
        d = d.canonical();
        for (const auto& v : d.c)
            if (!v.is_zero()) return false;
        return true;
    }
};

inline CycScalar conj(const CycScalar& x) {
    CycScalar r = x;
    long n = x.order();
    for (long i = 1; i < n; ++i)
        r.c[static_cast<std::size_t>(n - i)] = x.c[static_cast<std::size_t>(i)];
    if (n > 1) r.c[0] = x.c[0];
    return r;
}
inline bool is_zero(const CycScalar& x) {
    bool plainly = true;
    for (const auto& v : x.c)
        if (!v.is_zero()) { plainly = false; break; }
    if (plainly) return true;
    CycScalar d = x.canonical();
    for (const auto& w : d.c)
        if (!w.is_zero()) return false;
    return true;
}

inline ApproxScalar to_approx(const CycScalar& x) {
    ApproxScalar acc;
    long n = x.order();
    for (long i = 0; i < n; ++i) {
        if (x.c[static_cast<std::size_t>(i)].is_zero()) continue;
        auto [cth, sth] = BigFloat::cis(Rat(i, n));
        ApproxScalar z(cth, sth, inflate(8.0 * round_term(1.0)));
        acc += to_approx(x.c[static_cast<std::size_t>(i)]) * z;
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Scalar kind traits: the formula layer is generic over Exact/Approx; its
// character-bearing extension is Cyc/Approx.
// ---------------------------------------------------------------------------

template <class S>
struct scalar_kind;

template <>
struct scalar_kind<ExactScalar> {
    static constexpr bool exact = true;
    using cyc = CycScalar;
    static ExactScalar from_rat(const Rat& r) { return ExactScalar(r); }
    static ExactScalar sqrt_q(long q) { return ExactScalar::sqrt_of(q); }
    static CycScalar lift(const ExactScalar& s) { return CycScalar(s); }
    static ExactScalar lower(const CycScalar& c) { return c.scalar_part(); }
    static CycScalar phase(long q, const Rat& x) { return CycScalar::root_of_unity(q, x); }
};

template <>
struct scalar_kind<ApproxScalar> {
    static constexpr bool exact = false;
    using cyc = ApproxScalar;
    static ApproxScalar from_rat(const Rat& r) { return ApproxScalar(r); }
    static ApproxScalar sqrt_q(long q) { return ApproxScalar(Rat(q)).sqrt_real(); }
    static ApproxScalar lift(const ApproxScalar& s) { return s; }
    static ApproxScalar lower(const ApproxScalar& c) { return c; }
    static ApproxScalar phase(long /*q*/, const Rat& x) {
        auto [c, s] = BigFloat::cis(x);
        return ApproxScalar(c, s, inflate(8.0 * round_term(1.0)));
    }
};

template <class S>
inline constexpr bool is_exact_v = scalar_kind<S>::exact;

/// Deterministic reduction: plain left fold in index order, so results are
/// independent of thread count and identical across runs.
template <class S>
S sum_with_error(const std::vector<S>& terms) {
    S acc{};
    for (const auto& t : terms) acc = acc + t;
    return acc;
}

// ---------------------------------------------------------------------------
// Series tails.
// ---------------------------------------------------------------------------

/// Exact tail of a linearly recurrent series: given u_{r+k} = sum_j a_j u_{r+j}
/// valid from r = R on, and the window u_R..u_{R+k-1}, returns
/// sum_{r >= R} u_r by the telescoped closed form.  When the recurrence roots
/// lie outside the unit disc this evaluates the rational continuation of the
/// series; a vanishing denominator (a unit root, i.e. a pole of the continued
/// value) raises NonconvergentIntegral.
template <class S>
S recurrence_tail(const std::vector<S>& a, const std::vector<S>& head) {
    const std::size_t k = a.size();
    require(head.size() == k && k >= 1, "recurrence_tail: window size must match the order");
    S den = S(Rat(1));
    for (const auto& ai : a) den = den - ai;
    if (is_zero(den)) throw NonconvergentIntegral("recurrence has a unit root");
    if constexpr (!is_exact_v<S>) {
        if (den.mag_down() <= den.err)
            throw NonconvergentIntegral("recurrence denominator not separated from zero");
    }
    S numr{};
    for (std::size_t i = 0; i < k; ++i) {
        S w = S(Rat(1));
        for (std::size_t j = i + 1; j < k; ++j) w = w - a[j];
        numr = numr + w * head[i];
    }
    return numr / den;
}

/// Newton's identities: power sums p_1..p_n of a root multiset to the
/// elementary symmetric functions e_0..e_n (e_0 = 1).
template <class S>
std::vector<S> elementary_from_power_sums(const std::vector<S>& p) {
    std::vector<S> e(p.size() + 1);
    e[0] = S(Rat(1));
    for (std::size_t k = 1; k <= p.size(); ++k) {
        S acc{};
        int sign = 1;
        for (std::size_t i = 1; i <= k; ++i) {
            S term = e[k - i] * p[i - 1];
            acc = sign > 0 ? acc + term : acc - term;
            sign = -sign;
        }
        e[k] = acc * S(Rat(1, static_cast<long>(k)));
    }
    return e;
}

/// Coefficients a_0..a_{n-1} of the recurrence u_{r+n} = sum_j a_j u_{r+j}
/// whose characteristic roots are the multiset behind e_1..e_n.
template <class S>
std::vector<S> recurrence_from_elementary(const std::vector<S>& e) {
    require(!e.empty(), "recurrence_from_elementary: empty input");
    const std::size_t n = e.size() - 1;
    std::vector<S> a(n);
    int sign = 1;
    for (std::size_t i = 1; i <= n; ++i) {
        a[n - i] = sign > 0 ? e[i] : -e[i];
        sign = -sign;
    }
    return a;
}

/// sum_{s >= S0} s^d x^s for 0 <= d <= 4, S0 >= 0, as a closed form.
/// Generic over the scalar type; |x| < 1 is the caller's concern (for
/// envelope use x is a nonnegative real below 1).
template <class S>
S power_tail(int d, long s0, const S& x) {
    if (d < 0 || d > 4) throw UnsupportedOperation("power_tail implemented for degree <= 4");
    require(s0 >= 0, "power_tail: nonnegative start");
    const S one = S(Rat(1));
    S omx = one - x;
    if (is_zero(omx)) throw NonconvergentIntegral("power_tail at x = 1");
    // A_j(x) = sum_{t>=0} t^j x^t (Eulerian forms).
    std::vector<S> A(static_cast<std::size_t>(d) + 1);
    S inv = one / omx;
    S p = inv;  // 1/(1-x)^1
    A[0] = p;
    if (d >= 1) { p = p * inv; A[1] = x * p; }
    if (d >= 2) { p = p * inv; A[2] = x * (one + x) * p; }
    if (d >= 3) { p = p * inv; A[3] = x * (one + S(Rat(4)) * x + x * x) * p; }
    if (d >= 4) {
        p = p * inv;
        A[4] = x * (one + S(Rat(11)) * x + S(Rat(11)) * x * x + x * x * x) * p;
    }
    // sum_{s>=S0} s^d x^s = x^{S0} sum_j C(d,j) S0^{d-j} A_j(x)
    static const long binom[5][5] = {
        {1, 0, 0, 0, 0}, {1, 1, 0, 0, 0}, {1, 2, 1, 0, 0}, {1, 3, 3, 1, 0}, {1, 4, 6, 4, 1}};
    S acc{};
    for (int j = 0; j <= d; ++j) {
        Rat coef = Rat(binom[d][j]) * pow_rat(Rat(s0), d - j);
        acc = acc + S(coef) * A[static_cast<std::size_t>(j)];
    }
    return pow_int(x, s0) * acc;
}

/// Double-precision upper bound for sum_{r > R} (r+1)^d x^r, 0 <= x < 1.
/// Used by truncation certificates; inflated outward.
inline double power_tail_bound(int d, long R, double x) {
    if (!(x >= 0.0) || x >= 1.0) throw TailBoundUnavailable("geometric ratio not inside [0,1)");
    if (x == 0.0) return 0.0;
    // (r+1)^d x^r = (1/x) (r+1)^d x^{r+1}; shift s = r+1 > R+1.
    double acc = 0.0;
    // Direct: sum_{s >= S0} s^d x^s with S0 = R+2, then add the s = R+1 term? No:
    // r > R means r >= R+1, s = r+1 >= R+2.
    long s0 = R + 2;
    // Compute sum_{s>=s0} s^d x^s in double via the same closed form.
    double one_m = 1.0 - x;
    double A[5];
    A[0] = 1.0 / one_m;
    A[1] = x / (one_m * one_m);
    A[2] = x * (1.0 + x) / (one_m * one_m * one_m);
    A[3] = x * (1.0 + 4.0 * x + x * x) / (one_m * one_m * one_m * one_m);
    A[4] = x * (1.0 + 11.0 * x + 11.0 * x * x + x * x * x) /
           (one_m * one_m * one_m * one_m * one_m);
    static const long binom[5][5] = {
        {1, 0, 0, 0, 0}, {1, 1, 0, 0, 0}, {1, 2, 1, 0, 0}, {1, 3, 3, 1, 0}, {1, 4, 6, 4, 1}};
    if (d < 0 || d > 4) throw UnsupportedOperation("power_tail_bound implemented for degree <= 4");
    double spow = std::pow(x, static_cast<double>(s0));
    for (int j = 0; j <= d; ++j)
        acc += static_cast<double>(binom[d][j]) * std::pow(static_cast<double>(s0), d - j) * A[j];
    double v = spow * acc / x;  // divide by x: we summed s^d x^s but want x^r = x^{s-1}
    return inflate(inflate(v) * (1.0 + 1e-9));
}

} // namespace locperiod::num
