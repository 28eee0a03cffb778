#pragma once

#include <algorithm>
#include <vector>

#include "induced.hpp"

namespace locperiod::whittaker {

using induced::InducedVector;
using num::Rat;
using padic::LocalField;
using padic::Mat2;
using repn::Repn;

template <class S>
using CycOf = typename num::scalar_kind<S>::cyc;

/// p-power fractional part: the unique a/p^t in [0,1) with x - a/p^t
/// p-integral.
inline Rat frac_part(const Rat& x, long p) {
    if (x == 0) return Rat(0);
    long v = padic::valuation(x, p);
    if (v >= 0) return Rat(0);
    const int t = static_cast<int>(-v);
    Rat pt = num::pow_rat(Rat(p), t);
    num::Int a = padic::rat_mod(x * pt, p, t);
    return Rat(a) / pt;
}

/// The standard additive character of conductor O: psi(x) = e^{2 pi i {x}_p}.
template <class S>
CycOf<S> psi_phase(long p, const Rat& x) {
    return num::scalar_kind<S>::phase(p, frac_part(x, p));
}

/// The Whittaker functional against psi, as a stratified exact integral over
/// the unipotent line: J(f, g) = int f(w n(x) g) psi(-x) dx.
///
/// Strata: the unit ball is cut into balls of the constancy radius
/// jmin = m + v(det g) - 2 min v(bottom row of g), on which
/// f(w n(x0 + s) g) = f(w n(x0) g) because g^{-1} n(s) g lands in the
/// invariance subgroup K(p^m); each ball then contributes
/// f(w n(x0) g) psi(-x0) q^{-j}.  Negative shells v(x) = s are cut the same
/// way, and vanish outright once s <= -2 and the top-row criterion
/// -s >= m + v(det g) - 2 min v(top row) makes the integrand shell-constant
/// (the character sum over a shell of depth >= 2 is zero).
template <class S>
CycOf<S> jacquet_raw(const InducedVector<S>& f, const Mat2& g) {
    using SK = num::scalar_kind<S>;
    using C = CycOf<S>;
    if (g.det() == 0) throw SingularMatrix("jacquet_raw");
    const long p = f.q();
    const long m = f.level();
    const long vdet = padic::valuation(g.det(), p);
    const long vbot = std::min(padic::valuation(g.c, p), padic::valuation(g.d, p));
    const long vtop = std::min(padic::valuation(g.a, p), padic::valuation(g.b, p));
    const long jmin = m + vdet - 2 * vbot;
    const long mtop = m + vdet - 2 * vtop;
    const Mat2 w = Mat2::w();
    const LocalField& F = f.repr().field();

    C total{};
    {
        const long J = std::max(jmin, 0L);
        if (J > 22) throw UnsupportedOperation("unipotent stratification too deep");
        long count = 1;
        for (long i = 0; i < J; ++i) count *= p;
        C stratum{};
        for (long x = 0; x < count; ++x) {
            S val = f.evaluate(w * Mat2::n(Rat(x)) * g);
            if (num::is_zero(val)) continue;
            stratum = stratum + SK::lift(val) * psi_phase<S>(p, Rat(-x));
        }
        total = total + stratum * C(num::pow_rat(Rat(p), -J));
    }
    const long s_stop = std::min(-mtop, -2L);
    for (long s = s_stop + 1; s <= -1; ++s) {
        const long J = std::max(jmin, s + 1);
        if (J < 0) continue;
        if (J - s > 22) throw UnsupportedOperation("unipotent stratification too deep");
        const Rat ps = num::pow_rat(Rat(p), s);
        C stratum{};
        for (const Rat& u : padic::unit_reps(F, static_cast<int>(J - s))) {
            Rat x0 = u * ps;
            S val = f.evaluate(w * Mat2::n(x0) * g);
            if (num::is_zero(val)) continue;
            stratum = stratum + SK::lift(val) * psi_phase<S>(p, -x0);
        }
        total = total + stratum * C(num::pow_rat(Rat(p), -J));
    }
    return total;
}

/// J(f, g) demoted to the base scalar; a genuinely character-valued result
/// (e.g. at points twisted by a fractional unipotent) raises IrrationalResult.
template <class S>
S jacquet_value(const InducedVector<S>& f, const Mat2& g) {
    return num::scalar_kind<S>::lower(jacquet_raw(f, g));
}

/// Normalization constant making W = c J(new vector, .) take the value 1 at
/// the identity.  Closed forms: (1 - alpha^2/q)^{-1} unramified, -q^2/(q+1)
/// for Steinberg; computed here from the integral itself.
template <class S>
S whittaker_normalizer(const Repn<S>& pi) {
    auto f = InducedVector<S>::new_vector(pi);
    S j0 = jacquet_value(f, Mat2::identity());
    if (num::is_zero(j0))
        throw InvariantViolation("Whittaker functional vanishes at the identity");
    return S(Rat(1)) / j0;
}

/// W_v(a(varpi^r)) through the integral, canonically normalized.  Test-scale
/// convenience; bulk consumers build tables around jacquet_raw directly.
template <class S>
S whittaker_torus(const InducedVector<S>& v, long r) {
    S c = whittaker_normalizer(v.repr());
    return c * jacquet_value(v, Mat2::a_diag(num::pow_rat(Rat(v.q()), r)));
}

/// Torus restriction of the canonical new-vector Whittaker function:
/// q^{-r/2} h_r(lambda) unramified, (chi/q)^r Steinberg, zero below r = 0.
/// (The Steinberg norm scale sqrt((q+1)/q) is carried by pairings, not here.)
template <class S>
S torus_closed(const Repn<S>& pi, long r) {
    if (r < 0) return S{};
    if (pi.is_steinberg()) return S(num::pow_rat(Rat(pi.chi(), pi.q()), r));
    S inv = S(Rat(1)) / num::scalar_kind<S>::sqrt_q(pi.q());
    return num::pow_int(inv, r) * repn::h_poly(pi.hecke_eigenvalue(), r);
}

/// Coefficients of the linear recurrence satisfied by products
/// W(a(varpi^{t+d1})) conj(W(a(varpi^{t+d2}))): its characteristic roots are
/// the pairwise products of the torus-decay roots with their conjugates, so
/// the power sums multiply.
template <class S>
std::vector<S> product_recurrence(const Repn<S>& pi) {
    const int n = pi.torus_root_count() * pi.torus_root_count();
    auto tp = pi.torus_root_power_sums(n);
    std::vector<S> pk(tp.size());
    for (std::size_t i = 0; i < tp.size(); ++i) pk[i] = tp[i] * num::conj(tp[i]);
    return num::recurrence_from_elementary(num::elementary_from_power_sums(pk));
}

/// sum_{t >= 0} torus(t + d1) conj(torus(t + d2)), through the product
/// recurrence, so parameter choices with divergent series evaluate to their
/// rational continuation (and a unit root raises NonconvergentIntegral).
template <class S>
S theta_series(const Repn<S>& pi, long d1, long d2) {
    require(d1 >= 0 && d2 >= 0, "theta_series: nonnegative offsets");
    auto a = product_recurrence(pi);
    const std::size_t n = a.size();
    std::vector<S> u(2 * n);
    for (std::size_t t = 0; t < 2 * n; ++t)
        u[t] = torus_closed(pi, static_cast<long>(t) + d1) *
               num::conj(torus_closed(pi, static_cast<long>(t) + d2));
    S head{};
    for (std::size_t t = 0; t < n; ++t) head = head + u[t];
    return head + num::recurrence_tail(a, std::vector<S>(u.begin() + static_cast<long>(n), u.end()));
}

/// zeta(2) / (zeta(1) L(pi, Ad, 1)): the normalizer making the Whittaker-side
/// inner product match the unitary one.
template <class S>
S theta_prefactor(const Repn<S>& pi) {
    S z1 = S(repn::zeta_q(pi.field(), 1));
    S z2 = S(repn::zeta_q(pi.field(), 2));
    return z2 / (z1 * pi.adjoint_L1());
}

/// Square of the canonical Whittaker norm scale: the Steinberg new-vector
/// table (chi/q)^r carries total mass q/(q+1) under the theta normalization,
/// so its canonical W is sqrt((q+1)/q) times the table.
template <class S>
Rat theta_norm_scale2(const Repn<S>& pi) {
    return pi.is_steinberg() ? Rat(pi.q() + 1, pi.q()) : Rat(1);
}

namespace detail {
inline std::optional<Rat> perfect_sqrt(const Rat& s) {
    if (s < 0) return std::nullopt;
    num::Int n = num::numer(s), d = num::denom(s);
    num::Int rn = boost::multiprecision::sqrt(n), rd = boost::multiprecision::sqrt(d);
    if (rn * rn == n && rd * rd == d) return Rat(rn) / Rat(rd);
    return std::nullopt;
}
} // namespace detail

/// sqrt of a positive rational square-scale, as a scalar: exact kinds demand
/// s = t^2 or s = q t^2 (values in Q(sqrt q)); the approximate kind just
/// takes the square root.
template <class S>
S sqrt_scale(const Rat& s, long q) {
    if (s <= 0) throw InvariantViolation("square-scale must be positive");
    if constexpr (num::is_exact_v<S>) {
        if (auto t = detail::perfect_sqrt(s)) return S(*t);
        if (auto t = detail::perfect_sqrt(s / q))
            return S(num::ExactScalar(Rat(0), *t, q));
        throw IrrationalResult("square-scale is not a square in Q(sqrt q)");
    } else {
        return S(s).sqrt_real();
    }
}

/// Inner product on the Whittaker side,
///   theta(W1, W2) = pref * int_{k^x} W1(a(y)) conj(W2(a(y))) d^x y,
/// for vectors carrying torus-translate expansions: fully closed-form.
template <class S>
S theta_inner_combo(const InducedVector<S>& v1, const InducedVector<S>& v2) {
    require(v1.q() == v2.q(), "theta: mixed fields");
    const Repn<S>& pi = v1.repr();
    S total{};
    for (const auto& [c1, j1] : v1.combo())
        for (const auto& [c2, j2] : v2.combo()) {
            const long M = std::max(j1, j2);
            total = total + c1 * num::conj(c2) * theta_series(pi, M - j1, M - j2);
        }
    if (num::is_zero(total)) return S{};
    S scale = S(theta_norm_scale2(pi)) * sqrt_scale<S>(v1.scale2() * v2.scale2(), pi.q());
    return theta_prefactor(pi) * scale * total;
}

/// The same inner product through Jacquet tables: torus values over unit
/// classes and valuations, summed exactly with a recurrence tail whose regime
/// is validated on four trailing windows.  Works for any vector with
/// pointwise data; this is the route for vectors with no expansion over
/// torus translates of the new vector.
template <class S>
S theta_inner_tables(const InducedVector<S>& v1, const InducedVector<S>& v2) {
    require(v1.q() == v2.q(), "theta: mixed fields");
    const Repn<S>& pi = v1.repr();
    const long p = pi.q();
    const LocalField& F = pi.field();
    const S cnorm = whittaker_normalizer(pi);
    auto a = product_recurrence(pi);
    const long n = static_cast<long>(a.size());
    const long m1 = v1.level(), m2 = v2.level();
    const long r_lo = -std::min(m1, m2);   // W_i(a(y)) = 0 below v(y) = -m_i
    const long r_star = std::max(m1, m2) + 3;  // asymptotic-regime start
    const long r_hi = r_star + n + 3;          // tail window + 4 checked windows

    std::vector<S> row;
    for (long r = r_lo; r <= r_hi; ++r) {
        const int c = static_cast<int>(std::max({m1 - r, m2 - r, 2L}) - 1);
        auto units = padic::unit_reps(F, c);
        CycOf<S> acc{};
        const Rat pr = num::pow_rat(Rat(p), r);
        for (const Rat& u : units) {
            Mat2 t = Mat2::a_diag(u * pr);
            acc = acc + jacquet_raw(v1, t) * num::conj(jacquet_raw(v2, t));
        }
        S val = num::scalar_kind<S>::lower(acc);  // Galois-stable after the unit sum
        row.push_back(S(Rat(1, static_cast<long>(units.size()))) * val);
    }
    for (std::size_t t = row.size() - static_cast<std::size_t>(n) - 4;
         t + static_cast<std::size_t>(n) < row.size(); ++t) {
        S rhs{};
        for (long j = 0; j < n; ++j)
            rhs = rhs + a[static_cast<std::size_t>(j)] * row[t + static_cast<std::size_t>(j)];
        S diff = row[t + static_cast<std::size_t>(n)] - rhs;
        bool ok;
        if constexpr (num::is_exact_v<S>) ok = num::is_zero(diff);
        else ok = diff.mag_down() <= diff.err;
        if (!ok)
            throw InvariantViolation("torus tables did not reach the recurrence regime");
    }
    const std::size_t T0 = row.size() - static_cast<std::size_t>(n);
    S total{};
    for (std::size_t t = 0; t < T0; ++t) total = total + row[t];
    total = total + num::recurrence_tail(a, std::vector<S>(row.begin() + static_cast<long>(T0), row.end()));
    total = cnorm * num::conj(cnorm) * total;
    if (num::is_zero(total)) return S{};
    S scale = S(theta_norm_scale2(pi)) * sqrt_scale<S>(v1.scale2() * v2.scale2(), pi.q());
    return theta_prefactor(pi) * scale * total;
}

/// Dispatch: closed series for torus-translate expansions, tables otherwise.
template <class S>
S theta_inner(const InducedVector<S>& v1, const InducedVector<S>& v2) {
    if (v1.has_combo() && v2.has_combo()) return theta_inner_combo(v1, v2);
    return theta_inner_tables(v1, v2);
}

} // namespace locperiod::whittaker
