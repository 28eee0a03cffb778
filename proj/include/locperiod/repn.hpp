#pragma once

#include <optional>
#include <vector>

#include "numerics.hpp"
#include "padic.hpp"

namespace locperiod::repn {

using num::Rat;
using padic::LocalField;

/// Local zeta factor zeta_q(s) = (1 - q^{-s})^{-1} at integer s != 0.
inline Rat zeta_q(const LocalField& F, long s) {
    Rat d = Rat(1) - num::pow_rat(Rat(F.q()), -s);
    if (d == 0) throw PoleAtEvaluationPoint("zeta_q at s = 0");
    return Rat(1) / d;
}

/// Symmetric Satake powers s_k = alpha^k + alpha^{-k} from lambda = s_1,
/// via s_{k+1} = lambda s_k - s_{k-1}.
template <class S>
std::vector<S> sym_powers(const S& lambda, int kmax) {
    std::vector<S> s(static_cast<std::size_t>(kmax) + 1);
    s[0] = S(Rat(2));
    if (kmax >= 1) s[1] = lambda;
    for (int k = 2; k <= kmax; ++k)
        s[static_cast<std::size_t>(k)] =
            lambda * s[static_cast<std::size_t>(k - 1)] - s[static_cast<std::size_t>(k - 2)];
    return s;
}

/// h_r = sum_{j=0}^{r} alpha^{r-2j} as a polynomial in lambda, extended to
/// r = -1 (0) and r = -2 (-1) by the same recurrence.
template <class S>
S h_poly(const S& lambda, long r) {
    if (r <= -3) throw InvariantViolation("h_poly below r = -2");
    if (r == -2) return S(Rat(-1));
    if (r == -1) return S{};
    S hm1{};            // h_{-1}
    S h0 = S(Rat(1));   // h_0
    for (long i = 0; i < r; ++i) {
        S next = lambda * h0 - hm1;
        hm1 = h0;
        h0 = next;
    }
    return h0;
}

enum class ReprKind { unramified, steinberg };

/// An irreducible generic representation with trivial central character:
/// either unramified principal series (through its Satake parameter or just
/// the spherical Hecke eigenvalue) or a twist of Steinberg by the unramified
/// quadratic character chi(varpi) = +-1.
template <class S>
class Repn {
public:
    static Repn unramified_from_alpha(const LocalField& F, const S& alpha,
                                      bool nonunitary_override = false) {
        Repn r(F, ReprKind::unramified);
        if (is_zero(alpha)) throw InvariantViolation("zero Satake parameter");
        r.alpha_ = alpha;
        r.lambda_ = alpha + S(Rat(1)) / alpha;
        r.override_ = nonunitary_override;
        r.unitary_ = alpha_is_unitary(F, alpha);
        if (!r.unitary_ && !nonunitary_override)
            throw NonUnitaryParameter("Satake parameter outside the unitary set");
        return r;
    }

    static Repn unramified_from_lambda(const LocalField& F, const S& lambda,
                                       bool nonunitary_override = false) {
        Repn r(F, ReprKind::unramified);
        r.lambda_ = lambda;
        r.override_ = nonunitary_override;
        r.unitary_ = lambda_is_unitary(F, lambda);
        if (!r.unitary_ && !nonunitary_override)
            throw NonUnitaryParameter("Hecke eigenvalue outside the unitary window");
        return r;
    }

    static Repn steinberg(const LocalField& F, int chi_sign) {
        if (chi_sign != 1 && chi_sign != -1)
            throw InvariantViolation("Steinberg twist sign must be +-1");
        Repn r(F, ReprKind::steinberg);
        r.chi_ = chi_sign;
        r.unitary_ = true;
        return r;
    }

    const LocalField& field() const { return F_; }
    long q() const { return F_.q(); }
    ReprKind kind() const { return kind_; }
    bool is_steinberg() const { return kind_ == ReprKind::steinberg; }
    bool unitary() const { return unitary_; }
    bool nonunitary_override() const { return override_; }
    int chi() const {
        require(is_steinberg(), "chi: only Steinberg carries the twist sign");
        return chi_;
    }

    /// Normalized spherical Hecke eigenvalue lambda = alpha + alpha^{-1}.
    const S& hecke_eigenvalue() const {
        if (is_steinberg())
            throw SteinbergHasNoSphericalEigenvalue(
                "the Steinberg representation has no spherical vector");
        return lambda_;
    }

    /// The Satake parameter itself; needed by the induced model, not by the
    /// symmetric (lambda-only) formulas.
    const S& satake_alpha() const {
        if (is_steinberg())
            throw UnsupportedOperation("Steinberg has no Satake parameter");
        if (!alpha_)
            throw UnsupportedOperation(
                "representation was built from lambda only; the induced model needs alpha");
        return *alpha_;
    }

    bool has_alpha() const { return alpha_.has_value(); }

    /// Depth of the new vector: 0 (hyperspecial-fixed) or 1 (Iwahori-fixed).
    int new_vector_level() const { return is_steinberg() ? 1 : 0; }

    /// L(pi, Ad, 1).
    S adjoint_L1() const {
        const Rat qr(q());
        if (is_steinberg()) return S(zeta_q(F_, 2));
        // [(1-alpha^2/q)(1-1/q)(1-alpha^{-2}/q)]^{-1}, symmetric in alpha.
        S lam2 = lambda_ * lambda_;
        S den = (S(Rat(1)) - S(Rat(1) / qr)) *
                (S(Rat(1)) - (lam2 - S(Rat(2))) * S(Rat(1) / qr) + S(Rat(1) / (qr * qr)));
        if (is_zero(den)) throw PoleAtEvaluationPoint("adjoint L-factor at s = 1");
        return S(Rat(1)) / den;
    }

    /// Standard L-factor at s given as 2s (half-integers allowed).
    S standard_L_twice(long twice_s) const {
        S x = pow_int(num::scalar_kind<S>::sqrt_q(q()), -twice_s);  // q^{-s}
        if (is_steinberg()) {
            S den = S(Rat(1)) - S(Rat(chi_)) * x * num::scalar_kind<S>::sqrt_q(q()) *
                                    S(Rat(1, q()));  // chi q^{-1/2} q^{-s}
            if (is_zero(den)) throw PoleAtEvaluationPoint("standard L-factor pole");
            return S(Rat(1)) / den;
        }
        S den = S(Rat(1)) - lambda_ * x + x * x;
        if (is_zero(den)) throw PoleAtEvaluationPoint("standard L-factor pole");
        return S(Rat(1)) / den;
    }

    /// Power sums of the torus-decay roots of the new-vector Whittaker
    /// sequence: {alpha q^{-1/2}, alpha^{-1} q^{-1/2}} (unramified) or the
    /// single {chi q^{-1}} (Steinberg).  Drives recurrence tails.
    std::vector<S> torus_root_power_sums(int kmax) const {
        std::vector<S> p(static_cast<std::size_t>(kmax));
        if (is_steinberg()) {
            for (int k = 1; k <= kmax; ++k)
                p[static_cast<std::size_t>(k - 1)] =
                    S(num::pow_rat(Rat(chi_, q()), k));
            return p;
        }
        auto s = sym_powers(lambda_, kmax);
        S invsq = S(Rat(1)) / num::scalar_kind<S>::sqrt_q(q());
        S pw = S(Rat(1));
        for (int k = 1; k <= kmax; ++k) {
            pw = pw * invsq;
            p[static_cast<std::size_t>(k - 1)] = s[static_cast<std::size_t>(k)] * pw;
        }
        return p;
    }

    /// Number of torus-decay roots (recurrence order of torus sequences).
    int torus_root_count() const { return is_steinberg() ? 1 : 2; }

private:
    Repn(const LocalField& F, ReprKind k) : F_(F), kind_(k), lambda_{} {}

    static bool alpha_is_unitary(const LocalField& F, const S& alpha) {
        if constexpr (num::is_exact_v<S>) {
            if (alpha.is_rational()) {
                const Rat& a = alpha.a;
                if (a == 1 || a == -1) return true;
                Rat a2 = a * a;
                return a > 0 && a2 * F.q() > 1 && a2 < F.q();
            }
            // Real quadratic irrationalities: compare numerically, demanding
            // clearance beyond the conversion error.
            num::ApproxScalar ap = num::to_approx(alpha);
            double v = ap.re.to_double();
            double slack = ap.err + 1e-25;
            double lo = 1.0 / std::sqrt(double(F.q())), hi = std::sqrt(double(F.q()));
            return v > lo + slack && v < hi - slack;
        } else {
            double re = alpha.re.to_double(), im = alpha.im.to_double();
            double slack = alpha.err + 1e-25;
            double mag2 = re * re + im * im;
            // the additive floor absorbs the double conversion roundoff
            if (std::abs(mag2 - 1.0) <= 4 * slack + 1e-14) return true;
            if (std::abs(im) > slack) return false;
            double lo = 1.0 / std::sqrt(double(F.q())), hi = std::sqrt(double(F.q()));
            return re > lo + slack && re < hi - slack;
        }
    }

    static bool lambda_is_unitary(const LocalField& F, const S& lambda) {
        // alpha on the unit circle <=> lambda real in [-2, 2]; complementary
        // window <=> 2 < |lambda| < (q+1)/sqrt(q) with positive alpha.
        if constexpr (num::is_exact_v<S>) {
            if (lambda.is_rational()) {
                Rat l2 = lambda.a * lambda.a;
                if (l2 <= 4) return true;
                // strict: l2 < (q+1)^2/q, and the positive-alpha side only
                return lambda.a > 0 && l2 * F.q() < Rat((F.q() + 1) * (F.q() + 1));
            }
            num::ApproxScalar ap = num::to_approx(lambda);
            double v = ap.re.to_double(), slack = ap.err + 1e-25;
            if (std::abs(v) <= 2.0 - slack) return true;
            double hi = (F.q() + 1.0) / std::sqrt(double(F.q()));
            return v > 2.0 + slack && v < hi - slack;
        } else {
            double re = lambda.re.to_double(), im = lambda.im.to_double();
            double slack = lambda.err + 1e-25;
            if (std::abs(im) > slack) return false;
            if (std::abs(re) <= 2.0 + slack) return true;
            double hi = (F.q() + 1.0) / std::sqrt(double(F.q()));
            return re > 2.0 + slack && re < hi - slack;
        }
    }

    LocalField F_;
    ReprKind kind_;
    std::optional<S> alpha_;
    S lambda_;
    int chi_ = 1;
    bool unitary_ = false;
    bool override_ = false;
};

/// Central value of the local triple-product L-factor.  For three
/// unramified factors this is prod over the eight sign choices of
/// (1 - alpha_1^{e1} alpha_2^{e2} alpha_3^{e3} q^{-1/2})^{-1}; with one
/// Steinberg slot the four-factor form with chi q^{-1} replaces the pair.
/// Evaluated through power sums, so lambda-only data suffices.
template <class S>
S triple_L_half(const Repn<S>& r1, const Repn<S>& r2, const Repn<S>& r3) {
    require(r1.q() == r2.q() && r2.q() == r3.q(), "triple_L_half: mixed residue fields");
    const long q = r1.q();
    std::vector<const Repn<S>*> unram, st;
    for (const Repn<S>* r : {&r1, &r2, &r3})
        (r->is_steinberg() ? st : unram).push_back(r);
    if (st.size() >= 2)
        throw UnsupportedOperation("triple-product factor with two Steinberg slots");

    int n;           // number of roots
    S xpow{};        // evaluation point
    std::vector<S> p;
    if (st.empty()) {
        n = 8;
        xpow = S(Rat(1)) / num::scalar_kind<S>::sqrt_q(q);  // q^{-1/2}
        p.assign(8, S{});
        auto s1 = sym_powers(unram[0]->hecke_eigenvalue(), 8);
        auto s2 = sym_powers(unram[1]->hecke_eigenvalue(), 8);
        auto s3 = sym_powers(unram[2]->hecke_eigenvalue(), 8);
        for (int k = 1; k <= 8; ++k)
            p[static_cast<std::size_t>(k - 1)] = s1[static_cast<std::size_t>(k)] *
                                                 s2[static_cast<std::size_t>(k)] *
                                                 s3[static_cast<std::size_t>(k)];
    } else {
        n = 4;
        xpow = S(Rat(st[0]->chi(), q));  // chi q^{-1}
        p.assign(4, S{});
        auto s1 = sym_powers(unram[0]->hecke_eigenvalue(), 4);
        auto s2 = sym_powers(unram[1]->hecke_eigenvalue(), 4);
        for (int k = 1; k <= 4; ++k)
            p[static_cast<std::size_t>(k - 1)] =
                s1[static_cast<std::size_t>(k)] * s2[static_cast<std::size_t>(k)];
    }
    auto e = num::elementary_from_power_sums(p);
    // prod_j (1 - beta_j x) = sum_k (-1)^k e_k x^k
    S den{};
    S xk = S(Rat(1));
    int sign = 1;
    for (int k = 0; k <= n; ++k) {
        S term = e[static_cast<std::size_t>(k)] * xk;
        den = sign > 0 ? den + term : den - term;
        sign = -sign;
        xk = xk * xpow;
    }
    if (is_zero(den)) throw PoleAtEvaluationPoint("triple-product factor at the center");
    if constexpr (!num::is_exact_v<S>) {
        if (den.mag_down() <= den.err)
            throw PoleAtEvaluationPoint("triple-product factor not separated from its pole");
    }
    return S(Rat(1)) / den;
}

} // namespace locperiod::repn
