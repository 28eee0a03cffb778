#pragma once

#include <array>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "padic.hpp"
#include "repn.hpp"

namespace locperiod::induced {

using num::Rat;
using padic::LocalField;
using padic::Mat2;
using padic::P1Grid;
using repn::Repn;
using repn::ReprKind;

/// Torus-decay weight of the flag model: the value of a smooth vector at
/// n(x) a(y) k factors as weight(v(y)) * (restriction to K).  Unramified:
/// (alpha/sqrt q)^v; Steinberg twist: (chi/q)^v.
template <class S>
S torus_weight(const Repn<S>& pi, long v) {
    if (pi.is_steinberg()) return S(num::pow_rat(Rat(pi.chi(), pi.q()), v));
    S root = pi.satake_alpha() / num::scalar_kind<S>::sqrt_q(pi.q());
    return pow_int(root, v);
}

/// A smooth vector in the induced model, stored through its restriction to
/// K as a function on P^1(O/p^m).  Alongside the raw values the vector
/// remembers, when applicable, its expansion over torus translates of the
/// new vector (the closed-form pairing routes key off that expansion, and
/// it is the only usable data when the representation was built from the
/// Hecke eigenvalue alone) and a rational square-scale for normalizers
/// that live outside Q(sqrt q).
template <class S>
class InducedVector {
public:
    using Combo = std::vector<std::pair<S, int>>;  // (coefficient, translate shift)

    InducedVector(const Repn<S>& pi, int level, std::vector<S> values)
        : pi_(pi), level_(level), values_(std::move(values)), has_values_(true) {
        P1Grid grid(pi.field(), level_);
        require(static_cast<long>(values_.size()) == grid.size(),
                "InducedVector: value table does not match the grid");
    }

    /// Combo-only vector (no pointwise data).
    InducedVector(const Repn<S>& pi, int level, Combo combo)
        : pi_(pi), level_(level), has_values_(false), combo_(std::move(combo)) {}

    static InducedVector new_vector(const Repn<S>& pi) {
        const LocalField& F = pi.field();
        if (pi.is_steinberg()) {
            // 1 on the Iwahori cell (varpi-divisible slope), -1/q elsewhere:
            // the K_0(p)-invariant line with vanishing K-average.
            P1Grid grid(F, 1);
            std::vector<S> vals(static_cast<std::size_t>(grid.size()),
                                S(Rat(-1, F.q())));
            vals[0] = S(Rat(1));
            InducedVector v(pi, 1, std::move(vals));
            v.combo_ = Combo{{S(Rat(1)), 0}};
            return v;
        }
        InducedVector v(pi, 0, std::vector<S>{S(Rat(1))});
        v.combo_ = Combo{{S(Rat(1)), 0}};
        return v;
    }

    const Repn<S>& repr() const { return pi_; }
    int level() const { return level_; }
    long q() const { return pi_.q(); }
    bool has_values() const { return has_values_; }
    const std::vector<S>& values() const {
        require(has_values_, "InducedVector: no pointwise data");
        return values_;
    }
    const Rat& scale2() const { return scale2_; }
    void set_scale2(const Rat& s) {
        if (s <= 0) throw InvariantViolation("scale^2 must be positive");
        scale2_ = s;
    }
    bool has_combo() const { return combo_.has_value(); }
    const Combo& combo() const {
        require(has_combo(), "InducedVector: no torus-translate expansion");
        return *combo_;
    }

    /// Pointwise evaluation anywhere on the group.
    S evaluate(const Mat2& g) const {
        require(has_values_, "evaluate: vector carries no pointwise data");
        auto iw = padic::iwasawa(g, q());
        long vy = padic::valuation(iw.y, q());
        P1Grid grid(pi_.field(), level_);
        return torus_weight(pi_, vy) *
               values_[static_cast<std::size_t>(grid.index_of_k(iw.k))];
    }

    /// Right translate by g, computed at the guaranteed level
    /// (current level + Cartan gap of g) and then shrunk to the true
    /// invariance level.  The approximate backend keeps the conservative
    /// level: deciding constancy there would need value comparisons.
    InducedVector translate(const Mat2& g) const {
        if (g.det() == 0) throw SingularMatrix("translate");
        const long gap = padic::cartan_gap(g, q());
        std::optional<Combo> combo;
        if (combo_ && g.b == 0 && g.c == 0) {
            int shift = static_cast<int>(padic::valuation(g.d, q()) -
                                         padic::valuation(g.a, q()));
            combo = Combo{};
            combo->reserve(combo_->size());
            for (const auto& [cf, sh] : *combo_) combo->emplace_back(cf, sh + shift);
        }
        const bool can_eval =
            has_values_ && (pi_.is_steinberg() || pi_.has_alpha());
        if (!can_eval) {
            if (!combo)
                throw UnsupportedOperation(
                    "translate: pointwise data needs the Satake parameter, and the "
                    "element is not a torus one");
            InducedVector out(pi_, level_ + static_cast<int>(gap), std::move(*combo));
            out.scale2_ = scale2_;
            return out;
        }
        int mnew = level_ + static_cast<int>(gap);
        P1Grid grid(pi_.field(), mnew);
        std::vector<S> vals(static_cast<std::size_t>(grid.size()));
        for (long i = 0; i < grid.size(); ++i)
            vals[static_cast<std::size_t>(i)] = evaluate(grid.lift(i) * g);
        InducedVector out(pi_, mnew, std::move(vals));
        out.scale2_ = scale2_;
        out.combo_ = std::move(combo);
        if constexpr (num::is_exact_v<S>) out.shrink();
        return out;
    }

    friend InducedVector operator+(const InducedVector& x, const InducedVector& y) {
        require(x.q() == y.q(), "mixed fields");
        if (x.scale2_ != y.scale2_)
            throw IrrationalResult("adding vectors with different square-scales");
        int m = std::max(x.level_, y.level_);
        InducedVector a = x.at_level(m), b = y.at_level(m);
        std::optional<Combo> combo;
        if (x.combo_ && y.combo_) {
            std::map<int, S> merged;
            for (const auto& [cf, sh] : *x.combo_) {
                auto [it, fresh] = merged.try_emplace(sh, cf);
                if (!fresh) it->second = it->second + cf;
            }
            for (const auto& [cf, sh] : *y.combo_) {
                auto [it, fresh] = merged.try_emplace(sh, cf);
                if (!fresh) it->second = it->second + cf;
            }
            combo = Combo{};
            for (auto& [sh, cf] : merged) combo->emplace_back(cf, sh);
        }
        if (!a.has_values_ || !b.has_values_) {
            if (!combo) throw UnsupportedOperation("sum of vectors with no usable data");
            InducedVector out(x.pi_, m, std::move(*combo));
            out.scale2_ = x.scale2_;
            return out;
        }
        std::vector<S> vals(a.values_.size());
        for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = a.values_[i] + b.values_[i];
        InducedVector out(x.pi_, m, std::move(vals));
        out.scale2_ = x.scale2_;
        out.combo_ = std::move(combo);
        if constexpr (num::is_exact_v<S>) out.shrink();
        return out;
    }

    friend InducedVector operator*(const S& c, const InducedVector& v) {
        InducedVector out = v;
        for (auto& x : out.values_) x = c * x;
        if (out.combo_)
            for (auto& t : *out.combo_) t.first = c * t.first;
        return out;
    }

    friend InducedVector operator-(const InducedVector& x, const InducedVector& y) {
        return x + (S(Rat(-1)) * y);
    }

    friend bool operator==(const InducedVector& x, const InducedVector& y) {
        static_assert(num::is_exact_v<S>, "vector equality is an exact-backend notion");
        if (x.q() != y.q() || x.scale2_ != y.scale2_) return false;
        if (!x.has_values_ || !y.has_values_)
            throw UnsupportedOperation("equality needs pointwise data");
        int m = std::max(x.level_, y.level_);
        InducedVector a = x.at_level(m), b = y.at_level(m);
        return a.values_ == b.values_;
    }

    bool is_zero_vector() const {
        require(has_values_, "is_zero_vector needs pointwise data");
        for (const auto& v : values_)
            if (!num::is_zero(v)) return false;
        return true;
    }

    /// Average over K (mass 1); the cells of P^1(O/p^m) all share volume
    /// 1/|P^1(O/p^m)| since K permutes them transitively.
    S k_average() const {
        require(has_values_, "k_average needs pointwise data");
        S acc{};
        for (const auto& v : values_) acc = acc + v;
        return S(Rat(1, static_cast<long>(values_.size()))) * acc;
    }

    /// Re-express at a level >= the current one.
    InducedVector at_level(int m) const {
        require(m >= level_, "at_level only refines");
        if (m == level_ || !has_values_) {
            InducedVector out = *this;
            out.level_ = std::max(out.level_, m);
            return out;
        }
        P1Grid fine(pi_.field(), m), coarse(pi_.field(), level_);
        std::vector<S> vals(static_cast<std::size_t>(fine.size()));
        for (long i = 0; i < fine.size(); ++i)
            vals[static_cast<std::size_t>(i)] =
                values_[static_cast<std::size_t>(coarse.index_of_k(fine.lift(i)))];
        InducedVector out(pi_, m, std::move(vals));
        out.scale2_ = scale2_;
        out.combo_ = combo_;
        return out;
    }

private:
    void shrink() {
        while (level_ > 0) {
            P1Grid fine(pi_.field(), level_), coarse(pi_.field(), level_ - 1);
            std::vector<S> vals(static_cast<std::size_t>(coarse.size()));
            std::vector<bool> seen(static_cast<std::size_t>(coarse.size()), false);
            bool ok = true;
            for (long i = 0; i < fine.size() && ok; ++i) {
                auto j = static_cast<std::size_t>(coarse.index_of_k(fine.lift(i)));
                const S& v = values_[static_cast<std::size_t>(i)];
                if (!seen[j]) {
                    seen[j] = true;
                    vals[j] = v;
                } else if (!num::is_zero(vals[j] - v)) {
                    ok = false;
                }
            }
            if (!ok) break;
            values_ = std::move(vals);
            --level_;
        }
    }

    Repn<S> pi_;
    int level_;
    std::vector<S> values_{};
    bool has_values_ = false;
    Rat scale2_{1};
    std::optional<Combo> combo_{};
};

/// Normalized Hecke operator at the residue prime: q^{-1/2} times the sum
/// of right translates over the q+1 cosets of K a(p) K.
template <class S>
InducedVector<S> hecke_apply(const InducedVector<S>& v) {
    const LocalField F(v.q());
    std::optional<InducedVector<S>> acc;
    for (const auto& g : padic::hecke_cosets(F)) {
        InducedVector<S> t = v.translate(g);
        acc = acc ? (*acc + t) : t;
    }
    S norm = S(Rat(1)) / num::scalar_kind<S>::sqrt_q(F.q());
    return norm * *acc;
}

/// Right translate by the level-one involution element [[0,-1],[p,0]].
template <class S>
InducedVector<S> atkin_lehner_apply(const InducedVector<S>& v) {
    Mat2 al(Rat(0), Rat(-1), Rat(v.q()), Rat(0));
    return v.translate(al);
}

/// The involution scalar on the Steinberg new line, read off from the model
/// action: the translate must be an exact sign multiple of the new vector.
template <class S>
int atkin_lehner_sign(const Repn<S>& pi) {
    static_assert(num::is_exact_v<S>, "the involution sign is an exact quantity");
    if (!pi.is_steinberg())
        throw UnsupportedOperation("involution sign: level-one representations only");
    InducedVector<S> f = InducedVector<S>::new_vector(pi);
    InducedVector<S> t = atkin_lehner_apply(f);
    if (t == f) return 1;
    if (t == (S(Rat(-1)) * f)) return -1;
    throw InvariantViolation("involution did not act by a sign on the new line");
}

/// Overlap of the spherical new vector with its level raise a(p)-translate,
/// kappa = sqrt(q) lambda / (q+1), and the orthonormal-completion data for
/// the two-dimensional space of K_0(p)-fixed vectors: returns {f, g} with
/// g = (f^raise - kappa f) carrying square-scale 1/(1 - kappa^2).
template <class S>
std::array<InducedVector<S>, 2> k0_basis(const Repn<S>& pi) {
    static_assert(num::is_exact_v<S>, "orthonormalization data is exact");
    if (pi.is_steinberg())
        throw UnsupportedOperation("k0_basis: the Steinberg fixed space is a line");
    const long q = pi.q();
    const S& lam = pi.hecke_eigenvalue();
    S kappa = num::scalar_kind<S>::sqrt_q(q) * lam * S(Rat(1, q + 1));
    S varsigma = S(Rat(1)) - kappa * kappa;
    if (!varsigma.is_rational())
        throw IrrationalResult("k0_basis: 1 - kappa^2 must be rational");
    Rat s2 = varsigma.a;
    if (s2 == 0) throw DegenerateBasis("k0_basis: kappa^2 = 1, the completion collapses");
    if (s2 < 0)
        throw InvariantViolation("k0_basis: |kappa| > 1, no unitary completion");
    InducedVector<S> f = InducedVector<S>::new_vector(pi);
    Mat2 raise(Rat(1), Rat(0), Rat(0), Rat(q));
    InducedVector<S> g = f.translate(raise) - kappa * f;
    g.set_scale2(Rat(1) / s2);
    return {std::move(f), std::move(g)};
}

} // namespace locperiod::induced
