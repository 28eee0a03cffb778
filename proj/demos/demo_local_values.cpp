// Walk through the local quantities the library computes: the raising
// pairing, the special-representation constant with its certified error,
// and one normalized unramified triple integral.

#include <cstdio>

#include "locperiod/periods.hpp"

using namespace locperiod;
using induced::InducedVector;
using num::ApproxScalar;
using num::ExactScalar;
using num::Rat;
using padic::LocalField;
using repn::Repn;

int main() {
    std::printf("raising pairing kappa = sqrt(q) lambda / (q+1), exact:\n");
    for (long q : {2L, 3L}) {
        for (Rat lam : {Rat(0), Rat(1), Rat(1, 2)}) {
            ExactScalar k = periods::kappa_pi(q, lam);
            std::printf("  q = %ld, lambda = %-4s ->  %s\n", q,
                        num::format_rat(lam).c_str(), k.str().c_str());
        }
    }

    std::printf("\nspecial-representation constant, integral vs 1/(q+1):\n");
    for (long q : {2L, 3L, 5L}) {
        LocalField F(q);
        auto rep = periods::local_ell_steinberg<ExactScalar>(F, 1, Rat(1, 2), Rat(-1, 4));
        std::printf("  q = %ld:  %s  (expected %s, match: %s)\n", q,
                    rep.value.str(12).c_str(),
                    num::format_rat(Rat(1, q + 1)).c_str(),
                    rep.matches_closed_form.value_or(false) ? "yes" : "no");
    }

    std::printf("\nnormalized triple integral on unramified new vectors (= 1):\n");
    LocalField F(3);
    auto pi1 = Repn<ExactScalar>::unramified_from_lambda(F, ExactScalar(Rat(1)));
    auto pi2 = Repn<ExactScalar>::unramified_from_lambda(F, ExactScalar(Rat(-1, 2)));
    auto pi3 = Repn<ExactScalar>::unramified_from_alpha(F, ExactScalar(Rat(3, 4)));
    auto v1 = InducedVector<ExactScalar>::new_vector(pi1);
    auto v2 = InducedVector<ExactScalar>::new_vector(pi2);
    auto v3 = InducedVector<ExactScalar>::new_vector(pi3);
    ApproxScalar iv = periods::normalized_Iv(F, pi1, v1, pi2, v2, pi3, v3);
    std::printf("  q = 3, lambda = (1, -1/2, alpha 3/4):  %s\n", iv.str(12).c_str());

    std::printf("\npairing constant for the moment's level factor:\n");
    ExactScalar kc = periods::kappa_constant(3, Rat(0), Rat(1, 2), Rat(-1, 4));
    std::printf("  kappa(3, 0, 1/2, -1/4) = %s\n", kc.str().c_str());
    return 0;
}
