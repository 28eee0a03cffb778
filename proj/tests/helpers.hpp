#pragma once

#include <catch2/catch_amalgamated.hpp>

#include "locperiod/numerics.hpp"

namespace testutil {

using locperiod::num::ApproxScalar;
using locperiod::num::ExactScalar;
using locperiod::num::Rat;

inline Rat rat(long n, long d = 1) { return Rat(n, d); }
inline ExactScalar ex(long n, long d = 1) { return ExactScalar(Rat(n, d)); }

/// |x - target| <= tol, judging the approx value plus its own error radius.
inline bool close_to(const ApproxScalar& x, double target_re, double target_im, double tol) {
    double dre = x.re.to_double() - target_re;
    double dim = x.im.to_double() - target_im;
    return std::sqrt(dre * dre + dim * dim) + x.err <= tol;
}

inline bool close_real(const ApproxScalar& x, double target, double tol) {
    return close_to(x, target, 0.0, tol);
}

inline double residual(const ApproxScalar& x, const ApproxScalar& y) {
    ApproxScalar d = x - y;
    return d.bound_up();
}

} // namespace testutil
