#pragma once

#include <stdexcept>
#include <string>

namespace locperiod {

/// Base class for all typed failures raised by the toolkit.  The `code()`
/// string is stable and machine-readable; CLI reports echo it verbatim.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& what)
        : std::runtime_error(code + ": " + what), code_(std::move(code)) {}
    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

#define LOCPERIOD_DEFINE_ERROR(NAME)                                   \
    class NAME : public Error {                                        \
    public:                                                            \
        explicit NAME(const std::string& what) : Error(#NAME, what) {} \
    }

LOCPERIOD_DEFINE_ERROR(DivisionByZero);
LOCPERIOD_DEFINE_ERROR(MixedRadicand);
LOCPERIOD_DEFINE_ERROR(PrecisionUnderflow);
LOCPERIOD_DEFINE_ERROR(IrrationalResult);
LOCPERIOD_DEFINE_ERROR(NotIntegral);
LOCPERIOD_DEFINE_ERROR(SingularMatrix);
LOCPERIOD_DEFINE_ERROR(NonUnitaryParameter);
LOCPERIOD_DEFINE_ERROR(SteinbergHasNoSphericalEigenvalue);
LOCPERIOD_DEFINE_ERROR(PoleAtEvaluationPoint);
LOCPERIOD_DEFINE_ERROR(NonconvergentIntegral);
LOCPERIOD_DEFINE_ERROR(TailBoundUnavailable);
LOCPERIOD_DEFINE_ERROR(DegenerateBasis);
LOCPERIOD_DEFINE_ERROR(InvariantViolation);
LOCPERIOD_DEFINE_ERROR(SchemaViolation);
LOCPERIOD_DEFINE_ERROR(MissingLocalType);
LOCPERIOD_DEFINE_ERROR(UnsupportedOperation);

#undef LOCPERIOD_DEFINE_ERROR

/// Internal consistency check; failures indicate a bug, not bad input.
inline void require(bool cond, const char* what) {
    if (!cond) throw InvariantViolation(what);
}

} // namespace locperiod
