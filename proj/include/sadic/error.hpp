#pragma once

#include <stdexcept>
#include <string>

namespace sadic {

enum class errc {
    precondition,
    non_s_unit_denominator,
    zero_vector,
    tolerance_unreachable,
    dimension_mismatch,
    degenerate_form,
    anisotropic_form,
    precision_exhausted,
    insufficient_padic_precision,
    region_too_large,
    denominator_not_invertible_mod_q,
    not_in_slq,
    not_primitive,
    shift_mismatch,
    invariant_violation,
    search_budget_exceeded,
    not_stabilized,
    method_disagreement,
    family_out_of_range,
    budget_exceeded,
    unsupported_exact_sampler,
    non_indicator_unsupported,
};

inline const char* errc_name(errc c) {
    switch (c) {
        case errc::precondition: return "Precondition";
        case errc::non_s_unit_denominator: return "NonSUnitDenominator";
        case errc::zero_vector: return "ZeroVector";
        case errc::tolerance_unreachable: return "ToleranceUnreachable";
        case errc::dimension_mismatch: return "DimensionMismatch";
        case errc::degenerate_form: return "DegenerateForm";
        case errc::anisotropic_form: return "AnisotropicForm";
        case errc::precision_exhausted: return "PrecisionExhausted";
        case errc::insufficient_padic_precision: return "InsufficientPadicPrecision";
        case errc::region_too_large: return "RegionTooLarge";
        case errc::denominator_not_invertible_mod_q: return "DenominatorNotInvertibleModQ";
        case errc::not_in_slq: return "NotInSLq";
        case errc::not_primitive: return "NotPrimitive";
        case errc::shift_mismatch: return "ShiftMismatch";
        case errc::invariant_violation: return "InvariantViolation";
        case errc::search_budget_exceeded: return "SearchBudgetExceeded";
        case errc::not_stabilized: return "NotStabilized";
        case errc::method_disagreement: return "MethodDisagreement";
        case errc::family_out_of_range: return "FamilyOutOfRange";
        case errc::budget_exceeded: return "BudgetExceeded";
        case errc::unsupported_exact_sampler: return "UnsupportedExactSampler";
        case errc::non_indicator_unsupported: return "NonIndicatorUnsupported";
    }
    return "Unknown";
}

class error : public std::runtime_error {
public:
    error(errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
    errc code() const noexcept { return code_; }
    // budget and tolerance failures map to a distinct CLI exit status
    bool is_budget() const noexcept {
        return code_ == errc::tolerance_unreachable || code_ == errc::region_too_large ||
               code_ == errc::budget_exceeded || code_ == errc::search_budget_exceeded ||
               code_ == errc::not_stabilized || code_ == errc::precision_exhausted ||
               code_ == errc::method_disagreement;
    }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc c, const std::string& what) { throw error(c, what); }

inline void require(bool cond, const std::string& what) {
    if (!cond) fail(errc::precondition, what);
}

}  // namespace sadic
