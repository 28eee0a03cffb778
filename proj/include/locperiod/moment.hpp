#pragma once

#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "periods.hpp"

namespace locperiod::moment {

using num::ApproxScalar;
using num::ExactScalar;
using num::Rat;
using padic::LocalField;
using periods::LocalCase;

// ---------------------------------------------------------------------------
// Spectral data rows
// ---------------------------------------------------------------------------

enum class RowKind { cuspidal, eisenstein_sample };
enum class LUnits { completed, finite };

/// One member of the spectral family, as supplied by the user.  The toolkit
/// recomputes only the local factor at the level prime; every global quantity
/// (central L-value, adjoint residue, archimedean weight) is input data.
///
/// `lambda_p` and `lambda_q` are the Hecke eigenvalues at the two primes of
/// the assembly pair; which one multiplies the term depends on the side.
/// `eta` is the Atkin-Lehner eigenvalue at the level prime of the dataset's
/// side, and `local_type` declares the local situation there.
struct SpectralDatum {
    std::string id;
    RowKind kind = RowKind::cuspidal;
    Rat lambda_p;
    Rat lambda_q;
    int eta = 1;
    Rat L_central;
    LUnits L_units = LUnits::completed;
    Rat adjoint_Lstar;
    Rat f_inf;
    Rat quadrature_weight;
    std::optional<LocalCase> local_type;
};

struct Dataset {
    std::string field_label;
    std::vector<SpectralDatum> rows;
};

// ---------------------------------------------------------------------------
// JSON schema
//
// Top level: {"field_label": string, "rows": [row...]}.  All real numbers are
// decimal strings so that parsing is exact; unknown keys are rejected with
// the offending path.  `local_type` may be omitted (the row then fails at
// assembly time, not at load time).
// ---------------------------------------------------------------------------

namespace detail {

using json = nlohmann::ordered_json;

[[noreturn]] inline void schema_fail(const std::string& path, const std::string& what) {
    throw SchemaViolation(path + ": " + what);
}

inline const json& member(const json& obj, const std::string& path, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) schema_fail(path, std::string("missing key '") + key + "'");
    return *it;
}

inline std::string string_member(const json& obj, const std::string& path, const char* key) {
    const json& v = member(obj, path, key);
    if (!v.is_string()) schema_fail(path + "." + key, "expected a string");
    return v.get<std::string>();
}

inline Rat real_member(const json& obj, const std::string& path, const char* key) {
    const json& v = member(obj, path, key);
    if (!v.is_string())
        schema_fail(path + "." + key, "reals must be decimal strings, e.g. \"1.25\"");
    try {
        return num::parse_decimal_rational(v.get<std::string>());
    } catch (const SchemaViolation& e) {
        schema_fail(path + "." + key, e.what());
    }
}

inline void check_keys(const json& obj, const std::string& path,
                       std::initializer_list<const char*> allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed) ok = ok || (it.key() == k);
        if (!ok) schema_fail(path, "unknown key '" + it.key() + "'");
    }
}

inline SpectralDatum parse_row(const json& row, const std::string& path) {
    if (!row.is_object()) schema_fail(path, "expected an object");
    check_keys(row, path,
               {"id", "kind", "lambda_p", "lambda_q", "eta", "L_central", "L_units",
                "adjoint_Lstar", "f_inf", "quadrature_weight", "local_type"});

    SpectralDatum d;
    d.id = string_member(row, path, "id");

    std::string kind = string_member(row, path, "kind");
    if (kind == "cuspidal")
        d.kind = RowKind::cuspidal;
    else if (kind == "eisenstein-sample")
        d.kind = RowKind::eisenstein_sample;
    else
        schema_fail(path + ".kind", "expected \"cuspidal\" or \"eisenstein-sample\"");

    d.lambda_p = real_member(row, path, "lambda_p");
    d.lambda_q = real_member(row, path, "lambda_q");

    const json& eta = member(row, path, "eta");
    if (!eta.is_number_integer()) schema_fail(path + ".eta", "expected an integer");
    d.eta = eta.get<int>();
    if (d.eta != 1 && d.eta != -1)
        throw InvariantViolation(path + ".eta: Atkin-Lehner eigenvalue must be +1 or -1");

    d.L_central = real_member(row, path, "L_central");
    if (d.L_central < 0)
        throw InvariantViolation(path + ".L_central: central value must be non-negative");

    std::string units = string_member(row, path, "L_units");
    if (units == "completed")
        d.L_units = LUnits::completed;
    else if (units == "finite")
        d.L_units = LUnits::finite;
    else
        schema_fail(path + ".L_units", "expected \"completed\" or \"finite\"");

    d.adjoint_Lstar = real_member(row, path, "adjoint_Lstar");
    if (!(d.adjoint_Lstar > 0))
        throw InvariantViolation(path + ".adjoint_Lstar: adjoint residue must be positive");

    d.f_inf = real_member(row, path, "f_inf");
    if (d.f_inf < 0)
        throw InvariantViolation(path + ".f_inf: archimedean weight must be non-negative");

    d.quadrature_weight = real_member(row, path, "quadrature_weight");

    if (row.contains("local_type")) {
        std::string lt = string_member(row, path, "local_type");
        if (lt == "away")
            d.local_type = LocalCase::away;
        else if (lt == "unramified")
            d.local_type = LocalCase::unramified_at_level;
        else if (lt == "steinberg")
            d.local_type = LocalCase::steinberg_at_level;
        else
            schema_fail(path + ".local_type",
                        "expected \"away\", \"unramified\" or \"steinberg\"");
    }
    return d;
}

}  // namespace detail

inline Dataset parse_spectral_data(const nlohmann::ordered_json& doc) {
    if (!doc.is_object()) detail::schema_fail("$", "expected a top-level object");
    detail::check_keys(doc, "$", {"field_label", "rows"});
    Dataset ds;
    ds.field_label = detail::string_member(doc, "$", "field_label");
    const auto& rows = detail::member(doc, "$", "rows");
    if (!rows.is_array()) detail::schema_fail("$.rows", "expected an array");
    ds.rows.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
        ds.rows.push_back(detail::parse_row(rows[i], "rows[" + std::to_string(i) + "]"));
    return ds;
}

inline Dataset load_spectral_data(std::istream& in) {
    nlohmann::ordered_json doc;
    try {
        doc = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaViolation(std::string("not valid JSON: ") + e.what());
    }
    return parse_spectral_data(doc);
}

inline Dataset load_spectral_data_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaViolation("cannot open '" + path + "'");
    return load_spectral_data(in);
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

/// Which of the two primes carries the level (where eta, the basis sum and
/// the local factor live); the other prime carries the Hecke eigenvalue and
/// the global prefactor sqrt(p)/(p+1).
enum class Side { qp, pq };

inline const char* side_name(Side s) { return s == Side::qp ? "qp" : "pq"; }

struct AssemblySpec {
    long p = 2;
    long q = 3;
    Side side = Side::qp;  // qp: level at q, Hecke at p.  pq: the swap.
    Rat case_constant{1};  // caller-chosen case constant C; recorded, not derived
    Rat lambda1;           // Hecke eigenvalue of pi_1 at the level prime
    Rat lambda2;           // Hecke eigenvalue of pi_2 at the level prime
    double tol = 1e-8;     // tolerance for the Steinberg integral cross-check
    bool recompute_steinberg = true;  // run the certified integral per Steinberg row
    periods::PlanOptions plan{};

    long level_prime() const { return side == Side::qp ? q : p; }
    long hecke_prime() const { return side == Side::qp ? p : q; }
};

struct MomentTerm {
    std::string id;
    RowKind kind = RowKind::cuspidal;
    LocalCase local_type = LocalCase::away;
    ExactScalar local_factor;
    std::optional<bool> steinberg_integral_ok;
    ExactScalar value;  // contribution before the global prefactor
};

struct MomentReport {
    std::string field_label;
    long level_prime = 0;
    long hecke_prime = 0;
    Side side = Side::qp;
    Rat case_constant{1};
    Rat lambda1;
    Rat lambda2;
    std::vector<MomentTerm> terms;
    ExactScalar cuspidal_subtotal;    // exact in Q(sqrt(level prime))
    ExactScalar continuous_subtotal;  // exact in Q(sqrt(level prime))
    ExactScalar prefactor;            // sqrt(p)/(p+1), exact in Q(sqrt(hecke prime))
    ApproxScalar total;               // prefactor x (cuspidal + continuous)
};

namespace detail {

inline bool is_prime(long n) {
    if (n < 2) return false;
    for (long d = 2; d * d <= n; ++d)
        if (n % d == 0) return false;
    return true;
}

/// Local factor at the level prime from the row's declared situation.
/// Unramified rows get the exact basis-sum constant; Steinberg rows get the
/// exact closed form 1/(q+1), optionally cross-checked against the certified
/// integral so a drifting implementation cannot silently ship terms.
inline ExactScalar local_factor(const SpectralDatum& row, const AssemblySpec& spec,
                                const Rat& lambda_level, std::optional<bool>& integral_ok) {
    const long q = spec.level_prime();
    switch (*row.local_type) {
        case LocalCase::away:
            return ExactScalar(Rat(1));
        case LocalCase::unramified_at_level: {
            if (row.eta != 1)
                throw InvariantViolation("row '" + row.id +
                                         "': eta must be +1 when unramified at the level prime");
            auto rep = periods::local_ell_unramified(q, lambda_level, spec.lambda1, spec.lambda2);
            return *rep.kappa_basis;
        }
        case LocalCase::steinberg_at_level: {
            if (row.kind == RowKind::eisenstein_sample)
                throw InvariantViolation("row '" + row.id +
                                         "': an Eisenstein sample is unramified everywhere and "
                                         "cannot be steinberg at the level prime");
            Rat closed = Rat(1, q + 1);
            if (spec.recompute_steinberg) {
                LocalField F(q);
                int chi = -row.eta;  // eta = -chi for the special representation
                auto rep = periods::local_ell_steinberg<ExactScalar>(
                    F, chi, spec.lambda1, spec.lambda2, spec.tol, spec.plan);
                integral_ok = rep.matches_closed_form;
                if (!*integral_ok)
                    throw InvariantViolation(
                        "row '" + row.id +
                        "': certified Steinberg integral disagrees with the closed form");
            }
            return ExactScalar(closed);
        }
    }
    throw InvariantViolation("unreachable local case");
}

}  // namespace detail

/// Assemble one side of the reciprocity moment.  Each term is
///
///   C lambda(hecke prime) eta L_central f_inf ell(level prime)
///     / adjoint_Lstar x quadrature_weight,
///
/// summed exactly per kind; the global prefactor sqrt(p)/(p+1) at the Hecke
/// prime is kept exact and separate, and only the final total mixes the two
/// quadratic fields (at working precision, with a certified error radius).
inline MomentReport assemble_moment(const Dataset& ds, const AssemblySpec& spec) {
    if (!detail::is_prime(spec.p) || !detail::is_prime(spec.q) || spec.p == spec.q)
        throw InvariantViolation("assembly needs two distinct primes");

    MomentReport rep;
    rep.field_label = ds.field_label;
    rep.level_prime = spec.level_prime();
    rep.hecke_prime = spec.hecke_prime();
    rep.side = spec.side;
    rep.case_constant = spec.case_constant;
    rep.lambda1 = spec.lambda1;
    rep.lambda2 = spec.lambda2;

    rep.cuspidal_subtotal = ExactScalar(Rat(0));
    rep.continuous_subtotal = ExactScalar(Rat(0));

    for (const SpectralDatum& row : ds.rows) {
        if (!row.local_type)
            throw MissingLocalType("row '" + row.id +
                                   "' declares no local type at the level prime");

        const Rat& lambda_hecke = spec.side == Side::qp ? row.lambda_p : row.lambda_q;
        const Rat& lambda_level = spec.side == Side::qp ? row.lambda_q : row.lambda_p;

        MomentTerm term;
        term.id = row.id;
        term.kind = row.kind;
        term.local_type = *row.local_type;
        term.local_factor =
            detail::local_factor(row, spec, lambda_level, term.steinberg_integral_ok);

        Rat scalar = spec.case_constant * lambda_hecke * Rat(row.eta) * row.L_central *
                     row.f_inf * row.quadrature_weight / row.adjoint_Lstar;
        term.value = ExactScalar(scalar) * term.local_factor;

        if (row.kind == RowKind::cuspidal)
            rep.cuspidal_subtotal += term.value;
        else
            rep.continuous_subtotal += term.value;
        rep.terms.push_back(std::move(term));
    }

    const long p = rep.hecke_prime;
    rep.prefactor = ExactScalar(Rat(0), Rat(1, p + 1), p);
    rep.total = num::to_approx(rep.prefactor) *
                num::to_approx(rep.cuspidal_subtotal + rep.continuous_subtotal);
    return rep;
}

// ---------------------------------------------------------------------------
// Two-sided comparison
// ---------------------------------------------------------------------------

/// Both sides of the reciprocity relation, their difference reported but not
/// asserted: whether the two totals agree depends on the completeness of the
/// user's spectral data, which the toolkit cannot judge.
struct ReciprocityReport {
    MomentReport side_qp;
    MomentReport side_pq;
    ApproxScalar difference;
};

inline ReciprocityReport reciprocity_report(const Dataset& data_qp, const Dataset& data_pq,
                                            const AssemblySpec& spec_qp,
                                            const AssemblySpec& spec_pq) {
    if (spec_qp.side != Side::qp || spec_pq.side != Side::pq)
        throw InvariantViolation("reciprocity_report wants one spec per side, in order");
    if (spec_qp.p != spec_pq.p || spec_qp.q != spec_pq.q)
        throw InvariantViolation("the two sides must share the same prime pair");
    ReciprocityReport rep{assemble_moment(data_qp, spec_qp), assemble_moment(data_pq, spec_pq),
                          ApproxScalar()};
    rep.difference = rep.side_qp.total - rep.side_pq.total;
    return rep;
}

// ---------------------------------------------------------------------------
// Report serialization (deterministic; used for golden regressions)
// ---------------------------------------------------------------------------

namespace detail {

inline std::string double_str(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline json exact_json(const ExactScalar& x) {
    json j = json::object();
    j["exact"] = x.str();
    j["decimal"] = num::to_approx(x).re.str(30);
    return j;
}

inline json approx_json(const ApproxScalar& x) {
    json j = json::object();
    j["re"] = x.re.str(30);
    j["im"] = x.im.str(30);
    j["err"] = double_str(x.err);
    return j;
}

inline const char* kind_name(RowKind k) {
    return k == RowKind::cuspidal ? "cuspidal" : "eisenstein-sample";
}

inline const char* case_name(LocalCase c) {
    switch (c) {
        case LocalCase::away: return "away";
        case LocalCase::unramified_at_level: return "unramified";
        case LocalCase::steinberg_at_level: return "steinberg";
    }
    return "?";
}

}  // namespace detail

inline nlohmann::ordered_json moment_report_json(const MomentReport& rep) {
    using detail::json;
    json j = json::object();
    j["schema"] = "1";
    j["report"] = "moment-assembly";
    j["field_label"] = rep.field_label;
    j["side"] = side_name(rep.side);
    j["level_prime"] = rep.level_prime;
    j["hecke_prime"] = rep.hecke_prime;
    j["case_constant"] = num::format_rat(rep.case_constant);
    j["lambda1"] = num::format_rat(rep.lambda1);
    j["lambda2"] = num::format_rat(rep.lambda2);
    json terms = json::array();
    for (const MomentTerm& t : rep.terms) {
        json row = json::object();
        row["id"] = t.id;
        row["kind"] = detail::kind_name(t.kind);
        row["local_type"] = detail::case_name(t.local_type);
        row["local_factor"] = detail::exact_json(t.local_factor);
        if (t.steinberg_integral_ok) row["steinberg_integral_ok"] = *t.steinberg_integral_ok;
        row["term"] = detail::exact_json(t.value);
        terms.push_back(std::move(row));
    }
    j["terms"] = std::move(terms);
    j["cuspidal_subtotal"] = detail::exact_json(rep.cuspidal_subtotal);
    j["continuous_subtotal"] = detail::exact_json(rep.continuous_subtotal);
    j["prefactor"] = detail::exact_json(rep.prefactor);
    j["total"] = detail::approx_json(rep.total);
    return j;
}

inline nlohmann::ordered_json reciprocity_report_json(const ReciprocityReport& rep) {
    using detail::json;
    json j = json::object();
    j["schema"] = "1";
    j["report"] = "reciprocity-comparison";
    j["side_qp"] = moment_report_json(rep.side_qp);
    j["side_pq"] = moment_report_json(rep.side_pq);
    j["difference"] = detail::approx_json(rep.difference);
    j["note"] = "equality of the two totals depends on the completeness of the input spectra";
    return j;
}

}  // namespace locperiod::moment
