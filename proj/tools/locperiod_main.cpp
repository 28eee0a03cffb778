// Command-line surface: verification suites, local computations and moment
// assembly with machine-readable JSON reports.
//
// Exit codes: 0 all checks passed, 1 a verification failed, 2 usage or
// schema error (including typed toolkit errors surfaced to the user).

#include <array>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "locperiod/moment.hpp"

using namespace locperiod;
using num::ApproxScalar;
using num::ExactScalar;
using num::Rat;
using padic::LocalField;
using padic::Mat2;
using nlohmann::ordered_json;

namespace {

struct RunConfig {
    long precision = 128;
    long radius = -1;  // -1: size the radius from the certified tail target
    double tol = 1e-8;
    std::string backend = "exact";
    std::string output;
};

void add_common(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--precision", cfg.precision, "working precision in bits (>= 53)")
        ->capture_default_str();
    cmd->add_option("--radius", cfg.radius,
                    "truncation radius; -1 sizes it from the certified tail target")
        ->capture_default_str();
    cmd->add_option("--tol", cfg.tol, "verification tolerance")->capture_default_str();
    cmd->add_option("--backend", cfg.backend, "scalar backend: exact or approx")
        ->check(CLI::IsMember({"exact", "approx"}))
        ->capture_default_str();
    cmd->add_option("--output", cfg.output, "write the report here instead of stdout");
}

periods::PlanOptions plan_of(const RunConfig& cfg) {
    periods::PlanOptions opt;
    opt.forced_radius = cfg.radius >= 0 ? cfg.radius : -1;
    return opt;
}

ordered_json config_json(const RunConfig& cfg) {
    ordered_json j = ordered_json::object();
    j["precision"] = cfg.precision;
    j["radius"] = cfg.radius;
    j["tol"] = moment::detail::double_str(cfg.tol);
    j["backend"] = cfg.backend;
    return j;
}

ordered_json report_shell(const char* command, const RunConfig& cfg) {
    ordered_json j = ordered_json::object();
    j["schema"] = "1";
    j["command"] = command;
    j["config"] = config_json(cfg);
    return j;
}

ordered_json identity_json(const periods::IdentityReport& rep) {
    ordered_json j = ordered_json::object();
    j["identity"] = rep.identity;
    j["instance"] = rep.instance;
    j["lhs"] = moment::detail::approx_json(rep.lhs);
    j["rhs"] = moment::detail::approx_json(rep.rhs);
    j["residual"] = moment::detail::double_str(rep.residual);
    j["allowance"] = moment::detail::double_str(rep.allowance);
    j["pass"] = rep.pass;
    return j;
}

void emit(const ordered_json& j, const RunConfig& cfg) {
    std::string text = j.dump(2) + "\n";
    if (cfg.output.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(cfg.output, std::ios::binary);
    if (!out) throw SchemaViolation("cannot open output file '" + cfg.output + "'");
    out << text;
}

Rat parse_real(const std::string& s, const char* flag) {
    try {
        return num::parse_decimal_rational(s);
    } catch (const SchemaViolation&) {
        throw SchemaViolation(std::string(flag) + ": expected a decimal number, got '" + s + "'");
    }
}

void require_exact(const RunConfig& cfg, const std::string& command) {
    if (cfg.backend != "exact")
        throw UnsupportedOperation(command + " is defined in the exact backend only");
}

// Three unramified representations from either --alpha or --lambda flags.
struct TripleFlags {
    std::string alpha[3];
    std::string lambda[3] = {"0", "0", "0"};
    bool alpha_given[3] = {false, false, false};
};

template <class S>
std::array<repn::Repn<S>, 3> build_triple(const LocalField& F, const TripleFlags& t) {
    auto one = [&](int i) {
        if (t.alpha_given[i]) {
            Rat a = parse_real(t.alpha[i], "--alpha");
            return repn::Repn<S>::unramified_from_alpha(F, S(a));
        }
        Rat l = parse_real(t.lambda[i], "--lambda");
        return repn::Repn<S>::unramified_from_lambda(F, S(l));
    };
    return {one(0), one(1), one(2)};
}

void add_triple_flags(CLI::App* cmd, TripleFlags& t) {
    for (int i = 0; i < 3; ++i) {
        std::string ai = "--alpha" + std::to_string(i + 1);
        std::string li = "--lambda" + std::to_string(i + 1);
        auto* oa = cmd->add_option(ai, t.alpha[i], "Satake parameter of slot " +
                                                       std::to_string(i + 1));
        auto* ol = cmd->add_option(li, t.lambda[i], "Hecke eigenvalue of slot " +
                                                        std::to_string(i + 1));
        oa->excludes(ol);
    }
}

ordered_json triple_inputs(long q, const TripleFlags& t) {
    ordered_json j = ordered_json::object();
    j["q"] = q;
    for (int i = 0; i < 3; ++i) {
        std::string slot = std::to_string(i + 1);
        if (t.alpha_given[i])
            j["alpha" + slot] = t.alpha[i];
        else
            j["lambda" + slot] = t.lambda[i];
    }
    return j;
}

// ---------------------------------------------------------------------------
// verify fact / compute iv: the normalized unramified triple integral
// ---------------------------------------------------------------------------

template <class S>
ApproxScalar run_iv(const LocalField& F, const TripleFlags& t, const RunConfig& cfg) {
    auto pis = build_triple<S>(F, t);
    auto phi1 = induced::InducedVector<S>::new_vector(pis[0]);
    auto phi2 = induced::InducedVector<S>::new_vector(pis[1]);
    auto phi3 = induced::InducedVector<S>::new_vector(pis[2]);
    return periods::normalized_Iv(F, pis[0], phi1, pis[1], phi2, pis[2], phi3, plan_of(cfg));
}

int verify_fact(long q, const TripleFlags& t, const RunConfig& cfg) {
    LocalField F(q);
    ApproxScalar value = cfg.backend == "exact" ? run_iv<ExactScalar>(F, t, cfg)
                                                : run_iv<ApproxScalar>(F, t, cfg);
    ApproxScalar diff = value - num::to_approx(ExactScalar(Rat(1)));
    bool pass = diff.mag_up() <= cfg.tol + diff.err;

    ordered_json j = report_shell("verify fact", cfg);
    j["inputs"] = triple_inputs(q, t);
    j["value"] = moment::detail::approx_json(value);
    j["error_bound"] = moment::detail::double_str(value.err);
    j["expected"] = "1";
    j["pass"] = pass;
    emit(j, cfg);
    return pass ? 0 : 1;
}

int compute_iv(long q, const TripleFlags& t, const RunConfig& cfg) {
    LocalField F(q);
    ApproxScalar value = cfg.backend == "exact" ? run_iv<ExactScalar>(F, t, cfg)
                                                : run_iv<ApproxScalar>(F, t, cfg);
    ordered_json j = report_shell("compute iv", cfg);
    j["inputs"] = triple_inputs(q, t);
    j["value"] = moment::detail::approx_json(value);
    j["error_bound"] = moment::detail::double_str(value.err);
    j["expected"] = nullptr;
    j["pass"] = true;
    emit(j, cfg);
    return 0;
}

// ---------------------------------------------------------------------------
// verify steinberg / compute ellv
// ---------------------------------------------------------------------------

int verify_steinberg(long q, int chi, const std::string& l1, const std::string& l2,
                     const RunConfig& cfg) {
    LocalField F(q);
    Rat lam1 = parse_real(l1, "--lambda1"), lam2 = parse_real(l2, "--lambda2");
    auto run = [&](auto tag) {
        using S = decltype(tag);
        return periods::local_ell_steinberg<S>(F, chi, lam1, lam2, cfg.tol, plan_of(cfg));
    };
    periods::LocalEllReport rep =
        cfg.backend == "exact" ? run(ExactScalar{Rat(0)}) : run(ApproxScalar{});

    ordered_json j = report_shell("verify steinberg", cfg);
    j["inputs"] = {{"q", q}, {"chi", chi}, {"lambda1", l1}, {"lambda2", l2}};
    j["value"] = moment::detail::approx_json(rep.value);
    j["error_bound"] = moment::detail::double_str(rep.value.err);
    j["expected"] = num::format_rat(Rat(1, q + 1));
    j["pass"] = rep.matches_closed_form.value_or(false);
    emit(j, cfg);
    return j["pass"].get<bool>() ? 0 : 1;
}

int compute_ellv(long q, const std::string& kase, int chi, const std::string& l,
                 const std::string& l1, const std::string& l2, const RunConfig& cfg) {
    ordered_json j = report_shell("compute ellv", cfg);
    j["inputs"] = {{"q", q},        {"case", kase},  {"chi", chi},
                   {"lambda", l},   {"lambda1", l1}, {"lambda2", l2}};
    bool pass = true;
    if (kase == "away") {
        j["value"] = moment::detail::exact_json(ExactScalar(Rat(1)));
        j["expected"] = "1";
    } else if (kase == "unramified") {
        auto rep = periods::local_ell_unramified(q, parse_real(l, "--lambda"),
                                                 parse_real(l1, "--lambda1"),
                                                 parse_real(l2, "--lambda2"));
        j["value"] = moment::detail::exact_json(*rep.kappa_basis);
        j["pairing_constant"] = moment::detail::exact_json(*rep.kappa_pairing);
        j["expected"] = nullptr;
    } else {  // steinberg
        require_exact(cfg, "compute ellv --case steinberg");
        auto rep = periods::local_ell_steinberg<ExactScalar>(
            LocalField(q), chi, parse_real(l1, "--lambda1"), parse_real(l2, "--lambda2"),
            cfg.tol, plan_of(cfg));
        j["value"] = moment::detail::approx_json(rep.value);
        j["error_bound"] = moment::detail::double_str(rep.value.err);
        j["expected"] = num::format_rat(Rat(1, q + 1));
        pass = rep.matches_closed_form.value_or(false);
    }
    j["pass"] = pass;
    emit(j, cfg);
    return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// verify kappa: the raising pairing against its closed form, exactly
// ---------------------------------------------------------------------------

int verify_kappa(long q, const std::string& l, bool allow_nonunitary, const RunConfig& cfg) {
    require_exact(cfg, "verify kappa");
    LocalField F(q);
    Rat lam = parse_real(l, "--lambda");
    auto pi = repn::Repn<ExactScalar>::unramified_from_lambda(F, ExactScalar(lam),
                                                              allow_nonunitary);
    auto phi = induced::InducedVector<ExactScalar>::new_vector(pi);
    auto raised = phi.translate(Mat2::diag(Rat(1), Rat(q)));
    ExactScalar pairing = whittaker::theta_inner(raised, phi);
    ExactScalar expected = periods::kappa_pi(q, lam);
    bool pass = pairing == expected;

    ordered_json j = report_shell("verify kappa", cfg);
    j["inputs"] = {{"q", q}, {"lambda", l}, {"allow_nonunitary", allow_nonunitary}};
    j["value"] = moment::detail::exact_json(pairing);
    j["error_bound"] = "0";
    j["expected"] = expected.str();
    j["pass"] = pass;
    emit(j, cfg);
    return pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// verify true / hecke / atkin: identity suites from the periods module
// ---------------------------------------------------------------------------

int verify_identity(const char* which, long q, int chi, const std::string& l,
                    const std::string& l1, const std::string& l2, const RunConfig& cfg) {
    require_exact(cfg, std::string("verify ") + which);
    LocalField F(q);
    Rat lam1 = parse_real(l1, "--lambda1"), lam2 = parse_real(l2, "--lambda2");
    periods::IdentityReport rep;
    ordered_json inputs = {{"q", q}, {"lambda1", l1}, {"lambda2", l2}};
    std::string name = which;
    if (name == "true") {
        rep = periods::verify_true_identity<ExactScalar>(F, parse_real(l, "--lambda"), lam1,
                                                         lam2, cfg.tol, plan_of(cfg));
        inputs["lambda"] = l;
    } else if (name == "hecke") {
        rep = periods::verify_prop_hecke<ExactScalar>(F, parse_real(l, "--lambda"), lam1, lam2,
                                                      cfg.tol, plan_of(cfg));
        inputs["lambda"] = l;
    } else {
        rep = periods::verify_prop_atkin<ExactScalar>(F, chi, lam1, lam2, cfg.tol, plan_of(cfg));
        inputs["chi"] = chi;
    }

    ordered_json j = report_shell(("verify " + name).c_str(), cfg);
    j["inputs"] = inputs;
    j["values"] = identity_json(rep);
    j["error_bound"] = moment::detail::double_str(rep.lhs.err + rep.rhs.err);
    j["expected"] = "lhs = rhs";
    j["pass"] = rep.pass;
    emit(j, cfg);
    return rep.pass ? 0 : 1;
}

// ---------------------------------------------------------------------------
// moment assemble / compare
// ---------------------------------------------------------------------------

struct MomentFlags {
    std::string input, input_pq;
    long p = 2, q = 3;
    std::string side = "qp";
    std::string case_constant = "1";
    std::string lambda1 = "0", lambda2 = "0";
    std::string lambda1_pq = "0", lambda2_pq = "0";
    bool skip_integral = false;
};

moment::AssemblySpec spec_of(const MomentFlags& mf, const RunConfig& cfg, bool pq_side) {
    moment::AssemblySpec spec;
    spec.p = mf.p;
    spec.q = mf.q;
    spec.side = pq_side ? moment::Side::pq : moment::Side::qp;
    spec.case_constant = parse_real(mf.case_constant, "--case-constant");
    spec.lambda1 = parse_real(pq_side ? mf.lambda1_pq : mf.lambda1, "--lambda1");
    spec.lambda2 = parse_real(pq_side ? mf.lambda2_pq : mf.lambda2, "--lambda2");
    spec.tol = cfg.tol;
    spec.recompute_steinberg = !mf.skip_integral;
    spec.plan = plan_of(cfg);
    return spec;
}

int moment_assemble(const MomentFlags& mf, const RunConfig& cfg) {
    require_exact(cfg, "moment assemble");
    auto ds = moment::load_spectral_data_file(mf.input);
    auto rep = moment::assemble_moment(ds, spec_of(mf, cfg, mf.side == "pq"));
    ordered_json j = report_shell("moment assemble", cfg);
    j["inputs"] = {{"input", mf.input}, {"p", mf.p}, {"q", mf.q}, {"side", mf.side}};
    j["moment_report"] = moment::moment_report_json(rep);
    j["pass"] = true;
    emit(j, cfg);
    return 0;
}

int moment_compare(const MomentFlags& mf, const RunConfig& cfg) {
    require_exact(cfg, "moment compare");
    auto ds_qp = moment::load_spectral_data_file(mf.input);
    auto ds_pq = moment::load_spectral_data_file(mf.input_pq);
    auto rep = moment::reciprocity_report(ds_qp, ds_pq, spec_of(mf, cfg, false),
                                          spec_of(mf, cfg, true));
    ordered_json j = report_shell("moment compare", cfg);
    j["inputs"] = {{"input_qp", mf.input}, {"input_pq", mf.input_pq}, {"p", mf.p}, {"q", mf.q}};
    j["comparison"] = moment::reciprocity_report_json(rep);
    j["pass"] = true;
    emit(j, cfg);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"exact and error-bounded local periods for GL(2) over p-adic fields"};
    app.require_subcommand(1);

    RunConfig cfg;
    long q = 2;
    int chi = 1;
    std::string lambda = "0", lambda1 = "0", lambda2 = "0";
    TripleFlags triple;
    MomentFlags mf;
    bool allow_nonunitary = false;
    std::string ellv_case = "steinberg";

    std::function<int()> action;

    auto* verify = app.add_subcommand("verify", "check one of the proved local identities");
    auto* compute = app.add_subcommand("compute", "evaluate a local quantity");
    auto* momentc = app.add_subcommand("moment", "assemble or compare reciprocity moments");
    verify->require_subcommand(1);
    compute->require_subcommand(1);
    momentc->require_subcommand(1);

    auto add_q = [&](CLI::App* cmd) {
        cmd->add_option("--q", q, "residue field size (a prime)")->capture_default_str();
    };
    auto add_chi = [&](CLI::App* cmd) {
        cmd->add_option("--chi", chi, "Steinberg twist sign, +1 or -1")
            ->check(CLI::IsMember({1, -1}))
            ->capture_default_str();
    };
    auto add_l12 = [&](CLI::App* cmd) {
        cmd->add_option("--lambda1", lambda1, "Hecke eigenvalue of pi_1")->capture_default_str();
        cmd->add_option("--lambda2", lambda2, "Hecke eigenvalue of pi_2")->capture_default_str();
    };

    {
        auto* c = verify->add_subcommand("fact", "normalized unramified triple integral = 1");
        add_q(c);
        add_triple_flags(c, triple);
        add_common(c, cfg);
        c->callback([&, c] {
            for (int i = 0; i < 3; ++i)
                triple.alpha_given[i] = c->count("--alpha" + std::to_string(i + 1)) > 0;
            action = [&] { return verify_fact(q, triple, cfg); };
        });
    }
    {
        auto* c = verify->add_subcommand("steinberg",
                                         "special-representation constant zeta(1)/zeta(2) q/(q+1)^2");
        add_q(c);
        add_chi(c);
        add_l12(c);
        add_common(c, cfg);
        c->callback([&] { action = [&] { return verify_steinberg(q, chi, lambda1, lambda2, cfg); }; });
    }
    {
        auto* c = verify->add_subcommand("kappa", "raising pairing = sqrt(q) lambda/(q+1), exactly");
        add_q(c);
        c->add_option("--lambda", lambda, "Hecke eigenvalue")->capture_default_str();
        c->add_flag("--allow-nonunitary", allow_nonunitary,
                    "admit parameters outside the unitary window");
        add_common(c, cfg);
        c->callback([&] { action = [&] { return verify_kappa(q, lambda, allow_nonunitary, cfg); }; });
    }
    for (const char* name : {"true", "hecke", "atkin"}) {
        const char* blurb = name[0] == 't'   ? "two-term basis identity for the raised pairing sum"
                            : name[0] == 'h' ? "one-place Hecke relation for the trilinear form"
                                             : "Atkin-Lehner transfer between raised slots";
        auto* c = verify->add_subcommand(name, blurb);
        add_q(c);
        if (name[0] == 'a')
            add_chi(c);
        else
            c->add_option("--lambda", lambda, "Hecke eigenvalue of pi")->capture_default_str();
        add_l12(c);
        add_common(c, cfg);
        c->callback([&, name] {
            action = [&, name] { return verify_identity(name, q, chi, lambda, lambda1, lambda2, cfg); };
        });
    }
    {
        auto* c = compute->add_subcommand("iv", "normalized triple integral for given parameters");
        add_q(c);
        add_triple_flags(c, triple);
        add_common(c, cfg);
        c->callback([&, c] {
            for (int i = 0; i < 3; ++i)
                triple.alpha_given[i] = c->count("--alpha" + std::to_string(i + 1)) > 0;
            action = [&] { return compute_iv(q, triple, cfg); };
        });
    }
    {
        auto* c = compute->add_subcommand("ellv", "local factor of the moment at the level prime");
        add_q(c);
        c->add_option("--case", ellv_case, "away, unramified or steinberg")
            ->check(CLI::IsMember({"away", "unramified", "steinberg"}))
            ->capture_default_str();
        add_chi(c);
        c->add_option("--lambda", lambda, "Hecke eigenvalue at the level prime")
            ->capture_default_str();
        add_l12(c);
        add_common(c, cfg);
        c->callback([&] {
            action = [&] { return compute_ellv(q, ellv_case, chi, lambda, lambda1, lambda2, cfg); };
        });
    }
    {
        auto* c = momentc->add_subcommand("assemble", "assemble one side of the moment");
        c->add_option("--input", mf.input, "spectral data JSON file")->required();
        c->add_option("--p", mf.p, "Hecke prime of side qp")->capture_default_str();
        c->add_option("--q", mf.q, "level prime of side qp")->capture_default_str();
        c->add_option("--side", mf.side, "qp or pq")
            ->check(CLI::IsMember({"qp", "pq"}))
            ->capture_default_str();
        c->add_option("--case-constant", mf.case_constant, "case constant C matching how the dataset was produced")
            ->capture_default_str();
        c->add_option("--lambda1", mf.lambda1, "pi_1 eigenvalue at the level prime")
            ->capture_default_str();
        c->add_option("--lambda2", mf.lambda2, "pi_2 eigenvalue at the level prime")
            ->capture_default_str();
        c->add_flag("--skip-integral", mf.skip_integral,
                    "trust the Steinberg closed form without recomputing the integral");
        add_common(c, cfg);
        c->callback([&] { action = [&] { return moment_assemble(mf, cfg); }; });
    }
    {
        auto* c = momentc->add_subcommand("compare", "assemble both sides and report the difference");
        c->add_option("--input-qp", mf.input, "side-qp spectral data JSON file")->required();
        c->add_option("--input-pq", mf.input_pq, "side-pq spectral data JSON file")->required();
        c->add_option("--p", mf.p, "Hecke prime of side qp")->capture_default_str();
        c->add_option("--q", mf.q, "level prime of side qp")->capture_default_str();
        c->add_option("--case-constant", mf.case_constant, "case constant C matching how the dataset was produced")
            ->capture_default_str();
        c->add_option("--lambda1-qp", mf.lambda1, "pi_1 eigenvalue at the qp level prime")
            ->capture_default_str();
        c->add_option("--lambda2-qp", mf.lambda2, "pi_2 eigenvalue at the qp level prime")
            ->capture_default_str();
        c->add_option("--lambda1-pq", mf.lambda1_pq, "pi_1 eigenvalue at the pq level prime")
            ->capture_default_str();
        c->add_option("--lambda2-pq", mf.lambda2_pq, "pi_2 eigenvalue at the pq level prime")
            ->capture_default_str();
        c->add_flag("--skip-integral", mf.skip_integral,
                    "trust the Steinberg closed form without recomputing the integral");
        add_common(c, cfg);
        c->callback([&] { action = [&] { return moment_compare(mf, cfg); }; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        num::set_precision_bits(cfg.precision);
        if (!(cfg.tol > 0)) throw InvariantViolation("tolerance must be positive");
        if (cfg.radius < -1)
            throw InvariantViolation("--radius must be >= 0, or -1 for automatic sizing");
        return action ? action() : 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
