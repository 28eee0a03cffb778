#include "locperiod/moment.hpp"

#include "helpers.hpp"

#include <fstream>
#include <sstream>

using namespace locperiod;
using num::ApproxScalar;
using num::ExactScalar;
using num::Rat;
using testutil::rat;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Tests run from the build tree or the repo root; the corpus lives in data/.
std::string data_dir() {
    for (const char* cand : {"data", "../data"}) {
        std::ifstream probe(std::string(cand) + "/golden_spectral.json");
        if (probe.good()) return cand;
    }
    FAIL("cannot locate the data directory");
    return "";
}

moment::Dataset parse(const std::string& text) {
    std::istringstream in(text);
    return moment::load_spectral_data(in);
}

std::string row_json(const std::string& patch_key = "", const std::string& patch_value = "") {
    nlohmann::ordered_json row = {
        {"id", "r1"},
        {"kind", "cuspidal"},
        {"lambda_p", "1.25"},
        {"lambda_q", "-0.5"},
        {"eta", 1},
        {"L_central", "0.3"},
        {"L_units", "completed"},
        {"adjoint_Lstar", "2.0"},
        {"f_inf", "1.0"},
        {"quadrature_weight", "1"},
        {"local_type", "unramified"},
    };
    if (!patch_key.empty()) row[patch_key] = nlohmann::ordered_json::parse(patch_value);
    nlohmann::ordered_json doc = {{"field_label", "Q"}, {"rows", {row}}};
    return doc.dump();
}

moment::AssemblySpec golden_spec_qp() {
    moment::AssemblySpec spec;
    spec.p = 2;
    spec.q = 3;
    spec.side = moment::Side::qp;
    spec.case_constant = rat(1);
    spec.lambda1 = rat(1, 2);
    spec.lambda2 = rat(-1, 4);
    return spec;
}

moment::AssemblySpec golden_spec_pq() {
    moment::AssemblySpec spec = golden_spec_qp();
    spec.side = moment::Side::pq;
    spec.lambda1 = rat(3, 4);
    spec.lambda2 = rat(1, 2);
    return spec;
}

}  // namespace

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

TEST_CASE("spectral data loads and validates") {
    auto ds = parse(row_json());
    CHECK(ds.field_label == "Q");
    REQUIRE(ds.rows.size() == 1);
    const auto& r = ds.rows[0];
    CHECK(r.id == "r1");
    CHECK(r.kind == moment::RowKind::cuspidal);
    CHECK(r.lambda_p == rat(5, 4));
    CHECK(r.lambda_q == rat(-1, 2));
    CHECK(r.eta == 1);
    CHECK(r.L_central == rat(3, 10));
    CHECK(r.L_units == moment::LUnits::completed);
    CHECK(r.adjoint_Lstar == rat(2));
    CHECK(r.f_inf == rat(1));
    CHECK(r.quadrature_weight == rat(1));
    REQUIRE(r.local_type.has_value());
    CHECK(*r.local_type == periods::LocalCase::unramified_at_level);
}

TEST_CASE("empty row list gives an empty dataset") {
    auto ds = parse(R"({"field_label": "Q", "rows": []})");
    CHECK(ds.rows.empty());
}

TEST_CASE("schema violations carry the offending path") {
    auto message_of = [](const std::string& text) {
        try {
            parse(text);
        } catch (const SchemaViolation& e) {
            return std::string(e.what());
        }
        return std::string("no throw");
    };

    CHECK_THROWS_AS(parse("[1,2]"), SchemaViolation);
    CHECK_THROWS_AS(parse("{\"field_label\": \"Q\"}"), SchemaViolation);
    CHECK_THROWS_AS(parse("not json at all"), SchemaViolation);
    CHECK_THROWS_AS(parse(R"({"field_label": "Q", "rows": [], "extra": 1})"), SchemaViolation);

    CHECK(message_of(row_json("surprise", "3")).find("rows[0]") != std::string::npos);
    CHECK(message_of(row_json("surprise", "3")).find("surprise") != std::string::npos);
    CHECK(message_of(row_json("lambda_p", "1.25")).find("rows[0].lambda_p") !=
          std::string::npos);  // bare JSON number: reals must be decimal strings
    CHECK(message_of(row_json("lambda_p", "\"nan\"")).find("rows[0].lambda_p") !=
          std::string::npos);
    CHECK_THROWS_AS(parse(row_json("kind", "\"dihedral\"")), SchemaViolation);
    CHECK_THROWS_AS(parse(row_json("L_units", "\"bananas\"")), SchemaViolation);
    CHECK_THROWS_AS(parse(row_json("local_type", "\"supercuspidal\"")), SchemaViolation);
    CHECK_THROWS_AS(parse(row_json("eta", "\"1\"")), SchemaViolation);
}

TEST_CASE("value invariants are enforced at load time") {
    CHECK_THROWS_AS(parse(row_json("eta", "0")), InvariantViolation);
    CHECK_THROWS_AS(parse(row_json("eta", "2")), InvariantViolation);
    CHECK_THROWS_AS(parse(row_json("L_central", "\"-0.1\"")), InvariantViolation);
    CHECK_THROWS_AS(parse(row_json("adjoint_Lstar", "\"0\"")), InvariantViolation);
    CHECK_THROWS_AS(parse(row_json("adjoint_Lstar", "\"-2\"")), InvariantViolation);
    CHECK_THROWS_AS(parse(row_json("f_inf", "\"-1e-20\"")), InvariantViolation);
}

TEST_CASE("golden sample file parses to three rows") {
    auto ds = moment::load_spectral_data_file(data_dir() + "/golden_spectral.json");
    REQUIRE(ds.rows.size() == 3);
    CHECK(ds.rows[0].local_type == periods::LocalCase::steinberg_at_level);
    CHECK(ds.rows[1].local_type == periods::LocalCase::unramified_at_level);
    CHECK(ds.rows[2].kind == moment::RowKind::eisenstein_sample);
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

TEST_CASE("empty dataset assembles to total zero") {
    moment::Dataset ds;
    ds.field_label = "Q";
    auto rep = moment::assemble_moment(ds, golden_spec_qp());
    CHECK(rep.terms.empty());
    CHECK(rep.cuspidal_subtotal.is_zero());
    CHECK(rep.continuous_subtotal.is_zero());
    CHECK(rep.total.re.is_zero());
    CHECK(rep.total.im.is_zero());
    CHECK(rep.prefactor == ExactScalar(rat(0), rat(1, 3), 2));
}

TEST_CASE("single steinberg row with unit factors contributes C/(q+1)") {
    // Level prime 2: the local factor is exactly 1/3.
    auto ds = parse(R"({"field_label": "Q", "rows": [{
        "id": "st", "kind": "cuspidal",
        "lambda_p": "1", "lambda_q": "1", "eta": 1,
        "L_central": "1", "L_units": "completed",
        "adjoint_Lstar": "1", "f_inf": "1", "quadrature_weight": "1",
        "local_type": "steinberg"}]})");
    auto spec = golden_spec_pq();  // level at 2, Hecke at 3
    spec.case_constant = rat(7);
    auto rep = moment::assemble_moment(ds, spec);
    REQUIRE(rep.terms.size() == 1);
    CHECK(rep.terms[0].local_factor == ExactScalar(rat(1, 3)));
    CHECK(rep.terms[0].value == ExactScalar(rat(7, 3)));
    REQUIRE(rep.terms[0].steinberg_integral_ok.has_value());
    CHECK(*rep.terms[0].steinberg_integral_ok);
    CHECK(rep.prefactor == ExactScalar(rat(0), rat(1, 4), 3));
    // total = sqrt(3)/4 x 7/3
    CHECK(testutil::close_real(rep.total, std::sqrt(3.0) / 4.0 * 7.0 / 3.0, 1e-12));
}

TEST_CASE("unramified rows pick up the exact basis-sum constant") {
    auto ds = parse(row_json());  // lambda at the level prime (q=3) is -1/2
    auto spec = golden_spec_qp();
    auto rep = moment::assemble_moment(ds, spec);
    REQUIRE(rep.terms.size() == 1);
    ExactScalar kappa = periods::kappa_constant(3, rat(-1, 2), rat(1, 2), rat(-1, 4));
    CHECK(rep.terms[0].local_factor == kappa);
    // term = lambda_p L f / Lstar x kappa = (5/4)(3/10)(1)/(2) kappa
    CHECK(rep.terms[0].value == ExactScalar(rat(3, 16)) * kappa);
    CHECK(rep.continuous_subtotal.is_zero());
}

TEST_CASE("side swap exchanges the roles of the two eigenvalue columns") {
    auto ds = parse(row_json("local_type", "\"away\""));
    auto qp = moment::assemble_moment(ds, golden_spec_qp());
    auto pq = moment::assemble_moment(ds, golden_spec_pq());
    // away rows have local factor 1, so the term is the scalar prefactor only
    CHECK(qp.terms[0].local_factor == ExactScalar(rat(1)));
    CHECK(qp.terms[0].value == ExactScalar(rat(5, 4) * rat(3, 10) / rat(2)));
    CHECK(pq.terms[0].value == ExactScalar(rat(-1, 2) * rat(3, 10) / rat(2)));
    CHECK(qp.level_prime == 3);
    CHECK(pq.level_prime == 2);
    CHECK(qp.prefactor == ExactScalar(rat(0), rat(1, 3), 2));
    CHECK(pq.prefactor == ExactScalar(rat(0), rat(1, 4), 3));
}

TEST_CASE("rows without a declared local type are rejected at assembly") {
    nlohmann::ordered_json doc = nlohmann::ordered_json::parse(row_json());
    doc["rows"][0].erase("local_type");
    auto ds = parse(doc.dump());
    CHECK(ds.rows[0].local_type == std::nullopt);
    CHECK_THROWS_AS(moment::assemble_moment(ds, golden_spec_qp()), MissingLocalType);
}

TEST_CASE("semantic mismatches are rejected at assembly") {
    // eta = -1 contradicts an unramified local factor
    auto ds1 = parse(row_json("eta", "-1"));
    CHECK_THROWS_AS(moment::assemble_moment(ds1, golden_spec_qp()), InvariantViolation);
    // an Eisenstein sample cannot be special anywhere
    nlohmann::ordered_json doc = nlohmann::ordered_json::parse(row_json());
    doc["rows"][0]["kind"] = "eisenstein-sample";
    doc["rows"][0]["local_type"] = "steinberg";
    auto ds2 = parse(doc.dump());
    CHECK_THROWS_AS(moment::assemble_moment(ds2, golden_spec_qp()), InvariantViolation);
    // primes must be distinct primes
    auto ds3 = parse(row_json());
    auto spec = golden_spec_qp();
    spec.p = 3;
    CHECK_THROWS_AS(moment::assemble_moment(ds3, spec), InvariantViolation);
    spec.p = 4;
    CHECK_THROWS_AS(moment::assemble_moment(ds3, spec), InvariantViolation);
}

TEST_CASE("assembly is linear in the rows") {
    auto full = moment::load_spectral_data_file(data_dir() + "/golden_spectral.json");
    moment::Dataset head = full, tail = full;
    head.rows.resize(1);
    tail.rows.erase(tail.rows.begin());

    auto spec = golden_spec_qp();
    auto rep_full = moment::assemble_moment(full, spec);
    auto rep_head = moment::assemble_moment(head, spec);
    auto rep_tail = moment::assemble_moment(tail, spec);

    CHECK(rep_full.cuspidal_subtotal ==
          rep_head.cuspidal_subtotal + rep_tail.cuspidal_subtotal);
    CHECK(rep_full.continuous_subtotal ==
          rep_head.continuous_subtotal + rep_tail.continuous_subtotal);

    // The recombined total reproduces the one-file total bit for bit.
    ApproxScalar glued =
        num::to_approx(rep_full.prefactor) *
        num::to_approx((rep_head.cuspidal_subtotal + rep_tail.cuspidal_subtotal) +
                       (rep_head.continuous_subtotal + rep_tail.continuous_subtotal));
    CHECK(glued.str() == rep_full.total.str());
}

TEST_CASE("total factors through the exact prefactor") {
    auto ds = moment::load_spectral_data_file(data_dir() + "/golden_spectral.json");
    auto rep = moment::assemble_moment(ds, golden_spec_qp());
    CHECK(rep.prefactor == ExactScalar(rat(0), rat(1, rep.hecke_prime + 1), rep.hecke_prime));
    ApproxScalar rebuilt = num::to_approx(rep.prefactor) *
                           num::to_approx(rep.cuspidal_subtotal + rep.continuous_subtotal);
    CHECK(rebuilt.str() == rep.total.str());
}

// ---------------------------------------------------------------------------
// Two-sided comparison
// ---------------------------------------------------------------------------

TEST_CASE("reciprocity comparison of empty datasets reports difference zero") {
    moment::Dataset empty;
    empty.field_label = "Q";
    auto rep = moment::reciprocity_report(empty, empty, golden_spec_qp(), golden_spec_pq());
    CHECK(rep.difference.re.is_zero());
    CHECK(rep.difference.im.is_zero());
}

TEST_CASE("reciprocity comparison of cancelling datasets reports difference zero") {
    // Two rows differing only in eta: the side totals vanish identically.
    nlohmann::ordered_json doc = nlohmann::ordered_json::parse(row_json("local_type", "\"away\""));
    nlohmann::ordered_json mirror = doc["rows"][0];
    mirror["id"] = "r2";
    mirror["eta"] = -1;
    doc["rows"].push_back(mirror);
    auto ds = parse(doc.dump());

    auto rep = moment::reciprocity_report(ds, ds, golden_spec_qp(), golden_spec_pq());
    CHECK(rep.side_qp.cuspidal_subtotal.is_zero());
    CHECK(rep.side_pq.cuspidal_subtotal.is_zero());
    CHECK(rep.difference.re.is_zero());
    CHECK(rep.difference.im.is_zero());
}

TEST_CASE("reciprocity comparison rejects mismatched specs") {
    moment::Dataset empty;
    auto qp = golden_spec_qp();
    auto pq = golden_spec_pq();
    CHECK_THROWS_AS(moment::reciprocity_report(empty, empty, qp, qp), InvariantViolation);
    auto other = pq;
    other.q = 5;
    CHECK_THROWS_AS(moment::reciprocity_report(empty, empty, qp, other), InvariantViolation);
}

// ---------------------------------------------------------------------------
// Golden regression
// ---------------------------------------------------------------------------

TEST_CASE("golden moment report is byte-identical") {
    num::set_precision_bits(128);
    auto dir = data_dir();
    auto ds = moment::load_spectral_data_file(dir + "/golden_spectral.json");
    auto rep = moment::assemble_moment(ds, golden_spec_qp());
    std::string text = moment::moment_report_json(rep).dump(2) + "\n";
    CHECK(text == slurp(dir + "/golden_report.json"));
}

TEST_CASE("golden reciprocity report is byte-identical") {
    num::set_precision_bits(128);
    auto dir = data_dir();
    auto ds_qp = moment::load_spectral_data_file(dir + "/golden_spectral.json");
    auto ds_pq = moment::load_spectral_data_file(dir + "/golden_spectral_pq.json");
    auto rep = moment::reciprocity_report(ds_qp, ds_pq, golden_spec_qp(), golden_spec_pq());
    std::string text = moment::reciprocity_report_json(rep).dump(2) + "\n";
    CHECK(text == slurp(dir + "/golden_reciprocity.json"));
}
