// SPDX-License-Identifier: Apache-2.0
/**
 * @file cli.cpp
 * @brief Subcommand implementations and dispatch for the `modcsp` tool.
 */
#include "modcsp/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "modcsp/automorphism.hpp"
#include "modcsp/binarize.hpp"
#include "modcsp/expansion.hpp"
#include "modcsp/fixtures.hpp"
#include "modcsp/gadget.hpp"
#include "modcsp/mpp.hpp"
#include "modcsp/oracle.hpp"
#include "modcsp/parity.hpp"
#include "modcsp/properties.hpp"
#include "modcsp/refine.hpp"
#include "modcsp/regression.hpp"

namespace modcsp::cli {
namespace {

constexpr std::string_view kFixturePrefix = "fixture:";

/// Raised when a cross-check against the brute-force oracle fails.
class MismatchError : public Error {
public:
    using Error::Error;
};

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct Report {
    std::string command;
    Json inputs = Json::array();
    Json result = Json::object();
    std::string text;  ///< human-readable rendering
};

Json finish(const Report& r, double milliseconds) {
    Json j = Json::object();
    j["schema"] = kReportSchema;
    j["command"] = r.command;
    j["inputs"] = r.inputs;
    j["result"] = r.result;
    j["timings"] = Json{{"total_ms", milliseconds}};
    return j;
}

std::string read_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw PreconditionError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Reads a JSON input and records its digest in the report.
Json load_json(Report& report, std::string_view role, const std::string& path) {
    const std::string bytes = read_bytes(path);
    report.inputs.push_back(Json{{"role", role}, {"source", path}, {"fnv1a64", fnv1a64(bytes)}});
    try {
        return parse_json(bytes);
    } catch (const PreconditionError& e) {
        throw PreconditionError(path + ": " + e.what());
    }
}

Structure load_structure(Report& report, const std::string& source) {
    if (source.starts_with(kFixturePrefix)) {
        const std::string name = source.substr(kFixturePrefix.size());
        Structure h = bundled_fixture(name);
        report.inputs.push_back(Json{{"role", "structure"}, {"source", source}, {"fnv1a64", nullptr}});
        return h;
    }
    return structure_from_json(load_json(report, "structure", source));
}

Instance load_instance(Report& report, const std::string& path, const Structure& h) {
    Instance p = instance_from_json(load_json(report, "instance", path));
    require_valid(p, h);
    return p;
}

MppFormula load_formula(Report& report, const std::string& path) {
    return formula_from_json(load_json(report, "formula", path));
}

// ---------------------------------------------------------------------------
// Rendering helpers
// ---------------------------------------------------------------------------

Json tuple_names(const Structure& h, std::span<const SortId> sig, std::span<const Element> t) {
    Json out = Json::array();
    for (std::size_t i = 0; i < t.size(); ++i) out.push_back(h.element_name(sig[i], t[i]));
    return out;
}

std::string tuple_text(const Json& names) {
    std::string out = "(";
    for (std::size_t i = 0; i < names.size(); ++i) out += (i > 0 ? "," : "") + names[i].get<std::string>();
    return out + ")";
}

std::string relation_text(const Structure& h, const Relation& r) {
    std::string out = "{";
    for (std::size_t k = 0; k < r.tuples.size(); ++k) {
        out += (k > 0 ? "," : "") + tuple_text(tuple_names(h, r.signature, r.tuples[k]));
    }
    return out + "}";
}

Json mapping_json(const Structure& h, const Mapping& m) {
    Json out = Json::object();
    for (std::size_t s = 0; s < h.sort_count(); ++s) {
        Json component = Json::object();
        for (Element a = 0; a < h.sort_size(SortId{s}); ++a) {
            component[h.element_name(SortId{s}, a)] = h.element_name(SortId{s}, m.components[s][a]);
        }
        out[h.sort(SortId{s}).name] = std::move(component);
    }
    return out;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

std::uint64_t require_modulus(std::uint64_t p) {
    require_prime(p);
    return p;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct CountArgs {
    std::string structure, instance;
    std::optional<std::uint64_t> mod;
    bool inj{false};
    bool via_constants{false};
};

Structure without_constants(const Structure& h) {
    Structure out = h;
    for (const auto& r : h.relations()) {
        if (parse_constant_name(h, r.name)) out.remove_relation(r.name);
    }
    return out;
}

void cmd_count(Report& report, const CountArgs& a) {
    const Structure h = load_structure(report, a.structure);
    const Instance p = load_instance(report, a.instance, h);
    if (a.mod) require_modulus(*a.mod);
    if (a.inj && a.via_constants) throw PreconditionError("--inj and --via-constants-reduction are exclusive");
    Json& res = report.result;
    if (a.via_constants) {
        if (!a.mod) throw PreconditionError("--via-constants-reduction requires --mod");
        const Structure hc = has_all_constants(h) ? h : with_constants(h);
        const Structure base = without_constants(hc);
        const std::uint64_t r = count_with_constants(p, hc, *a.mod, base);
        res["method"] = "constants-reduction";
        res["modulus"] = *a.mod;
        res["count"] = std::to_string(r);
        report.text = std::to_string(r) + "\n";
        return;
    }
    BigInt total;
    if (a.inj) {
        const Anchored k{instance_to_structure(p, h), {}};
        total = count_inj(k, Anchored{h, {}});
        res["method"] = "injective";
    } else {
        total = count_solutions(p, h).exact;
        res["method"] = "oracle";
    }
    const std::string value = a.mod ? std::to_string(residue(total, *a.mod)) : total.str();
    res["modulus"] = a.mod ? Json(*a.mod) : Json(nullptr);
    res["count"] = value;
    report.text = value + "\n";
}

struct ReduceArgs {
    std::string structure;
    std::uint64_t mod{};
    std::string trace;
};

void cmd_reduce(Report& report, const ReduceArgs& a) {
    const Structure h = load_structure(report, a.structure);
    require_modulus(a.mod);
    const ReductionTrace trace = p_reduce(h, a.mod);
    Json steps = Json::array();
    Structure current = h;
    for (const auto& step : trace.steps) {
        Json kept = Json::object();
        for (std::size_t s = 0; s < current.sort_count(); ++s) {
            Json names = Json::array();
            for (const Element e : step.fixed[s]) names.push_back(current.element_name(SortId{s}, e));
            kept[current.sort(SortId{s}).name] = std::move(names);
        }
        steps.push_back(Json{{"order", step.automorphism.order},
                             {"automorphism", mapping_json(current, step.automorphism.map)},
                             {"kept", std::move(kept)}});
        current = fix_substructure(current, step.automorphism.map);
    }
    if (!a.trace.empty()) {
        std::ofstream out(a.trace);
        if (!out) throw PreconditionError("cannot write '" + a.trace + "'");
        out << dump(Json{{"steps", steps}});
    }
    report.result["modulus"] = a.mod;
    report.result["steps"] = trace.steps.size();
    report.result["structure"] = structure_to_json(trace.result);
    report.text = dump(structure_to_json(trace.result));
}

struct AnalyzeArgs {
    std::string structure;
    std::uint64_t mod{};
    std::vector<std::string> congruences;
};

Json witness_json(const Structure& h, const Relation& r, const RectangularityWitness& w) {
    const auto right = complement_positions(w.left, r.arity());
    std::vector<SortId> ls;
    std::vector<SortId> rs;
    for (const auto i : w.left) ls.push_back(r.signature[i]);
    for (const auto i : right) rs.push_back(r.signature[i]);
    return Json{{"left", w.left},
                {"a", tuple_names(h, ls, w.a)},
                {"b", tuple_names(h, ls, w.b)},
                {"c", tuple_names(h, rs, w.c)},
                {"d", tuple_names(h, rs, w.d)}};
}

Json permutability_json(const PermutabilityReport& r, const std::vector<Congruence>& cs) {
    if (r.ok) return Json{{"ok", true}, {"witness", nullptr}};
    const auto& w = *r.witness;
    const auto& names = cs[w.first].point_names;
    return Json{{"ok", false},
                {"witness",
                 {{"first", cs[w.first].name},
                  {"second", cs[w.second].name},
                  {"pair", {names[w.x], names[w.y]}},
                  {"in_first_second", w.in_alpha_beta}}}};
}

void cmd_analyze(Report& report, const AnalyzeArgs& a) {
    const Structure h = load_structure(report, a.structure);
    const std::uint64_t p = require_modulus(a.mod);
    std::ostringstream text;
    Json rels = Json::array();
    for (const auto& r : h.relations()) {
        Json entry{{"name", r.name}, {"arity", r.arity()}};
        if (r.arity() < 2) {
            entry["rectangular"] = nullptr;
            rels.push_back(std::move(entry));
            continue;
        }
        const auto w = find_rectangularity_witness(r);
        entry["rectangular"] = !w.has_value();
        entry["witness"] = w ? witness_json(h, r, *w) : Json(nullptr);
        text << r.name << ": " << (w ? "not rectangular" : "rectangular");
        Json splits = Json::array();
        for (const auto& split : contiguous_splits(r.arity())) {
            splits.push_back(Json{{"left", split.left},
                                  {"middle", split.middle},
                                  {"balanced", is_balanced(r, split)},
                                  {"p_balanced", is_p_balanced(r, split, p)}});
        }
        if (!splits.empty()) {
            std::size_t unbalanced = 0;
            for (const auto& s : splits) unbalanced += s["p_balanced"].get<bool>() ? 0 : 1;
            text << ", " << unbalanced << " of " << splits.size() << " splits not " << p << "-balanced";
        }
        text << "\n";
        entry["splits"] = std::move(splits);
        rels.push_back(std::move(entry));
    }
    report.result["modulus"] = p;
    report.result["relations"] = std::move(rels);

    try {
        const auto f = find_maltsev(h);
        report.result["maltsev"] = f.has_value();
        text << "Mal'tsev polymorphism: " << (f ? "yes" : "no") << "\n";
    } catch (const GuardError& e) {
        report.result["maltsev"] = nullptr;
        text << "Mal'tsev polymorphism: undecided (" << e.what() << ")\n";
    }

    std::vector<Congruence> cs;
    if (a.congruences.empty()) {
        for (const auto& r : h.relations()) {
            if (r.arity() != 2 || r.signature[0] != r.signature[1]) continue;
            try {
                cs.push_back(congruence_from_relation(h, r.name));
            } catch (const PreconditionError&) {
                // not an equivalence relation; not a declared congruence
            }
        }
    } else {
        for (const auto& name : a.congruences) cs.push_back(congruence_from_relation(h, name));
    }
    Json cong = Json::object();
    Json names = Json::array();
    for (const auto& c : cs) names.push_back(c.name);
    cong["congruences"] = names;
    if (cs.size() >= 2) {
        const auto plain = check_permutability(cs);
        const auto modular = check_p_permutability(cs, p);
        cong["permutable"] = permutability_json(plain, cs);
        cong["p_permutable"] = permutability_json(modular, cs);
        text << "congruences " << names.dump() << ": " << (plain.ok ? "permutable" : "not permutable") << ", "
             << (modular.ok ? "" : "not ") << p << "-permutable\n";
    } else {
        cong["permutable"] = nullptr;
        cong["p_permutable"] = nullptr;
    }
    report.result["permutability"] = std::move(cong);
    report.text = text.str();
}

struct FormulaArgs {
    std::string structure, formula;
};

void cmd_eval_formula(Report& report, const FormulaArgs& a) {
    const Structure h = load_structure(report, a.structure);
    const MppFormula f = typecheck_formula(h, load_formula(report, a.formula));
    const Relation r = evaluate_formula(h, f, "phi");
    Json tuples = Json::array();
    for (const auto& t : r.tuples) tuples.push_back(tuple_names(h, r.signature, t));
    std::optional<bool> strict;
    if (f.blocks.empty() || f.blocks.front().mode == Quantifier::Modular) strict = is_strict(h, f);
    report.result["formula"] = formula_to_text(f);
    report.result["size"] = r.size();
    report.result["tuples"] = std::move(tuples);
    report.result["strict"] = strict ? Json(*strict) : Json(nullptr);
    report.text = formula_to_text(f) + "\n" + relation_text(h, r) + "\n" + std::to_string(r.size()) + " tuples" +
                  (strict ? std::string(*strict ? ", strict" : ", not strict") : std::string{}) + "\n";
}

struct ParityArgs {
    std::string structure, instance;
    bool verify{false};
};

void cmd_parity(Report& report, const ParityArgs& a) {
    const Structure h = load_structure(report, a.structure);
    const Instance p = load_instance(report, a.instance, h);
    const ParityContext ctx(h);
    std::optional<FrameValidator> validator;
    if (a.verify) validator.emplace(ctx);
    const std::uint64_t parity = parity_count(ctx, p, validator ? &*validator : nullptr);
    report.result["parity"] = parity;
    report.text = std::to_string(parity) + "\n";
    if (!a.verify) return;
    const std::uint64_t oracle = count_solutions_mod(p, h, 2);
    report.result["oracle"] = oracle;
    report.result["validator"] = Json{{"checks", validator->checks()},
                                      {"parity_checks", validator->parity_checks()},
                                      {"violations", validator->violations()}};
    if (oracle != parity) {
        throw MismatchError("parity engine returned " + std::to_string(parity) + " but the oracle counts " +
                            std::to_string(oracle) + " modulo 2");
    }
    if (validator->violation_count() > 0) {
        throw MismatchError("witness-function validation failed: " + validator->violations().front());
    }
}

struct RefineArgs {
    std::string structure, instance;
    std::uint64_t mod{};
    std::string method = "solver";
};

void cmd_refine(Report& report, const RefineArgs& a) {
    const Structure h = load_structure(report, a.structure);
    const Instance p = load_instance(report, a.instance, h);
    const std::uint64_t prime = require_modulus(a.mod);
    Json& res = report.result;
    res["method"] = a.method;
    res["modulus"] = prime;
    std::ostringstream text;
    if (a.method == "ac") {
        const DomainAssignment d = consistency_domains(p, h);
        if (d.unsatisfiable) {
            res["unsatisfiable"] = true;
            res["count"] = 0;
            report.text = "unsatisfiable\n0\n";
            return;
        }
        const Merged merged = eliminate_equality(p, h);
        const DomainAssignment md = consistency_domains(merged.instance, h);
        const DomainFamily family = domain_family(merged.instance, h, md);
        const Refinement r = build_refinement(h, family.members);
        const auto sigma = sort_function_for(r, merged.instance, h, md);
        const Instance refined = refine_instance(merged.instance, h, r, sigma);
        const std::uint64_t count = count_solutions_mod(refined, r.structure, prime);
        res["unsatisfiable"] = false;
        res["structure"] = structure_to_json(r.structure);
        res["instance"] = instance_to_json(refined);
        res["count"] = count;
        text << "refined sorts: " << r.structure.sort_count() << ", relations: " << r.structure.relations().size()
             << "\ncount mod " << prime << ": " << count << "\n";
    } else {
        const RefineReduceResult r = refine_and_reduce(p, h, prime);
        const bool unsat = r.method == CountMethod::Unsatisfiable;
        res["unsatisfiable"] = unsat;
        res["count_method"] = to_string(r.method);
        res["reduction_steps"] = r.reduction_steps;
        res["structure"] = unsat ? Json(nullptr) : structure_to_json(r.refinement.structure);
        res["instance"] = unsat ? Json(nullptr) : instance_to_json(r.refined);
        res["count"] = r.residue;
        text << "count method: " << to_string(r.method) << ", reduction steps: " << r.reduction_steps
             << "\ncount mod " << prime << ": " << r.residue << "\n";
    }
    if (recognize_tp(h, prime)) {
        const TpSolution t = solve_tp(p, h, prime);
        res["tp_solver"] = Json{{"count", t.residue}, {"rounds", t.rounds}, {"remaining", t.remaining}};
        text << "T_p solver: " << t.residue << " (" << t.rounds << " rounds, " << t.remaining
             << " free variables)\n";
    }
    report.text = text.str();
}

struct GadgetArgs {
    std::string structure, formula;
    std::uint64_t mod{};
    std::string protection = "graph";
};

Json side_names(const Structure& h, const Relation& r, std::size_t from, std::size_t to, const Tuple& t) {
    const std::vector<SortId> sig(r.signature.begin() + static_cast<std::ptrdiff_t>(from),
                                  r.signature.begin() + static_cast<std::ptrdiff_t>(to));
    return tuple_names(h, sig, t);
}

void cmd_gadget_scan(Report& report, const GadgetArgs& a) {
    const Structure h = load_structure(report, a.structure);
    const std::uint64_t p = require_modulus(a.mod);
    const Protection mode = a.protection == "relation" ? Protection::Relation : Protection::Graph;
    std::vector<std::pair<Relation, std::string>> candidates;
    if (!a.formula.empty()) {
        const MppFormula f = typecheck_formula(h, load_formula(report, a.formula));
        candidates.emplace_back(evaluate_formula(h, f, "phi"), formula_to_text(f));
    } else {
        for (const auto& r : h.relations()) {
            if (r.arity() >= 2) candidates.emplace_back(r, r.name);
        }
    }
    std::ostringstream text;
    Json found = Json::array();
    for (const auto& [r, provenance] : candidates) {
        Json entry{{"relation", r.name}, {"provenance", provenance}, {"arity", r.arity()}};
        text << provenance << ": ";
        if (r.arity() < 2) {
            entry["obstruction"] = nullptr;
            entry["gadget"] = nullptr;
            text << "arity below 2\n";
            found.push_back(std::move(entry));
            continue;
        }
        std::optional<Obstruction> obstruction;
        for (std::size_t split = 1; split < r.arity() && !obstruction; ++split) {
            obstruction = find_rect_obstruction(r, split);
        }
        if (obstruction) {
            const std::size_t s = obstruction->split;
            entry["obstruction"] = Json{{"split", s},
                                        {"a", side_names(h, r, 0, s, obstruction->a)},
                                        {"b", side_names(h, r, 0, s, obstruction->b)},
                                        {"c", side_names(h, r, s, r.arity(), obstruction->c)},
                                        {"d", side_names(h, r, s, r.arity(), obstruction->d)}};
            text << "obstruction at split " << s;
        } else {
            entry["obstruction"] = nullptr;
            text << "rectangular";
        }
        const auto g = find_standard_gadget(r, provenance);
        if (!g) {
            entry["gadget"] = nullptr;
            text << ", no gadget\n";
            found.push_back(std::move(entry));
            continue;
        }
        Json blocks = Json::array();
        for (std::size_t i = 0; i < 2; ++i) {
            for (std::size_t j = 0; j < 2; ++j) {
                Json members = Json::array();
                const std::size_t from = i == 0 ? 0 : g->split;
                const std::size_t to = i == 0 ? g->split : r.arity();
                for (const auto& t : g->blocks[i][j]) members.push_back(side_names(h, r, from, to, t));
                blocks.push_back(Json{{"block", "A" + std::to_string(i + 1) + std::to_string(j + 1)},
                                      {"members", std::move(members)}});
            }
        }
        Json gadget{{"split", g->split}, {"blocks", std::move(blocks)}, {"violations", gadget_violations(*g)}};
        gadget["protection_mode"] = to_string(mode);
        try {
            const bool prot = is_protected_gadget(*g, h, p, mode);
            gadget["protected"] = prot;
            text << ", gadget at split " << g->split << ", " << (prot ? "" : "not ") << p << "-protected ("
                 << to_string(mode) << ")\n";
        } catch (const GuardError& e) {
            gadget["protected"] = nullptr;
            gadget["protection_note"] = e.what();
            text << ", gadget at split " << g->split << ", protection undecided (" << e.what() << ")\n";
        }
        entry["gadget"] = std::move(gadget);
        found.push_back(std::move(entry));
    }
    report.result["modulus"] = p;
    report.result["candidates"] = std::move(found);
    report.text = text.str();
}

struct BinarizeArgs {
    std::string structure, instance;
};

/// b(H) with every element written as the array of its tuple's entries.
Json binarization_json(const Binarization& b) {
    const auto element = [&](SortId k, Element e) {
        const Relation& q = b.domain_relation(k);
        return tuple_names(b.base, q.signature, q.tuples[e]);
    };
    Json sorts = Json::object();
    for (std::size_t k = 0; k < b.structure.sort_count(); ++k) {
        Json elems = Json::array();
        for (Element e = 0; e < b.structure.sort_size(SortId{k}); ++e) elems.push_back(element(SortId{k}, e));
        sorts[b.structure.sort(SortId{k}).name] = std::move(elems);
    }
    Json rels = Json::object();
    for (const auto& r : b.structure.relations()) {
        Json tuples = Json::array();
        for (const auto& t : r.tuples) tuples.push_back(Json::array({element(r.signature[0], t[0]), element(r.signature[1], t[1])}));
        Json sig = Json::array();
        for (const auto s : r.signature) sig.push_back(b.structure.sort(s).name);
        rels[r.name] = Json{{"signature", std::move(sig)}, {"tuples", std::move(tuples)}};
    }
    Json links = Json::array();
    for (const auto& l : b.links) {
        links.push_back(Json{{"name", l.name},
                             {"relations", {b.base.relations()[l.i].name, b.base.relations()[l.j].name}},
                             {"positions", {l.s + 1, l.t + 1}}});
    }
    return Json{{"structure", {{"sorts", std::move(sorts)}, {"relations", std::move(rels)}}},
                {"sort_relations", b.sort_relation},
                {"links", std::move(links)}};
}

void cmd_binarize(Report& report, const BinarizeArgs& a) {
    const Structure h = load_structure(report, a.structure);
    const Binarization b = binarize(h);
    Json out = binarization_json(b);
    if (!a.instance.empty()) {
        const Instance p = load_instance(report, a.instance, b.base);
        out["instance"] = instance_to_json(binarize_instance(p, b).instance);
    }
    report.result = out;
    report.text = dump(out);
}

struct RegressArgs {
    std::uint64_t seed = 20240601;
};

bool cmd_regress(Report& report, const RegressArgs& a) {
    const RegressionSummary s = run_regression_suite(RegressionFixtures::standard(), a.seed);
    std::ostringstream text;
    Json checks = Json::array();
    for (const auto& c : s.checks) {
        checks.push_back(Json{{"fixture", c.fixture}, {"check", c.name}, {"passed", c.passed}, {"detail", c.detail}});
        text << (c.passed ? "PASS " : "FAIL ") << c.fixture << ": " << c.name;
        if (!c.passed) text << " -- " << c.detail;
        text << "\n";
    }
    text << s.checks.size() << " checks, " << s.failures() << " failed\n";
    report.result["seed"] = a.seed;
    report.result["checks"] = std::move(checks);
    report.result["failures"] = s.failures();
    report.text = text.str();
    return s.passed();
}

}  // namespace

// ---------------------------------------------------------------------------
// Public helpers
// ---------------------------------------------------------------------------

std::vector<std::string> fixture_names() {
    return {"t2",
            "t3",
            "t2-bare",
            "t3-bare",
            "quantifier-order",
            "maltsev-not-2-rectangular",
            "maltsev-not-2-rectangular-constants",
            "rectangular-not-permutable",
            "permutable-not-maltsev",
            "rigid-digraph",
            "affine2",
            "affine3",
            "chain-order"};
}

Structure bundled_fixture(std::string_view name) {
    if (name == "t2") return fixtures::t_p(2);
    if (name == "t3") return fixtures::t_p(3);
    if (name == "t2-bare") return fixtures::t_p(2, false);
    if (name == "t3-bare") return fixtures::t_p(3, false);
    if (name == "quantifier-order") return fixtures::quantifier_order();
    if (name == "maltsev-not-2-rectangular") return fixtures::maltsev_not_2_rectangular(false);
    if (name == "maltsev-not-2-rectangular-constants") return fixtures::maltsev_not_2_rectangular(true);
    if (name == "rectangular-not-permutable") return fixtures::rectangular_not_permutable();
    if (name == "permutable-not-maltsev") return fixtures::permutable_not_maltsev();
    if (name == "rigid-digraph") return fixtures::rigid_digraph();
    if (name == "affine2") return fixtures::affine(2);
    if (name == "affine3") return fixtures::affine(3);
    if (name == "chain-order") return fixtures::chain_order();
    throw PreconditionError("unknown fixture '" + std::string(name) + "'");
}

std::string fnv1a64(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Counting CSP solutions modulo a prime: oracles, reductions and structural checks", "modcsp"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    bool json = false;
    app.add_flag("--json", json, "Emit the versioned JSON report instead of text");
    app.set_version_flag("--version", std::string(kReportSchema));

    const auto structure_opt = [](CLI::App* c, std::string& target) {
        c->add_option("--structure", target, "Structure JSON file, or fixture:<name>")->required();
    };

    CountArgs count;
    auto* c_count = app.add_subcommand("count", "Count solutions with the brute-force oracle");
    structure_opt(c_count, count.structure);
    c_count->add_option("--instance", count.instance, "Instance JSON file")->required();
    c_count->add_option("--mod", count.mod, "Report the count modulo this prime");
    c_count->add_flag("--inj", count.inj, "Count injective solutions");
    c_count->add_flag("--via-constants-reduction", count.via_constants,
                      "Count through the constants-elimination reduction (needs --mod)");

    ReduceArgs reduce;
    auto* c_reduce = app.add_subcommand("reduce", "Reduce a structure to its p-rigid form");
    structure_opt(c_reduce, reduce.structure);
    c_reduce->add_option("--mod", reduce.mod, "The prime p")->required();
    c_reduce->add_option("--trace", reduce.trace, "Write the reduction steps to this JSON file");

    AnalyzeArgs analyze;
    auto* c_analyze = app.add_subcommand("analyze", "Rectangularity, balancedness, Mal'tsev and permutability");
    structure_opt(c_analyze, analyze.structure);
    c_analyze->add_option("--mod", analyze.mod, "The prime p")->required();
    c_analyze->add_option("--congruence", analyze.congruences,
                          "Binary equivalence relation to test for permutability (repeatable; default: all)");

    FormulaArgs formula;
    auto* c_formula = app.add_subcommand("eval-formula", "Evaluate a (modular) primitive-positive formula");
    structure_opt(c_formula, formula.structure);
    c_formula->add_option("--formula", formula.formula, "Formula JSON file")->required();

    ParityArgs parity;
    auto* c_parity = app.add_subcommand("parity", "Number of solutions modulo 2 by the parity engine");
    structure_opt(c_parity, parity.structure);
    c_parity->add_option("--instance", parity.instance, "Instance JSON file")->required();
    c_parity->add_flag("--verify-oracle", parity.verify,
                       "Cross-check against the oracle and validate every witness function");

    RefineArgs refine;
    auto* c_refine = app.add_subcommand("refine", "Refine an instance by its domains and count modulo p");
    structure_opt(c_refine, refine.structure);
    c_refine->add_option("--instance", refine.instance, "Instance JSON file")->required();
    c_refine->add_option("--mod", refine.mod, "The prime p")->required();
    c_refine->add_option("--method", refine.method, "Domain computation")
        ->check(CLI::IsMember({"ac", "solver"}))
        ->capture_default_str();

    GadgetArgs gadget;
    auto* c_gadget = app.add_subcommand("gadget-scan", "Search rectangularity obstructions and hardness gadgets");
    structure_opt(c_gadget, gadget.structure);
    c_gadget->add_option("--mod", gadget.mod, "The prime p")->required();
    c_gadget->add_option("--formula", gadget.formula, "Scan the relation defined by this formula instead");
    c_gadget->add_option("--protection", gadget.protection, "Carrier in which protection is judged")
        ->check(CLI::IsMember({"graph", "relation"}))
        ->capture_default_str();

    BinarizeArgs bin;
    auto* c_bin = app.add_subcommand("binarize", "Build the binarization b(H)");
    structure_opt(c_bin, bin.structure);
    c_bin->add_option("--instance", bin.instance, "Also translate this instance over H");

    RegressArgs regress;
    auto* c_regress = app.add_subcommand("regress", "Run the fixed-value regression suite");
    c_regress->add_option("--seed", regress.seed, "Seed of the randomized cross-checks")->capture_default_str();

    std::vector<std::string> argv_storage{"modcsp"};
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : argv_storage) argv.push_back(s.data());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::CallForVersion&) {
        out << kReportSchema << "\n";
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    const auto start = std::chrono::steady_clock::now();
    Report report;
    int code = kExitOk;
    std::string failure;
    try {
        if (*c_count) {
            report.command = "count";
            cmd_count(report, count);
        } else if (*c_reduce) {
            report.command = "reduce";
            cmd_reduce(report, reduce);
        } else if (*c_analyze) {
            report.command = "analyze";
            cmd_analyze(report, analyze);
        } else if (*c_formula) {
            report.command = "eval-formula";
            cmd_eval_formula(report, formula);
        } else if (*c_parity) {
            report.command = "parity";
            cmd_parity(report, parity);
        } else if (*c_refine) {
            report.command = "refine";
            cmd_refine(report, refine);
        } else if (*c_gadget) {
            report.command = "gadget-scan";
            cmd_gadget_scan(report, gadget);
        } else if (*c_bin) {
            report.command = "binarize";
            cmd_binarize(report, bin);
        } else if (*c_regress) {
            report.command = "regress";
            if (!cmd_regress(report, regress)) code = kExitPrecondition;
        }
    } catch (const MismatchError& e) {
        code = kExitMismatch;
        failure = e.what();
    } catch (const std::exception& e) {
        code = kExitPrecondition;
        failure = e.what();
    }
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (!failure.empty()) {
        err << "error: " << failure << "\n";
        report.result["error"] = failure;
    }
    if (json) {
        out << dump(finish(report, ms));
    } else if (failure.empty() || code == kExitMismatch) {
        out << report.text;
    }
    return code;
}

}  // namespace modcsp::cli
