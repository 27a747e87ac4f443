// SPDX-License-Identifier: Apache-2.0
/**
 * @file regression.cpp
 * @brief Frozen-value checks on the bundled fixtures.
 */
#include "modcsp/regression.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "modcsp/automorphism.hpp"
#include "modcsp/expansion.hpp"
#include "modcsp/fixtures.hpp"
#include "modcsp/mpp.hpp"
#include "modcsp/oracle.hpp"
#include "modcsp/properties.hpp"
#include "modcsp/refine.hpp"

namespace modcsp {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string show(const std::vector<Tuple>& tuples) {
    std::ostringstream out;
    out << '{';
    for (std::size_t i = 0; i < tuples.size(); ++i) {
        if (i > 0) out << ',';
        out << '(';
        for (std::size_t k = 0; k < tuples[i].size(); ++k) out << (k > 0 ? "," : "") << tuples[i][k];
        out << ')';
    }
    out << '}';
    return out.str();
}

std::string show(const std::vector<std::string>& names) {
    std::string out = "{";
    for (std::size_t i = 0; i < names.size(); ++i) out += (i > 0 ? "," : "") + names[i];
    return out + "}";
}

/// Empty on success, otherwise "expected …, got …".
template <typename T>
std::string expect_eq(const T& expected, const T& actual) {
    if (expected == actual) return {};
    std::ostringstream out;
    if constexpr (std::is_same_v<T, std::vector<Tuple>> || std::is_same_v<T, std::vector<std::string>>) {
        out << "expected " << show(expected) << ", got " << show(actual);
    } else {
        out << "expected " << expected << ", got " << actual;
    }
    return out.str();
}

std::string expect(bool condition, std::string_view what) { return condition ? std::string{} : std::string(what); }

class Runner {
public:
    void run(std::string fixture, std::string name, const std::function<std::string()>& body) {
        const auto start = Clock::now();
        RegressionCheck check{std::move(fixture), std::move(name), false, {}, 0.0};
        try {
            check.detail = body();
            check.passed = check.detail.empty();
        } catch (const std::exception& e) {
            check.detail = std::string("exception: ") + e.what();
        }
        check.seconds = seconds_since(start);
        summary.checks.push_back(std::move(check));
    }

    RegressionSummary summary;
};

MppFormula single_relation_formula(const Structure& h, std::vector<std::string> free,
                                   std::vector<QuantifierBlock> blocks, std::vector<std::string> args) {
    const std::string& sort = h.sorts().at(0).name;
    MppFormula f;
    for (auto& v : free) f.free.push_back({std::move(v), sort});
    f.blocks = std::move(blocks);
    f.atoms.push_back({"R", std::move(args)});
    return f;
}

/// A random instance over `h` with at most `max_vars` variables of its only
/// sort and at most `max_cons` constraints.
Instance random_instance(std::mt19937_64& rng, const Structure& h, std::size_t max_vars, std::size_t max_cons) {
    auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
    Instance p;
    const std::size_t vars = pick(1, max_vars);
    for (std::size_t v = 0; v < vars; ++v) p.add_variable("v" + std::to_string(v), h.sorts().at(0).name);
    const std::size_t cons = pick(0, max_cons);
    for (std::size_t c = 0; c < cons; ++c) {
        const Relation& r = h.relations()[pick(0, h.relations().size() - 1)];
        std::vector<std::size_t> scope;
        for (std::size_t k = 0; k < r.arity(); ++k) scope.push_back(pick(0, vars - 1));
        p.add_constraint(std::move(scope), r.name);
    }
    return p;
}

std::vector<std::string> sort_names(const Structure& h, std::string_view sort) {
    const SortId s = h.sort_id(sort);
    std::vector<std::string> out;
    for (Element a = 0; a < h.sort_size(s); ++a) out.push_back(h.element_name(s, a));
    return out;
}

void quantifier_checks(Runner& run, const Structure& h) {
    run.run("quantifier-order", "split modular quantifiers define {1,2}", [&] {
        const auto f = single_relation_formula(h, {"x"}, {modular_block({"y"}, 3), modular_block({"z"}, 3)},
                                               {"x", "y", "z"});
        return expect_eq(std::vector<Tuple>{{1}, {2}}, evaluate_formula(h, f).tuples);
    });
    run.run("quantifier-order", "grouped modular quantifiers define {2}", [&] {
        const auto f = single_relation_formula(h, {"x"}, {modular_block({"y", "z"}, 3)}, {"x", "y", "z"});
        return expect_eq(std::vector<Tuple>{{2}}, evaluate_formula(h, f).tuples);
    });
}

void tp_checks(Runner& run, const Structure& t, std::uint64_t p, std::uint64_t seed) {
    const std::string fixture = "t_" + std::to_string(p);
    const auto top = static_cast<Element>(p);
    run.run(fixture, "is p-rigid", [&] { return expect(is_p_rigid(t, p), "an automorphism of order p exists"); });
    run.run(fixture, "three free variables have (p+2)^3 solutions", [&] {
        Instance free;
        for (int v = 0; v < 3; ++v) free.add_variable("x" + std::to_string(v), t.sorts()[0].name);
        const std::uint64_t n = p + 2;
        return expect_eq(BigInt(n * n * n), count_solutions(free, t).exact);
    });
    run.run(fixture, "R restricted to {p,p+1} is full", [&] {
        const auto sub = induced_substructure(t, {{top, top + 1}});
        return expect_eq(std::size_t{4}, sub.relation("R").size());
    });
    run.run(fixture, "solve_tp equals the oracle modulo p on seeded instances", [&] {
        std::mt19937_64 rng(seed + p);
        for (int round = 0; round < 100; ++round) {
            const Instance inst = random_instance(rng, t, 4, 5);
            const auto got = solve_tp(inst, t, p).residue;
            const auto want = count_solutions_mod(inst, t, p);
            if (got != want) return "round " + std::to_string(round) + ": " + expect_eq(want, got);
        }
        return std::string{};
    });

    const std::string refined = "t_" + std::to_string(p) + " refinement";
    const Refinement r = build_refinement(t, tp_star_family(t, p));
    run.run(refined, "has p+5 sorts and the stated Q_{-1,p+2}", [&] {
        const Structure& g = r.structure;
        if (g.sort_count() != p + 5) return "sort count " + expect_eq(std::size_t{p + 5}, g.sort_count());
        const std::vector<SortId> sig{g.sort_id("G-1"), g.sort_id("G" + std::to_string(p + 2))};
        std::vector<Tuple> images;
        for (const auto& tu : g.relation(refined_relation_name(g, "R", sig)).tuples) {
            images.push_back({r.image(sig[0], tu[0]), r.image(sig[1], tu[1])});
        }
        canonicalize(images);
        std::vector<Tuple> expected;
        for (Element x = 0; x <= top + 1; ++x) expected.push_back({x, top + 1});
        expected.push_back({top, top});
        expected.push_back({top + 1, top});
        canonicalize(expected);
        return expect_eq(expected, images);
    });
    run.run(refined, "is not p-rigid", [&] { return expect(!is_p_rigid(r.structure, p), "no automorphism of order p"); });
    run.run(refined, "p-reduction shrinks G-1 and G<p+3> and leaves product relations", [&] {
        const Structure reduced = p_reduce(r.structure, p).result;
        const std::vector<std::string> low{std::to_string(top), std::to_string(top + 1)};
        if (auto d = expect_eq(low, sort_names(reduced, "G-1")); !d.empty()) return "G-1: " + d;
        const std::string last = "G" + std::to_string(p + 3);
        if (auto d = expect_eq(std::vector<std::string>{std::to_string(top + 1)}, sort_names(reduced, last));
            !d.empty()) {
            return last + ": " + d;
        }
        for (const auto& rel : reduced.relations()) {
            std::size_t product = 1;
            for (std::size_t i = 0; i < rel.arity(); ++i) {
                std::set<Element> proj;
                for (const auto& tu : rel.tuples) proj.insert(tu[i]);
                product *= proj.size();
            }
            if (product != rel.size()) return rel.name + " is not a product: " + expect_eq(product, rel.size());
        }
        return std::string{};
    });
}

void maltsev_example_checks(Runner& run, const Structure& h, const std::string& fixture) {
    const auto projection = [&] {
        return evaluate_formula(h, single_relation_formula(h, {"x", "y"}, {modular_block({"z"}, 2)}, {"x", "y", "z"}));
    };
    run.run(fixture, "mod-2 projection is {(0,0),(0,1),(1,1)}", [&] {
        return expect_eq(std::vector<Tuple>{{0, 0}, {0, 1}, {1, 1}}, projection().tuples);
    });
    run.run(fixture, "the mod-2 projection is not rectangular", [&] {
        return expect(find_rectangularity_witness(projection()).has_value(), "no rectangularity witness found");
    });
    run.run(fixture, "has a verified Mal'tsev polymorphism", [&] {
        const auto f = find_maltsev(h);
        if (!f) return std::string("no Mal'tsev polymorphism found");
        return expect(is_maltsev_polymorphism(*f, h), "the operation found fails verification");
    });
    run.run(fixture, "(1,0) has two extensions in R", [&] {
        const std::vector<std::size_t> positions{0, 1};
        const std::vector<Element> partial{1, 0};
        return expect_eq(BigInt(2), count_ext(h.relation("R"), positions, partial));
    });
}

}  // namespace

RegressionFixtures RegressionFixtures::standard() {
    return {fixtures::quantifier_order(),
            fixtures::t_p(2),
            fixtures::t_p(3),
            fixtures::maltsev_not_2_rectangular(false),
            fixtures::maltsev_not_2_rectangular(true),
            fixtures::rectangular_not_permutable(),
            fixtures::permutable_not_maltsev(),
            fixtures::rigid_digraph()};
}

std::size_t RegressionSummary::failures() const {
    return static_cast<std::size_t>(
        std::count_if(checks.begin(), checks.end(), [](const RegressionCheck& c) { return !c.passed; }));
}

RegressionSummary run_regression_suite(const RegressionFixtures& fx, std::uint64_t seed) {
    const auto start = Clock::now();
    Runner run;
    quantifier_checks(run, fx.quantifier_order);
    tp_checks(run, fx.t2, 2, seed);
    tp_checks(run, fx.t3, 3, seed);

    maltsev_example_checks(run, fx.maltsev_example, "maltsev-not-2-rectangular");
    maltsev_example_checks(run, fx.maltsev_example_constants, "maltsev-not-2-rectangular with constants");
    run.run("maltsev-not-2-rectangular with constants", "is 2-rigid", [&] {
        return expect(is_p_rigid(fx.maltsev_example_constants, 2), "an automorphism of order 2 exists");
    });

    run.run("rectangular-not-permutable", "(a1,a6) witnesses failure of 2-permutability", [&] {
        const Structure& h = fx.rect_not_perm;
        const std::vector<Congruence> cs{congruence_from_relation(h, "R"), congruence_from_relation(h, "Q")};
        const auto report = check_p_permutability(cs, 2);
        if (report.ok || !report.witness) return std::string("reported 2-permutable");
        const std::vector<std::string> got{h.element_name(SortId{0}, report.witness->x),
                                           h.element_name(SortId{0}, report.witness->y)};
        return expect_eq(std::vector<std::string>{"a1", "a6"}, got);
    });
    run.run("permutable-not-maltsev", "is 2-permutable", [&] {
        const Structure& h = fx.perm_not_maltsev;
        const std::vector<Congruence> cs{congruence_from_relation(h, "R"), congruence_from_relation(h, "Q")};
        return expect(check_p_permutability(cs, 2).ok, "reported not 2-permutable");
    });
    run.run("permutable-not-maltsev", "has no Mal'tsev polymorphism", [&] {
        return expect(!find_maltsev(fx.perm_not_maltsev).has_value(), "a Mal'tsev polymorphism was found");
    });

    const Structure& dg = fx.rigid_digraph;
    run.run("rigid-digraph", "the only automorphism is the identity", [&] {
        const auto aut = enumerate_automorphisms(dg);
        if (aut.size() != 1) return "automorphism count " + expect_eq(std::size_t{1}, aut.size());
        return expect(aut[0].map == identity_mapping(dg), "the automorphism is not the identity");
    });
    run.run("rigid-digraph", "the square has 16 vertices and 9 edges", [&] {
        const Structure h2 = power(dg, 2);
        if (auto d = expect_eq(std::size_t{16}, h2.universe_size()); !d.empty()) return "vertices: " + d;
        return expect_eq(std::size_t{9}, h2.relation("E").size());
    });
    run.run("rigid-digraph", "the square has the order-2 automorphism swapping (a,d) and (c,d)", [&] {
        const Structure h2 = power(dg, 2);
        Mapping swap = identity_mapping(h2);
        const Element ad = h2.element(SortId{0}, "(a,d)");
        const Element cd = h2.element(SortId{0}, "(c,d)");
        std::swap(swap.components[0][ad], swap.components[0][cd]);
        const auto aut = enumerate_automorphisms(h2);
        return expect(std::find(aut.begin(), aut.end(), Automorphism{swap, 2}) != aut.end(),
                      "the swap is not among the automorphisms");
    });

    run.summary.seconds = seconds_since(start);
    return std::move(run.summary);
}

}  // namespace modcsp
