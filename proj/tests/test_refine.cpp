// SPDX-License-Identifier: Apache-2.0
/**
 * @file test_refine.cpp
 * @brief Domain shrinking, refined structures and instances, the T_p solver
 *        and the refine-reduce-count pipeline against the oracle.
 */
#include <doctest.h>

#include <set>

#include "modcsp/automorphism.hpp"
#include "modcsp/fixtures.hpp"
#include "modcsp/oracle.hpp"
#include "modcsp/refine.hpp"
#include "test_support.hpp"

using namespace modcsp;

namespace {

std::vector<Assignment> solutions(const Instance& p, const Structure& h, const Domains* domains = nullptr) {
    std::vector<Assignment> out;
    for_each_solution(p, h, [&](const Assignment& a) {
        out.push_back(a);
        return true;
    }, domains);
    std::sort(out.begin(), out.end());
    return out;
}

Domains as_domains(const DomainAssignment& d) {
    Domains out;
    for (const auto& x : d.domains) out.emplace_back(x);
    return out;
}

/// The exact projections of the solution set on every variable.
std::vector<std::vector<Element>> solution_projections(const Instance& p, const Structure& h) {
    std::vector<std::set<Element>> seen(p.variable_count());
    for (const auto& a : solutions(p, h)) {
        for (std::size_t v = 0; v < a.size(); ++v) seen[v].insert(a[v]);
    }
    std::vector<std::vector<Element>> out;
    for (const auto& s : seen) out.emplace_back(s.begin(), s.end());
    return out;
}

/// Random instance over T_p with every relation including the constants;
/// equality constraints are added with small probability.
Instance random_tp_instance(testing::Rng& rng, const Structure& h, std::size_t vars, std::size_t cons) {
    auto p = testing::random_instance(rng, h, vars, cons);
    if (vars >= 2 && testing::coin(rng, 0.2)) {
        p.add_constraint({testing::uniform(rng, 0, vars - 1), testing::uniform(rng, 0, vars - 1)},
                         std::string(kEquality));
    }
    return p;
}

/// Every instance over T_p with exactly `vars` variables and `cons`
/// constraints drawn from R on ordered pairs and constants on single
/// variables, visited through `visit`.
template <class Visit>
void for_each_small_tp_instance(const Structure& h, std::size_t vars, std::size_t cons, Visit visit) {
    std::vector<std::pair<std::vector<std::size_t>, std::string>> atoms;
    for (std::size_t x = 0; x < vars; ++x) {
        for (std::size_t y = 0; y < vars; ++y) atoms.push_back({{x, y}, "R"});
    }
    for (std::size_t x = 0; x < vars; ++x) {
        for (Element a = 0; a < h.sort_size(SortId{0}); ++a) atoms.push_back({{x}, constant_name(h, SortId{0}, a)});
    }
    std::vector<std::size_t> pick(cons, 0);
    while (true) {
        Instance p;
        for (std::size_t v = 0; v < vars; ++v) p.add_variable("v" + std::to_string(v), "T");
        for (const auto i : pick) p.add_constraint(atoms[i].first, atoms[i].second);
        visit(p);
        std::size_t i = cons;
        while (i > 0 && ++pick[i - 1] == atoms.size()) {
            pick[i - 1] = 0;
            --i;
        }
        if (i == 0) break;
    }
}

}  // namespace

TEST_CASE("arc_consistency leaves a consistent instance unchanged") {
    const auto h = fixtures::t_p(2);
    Instance p;
    p.add_variable("v", "T");
    p.add_variable("w", "T");
    p.add_constraint({0, 1}, "R");
    const auto ac = arc_consistency(p, h);
    CHECK_FALSE(ac.domains.unsatisfiable);
    CHECK(ac.relations[0] == h.relation("R").tuples);
    CHECK(ac.domains.domains[0] == std::vector<Element>{0, 1, 2, 3});
    CHECK(ac.domains.domains[1] == std::vector<Element>{0, 1, 2, 3});
}

TEST_CASE("arc_consistency prunes the neighbours of a pinned variable") {
    // R(v,w) with w pinned to 2: only rows 2 and 3 of R contain (x,2).
    const auto h = fixtures::t_p(2);
    Instance p;
    p.add_variable("v", "T");
    p.add_variable("w", "T");
    p.add_variable("u", "T");
    p.add_constraint({0, 1}, "R");
    p.add_constraint({1}, "C_2");
    p.add_constraint({2, 0}, "R");
    const auto ac = arc_consistency(p, h);
    CHECK_FALSE(ac.domains.unsatisfiable);
    CHECK(ac.domains.domains[0] == std::vector<Element>{2, 3});
    CHECK(ac.domains.domains[1] == std::vector<Element>{2});
    CHECK(ac.domains.domains[2] == std::vector<Element>{0, 1, 2, 3});
    CHECK(ac.relations[0] == std::vector<Tuple>{{2, 2}, {3, 2}});
    // (x, v) for x in T and v in {2,3}, minus the forbidden (0,2),(1,2).
    CHECK(ac.relations[2].size() == 6);
}

TEST_CASE("arc_consistency flags an empty domain") {
    const auto h = fixtures::t_p(2);
    Instance p;
    p.add_variable("v", "T");
    p.add_variable("w", "T");
    p.add_constraint({0}, "C_0");
    p.add_constraint({1}, "C_2");
    p.add_constraint({0, 1}, "R");
    CHECK(arc_consistency(p, h).domains.unsatisfiable);
    CHECK(consistency_domains(p, h).unsatisfiable);
    CHECK_THROWS_AS((void)consistency_domains(p, h, 2), PreconditionError);
}

TEST_CASE("arc_consistency honours repeated variables, equality and initial domains") {
    const auto h = fixtures::t_p(2);
    Instance p;
    p.add_variable("v", "T");
    p.add_variable("w", "T");
    p.add_constraint({0, 1}, std::string(kEquality));
    p.add_constraint({1}, "C_3");
    auto ac = arc_consistency(p, h);
    CHECK(ac.domains.domains[0] == std::vector<Element>{3});

    DomainAssignment initial{{{0, 1}, {2, 3}}, false};
    Instance q;
    q.add_variable("v", "T");
    q.add_variable("w", "T");
    q.add_constraint({0, 1}, "R");
    ac = arc_consistency(q, h, &initial);
    CHECK(ac.domains.domains[0] == std::vector<Element>{0, 1});
    CHECK(ac.domains.domains[1] == std::vector<Element>{3});
}

TEST_CASE("arc_consistency is lossless on random instances") {
    testing::Rng rng(501);
    for (int round = 0; round < 120; ++round) {
        const auto h = round % 2 == 0 ? testing::random_structure(rng, 3, {2, 2, 3}, 0.6)
                                      : testing::random_two_sorted(rng, 2, 3, {{0, 1}, {1, 1}, {0, 0, 1}}, 0.6);
        const auto p = testing::random_instance(rng, h, testing::uniform(rng, 1, 5), testing::uniform(rng, 0, 5));
        const auto ac = arc_consistency(p, h);
        const auto all = solutions(p, h);
        if (ac.domains.unsatisfiable) {
            CHECK(all.empty());
            continue;
        }
        const auto d = as_domains(ac.domains);
        CHECK(solutions(p, h, &d) == all);
        // Every constraint's relation projects onto the domains of its scope.
        for (std::size_t k = 0; k < p.constraints().size(); ++k) {
            const auto& c = p.constraints()[k];
            for (std::size_t i = 0; i < c.scope.size(); ++i) {
                std::set<Element> proj;
                for (const auto& t : ac.relations[k]) proj.insert(t[i]);
                CHECK(std::vector<Element>(proj.begin(), proj.end()) == ac.domains.domains[c.scope[i]]);
            }
        }
    }
}

TEST_CASE("eliminate_singletons preserves the number of solutions") {
    const auto h = fixtures::t_p(2);
    SUBCASE("all variables pinned") {
        Instance p;
        p.add_variable("v", "T");
        p.add_variable("w", "T");
        p.add_constraint({0}, "C_3");
        p.add_constraint({1}, "C_2");
        p.add_constraint({0, 1}, "R");
        const auto r = eliminate_singletons(p, h, arc_consistency(p, h).domains);
        CHECK_FALSE(r.unsatisfiable);
        CHECK(r.instance.variable_count() == 0);
        CHECK(count_solutions(r.instance, r.structure).exact == 1);
        CHECK(r.pinned[0] == Element{3});
    }
    SUBCASE("no singleton") {
        Instance p;
        p.add_variable("v", "T");
        p.add_variable("w", "T");
        p.add_constraint({0, 1}, "R");
        const auto r = eliminate_singletons(p, h, arc_consistency(p, h).domains);
        CHECK(r.instance.variable_count() == 2);
        CHECK(r.instance.constraints().size() == 1);
        CHECK(count_solutions(r.instance, r.structure).exact == count_solutions(p, h).exact);
    }
    SUBCASE("random instances") {
        testing::Rng rng(502);
        for (int round = 0; round < 150; ++round) {
            const auto p = random_tp_instance(rng, h, testing::uniform(rng, 1, 5), testing::uniform(rng, 0, 6));
            const auto ac = arc_consistency(p, h);
            const auto r = eliminate_singletons(p, h, ac.domains);
            const auto expected = count_solutions(p, h).exact;
            if (r.unsatisfiable) CHECK(expected == 0);
            else CHECK(count_solutions(r.instance, r.structure).exact == expected);
        }
    }
}

TEST_CASE("solver_based_domains are the exact solution projections") {
    const auto h = fixtures::t_p(2);
    SUBCASE("unconstrained and pinned variables") {
        Instance p;
        p.add_variable("free", "T");
        p.add_variable("pinned", "T");
        p.add_constraint({1}, "C_1");
        const auto d = solver_based_domains(p, h);
        CHECK(d.domains[0] == std::vector<Element>{0, 1, 2, 3});
        CHECK(d.domains[1] == std::vector<Element>{1});
    }
    SUBCASE("at least as tight as arc-consistency, strictly on a cycle") {
        testing::Rng rng(503);
        for (int round = 0; round < 120; ++round) {
            const auto p = random_tp_instance(rng, h, testing::uniform(rng, 1, 4), testing::uniform(rng, 0, 6));
            const auto solver = solver_based_domains(p, h);
            const auto ac = arc_consistency(p, h).domains;
            if (solver.unsatisfiable) {
                CHECK(count_solutions(p, h).exact == 0);
                continue;
            }
            CHECK(solver.domains == solution_projections(p, h));
            REQUIRE_FALSE(ac.unsatisfiable);
            for (std::size_t v = 0; v < p.variable_count(); ++v) {
                CHECK(std::includes(ac.domains[v].begin(), ac.domains[v].end(), solver.domains[v].begin(),
                                    solver.domains[v].end()));
            }
        }
        // Disequality on {0,1} around a triangle: arc-consistent but unsatisfiable.
        Structure k2;
        const auto s = k2.add_sort("H", {"0", "1"});
        k2.add_relation("Ne", {s, s}, {{0, 1}, {1, 0}});
        k2 = with_constants(k2);
        Instance tri;
        for (int v = 0; v < 3; ++v) tri.add_variable("v" + std::to_string(v), "H");
        tri.add_constraint({0, 1}, "Ne");
        tri.add_constraint({1, 2}, "Ne");
        tri.add_constraint({2, 0}, "Ne");
        CHECK_FALSE(arc_consistency(tri, k2).domains.unsatisfiable);
        CHECK(solver_based_domains(tri, k2).unsatisfiable);
    }
    SUBCASE("errors") {
        Instance p;
        p.add_variable("v", "T");
        CHECK_THROWS_AS((void)solver_based_domains(p, fixtures::t_p(2, false)), PreconditionError);
        const DecisionSolver gives_up = [](const Instance&, const Structure&) -> std::optional<bool> { return {}; };
        CHECK_THROWS_AS((void)solver_based_domains(p, h, gives_up), Error);
    }
}

TEST_CASE("build_refinement constructs T*_p") {
    for (const std::uint64_t p : {2U, 3U}) {
        CAPTURE(p);
        const auto h = fixtures::t_p(p);
        const auto family = tp_star_family(h, p);
        REQUIRE(family.size() == p + 5);
        const auto r = build_refinement(h, family);
        const auto& g = r.structure;
        CHECK(g.sort_count() == p + 5);

        // Q_{-1,p+2} = ({0..p+1} × {p+1}) ∪ {(p,p),(p+1,p)}.
        const auto gp2 = g.sort_id("G" + std::to_string(p + 2));
        const std::vector<SortId> sig{g.sort_id("G-1"), gp2};
        const auto& q = g.relation(refined_relation_name(g, "R", sig));
        std::set<std::pair<Element, Element>> images;
        for (const auto& t : q.tuples) images.insert({r.image(sig[0], t[0]), r.image(sig[1], t[1])});
        std::set<std::pair<Element, Element>> expected;
        const auto top = static_cast<Element>(p);
        for (Element x = 0; x <= top + 1; ++x) expected.insert({x, top + 1});
        expected.insert({top, top});
        expected.insert({top + 1, top});
        CHECK(images == expected);

        // Every pair of sorts carries a copy of R; constants only on their singletons.
        std::size_t binary = 0;
        std::size_t constants = 0;
        for (const auto& [name, origin] : r.origin) {
            if (origin.relation == "R") {
                ++binary;
            } else {
                ++constants;
                REQUIRE(origin.refined_sorts.size() == 1);
                const auto a = parse_constant_name(h, origin.relation);
                REQUIRE(a.has_value());
                CHECK(g.sort(origin.refined_sorts[0]).name == "G" + std::to_string(a->element));
            }
        }
        CHECK(binary == (p + 5) * (p + 5));
        CHECK(constants == p + 2);

        // T_p is p-rigid, T*_p is not: π cycles 0..p-1 on G-1 and on G<p+3>.
        CHECK(is_p_rigid(h, p));
        Mapping pi = identity_mapping(g);
        for (const auto& name : {std::string("G-1"), "G" + std::to_string(p + 3)}) {
            const auto s = g.sort_id(name);
            for (Element a = 0; a < g.sort_size(s); ++a) {
                const auto b = r.image(s, a);
                if (b < p) pi.components[s.value][a] = *r.preimage(s, static_cast<Element>((b + 1) % p));
            }
        }
        CHECK(is_automorphism(pi, g));
        CHECK(has_order_p(pi, p));
        CHECK_FALSE(is_p_rigid(g, p));
    }
}

TEST_CASE("reducing T*_p leaves relations that are products of their projections") {
    for (const std::uint64_t p : {2U, 3U}) {
        CAPTURE(p);
        const auto h = fixtures::t_p(p);
        const auto r = build_refinement(h, tp_star_family(h, p));
        const auto reduced = p_reduce(r.structure, p).result;
        const auto top = static_cast<Element>(p);
        auto images = [&](std::string_view name) {
            const auto s = reduced.sort_id(name);
            std::vector<std::string> out;
            for (Element a = 0; a < reduced.sort_size(s); ++a) out.push_back(reduced.element_name(s, a));
            return out;
        };
        CHECK(images("G-1") == std::vector<std::string>{std::to_string(top), std::to_string(top + 1)});
        CHECK(images("G" + std::to_string(p + 3)) == std::vector<std::string>{std::to_string(top + 1)});
        CHECK(images("G" + std::to_string(p + 2)) == std::vector<std::string>{std::to_string(top), std::to_string(top + 1)});
        for (Element a = 0; a <= top + 1; ++a) CHECK(images("G" + std::to_string(a)).size() == 1);
        for (const auto& rel : reduced.relations()) {
            CAPTURE(rel.name);
            std::size_t product = 1;
            for (std::size_t i = 0; i < rel.arity(); ++i) {
                std::set<Element> proj;
                for (const auto& t : rel.tuples) proj.insert(t[i]);
                product *= proj.size();
            }
            CHECK(rel.tuples.size() == product);
        }
    }
}

TEST_CASE("build_refinement with the original sorts copies the structure") {
    testing::Rng rng(504);
    const auto h = testing::random_structure(rng, 3, {2, 3}, 1.0);  // full projections
    const std::vector<RefinedDomain> family{{"H'", SortId{0}, {0, 1, 2}}};
    const auto r = build_refinement(h, family);
    CHECK(r.structure.relations().size() == h.relations().size());
    for (const auto& rel : h.relations()) {
        const std::vector<SortId> sig(rel.arity(), SortId{0});
        CHECK(r.structure.relation(refined_relation_name(r.structure, rel.name, sig)).tuples == rel.tuples);
    }
    const auto t = fixtures::t_p(2, false);
    const auto rt = build_refinement(t, std::vector<RefinedDomain>{{"T'", SortId{0}, {0, 1, 2, 3}}});
    CHECK(rt.structure.relation("R@T',T'").tuples == t.relation("R").tuples);
}

TEST_CASE("build_refinement rejects malformed families") {
    testing::Rng rng(505);
    const auto h = testing::random_two_sorted(rng, 2, 2, {{0, 1}});
    const std::vector<std::string> mixed{"a0", "b1"};
    CHECK_THROWS_AS((void)domain_from_names(h, "X", mixed), PreconditionError);
    const std::vector<std::string> fine{"a1"};
    CHECK(domain_from_names(h, "X", fine).sort == SortId{0});
    CHECK_THROWS_AS((void)build_refinement(h, std::vector<RefinedDomain>{{"E", SortId{0}, {}}}), PreconditionError);
    CHECK_THROWS_AS((void)build_refinement(h, std::vector<RefinedDomain>{{"E", SortId{0}, {5}}}), PreconditionError);
    CHECK_THROWS_AS(
        (void)build_refinement(h, std::vector<RefinedDomain>{{"E", SortId{0}, {0}}, {"E", SortId{1}, {0}}}),
        PreconditionError);
}

TEST_CASE("refine_instance is lossless") {
    SUBCASE("identity refinement") {
        const auto t = fixtures::t_p(2, false);
        const auto r = build_refinement(t, std::vector<RefinedDomain>{{"T'", SortId{0}, {0, 1, 2, 3}}});
        Instance p;
        p.add_variable("x", "T");
        p.add_variable("y", "T");
        p.add_variable("z", "T");
        p.add_constraint({0, 1}, "R");
        p.add_constraint({1, 2}, "R");
        p.add_constraint({2, 2}, "R");
        const std::vector<SortId> sigma(3, SortId{0});
        const auto q = refine_instance(p, t, r, sigma);
        CHECK(solutions(q, r.structure) == solutions(p, t));
    }
    SUBCASE("incompatible domain") {
        const auto h = fixtures::t_p(2);
        const auto r = build_refinement(h, tp_star_family(h, 2));
        Instance p;
        p.add_variable("x", "T");
        p.add_constraint({0}, "C_0");
        const std::vector<SortId> whole{r.structure.sort_id("G-1")};
        CHECK_THROWS_AS((void)refine_instance(p, h, r, whole), PreconditionError);
        const std::vector<SortId> pinned{r.structure.sort_id("G0")};
        CHECK(count_solutions(refine_instance(p, h, r, pinned), r.structure).exact == 1);
    }
    SUBCASE("solver-based refinements of random T_2 instances") {
        const auto h = fixtures::t_p(2);
        testing::Rng rng(506);
        for (int round = 0; round < 80; ++round) {
            const auto p = testing::random_instance(rng, h, testing::uniform(rng, 1, 4), testing::uniform(rng, 0, 5));
            const auto d = solver_based_domains(p, h);
            if (d.unsatisfiable) continue;
            const auto family = domain_family(p, h, d);
            const auto r = build_refinement(h, family.members);
            std::vector<SortId> sigma;
            for (const auto m : family.member_of) sigma.push_back(SortId{m});
            CHECK(sort_function_for(r, p, h, d) == sigma);
            const auto q = refine_instance(p, h, r, sigma);
            std::vector<Assignment> lifted;
            for (const auto& phi : solutions(p, h)) {
                const auto l = lift_assignment(r, sigma, phi);
                REQUIRE(l.has_value());
                lifted.push_back(*l);
            }
            std::sort(lifted.begin(), lifted.end());
            CHECK(solutions(q, r.structure) == lifted);
        }
    }
}

TEST_CASE("recognize_tp is structural") {
    CHECK(recognize_tp(fixtures::t_p(2), 2).has_value());
    CHECK(recognize_tp(fixtures::t_p(3), 3)->top == 3);
    CHECK_FALSE(recognize_tp(fixtures::t_p(2, false), 2).has_value());
    CHECK_FALSE(recognize_tp(fixtures::t_p(3), 2).has_value());
    CHECK_FALSE(recognize_tp(fixtures::affine(2), 2).has_value());
    // A relabelled copy is recognized with the roles moved along.
    Structure h;
    const auto s = h.add_sort("T", {"a", "b", "c", "d"});
    std::vector<Tuple> r;
    for (Element x = 0; x < 4; ++x) {
        for (Element y = 0; y < 4; ++y) {
            if (!(y == 0 && (x == 1 || x == 3))) r.push_back({x, y});
        }
    }
    h.add_relation("E", {s, s}, r);
    const auto shape = recognize_tp(with_constants(h), 2);
    REQUIRE(shape.has_value());
    CHECK(shape->top == 0);
    CHECK(shape->low == std::vector<Element>{1, 3});
    CHECK(shape->free == 2);
}

TEST_CASE("solve_tp agrees with the oracle") {
    SUBCASE("fixed cases") {
        const auto h = fixtures::t_p(2);
        Instance forbidden;
        forbidden.add_variable("v", "T");
        forbidden.add_variable("w", "T");
        forbidden.add_constraint({0}, "C_0");
        forbidden.add_constraint({1}, "C_2");
        forbidden.add_constraint({0, 1}, "R");
        const auto s = solve_tp(forbidden, h, 2);
        CHECK(s.residue == 0);
        CHECK(s.unsatisfiable);

        for (const std::uint64_t p : {2U, 3U}) {
            const auto t = fixtures::t_p(p);
            for (std::size_t m = 0; m <= 4; ++m) {
                Instance free;
                for (std::size_t v = 0; v < m; ++v) free.add_variable("v" + std::to_string(v), "T");
                CHECK(solve_tp(free, t, p).residue == count_solutions_mod(free, t, p));
            }
        }
        CHECK(solve_tp(Instance{}, h, 2).residue == 1);
        CHECK_THROWS_AS((void)solve_tp(Instance{}, fixtures::affine(2), 2), PreconditionError);
    }
    SUBCASE("random instances") {
        testing::Rng rng(507);
        for (const std::uint64_t p : {2U, 3U}) {
            const auto h = fixtures::t_p(p);
            for (int round = 0; round < 150; ++round) {
                const auto q = random_tp_instance(rng, h, testing::uniform(rng, 1, 5), testing::uniform(rng, 0, 6));
                CHECK(solve_tp(q, h, p).residue == count_solutions_mod(q, h, p));
            }
        }
    }
    SUBCASE("all two-variable instances with up to two constraints") {
        for (const std::uint64_t p : {2U, 3U}) {
            const auto h = fixtures::t_p(p);
            for (std::size_t cons = 0; cons <= 2; ++cons) {
                for_each_small_tp_instance(h, 2, cons, [&](const Instance& q) {
                    CHECK(solve_tp(q, h, p).residue == count_solutions_mod(q, h, p));
                });
            }
        }
    }
}

TEST_CASE("refine_and_reduce agrees with the oracle") {
    SUBCASE("T_2 and T_3 instances") {
        testing::Rng rng(508);
        for (const std::uint64_t p : {2U, 3U}) {
            const auto h = fixtures::t_p(p);
            std::size_t products = 0;
            for (int round = 0; round < 60; ++round) {
                const auto q = random_tp_instance(rng, h, testing::uniform(rng, 1, 4), testing::uniform(rng, 0, 5));
                const auto r = refine_and_reduce(q, h, p);
                CHECK(r.residue == count_solutions_mod(q, h, p));
                if (r.method == CountMethod::Product) ++products;
            }
            CHECK(products > 0);
        }
    }
    SUBCASE("free variables take the product shortcut") {
        const auto h = fixtures::t_p(2);
        Instance q;
        q.add_variable("x", "T");
        q.add_variable("y", "T");
        q.add_constraint({0, 1}, "R");
        const auto r = refine_and_reduce(q, h, 2);
        CHECK(r.method == CountMethod::Product);
        CHECK(r.reduction_steps > 0);
        CHECK(r.residue == count_solutions_mod(q, h, 2));
    }
    SUBCASE("a rigid refinement counts like the plain instance") {
        const auto h = with_constants(fixtures::chain_order());
        testing::Rng rng(509);
        for (int round = 0; round < 40; ++round) {
            const auto q = testing::random_instance(rng, h, testing::uniform(rng, 1, 4), testing::uniform(rng, 0, 4));
            for (const std::uint64_t p : {2U, 3U}) {
                const auto r = refine_and_reduce(q, h, p);
                CHECK(r.residue == count_solutions_mod(q, h, p));
            }
        }
    }
    SUBCASE("unsatisfiable and precondition") {
        const auto h = fixtures::t_p(2);
        Instance q;
        q.add_variable("x", "T");
        q.add_constraint({0}, "C_0");
        q.add_constraint({0}, "C_1");
        const auto r = refine_and_reduce(q, h, 2);
        CHECK(r.method == CountMethod::Unsatisfiable);
        CHECK(r.residue == 0);
        CHECK_THROWS_AS((void)refine_and_reduce(q, fixtures::t_p(2, false), 2), PreconditionError);
        CHECK(to_string(CountMethod::Fallback) == "fallback");
    }
}
