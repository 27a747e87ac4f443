// SPDX-License-Identifier: Apache-2.0
/**
 * @file test_core.cpp
 * @brief Structures, instances, products, factors, isomorphisms and JSON.
 */
#include <doctest.h>

#include <set>

#include "modcsp/core.hpp"
#include "modcsp/fixtures.hpp"
#include "modcsp/io.hpp"
#include "modcsp/oracle.hpp"
#include "test_support.hpp"

using namespace modcsp;

namespace {

std::size_t count_kind(const std::vector<Violation>& v, Violation::Kind k) {
    std::size_t n = 0;
    for (const auto& x : v) n += x.kind == k ? 1 : 0;
    return n;
}

/// Applies a single-sort permutation to every relation of `h`.
Structure permuted(const Structure& h, const std::vector<Element>& perm) {
    Structure out;
    const SortId s = out.add_sort(h.sorts()[0].name, h.sorts()[0].elements);
    for (const auto& r : h.relations()) {
        std::vector<Tuple> tuples;
        for (auto t : r.tuples) {
            for (auto& e : t) e = perm[e];
            tuples.push_back(t);
        }
        out.add_relation(r.name, std::vector<SortId>(r.arity(), s), tuples);
    }
    return out;
}

}  // namespace

TEST_CASE("validate_structure accepts T_2 and reports mutations") {
    const auto spec = to_spec(fixtures::t_p(2));
    CHECK(validate_structure(spec).empty());
    CHECK(validate_structure(fixtures::t_p(2)).empty());

    auto wrong_arity = spec;
    for (auto& r : wrong_arity.relations) {
        if (r.name == "R") r.tuples.push_back({"0"});
    }
    const auto v1 = validate_structure(wrong_arity);
    REQUIRE(v1.size() == 1);
    CHECK(v1[0].kind == Violation::Kind::ArityMismatch);

    auto unknown = spec;
    for (auto& r : unknown.relations) {
        if (r.name == "R") r.tuples.push_back({"0", "9"});
    }
    const auto v2 = validate_structure(unknown);
    REQUIRE(v2.size() == 1);
    CHECK(v2[0].kind == Violation::Kind::UnknownElement);
    CHECK(v2[0].relation == "R");
    CHECK_THROWS_AS((void)build_structure(unknown), PreconditionError);

    auto dup = spec;
    dup.relations[0].tuples.push_back(dup.relations[0].tuples[0]);
    CHECK(count_kind(validate_structure(dup), Violation::Kind::DuplicateTuple) == 1);
}

TEST_CASE("natural order of element names") {
    CHECK(natural_less("2", "10"));
    CHECK_FALSE(natural_less("10", "2"));
    CHECK(natural_less("a2", "a10"));
    CHECK(natural_less("a", "b"));
}

TEST_CASE("direct product of the rigid digraph with itself") {
    const auto h = fixtures::rigid_digraph();
    const auto h2 = direct_product(h, h);
    CHECK(h2.universe_size() == 16);
    CHECK(h2.relation("E").size() == 9);
    CHECK(power(h, 2) == h2);
    CHECK(power(h, 3).universe_size() == 64);
    CHECK(power(h, 3).relation("E").size() == 27);
    CHECK(find_isomorphism(power(h, 1), h).has_value());
    CHECK_THROWS_AS((void)power(h, 0), PreconditionError);
    CHECK_THROWS_AS((void)direct_product(h, fixtures::t_p(2)), PreconditionError);
}

TEST_CASE("product with the unit structure is isomorphic to the factor") {
    const auto h = fixtures::t_p(2);
    const auto prod = direct_product(h, unit_structure_like(h));
    CHECK(find_isomorphism(prod, h).has_value());
    testing::Rng rng(11);
    for (int i = 0; i < 10; ++i) {
        const auto a = testing::random_structure(rng, 3, {2, 1});
        const auto b = testing::random_structure(rng, 2, {2, 1});
        const auto ab = direct_product(a, b);
        for (std::size_t r = 0; r < a.relations().size(); ++r) {
            CHECK(ab.relations()[r].size() == a.relations()[r].size() * b.relations()[r].size());
        }
    }
}

TEST_CASE("induced substructures") {
    const auto t2 = fixtures::t_p(2, false);
    const auto sub = induced_substructure(t2, {{2, 3}});
    CHECK(sub.relation("R").size() == 4);  // full {2,3}²
    CHECK(induced_substructure(t2, {{0, 1, 2, 3}}) == t2);
    CHECK(induced_substructure(t2, {{}}).relation("R").size() == 0);
    CHECK_THROWS_AS((void)induced_substructure(t2, {{7}}), PreconditionError);
}

TEST_CASE("factor structures") {
    const auto t2 = fixtures::t_p(2, false);
    const auto [same, q0] = factor_structure(t2, discrete_partition(t2));
    CHECK(find_isomorphism(same, t2).has_value());

    Partition one{{{0, 0, 0, 0}}};
    const auto [point, q1] = factor_structure(t2, one);
    CHECK(point.universe_size() == 1);
    CHECK(point.relation("R").size() == 1);

    // Merge {0,1}: brute-force image of every tuple.
    Partition merge{{{0, 0, 1, 2}}};
    const auto [f, q] = factor_structure(t2, merge);
    std::set<Tuple> expected;
    for (const auto& t : t2.relation("R").tuples) expected.insert({q(SortId{0}, t[0]), q(SortId{0}, t[1])});
    CHECK(std::set<Tuple>(f.relation("R").tuples.begin(), f.relation("R").tuples.end()) == expected);
    CHECK(f.sort_size(SortId{0}) == 3);
    CHECK(is_homomorphism(q, t2, f));
}

TEST_CASE("factor by a kernel embeds injectively") {
    testing::Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        const auto g = testing::random_structure(rng, 3, {2}, 0.4);
        const auto h = testing::random_structure(rng, 3, {2}, 0.6);
        for_each_homomorphism(g, h, [&](const Mapping& phi) {
            const auto theta = kernel(phi, g);
            const auto [gq, q] = factor_structure(g, theta);
            // phi factors through q; the induced map is injective.
            Mapping induced{{std::vector<Element>(gq.sort_size(SortId{0}), 0)}};
            for (Element e = 0; e < g.sort_size(SortId{0}); ++e) induced.components[0][q(SortId{0}, e)] = phi(SortId{0}, e);
            CHECK(is_homomorphism(induced, gq, h));
            std::set<Element> images(induced.components[0].begin(), induced.components[0].end());
            CHECK(images.size() == induced.components[0].size());
            return true;
        });
    }
}

TEST_CASE("homomorphism checks") {
    const auto h = fixtures::rigid_digraph();
    CHECK(is_homomorphism(identity_mapping(h), h, h));
    // Constant map onto the non-loop vertex a.
    CHECK_FALSE(is_homomorphism(Mapping{{{0, 0, 0, 0}}}, h, h));
    testing::Rng rng(3);
    const auto g = testing::random_structure(rng, 3, {2}, 0.3);
    const auto k = testing::random_structure(rng, 3, {2}, 0.7);
    std::vector<Mapping> gk;
    std::vector<Mapping> kk;
    for_each_homomorphism(g, k, [&](const Mapping& m) { gk.push_back(m); return gk.size() < 5; });
    for_each_homomorphism(k, k, [&](const Mapping& m) { kk.push_back(m); return kk.size() < 5; });
    for (const auto& a : gk) {
        for (const auto& b : kk) CHECK(is_homomorphism(compose(b, a), g, k));
    }
    CHECK_THROWS_AS((void)is_homomorphism(Mapping{{{0, 0}}}, h, h), PreconditionError);
}

TEST_CASE("isomorphism search") {
    const auto t2 = fixtures::t_p(2, false);
    const auto id = find_isomorphism(t2, t2);
    REQUIRE(id.has_value());
    CHECK(*id == identity_mapping(t2));

    const std::vector<Element> perm{3, 1, 0, 2};
    const auto relabeled = permuted(t2, perm);
    const auto w = find_isomorphism(t2, relabeled);
    REQUIRE(w.has_value());
    CHECK(is_homomorphism(*w, t2, relabeled));
    CHECK(is_homomorphism(inverse(*w), relabeled, t2));

    auto smaller = t2;
    auto tuples = smaller.relation("R").tuples;
    tuples.pop_back();
    smaller.add_relation("R", smaller.relation("R").signature, tuples, true);
    CHECK_FALSE(find_isomorphism(t2, smaller).has_value());

    testing::Rng rng(17);
    for (int i = 0; i < 30; ++i) {
        const auto a = testing::random_structure(rng, 4, {2}, 0.4);
        const auto b = testing::random_structure(rng, 4, {2}, 0.4);
        CHECK(find_isomorphism(a, b).has_value() == find_isomorphism(b, a).has_value());
    }
}

TEST_CASE("anchored isomorphism") {
    // Path 0 -> 1 -> 2 reversed onto itself only if anchors allow.
    Structure h;
    const SortId s = h.add_sort("V", {"x", "y", "z"});
    h.add_relation("E", {s, s}, {{0, 1}, {0, 2}});
    const std::vector<Anchor> y{{s, 1}};
    const std::vector<Anchor> z{{s, 2}};
    const std::vector<Anchor> x{{s, 0}};
    CHECK(find_isomorphism(h, h, y, z).has_value());
    CHECK_FALSE(find_isomorphism(h, h, y, x).has_value());
}

TEST_CASE("set partitions are enumerated once each") {
    const std::size_t bell[] = {1, 1, 2, 5, 15, 52, 203};
    for (std::size_t n = 0; n <= 6; ++n) {
        std::set<std::vector<std::uint32_t>> seen;
        for_each_set_partition(n, [&](const auto& labels) {
            seen.insert(labels);
            return true;
        });
        CHECK(seen.size() == bell[n]);
    }
}

TEST_CASE("instance and structure views") {
    const auto t2 = fixtures::t_p(2);
    Instance empty;
    const auto g = instance_to_structure(empty, t2);
    CHECK(g.universe_size() == 0);
    CHECK(count_hom(g, t2).exact == 1);

    Instance one;
    const auto u = one.add_variable("u", "T");
    const auto v = one.add_variable("v", "T");
    one.add_constraint({u, v}, "R");
    const auto gs = instance_to_structure(one, t2);
    CHECK(gs.relation("R").size() == 1);
    CHECK(count_hom(gs, t2).exact == count_solutions(one, t2).exact);

    testing::Rng rng(23);
    for (int i = 0; i < 20; ++i) {
        const auto p = testing::random_instance(rng, t2, 4, 4);
        const auto back = structure_to_instance(instance_to_structure(p, t2));
        CHECK(count_solutions(back, t2).exact == count_solutions(p, t2).exact);
    }
}

TEST_CASE("instance validation") {
    const auto t2 = fixtures::t_p(2);
    Instance p;
    const auto a = p.add_variable("a", "T");
    p.add_constraint({a}, "R");
    CHECK_FALSE(validate_instance(p, t2).empty());
    Instance q;
    q.add_variable("b", "Nope");
    CHECK_FALSE(validate_instance(q, t2).empty());
    Instance r;
    const auto c = r.add_variable("c", "T");
    r.add_constraint({c}, "Missing");
    CHECK_THROWS_AS(require_valid(r, t2), PreconditionError);
}

TEST_CASE("constants") {
    const auto h = fixtures::rigid_digraph();
    const auto hc = with_constants(h);
    CHECK(has_all_constants(hc));
    CHECK_FALSE(has_all_constants(h));
    CHECK(hc.find_relation("C_a") != nullptr);
    CHECK(with_constants(hc) == hc);
    const auto anchor = parse_constant_name(hc, "C_c");
    REQUIRE(anchor.has_value());
    CHECK(anchor->element == 2);
    CHECK_FALSE(parse_constant_name(hc, "E").has_value());
}

TEST_CASE("gluing identifies anchors") {
    const auto h = fixtures::rigid_digraph();
    const Anchored a{h, {{SortId{0}, 1}}};
    const Anchored b{h, {{SortId{0}, 2}}};
    const auto glued = glue(a, b);
    CHECK(glued.structure.universe_size() == 7);
    CHECK(glued.structure.relation("E").size() == 6);
}

TEST_CASE("JSON round trip") {
    const auto h = fixtures::rigid_digraph();
    CHECK(structure_from_json(structure_to_json(h)) == h);
    Instance p;
    const auto x = p.add_variable("x", "V");
    const auto y = p.add_variable("y", "V");
    p.add_constraint({x, y}, "E");
    CHECK(instance_from_json(instance_to_json(p)) == p);

    CHECK_THROWS_AS((void)structure_from_json(parse_json(R"({"sorts": {}, "extra": 1})")), PreconditionError);
    CHECK_THROWS_AS((void)parse_json("{\"sorts\": [1,"), PreconditionError);
    const auto j = parse_json(R"({"sorts": {"S": [10, 2, [1,2]]}, "relations": {}})");
    const auto s = structure_from_json(j);
    CHECK(s.sorts()[0].elements == std::vector<std::string>{"2", "10", "[1,2]"});
}
