// SPDX-License-Identifier: Apache-2.0
/**
 * @file test_binarize.cpp
 * @brief The binarization b(H): construction, both instance translations,
 *        and transport of Mal'tsev operations, automorphisms and formulas.
 */
#include <doctest.h>

#include <set>

#include "modcsp/automorphism.hpp"
#include "modcsp/binarize.hpp"
#include "modcsp/fixtures.hpp"
#include "modcsp/oracle.hpp"
#include "modcsp/properties.hpp"
#include "test_support.hpp"

using namespace modcsp;
using namespace modcsp::testing;

namespace {

/// Direct check of an assignment against every constraint.
bool satisfies(const Instance& p, const Structure& h, const Assignment& a) {
    for (const auto& c : p.constraints()) {
        if (c.relation == kEquality) {
            if (a[c.scope[0]] != a[c.scope[1]]) return false;
            continue;
        }
        Tuple t;
        for (const auto v : c.scope) t.push_back(a[v]);
        if (!h.relation(c.relation).contains(t)) return false;
    }
    return true;
}

std::vector<Assignment> solutions(const Instance& p, const Structure& h) {
    std::vector<Assignment> out;
    for_each_solution(p, h, [&](const Assignment& a) {
        out.push_back(a);
        return true;
    });
    return out;
}

/// Adds a few equality constraints between variables of equal sort.
void add_equalities(Rng& rng, Instance& p, std::size_t count) {
    const auto n = p.variable_count();
    for (std::size_t k = 0; k < count && n > 1; ++k) {
        const auto u = uniform(rng, 0, n - 1);
        const auto v = uniform(rng, 0, n - 1);
        if (u != v && p.variables()[u].sort == p.variables()[v].sort) p.add_constraint({u, v}, std::string(kEquality));
    }
}

std::vector<Structure> sample_structures() {
    return {fixtures::maltsev_not_2_rectangular(true), fixtures::maltsev_not_2_rectangular(false),
            fixtures::rectangular_not_permutable(),   fixtures::permutable_not_maltsev(),
            fixtures::rigid_digraph(),                fixtures::affine(2),
            fixtures::t_p(2, false),                  fixtures::t_p(3, false),
            fixtures::chain_order()};
}

}  // namespace

TEST_CASE("binarize: a single full unary relation gives equality") {
    Structure h;
    const auto s = h.add_sort("H", {"0", "1", "2"});
    h.add_relation("U", {s}, {{0}, {1}, {2}});
    const Binarization b = binarize(h);
    CHECK(b.sort_relation == std::vector<std::string>{"U"});
    REQUIRE(b.structure.sort_count() == 1);
    CHECK(b.structure.sort_size(SortId{0}) == 3);
    REQUIRE(b.links.size() == 1);
    CHECK(b.structure.relation("U[1]=U[1]").tuples == std::vector<Tuple>{{0, 0}, {1, 1}, {2, 2}});
}

TEST_CASE("binarize: the ternary example with constants") {
    const Structure h = fixtures::maltsev_not_2_rectangular(true);
    const Binarization b = binarize(h);
    // The sort relation "H" is added; the constants become singleton sorts.
    CHECK(b.sort_relation == std::vector<std::string>{"H"});
    CHECK(b.structure.sort_count() == 7);
    CHECK(b.structure.sort_size(b.structure.sort_id("R")) == 5);
    CHECK(b.structure.sort_size(b.structure.sort_id("H")) == 5);
    for (int c = 0; c < 5; ++c) CHECK(b.structure.sort_size(b.structure.sort_id("C_" + std::to_string(c))) == 1);
    const BinaryLink* l = b.find_link("R", 0, "H", 0);
    REQUIRE(l != nullptr);
    CHECK(b.structure.relation(l->name).size() == 5);
    CHECK(b.find_link("H", 0, "R", 0) == l);
    CHECK(b.structure.element_name(b.structure.sort_id("R"), 2) == "[1,0,2]");
    // R^{ii}_{ss} contains the diagonal of Q_i.
    for (const auto& link : b.links) {
        if (link.i != link.j || link.s != link.t) continue;
        const Relation& q = b.structure.relation(link.name);
        for (Element e = 0; e < b.structure.sort_size(SortId{link.i}); ++e) CHECK(q.contains(Tuple{e, e}));
    }
}

TEST_CASE("binarize: links match their definition and are rectangular") {
    Rng rng(11);
    for (int round = 0; round < 20; ++round) {
        const Structure h = round % 2 == 0 ? random_structure(rng, 3, {1, 2, 3}, 0.4)
                                           : random_two_sorted(rng, 2, 3, {{0, 1}, {1, 1, 0}, {1}}, 0.5);
        const Binarization b = binarize(h);
        CHECK(b.sort_relation.size() == h.sort_count());
        const auto& rels = b.base.relations();
        std::size_t expected_links = 0;
        for (std::size_t i = 0; i < rels.size(); ++i) {
            for (std::size_t j = i; j < rels.size(); ++j) {
                for (std::size_t s = 0; s < rels[i].arity(); ++s) {
                    for (std::size_t t = 0; t < rels[j].arity(); ++t) {
                        const BinaryLink* l = b.find_link(rels[i].name, s, rels[j].name, t);
                        if (rels[i].signature[s] != rels[j].signature[t]) {
                            CHECK(l == nullptr);
                            continue;
                        }
                        ++expected_links;
                        REQUIRE(l != nullptr);
                        std::vector<Tuple> pairs;
                        for (Element a = 0; a < rels[i].size(); ++a) {
                            for (Element c = 0; c < rels[j].size(); ++c) {
                                if (rels[i].tuples[a][s] == rels[j].tuples[c][t]) pairs.push_back({a, c});
                            }
                        }
                        const Relation& q = b.structure.relation(l->name);
                        CHECK(q.tuples == pairs);
                        CHECK(is_rectangular(q));
                    }
                }
            }
        }
        CHECK(b.links.size() == expected_links);
        CHECK(b.structure.relations().size() == expected_links);
    }
}

TEST_CASE("binarize_instance: small cases") {
    Structure h;
    const auto s = h.add_sort("H", {"0", "1", "2"});
    h.add_relation("U", {s}, {{0}, {1}, {2}});
    h.add_relation("V", {s}, {{1}, {2}});
    const Binarization b = binarize(h);

    Instance one;
    one.add_variable("v", "H");
    one.add_constraint({0}, "U");
    const auto bi = binarize_instance(one, b);
    CHECK(bi.instance.variable_count() == 1);
    CHECK(bi.instance.variables()[0].sort == "U");
    CHECK(count_solutions(bi.instance, b.structure).exact == count_solutions(one, h).exact);

    Instance two;
    two.add_variable("v", "H");
    two.add_constraint({0}, "U");
    two.add_constraint({0}, "V");
    const auto bt = binarize_instance(two, b);
    CHECK(bt.instance.variable_count() == 2);
    REQUIRE(bt.instance.constraints().size() == 1);
    CHECK(count_solutions(bt.instance, b.structure).exact == 2);

    // A variable without its sort constraint gets one.
    Instance bare;
    bare.add_variable("v", "H");
    const auto bb = binarize_instance(bare, b);
    CHECK(bb.instance.variable_count() == 1);
    CHECK(count_solutions(bb.instance, b.structure).exact == 3);
}

TEST_CASE("binarize_instance: counts and the solution bijection on random instances") {
    Rng rng(5);
    const auto structures = sample_structures();
    for (int round = 0; round < 60; ++round) {
        const Structure& h = structures[static_cast<std::size_t>(round) % structures.size()];
        const Binarization b = binarize(h);
        Instance p = random_instance(rng, h, uniform(rng, 1, 4), uniform(rng, 0, 4));
        add_equalities(rng, p, uniform(rng, 0, 2));
        const auto bi = binarize_instance(p, b);
        const auto sols = solutions(p, h);
        CHECK(count_solutions(bi.instance, b.structure).exact == count_solutions(p, h).exact);
        std::set<Assignment> images;
        for (const auto& phi : sols) {
            const Assignment img = binarize_assignment(bi, b, phi);
            CHECK(satisfies(bi.instance, b.structure, img));
            images.insert(img);
        }
        CHECK(images.size() == sols.size());
    }
}

TEST_CASE("debinarize_instance: small cases") {
    const Binarization b = binarize(fixtures::maltsev_not_2_rectangular(false));

    Instance single;
    single.add_variable("x", "R");
    CHECK(count_solutions(debinarize_instance(single, b).instance, b.base).exact == 5);

    Instance free_pair;
    free_pair.add_variable("x", "R");
    free_pair.add_variable("y", "H");
    const auto d = debinarize_instance(free_pair, b);
    CHECK(d.instance.variable_count() == 4);
    CHECK(count_solutions(d.instance, b.base).exact == 25);

    Instance linked;
    linked.add_variable("x", "R");
    linked.add_variable("y", "R");
    linked.add_constraint({0, 1}, b.find_link("R", 2, "R", 0)->name);
    const auto dl = debinarize_instance(linked, b);
    CHECK(dl.classes[0][2] == dl.classes[1][0]);
    CHECK(count_solutions(dl.instance, b.base).exact == count_solutions(linked, b.structure).exact);
}

TEST_CASE("debinarize_instance: round trips and random instances over b(H)") {
    Rng rng(9);
    const auto structures = sample_structures();
    for (int round = 0; round < 60; ++round) {
        const Structure& h = structures[static_cast<std::size_t>(round) % structures.size()];
        const Binarization b = binarize(h);

        Instance p = random_instance(rng, h, uniform(rng, 1, 3), uniform(rng, 0, 3));
        const auto bi = binarize_instance(p, b);
        const auto back = debinarize_instance(bi.instance, b);
        CHECK(count_solutions(back.instance, b.base).exact == count_solutions(p, h).exact);

        Instance q = random_instance(rng, b.structure, uniform(rng, 1, 3), uniform(rng, 0, 3));
        add_equalities(rng, q, 1);
        const auto d = debinarize_instance(q, b);
        const auto sols = solutions(q, b.structure);
        CHECK(count_solutions(d.instance, b.base).exact == sols.size());
        std::set<Assignment> images;
        for (const auto& phi : sols) {
            const Assignment img = debinarize_assignment(d, b, phi);
            CHECK(satisfies(d.instance, b.base, img));
            images.insert(img);
        }
        CHECK(images.size() == sols.size());
    }
}

TEST_CASE("binarize: Mal'tsev polymorphisms transport both ways") {
    // The equivalence-relation fixture with a Mal'tsev polymorphism is left
    // out: the search over its binarization takes seconds.
    const std::vector<Structure> structures{
        fixtures::maltsev_not_2_rectangular(true), fixtures::maltsev_not_2_rectangular(false),
        fixtures::permutable_not_maltsev(),       fixtures::rigid_digraph(),
        fixtures::affine(2),                      fixtures::t_p(2, false),
        fixtures::t_p(3, false),                  fixtures::chain_order()};
    for (const auto& h : structures) {
        const Binarization b = binarize(h);
        const auto f = find_maltsev(h);
        const auto fb = find_maltsev(b.structure);
        CHECK(f.has_value() == fb.has_value());
        if (f) {
            const Operation lifted = lift_operation(*f, b);
            CHECK(is_maltsev_polymorphism(lifted, b.structure));
            CHECK(restrict_operation(lifted, b) == *f);
        }
        if (fb) {
            const Operation restricted = restrict_operation(*fb, b);
            CHECK(is_maltsev_polymorphism(restricted, b.base));
            // An operation of b(H) acts coordinate-wise.
            CHECK(lift_operation(restricted, b) == *fb);
        }
    }
    const Binarization b = binarize(fixtures::affine(3));
    const auto f = find_maltsev(fixtures::affine(3));
    REQUIRE(f.has_value());
    CHECK(is_maltsev_polymorphism(lift_operation(*f, b), b.structure));
}

TEST_CASE("binarize: non-polymorphisms cannot be lifted") {
    const Structure h = fixtures::rigid_digraph();
    const Binarization b = binarize(h);
    Mapping swap = identity_mapping(h);
    std::swap(swap.components[0][0], swap.components[0][1]);
    CHECK_THROWS_AS((void)lift_mapping(swap, b), PreconditionError);
}

TEST_CASE("binarize: automorphisms and p-rigidity transport") {
    for (const auto& h : sample_structures()) {
        const Binarization b = binarize(h);
        const auto auts = enumerate_automorphisms(h);
        const auto bauts = enumerate_automorphisms(b.structure);
        CHECK(auts.size() == bauts.size());
        for (const auto& a : auts) {
            const Mapping lifted = lift_mapping(a.map, b);
            CHECK(is_automorphism(lifted, b.structure));
            CHECK(permutation_order(lifted) == permutation_order(a.map));
            CHECK(restrict_mapping(lifted, b) == a.map);
        }
        for (const auto& a : bauts) CHECK(is_automorphism(restrict_mapping(a.map, b), b.base));
        for (const std::uint64_t p : {2U, 3U}) CHECK(is_p_rigid(h, p) == is_p_rigid(b.structure, p));
    }
}

TEST_CASE("binarize: non-rectangular formulas over b(H) translate to non-rectangular ones over H") {
    Rng rng(21);
    std::size_t witnesses = 0;
    for (int round = 0; round < 150; ++round) {
        const Structure h = random_structure(rng, 2, {2, 2}, 0.6);
        const Binarization b = binarize(h);
        // Free variables mostly range over H, bound ones over tuples of R0 or R1.
        const std::vector<std::string> free_sorts{b.sort_relation[0], b.sort_relation[0], "R0", "R1"};
        const std::vector<std::string> bound_sorts{"R0", "R1"};
        MppFormula f;
        const std::size_t nfree = uniform(rng, 2, 3);
        const std::size_t nbound = uniform(rng, 1, 2);
        std::vector<std::string> names;
        std::vector<std::string> var_sorts;
        for (std::size_t v = 0; v < nfree + nbound; ++v) {
            names.push_back((v < nfree ? "x" : "y") + std::to_string(v));
            const auto& sorts = v < nfree ? free_sorts : bound_sorts;
            var_sorts.push_back(sorts[uniform(rng, 0, sorts.size() - 1)]);
        }
        for (std::size_t v = 0; v < nfree; ++v) f.free.push_back({names[v], var_sorts[v]});
        QuantifierBlock block = modular_block({names.begin() + static_cast<std::ptrdiff_t>(nfree), names.end()}, 2);
        for (std::size_t k = 0; k < nbound; ++k) block.vars[k].sort = var_sorts[nfree + k];
        f.blocks.push_back(block);
        // Every atom touches a bound variable, cycling through them.
        const std::size_t natoms = uniform(rng, 2, 4);
        for (std::size_t k = 0; k < natoms; ++k) {
            const auto u = nfree + k % nbound;
            const auto v = uniform(rng, 0, names.size() - 1);
            const Relation& ru = b.base.relation(var_sorts[u]);
            const Relation& rv = b.base.relation(var_sorts[v]);
            const BinaryLink* l = b.find_link(ru.name, uniform(rng, 0, ru.arity() - 1), rv.name,
                                              uniform(rng, 0, rv.arity() - 1));
            if (l == nullptr) continue;
            // Orient the atom as the link relation is stored.
            const bool forward = b.base.relations()[l->i].name == ru.name;
            f.atoms.push_back({l->name, forward ? std::vector{names[u], names[v]} : std::vector{names[v], names[u]}});
        }

        const Relation qb = evaluate_formula(b.structure, f);
        const DebinarizedFormula df = debinarize_formula(f, b);
        const Relation q = evaluate_formula(b.base, df.formula);
        // The free tuples correspond one to one.
        std::vector<Tuple> mapped;
        for (const auto& t : qb.tuples) mapped.push_back(debinarize_tuple(df, f, b, t));
        canonicalize(mapped);
        CHECK(mapped == q.tuples);
        if (!is_rectangular(qb)) {
            ++witnesses;
            CHECK_FALSE(is_rectangular(q));
        }
    }
    CHECK(witnesses > 0);
}

TEST_CASE("debinarize_formula: more than one block is rejected") {
    const Binarization b = binarize(fixtures::rigid_digraph());
    MppFormula f;
    f.free.push_back({"x", "E"});
    f.blocks.push_back(exists_block({"y"}));
    f.blocks.push_back(exists_block({"z"}));
    f.blocks[0].vars[0].sort = "E";
    f.blocks[1].vars[0].sort = "E";
    CHECK_THROWS_AS((void)debinarize_formula(f, b), PreconditionError);
}
