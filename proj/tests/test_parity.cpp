// SPDX-License-Identifier: Apache-2.0
/**
 * @file test_parity.cpp
 * @brief Witness functions, frame operations and the parity engine against
 *        brute-force enumeration.
 */
#include <doctest.h>

#include <chrono>
#include <numeric>

#include "modcsp/fixtures.hpp"
#include "modcsp/mpp.hpp"
#include "modcsp/oracle.hpp"
#include "modcsp/parity.hpp"
#include "test_support.hpp"

using namespace modcsp;

namespace {

ParityContext affine_context(std::uint32_t m) {
    return ParityContext(fixtures::affine(m), Operation{3, {m}, {fixtures::affine_maltsev(m)}});
}

std::vector<Tuple> solutions(const ParityContext& ctx, const Instance& p) {
    std::vector<Tuple> out;
    for_each_solution(p, ctx.structure(), [&](const Assignment& a) {
        out.push_back(a);
        return true;
    });
    canonicalize(out);
    return out;
}

/// Random conjunctive instance; constants are drawn only when `pins` is set.
Instance random_affine_instance(testing::Rng& rng, const Structure& h, std::size_t vars, std::size_t cons,
                                bool pins) {
    return testing::random_instance(rng, h, vars, cons,
                                    [pins](const std::string& name) { return pins || name.rfind("C_", 0) != 0; });
}

Instance single_relation_instance(const Structure& h, std::string_view relation, std::size_t arity) {
    Instance p;
    std::vector<std::size_t> scope;
    for (std::size_t i = 0; i < arity; ++i) scope.push_back(p.add_variable("x" + std::to_string(i), h.sorts()[0].name));
    p.add_constraint(scope, std::string(relation));
    return p;
}

/// Counts derivations performed by the engine.
struct DeriveCounter : FrameObserver {
    std::size_t derives = 0;
    void on_derive(const WitnessFunction&, const WitnessFunction&, const WitnessFunction&) override { ++derives; }
};

}  // namespace

TEST_CASE("parity context verifies its hypotheses") {
    CHECK_NOTHROW(affine_context(2));
    CHECK_NOTHROW(ParityContext(fixtures::affine(3)));  // operation found by search
    CHECK_THROWS_WITH_AS(ParityContext(fixtures::chain_order()), doctest::Contains("constant"), PreconditionError);
    CHECK_THROWS_WITH_AS(ParityContext(with_constants(fixtures::chain_order())), doctest::Contains("Mal'tsev"),
                         PreconditionError);
    // The first projection satisfies neither Mal'tsev identity.
    Operation first{3, {2}, {std::vector<Element>(8)}};
    for (Element i = 0; i < 8; ++i) first.tables[0][i] = i >> 2;
    CHECK_THROWS_WITH_AS(ParityContext(fixtures::affine(2), first), doctest::Contains("identities"),
                         PreconditionError);
}

TEST_CASE("witness functions of trivial relations") {
    const auto ctx = affine_context(3);
    const Structure& h = ctx.structure();
    SUBCASE("full product: one class of size |H| per coordinate") {
        Instance p;
        for (int i = 0; i < 4; ++i) p.add_variable("x" + std::to_string(i), "H");
        const auto w = build_witness_function(ctx, p);
        for (std::size_t i = 0; i < 4; ++i) {
            REQUIRE(w.frame.classes[i].size() == 1);
            CHECK(w.frame.classes[i][0] == std::vector<Element>{0, 1, 2});
        }
        CHECK(witness_violations(w, solutions(ctx, p)).empty());
    }
    SUBCASE("graph of the identity: singleton classes on the copy") {
        Instance p;
        for (int i = 0; i < 2; ++i) p.add_variable("x" + std::to_string(i), "H");
        for (int i = 0; i < 2; ++i) p.add_variable("y" + std::to_string(i), "H");
        p.add_constraint({0, 2}, std::string(kEquality));
        p.add_constraint({1, 3}, "Eq0");
        const auto w = build_witness_function(ctx, p);
        for (std::size_t i = 2; i < 4; ++i) {
            CHECK(w.frame.classes[i].size() == 3);
            for (const auto& c : w.frame.classes[i]) CHECK(c.size() == 1);
        }
        CHECK(witness_violations(w, solutions(ctx, p)).empty());
    }
    SUBCASE("unsatisfiable instance: everything is bottom") {
        Instance p;
        p.add_variable("x", "H");
        p.add_constraint({0}, "C_0");
        p.add_constraint({0}, "C_1");
        const auto w = build_witness_function(ctx, p);
        CHECK(w.empty());
        CHECK(w.frame_tuples().empty());
        CHECK(parity_count(ctx, p) == 0);
    }
    (void)h;
}

TEST_CASE("reference witness function: least witnesses and rectangularity") {
    const auto ctx = affine_context(2);
    const Structure& h = ctx.structure();
    const std::vector<SortId> sorts(2, SortId{0});
    const auto w = reference_witness_function(h, sorts, {{0, 1}, {1, 0}, {1, 1}, {0, 0}});
    CHECK(*w(1, 1) == Tuple{0, 1});
    CHECK(*w(0, 1) == Tuple{1, 0});
    // {(0,0),(0,1),(1,1)}: prefix 1 extends to {1} only, but ∼_1 relates 0 and 1.
    const std::vector<Tuple> bad{{0, 0}, {0, 1}, {1, 1}};
    CHECK_THROWS_WITH_AS((void)reference_witness_function(h, sorts, bad), doctest::Contains("rectangular"),
                         PreconditionError);
    const auto violations = witness_violations(w, bad);
    CHECK(std::any_of(violations.begin(), violations.end(),
                      [](const std::string& v) { return v.rfind("rectangularity", 0) == 0; }));
}

TEST_CASE("build_witness_function agrees with enumeration on random affine instances") {
    testing::Rng rng(2024);
    for (const std::uint32_t m : {2U, 3U, 4U}) {
        const auto ctx = affine_context(m);
        for (int round = 0; round < 60; ++round) {
            const std::size_t vars = testing::uniform(rng, 1, m == 4 ? 4 : 5);
            const auto p = random_affine_instance(rng, ctx.structure(), vars, testing::uniform(rng, 0, 4),
                                                  testing::coin(rng, 0.3));
            const auto r = solutions(ctx, p);
            const auto w = build_witness_function(ctx, p);
            const auto violations = witness_violations(w, r);
            INFO("m = ", m, ", round = ", round, violations.empty() ? "" : violations.front());
            CHECK(violations.empty());
            CHECK(enumerate_relation(ctx, w) == r);
            if (!r.empty() && r.size() <= 64) CHECK(frame_closure(ctx, w) == r);
            // The fast path may pick different witnesses, but the classes are canonical.
            CHECK(w.frame == reference_witness_function(ctx.structure(), p).frame);
        }
    }
}

TEST_CASE("fix_coordinate") {
    testing::Rng rng(7);
    const auto ctx = affine_context(3);
    SUBCASE("a value outside the projection gives the empty relation") {
        Instance p;
        p.add_variable("x", "H");
        p.add_variable("y", "H");
        p.add_constraint({0}, "C_1");
        const auto w = build_witness_function(ctx, p);
        CHECK(fix_coordinate(ctx, w, 0, 2).empty());
    }
    SUBCASE("agrees with enumeration and refines later classes") {
        for (int round = 0; round < 60; ++round) {
            const std::size_t vars = testing::uniform(rng, 1, 5);
            const auto p = random_affine_instance(rng, ctx.structure(), vars, testing::uniform(rng, 0, 3), false);
            const auto w = build_witness_function(ctx, p);
            const std::size_t s = testing::uniform(rng, 0, vars - 1);
            const auto a = static_cast<Element>(testing::uniform(rng, 0, 2));
            FrameValidator validator(ctx);
            const auto f = fix_coordinate(ctx, w, s, a, &validator);
            CHECK(validator.checks() == 1);
            CHECK(validator.violation_count() == 0);
            auto expected = solutions(ctx, p);
            std::erase_if(expected, [&](const Tuple& t) { return t[s] != a; });
            CHECK(enumerate_relation(ctx, f) == expected);
            // b ∼^{s←a}_i c implies b ∼_i c for i > s.
            for (std::size_t i = s + 1; i < vars; ++i) {
                for (const auto& cls : f.frame.classes[i]) {
                    const auto k = w.class_of(i, cls.front());
                    REQUIRE(k.has_value());
                    for (const auto c : cls) CHECK(w.class_of(i, c) == k);
                }
            }
        }
    }
}

TEST_CASE("fix_coordinates") {
    testing::Rng rng(8);
    const auto ctx = affine_context(2);
    for (int round = 0; round < 40; ++round) {
        const std::size_t vars = testing::uniform(rng, 2, 5);
        const auto p = random_affine_instance(rng, ctx.structure(), vars, testing::uniform(rng, 1, 4), false);
        const auto w = build_witness_function(ctx, p);
        CHECK(fix_coordinates(ctx, w, {}, {}) == w);
        const auto r = solutions(ctx, p);
        if (r.empty()) continue;
        // Fixing every coordinate but the last at a valid prefix leaves the
        // extension set of that prefix as the only last-coordinate class.
        const Tuple& t = r[testing::uniform(rng, 0, r.size() - 1)];
        std::vector<std::size_t> coords(vars - 1);
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        const std::vector<Element> values(t.begin(), t.end() - 1);
        const auto f = fix_coordinates(ctx, w, coords, values);
        std::vector<Element> ext;
        for (const auto& u : r) {
            if (std::equal(u.begin(), u.end() - 1, t.begin())) ext.push_back(u.back());
        }
        REQUIRE(f.frame.classes[vars - 1].size() == 1);
        CHECK(f.frame.classes[vars - 1][0] == ext);
        // Same as fixing one coordinate at a time.
        WitnessFunction seq = w;
        for (std::size_t j = 0; j < coords.size(); ++j) seq = fix_coordinate(ctx, seq, coords[j], values[j]);
        CHECK(seq == f);
    }
}

TEST_CASE("project_last") {
    const auto ctx = affine_context(3);
    Instance full;
    for (int i = 0; i < 3; ++i) full.add_variable("x" + std::to_string(i), "H");
    const auto w = build_witness_function(ctx, full);
    const auto q = project_last(w);
    CHECK(q.arity() == 2);
    CHECK(enumerate_relation(ctx, q).size() == 9);
    for (std::size_t i = 0; i < 2; ++i) CHECK(q.frame.classes[i] == w.frame.classes[i]);
    Instance unary;
    unary.add_variable("x", "H");
    CHECK_THROWS_AS((void)project_last(build_witness_function(ctx, unary)), PreconditionError);

    testing::Rng rng(9);
    for (int round = 0; round < 30; ++round) {
        const auto p = random_affine_instance(rng, ctx.structure(), testing::uniform(rng, 2, 4), 3, false);
        FrameValidator validator(ctx);
        (void)project_last(build_witness_function(ctx, p), &validator);
        CHECK(validator.violation_count() == 0);
    }
}

TEST_CASE("check_epsilon_class") {
    SUBCASE("reflexivity") {
        const auto ctx = affine_context(3);
        Instance p;
        for (int i = 0; i < 3; ++i) p.add_variable("x" + std::to_string(i), "H");
        p.add_constraint({0, 1, 2}, "Sum");
        const auto w = build_witness_function(ctx, p);
        const Tuple x{1, 2, 0};
        const auto y = check_epsilon_class(ctx, w, x, 2, 2, 1);
        REQUIRE(y.has_value());
        CHECK((*y)[0] == 1);
        CHECK((*y)[1] == 2);
    }
    SUBCASE("the three-coordinate relation with a non-rectangular mod-2 projection") {
        const ParityContext ctx(fixtures::maltsev_not_2_rectangular(true));
        const auto p = single_relation_instance(ctx.structure(), "R", 3);
        const auto w = build_witness_function(ctx, p);
        // (0,0) and (0,1) each have exactly one extension.
        const auto& r = ctx.structure().relation("R");
        CHECK(count_ext(r, std::vector<std::size_t>{0, 1}, Tuple{0, 0}) == 1);
        CHECK(count_ext(r, std::vector<std::size_t>{0, 1}, Tuple{0, 1}) == 1);
        const auto y = check_epsilon_class(ctx, w, Tuple{0, 0, 0}, 0, 1, 1);
        REQUIRE(y.has_value());
        CHECK(*y == Tuple{0, 1, 1});
    }
    SUBCASE("agrees with the frame equivalence of PAR-R") {
        testing::Rng rng(10);
        for (const std::uint32_t m : {2U, 3U, 4U}) {
            const auto ctx = affine_context(m);
            for (int round = 0; round < 25; ++round) {
                const std::size_t n = testing::uniform(rng, 2, 4);
                const auto p = random_affine_instance(rng, ctx.structure(), n, testing::uniform(rng, 1, 3), false);
                const auto r = solutions(ctx, p);
                // PAR-R explicitly: tuples whose prefix has an odd number of extensions.
                std::vector<Tuple> par_r;
                for (const auto& t : r) {
                    std::size_t ext = 0;
                    for (const auto& u : r) ext += std::equal(u.begin(), u.end() - 1, t.begin()) ? 1 : 0;
                    if (ext % 2 == 1) par_r.push_back(t);
                }
                if (par_r.empty()) continue;
                const auto ref = reference_witness_function(ctx.structure(), std::vector<SortId>(n, SortId{0}), par_r);
                const auto w = build_witness_function(ctx, p);
                for (std::size_t k = 0; k < n; ++k) {
                    for (Element a = 0; a < m; ++a) {
                        if (!ref(k, a)) continue;
                        const Tuple& x = *ref(k, a);
                        for (Element b = 0; b < m; ++b) {
                            const auto y = check_epsilon_class(ctx, w, x, a, b, k);
                            const bool related = ref.class_of(k, a) == ref.class_of(k, b) && ref(k, b);
                            CHECK(y.has_value() == related);
                            if (y) {
                                CHECK(std::binary_search(par_r.begin(), par_r.end(), *y));
                                CHECK(std::equal(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(k), y->begin()));
                                CHECK((*y)[k] == b);
                            }
                        }
                    }
                }
            }
        }
    }
}

TEST_CASE("derive_tilde_witness") {
    SUBCASE("full H^2 with |H| odd: tilde-R = H") {
        const auto ctx = affine_context(3);
        Instance p;
        p.add_variable("x", "H");
        p.add_variable("y", "H");
        const auto d = derive_tilde_witness(ctx, build_witness_function(ctx, p));
        CHECK(enumerate_relation(ctx, d.tilde) == std::vector<Tuple>{{0}, {1}, {2}});
    }
    SUBCASE("full H^2 with |H| even: tilde-R is empty") {
        const auto ctx = affine_context(2);
        Instance p;
        p.add_variable("x", "H");
        p.add_variable("y", "H");
        const auto d = derive_tilde_witness(ctx, build_witness_function(ctx, p));
        CHECK(d.tilde.empty());
        CHECK(d.par.empty());
    }
    SUBCASE("non-rectangular PAR-R is rejected by the validator") {
        const ParityContext ctx(fixtures::maltsev_not_2_rectangular(true));
        const auto p = single_relation_instance(ctx.structure(), "R", 3);
        // The definitional tilde-R is the mod-2 projection onto the first two coordinates.
        Structure hr = ctx.structure();
        MppFormula tilde{{{"x0", "H"}, {"x1", "H"}},
                         {modular_block({"y"}, 2), modular_block({"z"}, 2)},
                         {{"R", {"x0", "x1", "y"}}, {"R", {"x0", "x1", "z"}}}};
        CHECK(evaluate_formula(hr, tilde).tuples == std::vector<Tuple>{{0, 0}, {0, 1}, {1, 1}});
        FrameValidator validator(ctx, /*strict=*/true);
        const auto w = build_witness_function(ctx, p, &validator);
        CHECK_THROWS_WITH_AS((void)derive_tilde_witness(ctx, w, &validator), doctest::Contains("rectangular"),
                             PreconditionError);
    }
    SUBCASE("validated on random affine relations") {
        testing::Rng rng(12);
        for (const std::uint32_t m : {2U, 3U, 4U}) {
            const auto ctx = affine_context(m);
            FrameValidator validator(ctx);
            for (int round = 0; round < 20; ++round) {
                const auto p = random_affine_instance(rng, ctx.structure(), testing::uniform(rng, 2, 4),
                                                      testing::uniform(rng, 0, 3), false);
                (void)derive_tilde_witness(ctx, build_witness_function(ctx, p), &validator);
            }
            CHECK(validator.parity_checks() == 20);
            CHECK(validator.violation_count() == 0);
            if (validator.violation_count() > 0) MESSAGE(validator.violations().front());
        }
    }
}

TEST_CASE("odd last-coordinate classes lie in PAR-R") {
    testing::Rng rng(13);
    for (const std::uint32_t m : {2U, 3U, 4U}) {
        const auto ctx = affine_context(m);
        for (int round = 0; round < 30; ++round) {
            const std::size_t n = testing::uniform(rng, 2, 4);
            const auto p = random_affine_instance(rng, ctx.structure(), n, testing::uniform(rng, 0, 3), false);
            const auto w = build_witness_function(ctx, p);
            const auto r = solutions(ctx, p);
            const Relation rel{"R", std::vector<SortId>(n, SortId{0}), r};
            std::vector<std::size_t> prefix(n - 1);
            std::iota(prefix.begin(), prefix.end(), std::size_t{0});
            for (const auto& t : r) {
                const auto k = w.class_of(n - 1, t.back());
                REQUIRE(k.has_value());
                if (w.frame.classes[n - 1][*k].size() % 2 == 1) {
                    CHECK(count_ext_mod(rel, prefix, Tuple(t.begin(), t.end() - 1), 2) == 1);
                }
            }
        }
    }
}

TEST_CASE("calculate_size") {
    const auto ctx = affine_context(3);
    SUBCASE("unary relations") {
        Instance p;
        p.add_variable("x", "H");
        CHECK(calculate_size(ctx, build_witness_function(ctx, p)) == 1);
        p.add_constraint({0}, "C_2");
        CHECK(calculate_size(ctx, build_witness_function(ctx, p)) == 1);
    }
    SUBCASE("all last-coordinate classes even: immediate 0") {
        const auto ctx2 = affine_context(2);
        Instance p;
        for (int i = 0; i < 3; ++i) p.add_variable("x" + std::to_string(i), "H");
        DeriveCounter counter;
        CHECK(calculate_size(ctx2, build_witness_function(ctx2, p), &counter) == 0);
        CHECK(counter.derives == 0);
    }
    SUBCASE("equals |R| mod 2") {
        testing::Rng rng(14);
        for (int round = 0; round < 40; ++round) {
            const auto p = random_affine_instance(rng, ctx.structure(), testing::uniform(rng, 1, 5),
                                                  testing::uniform(rng, 0, 4), testing::coin(rng, 0.3));
            CHECK(calculate_size(ctx, build_witness_function(ctx, p)) == solutions(ctx, p).size() % 2);
        }
    }
}

TEST_CASE("parity_count on qualifying structures") {
    SUBCASE("all variables pinned: one solution") {
        const auto ctx = affine_context(4);
        Instance p;
        for (int i = 0; i < 3; ++i) {
            p.add_variable("x" + std::to_string(i), "H");
            p.add_constraint({static_cast<std::size_t>(i)}, "C_" + std::to_string(i));
        }
        CHECK(parity_count(ctx, p) == 1);
    }
    SUBCASE("random suite with validation") {
        testing::Rng rng(15);
        for (const std::uint32_t m : {2U, 3U, 4U}) {
            const auto ctx = affine_context(m);
            FrameValidator validator(ctx);
            for (int round = 0; round < 40; ++round) {
                const auto p = random_affine_instance(rng, ctx.structure(), testing::uniform(rng, 1, m == 4 ? 4 : 6),
                                                      testing::uniform(rng, 0, 5), testing::coin(rng, 0.3));
                CHECK(parity_count(ctx, p, &validator) == count_solutions_mod(p, ctx.structure(), 2));
            }
            CHECK(validator.violation_count() == 0);
            if (validator.violation_count() > 0) MESSAGE(validator.violations().front());
        }
    }
}

TEST_CASE("chain instances build quickly") {
    const auto ctx = affine_context(3);
    Instance p;
    const std::size_t n = 60;
    for (std::size_t i = 0; i < n; ++i) p.add_variable("x" + std::to_string(i), "H");
    for (std::size_t i = 0; i + 2 < n; ++i) p.add_constraint({i, i + 1, i + 2}, "Sum");
    const auto start = std::chrono::steady_clock::now();
    const auto w = build_witness_function(ctx, p);
    const auto elapsed = std::chrono::steady_clock::now() - start;
    CHECK(std::chrono::duration<double>(elapsed).count() < 10.0);
    // x0, x1 are free and determine the rest: 9 solutions.
    CHECK(w.frame.classes[0][0].size() == 3);
    CHECK(w.frame.classes[1][0].size() == 3);
    CHECK(w.frame.classes[5].size() == 3);
    CHECK(calculate_size(ctx, w) == 1);
}
