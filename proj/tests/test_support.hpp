// SPDX-License-Identifier: Apache-2.0
/**
 * @file test_support.hpp
 * @brief Seeded random generators shared by the unit and acceptance tests.
 */
#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "modcsp/core.hpp"

namespace modcsp::testing {

using Rng = std::mt19937_64;

inline std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline bool coin(Rng& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

/// Single-sorted structure on `n` elements with the given relation arities;
/// each candidate tuple is kept with probability `density`.
inline Structure random_structure(Rng& rng, std::size_t n, const std::vector<std::size_t>& arities,
                                  double density = 0.5) {
    Structure h;
    std::vector<std::string> elems;
    for (std::size_t i = 0; i < n; ++i) elems.push_back(std::to_string(i));
    const SortId s = h.add_sort("H", elems);
    for (std::size_t r = 0; r < arities.size(); ++r) {
        const std::size_t k = arities[r];
        std::vector<Tuple> tuples;
        Tuple t(k, 0);
        std::size_t total = 1;
        for (std::size_t i = 0; i < k; ++i) total *= n;
        for (std::size_t code = 0; code < total; ++code) {
            std::size_t c = code;
            for (std::size_t i = 0; i < k; ++i) {
                t[k - 1 - i] = static_cast<Element>(c % n);
                c /= n;
            }
            if (coin(rng, density)) tuples.push_back(t);
        }
        h.add_relation("R" + std::to_string(r), std::vector<SortId>(k, s), std::move(tuples));
    }
    return h;
}

/// Two-sorted structure with sort sizes `n0`, `n1`, one relation per listed
/// signature.
inline Structure random_two_sorted(Rng& rng, std::size_t n0, std::size_t n1,
                                   const std::vector<std::vector<std::size_t>>& signatures, double density = 0.5) {
    Structure h;
    std::vector<std::string> e0;
    std::vector<std::string> e1;
    for (std::size_t i = 0; i < n0; ++i) e0.push_back("a" + std::to_string(i));
    for (std::size_t i = 0; i < n1; ++i) e1.push_back("b" + std::to_string(i));
    h.add_sort("A", e0);
    h.add_sort("B", e1);
    for (std::size_t r = 0; r < signatures.size(); ++r) {
        std::vector<SortId> sig;
        for (const auto s : signatures[r]) sig.push_back(SortId{s});
        std::vector<Tuple> tuples;
        Tuple t(sig.size(), 0);
        const auto rec = [&](auto&& self, std::size_t i) -> void {
            if (i == sig.size()) {
                if (coin(rng, density)) tuples.push_back(t);
                return;
            }
            for (Element e = 0; e < h.sort_size(sig[i]); ++e) {
                t[i] = e;
                self(self, i + 1);
            }
        };
        rec(rec, 0);
        h.add_relation("R" + std::to_string(r), sig, std::move(tuples));
    }
    return h;
}

/// Random instance over `h` with `vars` variables (all of the first sort
/// unless the structure is multi-sorted, in which case sorts are chosen at
/// random) and `cons` constraints drawn from the relations whose names pass
/// `allowed`.
template <class Allowed>
Instance random_instance(Rng& rng, const Structure& h, std::size_t vars, std::size_t cons, Allowed allowed) {
    Instance p;
    std::vector<std::size_t> var_sort;
    for (std::size_t v = 0; v < vars; ++v) {
        const std::size_t s = uniform(rng, 0, h.sort_count() - 1);
        var_sort.push_back(s);
        p.add_variable("v" + std::to_string(v), h.sort(SortId{s}).name);
    }
    std::vector<const Relation*> rels;
    for (const auto& r : h.relations()) {
        if (allowed(r.name)) rels.push_back(&r);
    }
    if (rels.empty() || vars == 0) return p;
    for (std::size_t c = 0; c < cons; ++c) {
        const Relation& r = *rels[uniform(rng, 0, rels.size() - 1)];
        std::vector<std::size_t> scope;
        bool ok = true;
        for (const auto s : r.signature) {
            std::vector<std::size_t> candidates;
            for (std::size_t v = 0; v < vars; ++v) {
                if (var_sort[v] == s.value) candidates.push_back(v);
            }
            if (candidates.empty()) {
                ok = false;
                break;
            }
            scope.push_back(candidates[uniform(rng, 0, candidates.size() - 1)]);
        }
        if (ok) p.add_constraint(std::move(scope), r.name);
    }
    return p;
}

inline Instance random_instance(Rng& rng, const Structure& h, std::size_t vars, std::size_t cons) {
    return random_instance(rng, h, vars, cons, [](const std::string&) { return true; });
}

}  // namespace modcsp::testing
