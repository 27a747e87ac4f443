// SPDX-License-Identifier: Apache-2.0
/**
 * @file fixtures.cpp
 * @brief Reference structures.
 */
#include "modcsp/fixtures.hpp"

#include <string>

namespace modcsp::fixtures {
namespace {

std::vector<std::string> numbered(std::uint32_t n, const std::string& prefix = "", std::uint32_t first = 0) {
    std::vector<std::string> out;
    for (std::uint32_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(first + i));
    return out;
}

/// Equivalence relation with the given classes (element indices).
std::vector<Tuple> equivalence(const std::vector<std::vector<Element>>& classes) {
    std::vector<Tuple> tuples;
    for (const auto& c : classes) {
        for (Element a : c) {
            for (Element b : c) tuples.push_back({a, b});
        }
    }
    return tuples;
}

}  // namespace

Structure t_p(std::uint64_t p, bool constants) {
    Structure h;
    const auto n = static_cast<std::uint32_t>(p + 2);
    const SortId t = h.add_sort("T", numbered(n));
    std::vector<Tuple> r;
    for (Element x = 0; x < n; ++x) {
        for (Element y = 0; y < n; ++y) {
            if (y == p && x < p) continue;
            r.push_back({x, y});
        }
    }
    h.add_relation("R", {t, t}, std::move(r));
    return constants ? with_constants(h) : h;
}

Structure quantifier_order() {
    Structure h;
    const SortId s = h.add_sort("H", numbered(3));
    h.add_relation("R", {s, s, s}, {{1, 0, 0}, {1, 1, 0}, {1, 1, 1}, {2, 2, 2}});
    return h;
}

Structure maltsev_not_2_rectangular(bool constants) {
    Structure h;
    const SortId s = h.add_sort("H", numbered(5));
    h.add_relation("R", {s, s, s}, {{0, 0, 0}, {0, 1, 1}, {1, 0, 2}, {1, 0, 3}, {1, 1, 4}});
    return constants ? with_constants(h) : h;
}

Structure rectangular_not_permutable() {
    Structure h;
    const SortId s = h.add_sort("H", numbered(7, "a", 1));
    h.add_relation("R", {s, s}, equivalence({{0, 1, 2}, {3, 4, 5, 6}}));
    h.add_relation("Q", {s, s}, equivalence({{0, 1, 3, 4}, {2, 5, 6}}));
    return with_constants(h);
}

Structure permutable_not_maltsev() {
    Structure h;
    const SortId s = h.add_sort("H", numbered(6, "a", 1));
    h.add_relation("R", {s, s}, equivalence({{0, 1, 2, 3}, {4, 5}}));
    h.add_relation("Q", {s, s}, equivalence({{0, 1, 4, 5}, {2, 3}}));
    return with_constants(h);
}

Structure rigid_digraph() {
    Structure h;
    const SortId v = h.add_sort("V", {"a", "b", "c", "d"});
    h.add_relation("E", {v, v}, {{1, 0}, {1, 2}, {2, 3}});
    return h;
}

Structure affine(std::uint32_t m) {
    Structure h;
    const SortId s = h.add_sort("H", numbered(m));
    std::vector<Tuple> eq0;
    std::vector<Tuple> eq1;
    std::vector<Tuple> sum0;
    std::vector<Tuple> sum1;
    for (Element x = 0; x < m; ++x) {
        eq0.push_back({x, x});
        eq1.push_back({x, (x + 1) % m});
        for (Element y = 0; y < m; ++y) {
            sum0.push_back({x, y, (2 * m - x - y) % m});
            sum1.push_back({x, y, (2 * m + 1 - x - y) % m});
        }
    }
    h.add_relation("Eq0", {s, s}, std::move(eq0));
    h.add_relation("Eq1", {s, s}, std::move(eq1));
    h.add_relation("Sum", {s, s, s}, std::move(sum0));
    if (m == 2) h.add_relation("Sum1", {s, s, s}, std::move(sum1));
    return with_constants(h);
}

Structure chain_order() {
    Structure h;
    const SortId s = h.add_sort("H", numbered(3));
    h.add_relation("Le", {s, s}, {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}});
    return h;
}

std::vector<Element> affine_maltsev(std::uint32_t m) {
    std::vector<Element> table(static_cast<std::size_t>(m) * m * m);
    for (Element x = 0; x < m; ++x) {
        for (Element y = 0; y < m; ++y) {
            for (Element z = 0; z < m; ++z) table[(x * m + y) * m + z] = (x + m - y + z) % m;
        }
    }
    return table;
}

}  // namespace modcsp::fixtures
