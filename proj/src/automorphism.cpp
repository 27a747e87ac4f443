// SPDX-License-Identifier: Apache-2.0
/**
 * @file automorphism.cpp
 * @brief Automorphism search and p-reduction.
 */
#include "modcsp/automorphism.hpp"

#include <numeric>

#include "modcsp/oracle.hpp"

namespace modcsp {
namespace {

/// Cycle lengths of every sort component.
std::vector<std::uint64_t> cycle_lengths(const Mapping& pi) {
    std::vector<std::uint64_t> lengths;
    for (const auto& c : pi.components) {
        std::vector<bool> seen(c.size(), false);
        for (std::size_t start = 0; start < c.size(); ++start) {
            if (seen[start]) continue;
            std::uint64_t len = 0;
            for (std::size_t e = start; !seen[e]; e = c[e]) {
                if (c[e] >= c.size()) throw PreconditionError("mapping is not a permutation");
                seen[e] = true;
                ++len;
            }
            lengths.push_back(len);
        }
    }
    return lengths;
}

void check_guard(const Structure& h) {
    enforce_guard("automorphism search universe size", h.universe_size(), size_guard(64));
}

}  // namespace

std::uint64_t permutation_order(const Mapping& pi) {
    std::uint64_t order = 1;
    for (const auto len : cycle_lengths(pi)) order = std::lcm(order, len);
    return order;
}

bool has_order_p(const Mapping& pi, std::uint64_t p) {
    bool nontrivial = false;
    for (const auto len : cycle_lengths(pi)) {
        if (len == p) nontrivial = true;
        else if (len != 1) return false;
    }
    return nontrivial;
}

bool is_automorphism(const Mapping& pi, const Structure& h) {
    if (pi.components.size() != h.sort_count()) return false;
    for (std::size_t s = 0; s < h.sort_count(); ++s) {
        const auto& c = pi.components[s];
        if (c.size() != h.sort_size(SortId{s})) return false;
        std::vector<bool> hit(c.size(), false);
        for (const auto e : c) {
            if (e >= c.size() || hit[e]) return false;
            hit[e] = true;
        }
    }
    return is_homomorphism(pi, h, h);
}

std::vector<Automorphism> enumerate_automorphisms(const Structure& h) {
    check_guard(h);
    std::vector<Automorphism> out;
    for_each_isomorphism(h, h, [&](const Mapping& m) {
        out.push_back({m, permutation_order(m)});
        return true;
    });
    return out;
}

std::optional<Automorphism> find_order_p_automorphism(const Structure& h, std::uint64_t p, Preference preference) {
    require_prime(p);
    check_guard(h);
    std::optional<Automorphism> found;
    for_each_isomorphism(h, h, [&](const Mapping& m) {
        if (!has_order_p(m, p)) return true;
        found = Automorphism{m, p};
        return preference == Preference::CanonicalLast;
    });
    return found;
}

std::vector<std::vector<Element>> fixed_points(const Mapping& pi) {
    std::vector<std::vector<Element>> out;
    for (const auto& c : pi.components) {
        std::vector<Element> fix;
        for (Element e = 0; e < c.size(); ++e) {
            if (c[e] == e) fix.push_back(e);
        }
        out.push_back(std::move(fix));
    }
    return out;
}

Structure fix_substructure(const Structure& h, const Mapping& pi) {
    if (!is_automorphism(pi, h)) throw PreconditionError("fix_substructure: mapping is not an automorphism");
    return induced_substructure(h, fixed_points(pi));
}

ReductionTrace p_reduce(const Structure& h, std::uint64_t p, Preference preference) {
    ReductionTrace trace{{}, h};
    while (auto pi = find_order_p_automorphism(trace.result, p, preference)) {
        auto fixed = fixed_points(pi->map);
        trace.result = induced_substructure(trace.result, fixed);
        trace.steps.push_back({std::move(*pi), std::move(fixed)});
    }
    return trace;
}

bool is_p_rigid(const Structure& h, std::uint64_t p) { return !find_order_p_automorphism(h, p).has_value(); }

}  // namespace modcsp
