// SPDX-License-Identifier: Apache-2.0
/**
 * @file automorphism.hpp
 * @brief Automorphism enumeration, order-p automorphisms, fixed-point
 *        substructures and reduction to the p-rigid form H^{*p}.
 *
 * Automorphisms are found by the backtracking isomorphism search of core and
 * come out in canonical (lexicographic) order of their image vectors.  Full
 * enumeration is intended for desk-scale structures only.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "modcsp/core.hpp"

namespace modcsp {

/// A per-sort permutation that preserves every relation, with its order.
struct Automorphism {
    Mapping map;
    std::uint64_t order{1};  ///< lcm of all cycle lengths
    friend bool operator==(const Automorphism&, const Automorphism&) = default;
};

/// Order (lcm of cycle lengths) of a per-sort permutation.
[[nodiscard]] std::uint64_t permutation_order(const Mapping& pi);

/// True iff every cycle has length 1 or p and some cycle has length p.
[[nodiscard]] bool has_order_p(const Mapping& pi, std::uint64_t p);

/// True iff `pi` is a bijection on every sort preserving every relation
/// (and hence, by finiteness, an automorphism).
[[nodiscard]] bool is_automorphism(const Mapping& pi, const Structure& h);

/// All automorphisms in canonical order.  Guarded by the universe size
/// (default 64, MODCSP_GUARD overrides).
[[nodiscard]] std::vector<Automorphism> enumerate_automorphisms(const Structure& h);

/// Which order-p automorphism to pick when several exist.
enum class Preference {
    CanonicalFirst,  ///< smallest in canonical order (the default)
    CanonicalLast,   ///< largest in canonical order
};

/// An automorphism of order p, or none when `h` is p-rigid.
[[nodiscard]] std::optional<Automorphism> find_order_p_automorphism(
    const Structure& h, std::uint64_t p, Preference preference = Preference::CanonicalFirst);

/// Per-sort fixed points of `pi`, ascending.
[[nodiscard]] std::vector<std::vector<Element>> fixed_points(const Mapping& pi);

/// The substructure of `h` induced by the fixed points of `pi`.  Throws
/// PreconditionError unless `pi` is an automorphism of `h`.
[[nodiscard]] Structure fix_substructure(const Structure& h, const Mapping& pi);

/// One reduction H_k →_p H_{k+1}.
struct ReductionStep {
    Automorphism automorphism;                ///< automorphism of the step's input
    std::vector<std::vector<Element>> fixed;  ///< kept elements, as indices of the input
};

/// The chain of reductions applied by `p_reduce` and its final structure.
struct ReductionTrace {
    std::vector<ReductionStep> steps;
    Structure result;
};

/// Repeatedly restricts `h` to the fixed points of an order-p automorphism
/// until no such automorphism is left; the result is p-rigid.
[[nodiscard]] ReductionTrace p_reduce(const Structure& h, std::uint64_t p,
                                      Preference preference = Preference::CanonicalFirst);

[[nodiscard]] bool is_p_rigid(const Structure& h, std::uint64_t p);

}  // namespace modcsp
