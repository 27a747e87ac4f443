// SPDX-License-Identifier: Apache-2.0
/**
 * @file properties.hpp
 * @brief Rectangularity, (p-)balancedness through rank-1 block matrices,
 *        relational products and congruence (p-)permutability, each with
 *        explicit witnesses, plus a bounded generator of definable relations.
 */
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "modcsp/core.hpp"
#include "modcsp/mpp.hpp"
#include "modcsp/oracle.hpp"

namespace modcsp {

// ---------------------------------------------------------------------------
// Rectangularity
// ---------------------------------------------------------------------------

/// (a,c), (a,d), (b,c) ∈ R but (b,d) ∉ R, where a, b are restrictions to the
/// left positions and c, d restrictions to the remaining positions.
struct RectangularityWitness {
    std::vector<std::size_t> left;
    Tuple a, b, c, d;
    friend bool operator==(const RectangularityWitness&, const RectangularityWitness&) = default;
};

/// The complement of `left` in [0, arity), ascending.
[[nodiscard]] std::vector<std::size_t> complement_positions(std::span<const std::size_t> left, std::size_t arity);

/// Rectangularity of R viewed as a subset of pr_left R × pr_rest R.  The
/// witness is the first in the order: a ascending, then b, then the smallest
/// c, then the smallest d.  `left` must be a proper nonempty subset.
[[nodiscard]] std::optional<RectangularityWitness> rectangularity_witness(const Relation& r,
                                                                          std::span<const std::size_t> left);

/// Checks every proper nonempty split (by ascending bitmask of the left
/// positions); guarded at arity 16.
[[nodiscard]] std::optional<RectangularityWitness> find_rectangularity_witness(const Relation& r);
[[nodiscard]] bool is_rectangular(const Relation& r);

// ---------------------------------------------------------------------------
// Count matrices and balancedness
// ---------------------------------------------------------------------------

/// Exact rank over the rationals by fraction-free (Bareiss) elimination.
[[nodiscard]] std::size_t rank_over_rationals(std::vector<std::vector<BigInt>> m);
/// Rank over the p-element field.
[[nodiscard]] std::size_t rank_mod_p(std::vector<std::vector<std::uint64_t>> m, std::uint64_t p);

/// A three-way view of a relation: left positions, middle positions, and the
/// remaining positions that are counted.
struct ThreeWaySplit {
    std::vector<std::size_t> left;
    std::vector<std::size_t> middle;
    friend bool operator==(const ThreeWaySplit&, const ThreeWaySplit&) = default;
};

/// The contiguous split H^k × H^l × H^{n-k-l}.
[[nodiscard]] ThreeWaySplit contiguous_split(std::size_t k, std::size_t l);

/// Every contiguous split of an n-ary relation with three nonempty parts.
[[nodiscard]] std::vector<ThreeWaySplit> contiguous_splits(std::size_t arity);

/// M[x,y] = number of extensions of (x,y) in R, rows pr_left R, columns
/// pr_middle R.  With a modulus the entries are reduced.
struct CountMatrix {
    std::vector<Tuple> rows;
    std::vector<Tuple> columns;
    std::vector<std::vector<BigInt>> entries;
    std::optional<std::uint64_t> modulus;
};

/// Throws PreconditionError unless left and middle are disjoint, nonempty,
/// in range, and leave at least one position to count.
[[nodiscard]] CountMatrix count_matrix(const Relation& r, const ThreeWaySplit& split,
                                       std::optional<std::uint64_t> modulus = std::nullopt);

/// True iff every connected component of the nonzero pattern has rank ≤ 1
/// (over the rationals, or over GF(p) when the matrix carries a modulus).
[[nodiscard]] bool is_rank1_block(const CountMatrix& m);

[[nodiscard]] bool is_balanced(const Relation& r, const ThreeWaySplit& split);
[[nodiscard]] bool is_p_balanced(const Relation& r, const ThreeWaySplit& split, std::uint64_t p);
/// The first contiguous split that is not (p-)balanced, if any.
[[nodiscard]] std::optional<ThreeWaySplit> unbalanced_split(const Relation& r,
                                                            std::optional<std::uint64_t> modulus = std::nullopt);

// ---------------------------------------------------------------------------
// Binary relations on a carrier, products and permutability
// ---------------------------------------------------------------------------

/// A binary relation on the points 0..carrier_size-1 (sorted pairs).
struct BinaryRelation {
    std::size_t carrier_size{};
    std::vector<std::pair<Element, Element>> pairs;

    [[nodiscard]] bool contains(Element a, Element b) const;
    friend bool operator==(const BinaryRelation&, const BinaryRelation&) = default;
};

/// The identity relation on n points.
[[nodiscard]] BinaryRelation equality_relation(std::size_t n);
[[nodiscard]] bool is_equivalence(const BinaryRelation& r);

/// α ∘ β: (a,b) such that some c has (a,c) ∈ α and (c,b) ∈ β.
[[nodiscard]] BinaryRelation compose(const BinaryRelation& alpha, const BinaryRelation& beta);
/// α ∘_p β: (a,b) such that the number of such c is nonzero modulo p.
[[nodiscard]] BinaryRelation compose_p(const BinaryRelation& alpha, const BinaryRelation& beta, std::uint64_t p);
/// Number of c with (a,c) ∈ α and (c,b) ∈ β.
[[nodiscard]] std::size_t composition_count(const BinaryRelation& alpha, const BinaryRelation& beta, Element a,
                                            Element b);

/// An equivalence relation with a human-readable origin.
struct Congruence {
    std::string name;
    BinaryRelation relation;
    std::string provenance;
    std::vector<std::string> point_names;  ///< display names of the carrier points
};

/// A binary relation of `h` over a single sort, as a congruence of that sort.
/// Throws PreconditionError unless it is an equivalence relation.
[[nodiscard]] Congruence congruence_from_relation(const Structure& h, std::string_view relation);

/// A 2k-ary relation `alpha` restricted to pairs of tuples of the k-ary
/// relation `s`, as a congruence on the tuples of `s` (in their order).
/// Throws PreconditionError unless it is an equivalence relation on s.
[[nodiscard]] Congruence congruence_on_relation(const Structure& h, const Relation& s, const Relation& alpha,
                                                std::string provenance);

/// The kernels of the projections of `s` to `left` and to its complement
/// (the two congruences used to derive rectangularity from permutability).
[[nodiscard]] std::pair<Congruence, Congruence> projection_congruences(const Structure& h, const Relation& s,
                                                                       std::span<const std::size_t> left);

struct PermutabilityWitness {
    std::size_t first{};   ///< index of α in the input list
    std::size_t second{};  ///< index of β
    Element x{};
    Element y{};
    bool in_alpha_beta{};  ///< (x,y) ∈ α∘β (else it is in β∘α only)
};

struct PermutabilityReport {
    bool ok{true};
    std::optional<PermutabilityWitness> witness;
    /// Every pair on which the two products of the offending congruences
    /// disagree, ascending.
    std::vector<std::pair<Element, Element>> asymmetric;
};

/// Compares α∘β with β∘α (or the ∘_p versions when `p` is given) for every
/// pair of inputs in order, stopping at the first pair of congruences that
/// does not permute.  The reported witness is the first asymmetric pair
/// related by neither congruence, or the first asymmetric pair if every one
/// is related by one of them.  Throws PreconditionError on a non-equivalence
/// or on carrier mismatch.
[[nodiscard]] PermutabilityReport check_permutability(std::span<const Congruence> congruences,
                                                      std::optional<std::uint64_t> p = std::nullopt);
[[nodiscard]] PermutabilityReport check_p_permutability(std::span<const Congruence> congruences, std::uint64_t p);

// ---------------------------------------------------------------------------
// Bounded generation of definable relations
// ---------------------------------------------------------------------------

struct FormulaBounds {
    std::size_t max_free = 2;
    std::size_t max_bound = 1;
    std::size_t max_atoms = 2;
    bool existential = true;             ///< emit existential blocks
    std::vector<std::uint64_t> primes;   ///< emit a modular block per prime
    bool equality_atoms = false;         ///< allow "=" atoms
    std::size_t limit = 2000;            ///< stop after this many formulas
};

/// Formulas with free variables x0.., bound variables y0.. in one block (or
/// none), and conjunctions of atoms in which every variable occurs, in a
/// deterministic order.  Formulas whose atoms force inconsistent sorts are
/// skipped.
[[nodiscard]] std::vector<MppFormula> generate_formulas(const Structure& h, const FormulaBounds& bounds);

}  // namespace modcsp
