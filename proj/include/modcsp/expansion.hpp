// SPDX-License-Identifier: Apache-2.0
/**
 * @file expansion.hpp
 * @brief Equality and constant elimination, indicator problems, polymorphism
 *        search, conjunctive expansion and the partition-lattice Möbius
 *        machinery behind counting with constants.
 */
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "modcsp/core.hpp"
#include "modcsp/oracle.hpp"

namespace modcsp {

// ---------------------------------------------------------------------------
// Equality elimination
// ---------------------------------------------------------------------------

/// Result of merging variables linked by equality constraints.
struct Merged {
    Instance instance;                      ///< equality-free instance
    std::vector<std::size_t> variable_map;  ///< old variable -> new variable
};

/// Removes every equality constraint by merging its two variables (the
/// class keeps the name of its first variable).  The number of solutions is
/// unchanged.  Throws PreconditionError for equalities between sorts.
[[nodiscard]] Merged eliminate_equality(const Instance& p, const Structure& h);

// ---------------------------------------------------------------------------
// Operations and polymorphisms
// ---------------------------------------------------------------------------

/// A per-sort n-ary operation given by value tables.  The entry for the
/// arguments (a_1..a_n) of sort s lives at index Σ a_j·|H_s|^{n-j}.
struct Operation {
    std::size_t arity{};
    std::vector<std::size_t> sort_sizes;
    std::vector<std::vector<Element>> tables;

    [[nodiscard]] static std::size_t index(std::span<const Element> args, std::size_t base);
    [[nodiscard]] Element operator()(SortId s, std::span<const Element> args) const;
    friend bool operator==(const Operation&, const Operation&) = default;
};

/// True iff `f` preserves every relation of `h`.
[[nodiscard]] bool is_polymorphism(const Operation& f, const Structure& h);
/// True iff `f` is ternary with f(a,a,b) = f(b,a,a) = b on every sort.
[[nodiscard]] bool satisfies_maltsev_identities(const Operation& f);
[[nodiscard]] bool is_maltsev_polymorphism(const Operation& f, const Structure& h);

/// The n-th indicator problem: one variable per n-tuple of every sort, one
/// constraint per relation and n-tuple of its tuples.  Its solutions are the
/// n-ary polymorphisms.
struct Indicator {
    Instance instance;
    std::size_t arity{};
    std::vector<std::size_t> sort_offset;  ///< first variable of each sort
};

/// Guarded by the number of constraints (default 2,000,000).
[[nodiscard]] Indicator indicator_problem(const Structure& h, std::size_t n);
[[nodiscard]] Operation operation_from_solution(const Indicator& ind, const Structure& h, const Assignment& a);
[[nodiscard]] Assignment solution_from_operation(const Indicator& ind, const Operation& f);

/// Optional forced value of an operation at the given arguments.
using PinFunction = std::function<std::optional<Element>(SortId, std::span<const Element>)>;

/// Searches for an n-ary polymorphism honouring `pin` by backtracking with
/// arc-consistency propagation over the (implicit) indicator problem.  The
/// constraints are generated on demand, so structures whose indicator
/// problem is too large to store can still be searched.  The search space is
/// guarded by the number of operation entries (default 200,000).
[[nodiscard]] std::optional<Operation> find_polymorphism(const Structure& h, std::size_t arity,
                                                         const PinFunction& pin);

/// A Mal'tsev polymorphism of `h`, or none.
[[nodiscard]] std::optional<Operation> find_maltsev(const Structure& h);

// ---------------------------------------------------------------------------
// Conjunctive definitions
// ---------------------------------------------------------------------------

/// An atom R(x_{args[0]}, ...); the relation may be kEquality.
struct Atom {
    std::string relation;
    std::vector<std::size_t> args;
    friend bool operator==(const Atom&, const Atom&) = default;
};

/// R(x_0..x_{arity-1}) ≡ conjunction of `atoms` (quantifier free).
struct ConjunctiveDefinition {
    std::string relation;
    std::size_t arity{};
    std::vector<Atom> atoms;
};

/// Replaces every constraint on `def.relation` by the defining atoms on the
/// same variables.  `h_plus_r` is the structure containing the defined
/// relation; the result does not use it.  Counts are preserved exactly.
[[nodiscard]] Instance conjunctive_expand(const Instance& p, const Structure& h_plus_r,
                                          const ConjunctiveDefinition& def);

/// `h` without the relation `name` (the signature the expanded instance uses).
[[nodiscard]] Structure without_relation(const Structure& h, std::string_view name);

// ---------------------------------------------------------------------------
// Partition lattice
// ---------------------------------------------------------------------------

struct PartitionWeight {
    Partition theta;
    BigInt weight;  ///< μ(0, θ) in the product of the sorts' partition lattices
};

/// True iff every block of `finer` lies inside a block of `coarser`.
[[nodiscard]] bool refines(const Partition& finer, const Partition& coarser);

/// Möbius weights μ(0,θ) for every partition θ, by the closed form
/// Π_blocks (-1)^{|B|-1}(|B|-1)!.  Guarded by the universe size (default 8).
[[nodiscard]] std::vector<PartitionWeight> partition_mobius_weights(const Structure& h);

/// The same weights by direct recursion μ(0,θ) = -Σ_{η<θ} μ(0,η); used to
/// cross-check the closed form.
[[nodiscard]] std::vector<PartitionWeight> partition_mobius_weights_by_recursion(const Structure& h);

// ---------------------------------------------------------------------------
// Counting with constants
// ---------------------------------------------------------------------------

/// Name of the relation holding the graphs of all endomorphisms.
inline constexpr std::string_view kEndomorphismRelation = "End#";

/// H expanded by the relation whose tuples list (φ(a))_{a ∈ H} for every
/// endomorphism φ, sorts in order.  Guarded by the universe size (default 8).
[[nodiscard]] Structure endomorphism_expansion(const Structure& h);

/// A #_p CSP oracle: the number of solutions modulo `prime`.
using ModularOracle = std::function<std::uint64_t(const Instance&, const Structure&, std::uint64_t prime)>;

/// The direct brute-force oracle.
[[nodiscard]] ModularOracle brute_force_oracle();

/// Counts solutions of `p` over `hc` (H with constants) modulo `prime` using
/// only oracle calls over H expanded by the endomorphism relation: fresh
/// variables v_a per element, constant constraints C_a(x) become x = v_a,
/// every partition θ contributes μ(0,θ)·M(θ), and the sum is divided by
/// |Aut(H)|.  Requires `h` to be p-rigid.
[[nodiscard]] std::uint64_t count_with_constants(const Instance& p, const Structure& hc, std::uint64_t prime,
                                                 const Structure& h,
                                                 const ModularOracle& oracle = brute_force_oracle());

}  // namespace modcsp
