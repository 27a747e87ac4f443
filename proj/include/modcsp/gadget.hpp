// SPDX-License-Identifier: Apache-2.0
/**
 * @file gadget.hpp
 * @brief Rectangularity obstructions, standard hardness gadgets, protection
 *        against p-reduction, the bipartite graph K_R of a gadget and the
 *        translation of bipartite homomorphism instances into CSP instances.
 *
 * Relations are split into a prefix of `split` positions and the remaining
 * suffix.  A standard gadget partitions both projections into two blocks,
 * A_{1,1} ⊎ A_{1,2} = pr_prefix R and A_{2,1} ⊎ A_{2,2} = pr_suffix R, such
 * that A_{1,1}×A_{2,2}, A_{1,2}×A_{2,1} and A_{1,2}×A_{2,2} lie inside R and
 * A_{1,1}×A_{2,1} is disjoint from it; R is then exactly the union of the
 * three blocks.  The artifact produces certificates only; it draws no
 * complexity conclusions.
 */
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "modcsp/core.hpp"

namespace modcsp {

// ---------------------------------------------------------------------------
// Obstructions and gadgets
// ---------------------------------------------------------------------------

/// (a,c), (a,d), (b,c) ∈ R and (b,d) ∉ R for a, b over the prefix and c, d
/// over the suffix.
struct Obstruction {
    Relation relation;
    std::size_t split{};
    Tuple a, b, c, d;
};

/// The first obstruction (a ascending, then b, c, d) for the given split, or
/// nothing when R is rectangular across it.  Throws PreconditionError unless
/// 1 ≤ split < arity.
[[nodiscard]] std::optional<Obstruction> find_rect_obstruction(const Relation& r, std::size_t split);

/// A standard hardness gadget.  `blocks[i][j]` is A_{i+1,j+1} (sorted).
struct StandardGadget {
    Relation relation;
    std::size_t split{};
    std::array<std::array<std::vector<Tuple>, 2>, 2> blocks;
    std::string provenance;  ///< where R comes from (relation name or formula text)
};

/// Every violated gadget condition, as text; empty for a valid gadget.
[[nodiscard]] std::vector<std::string> gadget_violations(const StandardGadget& g);

/// The gadget for the given split, if any.  It is unique: A_{1,2} are the
/// prefixes adjacent to every suffix, A_{1,1} the others, A_{2,2} their
/// common neighbourhood and A_{2,1} the rest.  Throws PreconditionError
/// unless 1 ≤ split < arity.
[[nodiscard]] std::optional<StandardGadget> find_standard_gadget(const Relation& r, std::size_t split,
                                                                 std::string provenance = {});
/// The gadget for the first split that has one.  Requires arity ≥ 2.
[[nodiscard]] std::optional<StandardGadget> find_standard_gadget(const Relation& r, std::string provenance = {});

// ---------------------------------------------------------------------------
// The bipartite graph K_R
// ---------------------------------------------------------------------------

/// K_R: left vertices are the prefixes of R, right vertices its suffixes,
/// edges its tuples.  The labelling 𝔉^{-1} is given by `left`/`right`.
struct BipartiteGraph {
    std::vector<Tuple> left;
    std::vector<Tuple> right;
    std::vector<std::pair<std::size_t, std::size_t>> edges;  ///< sorted
    /// blocks[i][j] = A'_{i+1,j+1} as vertex indices of side i.
    std::array<std::array<std::vector<std::size_t>, 2>, 2> blocks;

    /// Neighbours (vertex indices of the other side), ascending.
    [[nodiscard]] std::vector<std::size_t> neighbourhood(std::size_t side, std::size_t vertex) const;
    /// The graph as a structure with sorts "L", "R" and the relation "E".
    [[nodiscard]] Structure as_structure() const;
};

[[nodiscard]] BipartiteGraph build_kr(const StandardGadget& g);

/// A side-respecting graph structure (sorts "L", "R", relation "E") from an
/// undirected graph on vertices 0..n-1, sides by breadth-first 2-colouring
/// (the least vertex of every component goes left).  Throws
/// PreconditionError when the graph is not bipartite.
[[nodiscard]] Structure bipartite_from_graph(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> edges);

// ---------------------------------------------------------------------------
// Protection
// ---------------------------------------------------------------------------

/// True iff after every sequence of reductions of `carrier` by
/// automorphisms of order p some tuple of `s` (tuples of the carrier's
/// relation `relation`) keeps all its entries.  Exhaustive over the
/// reduction sequences; guarded at 8 carrier elements.
[[nodiscard]] bool is_p_protected(const Structure& carrier, std::string_view relation, std::span<const Tuple> s,
                                  std::uint64_t p);

/// Same for a set of carrier elements: some element of `s` survives.
[[nodiscard]] bool is_p_protected(const Structure& carrier, std::span<const Anchor> s, std::uint64_t p);

/// Which carrier protection is judged in.
enum class Protection {
    Relation,  ///< the structure with H's sorts and the single relation R
    Graph,     ///< the bipartite graph K_R
};

[[nodiscard]] std::string_view to_string(Protection mode);

/// Whether the three blocks of the gadget that lie inside R are each
/// p-protected.  `h` supplies the sorts of R in Relation mode.
[[nodiscard]] bool is_protected_gadget(const StandardGadget& g, const Structure& h, std::uint64_t p,
                                       Protection mode);

/// |A'_{i,j}| after p-reducing K_R, for each of the four blocks.
[[nodiscard]] std::array<std::array<std::size_t, 2>, 2> reduced_block_sizes(const BipartiteGraph& k,
                                                                           std::uint64_t p);

// ---------------------------------------------------------------------------
// Instance translation
// ---------------------------------------------------------------------------

/// A CSP instance over `structure` (H plus the gadget relation and the two
/// projections of R, named "<R>|left" and "<R>|right").
struct GadgetInstance {
    Structure structure;
    Instance instance;
};

/// Translates a side-respecting graph `g` (sorts "L", "R", relation "E")
/// into a CSP instance: variables x_{u,1..s} per left vertex, y_{v,1..t} per
/// right vertex, one R-constraint per edge, and a projection constraint for
/// each isolated vertex.  Its number of solutions equals hom(g, K_R).
/// The gadget relation is added to `h` under its own name unless `h`
/// already has it with the same tuples.
[[nodiscard]] GadgetInstance gadget_reduction(const Structure& g, const StandardGadget& gadget, const Structure& h);

}  // namespace modcsp
