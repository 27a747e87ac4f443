// SPDX-License-Identifier: Apache-2.0
/**
 * @file binarize.hpp
 * @brief The binarization b(H) of a multi-sorted structure, the two
 *        count-preserving instance translations between H and b(H), and the
 *        transport of operations, automorphisms and modular formulas.
 *
 * The sorts of b(H) are the relations Q_1..Q_n of H (every sort of H is
 * assumed to be one of them as a full unary relation, and is added when
 * missing).  Element e of the sort Q_i is the e-th tuple of Q_i.  For
 * i ≤ j and positions s, t over the same sort of H, b(H) has the binary
 * relation "Q_i[s]=Q_j[t]" = {(a, b) : a[s] = b[t]} (positions 1-based in
 * the name, 0-based everywhere else).  Position pairs over different sorts
 * of H would give empty relations and are omitted.
 */
#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "modcsp/core.hpp"
#include "modcsp/expansion.hpp"
#include "modcsp/mpp.hpp"

namespace modcsp {

/// One binary relation of b(H): tuples of Q_i and Q_j agreeing at s and t.
struct BinaryLink {
    std::string name;
    std::size_t i{}, j{};  ///< relation indices into `Binarization::base`, i ≤ j
    std::size_t s{}, t{};  ///< 0-based positions
};

struct Binarization {
    Structure base;                          ///< H plus any missing sort relations
    Structure structure;                     ///< b(H); sort k is base.relations()[k]
    std::vector<std::string> sort_relation;  ///< per sort of H, its full unary relation
    std::vector<BinaryLink> links;

    /// The link relating position s of relation `a` with position t of
    /// relation `b`, in whichever orientation b(H) stores it; nullptr when
    /// the positions lie over different sorts.
    [[nodiscard]] const BinaryLink* find_link(std::string_view a, std::size_t s, std::string_view b,
                                              std::size_t t) const;
    /// The link with the given relation name, or nullptr.
    [[nodiscard]] const BinaryLink* find_link(std::string_view name) const;
    /// The base relation underlying the sort k of b(H).
    [[nodiscard]] const Relation& domain_relation(SortId k) const { return base.relations().at(k.value); }
};

/// Human-readable element name of a tuple, e.g. "[0,1,2]" (the form JSON arrays are read as).
[[nodiscard]] std::string tuple_element_name(const Structure& h, const Relation& r, const Tuple& t);

/// Builds b(H).
[[nodiscard]] Binarization binarize(const Structure& h);

// ---------------------------------------------------------------------------
// Instance translations
// ---------------------------------------------------------------------------

/// An instance over b(H) with one variable per constraint of the
/// (equality-free, sort-covered) instance over H.
struct BinarizedInstance {
    Instance instance;
    Instance source;                         ///< the equality-free, sort-covered instance over `base`
    std::vector<std::size_t> variable_map;   ///< original variable -> variable of `source`
};

/// Equalities are merged first and every variable not constrained by its
/// sort relation gets that constraint; then constraint C becomes the
/// variable "c<k>" of sort C's relation, and every pair of occurrences of a
/// variable in constraints C1, C2 becomes a link constraint.  The solution
/// counts agree exactly.
[[nodiscard]] BinarizedInstance binarize_instance(const Instance& p, const Binarization& b);

/// φ ↦ φ′: the tuple each constraint of `source` receives.  Throws
/// PreconditionError if the assignment violates a constraint.
[[nodiscard]] Assignment binarize_assignment(const BinarizedInstance& bi, const Binarization& b,
                                             const Assignment& phi);

/// An instance over H whose variables are the classes of (variable,
/// position) pairs of an instance over b(H) identified by its constraints.
struct DebinarizedInstance {
    Instance instance;
    /// classes[v][s] = variable of `instance` holding position s of v.
    std::vector<std::vector<std::size_t>> classes;
};

/// Link constraints identify positions; equality constraints identify all
/// positions of their two variables.  Each variable v of sort Q_i then
/// becomes the constraint Q_i(classes of v).  The solution counts agree
/// exactly.  Throws PreconditionError unless `p` is valid over b(H).
[[nodiscard]] DebinarizedInstance debinarize_instance(const Instance& p, const Binarization& b);

/// ξ: a solution over b(H) to the corresponding assignment over H.  Throws
/// PreconditionError when two positions of one class disagree.
[[nodiscard]] Assignment debinarize_assignment(const DebinarizedInstance& di, const Binarization& b,
                                               const Assignment& phi);

// ---------------------------------------------------------------------------
// Transport of operations, automorphisms and formulas
// ---------------------------------------------------------------------------

/// f ↦ f^b: f applied coordinate-wise to tuples.  Throws PreconditionError
/// when f does not preserve some relation (the result is not a tuple).
/// Guarded by the number of table entries (default 2,000,000).
[[nodiscard]] Operation lift_operation(const Operation& f, const Binarization& b);

/// The action of an operation of b(H) on the sort relations of H.
[[nodiscard]] Operation restrict_operation(const Operation& f, const Binarization& b);

/// π ↦ π^b for a per-sort mapping of H.  Throws PreconditionError when the
/// image of a tuple is not a tuple.
[[nodiscard]] Mapping lift_mapping(const Mapping& pi, const Binarization& b);

/// The action of a mapping of b(H) on the sort relations of H.
[[nodiscard]] Mapping restrict_mapping(const Mapping& pi, const Binarization& b);

/// A formula over H equivalent to a formula over b(H) with at most one
/// quantifier block: positions are identified as in debinarize_instance,
/// classes containing a position of a free variable are free (ordered by
/// their first free position) and all other classes are bound by the same
/// block.  Throws PreconditionError on more than one block.
struct DebinarizedFormula {
    MppFormula formula;
    /// free_classes[x][s] = index into formula.free of position s of the
    /// free variable x.
    std::vector<std::vector<std::size_t>> free_classes;
};

[[nodiscard]] DebinarizedFormula debinarize_formula(const MppFormula& f, const Binarization& b);

/// Tuple of the relation defined by a debinarized formula that corresponds
/// to a tuple (of b(H) elements) of the relation defined over b(H).
[[nodiscard]] Tuple debinarize_tuple(const DebinarizedFormula& df, const MppFormula& f, const Binarization& b,
                                     const Tuple& t);

}  // namespace modcsp
