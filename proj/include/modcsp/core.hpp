// SPDX-License-Identifier: Apache-2.0
/**
 * @file core.hpp
 * @brief Multi-sorted relational structures, CSP instances, mappings,
 *        products, factor structures and isomorphism search.
 *
 * Elements are identified by (sort, index); the index is the position of the
 * element's name inside its sort.  Every relation keeps its tuples sorted and
 * duplicate free so that all iteration orders are canonical.
 */
#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace modcsp {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A configurable size guard was exceeded (see `size_guard`).
class GuardError : public PreconditionError {
public:
    using PreconditionError::PreconditionError;
};

/// Returns `default_limit`, or the value of the MODCSP_GUARD environment
/// variable when it is set to a positive integer (unsafe override).
[[nodiscard]] std::size_t size_guard(std::size_t default_limit);

/// Throws GuardError naming `what` when `value > size_guard(limit)`.
void enforce_guard(std::string_view what, std::size_t value, std::size_t limit);

// ---------------------------------------------------------------------------
// Basic vocabulary
// ---------------------------------------------------------------------------

/// Strongly typed index into the sort list of a structure.
struct SortId {
    std::size_t value{};
    friend auto operator<=>(const SortId&, const SortId&) = default;
};

/// Index of an element inside its sort.
using Element = std::uint32_t;
/// A tuple of element indices; the sort of each entry is given by context.
using Tuple = std::vector<Element>;

/// Strict weak order on element names that compares digit runs numerically,
/// so that "2" < "10".  Used to canonicalize sorts read from JSON.
[[nodiscard]] bool natural_less(std::string_view a, std::string_view b);

struct Sort {
    std::string name;
    std::vector<std::string> elements;
    friend bool operator==(const Sort&, const Sort&) = default;
};

struct Relation {
    std::string name;
    std::vector<SortId> signature;
    std::vector<Tuple> tuples;  ///< sorted, duplicate free

    [[nodiscard]] std::size_t arity() const { return signature.size(); }
    [[nodiscard]] std::size_t size() const { return tuples.size(); }
    [[nodiscard]] bool contains(std::span<const Element> t) const;
    friend bool operator==(const Relation&, const Relation&) = default;
};

/// Sorts `tuples` lexicographically and removes duplicates.
void canonicalize(std::vector<Tuple>& tuples);

/// A finite multi-sorted relational structure.  Relations are kept ordered
/// by name; sorts keep their insertion order.
class Structure {
public:
    /// Adds a sort whose elements keep the given order.  Throws on duplicate
    /// sort names or duplicate elements.
    SortId add_sort(std::string name, std::vector<std::string> elements);

    /// Adds (or, with `replace`, overwrites) a relation.  Tuples are checked
    /// against the signature and canonicalized.
    void add_relation(std::string name, std::vector<SortId> signature,
                      std::vector<Tuple> tuples, bool replace = false);

    void remove_relation(std::string_view name);

    [[nodiscard]] const std::vector<Sort>& sorts() const { return sorts_; }
    [[nodiscard]] const std::vector<Relation>& relations() const { return relations_; }
    [[nodiscard]] std::size_t sort_count() const { return sorts_.size(); }
    [[nodiscard]] const Sort& sort(SortId s) const { return sorts_.at(s.value); }
    [[nodiscard]] std::size_t sort_size(SortId s) const { return sorts_.at(s.value).elements.size(); }
    [[nodiscard]] std::size_t universe_size() const;

    [[nodiscard]] std::optional<SortId> find_sort(std::string_view name) const;
    [[nodiscard]] SortId sort_id(std::string_view name) const;  ///< throws if absent
    [[nodiscard]] const Relation* find_relation(std::string_view name) const;
    [[nodiscard]] const Relation& relation(std::string_view name) const;  ///< throws if absent
    [[nodiscard]] std::optional<Element> find_element(SortId s, std::string_view name) const;
    [[nodiscard]] Element element(SortId s, std::string_view name) const;  ///< throws if absent
    [[nodiscard]] const std::string& element_name(SortId s, Element e) const;

    friend bool operator==(const Structure&, const Structure&) = default;

private:
    std::vector<Sort> sorts_;
    std::vector<Relation> relations_;
};

// ---------------------------------------------------------------------------
// Name-level form used for validation and interchange
// ---------------------------------------------------------------------------

struct RelationSpec {
    std::string name;
    std::vector<std::string> signature;
    std::vector<std::vector<std::string>> tuples;
};

struct StructureSpec {
    std::vector<std::pair<std::string, std::vector<std::string>>> sorts;
    std::vector<RelationSpec> relations;
};

struct Violation {
    enum class Kind {
        DuplicateSort,
        DuplicateElement,
        DuplicateRelation,
        UnknownSort,
        ArityMismatch,
        UnknownElement,
        DuplicateTuple,
        EmptySignature,
    };
    Kind kind;
    std::string relation;                   ///< empty for sort-level violations
    std::optional<std::size_t> tuple_index; ///< offending tuple, when relevant
    std::string message;
};

[[nodiscard]] std::vector<Violation> validate_structure(const StructureSpec& spec);
[[nodiscard]] std::vector<Violation> validate_structure(const Structure& h);

/// Builds a structure from its name-level form, sorting every sort's elements
/// by `natural_less`.  Throws PreconditionError listing all violations.
[[nodiscard]] Structure build_structure(const StructureSpec& spec);
[[nodiscard]] StructureSpec to_spec(const Structure& h);

// ---------------------------------------------------------------------------
// Instances
// ---------------------------------------------------------------------------

/// Name of the built-in per-sort equality predicate usable in instances.
inline constexpr std::string_view kEquality = "=";

struct Variable {
    std::string name;
    std::string sort;
    friend bool operator==(const Variable&, const Variable&) = default;
};

struct Constraint {
    std::vector<std::size_t> scope;  ///< indices into the variable list
    std::string relation;            ///< relation name, or kEquality
    friend bool operator==(const Constraint&, const Constraint&) = default;
};

/// A CSP instance in the standard view: typed variables plus constraints.
class Instance {
public:
    std::size_t add_variable(std::string name, std::string sort);
    void add_constraint(std::vector<std::size_t> scope, std::string relation);

    [[nodiscard]] const std::vector<Variable>& variables() const { return vars_; }
    [[nodiscard]] const std::vector<Constraint>& constraints() const { return cons_; }
    [[nodiscard]] std::size_t variable_count() const { return vars_.size(); }
    [[nodiscard]] std::optional<std::size_t> find_variable(std::string_view name) const;
    [[nodiscard]] std::size_t variable(std::string_view name) const;  ///< throws if absent

    friend bool operator==(const Instance&, const Instance&) = default;

private:
    std::vector<Variable> vars_;
    std::vector<Constraint> cons_;
};

/// Checks typing of `p` against the signature of `h`.  Equality constraints
/// must be binary over one sort.
[[nodiscard]] std::vector<std::string> validate_instance(const Instance& p, const Structure& h);
/// Throws PreconditionError if validate_instance reports anything.
void require_valid(const Instance& p, const Structure& h);

/// One element per variable, in variable order.
using Assignment = std::vector<Element>;

/// Sort ids of the instance variables resolved against `h`.
[[nodiscard]] std::vector<SortId> variable_sorts(const Instance& p, const Structure& h);

// ---------------------------------------------------------------------------
// Mappings and homomorphisms
// ---------------------------------------------------------------------------

/// A sort-respecting map: component i maps sort i of the source to sort i of
/// the target.
struct Mapping {
    std::vector<std::vector<Element>> components;

    [[nodiscard]] Element operator()(SortId s, Element e) const { return components[s.value][e]; }
    friend auto operator<=>(const Mapping&, const Mapping&) = default;
};

[[nodiscard]] Mapping identity_mapping(const Structure& h);
[[nodiscard]] Mapping compose(const Mapping& outer, const Mapping& inner);  ///< outer ∘ inner
[[nodiscard]] Mapping inverse(const Mapping& bijection);

/// Same sort names (in order) and the same relation names with the same
/// signatures.
[[nodiscard]] bool similar(const Structure& g, const Structure& h);
void require_similar(const Structure& g, const Structure& h);

/// True iff `phi` maps every tuple of every relation of `g` into the
/// corresponding relation of `h`.  Throws if `phi` is not sort-respecting.
[[nodiscard]] bool is_homomorphism(const Mapping& phi, const Structure& g, const Structure& h);

// ---------------------------------------------------------------------------
// Constructions
// ---------------------------------------------------------------------------

[[nodiscard]] Structure direct_product(const Structure& h, const Structure& g);
/// The ℓ-th power with flat tuple element names "(a,b,c)".
[[nodiscard]] Structure power(const Structure& h, std::size_t ell);
/// One-element-per-sort structure with every relation full.
[[nodiscard]] Structure unit_structure_like(const Structure& h);

/// Substructure induced by one subset of element indices per sort.
[[nodiscard]] Structure induced_substructure(const Structure& h,
                                             const std::vector<std::vector<Element>>& subsets);

/// A partition of each sort given by block labels (any labelling; it is
/// canonicalized to first-occurrence order internally).
struct Partition {
    std::vector<std::vector<std::uint32_t>> blocks;  ///< blocks[sort][element]
};

/// The partition in which every element is alone (the bottom element).
[[nodiscard]] Partition discrete_partition(const Structure& h);
/// Kernel of a mapping from `h` (elements with the same image share a block).
[[nodiscard]] Partition kernel(const Mapping& phi, const Structure& h);
/// Number of blocks of sort `s`.
[[nodiscard]] std::size_t block_count(const Partition& theta, std::size_t s);
/// Builds a partition from explicit blocks of element names; throws unless the
/// blocks are disjoint and cover each sort.
[[nodiscard]] Partition partition_from_blocks(
    const Structure& h, const std::vector<std::vector<std::vector<std::string>>>& blocks);

/// Enumerates all set partitions of {0..n-1} as restricted growth strings,
/// in lexicographic order of the label vectors (all-zero labels first).
/// The callback returns false to stop.
void for_each_set_partition(std::size_t n, const std::function<bool(const std::vector<std::uint32_t>&)>& visit);

/// Enumerates the product of the set-partition lattices of all sorts.
void for_each_partition(const Structure& h, const std::function<bool(const Partition&)>& visit);

/// True iff every block of every sort is a singleton.
[[nodiscard]] bool is_discrete(const Partition& theta);

/// H/θ; elements are named "{a,b}" and appear in first-occurrence order.
/// Also returns the quotient map h → h/θ.
[[nodiscard]] std::pair<Structure, Mapping> factor_structure(const Structure& h, const Partition& theta);

/// Structure with distinguished vertices.
struct Anchor {
    SortId sort;
    Element element;
    friend auto operator<=>(const Anchor&, const Anchor&) = default;
};
struct Anchored {
    Structure structure;
    std::vector<Anchor> anchors;
};

/// (G,x)×(H,y) with anchors paired coordinate-wise.
[[nodiscard]] Anchored anchored_product(const Anchored& g, const Anchored& h);
/// (G,x)⊙(H,y): disjoint union with x_i identified with y_i.  Anchors of the
/// result are the identified vertices.
[[nodiscard]] Anchored glue(const Anchored& g, const Anchored& h);

// ---------------------------------------------------------------------------
// Constants
// ---------------------------------------------------------------------------

/// Name of the constant relation C_a: "C_a" for single-sorted structures,
/// "C_sort.a" otherwise.
[[nodiscard]] std::string constant_name(const Structure& h, SortId s, Element a);
/// If `name` is a constant relation name of `h`, returns the pinned element.
[[nodiscard]] std::optional<Anchor> parse_constant_name(const Structure& h, std::string_view name);
/// H^c: adds every missing constant relation C_a = {(a)}.
[[nodiscard]] Structure with_constants(const Structure& h);
/// True iff every constant relation is present with its intended content.
[[nodiscard]] bool has_all_constants(const Structure& h);

// ---------------------------------------------------------------------------
// Translations between the two CSP views
// ---------------------------------------------------------------------------

/// Variables become elements of the sort named by their type; constraints
/// become tuples.  Throws on unknown sorts or relations, or on equality
/// constraints.
[[nodiscard]] Structure instance_to_structure(const Instance& p, const Structure& signature);
/// Elements of `g` become variables (named by the element name, prefixed with
/// "sort." when `g` has several sorts); tuples become constraints.
[[nodiscard]] Instance structure_to_instance(const Structure& g);

// ---------------------------------------------------------------------------
// Isomorphisms
// ---------------------------------------------------------------------------

/// Enumerates every isomorphism g → h mapping anchor i of g to anchor i of h,
/// in canonical lexicographic order of the image vectors (sort by sort).
/// The callback returns false to stop.
void for_each_isomorphism(const Structure& g, const Structure& h,
                          const std::function<bool(const Mapping&)>& visit,
                          std::span<const Anchor> g_anchors = {},
                          std::span<const Anchor> h_anchors = {});

/// First isomorphism in canonical order, if any.
[[nodiscard]] std::optional<Mapping> find_isomorphism(const Structure& g, const Structure& h,
                                                      std::span<const Anchor> g_anchors = {},
                                                      std::span<const Anchor> h_anchors = {});

}  // namespace modcsp
