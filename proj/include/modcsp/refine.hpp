// SPDX-License-Identifier: Apache-2.0
/**
 * @file refine.hpp
 * @brief Refinements: shrinking variable domains, re-typing structures and
 *        instances so that every domain becomes a sort of its own, and the
 *        end-to-end modular solver for the T_p family.
 *
 * A refinement G of H consists of pairwise disjoint sorts G_i with injective
 * maps ξ_i : G_i → H_{i'} and relations Q = ξ^{-1}(R) over sort tuples
 * (G_{i_1},…,G_{i_ℓ}) with ξ(G_{i_r}) ⊆ pr_r R.  Because different sorts may
 * be permuted independently, a refinement of a p-rigid structure can have
 * automorphisms of order p, and p-reduction becomes available again.
 *
 * Domains are produced by one of two pipelines: arc-consistency (the width-1
 * instance of bounded-width consistency) or probing a decision procedure with
 * pinned variables.  Elements of a refined sort keep the names of their
 * images; refined relations are named "R@G1,…,Gℓ".
 */
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "modcsp/core.hpp"

namespace modcsp {

// ---------------------------------------------------------------------------
// Domains
// ---------------------------------------------------------------------------

/// Per-variable domains D_v ⊆ H_{τ(v)} (ascending element indices).  When
/// `unsatisfiable` is set the instance has no solution and the domains carry
/// no further meaning.
struct DomainAssignment {
    std::vector<std::vector<Element>> domains;
    bool unsatisfiable{false};
    friend bool operator==(const DomainAssignment&, const DomainAssignment&) = default;
};

/// Arc-consistent form of an instance: the domains and, for every constraint
/// (in instance order), its relation with the unsupported tuples removed.
struct ArcConsistency {
    DomainAssignment domains;
    std::vector<std::vector<Tuple>> relations;
};

/// Runs the tuple-removal rule to its fixpoint: a tuple of one constraint is
/// removed when some constraint sharing variables has no tuple agreeing with
/// it on the shared variables.  Scopes with repeated variables keep only the
/// tuples that agree on the repetitions; equality constraints are handled as
/// the diagonal relation.  Optional `initial` domains are imposed first (one
/// list per variable).  Never loses a solution.
[[nodiscard]] ArcConsistency arc_consistency(const Instance& p, const Structure& h,
                                             const DomainAssignment* initial = nullptr);

/// Bounded-width consistency domains.  Only width 1 (arc-consistency) is
/// implemented; other widths throw PreconditionError.
[[nodiscard]] DomainAssignment consistency_domains(const Instance& p, const Structure& h, unsigned width = 1);

/// A decision procedure for CSP(H): true/false, or nothing when it gave up.
using DecisionSolver = std::function<std::optional<bool>(const Instance&, const Structure&)>;

/// The exhaustive search of the oracle as a decision procedure.
[[nodiscard]] DecisionSolver oracle_decision_solver();

/// D_v = { a : P ∧ C_a(v) is satisfiable }, the minimal lossless domains.
/// Requires every constant relation in `h`.  Throws Error when the solver
/// gives up on a probe.
[[nodiscard]] DomainAssignment solver_based_domains(const Instance& p, const Structure& h,
                                                    const DecisionSolver& solver = oracle_decision_solver());

/// An instance whose constraints carry explicit relations in a structure of
/// their own, together with the values of removed variables.
struct ReducedInstance {
    Structure structure;  ///< the sorts of the input plus one relation per constraint
    Instance instance;
    std::vector<std::optional<Element>> pinned;     ///< per input variable: its value if removed
    std::vector<std::optional<std::size_t>> index;  ///< per input variable: new index if kept
    bool unsatisfiable{false};                      ///< a fully pinned constraint failed
};

/// Substitutes every variable with a one-element domain into the
/// constraints and restricts the rest to their domains (unary "D|v"
/// constraints for domains smaller than the sort).  When `domains` is lossless
/// the reduced instance has exactly as many solutions as `p`.
[[nodiscard]] ReducedInstance eliminate_singletons(const Instance& p, const Structure& h,
                                                   const DomainAssignment& domains);

// ---------------------------------------------------------------------------
// Refined structures and instances
// ---------------------------------------------------------------------------

/// One member of a domain family: a named subset of a single sort of H.
struct RefinedDomain {
    std::string name;
    SortId sort;
    std::vector<Element> elements;
};

/// Resolves element names to the unique sort containing all of them.  Throws
/// PreconditionError when the names straddle sorts or are unknown.
[[nodiscard]] RefinedDomain domain_from_names(const Structure& h, std::string name,
                                              std::span<const std::string> elements);

/// Where a refined relation comes from.
struct RelationOrigin {
    std::string relation;               ///< name of R_{j'} in H
    std::vector<SortId> refined_sorts;  ///< the sorts of G it is placed on
};

/// A refinement G of H with its maps ξ_i and the relation provenance.
struct Refinement {
    Structure structure;                           ///< G
    std::vector<SortId> base_sort;                 ///< i' for every sort i of G
    std::vector<std::vector<Element>> xi;          ///< xi[i][a] = ξ_i(a)
    std::map<std::string, RelationOrigin> origin;  ///< per relation of G

    [[nodiscard]] Element image(SortId s, Element a) const { return xi[s.value][a]; }
    /// ξ^{-1}_s(b), if b lies in the image of ξ_s.
    [[nodiscard]] std::optional<Element> preimage(SortId s, Element b) const;
};

/// Builds G with one sort per family member and Q = ξ^{-1}(R) for every
/// relation R of H and every choice of members with ξ(G_r) ⊆ pr_r R.
/// Throws PreconditionError for empty or duplicate members, unknown
/// elements, or duplicate names; guarded by the number of placements
/// (default 100,000).
[[nodiscard]] Refinement build_refinement(const Structure& h, std::span<const RefinedDomain> family);

/// Name of the relation placing `relation` on the given refined sorts.
[[nodiscard]] std::string refined_relation_name(const Structure& g, std::string_view relation,
                                                std::span<const SortId> sorts);

/// The sort function σ' choosing, for each variable, the refined sort whose
/// image is exactly D_v.  Throws PreconditionError when none matches.
[[nodiscard]] std::vector<SortId> sort_function_for(const Refinement& r, const Instance& p, const Structure& h,
                                                    const DomainAssignment& domains);

/// P^{σ'}: every variable gets the sort σ'(v) and every constraint the
/// relation ξ^{-1}(R) on the refined sorts of its scope.  Throws
/// PreconditionError when ξ(G_{σ'(v)}) is not inside the sort of v or inside
/// a projection of a constraint relation, or when equal variables get
/// different refined sorts.
[[nodiscard]] Instance refine_instance(const Instance& p, const Structure& h, const Refinement& r,
                                       std::span<const SortId> sort_function);

/// ξ^{-1} ∘ φ for a solution φ of the original instance, or nothing when
/// some value lies outside the image of its refined sort.
[[nodiscard]] std::optional<Assignment> lift_assignment(const Refinement& r, std::span<const SortId> sort_function,
                                                        const Assignment& phi);

/// The family of distinct domains of an instance, in first-occurrence order
/// and named "D0", "D1", …, together with the sort function selecting them.
struct DomainFamily {
    std::vector<RefinedDomain> members;
    std::vector<std::size_t> member_of;  ///< per variable
};
[[nodiscard]] DomainFamily domain_family(const Instance& p, const Structure& h, const DomainAssignment& domains);

// ---------------------------------------------------------------------------
// The T_p family
// ---------------------------------------------------------------------------

/// The roles of the elements of a structure recognized as T_p.
struct TpShape {
    std::uint64_t p{};
    std::string relation;             ///< name of R
    std::vector<Element> low;         ///< the elements 0..p-1
    Element top{};                    ///< the element p
    Element free{};                   ///< the element p+1
};

/// Structural recognition: one sort of size p+2, every constant relation,
/// and exactly one other relation, binary, missing exactly the pairs
/// (x, t) for p distinct x ≠ t.  Nothing when `h` does not have this shape.
[[nodiscard]] std::optional<TpShape> recognize_tp(const Structure& h, std::uint64_t p);

/// The refinement T*_p: the whole universe ("G-1"), every singleton ("G0"…),
/// {p, p+1} ("G<p+2>") and the universe without p ("G<p+3>").
[[nodiscard]] std::vector<RefinedDomain> tp_star_family(const Structure& h, std::uint64_t p);

/// Trace of the T_p solver.
struct TpSolution {
    std::uint64_t residue{};
    std::size_t rounds{};          ///< passes through the consistency step
    std::size_t remaining{};       ///< |V'| in the final step (0 when unsatisfiable)
    bool unsatisfiable{false};
};

/// Counts the solutions of an instance over T_p modulo p: arc-consistency,
/// removal of singleton variables, removal of {0..p-1} from the remaining
/// domains (a multiple of p of the solutions), repeated until every domain
/// is {p, p+1}, then 2^{|V'|} mod p.  Throws PreconditionError when the
/// structure is not T_p.
[[nodiscard]] TpSolution solve_tp(const Instance& p, const Structure& h, std::uint64_t prime);

// ---------------------------------------------------------------------------
// Refine, reduce, count
// ---------------------------------------------------------------------------

/// How refine_and_reduce obtained its answer.
enum class CountMethod {
    Unsatisfiable,  ///< some solver-based domain was empty
    Product,        ///< every used relation of the reduced structure is a product
    Fallback,       ///< brute force over the reduced structure
};

[[nodiscard]] std::string_view to_string(CountMethod m);

struct RefineReduceResult {
    std::uint64_t residue{};
    CountMethod method{CountMethod::Fallback};
    DomainAssignment domains;
    Refinement refinement;
    std::vector<SortId> sort_function;
    Instance refined;      ///< the refined instance P^{σ'}
    Structure reduced;     ///< the p-reduced refined structure
    std::size_t reduction_steps{};
};

/// Solver-based refinement, p-reduction of the refined structure, then
/// counting: when every relation used by the refined instance is, in the
/// reduced structure, the Cartesian product of its projections, the count
/// is the product of the per-variable domain sizes; otherwise the reduced
/// instance is counted by brute force.  Requires every constant relation.
[[nodiscard]] RefineReduceResult refine_and_reduce(const Instance& p, const Structure& h, std::uint64_t prime,
                                                   const DecisionSolver& solver = oracle_decision_solver());

}  // namespace modcsp
