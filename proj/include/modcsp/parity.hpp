// SPDX-License-Identifier: Apache-2.0
/**
 * @file parity.hpp
 * @brief Parity of the number of solutions through frames and witness
 *        functions of relations closed under a Mal'tsev operation.
 *
 * A relation R over coordinates 0..n-1 is described by a witness function
 * ω(i,a): a tuple of R whose i-th entry is a (or nothing when a ∉ pr_i R),
 * such that values related by the frame equivalence ∼_i (they extend a
 * common prefix) get witnesses with a common prefix.  Closing the witnesses
 * under the Mal'tsev operation reproduces R, so every operation below works
 * on witness functions only.  The parity engine reduces the arity one step
 * at a time through the relations
 *
 *     PAR-R(x, y) = R(x, y) ∧ (mod 2 z. R(x, z))   and
 *     tilde-R(x)  = mod 2 y. PAR-R(x, y),
 *
 * each of which has the same number of tuples as R modulo 2.
 *
 * Coordinates are 0-based throughout.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "modcsp/core.hpp"
#include "modcsp/expansion.hpp"

namespace modcsp {

// ---------------------------------------------------------------------------
// Frames and witness functions
// ---------------------------------------------------------------------------

/// The equivalences ∼_i as lists of classes: classes[i] partitions pr_i R;
/// each class is ascending and classes are ordered by their least element.
struct FrameClasses {
    std::vector<std::vector<std::vector<Element>>> classes;
    friend bool operator==(const FrameClasses&, const FrameClasses&) = default;
};

/// ω : coordinates × elements → tuple of R or ⊥, with its frame classes.
struct WitnessFunction {
    std::vector<SortId> sorts;                              ///< sort of each coordinate
    std::vector<std::vector<std::optional<Tuple>>> table;   ///< table[i][a] = ω(i,a)
    FrameClasses frame;

    [[nodiscard]] std::size_t arity() const { return sorts.size(); }
    /// True iff the described relation is empty (ω is ⊥ everywhere).
    [[nodiscard]] bool empty() const;
    [[nodiscard]] const std::optional<Tuple>& operator()(std::size_t i, Element a) const { return table[i][a]; }
    /// Index of the ∼_i class containing `a`, if a ∈ pr_i R.
    [[nodiscard]] std::optional<std::size_t> class_of(std::size_t i, Element a) const;
    /// The frame F = {ω(i,a)}, sorted and duplicate free.
    [[nodiscard]] std::vector<Tuple> frame_tuples() const;

    friend bool operator==(const WitnessFunction&, const WitnessFunction&) = default;
};

/// The hypotheses of the parity engine: a structure with every constant
/// relation and a verified Mal'tsev polymorphism.  The prime is always 2.
/// Immutable after construction; safe to share between threads.
class ParityContext {
public:
    /// Verifies that `h` has all constants and that `phi` (or, when absent,
    /// the first Mal'tsev polymorphism found by search) satisfies the
    /// Mal'tsev identities and preserves every relation.  Throws
    /// PreconditionError naming the failing condition.
    explicit ParityContext(Structure h, std::optional<Operation> phi = std::nullopt);

    [[nodiscard]] const Structure& structure() const { return h_; }
    [[nodiscard]] const Operation& maltsev() const { return phi_; }
    [[nodiscard]] static constexpr std::uint64_t prime() { return 2; }

    /// φ applied coordinate-wise to three tuples over the given sorts.
    [[nodiscard]] Tuple apply(std::span<const SortId> sorts, const Tuple& x, const Tuple& y, const Tuple& z) const;
    [[nodiscard]] Element apply(SortId s, Element x, Element y, Element z) const;

private:
    Structure h_;
    Operation phi_;
};

// ---------------------------------------------------------------------------
// Observation and validation
// ---------------------------------------------------------------------------

/// Receives every witness function produced by the operations below.  The
/// default implementations ignore the events.
class FrameObserver {
public:
    virtual ~FrameObserver() = default;
    virtual void on_build(const Instance& /*p*/, const WitnessFunction& /*out*/) {}
    virtual void on_fix(const WitnessFunction& /*in*/, std::size_t /*coordinate*/, Element /*value*/,
                        const WitnessFunction& /*out*/) {}
    virtual void on_project(const WitnessFunction& /*in*/, const WitnessFunction& /*out*/) {}
    /// `par` describes PAR-R and `tilde` describes tilde-R for the R of `in`.
    virtual void on_derive(const WitnessFunction& /*in*/, const WitnessFunction& /*par*/,
                           const WitnessFunction& /*tilde*/) {}
};

/// Every violation of the witness-function conditions of `w` with respect to
/// the explicit relation `r` (tuples over the sorts of `w`): (i) ⊥ exactly
/// off pr_i R, (ii) witnesses lie in R with the right entry, (iii) related
/// values have witnesses with equal prefixes, the classes equal the
/// definitional ∼_i, and R is rectangular (every prefix extends into a
/// single class).
[[nodiscard]] std::vector<std::string> witness_violations(const WitnessFunction& w, std::span<const Tuple> r);

/// An observer that recomputes the relation of every event by brute force
/// and validates the produced witness function against it.  For derivations
/// it also evaluates PAR-R and tilde-R with the modular-quantifier evaluator
/// and checks |R| ≡ |PAR-R| ≡ |tilde-R| (mod 2).  In strict mode the first
/// violation throws PreconditionError.
class FrameValidator : public FrameObserver {
public:
    explicit FrameValidator(const ParityContext& ctx, bool strict = false) : ctx_(ctx), strict_(strict) {}

    void on_build(const Instance& p, const WitnessFunction& out) override;
    void on_fix(const WitnessFunction& in, std::size_t coordinate, Element value,
                const WitnessFunction& out) override;
    void on_project(const WitnessFunction& in, const WitnessFunction& out) override;
    void on_derive(const WitnessFunction& in, const WitnessFunction& par, const WitnessFunction& tilde) override;

    [[nodiscard]] std::size_t checks() const { return checks_; }
    [[nodiscard]] std::size_t parity_checks() const { return parity_checks_; }
    [[nodiscard]] std::size_t violation_count() const { return violations_.size(); }
    [[nodiscard]] const std::vector<std::string>& violations() const { return violations_; }

private:
    void check(std::string_view operation, const WitnessFunction& w, std::span<const Tuple> expected);
    std::optional<std::vector<Tuple>> relation_of(std::string_view operation, const WitnessFunction& w);
    void report(std::string message);

    const ParityContext& ctx_;
    bool strict_;
    std::size_t checks_{};
    std::size_t parity_checks_{};
    std::vector<std::string> violations_;
};

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

/// The witness function of the full product of the given sorts.
[[nodiscard]] WitnessFunction full_witness_function(const Structure& h, std::span<const SortId> sorts);

/// The witness function of the solution relation of the conjunctive instance
/// `p` (coordinates in variable order), built by intersecting with one
/// constraint at a time while keeping a frame closed under φ.
[[nodiscard]] WitnessFunction build_witness_function(const ParityContext& ctx, const Instance& p,
                                                     FrameObserver* observer = nullptr);

/// Reference construction from an explicit relation: ω(i,a) is the
/// lexicographically least tuple with entry a at i.  Throws
/// PreconditionError when the relation is not rectangular.
[[nodiscard]] WitnessFunction reference_witness_function(const Structure& h, std::span<const SortId> sorts,
                                                         std::vector<Tuple> tuples);
/// Reference construction by enumerating the solutions of `p`.
[[nodiscard]] WitnessFunction reference_witness_function(const Structure& h, const Instance& p);

/// Every tuple of the relation described by `w`, ascending, obtained by
/// extending prefixes through φ.  Guarded at 1,000,000 tuples.
[[nodiscard]] std::vector<Tuple> enumerate_relation(const ParityContext& ctx, const WitnessFunction& w);

/// The closure of the frame of `w` under φ (naive fixpoint; guarded at 2,000
/// tuples).  Equals the relation whenever `w` is a witness function of a
/// φ-closed relation.
[[nodiscard]] std::vector<Tuple> frame_closure(const ParityContext& ctx, const WitnessFunction& w);

// ---------------------------------------------------------------------------
// Frame operations
// ---------------------------------------------------------------------------

/// Witness function of R ∧ (x_s = a).
[[nodiscard]] WitnessFunction fix_coordinate(const ParityContext& ctx, const WitnessFunction& w, std::size_t s,
                                             Element a, FrameObserver* observer = nullptr);

/// Iterated fix_coordinate over `coordinates` (in the given order).
[[nodiscard]] WitnessFunction fix_coordinates(const ParityContext& ctx, const WitnessFunction& w,
                                              std::span<const std::size_t> coordinates,
                                              std::span<const Element> values, FrameObserver* observer = nullptr);

/// Witness function of ∃y R(x, y).  Throws PreconditionError for arity < 2.
[[nodiscard]] WitnessFunction project_last(const WitnessFunction& w, FrameObserver* observer = nullptr);

/// Decides a ∼'_k b for the frame equivalence of PAR-R, given x ∈ PAR-R with
/// x_k = a: fixes the coordinates before k to x and coordinate k to b and
/// looks for a last-coordinate class of odd size.  Returns a tuple of PAR-R
/// with prefix x_0..x_{k-1} and entry b at k, or nothing.
[[nodiscard]] std::optional<Tuple> check_epsilon_class(const ParityContext& ctx, const WitnessFunction& w,
                                                       const Tuple& x, Element a, Element b, std::size_t k,
                                                       FrameObserver* observer = nullptr);

/// The witness functions of PAR-R and of tilde-R.
struct TildeDerivation {
    WitnessFunction par;
    WitnessFunction tilde;
};

/// Derives PAR-R (odd last-coordinate classes, then class discovery per
/// coordinate through check_epsilon_class) and projects it to tilde-R.
/// Throws PreconditionError for arity < 2.
[[nodiscard]] TildeDerivation derive_tilde_witness(const ParityContext& ctx, const WitnessFunction& w,
                                                   FrameObserver* observer = nullptr);

/// |R| mod 2: returns 0 as soon as every last-coordinate class is even,
/// counts pr_0 R for unary R, and otherwise recurses on tilde-R.
[[nodiscard]] std::uint64_t calculate_size(const ParityContext& ctx, const WitnessFunction& w,
                                           FrameObserver* observer = nullptr);

/// The number of solutions of `p` modulo 2.  Strong 2-rectangularity and a
/// Mal'tsev polymorphism of the relations definable with modular
/// quantifiers are assumed, not checked (attach a FrameValidator to detect
/// violations).
[[nodiscard]] std::uint64_t parity_count(const ParityContext& ctx, const Instance& p,
                                         FrameObserver* observer = nullptr);

}  // namespace modcsp
