// SPDX-License-Identifier: Apache-2.0
/**
 * @file mpp.hpp
 * @brief Primitive-positive and modular primitive-positive formulas:
 *        evaluation, strictness and count-preserving instance rewriting.
 *
 * A formula is a prefix of quantifier blocks over a conjunction of atoms.
 * Blocks are listed outermost first; each is existential or modular (keep an
 * assignment iff the number of completions is nonzero modulo p).
 */
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "modcsp/core.hpp"
#include "modcsp/io.hpp"

namespace modcsp {

/// A formula variable; an empty sort on a bound variable means "infer it
/// from the atoms" (or the only sort of a single-sorted structure).
struct FormulaVariable {
    std::string name;
    std::string sort;
    friend bool operator==(const FormulaVariable&, const FormulaVariable&) = default;
};

enum class Quantifier { Exists, Modular };

struct QuantifierBlock {
    std::vector<FormulaVariable> vars;
    Quantifier mode{Quantifier::Exists};
    std::uint64_t p{};  ///< the prime of a modular block
    friend bool operator==(const QuantifierBlock&, const QuantifierBlock&) = default;
};

/// R(args...) or an equality when `relation` is kEquality.
struct FormulaAtom {
    std::string relation;
    std::vector<std::string> args;
    friend bool operator==(const FormulaAtom&, const FormulaAtom&) = default;
};

struct MppFormula {
    std::vector<FormulaVariable> free;
    std::vector<QuantifierBlock> blocks;  ///< outermost first
    std::vector<FormulaAtom> atoms;
    friend bool operator==(const MppFormula&, const MppFormula&) = default;
};

/// Convenience constructors.
[[nodiscard]] QuantifierBlock exists_block(std::vector<std::string> vars);
[[nodiscard]] QuantifierBlock modular_block(std::vector<std::string> vars, std::uint64_t p);

/// The formula with every variable sort resolved; throws PreconditionError
/// unless it sort-checks against `h`.
[[nodiscard]] MppFormula typecheck_formula(const Structure& h, const MppFormula& f);

/// The relation defined by `f` on its free variables (in declaration order).
/// Blocks are eliminated innermost first.  Guarded at 12 bound variables.
[[nodiscard]] Relation evaluate_formula(const Structure& h, const MppFormula& f, std::string name = "phi");

/// True iff every tuple of the defined relation has a number of completions
/// of the outermost block that is 1 modulo its prime.  A quantifier-free
/// formula is strict; an outermost existential block is a PreconditionError.
[[nodiscard]] bool is_strict(const Structure& h, const MppFormula& f);

/// Replaces every constraint on `relation` by the body of the strict
/// definition `f`, with fresh bound variables per occurrence.  `f` must be
/// quantifier free or a single modular block, must be strict, and must
/// define exactly the relation of `h_plus_r`.  For a modular block of prime
/// p the solution count is preserved modulo p; quantifier-free definitions
/// preserve it exactly.
[[nodiscard]] Instance mpp_expand_instance(const Instance& p, const Structure& h_plus_r, std::string_view relation,
                                           const MppFormula& f);

/// {"free": {var: sort}, "blocks": [{"vars": [...], "mode": "exists"|"mod",
/// "p": 2, "sorts": {var: sort}}], "atoms": [{"relation": name, "args": [...]}]}
[[nodiscard]] MppFormula formula_from_json(const Json& j);
[[nodiscard]] Json formula_to_json(const MppFormula& f);

/// Human-readable rendering, e.g. "mod2 z. exists y. R(x,y,z) & x = z".
[[nodiscard]] std::string formula_to_text(const MppFormula& f);

}  // namespace modcsp
