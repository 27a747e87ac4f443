// SPDX-License-Identifier: Apache-2.0
/**
 * @file fixtures.hpp
 * @brief Named reference structures shared by tests, the regression suite
 *        and the command-line tool.
 *
 * Every single-sorted fixture uses one sort called "H" (or "T" for the T_p
 * family) and the constant naming convention of `constant_name`.
 */
#pragma once

#include <cstdint>

#include "modcsp/core.hpp"

namespace modcsp::fixtures {

/// T_p: universe {0..p+1}, R = T² minus {(i,p) : i < p}, with every constant
/// unless `constants` is false.
[[nodiscard]] Structure t_p(std::uint64_t p, bool constants = true);

/// Universe {0,1,2} with R = {(1,0,0),(1,1,0),(1,1,1),(2,2,2)}; grouped and
/// split modular quantification disagree on it.
[[nodiscard]] Structure quantifier_order();

/// Universe {0..4} with R = {(0,0,0),(0,1,1),(1,0,2),(1,0,3),(1,1,4)}: has a
/// Mal'tsev polymorphism but its mod-2 projection is not rectangular.
[[nodiscard]] Structure maltsev_not_2_rectangular(bool constants);

/// Seven elements a1..a7, two equivalence relations R and Q, all constants:
/// strongly 2-rectangular but not congruence 2-permutable.
[[nodiscard]] Structure rectangular_not_permutable();

/// Six elements a1..a6, two equivalence relations R and Q, all constants:
/// congruence 2-permutable but without a Mal'tsev polymorphism.
[[nodiscard]] Structure permutable_not_maltsev();

/// The rigid digraph a,b,c,d with edges (b,a),(b,c),(c,d).
[[nodiscard]] Structure rigid_digraph();

/// Affine structure over Z_m with constants: "Eq0"/"Eq1" (x = y + k for the
/// listed shifts), "Sum" (x + y + z = 0) and, for m = 2, "Sum1"
/// (x + y + z = 1).  Mal'tsev polymorphism: x - y + z.
[[nodiscard]] Structure affine(std::uint32_t m);

/// The non-strict linear order on {0,1,2}: rigid, with ten endomorphisms.
[[nodiscard]] Structure chain_order();

/// The Mal'tsev operation x - y + z of `affine(m)` as a table indexed by
/// (x*m + y)*m + z.
[[nodiscard]] std::vector<Element> affine_maltsev(std::uint32_t m);

}  // namespace modcsp::fixtures
