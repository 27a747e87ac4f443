// SPDX-License-Identifier: Apache-2.0
/**
 * @file regression.hpp
 * @brief The fixed-value regression suite behind `modcsp regress`.
 *
 * Every check recomputes a known value on one of the bundled fixtures and
 * compares it with the frozen expectation.  The fixtures are passed in so
 * that tests can mutate them and observe a named failure.
 */
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "modcsp/core.hpp"

namespace modcsp {

/// The structures the suite runs on.
struct RegressionFixtures {
    Structure quantifier_order;           ///< grouped vs. split modular quantifiers
    Structure t2;                         ///< T_2 with constants
    Structure t3;                         ///< T_3 with constants
    Structure maltsev_example;            ///< Mal'tsev, not strongly 2-rectangular
    Structure maltsev_example_constants;  ///< the same with every constant
    Structure rect_not_perm;              ///< strongly 2-rectangular, not 2-permutable
    Structure perm_not_maltsev;           ///< 2-permutable, no Mal'tsev polymorphism
    Structure rigid_digraph;              ///< rigid digraph whose square is not 2-rigid

    [[nodiscard]] static RegressionFixtures standard();
};

struct RegressionCheck {
    std::string fixture;  ///< which fixture the check runs on
    std::string name;     ///< what is checked
    bool passed{};
    std::string detail;   ///< the divergent value on failure, empty otherwise
    double seconds{};
};

struct RegressionSummary {
    std::vector<RegressionCheck> checks;
    double seconds{};

    [[nodiscard]] std::size_t failures() const;
    [[nodiscard]] bool passed() const { return failures() == 0; }
};

/// Runs every check; exceptions inside a check count as its failure.  The
/// seed drives the randomized cross-checks against the brute-force oracle.
[[nodiscard]] RegressionSummary run_regression_suite(const RegressionFixtures& fixtures = RegressionFixtures::standard(),
                                                     std::uint64_t seed = 20240601);

}  // namespace modcsp
