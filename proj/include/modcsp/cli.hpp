// SPDX-License-Identifier: Apache-2.0
/**
 * @file cli.hpp
 * @brief The `modcsp` command-line front end: subcommand dispatch, input
 *        loading and the versioned JSON report.
 *
 * Subcommands: count, reduce, analyze, eval-formula, parity, refine,
 * gadget-scan, binarize, regress.  Structures may be given as JSON files or
 * as `fixture:<name>` for a bundled fixture.
 */
#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "modcsp/core.hpp"
#include "modcsp/io.hpp"

namespace modcsp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPrecondition = 1;  ///< invalid input or violated precondition
inline constexpr int kExitMismatch = 2;      ///< a cross-check against the oracle failed
inline constexpr int kExitUsage = 64;        ///< unknown subcommand or malformed arguments

/// Version tag of the report layout emitted with `--json`.
inline constexpr std::string_view kReportSchema = "modcsp-report/1";

/// Names accepted after `fixture:`.
[[nodiscard]] std::vector<std::string> fixture_names();
/// The bundled fixture of that name; throws PreconditionError if unknown.
[[nodiscard]] Structure bundled_fixture(std::string_view name);

/// 64-bit FNV-1a digest of a byte string, as 16 hex digits.
[[nodiscard]] std::string fnv1a64(std::string_view bytes);

/// Runs one invocation; `args` excludes the program name.  Human-readable
/// text (or the JSON report) goes to `out`, diagnostics to `err`.
[[nodiscard]] int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace modcsp::cli
