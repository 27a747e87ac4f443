// SPDX-License-Identifier: Apache-2.0
/**
 * @file io.hpp
 * @brief JSON interchange for structures and instances.
 *
 * Structure: {"sorts": {name: [elements]},
 *             "relations": {name: {"signature": [sorts], "tuples": [[e,...]]}}}
 * Instance:  {"variables": {name: sort},
 *             "constraints": [{"scope": [vars], "relation": name}]}
 *
 * Elements may be written as strings, integers, or arrays; integers become
 * their decimal text and arrays the text "[a,b,...]".  Unknown fields are
 * rejected with PreconditionError.
 */
#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "modcsp/core.hpp"

namespace modcsp {

using Json = nlohmann::ordered_json;

[[nodiscard]] Structure structure_from_json(const Json& j);
[[nodiscard]] Json structure_to_json(const Structure& h);
[[nodiscard]] Instance instance_from_json(const Json& j);
[[nodiscard]] Json instance_to_json(const Instance& p);

/// Reads and parses a JSON file; parse errors carry the byte offset.
[[nodiscard]] Json read_json_file(const std::filesystem::path& path);
[[nodiscard]] Json parse_json(const std::string& text);

/// Normalizes a JSON scalar or array to an element name.
[[nodiscard]] std::string element_name_from_json(const Json& j);

/// Throws PreconditionError if `j` is not an object or has keys outside
/// `allowed`.
void require_fields(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view context);

}  // namespace modcsp
