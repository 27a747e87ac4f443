// SPDX-License-Identifier: Apache-2.0
/**
 * @file io.cpp
 * @brief JSON reading and writing of structures and instances.
 */
#include "modcsp/io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace modcsp {

void require_fields(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view context) {
    if (!j.is_object()) throw PreconditionError(std::string(context) + ": expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw PreconditionError(std::string(context) + ": unknown field '" + key + "'");
        }
    }
}

std::string element_name_from_json(const Json& j) {
    if (j.is_string()) return j.get<std::string>();
    if (j.is_number_integer()) return std::to_string(j.get<long long>());
    if (j.is_number_unsigned()) return std::to_string(j.get<unsigned long long>());
    if (j.is_array()) {
        std::string s = "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i > 0) s += ',';
            s += element_name_from_json(j[i]);
        }
        return s + "]";
    }
    throw PreconditionError("element must be a string, an integer, or an array; got " + j.dump());
}

namespace {

const Json& require_member(const Json& j, const char* key, std::string_view context) {
    if (!j.contains(key)) throw PreconditionError(std::string(context) + ": missing field '" + key + "'");
    return j.at(key);
}

}  // namespace

Structure structure_from_json(const Json& j) {
    require_fields(j, {"sorts", "relations"}, "structure");
    StructureSpec spec;
    const auto& sorts = require_member(j, "sorts", "structure");
    if (!sorts.is_object()) throw PreconditionError("structure: 'sorts' must be an object");
    for (const auto& [name, elements] : sorts.items()) {
        if (!elements.is_array()) throw PreconditionError("structure: sort '" + name + "' must list its elements");
        std::vector<std::string> els;
        for (const auto& e : elements) els.push_back(element_name_from_json(e));
        spec.sorts.emplace_back(name, std::move(els));
    }
    if (j.contains("relations")) {
        const auto& rels = j.at("relations");
        if (!rels.is_object()) throw PreconditionError("structure: 'relations' must be an object");
        for (const auto& [name, body] : rels.items()) {
            const std::string ctx = "relation '" + name + "'";
            require_fields(body, {"signature", "tuples"}, ctx);
            RelationSpec r;
            r.name = name;
            for (const auto& s : require_member(body, "signature", ctx)) r.signature.push_back(s.get<std::string>());
            for (const auto& t : require_member(body, "tuples", ctx)) {
                if (!t.is_array()) throw PreconditionError(ctx + ": each tuple must be an array");
                std::vector<std::string> tuple;
                for (const auto& e : t) tuple.push_back(element_name_from_json(e));
                r.tuples.push_back(std::move(tuple));
            }
            spec.relations.push_back(std::move(r));
        }
    }
    return build_structure(spec);
}

Json structure_to_json(const Structure& h) {
    Json sorts = Json::object();
    for (const auto& s : h.sorts()) sorts[s.name] = s.elements;
    Json rels = Json::object();
    for (const auto& r : h.relations()) {
        Json sig = Json::array();
        for (const auto s : r.signature) sig.push_back(h.sort(s).name);
        Json tuples = Json::array();
        for (const auto& t : r.tuples) {
            Json tj = Json::array();
            for (std::size_t k = 0; k < t.size(); ++k) tj.push_back(h.element_name(r.signature[k], t[k]));
            tuples.push_back(std::move(tj));
        }
        rels[r.name] = Json{{"signature", std::move(sig)}, {"tuples", std::move(tuples)}};
    }
    return Json{{"sorts", std::move(sorts)}, {"relations", std::move(rels)}};
}

Instance instance_from_json(const Json& j) {
    require_fields(j, {"variables", "constraints"}, "instance");
    Instance p;
    const auto& vars = require_member(j, "variables", "instance");
    if (!vars.is_object()) throw PreconditionError("instance: 'variables' must be an object");
    for (const auto& [name, sort] : vars.items()) p.add_variable(name, sort.get<std::string>());
    if (j.contains("constraints")) {
        for (const auto& c : j.at("constraints")) {
            require_fields(c, {"scope", "relation"}, "constraint");
            std::vector<std::size_t> scope;
            for (const auto& v : require_member(c, "scope", "constraint")) scope.push_back(p.variable(v.get<std::string>()));
            p.add_constraint(std::move(scope), require_member(c, "relation", "constraint").get<std::string>());
        }
    }
    return p;
}

Json instance_to_json(const Instance& p) {
    Json vars = Json::object();
    for (const auto& v : p.variables()) vars[v.name] = v.sort;
    Json cons = Json::array();
    for (const auto& c : p.constraints()) {
        Json scope = Json::array();
        for (const auto v : c.scope) scope.push_back(p.variables()[v].name);
        cons.push_back(Json{{"scope", std::move(scope)}, {"relation", c.relation}});
    }
    return Json{{"variables", std::move(vars)}, {"constraints", std::move(cons)}};
}

Json parse_json(const std::string& text) {
    try {
        return Json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw PreconditionError(std::string("malformed JSON at byte ") + std::to_string(e.byte) + ": " + e.what());
    }
}

Json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw PreconditionError("cannot open '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    try {
        return parse_json(ss.str());
    } catch (const PreconditionError& e) {
        throw PreconditionError(path.string() + ": " + e.what());
    }
}

}  // namespace modcsp
