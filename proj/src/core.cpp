// SPDX-License-Identifier: Apache-2.0
/**
 * @file core.cpp
 * @brief Structures, instances, products, factors and isomorphism search.
 */
#include "modcsp/core.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <map>
#include <numeric>
#include <set>

namespace modcsp {

// ---------------------------------------------------------------------------
// Guards
// ---------------------------------------------------------------------------

std::size_t size_guard(std::size_t default_limit) {
    if (const char* env = std::getenv("MODCSP_GUARD")) {
        char* end = nullptr;
        const unsigned long long v = std::strtoull(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
    }
    return default_limit;
}

void enforce_guard(std::string_view what, std::size_t value, std::size_t limit) {
    const std::size_t effective = size_guard(limit);
    if (value > effective) {
        throw GuardError("size guard exceeded: " + std::string(what) + " = " + std::to_string(value) +
                         " > " + std::to_string(effective) + " (override with MODCSP_GUARD)");
    }
}

// ---------------------------------------------------------------------------
// Names and relations
// ---------------------------------------------------------------------------

bool natural_less(std::string_view a, std::string_view b) {
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() && j < b.size()) {
        const bool da = std::isdigit(static_cast<unsigned char>(a[i])) != 0;
        const bool db = std::isdigit(static_cast<unsigned char>(b[j])) != 0;
        if (da && db) {
            std::size_t ie = i;
            std::size_t je = j;
            while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
            while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
            // Compare digit runs numerically: strip leading zeros, then by
            // length, then lexicographically.
            std::size_t is = i;
            std::size_t js = j;
            while (is + 1 < ie && a[is] == '0') ++is;
            while (js + 1 < je && b[js] == '0') ++js;
            const auto ra = a.substr(is, ie - is);
            const auto rb = b.substr(js, je - js);
            if (ra.size() != rb.size()) return ra.size() < rb.size();
            if (ra != rb) return ra < rb;
            if ((ie - i) != (je - j)) return (ie - i) < (je - j);
            i = ie;
            j = je;
        } else {
            if (a[i] != b[j]) return a[i] < b[j];
            ++i;
            ++j;
        }
    }
    if ((a.size() - i) != (b.size() - j)) return (a.size() - i) < (b.size() - j);
    return false;
}

bool Relation::contains(std::span<const Element> t) const {
    return std::binary_search(tuples.begin(), tuples.end(), t, [](const auto& x, const auto& y) {
        return std::lexicographical_compare(x.begin(), x.end(), y.begin(), y.end());
    });
}

void canonicalize(std::vector<Tuple>& tuples) {
    std::sort(tuples.begin(), tuples.end());
    tuples.erase(std::unique(tuples.begin(), tuples.end()), tuples.end());
}

// ---------------------------------------------------------------------------
// Structure
// ---------------------------------------------------------------------------

SortId Structure::add_sort(std::string name, std::vector<std::string> elements) {
    if (find_sort(name)) throw PreconditionError("duplicate sort '" + name + "'");
    std::set<std::string_view> seen;
    for (const auto& e : elements) {
        if (!seen.insert(e).second) {
            throw PreconditionError("duplicate element '" + e + "' in sort '" + name + "'");
        }
    }
    sorts_.push_back(Sort{std::move(name), std::move(elements)});
    return SortId{sorts_.size() - 1};
}

void Structure::add_relation(std::string name, std::vector<SortId> signature,
                             std::vector<Tuple> tuples, bool replace) {
    if (name.empty() || name == kEquality) throw PreconditionError("invalid relation name '" + name + "'");
    if (signature.empty()) throw PreconditionError("relation '" + name + "' has an empty signature");
    for (const auto s : signature) {
        if (s.value >= sorts_.size()) throw PreconditionError("relation '" + name + "' uses an unknown sort");
    }
    for (const auto& t : tuples) {
        if (t.size() != signature.size()) {
            throw PreconditionError("relation '" + name + "': tuple arity does not match signature");
        }
        for (std::size_t j = 0; j < t.size(); ++j) {
            if (t[j] >= sorts_[signature[j].value].elements.size()) {
                throw PreconditionError("relation '" + name + "': element index out of range");
            }
        }
    }
    canonicalize(tuples);
    auto it = std::lower_bound(relations_.begin(), relations_.end(), name,
                               [](const Relation& r, const std::string& n) { return r.name < n; });
    if (it != relations_.end() && it->name == name) {
        if (!replace) throw PreconditionError("duplicate relation '" + name + "'");
        it->signature = std::move(signature);
        it->tuples = std::move(tuples);
        return;
    }
    relations_.insert(it, Relation{std::move(name), std::move(signature), std::move(tuples)});
}

void Structure::remove_relation(std::string_view name) {
    std::erase_if(relations_, [&](const Relation& r) { return r.name == name; });
}

std::size_t Structure::universe_size() const {
    std::size_t n = 0;
    for (const auto& s : sorts_) n += s.elements.size();
    return n;
}

std::optional<SortId> Structure::find_sort(std::string_view name) const {
    for (std::size_t i = 0; i < sorts_.size(); ++i) {
        if (sorts_[i].name == name) return SortId{i};
    }
    return std::nullopt;
}

SortId Structure::sort_id(std::string_view name) const {
    if (auto s = find_sort(name)) return *s;
    throw PreconditionError("unknown sort '" + std::string(name) + "'");
}

const Relation* Structure::find_relation(std::string_view name) const {
    auto it = std::lower_bound(relations_.begin(), relations_.end(), name,
                               [](const Relation& r, std::string_view n) { return r.name < n; });
    if (it != relations_.end() && it->name == name) return &*it;
    return nullptr;
}

const Relation& Structure::relation(std::string_view name) const {
    if (const auto* r = find_relation(name)) return *r;
    throw PreconditionError("unknown relation '" + std::string(name) + "'");
}

std::optional<Element> Structure::find_element(SortId s, std::string_view name) const {
    const auto& els = sorts_.at(s.value).elements;
    for (std::size_t i = 0; i < els.size(); ++i) {
        if (els[i] == name) return static_cast<Element>(i);
    }
    return std::nullopt;
}

Element Structure::element(SortId s, std::string_view name) const {
    if (auto e = find_element(s, name)) return *e;
    throw PreconditionError("unknown element '" + std::string(name) + "' in sort '" + sorts_.at(s.value).name +
                            "'");
}

const std::string& Structure::element_name(SortId s, Element e) const { return sorts_.at(s.value).elements.at(e); }

// ---------------------------------------------------------------------------
// Validation and name-level conversion
// ---------------------------------------------------------------------------

std::vector<Violation> validate_structure(const StructureSpec& spec) {
    std::vector<Violation> out;
    std::map<std::string, std::set<std::string>> sorts;
    for (const auto& [name, elements] : spec.sorts) {
        if (sorts.contains(name)) {
            out.push_back({Violation::Kind::DuplicateSort, "", std::nullopt, "duplicate sort '" + name + "'"});
            continue;
        }
        auto& set = sorts[name];
        for (const auto& e : elements) {
            if (!set.insert(e).second) {
                out.push_back({Violation::Kind::DuplicateElement, "", std::nullopt,
                               "duplicate element '" + e + "' in sort '" + name + "'"});
            }
        }
    }
    std::set<std::string> relation_names;
    for (const auto& r : spec.relations) {
        if (!relation_names.insert(r.name).second) {
            out.push_back({Violation::Kind::DuplicateRelation, r.name, std::nullopt,
                           "duplicate relation '" + r.name + "'"});
        }
        if (r.signature.empty()) {
            out.push_back({Violation::Kind::EmptySignature, r.name, std::nullopt,
                           "relation '" + r.name + "' has an empty signature"});
        }
        bool signature_ok = true;
        for (const auto& s : r.signature) {
            if (!sorts.contains(s)) {
                signature_ok = false;
                out.push_back({Violation::Kind::UnknownSort, r.name, std::nullopt,
                               "relation '" + r.name + "' uses unknown sort '" + s + "'"});
            }
        }
        std::set<std::vector<std::string>> seen;
        for (std::size_t i = 0; i < r.tuples.size(); ++i) {
            const auto& t = r.tuples[i];
            if (t.size() != r.signature.size()) {
                out.push_back({Violation::Kind::ArityMismatch, r.name, i,
                               "relation '" + r.name + "' tuple " + std::to_string(i) + " has arity " +
                                   std::to_string(t.size()) + ", expected " + std::to_string(r.signature.size())});
                continue;
            }
            if (signature_ok) {
                for (std::size_t j = 0; j < t.size(); ++j) {
                    if (!sorts[r.signature[j]].contains(t[j])) {
                        out.push_back({Violation::Kind::UnknownElement, r.name, i,
                                       "relation '" + r.name + "' tuple " + std::to_string(i) + " uses element '" +
                                           t[j] + "' absent from sort '" + r.signature[j] + "'"});
                    }
                }
            }
            if (!seen.insert(t).second) {
                out.push_back({Violation::Kind::DuplicateTuple, r.name, i,
                               "relation '" + r.name + "' repeats tuple " + std::to_string(i)});
            }
        }
    }
    return out;
}

std::vector<Violation> validate_structure(const Structure& h) {
    // A Structure enforces its invariants on construction; re-check them so
    // that the function is meaningful for values built by other means.
    std::vector<Violation> out;
    for (const auto& r : h.relations()) {
        for (std::size_t i = 0; i < r.tuples.size(); ++i) {
            const auto& t = r.tuples[i];
            if (t.size() != r.arity()) {
                out.push_back({Violation::Kind::ArityMismatch, r.name, i, "tuple arity mismatch"});
                continue;
            }
            for (std::size_t j = 0; j < t.size(); ++j) {
                if (r.signature[j].value >= h.sort_count() || t[j] >= h.sort_size(r.signature[j])) {
                    out.push_back({Violation::Kind::UnknownElement, r.name, i, "element out of range"});
                }
            }
            if (i > 0 && !(r.tuples[i - 1] < t)) {
                out.push_back({Violation::Kind::DuplicateTuple, r.name, i, "tuples not canonical"});
            }
        }
    }
    return out;
}

Structure build_structure(const StructureSpec& spec) {
    const auto violations = validate_structure(spec);
    if (!violations.empty()) {
        std::string msg = "invalid structure:";
        for (const auto& v : violations) msg += "\n  " + v.message;
        throw PreconditionError(msg);
    }
    Structure h;
    for (const auto& [name, elements] : spec.sorts) {
        auto sorted = elements;
        std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return natural_less(a, b); });
        h.add_sort(name, std::move(sorted));
    }
    for (const auto& r : spec.relations) {
        std::vector<SortId> sig;
        for (const auto& s : r.signature) sig.push_back(h.sort_id(s));
        std::vector<Tuple> tuples;
        tuples.reserve(r.tuples.size());
        for (const auto& t : r.tuples) {
            Tuple u(t.size());
            for (std::size_t j = 0; j < t.size(); ++j) u[j] = h.element(sig[j], t[j]);
            tuples.push_back(std::move(u));
        }
        h.add_relation(r.name, std::move(sig), std::move(tuples));
    }
    return h;
}

StructureSpec to_spec(const Structure& h) {
    StructureSpec spec;
    for (const auto& s : h.sorts()) spec.sorts.emplace_back(s.name, s.elements);
    for (const auto& r : h.relations()) {
        RelationSpec rs;
        rs.name = r.name;
        for (const auto s : r.signature) rs.signature.push_back(h.sort(s).name);
        for (const auto& t : r.tuples) {
            std::vector<std::string> names;
            for (std::size_t j = 0; j < t.size(); ++j) names.push_back(h.element_name(r.signature[j], t[j]));
            rs.tuples.push_back(std::move(names));
        }
        spec.relations.push_back(std::move(rs));
    }
    return spec;
}

// ---------------------------------------------------------------------------
// Instances
// ---------------------------------------------------------------------------

std::size_t Instance::add_variable(std::string name, std::string sort) {
    if (find_variable(name)) throw PreconditionError("duplicate variable '" + name + "'");
    vars_.push_back(Variable{std::move(name), std::move(sort)});
    return vars_.size() - 1;
}

void Instance::add_constraint(std::vector<std::size_t> scope, std::string relation) {
    for (const auto v : scope) {
        if (v >= vars_.size()) throw PreconditionError("constraint scope refers to an unknown variable");
    }
    cons_.push_back(Constraint{std::move(scope), std::move(relation)});
}

std::optional<std::size_t> Instance::find_variable(std::string_view name) const {
    for (std::size_t i = 0; i < vars_.size(); ++i) {
        if (vars_[i].name == name) return i;
    }
    return std::nullopt;
}

std::size_t Instance::variable(std::string_view name) const {
    if (auto v = find_variable(name)) return *v;
    throw PreconditionError("unknown variable '" + std::string(name) + "'");
}

std::vector<std::string> validate_instance(const Instance& p, const Structure& h) {
    std::vector<std::string> out;
    std::vector<std::optional<SortId>> sorts;
    for (const auto& v : p.variables()) {
        sorts.push_back(h.find_sort(v.sort));
        if (!sorts.back()) out.push_back("variable '" + v.name + "' has unknown sort '" + v.sort + "'");
    }
    for (std::size_t c = 0; c < p.constraints().size(); ++c) {
        const auto& con = p.constraints()[c];
        const std::string where = "constraint " + std::to_string(c) + " (" + con.relation + ")";
        if (con.relation == kEquality) {
            if (con.scope.size() != 2) {
                out.push_back(where + ": equality must be binary");
            } else if (sorts[con.scope[0]] && sorts[con.scope[1]] && *sorts[con.scope[0]] != *sorts[con.scope[1]]) {
                out.push_back(where + ": equality between different sorts");
            }
            continue;
        }
        const auto* r = h.find_relation(con.relation);
        if (r == nullptr) {
            out.push_back(where + ": unknown relation");
            continue;
        }
        if (r->arity() != con.scope.size()) {
            out.push_back(where + ": scope length " + std::to_string(con.scope.size()) + " differs from arity " +
                          std::to_string(r->arity()));
            continue;
        }
        for (std::size_t j = 0; j < con.scope.size(); ++j) {
            const auto& s = sorts[con.scope[j]];
            if (s && *s != r->signature[j]) {
                out.push_back(where + ": variable '" + p.variables()[con.scope[j]].name + "' has the wrong sort");
            }
        }
    }
    return out;
}

void require_valid(const Instance& p, const Structure& h) {
    const auto problems = validate_instance(p, h);
    if (problems.empty()) return;
    std::string msg = "invalid instance:";
    for (const auto& s : problems) msg += "\n  " + s;
    throw PreconditionError(msg);
}

std::vector<SortId> variable_sorts(const Instance& p, const Structure& h) {
    std::vector<SortId> out;
    out.reserve(p.variable_count());
    for (const auto& v : p.variables()) out.push_back(h.sort_id(v.sort));
    return out;
}

// ---------------------------------------------------------------------------
// Mappings
// ---------------------------------------------------------------------------

Mapping identity_mapping(const Structure& h) {
    Mapping m;
    for (const auto& s : h.sorts()) {
        std::vector<Element> c(s.elements.size());
        std::iota(c.begin(), c.end(), Element{0});
        m.components.push_back(std::move(c));
    }
    return m;
}

Mapping compose(const Mapping& outer, const Mapping& inner) {
    Mapping m;
    for (std::size_t s = 0; s < inner.components.size(); ++s) {
        std::vector<Element> c;
        for (const auto e : inner.components[s]) c.push_back(outer.components.at(s).at(e));
        m.components.push_back(std::move(c));
    }
    return m;
}

Mapping inverse(const Mapping& bijection) {
    Mapping m;
    for (const auto& comp : bijection.components) {
        std::vector<Element> c(comp.size());
        for (std::size_t i = 0; i < comp.size(); ++i) c.at(comp[i]) = static_cast<Element>(i);
        m.components.push_back(std::move(c));
    }
    return m;
}

bool similar(const Structure& g, const Structure& h) {
    if (g.sort_count() != h.sort_count()) return false;
    for (std::size_t i = 0; i < g.sort_count(); ++i) {
        if (g.sorts()[i].name != h.sorts()[i].name) return false;
    }
    if (g.relations().size() != h.relations().size()) return false;
    for (std::size_t i = 0; i < g.relations().size(); ++i) {
        if (g.relations()[i].name != h.relations()[i].name) return false;
        if (g.relations()[i].signature != h.relations()[i].signature) return false;
    }
    return true;
}

void require_similar(const Structure& g, const Structure& h) {
    if (!similar(g, h)) throw PreconditionError("structures are not similar (signature mismatch)");
}

bool is_homomorphism(const Mapping& phi, const Structure& g, const Structure& h) {
    require_similar(g, h);
    if (phi.components.size() != g.sort_count()) throw PreconditionError("mapping has the wrong number of sorts");
    for (std::size_t s = 0; s < g.sort_count(); ++s) {
        if (phi.components[s].size() != g.sort_size(SortId{s})) {
            throw PreconditionError("mapping component does not cover its sort");
        }
        for (const auto e : phi.components[s]) {
            if (e >= h.sort_size(SortId{s})) throw PreconditionError("mapping leaves its target sort");
        }
    }
    Tuple image;
    for (std::size_t r = 0; r < g.relations().size(); ++r) {
        const auto& rg = g.relations()[r];
        const auto& rh = h.relations()[r];
        for (const auto& t : rg.tuples) {
            image.resize(t.size());
            for (std::size_t j = 0; j < t.size(); ++j) image[j] = phi(rg.signature[j], t[j]);
            if (!rh.contains(image)) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Products and friends
// ---------------------------------------------------------------------------

namespace {

std::string join_names(const std::vector<std::string>& parts, char open, char close) {
    std::string s(1, open);
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) s += ',';
        s += parts[i];
    }
    s += close;
    return s;
}

}  // namespace

Structure direct_product(const Structure& h, const Structure& g) {
    require_similar(h, g);
    Structure out;
    for (std::size_t s = 0; s < h.sort_count(); ++s) {
        std::vector<std::string> names;
        for (const auto& a : h.sorts()[s].elements) {
            for (const auto& b : g.sorts()[s].elements) names.push_back(join_names({a, b}, '(', ')'));
        }
        out.add_sort(h.sorts()[s].name, std::move(names));
    }
    for (std::size_t r = 0; r < h.relations().size(); ++r) {
        const auto& rh = h.relations()[r];
        const auto& rg = g.relations()[r];
        std::vector<Tuple> tuples;
        tuples.reserve(rh.size() * rg.size());
        for (const auto& t : rh.tuples) {
            for (const auto& u : rg.tuples) {
                Tuple v(t.size());
                for (std::size_t j = 0; j < t.size(); ++j) {
                    v[j] = static_cast<Element>(t[j] * g.sort_size(rh.signature[j]) + u[j]);
                }
                tuples.push_back(std::move(v));
            }
        }
        out.add_relation(rh.name, rh.signature, std::move(tuples));
    }
    return out;
}

Structure power(const Structure& h, std::size_t ell) {
    if (ell == 0) throw PreconditionError("power: exponent must be positive");
    if (ell == 1) return h;
    std::size_t total = 1;
    for (std::size_t s = 0; s < h.sort_count(); ++s) {
        std::size_t size = 1;
        for (std::size_t k = 0; k < ell; ++k) size *= h.sort_size(SortId{s});
        total += size;
    }
    enforce_guard("power universe size", total, 1'000'000);

    Structure out;
    for (std::size_t s = 0; s < h.sort_count(); ++s) {
        const auto& els = h.sorts()[s].elements;
        std::vector<std::string> names;
        std::vector<std::size_t> digits(ell, 0);
        const std::size_t m = els.size();
        if (m > 0) {
            while (true) {
                std::vector<std::string> parts;
                for (const auto d : digits) parts.push_back(els[d]);
                names.push_back(join_names(parts, '(', ')'));
                std::size_t k = ell;
                while (k > 0 && ++digits[k - 1] == m) digits[--k] = 0;
                if (k == 0) break;
            }
        }
        out.add_sort(h.sorts()[s].name, std::move(names));
    }
    for (const auto& r : h.relations()) {
        std::vector<Tuple> tuples;
        std::vector<std::size_t> pick(ell, 0);
        if (!r.tuples.empty()) {
            while (true) {
                Tuple v(r.arity(), 0);
                for (std::size_t j = 0; j < r.arity(); ++j) {
                    std::size_t code = 0;
                    for (std::size_t k = 0; k < ell; ++k) {
                        code = code * h.sort_size(r.signature[j]) + r.tuples[pick[k]][j];
                    }
                    v[j] = static_cast<Element>(code);
                }
                tuples.push_back(std::move(v));
                std::size_t k = ell;
                while (k > 0 && ++pick[k - 1] == r.tuples.size()) pick[--k] = 0;
                if (k == 0) break;
            }
        }
        out.add_relation(r.name, r.signature, std::move(tuples));
    }
    return out;
}

Structure unit_structure_like(const Structure& h) {
    Structure out;
    for (const auto& s : h.sorts()) out.add_sort(s.name, {"*"});
    for (const auto& r : h.relations()) out.add_relation(r.name, r.signature, {Tuple(r.arity(), 0)});
    return out;
}

Structure induced_substructure(const Structure& h, const std::vector<std::vector<Element>>& subsets) {
    if (subsets.size() != h.sort_count()) throw PreconditionError("induced_substructure: one subset per sort required");
    Structure out;
    std::vector<std::vector<std::optional<Element>>> remap(h.sort_count());
    for (std::size_t s = 0; s < h.sort_count(); ++s) {
        auto subset = subsets[s];
        std::sort(subset.begin(), subset.end());
        subset.erase(std::unique(subset.begin(), subset.end()), subset.end());
        remap[s].assign(h.sort_size(SortId{s}), std::nullopt);
        std::vector<std::string> names;
        for (const auto e : subset) {
            if (e >= h.sort_size(SortId{s})) throw PreconditionError("induced_substructure: element outside sort");
            remap[s][e] = static_cast<Element>(names.size());
            names.push_back(h.element_name(SortId{s}, e));
        }
        out.add_sort(h.sorts()[s].name, std::move(names));
    }
    for (const auto& r : h.relations()) {
        std::vector<Tuple> tuples;
        for (const auto& t : r.tuples) {
            Tuple v(t.size());
            bool keep = true;
            for (std::size_t j = 0; j < t.size() && keep; ++j) {
                const auto& m = remap[r.signature[j].value][t[j]];
                if (!m) keep = false;
                else v[j] = *m;
            }
            if (keep) tuples.push_back(std::move(v));
        }
        out.add_relation(r.name, r.signature, std::move(tuples));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Partitions and factor structures
// ---------------------------------------------------------------------------

namespace {

std::vector<std::uint32_t> canonical_labels(const std::vector<std::uint32_t>& labels) {
    std::map<std::uint32_t, std::uint32_t> relabel;
    std::vector<std::uint32_t> out;
    out.reserve(labels.size());
    for (const auto l : labels) {
        auto [it, inserted] = relabel.emplace(l, static_cast<std::uint32_t>(relabel.size()));
        out.push_back(it->second);
    }
    return out;
}

}  // namespace

Partition discrete_partition(const Structure& h) {
    Partition p;
    for (const auto& s : h.sorts()) {
        std::vector<std::uint32_t> b(s.elements.size());
        std::iota(b.begin(), b.end(), 0U);
        p.blocks.push_back(std::move(b));
    }
    return p;
}

void for_each_set_partition(std::size_t n, const std::function<bool(const std::vector<std::uint32_t>&)>& visit) {
    std::vector<std::uint32_t> labels(n, 0);
    while (true) {
        if (!visit(labels)) return;
        // Rightmost position whose label may grow: labels[i] <= max(labels[0..i-1]).
        std::size_t i = n;
        std::vector<std::uint32_t> pm(n, 0);
        for (std::size_t k = 1; k < n; ++k) pm[k] = std::max(pm[k - 1], labels[k - 1]);
        while (i > 1 && labels[i - 1] > pm[i - 1]) --i;
        if (i <= 1) return;
        --i;
        ++labels[i];
        for (std::size_t k = i + 1; k < n; ++k) labels[k] = 0;
    }
}

void for_each_partition(const Structure& h, const std::function<bool(const Partition&)>& visit) {
    const std::size_t k = h.sort_count();
    std::vector<std::vector<std::vector<std::uint32_t>>> per_sort(k);
    for (std::size_t s = 0; s < k; ++s) {
        for_each_set_partition(h.sort_size(SortId{s}), [&](const std::vector<std::uint32_t>& l) {
            per_sort[s].push_back(l);
            return true;
        });
    }
    std::vector<std::size_t> pick(k, 0);
    Partition theta;
    theta.blocks.resize(k);
    while (true) {
        for (std::size_t s = 0; s < k; ++s) theta.blocks[s] = per_sort[s][pick[s]];
        if (!visit(theta)) return;
        std::size_t s = k;
        while (s > 0 && ++pick[s - 1] == per_sort[s - 1].size()) pick[--s] = 0;
        if (s == 0) return;
    }
}

bool is_discrete(const Partition& theta) {
    for (const auto& b : theta.blocks) {
        for (std::size_t i = 0; i < b.size(); ++i) {
            if (b[i] != i) return false;
        }
    }
    return true;
}

Partition kernel(const Mapping& phi, const Structure& h) {
    Partition p;
    for (std::size_t s = 0; s < h.sort_count(); ++s) {
        std::vector<std::uint32_t> labels(phi.components.at(s).begin(), phi.components.at(s).end());
        p.blocks.push_back(canonical_labels(labels));
    }
    return p;
}

std::size_t block_count(const Partition& theta, std::size_t s) {
    const auto& b = theta.blocks.at(s);
    if (b.empty()) return 0;
    return static_cast<std::size_t>(*std::max_element(b.begin(), b.end())) + 1;
}

Partition partition_from_blocks(const Structure& h,
                                const std::vector<std::vector<std::vector<std::string>>>& blocks) {
    if (blocks.size() != h.sort_count()) throw PreconditionError("partition: one block list per sort required");
    Partition p;
    for (std::size_t s = 0; s < h.sort_count(); ++s) {
        std::vector<std::optional<std::uint32_t>> label(h.sort_size(SortId{s}));
        for (std::size_t b = 0; b < blocks[s].size(); ++b) {
            for (const auto& name : blocks[s][b]) {
                const auto e = h.element(SortId{s}, name);
                if (label[e]) throw PreconditionError("partition: element '" + name + "' occurs in two blocks");
                label[e] = static_cast<std::uint32_t>(b);
            }
        }
        std::vector<std::uint32_t> labels;
        for (std::size_t e = 0; e < label.size(); ++e) {
            if (!label[e]) {
                throw PreconditionError("partition: element '" + h.element_name(SortId{s}, static_cast<Element>(e)) +
                                        "' is not covered");
            }
            labels.push_back(*label[e]);
        }
        p.blocks.push_back(canonical_labels(labels));
    }
    return p;
}

std::pair<Structure, Mapping> factor_structure(const Structure& h, const Partition& theta) {
    if (theta.blocks.size() != h.sort_count()) throw PreconditionError("factor_structure: one partition per sort required");
    Structure out;
    Mapping quotient;
    for (std::size_t s = 0; s < h.sort_count(); ++s) {
        if (theta.blocks[s].size() != h.sort_size(SortId{s})) {
            throw PreconditionError("factor_structure: partition does not cover its sort");
        }
        const auto labels = canonical_labels(theta.blocks[s]);
        const std::size_t classes = labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
        std::vector<std::vector<std::string>> members(classes);
        for (std::size_t e = 0; e < labels.size(); ++e) {
            members[labels[e]].push_back(h.element_name(SortId{s}, static_cast<Element>(e)));
        }
        std::vector<std::string> names;
        for (const auto& m : members) names.push_back(join_names(m, '{', '}'));
        out.add_sort(h.sorts()[s].name, std::move(names));
        quotient.components.emplace_back(labels.begin(), labels.end());
    }
    for (const auto& r : h.relations()) {
        std::vector<Tuple> tuples;
        for (const auto& t : r.tuples) {
            Tuple v(t.size());
            for (std::size_t j = 0; j < t.size(); ++j) v[j] = quotient(r.signature[j], t[j]);
            tuples.push_back(std::move(v));
        }
        out.add_relation(r.name, r.signature, std::move(tuples));
    }
    return {std::move(out), std::move(quotient)};
}

// ---------------------------------------------------------------------------
// Distinguished structures
// ---------------------------------------------------------------------------

Anchored anchored_product(const Anchored& g, const Anchored& h) {
    if (g.anchors.size() != h.anchors.size()) throw PreconditionError("anchored_product: anchor lists differ in length");
    Anchored out{direct_product(g.structure, h.structure), {}};
    for (std::size_t i = 0; i < g.anchors.size(); ++i) {
        if (g.anchors[i].sort != h.anchors[i].sort) throw PreconditionError("anchored_product: anchor sorts differ");
        const auto s = g.anchors[i].sort;
        out.anchors.push_back(
            {s, static_cast<Element>(g.anchors[i].element * h.structure.sort_size(s) + h.anchors[i].element)});
    }
    return out;
}

Anchored glue(const Anchored& g, const Anchored& h) {
    require_similar(g.structure, h.structure);
    if (g.anchors.size() != h.anchors.size()) throw PreconditionError("glue: anchor lists differ in length");
    const std::size_t k = g.structure.sort_count();
    // Union-find over the disjoint union, per sort: g's elements first.
    std::vector<std::vector<std::size_t>> parent(k);
    for (std::size_t s = 0; s < k; ++s) {
        parent[s].resize(g.structure.sort_size(SortId{s}) + h.structure.sort_size(SortId{s}));
        std::iota(parent[s].begin(), parent[s].end(), std::size_t{0});
    }
    auto find = [&](std::size_t s, std::size_t x) {
        while (parent[s][x] != x) x = parent[s][x] = parent[s][parent[s][x]];
        return x;
    };
    for (std::size_t i = 0; i < g.anchors.size(); ++i) {
        if (g.anchors[i].sort != h.anchors[i].sort) throw PreconditionError("glue: anchor sorts differ");
        const auto s = g.anchors[i].sort.value;
        const auto a = find(s, g.anchors[i].element);
        const auto b = find(s, g.structure.sort_size(SortId{s}) + h.anchors[i].element);
        if (a != b) parent[s][std::max(a, b)] = std::min(a, b);
    }
    Anchored out;
    std::vector<std::vector<Element>> index(k);
    for (std::size_t s = 0; s < k; ++s) {
        const std::size_t gs = g.structure.sort_size(SortId{s});
        const std::size_t total = parent[s].size();
        std::map<std::size_t, std::vector<std::string>> members;
        for (std::size_t x = 0; x < total; ++x) {
            const std::string name = x < gs ? "L:" + g.structure.element_name(SortId{s}, static_cast<Element>(x))
                                            : "R:" + h.structure.element_name(SortId{s}, static_cast<Element>(x - gs));
            members[find(s, x)].push_back(name);
        }
        std::map<std::size_t, Element> root_index;
        std::vector<std::string> names;
        for (const auto& [root, m] : members) {
            root_index[root] = static_cast<Element>(names.size());
            std::string n;
            for (std::size_t i = 0; i < m.size(); ++i) n += (i ? "=" : "") + m[i];
            names.push_back(std::move(n));
        }
        index[s].resize(total);
        for (std::size_t x = 0; x < total; ++x) index[s][x] = root_index[find(s, x)];
        out.structure.add_sort(g.structure.sorts()[s].name, std::move(names));
    }
    for (std::size_t r = 0; r < g.structure.relations().size(); ++r) {
        const auto& rg = g.structure.relations()[r];
        const auto& rh = h.structure.relations()[r];
        std::vector<Tuple> tuples;
        for (const auto& t : rg.tuples) {
            Tuple v(t.size());
            for (std::size_t j = 0; j < t.size(); ++j) v[j] = index[rg.signature[j].value][t[j]];
            tuples.push_back(std::move(v));
        }
        for (const auto& t : rh.tuples) {
            Tuple v(t.size());
            for (std::size_t j = 0; j < t.size(); ++j) {
                const auto s = rh.signature[j];
                v[j] = index[s.value][g.structure.sort_size(s) + t[j]];
            }
            tuples.push_back(std::move(v));
        }
        out.structure.add_relation(rg.name, rg.signature, std::move(tuples));
    }
    for (const auto& a : g.anchors) out.anchors.push_back({a.sort, index[a.sort.value][a.element]});
    return out;
}

// ---------------------------------------------------------------------------
// Constants
// ---------------------------------------------------------------------------

std::string constant_name(const Structure& h, SortId s, Element a) {
    if (h.sort_count() == 1) return "C_" + h.element_name(s, a);
    return "C_" + h.sort(s).name + "." + h.element_name(s, a);
}

std::optional<Anchor> parse_constant_name(const Structure& h, std::string_view name) {
    for (std::size_t s = 0; s < h.sort_count(); ++s) {
        for (Element a = 0; a < h.sort_size(SortId{s}); ++a) {
            if (constant_name(h, SortId{s}, a) == name) return Anchor{SortId{s}, a};
        }
    }
    return std::nullopt;
}

Structure with_constants(const Structure& h) {
    Structure out = h;
    for (std::size_t s = 0; s < h.sort_count(); ++s) {
        for (Element a = 0; a < h.sort_size(SortId{s}); ++a) {
            const auto name = constant_name(h, SortId{s}, a);
            if (const auto* r = h.find_relation(name)) {
                if (r->signature != std::vector<SortId>{SortId{s}} || r->tuples != std::vector<Tuple>{Tuple{a}}) {
                    throw PreconditionError("relation '" + name + "' clashes with the constant of the same name");
                }
                continue;
            }
            out.add_relation(name, {SortId{s}}, {Tuple{a}});
        }
    }
    return out;
}

bool has_all_constants(const Structure& h) {
    for (std::size_t s = 0; s < h.sort_count(); ++s) {
        for (Element a = 0; a < h.sort_size(SortId{s}); ++a) {
            const auto* r = h.find_relation(constant_name(h, SortId{s}, a));
            if (r == nullptr || r->signature != std::vector<SortId>{SortId{s}} ||
                r->tuples != std::vector<Tuple>{Tuple{a}}) {
                return false;
            }
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// View translations
// ---------------------------------------------------------------------------

Structure instance_to_structure(const Instance& p, const Structure& signature) {
    require_valid(p, signature);
    Structure out;
    std::vector<Element> local(p.variable_count());
    for (const auto& s : signature.sorts()) {
        std::vector<std::string> names;
        for (std::size_t v = 0; v < p.variable_count(); ++v) {
            if (p.variables()[v].sort == s.name) {
                local[v] = static_cast<Element>(names.size());
                names.push_back(p.variables()[v].name);
            }
        }
        out.add_sort(s.name, std::move(names));
    }
    std::map<std::string, std::vector<Tuple>> tuples;
    for (const auto& c : p.constraints()) {
        if (c.relation == kEquality) {
            throw PreconditionError("instance_to_structure: equality constraints have no structure counterpart");
        }
        Tuple t;
        for (const auto v : c.scope) t.push_back(local[v]);
        tuples[c.relation].push_back(std::move(t));
    }
    for (const auto& r : signature.relations()) out.add_relation(r.name, r.signature, std::move(tuples[r.name]));
    return out;
}

Instance structure_to_instance(const Structure& g) {
    Instance p;
    std::vector<std::vector<std::size_t>> var(g.sort_count());
    const bool qualify = g.sort_count() > 1;
    for (std::size_t s = 0; s < g.sort_count(); ++s) {
        const auto& sort = g.sorts()[s];
        for (const auto& e : sort.elements) {
            var[s].push_back(p.add_variable(qualify ? sort.name + "." + e : e, sort.name));
        }
    }
    for (const auto& r : g.relations()) {
        for (const auto& t : r.tuples) {
            std::vector<std::size_t> scope;
            for (std::size_t j = 0; j < t.size(); ++j) scope.push_back(var[r.signature[j].value][t[j]]);
            p.add_constraint(std::move(scope), r.name);
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// Isomorphism search
// ---------------------------------------------------------------------------

namespace {

/// Per-element invariant: for every relation and position, the number of
/// tuples holding the element at that position.
std::vector<std::vector<std::vector<std::size_t>>> degree_profiles(const Structure& h) {
    std::vector<std::vector<std::vector<std::size_t>>> prof(h.sort_count());
    std::size_t width = 0;
    for (const auto& r : h.relations()) width += r.arity();
    for (std::size_t s = 0; s < h.sort_count(); ++s) {
        prof[s].assign(h.sort_size(SortId{s}), std::vector<std::size_t>(width, 0));
    }
    std::size_t offset = 0;
    for (const auto& r : h.relations()) {
        for (const auto& t : r.tuples) {
            for (std::size_t j = 0; j < t.size(); ++j) ++prof[r.signature[j].value][t[j]][offset + j];
        }
        offset += r.arity();
    }
    return prof;
}

}  // namespace

void for_each_isomorphism(const Structure& g, const Structure& h, const std::function<bool(const Mapping&)>& visit,
                          std::span<const Anchor> g_anchors, std::span<const Anchor> h_anchors) {
    if (!similar(g, h)) return;
    if (g_anchors.size() != h_anchors.size()) return;
    for (std::size_t s = 0; s < g.sort_count(); ++s) {
        if (g.sort_size(SortId{s}) != h.sort_size(SortId{s})) return;
    }
    for (std::size_t r = 0; r < g.relations().size(); ++r) {
        if (g.relations()[r].size() != h.relations()[r].size()) return;
    }
    const std::size_t k = g.sort_count();
    // Forced images from anchors.
    std::vector<std::vector<std::optional<Element>>> forced(k);
    for (std::size_t s = 0; s < k; ++s) forced[s].assign(g.sort_size(SortId{s}), std::nullopt);
    for (std::size_t i = 0; i < g_anchors.size(); ++i) {
        if (g_anchors[i].sort != h_anchors[i].sort) return;
        auto& f = forced[g_anchors[i].sort.value][g_anchors[i].element];
        if (f && *f != h_anchors[i].element) return;
        f = h_anchors[i].element;
    }
    // Flat order of g's elements: sort by sort, index by index.
    std::vector<std::pair<std::size_t, Element>> order;
    std::vector<std::vector<std::size_t>> flat(k);
    for (std::size_t s = 0; s < k; ++s) {
        for (Element e = 0; e < g.sort_size(SortId{s}); ++e) {
            flat[s].push_back(order.size());
            order.emplace_back(s, e);
        }
    }
    // Tuples of g checked when their last element (in flat order) is placed.
    struct Check {
        std::size_t relation;
        std::size_t tuple;
    };
    std::vector<std::vector<Check>> checks(order.size());
    for (std::size_t r = 0; r < g.relations().size(); ++r) {
        const auto& rel = g.relations()[r];
        for (std::size_t t = 0; t < rel.tuples.size(); ++t) {
            std::size_t last = 0;
            for (std::size_t j = 0; j < rel.arity(); ++j) last = std::max(last, flat[rel.signature[j].value][rel.tuples[t][j]]);
            checks[last].push_back({r, t});
        }
    }
    const auto gp = degree_profiles(g);
    const auto hp = degree_profiles(h);

    Mapping m;
    std::vector<std::vector<bool>> used(k);
    for (std::size_t s = 0; s < k; ++s) {
        m.components.emplace_back(g.sort_size(SortId{s}), 0);
        used[s].assign(h.sort_size(SortId{s}), false);
    }
    Tuple image;
    bool stop = false;
    std::function<void(std::size_t)> rec = [&](std::size_t pos) {
        if (stop) return;
        if (pos == order.size()) {
            if (!visit(m)) stop = true;
            return;
        }
        const auto [s, e] = order[pos];
        for (Element c = 0; c < h.sort_size(SortId{s}) && !stop; ++c) {
            if (used[s][c]) continue;
            if (forced[s][e] && *forced[s][e] != c) continue;
            if (gp[s][e] != hp[s][c]) continue;
            m.components[s][e] = c;
            bool ok = true;
            for (const auto& chk : checks[pos]) {
                const auto& rel = g.relations()[chk.relation];
                const auto& t = rel.tuples[chk.tuple];
                image.resize(t.size());
                for (std::size_t j = 0; j < t.size(); ++j) image[j] = m(rel.signature[j], t[j]);
                if (!h.relations()[chk.relation].contains(image)) {
                    ok = false;
                    break;
                }
            }
            if (!ok) continue;
            used[s][c] = true;
            rec(pos + 1);
            used[s][c] = false;
        }
    };
    rec(0);
}

std::optional<Mapping> find_isomorphism(const Structure& g, const Structure& h, std::span<const Anchor> g_anchors,
                                        std::span<const Anchor> h_anchors) {
    std::optional<Mapping> found;
    for_each_isomorphism(
        g, h,
        [&](const Mapping& m) {
            found = m;
            return false;
        },
        g_anchors, h_anchors);
    return found;
}

}  // namespace modcsp
