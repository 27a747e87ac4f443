// SPDX-License-Identifier: Apache-2.0
/**
 * @file binarize.cpp
 * @brief Construction of b(H), the instance translations in both directions
 *        and the transport of operations, mappings and formulas.
 */
#include "modcsp/binarize.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <tuple>

namespace modcsp {
namespace {

/// Union-find over (variable, position) slots.
class Slots {
public:
    explicit Slots(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }

    std::size_t find(std::size_t x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<std::size_t> parent_;
};

std::size_t relation_index(const Structure& h, std::string_view name) {
    const auto& rels = h.relations();
    const auto it = std::find_if(rels.begin(), rels.end(), [&](const Relation& r) { return r.name == name; });
    if (it == rels.end()) throw PreconditionError("unknown relation '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - rels.begin());
}

std::string link_name(const Relation& a, std::size_t s, const Relation& b, std::size_t t) {
    return a.name + "[" + std::to_string(s + 1) + "]=" + b.name + "[" + std::to_string(t + 1) + "]";
}

/// Index of `t` among the tuples of `r`, or nothing.
std::optional<Element> tuple_index(const Relation& r, const Tuple& t) {
    const auto it = std::lower_bound(r.tuples.begin(), r.tuples.end(), t);
    if (it == r.tuples.end() || *it != t) return std::nullopt;
    return static_cast<Element>(it - r.tuples.begin());
}

Element require_tuple(const Relation& r, const Tuple& t, std::string_view what) {
    if (const auto e = tuple_index(r, t)) return *e;
    throw PreconditionError(std::string(what) + " leaves relation '" + r.name + "'");
}

/// Slot layout of variables over b(H): variable v occupies the slots
/// offset[v] .. offset[v] + arity of its domain relation.
struct SlotLayout {
    std::vector<std::size_t> offset;
    std::vector<const Relation*> domain;
    std::size_t total{};
};

SlotLayout layout(const Binarization& b, const std::vector<std::string>& sorts) {
    SlotLayout l;
    for (const auto& sort : sorts) {
        const Relation& r = b.domain_relation(b.structure.sort_id(sort));
        l.offset.push_back(l.total);
        l.domain.push_back(&r);
        l.total += r.arity();
    }
    return l;
}

/// Identifies slots along one atom or constraint over b(H).
void identify(const Binarization& b, const SlotLayout& l, Slots& slots, std::string_view relation, std::size_t u,
              std::size_t v) {
    if (relation == kEquality) {
        for (std::size_t s = 0; s < l.domain[u]->arity(); ++s) slots.unite(l.offset[u] + s, l.offset[v] + s);
        return;
    }
    const BinaryLink* link = b.find_link(relation);
    if (link == nullptr) throw PreconditionError("'" + std::string(relation) + "' is not a relation of b(H)");
    slots.unite(l.offset[u] + link->s, l.offset[v] + link->t);
}

}  // namespace

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

const BinaryLink* Binarization::find_link(std::string_view a, std::size_t s, std::string_view b,
                                          std::size_t t) const {
    std::size_t i = relation_index(base, a);
    std::size_t j = relation_index(base, b);
    if (i > j) {
        std::swap(i, j);
        std::swap(s, t);
    }
    const auto it = std::find_if(links.begin(), links.end(), [&](const BinaryLink& l) {
        return l.i == i && l.j == j && l.s == s && l.t == t;
    });
    return it == links.end() ? nullptr : &*it;
}

const BinaryLink* Binarization::find_link(std::string_view name) const {
    const auto it = std::find_if(links.begin(), links.end(), [&](const BinaryLink& l) { return l.name == name; });
    return it == links.end() ? nullptr : &*it;
}

std::string tuple_element_name(const Structure& h, const Relation& r, const Tuple& t) {
    std::string out = "[";
    for (std::size_t s = 0; s < t.size(); ++s) {
        if (s > 0) out += ",";
        out += h.element_name(r.signature[s], t[s]);
    }
    return out + "]";
}

Binarization binarize(const Structure& h) {
    Binarization b;
    b.base = h;
    for (std::size_t s = 0; s < h.sort_count(); ++s) {
        const SortId id{s};
        const std::string& sort_name = h.sort(id).name;
        auto full = [&](const Relation& r) {
            return r.arity() == 1 && r.signature[0] == id && r.size() == h.sort_size(id);
        };
        const Relation* existing = h.find_relation(sort_name);
        if (existing == nullptr || !full(*existing)) {
            existing = nullptr;
            for (const auto& r : h.relations()) {
                if (full(r)) {
                    existing = &r;
                    break;
                }
            }
        }
        if (existing != nullptr) {
            b.sort_relation.push_back(existing->name);
            continue;
        }
        std::string name = sort_name;
        while (b.base.find_relation(name) != nullptr) name += "'";
        std::vector<Tuple> all;
        for (Element e = 0; e < h.sort_size(id); ++e) all.push_back({e});
        b.base.add_relation(name, {id}, std::move(all));
        b.sort_relation.push_back(name);
    }

    const auto& rels = b.base.relations();
    for (const auto& r : rels) {
        std::vector<std::string> names;
        names.reserve(r.size());
        for (const auto& t : r.tuples) names.push_back(tuple_element_name(b.base, r, t));
        b.structure.add_sort(r.name, std::move(names));
    }

    std::size_t total = 0;
    for (std::size_t i = 0; i < rels.size(); ++i) {
        for (std::size_t j = i; j < rels.size(); ++j) {
            const Relation& qi = rels[i];
            const Relation& qj = rels[j];
            for (std::size_t s = 0; s < qi.arity(); ++s) {
                for (std::size_t t = 0; t < qj.arity(); ++t) {
                    if (qi.signature[s] != qj.signature[t]) continue;
                    // Tuples of Q_j grouped by their entry at t.
                    std::map<Element, std::vector<Element>> by_value;
                    for (std::size_t e = 0; e < qj.size(); ++e) {
                        by_value[qj.tuples[e][t]].push_back(static_cast<Element>(e));
                    }
                    std::vector<Tuple> pairs;
                    for (std::size_t a = 0; a < qi.size(); ++a) {
                        const auto it = by_value.find(qi.tuples[a][s]);
                        if (it == by_value.end()) continue;
                        for (const Element c : it->second) pairs.push_back({static_cast<Element>(a), c});
                    }
                    total += pairs.size();
                    enforce_guard("tuples of b(H)", total, 2'000'000);
                    BinaryLink link{link_name(qi, s, qj, t), i, j, s, t};
                    b.structure.add_relation(link.name, {SortId{i}, SortId{j}}, std::move(pairs));
                    b.links.push_back(std::move(link));
                }
            }
        }
    }
    return b;
}

// ---------------------------------------------------------------------------
// Instance translations
// ---------------------------------------------------------------------------

BinarizedInstance binarize_instance(const Instance& p, const Binarization& b) {
    require_valid(p, b.base);
    Merged merged = eliminate_equality(p, b.base);
    BinarizedInstance out;
    out.variable_map = std::move(merged.variable_map);
    out.source = std::move(merged.instance);

    // Sort membership constraints assumed by the translation.
    const auto sorts = variable_sorts(out.source, b.base);
    std::vector<bool> covered(out.source.variable_count(), false);
    for (const auto& c : out.source.constraints()) {
        if (c.scope.size() == 1 && c.relation == b.sort_relation[sorts[c.scope[0]].value]) covered[c.scope[0]] = true;
    }
    for (std::size_t v = 0; v < covered.size(); ++v) {
        if (!covered[v]) out.source.add_constraint({v}, b.sort_relation[sorts[v].value]);
    }

    const auto& cons = out.source.constraints();
    std::vector<std::size_t> rel_of(cons.size());
    for (std::size_t k = 0; k < cons.size(); ++k) {
        rel_of[k] = relation_index(b.base, cons[k].relation);
        out.instance.add_variable("c" + std::to_string(k), cons[k].relation);
    }

    // Occurrences (constraint, position) of every variable, in order.
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> occurrences(out.source.variable_count());
    for (std::size_t k = 0; k < cons.size(); ++k) {
        for (std::size_t s = 0; s < cons[k].scope.size(); ++s) occurrences[cons[k].scope[s]].emplace_back(k, s);
    }
    std::map<std::tuple<std::size_t, std::size_t, std::size_t, std::size_t>, const BinaryLink*> links;
    for (const auto& l : b.links) links[{l.i, l.j, l.s, l.t}] = &l;
    for (const auto& occ : occurrences) {
        for (std::size_t x = 0; x < occ.size(); ++x) {
            for (std::size_t y = x + 1; y < occ.size(); ++y) {
                auto [k1, s1] = occ[x];
                auto [k2, s2] = occ[y];
                if (rel_of[k1] > rel_of[k2]) {
                    std::swap(k1, k2);
                    std::swap(s1, s2);
                }
                const BinaryLink* link = links.at({rel_of[k1], rel_of[k2], s1, s2});
                out.instance.add_constraint({k1, k2}, link->name);
            }
        }
    }
    return out;
}

Assignment binarize_assignment(const BinarizedInstance& bi, const Binarization& b, const Assignment& phi) {
    if (phi.size() != bi.variable_map.size()) throw PreconditionError("assignment has the wrong number of variables");
    Assignment source(bi.source.variable_count(), 0);
    for (std::size_t v = 0; v < phi.size(); ++v) source[bi.variable_map[v]] = phi[v];
    Assignment out;
    out.reserve(bi.source.constraints().size());
    for (const auto& c : bi.source.constraints()) {
        Tuple t;
        for (const std::size_t v : c.scope) t.push_back(source[v]);
        out.push_back(require_tuple(b.base.relation(c.relation), t, "the assignment"));
    }
    return out;
}

DebinarizedInstance debinarize_instance(const Instance& p, const Binarization& b) {
    require_valid(p, b.structure);
    std::vector<std::string> sorts;
    for (const auto& v : p.variables()) sorts.push_back(v.sort);
    const SlotLayout l = layout(b, sorts);
    Slots slots(l.total);
    for (const auto& c : p.constraints()) identify(b, l, slots, c.relation, c.scope[0], c.scope[1]);

    DebinarizedInstance out;
    std::map<std::size_t, std::size_t> class_of_root;
    out.classes.resize(p.variable_count());
    for (std::size_t v = 0; v < p.variable_count(); ++v) {
        const Relation& r = *l.domain[v];
        for (std::size_t s = 0; s < r.arity(); ++s) {
            const std::size_t root = slots.find(l.offset[v] + s);
            auto [it, fresh] = class_of_root.try_emplace(root, out.instance.variable_count());
            if (fresh) {
                out.instance.add_variable(p.variables()[v].name + "." + std::to_string(s + 1),
                                          b.base.sort(r.signature[s]).name);
            }
            out.classes[v].push_back(it->second);
        }
        out.instance.add_constraint(out.classes[v], r.name);
    }
    return out;
}

Assignment debinarize_assignment(const DebinarizedInstance& di, const Binarization& b, const Assignment& phi) {
    if (phi.size() != di.classes.size()) throw PreconditionError("assignment has the wrong number of variables");
    Assignment out(di.instance.variable_count(), 0);
    std::vector<bool> set(out.size(), false);
    for (std::size_t v = 0; v < phi.size(); ++v) {
        const Relation& r = b.base.relation(di.instance.constraints()[v].relation);
        if (phi[v] >= r.size()) throw PreconditionError("assignment value out of range");
        const Tuple& t = r.tuples[phi[v]];
        for (std::size_t s = 0; s < t.size(); ++s) {
            const std::size_t x = di.classes[v][s];
            if (set[x] && out[x] != t[s]) throw PreconditionError("assignment disagrees on identified positions");
            out[x] = t[s];
            set[x] = true;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Transport
// ---------------------------------------------------------------------------

Operation lift_operation(const Operation& f, const Binarization& b) {
    if (f.sort_sizes.size() != b.base.sort_count()) throw PreconditionError("operation does not match H");
    Operation out;
    out.arity = f.arity;
    std::size_t total = 0;
    for (const auto& r : b.base.relations()) {
        std::size_t entries = 1;
        for (std::size_t k = 0; k < f.arity; ++k) {
            entries *= r.size();
            enforce_guard("entries of the lifted operation", total + entries, 2'000'000);
        }
        total += entries;
        out.sort_sizes.push_back(r.size());
        std::vector<Element> table(entries);
        Tuple args(f.arity, 0);  // indices of tuples of r, first argument most significant
        Tuple column(f.arity);
        for (std::size_t idx = 0; idx < entries; ++idx) {
            Tuple image(r.arity());
            for (std::size_t s = 0; s < r.arity(); ++s) {
                for (std::size_t k = 0; k < f.arity; ++k) column[k] = r.tuples[args[k]][s];
                image[s] = f(r.signature[s], column);
            }
            table[idx] = require_tuple(r, image, "the operation");
            for (std::size_t k = f.arity; k-- > 0;) {
                if (++args[k] < r.size()) break;
                args[k] = 0;
            }
        }
        out.tables.push_back(std::move(table));
    }
    return out;
}

Operation restrict_operation(const Operation& f, const Binarization& b) {
    if (f.sort_sizes.size() != b.structure.sort_count()) throw PreconditionError("operation does not match b(H)");
    Operation out;
    out.arity = f.arity;
    for (std::size_t s = 0; s < b.base.sort_count(); ++s) {
        // The full unary relation lists the elements in order, so tuple e is (e).
        const SortId k = b.structure.sort_id(b.sort_relation[s]);
        out.sort_sizes.push_back(f.sort_sizes[k.value]);
        out.tables.push_back(f.tables[k.value]);
    }
    return out;
}

Mapping lift_mapping(const Mapping& pi, const Binarization& b) {
    if (pi.components.size() != b.base.sort_count()) throw PreconditionError("mapping does not match H");
    Mapping out;
    for (const auto& r : b.base.relations()) {
        std::vector<Element> component;
        component.reserve(r.size());
        for (const auto& t : r.tuples) {
            Tuple image(t.size());
            for (std::size_t s = 0; s < t.size(); ++s) image[s] = pi(r.signature[s], t[s]);
            component.push_back(require_tuple(r, image, "the mapping"));
        }
        out.components.push_back(std::move(component));
    }
    return out;
}

Mapping restrict_mapping(const Mapping& pi, const Binarization& b) {
    if (pi.components.size() != b.structure.sort_count()) throw PreconditionError("mapping does not match b(H)");
    Mapping out;
    for (std::size_t s = 0; s < b.base.sort_count(); ++s) {
        out.components.push_back(pi.components[b.structure.sort_id(b.sort_relation[s]).value]);
    }
    return out;
}

DebinarizedFormula debinarize_formula(const MppFormula& f, const Binarization& b) {
    if (f.blocks.size() > 1) throw PreconditionError("only formulas with at most one quantifier block are supported");
    const MppFormula typed = typecheck_formula(b.structure, f);
    std::vector<FormulaVariable> vars = typed.free;
    if (!typed.blocks.empty()) vars.insert(vars.end(), typed.blocks[0].vars.begin(), typed.blocks[0].vars.end());
    std::map<std::string, std::size_t, std::less<>> index;
    std::vector<std::string> sorts;
    for (std::size_t v = 0; v < vars.size(); ++v) {
        index[vars[v].name] = v;
        sorts.push_back(vars[v].sort);
    }
    const SlotLayout l = layout(b, sorts);
    Slots slots(l.total);
    for (const auto& a : typed.atoms) {
        if (a.args.size() != 2) throw PreconditionError("atoms over b(H) are binary");
        identify(b, l, slots, a.relation, index.at(a.args[0]), index.at(a.args[1]));
    }

    // Free classes first (by first free position), then bound classes.
    DebinarizedFormula out;
    std::map<std::size_t, std::size_t> class_of_root;
    std::vector<std::string> names;
    std::vector<std::string> class_sorts;
    std::vector<std::vector<std::size_t>> classes(vars.size());
    for (std::size_t v = 0; v < vars.size(); ++v) {
        const Relation& r = *l.domain[v];
        for (std::size_t s = 0; s < r.arity(); ++s) {
            auto [it, fresh] = class_of_root.try_emplace(slots.find(l.offset[v] + s), names.size());
            if (fresh) {
                names.push_back(vars[v].name + "." + std::to_string(s + 1));
                class_sorts.push_back(b.base.sort(r.signature[s]).name);
            }
            classes[v].push_back(it->second);
        }
    }
    // Classes are numbered in slot order, and free variables come first, so
    // the free classes form a prefix.
    std::size_t free_count = 0;
    for (std::size_t v = 0; v < typed.free.size(); ++v) {
        for (const std::size_t c : classes[v]) free_count = std::max(free_count, c + 1);
    }
    for (std::size_t c = 0; c < names.size(); ++c) {
        if (c < free_count) {
            out.formula.free.push_back({names[c], class_sorts[c]});
        } else {
            if (out.formula.blocks.empty()) {
                QuantifierBlock block = typed.blocks[0];
                block.vars.clear();
                out.formula.blocks.push_back(std::move(block));
            }
            out.formula.blocks[0].vars.push_back({names[c], class_sorts[c]});
        }
    }
    for (std::size_t v = 0; v < vars.size(); ++v) {
        FormulaAtom atom{l.domain[v]->name, {}};
        for (const std::size_t c : classes[v]) atom.args.push_back(names[c]);
        out.formula.atoms.push_back(std::move(atom));
    }
    out.free_classes.assign(classes.begin(), classes.begin() + static_cast<std::ptrdiff_t>(typed.free.size()));
    return out;
}

Tuple debinarize_tuple(const DebinarizedFormula& df, const MppFormula& f, const Binarization& b, const Tuple& t) {
    if (t.size() != df.free_classes.size()) throw PreconditionError("tuple has the wrong arity");
    const MppFormula typed = typecheck_formula(b.structure, f);
    Tuple out(df.formula.free.size(), 0);
    for (std::size_t x = 0; x < t.size(); ++x) {
        const Relation& r = b.base.relation(typed.free[x].sort);
        const Tuple& value = r.tuples.at(t[x]);
        for (std::size_t s = 0; s < value.size(); ++s) out[df.free_classes[x][s]] = value[s];
    }
    return out;
}

}  // namespace modcsp
