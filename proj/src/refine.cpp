// SPDX-License-Identifier: Apache-2.0
/**
 * @file refine.cpp
 * @brief Arc-consistency, solver-based domains, refined structures and
 *        instances, the T_p solver and the refine-reduce-count pipeline.
 */
#include "modcsp/refine.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include "modcsp/automorphism.hpp"
#include "modcsp/expansion.hpp"
#include "modcsp/oracle.hpp"

namespace modcsp {
namespace {

std::vector<Element> full_sort(const Structure& h, SortId s) {
    std::vector<Element> all(h.sort_size(s));
    for (Element a = 0; a < all.size(); ++a) all[a] = a;
    return all;
}

/// Tuples of a constraint relation: the diagonal for equality, otherwise the
/// named relation.
std::vector<Tuple> constraint_tuples(const Constraint& c, const Structure& h, std::span<const SortId> sorts) {
    if (c.relation == kEquality) {
        std::vector<Tuple> diagonal;
        for (Element a = 0; a < h.sort_size(sorts[c.scope[0]]); ++a) diagonal.push_back({a, a});
        return diagonal;
    }
    return h.relation(c.relation).tuples;
}

/// True iff `t` agrees with itself wherever the scope repeats a variable.
bool consistent_with_scope(const Tuple& t, std::span<const std::size_t> scope) {
    for (std::size_t i = 0; i < scope.size(); ++i) {
        for (std::size_t j = i + 1; j < scope.size(); ++j) {
            if (scope[i] == scope[j] && t[i] != t[j]) return false;
        }
    }
    return true;
}

bool contains_sorted(std::span<const Element> sorted, Element a) {
    return std::binary_search(sorted.begin(), sorted.end(), a);
}

/// Positions of the shared variables: pairs (position in c1, position in c2),
/// one per distinct shared variable.
std::vector<std::pair<std::size_t, std::size_t>> shared_positions(const Constraint& c1, const Constraint& c2) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    std::set<std::size_t> seen;
    for (std::size_t i = 0; i < c1.scope.size(); ++i) {
        if (seen.contains(c1.scope[i])) continue;
        for (std::size_t j = 0; j < c2.scope.size(); ++j) {
            if (c1.scope[i] == c2.scope[j]) {
                out.emplace_back(i, j);
                seen.insert(c1.scope[i]);
                break;
            }
        }
    }
    return out;
}

/// The sorted projection of `tuples` on position `i`.
std::vector<Element> column(const std::vector<Tuple>& tuples, std::size_t i) {
    std::vector<Element> out;
    for (const auto& t : tuples) out.push_back(t[i]);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

std::uint64_t power_mod(std::uint64_t base, std::size_t exponent, std::uint64_t m) {
    std::uint64_t r = 1 % m;
    base %= m;
    for (std::size_t e = exponent; e > 0; e >>= 1) {
        if (e & 1U) r = r * base % m;
        base = base * base % m;
    }
    return r;
}

}  // namespace

// ---------------------------------------------------------------------------
// Domains
// ---------------------------------------------------------------------------

ArcConsistency arc_consistency(const Instance& p, const Structure& h, const DomainAssignment* initial) {
    require_valid(p, h);
    const auto sorts = variable_sorts(p, h);
    const std::size_t n = p.variable_count();
    if (initial != nullptr && initial->domains.size() != n) {
        throw PreconditionError("arc_consistency: one initial domain per variable required");
    }
    std::vector<std::vector<Element>> start(n);
    for (std::size_t v = 0; v < n; ++v) {
        if (initial != nullptr) {
            start[v] = initial->domains[v];
            std::sort(start[v].begin(), start[v].end());
            start[v].erase(std::unique(start[v].begin(), start[v].end()), start[v].end());
            std::erase_if(start[v], [&](Element a) { return a >= h.sort_size(sorts[v]); });
        } else {
            start[v] = full_sort(h, sorts[v]);
        }
    }

    const auto& cons = p.constraints();
    ArcConsistency out;
    out.relations.resize(cons.size());
    for (std::size_t k = 0; k < cons.size(); ++k) {
        for (auto& t : constraint_tuples(cons[k], h, sorts)) {
            if (!consistent_with_scope(t, cons[k].scope)) continue;
            bool inside = true;
            for (std::size_t i = 0; i < t.size() && inside; ++i) inside = contains_sorted(start[cons[k].scope[i]], t[i]);
            if (inside) out.relations[k].push_back(std::move(t));
        }
    }

    // Constraints sharing at least one variable with each constraint.
    std::vector<std::vector<std::size_t>> neighbours(cons.size());
    std::vector<std::vector<std::size_t>> by_variable(n);
    for (std::size_t k = 0; k < cons.size(); ++k) {
        for (const auto v : cons[k].scope) {
            if (by_variable[v].empty() || by_variable[v].back() != k) by_variable[v].push_back(k);
        }
    }
    for (std::size_t v = 0; v < n; ++v) {
        for (const auto a : by_variable[v]) {
            for (const auto b : by_variable[v]) {
                if (a != b) neighbours[a].push_back(b);
            }
        }
    }
    for (auto& list : neighbours) {
        std::sort(list.begin(), list.end());
        list.erase(std::unique(list.begin(), list.end()), list.end());
    }

    // Worklist of constraints whose relation changed: every neighbour is
    // re-filtered against it.
    std::deque<std::size_t> work;
    std::vector<bool> queued(cons.size(), true);
    for (std::size_t k = 0; k < cons.size(); ++k) work.push_back(k);
    while (!work.empty()) {
        const std::size_t src = work.front();
        work.pop_front();
        queued[src] = false;
        for (const auto dst : neighbours[src]) {
            const auto shared = shared_positions(cons[dst], cons[src]);
            std::set<Tuple> support;
            for (const auto& t : out.relations[src]) {
                Tuple key;
                for (const auto& [i, j] : shared) key.push_back(t[j]);
                support.insert(std::move(key));
            }
            const auto before = out.relations[dst].size();
            std::erase_if(out.relations[dst], [&](const Tuple& t) {
                Tuple key;
                for (const auto& [i, j] : shared) key.push_back(t[i]);
                return !support.contains(key);
            });
            if (out.relations[dst].size() != before && !queued[dst]) {
                queued[dst] = true;
                work.push_back(dst);
            }
        }
    }

    out.domains.domains.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
        if (by_variable[v].empty()) {
            out.domains.domains[v] = start[v];
        } else {
            const std::size_t k = by_variable[v].front();
            const auto pos = static_cast<std::size_t>(
                std::find(cons[k].scope.begin(), cons[k].scope.end(), v) - cons[k].scope.begin());
            out.domains.domains[v] = column(out.relations[k], pos);
        }
        if (out.domains.domains[v].empty()) out.domains.unsatisfiable = true;
    }
    for (const auto& r : out.relations) {
        if (r.empty()) out.domains.unsatisfiable = true;
    }
    return out;
}

DomainAssignment consistency_domains(const Instance& p, const Structure& h, unsigned width) {
    if (width != 1) {
        throw PreconditionError("consistency of width " + std::to_string(width) +
                                " is not implemented (only width 1, arc-consistency)");
    }
    return arc_consistency(p, h).domains;
}

DecisionSolver oracle_decision_solver() {
    return [](const Instance& p, const Structure& h) -> std::optional<bool> { return is_satisfiable(p, h); };
}

DomainAssignment solver_based_domains(const Instance& p, const Structure& h, const DecisionSolver& solver) {
    require_valid(p, h);
    if (!has_all_constants(h)) {
        throw PreconditionError("solver_based_domains: the structure must contain every constant relation");
    }
    const auto sorts = variable_sorts(p, h);
    auto ask = [&](const Instance& q) {
        const auto answer = solver(q, h);
        if (!answer) throw Error("solver_based_domains: the decision procedure gave up");
        return *answer;
    };
    DomainAssignment out;
    out.domains.resize(p.variable_count());
    if (!ask(p)) {
        out.unsatisfiable = true;
        return out;
    }
    for (std::size_t v = 0; v < p.variable_count(); ++v) {
        for (Element a = 0; a < h.sort_size(sorts[v]); ++a) {
            Instance probe = p;
            probe.add_constraint({v}, constant_name(h, sorts[v], a));
            if (ask(probe)) out.domains[v].push_back(a);
        }
    }
    return out;
}

ReducedInstance eliminate_singletons(const Instance& p, const Structure& h, const DomainAssignment& domains) {
    require_valid(p, h);
    const auto sorts = variable_sorts(p, h);
    const std::size_t n = p.variable_count();
    if (domains.domains.size() != n) throw PreconditionError("eliminate_singletons: one domain per variable required");

    ReducedInstance out;
    for (const auto& s : h.sorts()) out.structure.add_sort(s.name, s.elements);
    out.pinned.assign(n, std::nullopt);
    out.index.assign(n, std::nullopt);
    if (domains.unsatisfiable) {
        out.unsatisfiable = true;
        return out;
    }
    for (std::size_t v = 0; v < n; ++v) {
        if (domains.domains[v].empty()) {
            out.unsatisfiable = true;
            return out;
        }
        if (domains.domains[v].size() == 1) {
            out.pinned[v] = domains.domains[v].front();
        } else {
            out.index[v] = out.instance.add_variable(p.variables()[v].name, p.variables()[v].sort);
        }
    }

    const auto& cons = p.constraints();
    for (std::size_t k = 0; k < cons.size(); ++k) {
        const auto& c = cons[k];
        // Kept positions: the first occurrence of every non-pinned variable.
        std::vector<std::size_t> kept;
        std::vector<std::size_t> scope;
        for (std::size_t i = 0; i < c.scope.size(); ++i) {
            const auto v = c.scope[i];
            if (out.pinned[v]) continue;
            if (std::find(scope.begin(), scope.end(), *out.index[v]) != scope.end()) continue;
            kept.push_back(i);
            scope.push_back(*out.index[v]);
        }
        std::vector<Tuple> tuples;
        for (const auto& t : constraint_tuples(c, h, sorts)) {
            if (!consistent_with_scope(t, c.scope)) continue;
            bool ok = true;
            for (std::size_t i = 0; i < t.size() && ok; ++i) {
                const auto v = c.scope[i];
                ok = out.pinned[v] ? t[i] == *out.pinned[v] : contains_sorted(domains.domains[v], t[i]);
            }
            if (!ok) continue;
            Tuple projected;
            for (const auto i : kept) projected.push_back(t[i]);
            tuples.push_back(std::move(projected));
        }
        if (kept.empty()) {
            if (tuples.empty()) out.unsatisfiable = true;
            continue;
        }
        std::vector<SortId> signature;
        for (const auto i : kept) signature.push_back(sorts[c.scope[i]]);
        const std::string name = c.relation + "#" + std::to_string(k);
        out.structure.add_relation(name, std::move(signature), std::move(tuples));
        out.instance.add_constraint(std::move(scope), name);
    }
    for (std::size_t v = 0; v < n; ++v) {
        if (!out.index[v] || domains.domains[v].size() == h.sort_size(sorts[v])) continue;
        std::vector<Tuple> tuples;
        for (const auto a : domains.domains[v]) tuples.push_back({a});
        const std::string name = "D|" + p.variables()[v].name;
        out.structure.add_relation(name, {sorts[v]}, std::move(tuples));
        out.instance.add_constraint({*out.index[v]}, name);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Refined structures and instances
// ---------------------------------------------------------------------------

RefinedDomain domain_from_names(const Structure& h, std::string name, std::span<const std::string> elements) {
    if (elements.empty()) throw PreconditionError("domain '" + name + "' is empty");
    std::optional<SortId> sort;
    for (std::size_t s = 0; s < h.sort_count() && !sort; ++s) {
        const bool all = std::all_of(elements.begin(), elements.end(), [&](const std::string& e) {
            return h.find_element(SortId{s}, e).has_value();
        });
        if (all) sort = SortId{s};
    }
    if (!sort) throw PreconditionError("domain '" + name + "' straddles sorts or names unknown elements");
    RefinedDomain out{std::move(name), *sort, {}};
    for (const auto& e : elements) out.elements.push_back(h.element(*sort, e));
    return out;
}

std::optional<Element> Refinement::preimage(SortId s, Element b) const {
    const auto& map = xi[s.value];
    const auto it = std::find(map.begin(), map.end(), b);
    if (it == map.end()) return std::nullopt;
    return static_cast<Element>(it - map.begin());
}

std::string refined_relation_name(const Structure& g, std::string_view relation, std::span<const SortId> sorts) {
    std::string name(relation);
    name += '@';
    for (std::size_t i = 0; i < sorts.size(); ++i) {
        if (i > 0) name += ',';
        name += g.sort(sorts[i]).name;
    }
    return name;
}

Refinement build_refinement(const Structure& h, std::span<const RefinedDomain> family) {
    Refinement out;
    std::set<std::string> names;
    for (const auto& member : family) {
        if (member.sort.value >= h.sort_count()) {
            throw PreconditionError("domain '" + member.name + "' refers to an unknown sort");
        }
        if (member.name.empty() || !names.insert(member.name).second) {
            throw PreconditionError("domain names must be nonempty and distinct ('" + member.name + "')");
        }
        auto elements = member.elements;
        std::sort(elements.begin(), elements.end());
        if (elements.empty()) throw PreconditionError("domain '" + member.name + "' is empty");
        if (std::adjacent_find(elements.begin(), elements.end()) != elements.end()) {
            throw PreconditionError("domain '" + member.name + "' repeats an element");
        }
        if (elements.back() >= h.sort_size(member.sort)) {
            throw PreconditionError("domain '" + member.name + "' names an element outside its sort");
        }
        std::vector<std::string> element_names;
        for (const auto a : elements) element_names.push_back(h.element_name(member.sort, a));
        out.structure.add_sort(member.name, std::move(element_names));
        out.base_sort.push_back(member.sort);
        out.xi.push_back(std::move(elements));
    }

    std::size_t placements = 0;
    for (const auto& r : h.relations()) {
        // Members admissible at each position: same sort, image inside pr_r R.
        std::vector<std::vector<SortId>> candidates(r.arity());
        for (std::size_t i = 0; i < r.arity(); ++i) {
            const auto proj = column(r.tuples, i);
            for (std::size_t g = 0; g < out.xi.size(); ++g) {
                if (out.base_sort[g] != r.signature[i]) continue;
                const bool inside = std::all_of(out.xi[g].begin(), out.xi[g].end(),
                                                [&](Element a) { return contains_sorted(proj, a); });
                if (inside) candidates[i].push_back(SortId{g});
            }
        }
        if (std::any_of(candidates.begin(), candidates.end(), [](const auto& c) { return c.empty(); })) continue;

        std::vector<std::size_t> choice(r.arity(), 0);
        while (true) {
            enforce_guard("refined relation placements", ++placements, 100'000);
            std::vector<SortId> signature(r.arity());
            for (std::size_t i = 0; i < r.arity(); ++i) signature[i] = candidates[i][choice[i]];
            std::vector<Tuple> tuples;
            for (const auto& t : r.tuples) {
                Tuple q(t.size());
                bool ok = true;
                for (std::size_t i = 0; i < t.size() && ok; ++i) {
                    const auto pre = out.preimage(signature[i], t[i]);
                    if (pre) q[i] = *pre;
                    else ok = false;
                }
                if (ok) tuples.push_back(std::move(q));
            }
            const auto name = refined_relation_name(out.structure, r.name, signature);
            out.structure.add_relation(name, signature, std::move(tuples));
            out.origin.emplace(name, RelationOrigin{r.name, signature});

            std::size_t i = r.arity();
            while (i > 0 && ++choice[i - 1] == candidates[i - 1].size()) {
                choice[i - 1] = 0;
                --i;
            }
            if (i == 0) break;
        }
    }
    return out;
}

std::vector<SortId> sort_function_for(const Refinement& r, const Instance& p, const Structure& h,
                                      const DomainAssignment& domains) {
    if (domains.unsatisfiable) throw PreconditionError("sort_function_for: the domains are unsatisfiable");
    const auto sorts = variable_sorts(p, h);
    std::vector<SortId> out;
    for (std::size_t v = 0; v < p.variable_count(); ++v) {
        auto d = domains.domains.at(v);
        std::sort(d.begin(), d.end());
        std::optional<SortId> found;
        for (std::size_t g = 0; g < r.xi.size() && !found; ++g) {
            if (r.base_sort[g] == sorts[v] && r.xi[g] == d) found = SortId{g};
        }
        if (!found) {
            throw PreconditionError("no refined sort matches the domain of variable '" + p.variables()[v].name + "'");
        }
        out.push_back(*found);
    }
    return out;
}

Instance refine_instance(const Instance& p, const Structure& h, const Refinement& r,
                         std::span<const SortId> sort_function) {
    require_valid(p, h);
    const auto sorts = variable_sorts(p, h);
    if (sort_function.size() != p.variable_count()) {
        throw PreconditionError("refine_instance: one refined sort per variable required");
    }
    Instance out;
    for (std::size_t v = 0; v < p.variable_count(); ++v) {
        const auto g = sort_function[v];
        if (g.value >= r.xi.size() || r.base_sort[g.value] != sorts[v]) {
            throw PreconditionError("refined sort of variable '" + p.variables()[v].name +
                                    "' does not map into its sort");
        }
        out.add_variable(p.variables()[v].name, r.structure.sort(g).name);
    }
    for (const auto& c : p.constraints()) {
        if (c.relation == kEquality) {
            if (sort_function[c.scope[0]] != sort_function[c.scope[1]]) {
                throw PreconditionError("equal variables '" + p.variables()[c.scope[0]].name + "' and '" +
                                        p.variables()[c.scope[1]].name + "' have different refined sorts");
            }
            out.add_constraint(c.scope, c.relation);
            continue;
        }
        const auto& rel = h.relation(c.relation);
        std::vector<SortId> signature;
        for (std::size_t i = 0; i < c.scope.size(); ++i) {
            const auto g = sort_function[c.scope[i]];
            const auto proj = column(rel.tuples, i);
            const auto& image = r.xi[g.value];
            if (!std::all_of(image.begin(), image.end(), [&](Element a) { return contains_sorted(proj, a); })) {
                throw PreconditionError("refined domain of variable '" + p.variables()[c.scope[i]].name +
                                        "' is not inside the projection of '" + c.relation + "'");
            }
            signature.push_back(g);
        }
        const auto name = refined_relation_name(r.structure, c.relation, signature);
        if (r.structure.find_relation(name) == nullptr) {
            throw PreconditionError("the refinement has no relation '" + name + "'");
        }
        out.add_constraint(c.scope, name);
    }
    return out;
}

std::optional<Assignment> lift_assignment(const Refinement& r, std::span<const SortId> sort_function,
                                          const Assignment& phi) {
    Assignment out(phi.size());
    for (std::size_t v = 0; v < phi.size(); ++v) {
        const auto pre = r.preimage(sort_function[v], phi[v]);
        if (!pre) return std::nullopt;
        out[v] = *pre;
    }
    return out;
}

DomainFamily domain_family(const Instance& p, const Structure& h, const DomainAssignment& domains) {
    if (domains.unsatisfiable) throw PreconditionError("domain_family: the domains are unsatisfiable");
    const auto sorts = variable_sorts(p, h);
    DomainFamily out;
    for (std::size_t v = 0; v < p.variable_count(); ++v) {
        auto d = domains.domains.at(v);
        std::sort(d.begin(), d.end());
        const auto it = std::find_if(out.members.begin(), out.members.end(),
                                     [&](const RefinedDomain& m) { return m.sort == sorts[v] && m.elements == d; });
        if (it != out.members.end()) {
            out.member_of.push_back(static_cast<std::size_t>(it - out.members.begin()));
        } else {
            out.member_of.push_back(out.members.size());
            out.members.push_back({"D" + std::to_string(out.members.size()), sorts[v], std::move(d)});
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// The T_p family
// ---------------------------------------------------------------------------

std::optional<TpShape> recognize_tp(const Structure& h, std::uint64_t p) {
    if (!is_prime(p) || h.sort_count() != 1 || h.sort_size(SortId{0}) != p + 2 || !has_all_constants(h)) {
        return std::nullopt;
    }
    const Relation* r = nullptr;
    for (const auto& rel : h.relations()) {
        if (parse_constant_name(h, rel.name)) continue;
        if (r != nullptr) return std::nullopt;
        r = &rel;
    }
    if (r == nullptr || r->arity() != 2) return std::nullopt;
    const auto n = static_cast<Element>(p + 2);
    std::vector<Tuple> missing;
    for (Element x = 0; x < n; ++x) {
        for (Element y = 0; y < n; ++y) {
            if (!r->contains(Tuple{x, y})) missing.push_back({x, y});
        }
    }
    if (missing.size() != p) return std::nullopt;
    TpShape shape{p, r->name, {}, missing.front()[1], 0};
    for (const auto& t : missing) {
        if (t[1] != shape.top || t[0] == shape.top) return std::nullopt;
        shape.low.push_back(t[0]);
    }
    for (Element x = 0; x < n; ++x) {
        if (x != shape.top && !contains_sorted(shape.low, x)) shape.free = x;
    }
    return shape;
}

std::vector<RefinedDomain> tp_star_family(const Structure& h, std::uint64_t p) {
    const auto shape = recognize_tp(h, p);
    if (!shape) throw PreconditionError("tp_star_family: the structure is not T_" + std::to_string(p));
    const SortId s{0};
    const auto n = static_cast<Element>(p + 2);
    std::vector<RefinedDomain> family;
    family.push_back({"G-1", s, full_sort(h, s)});
    for (Element a = 0; a < n; ++a) family.push_back({"G" + std::to_string(a), s, {a}});
    family.push_back({"G" + std::to_string(p + 2), s, {shape->top, shape->free}});
    auto without_top = full_sort(h, s);
    std::erase(without_top, shape->top);
    family.push_back({"G" + std::to_string(p + 3), s, std::move(without_top)});
    return family;
}

TpSolution solve_tp(const Instance& p, const Structure& h, std::uint64_t prime) {
    const auto shape = recognize_tp(h, prime);
    if (!shape) throw PreconditionError("solve_tp: the structure is not T_" + std::to_string(prime));
    require_valid(p, h);

    TpSolution out;
    auto merged = eliminate_equality(p, h);
    Instance current = std::move(merged.instance);
    Structure current_h = h;
    DomainAssignment domains;
    for (std::size_t v = 0; v < current.variable_count(); ++v) domains.domains.push_back(full_sort(h, SortId{0}));

    while (true) {
        ++out.rounds;
        // Step 1: arc-consistency.
        auto ac = arc_consistency(current, current_h, &domains);
        if (ac.domains.unsatisfiable) {
            out.unsatisfiable = true;
            return out;
        }
        // Step 2: drop variables with a single value.
        auto reduced = eliminate_singletons(current, current_h, ac.domains);
        if (reduced.unsatisfiable) {
            out.unsatisfiable = true;
            return out;
        }
        DomainAssignment next;
        for (std::size_t v = 0; v < current.variable_count(); ++v) {
            if (reduced.index[v]) next.domains.push_back(ac.domains.domains[v]);
        }
        current = std::move(reduced.instance);
        current_h = std::move(reduced.structure);
        domains = std::move(next);

        // Step 3: the values 0..p-1 of a remaining variable are
        // interchangeable, so they contribute a multiple of p.
        bool changed = false;
        for (auto& d : domains.domains) {
            const auto low = static_cast<std::size_t>(
                std::count_if(d.begin(), d.end(), [&](Element a) { return contains_sorted(shape->low, a); }));
            if (low == 0) continue;
            if (low != prime) throw Error("solve_tp: a domain meets only part of {0..p-1}");
            std::erase_if(d, [&](Element a) { return contains_sorted(shape->low, a); });
            changed = true;
        }
        if (!changed) break;
    }

    // Step 4: every domain is {p, p+1} and every constraint is full on it.
    for (const auto& d : domains.domains) {
        if (d != std::vector<Element>{std::min(shape->top, shape->free), std::max(shape->top, shape->free)}) {
            throw Error("solve_tp: a remaining domain differs from {p, p+1}");
        }
    }
    for (const auto& c : current.constraints()) {
        const auto& rel = current_h.relation(c.relation);
        std::size_t full = 1;
        for (std::size_t i = 0; i < c.scope.size(); ++i) full *= 2;
        const auto inside = std::count_if(rel.tuples.begin(), rel.tuples.end(), [&](const Tuple& t) {
            return std::all_of(t.begin(), t.end(), [&](Element a) { return a == shape->top || a == shape->free; });
        });
        if (static_cast<std::size_t>(inside) != full) throw Error("solve_tp: a remaining constraint is not full");
    }
    out.remaining = current.variable_count();
    out.residue = power_mod(2, out.remaining, prime);
    return out;
}

// ---------------------------------------------------------------------------
// Refine, reduce, count
// ---------------------------------------------------------------------------

std::string_view to_string(CountMethod m) {
    switch (m) {
        case CountMethod::Unsatisfiable: return "unsatisfiable";
        case CountMethod::Product: return "product";
        case CountMethod::Fallback: return "fallback";
    }
    return "unknown";
}

RefineReduceResult refine_and_reduce(const Instance& p, const Structure& h, std::uint64_t prime,
                                     const DecisionSolver& solver) {
    require_prime(prime);
    if (!has_all_constants(h)) {
        throw PreconditionError("refine_and_reduce: the structure must contain every constant relation");
    }
    const auto merged = eliminate_equality(p, h);
    const Instance& q = merged.instance;

    RefineReduceResult out;
    out.domains = solver_based_domains(q, h, solver);
    if (out.domains.unsatisfiable) {
        out.method = CountMethod::Unsatisfiable;
        out.residue = 0;
        return out;
    }
    const auto family = domain_family(q, h, out.domains);
    out.refinement = build_refinement(h, family.members);
    for (const auto m : family.member_of) out.sort_function.push_back(SortId{m});
    out.refined = refine_instance(q, h, out.refinement, out.sort_function);

    auto trace = p_reduce(out.refinement.structure, prime);
    out.reduction_steps = trace.steps.size();
    out.reduced = std::move(trace.result);

    // Product shortcut: every used relation is the product of its
    // projections, so the instance splits into unary constraints.
    const auto& g = out.reduced;
    bool product = true;
    std::vector<std::vector<Element>> allowed;
    for (const auto s : out.sort_function) allowed.push_back(full_sort(g, s));
    for (const auto& c : out.refined.constraints()) {
        const auto& rel = g.relation(c.relation);
        std::size_t expected = 1;
        for (std::size_t i = 0; i < rel.arity(); ++i) {
            const auto proj = column(rel.tuples, i);
            expected *= proj.size();
            auto& a = allowed[c.scope[i]];
            std::erase_if(a, [&](Element e) { return !contains_sorted(proj, e); });
        }
        if (rel.tuples.size() != expected) {
            product = false;
            break;
        }
    }
    if (product) {
        std::uint64_t r = 1 % prime;
        for (const auto& a : allowed) r = r * (a.size() % prime) % prime;
        out.residue = r;
        out.method = CountMethod::Product;
    } else {
        out.residue = count_solutions_mod(out.refined, g, prime);
        out.method = CountMethod::Fallback;
    }
    return out;
}

}  // namespace modcsp
