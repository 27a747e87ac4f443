// SPDX-License-Identifier: Apache-2.0
/**
 * @file gadget.cpp
 * @brief Obstruction and gadget search, K_R, exhaustive protection checks
 *        and the bipartite-instance translation.
 */
#include "modcsp/gadget.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <set>

#include "modcsp/automorphism.hpp"
#include "modcsp/properties.hpp"

namespace modcsp {
namespace {

void require_split(const Relation& r, std::size_t split) {
    if (split < 1 || split >= r.arity()) {
        throw PreconditionError("split " + std::to_string(split) + " is not between 1 and arity-1 of '" + r.name + "'");
    }
}

Tuple prefix(const Tuple& t, std::size_t split) { return {t.begin(), t.begin() + static_cast<std::ptrdiff_t>(split)}; }
Tuple suffix(const Tuple& t, std::size_t split) { return {t.begin() + static_cast<std::ptrdiff_t>(split), t.end()}; }

Tuple concat(const Tuple& a, const Tuple& b) {
    Tuple t = a;
    t.insert(t.end(), b.begin(), b.end());
    return t;
}

/// Sorted distinct prefixes and suffixes of R.
std::pair<std::vector<Tuple>, std::vector<Tuple>> sides(const Relation& r, std::size_t split) {
    std::vector<Tuple> left;
    std::vector<Tuple> right;
    for (const auto& t : r.tuples) {
        left.push_back(prefix(t, split));
        right.push_back(suffix(t, split));
    }
    canonicalize(left);
    canonicalize(right);
    return {std::move(left), std::move(right)};
}

std::size_t index_of(const std::vector<Tuple>& sorted, const Tuple& t) {
    return static_cast<std::size_t>(std::lower_bound(sorted.begin(), sorted.end(), t) - sorted.begin());
}

std::string tuple_text(const Tuple& t) {
    std::string s;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (i > 0) s += ',';
        s += std::to_string(t[i]);
    }
    return s;
}

/// Exhaustive search over reduction sequences.  `current` is the carrier
/// after some reductions and `original[s]` the original index of each of
/// its elements; `survives` decides whether S still meets the carrier.
bool protected_from(const Structure& current, const std::vector<std::vector<Element>>& original, std::uint64_t p,
                    const std::function<bool(const std::vector<std::vector<Element>>&)>& survives,
                    std::set<std::vector<std::vector<Element>>>& seen) {
    for (const auto& a : enumerate_automorphisms(current)) {
        if (!has_order_p(a.map, p)) continue;
        const auto fixed = fixed_points(a.map);
        std::vector<std::vector<Element>> next(original.size());
        for (std::size_t s = 0; s < original.size(); ++s) {
            for (const auto e : fixed[s]) next[s].push_back(original[s][e]);
        }
        if (!survives(next)) return false;
        if (!seen.insert(next).second) continue;
        if (!protected_from(induced_substructure(current, fixed), next, p, survives, seen)) return false;
    }
    return true;
}

bool protected_by(const Structure& carrier, std::uint64_t p,
                  const std::function<bool(const std::vector<std::vector<Element>>&)>& survives) {
    enforce_guard("protection carrier elements", carrier.universe_size(), 8);
    std::vector<std::vector<Element>> all(carrier.sort_count());
    for (std::size_t s = 0; s < carrier.sort_count(); ++s) {
        for (Element e = 0; e < carrier.sort_size(SortId{s}); ++e) all[s].push_back(e);
    }
    if (!survives(all)) return false;
    std::set<std::vector<std::vector<Element>>> seen{all};
    return protected_from(carrier, all, p, survives, seen);
}

bool contains_sorted(const std::vector<Element>& v, Element e) { return std::binary_search(v.begin(), v.end(), e); }

}  // namespace

// ---------------------------------------------------------------------------
// Obstructions and gadgets
// ---------------------------------------------------------------------------

std::optional<Obstruction> find_rect_obstruction(const Relation& r, std::size_t split) {
    require_split(r, split);
    std::vector<std::size_t> left(split);
    for (std::size_t i = 0; i < split; ++i) left[i] = i;
    const auto w = rectangularity_witness(r, left);
    if (!w) return std::nullopt;
    return Obstruction{r, split, w->a, w->b, w->c, w->d};
}

std::vector<std::string> gadget_violations(const StandardGadget& g) {
    std::vector<std::string> out;
    const auto& r = g.relation;
    if (g.split < 1 || g.split >= r.arity()) {
        out.push_back("split is not between 1 and arity-1");
        return out;
    }
    const auto [left, right] = sides(r, g.split);
    const auto& b = g.blocks;
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            const std::string name = "A_{" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "}";
            if (b[i][j].empty()) out.push_back(name + " is empty");
            const auto& side = i == 0 ? left : right;
            for (const auto& t : b[i][j]) {
                if (!std::binary_search(side.begin(), side.end(), t)) {
                    out.push_back(name + " contains (" + tuple_text(t) + ") outside the projection");
                }
            }
        }
        std::vector<Tuple> joined = b[i][0];
        joined.insert(joined.end(), b[i][1].begin(), b[i][1].end());
        const auto count = joined.size();
        canonicalize(joined);
        if (joined.size() != count) out.push_back("the blocks of side " + std::to_string(i + 1) + " overlap");
        if (joined != (i == 0 ? left : right)) {
            out.push_back("the blocks of side " + std::to_string(i + 1) + " do not cover the projection");
        }
    }
    auto inside = [&](std::size_t i, std::size_t j) {
        for (const auto& x : b[0][i]) {
            for (const auto& y : b[1][j]) {
                if (!r.contains(concat(x, y))) return false;
            }
        }
        return true;
    };
    auto disjoint = [&](std::size_t i, std::size_t j) {
        for (const auto& x : b[0][i]) {
            for (const auto& y : b[1][j]) {
                if (r.contains(concat(x, y))) return false;
            }
        }
        return true;
    };
    if (!inside(0, 1)) out.push_back("A_{1,1} x A_{2,2} is not inside R");
    if (!inside(1, 0)) out.push_back("A_{1,2} x A_{2,1} is not inside R");
    if (!inside(1, 1)) out.push_back("A_{1,2} x A_{2,2} is not inside R");
    if (!disjoint(0, 0)) out.push_back("A_{1,1} x A_{2,1} meets R");
    return out;
}

std::optional<StandardGadget> find_standard_gadget(const Relation& r, std::size_t split, std::string provenance) {
    require_split(r, split);
    const auto [left, right] = sides(r, split);
    std::vector<std::vector<std::size_t>> neighbours(left.size());
    for (const auto& t : r.tuples) {
        neighbours[index_of(left, prefix(t, split))].push_back(index_of(right, suffix(t, split)));
    }
    StandardGadget g{r, split, {}, std::move(provenance)};
    std::optional<std::vector<std::size_t>> common;
    for (std::size_t x = 0; x < left.size(); ++x) {
        if (neighbours[x].size() == right.size()) {
            g.blocks[0][1].push_back(left[x]);
            continue;
        }
        if (common && *common != neighbours[x]) return std::nullopt;
        common = neighbours[x];
        g.blocks[0][0].push_back(left[x]);
    }
    if (!common || g.blocks[0][1].empty()) return std::nullopt;
    for (std::size_t y = 0; y < right.size(); ++y) {
        g.blocks[1][std::binary_search(common->begin(), common->end(), y) ? 1 : 0].push_back(right[y]);
    }
    if (!gadget_violations(g).empty()) return std::nullopt;
    return g;
}

std::optional<StandardGadget> find_standard_gadget(const Relation& r, std::string provenance) {
    if (r.arity() < 2) throw PreconditionError("a gadget relation needs arity at least 2");
    for (std::size_t s = 1; s < r.arity(); ++s) {
        if (auto g = find_standard_gadget(r, s, provenance)) return g;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// K_R
// ---------------------------------------------------------------------------

std::vector<std::size_t> BipartiteGraph::neighbourhood(std::size_t side, std::size_t vertex) const {
    std::vector<std::size_t> out;
    for (const auto& [u, v] : edges) {
        if (side == 0 && u == vertex) out.push_back(v);
        if (side == 1 && v == vertex) out.push_back(u);
    }
    std::sort(out.begin(), out.end());
    return out;
}

Structure BipartiteGraph::as_structure() const {
    Structure k;
    std::vector<std::string> l;
    std::vector<std::string> r;
    for (const auto& t : left) l.push_back("u1_" + tuple_text(t));
    for (const auto& t : right) r.push_back("u2_" + tuple_text(t));
    const auto ls = k.add_sort("L", std::move(l));
    const auto rs = k.add_sort("R", std::move(r));
    std::vector<Tuple> e;
    for (const auto& [u, v] : edges) e.push_back({static_cast<Element>(u), static_cast<Element>(v)});
    k.add_relation("E", {ls, rs}, std::move(e));
    return k;
}

BipartiteGraph build_kr(const StandardGadget& g) {
    const auto problems = gadget_violations(g);
    if (!problems.empty()) throw PreconditionError("build_kr: invalid gadget: " + problems.front());
    BipartiteGraph k;
    std::tie(k.left, k.right) = sides(g.relation, g.split);
    for (const auto& t : g.relation.tuples) {
        k.edges.emplace_back(index_of(k.left, prefix(t, g.split)), index_of(k.right, suffix(t, g.split)));
    }
    std::sort(k.edges.begin(), k.edges.end());
    for (std::size_t i = 0; i < 2; ++i) {
        const auto& side = i == 0 ? k.left : k.right;
        for (std::size_t j = 0; j < 2; ++j) {
            for (const auto& t : g.blocks[i][j]) k.blocks[i][j].push_back(index_of(side, t));
            std::sort(k.blocks[i][j].begin(), k.blocks[i][j].end());
        }
    }
    return k;
}

Structure bipartite_from_graph(std::size_t n, std::span<const std::pair<std::size_t, std::size_t>> edges) {
    std::vector<std::vector<std::size_t>> adj(n);
    for (const auto& [u, v] : edges) {
        if (u >= n || v >= n) throw PreconditionError("bipartite_from_graph: edge endpoint out of range");
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    std::vector<int> colour(n, -1);
    for (std::size_t start = 0; start < n; ++start) {
        if (colour[start] != -1) continue;
        colour[start] = 0;
        std::deque<std::size_t> queue{start};
        while (!queue.empty()) {
            const auto u = queue.front();
            queue.pop_front();
            for (const auto v : adj[u]) {
                if (colour[v] == -1) {
                    colour[v] = 1 - colour[u];
                    queue.push_back(v);
                } else if (colour[v] == colour[u]) {
                    throw PreconditionError("bipartite_from_graph: the graph is not bipartite");
                }
            }
        }
    }
    std::vector<Element> position(n);
    std::array<std::vector<std::string>, 2> names;
    for (std::size_t v = 0; v < n; ++v) {
        auto& side = names[static_cast<std::size_t>(colour[v])];
        position[v] = static_cast<Element>(side.size());
        side.push_back(std::to_string(v));
    }
    Structure g;
    const auto ls = g.add_sort("L", names[0]);
    const auto rs = g.add_sort("R", names[1]);
    std::vector<Tuple> e;
    for (const auto& [u, v] : edges) {
        if (colour[u] == 0) e.push_back({position[u], position[v]});
        else e.push_back({position[v], position[u]});
    }
    g.add_relation("E", {ls, rs}, std::move(e));
    return g;
}

// ---------------------------------------------------------------------------
// Protection
// ---------------------------------------------------------------------------

bool is_p_protected(const Structure& carrier, std::string_view relation, std::span<const Tuple> s,
                    std::uint64_t p) {
    const auto& r = carrier.relation(relation);
    for (const auto& t : s) {
        if (!r.contains(t)) throw PreconditionError("is_p_protected: a tuple of S is not in '" + r.name + "'");
    }
    return protected_by(carrier, p, [&](const std::vector<std::vector<Element>>& alive) {
        return std::any_of(s.begin(), s.end(), [&](const Tuple& t) {
            for (std::size_t i = 0; i < t.size(); ++i) {
                if (!contains_sorted(alive[r.signature[i].value], t[i])) return false;
            }
            return true;
        });
    });
}

bool is_p_protected(const Structure& carrier, std::span<const Anchor> s, std::uint64_t p) {
    for (const auto& a : s) {
        if (a.sort.value >= carrier.sort_count() || a.element >= carrier.sort_size(a.sort)) {
            throw PreconditionError("is_p_protected: an element of S is outside the carrier");
        }
    }
    return protected_by(carrier, p, [&](const std::vector<std::vector<Element>>& alive) {
        return std::any_of(s.begin(), s.end(),
                           [&](const Anchor& a) { return contains_sorted(alive[a.sort.value], a.element); });
    });
}

std::string_view to_string(Protection mode) { return mode == Protection::Graph ? "graph" : "relation"; }

bool is_protected_gadget(const StandardGadget& g, const Structure& h, std::uint64_t p, Protection mode) {
    const auto problems = gadget_violations(g);
    if (!problems.empty()) throw PreconditionError("is_protected_gadget: invalid gadget: " + problems.front());
    static constexpr std::array<std::pair<std::size_t, std::size_t>, 3> kInside{{{0, 1}, {1, 0}, {1, 1}}};
    if (mode == Protection::Graph) {
        const auto k = build_kr(g);
        const auto carrier = k.as_structure();
        for (const auto& [i, j] : kInside) {
            std::vector<Tuple> block;
            for (const auto u : k.blocks[0][i]) {
                for (const auto v : k.blocks[1][j]) block.push_back({static_cast<Element>(u), static_cast<Element>(v)});
            }
            if (!is_p_protected(carrier, "E", block, p)) return false;
        }
        return true;
    }
    Structure carrier;
    for (const auto& s : h.sorts()) carrier.add_sort(s.name, s.elements);
    for (const auto s : g.relation.signature) {
        if (s.value >= carrier.sort_count()) throw PreconditionError("is_protected_gadget: relation sort outside h");
    }
    carrier.add_relation(g.relation.name, g.relation.signature, g.relation.tuples);
    for (const auto& [i, j] : kInside) {
        std::vector<Tuple> block;
        for (const auto& x : g.blocks[0][i]) {
            for (const auto& y : g.blocks[1][j]) block.push_back(concat(x, y));
        }
        if (!is_p_protected(carrier, g.relation.name, block, p)) return false;
    }
    return true;
}

std::array<std::array<std::size_t, 2>, 2> reduced_block_sizes(const BipartiteGraph& k, std::uint64_t p) {
    const auto trace = p_reduce(k.as_structure(), p);
    std::array<std::vector<Element>, 2> alive;
    for (std::size_t s = 0; s < 2; ++s) {
        const auto n = s == 0 ? k.left.size() : k.right.size();
        for (Element e = 0; e < n; ++e) alive[s].push_back(e);
    }
    for (const auto& step : trace.steps) {
        for (std::size_t s = 0; s < 2; ++s) {
            std::vector<Element> next;
            for (const auto e : step.fixed[s]) next.push_back(alive[s][e]);
            alive[s] = std::move(next);
        }
    }
    std::array<std::array<std::size_t, 2>, 2> out{};
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            out[i][j] = static_cast<std::size_t>(std::count_if(k.blocks[i][j].begin(), k.blocks[i][j].end(),
                                                               [&](std::size_t v) {
                                                                   return contains_sorted(alive[i], static_cast<Element>(v));
                                                               }));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Instance translation
// ---------------------------------------------------------------------------

GadgetInstance gadget_reduction(const Structure& g, const StandardGadget& gadget, const Structure& h) {
    const auto ls = g.find_sort("L");
    const auto rs = g.find_sort("R");
    const auto* e = g.find_relation("E");
    if (g.sort_count() != 2 || !ls || !rs || e == nullptr || g.relations().size() != 1 ||
        e->signature != std::vector<SortId>{*ls, *rs}) {
        throw PreconditionError("gadget_reduction: expected a bipartite instance with sorts L, R and edges E ⊆ L×R");
    }
    const auto problems = gadget_violations(gadget);
    if (!problems.empty()) throw PreconditionError("gadget_reduction: invalid gadget: " + problems.front());

    const auto& rel = gadget.relation;
    const std::size_t s = gadget.split;
    GadgetInstance out{h, {}};
    if (const auto* existing = h.find_relation(rel.name)) {
        if (existing->signature != rel.signature || existing->tuples != rel.tuples) {
            throw PreconditionError("gadget_reduction: '" + rel.name + "' differs from the gadget relation");
        }
    } else {
        out.structure.add_relation(rel.name, rel.signature, rel.tuples);
    }
    const auto [left, right] = sides(rel, s);
    const std::vector<SortId> left_sig(rel.signature.begin(), rel.signature.begin() + static_cast<std::ptrdiff_t>(s));
    const std::vector<SortId> right_sig(rel.signature.begin() + static_cast<std::ptrdiff_t>(s), rel.signature.end());
    const std::string left_name = rel.name + "|left";
    const std::string right_name = rel.name + "|right";
    out.structure.add_relation(left_name, left_sig, left, true);
    out.structure.add_relation(right_name, right_sig, right, true);

    auto make_vars = [&](SortId side, std::string_view prefix_name, const std::vector<SortId>& sig) {
        std::vector<std::vector<std::size_t>> vars(g.sort_size(side));
        for (Element u = 0; u < g.sort_size(side); ++u) {
            for (std::size_t i = 0; i < sig.size(); ++i) {
                vars[u].push_back(out.instance.add_variable(
                    std::string(prefix_name) + g.element_name(side, u) + "_" + std::to_string(i + 1),
                    h.sort(sig[i]).name));
            }
        }
        return vars;
    };
    const auto xs = make_vars(*ls, "x_", left_sig);
    const auto ys = make_vars(*rs, "y_", right_sig);

    std::vector<bool> used_left(xs.size(), false);
    std::vector<bool> used_right(ys.size(), false);
    for (const auto& t : e->tuples) {
        std::vector<std::size_t> scope = xs[t[0]];
        scope.insert(scope.end(), ys[t[1]].begin(), ys[t[1]].end());
        out.instance.add_constraint(std::move(scope), rel.name);
        used_left[t[0]] = used_right[t[1]] = true;
    }
    for (std::size_t u = 0; u < xs.size(); ++u) {
        if (!used_left[u]) out.instance.add_constraint(xs[u], left_name);
    }
    for (std::size_t v = 0; v < ys.size(); ++v) {
        if (!used_right[v]) out.instance.add_constraint(ys[v], right_name);
    }
    return out;
}

}  // namespace modcsp
