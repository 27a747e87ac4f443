// SPDX-License-Identifier: Apache-2.0
/**
 * @file parity.cpp
 * @brief Frame operations (intersection with a constraint, fixing,
 *        projection) and the parity recursion through PAR-R and tilde-R.
 *
 * Intersection works coordinate by coordinate.  At coordinate l the new
 * witnesses of the earlier coordinates generate every prefix of the new
 * relation, so closing their l-th entries under φ reaches a value of every
 * new class.  From one witness t with prefix p, the other members c of the
 * old class of t_l give candidates φ(t, ω(l,t_l), ω(l,c)) with the same
 * prefix; a candidate that violates the constraint is repaired (or refuted)
 * by a bounded search over the relation with the prefix fixed.
 */
#include <algorithm>
#include <cassert>
#include <functional>
#include <map>

#include "modcsp/parity.hpp"

namespace modcsp {
namespace {

/// One constraint restricting a relation: a test on the entries at `scope`.
struct Restriction {
    std::vector<std::size_t> scope;
    std::function<bool(std::span<const Element>)> test;
    std::size_t last{};  ///< largest coordinate of the scope

    [[nodiscard]] bool accepts(const Tuple& t) const {
        Tuple values;
        values.reserve(scope.size());
        for (const auto q : scope) values.push_back(t[q]);
        return test(values);
    }
};

Restriction make_restriction(std::vector<std::size_t> scope, std::function<bool(std::span<const Element>)> test) {
    Restriction c{std::move(scope), std::move(test), 0};
    c.last = *std::max_element(c.scope.begin(), c.scope.end());
    return c;
}

/// Intersects the relation of a witness function with one restriction.
class Intersector {
public:
    Intersector(const ParityContext& ctx, const WitnessFunction& old) : ctx_(ctx), old_(old) {}

    WitnessFunction run(const Restriction& c) const {
        const std::size_t n = old_.arity();
        WitnessFunction out;
        out.sorts = old_.sorts;
        out.table.resize(n);
        out.frame.classes.resize(n);
        for (std::size_t i = 0; i < n; ++i) out.table[i].resize(old_.table[i].size());
        if (n == 0 || old_.empty()) return out;

        for (std::size_t l = 0; l < n; ++l) {
            const std::size_t m = old_.table[l].size();
            std::vector<std::optional<Tuple>> reached;
            if (l == 0) {
                auto u = search(c, Tuple{}, 0);
                if (!u) return blank(out);
                reached.resize(m);
                const Element v = (*u)[0];
                reached[v] = std::move(u);
            } else {
                std::vector<const Tuple*> seeds;
                std::vector<bool> seen(m, false);
                for (std::size_t k = 0; k < l; ++k) {
                    for (const auto& t : out.table[k]) {
                        if (t && !seen[(*t)[l]]) {
                            seen[(*t)[l]] = true;
                            seeds.push_back(&*t);
                        }
                    }
                }
                reached = close_at(l, seeds);
            }
            std::vector<bool> assigned(m, false);
            for (Element v = 0; v < m; ++v) {
                if (!reached[v] || assigned[v]) continue;
                const Tuple& t = *reached[v];
                const auto k = old_.class_of(l, v);
                assert(k.has_value());
                std::vector<Element> cls;
                for (const auto x : old_.frame.classes[l][*k]) {
                    if (assigned[x]) continue;
                    std::optional<Tuple> wx;
                    if (x == v) {
                        wx = t;
                    } else {
                        Tuple cand = phi(t, *old_(l, v), *old_(l, x));
                        if (c.accepts(cand)) {
                            wx = std::move(cand);
                        } else if (l < c.last) {
                            wx = search(c, cand, l + 1);
                        }
                    }
                    if (wx) {
                        out.table[l][x] = std::move(wx);
                        assigned[x] = true;
                        cls.push_back(x);
                    }
                }
                std::sort(cls.begin(), cls.end());
                out.frame.classes[l].push_back(std::move(cls));
            }
            std::sort(out.frame.classes[l].begin(), out.frame.classes[l].end());
        }
        return out;
    }

private:
    [[nodiscard]] Tuple phi(const Tuple& x, const Tuple& y, const Tuple& z) const {
        return ctx_.apply(old_.sorts, x, y, z);
    }

    static WitnessFunction blank(WitnessFunction w) {
        for (auto& row : w.table) std::fill(row.begin(), row.end(), std::nullopt);
        for (auto& cls : w.frame.classes) cls.clear();
        return w;
    }

    /// For every value in the φ-closure of the seeds' l-th entries, a tuple
    /// of the closure of the seeds having that entry.
    [[nodiscard]] std::vector<std::optional<Tuple>> close_at(std::size_t l, std::span<const Tuple* const> seeds) const {
        const SortId s = old_.sorts[l];
        std::vector<std::optional<Tuple>> reached(old_.table[l].size());
        std::vector<Element> order;
        for (const auto* t : seeds) {
            if (!reached[(*t)[l]]) {
                reached[(*t)[l]] = *t;
                order.push_back((*t)[l]);
            }
        }
        auto add = [&](Element x, Element y, Element z) {
            const Element v = ctx_.apply(s, x, y, z);
            if (!reached[v]) {
                reached[v] = phi(*reached[x], *reached[y], *reached[z]);
                order.push_back(v);
            }
        };
        for (std::size_t idx = 0; idx < order.size(); ++idx) {
            for (std::size_t a = 0; a <= idx; ++a) {
                for (std::size_t b = 0; b <= idx; ++b) {
                    const Element e = order[idx];
                    const Element x = order[a];
                    const Element y = order[b];
                    add(e, x, y);
                    add(x, e, y);
                    add(x, y, e);
                }
            }
        }
        return reached;
    }

    /// A tuple of the old relation agreeing with `t` on [0,len) that the
    /// restriction accepts, if any.
    [[nodiscard]] std::optional<Tuple> search(const Restriction& c, const Tuple& t, std::size_t len) const {
        if (c.last < len) return c.accepts(t) ? std::optional<Tuple>(t) : std::nullopt;
        // Generators of the prefix-fixed relation, projected onto [0, c.last].
        std::vector<Tuple> gens;
        if (len == 0) {
            for (std::size_t k = 0; k <= c.last; ++k) {
                for (const auto& w : old_.table[k]) {
                    if (w) gens.push_back(*w);
                }
            }
        } else {
            gens.push_back(t);
            for (std::size_t k = len; k <= c.last; ++k) {
                std::vector<const Tuple*> seeds;
                seeds.reserve(gens.size());
                for (const auto& g : gens) seeds.push_back(&g);
                const auto reached = close_at(k, seeds);
                std::vector<bool> done(old_.frame.classes[k].size(), false);
                std::vector<Tuple> added;
                for (Element v = 0; v < reached.size(); ++v) {
                    if (!reached[v]) continue;
                    const auto cls = old_.class_of(k, v);
                    assert(cls.has_value());
                    if (done[*cls]) continue;
                    done[*cls] = true;
                    for (const auto x : old_.frame.classes[k][*cls]) {
                        added.push_back(x == v ? *reached[v] : phi(*reached[v], *old_(k, v), *old_(k, x)));
                    }
                }
                for (auto& a : added) gens.push_back(std::move(a));
            }
        }
        return close_scope(c, gens);
    }

    /// Closes the projections of `gens` onto the scope under φ and returns a
    /// full tuple whose projection the restriction accepts.
    [[nodiscard]] std::optional<Tuple> close_scope(const Restriction& c, std::span<const Tuple> gens) const {
        std::map<Tuple, Tuple> found;
        std::vector<const Tuple*> keys;  // insertion order, pointing into `found`
        auto key_of = [&](const Tuple& t) {
            Tuple k;
            k.reserve(c.scope.size());
            for (const auto q : c.scope) k.push_back(t[q]);
            return k;
        };
        std::optional<Tuple> hit;
        auto insert = [&](const Tuple& full) {
            auto [it, fresh] = found.emplace(key_of(full), full);
            if (!fresh) return;
            keys.push_back(&it->first);
            if (c.test(it->first)) hit = full;
        };
        for (const auto& g : gens) {
            insert(g);
            if (hit) return hit;
        }
        Tuple k(c.scope.size());
        for (std::size_t idx = 0; idx < keys.size(); ++idx) {
            for (std::size_t a = 0; a <= idx; ++a) {
                for (std::size_t b = 0; b <= idx; ++b) {
                    const Tuple* e = keys[idx];
                    const Tuple* x = keys[a];
                    const Tuple* y = keys[b];
                    for (const auto& [p, q, r] : {std::tuple{e, x, y}, std::tuple{x, e, y}, std::tuple{x, y, e}}) {
                        for (std::size_t j = 0; j < c.scope.size(); ++j) {
                            k[j] = ctx_.apply(old_.sorts[c.scope[j]], (*p)[j], (*q)[j], (*r)[j]);
                        }
                        if (found.contains(k)) continue;
                        insert(phi(found.at(*p), found.at(*q), found.at(*r)));
                        if (hit) return hit;
                    }
                }
            }
        }
        return std::nullopt;
    }

    const ParityContext& ctx_;
    const WitnessFunction& old_;
};

WitnessFunction restrict_frame(const ParityContext& ctx, const WitnessFunction& w, const Restriction& c) {
    return Intersector(ctx, w).run(c);
}

}  // namespace

// ---------------------------------------------------------------------------
// Construction and frame operations
// ---------------------------------------------------------------------------

WitnessFunction build_witness_function(const ParityContext& ctx, const Instance& p, FrameObserver* observer) {
    const Structure& h = ctx.structure();
    require_valid(p, h);
    const auto sorts = variable_sorts(p, h);
    WitnessFunction w = full_witness_function(h, sorts);
    for (const auto& con : p.constraints()) {
        if (w.empty()) break;
        if (con.scope.empty()) continue;
        if (con.relation == kEquality) {
            w = restrict_frame(ctx, w, make_restriction(con.scope, [](std::span<const Element> v) {
                                   return v[0] == v[1];
                               }));
        } else {
            const Relation* r = &h.relation(con.relation);
            w = restrict_frame(ctx, w, make_restriction(con.scope, [r](std::span<const Element> v) {
                                   return r->contains(v);
                               }));
        }
    }
    if (observer) observer->on_build(p, w);
    return w;
}

WitnessFunction fix_coordinate(const ParityContext& ctx, const WitnessFunction& w, std::size_t s, Element a,
                               FrameObserver* observer) {
    if (s >= w.arity()) throw PreconditionError("fix_coordinate: coordinate out of range");
    if (a >= w.table[s].size()) throw PreconditionError("fix_coordinate: element out of range");
    WitnessFunction out = restrict_frame(ctx, w, make_restriction({s}, [a](std::span<const Element> v) {
                                             return v[0] == a;
                                         }));
    if (observer) observer->on_fix(w, s, a, out);
    return out;
}

WitnessFunction fix_coordinates(const ParityContext& ctx, const WitnessFunction& w,
                                std::span<const std::size_t> coordinates, std::span<const Element> values,
                                FrameObserver* observer) {
    if (coordinates.size() != values.size()) {
        throw PreconditionError("fix_coordinates: coordinates and values differ in length");
    }
    WitnessFunction out = w;
    for (std::size_t j = 0; j < coordinates.size(); ++j) out = fix_coordinate(ctx, out, coordinates[j], values[j], observer);
    return out;
}

WitnessFunction project_last(const WitnessFunction& w, FrameObserver* observer) {
    if (w.arity() < 2) throw PreconditionError("project_last: the relation must have arity at least 2");
    WitnessFunction out;
    const std::size_t n = w.arity() - 1;
    out.sorts.assign(w.sorts.begin(), w.sorts.begin() + static_cast<std::ptrdiff_t>(n));
    out.table.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out.table[i].resize(w.table[i].size());
        for (std::size_t a = 0; a < w.table[i].size(); ++a) {
            if (const auto& t = w.table[i][a]) out.table[i][a] = Tuple(t->begin(), t->end() - 1);
        }
    }
    out.frame.classes.assign(w.frame.classes.begin(), w.frame.classes.begin() + static_cast<std::ptrdiff_t>(n));
    if (observer) observer->on_project(w, out);
    return out;
}

std::optional<Tuple> check_epsilon_class(const ParityContext& ctx, const WitnessFunction& w, const Tuple& x,
                                         Element a, Element b, std::size_t k, FrameObserver* observer) {
    const std::size_t n = w.arity();
    if (x.size() != n || k >= n) throw PreconditionError("check_epsilon_class: tuple or coordinate out of range");
    assert(x[k] == a);
    (void)a;
    std::vector<std::size_t> coordinates(k + 1);
    std::vector<Element> values(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(k));
    values.push_back(b);
    for (std::size_t i = 0; i <= k; ++i) coordinates[i] = i;
    const auto s = fix_coordinates(ctx, w, coordinates, values, observer);
    for (const auto& cls : s.frame.classes[n - 1]) {
        if (cls.size() % 2 == 1) return s(n - 1, cls.front());
    }
    return std::nullopt;
}

TildeDerivation derive_tilde_witness(const ParityContext& ctx, const WitnessFunction& w, FrameObserver* observer) {
    const std::size_t n = w.arity();
    if (n < 2) throw PreconditionError("derive_tilde_witness: the relation must have arity at least 2");
    WitnessFunction par;
    par.sorts = w.sorts;
    par.table.resize(n);
    par.frame.classes.resize(n);
    for (std::size_t i = 0; i < n; ++i) par.table[i].resize(w.table[i].size());

    if (!w.empty()) {
        // Last coordinate: exactly the values of odd classes survive, with
        // their old witnesses.
        for (const auto& cls : w.frame.classes[n - 1]) {
            if (cls.size() % 2 == 0) continue;
            for (const auto a : cls) par.table[n - 1][a] = w(n - 1, a);
            par.frame.classes[n - 1].push_back(cls);
        }
        // Earlier coordinates: a value survives when fixing it leaves an odd
        // last-coordinate class; the rest of its class is discovered by
        // check_epsilon_class from its witness.
        for (std::size_t k = 0; k + 1 < n; ++k) {
            const std::size_t m = w.table[k].size();
            std::vector<bool> pending(m, true);
            for (Element a = 0; a < m; ++a) {
                if (!pending[a]) continue;
                pending[a] = false;
                if (!w(k, a)) continue;
                const auto fixed = fix_coordinate(ctx, w, k, a, observer);
                const auto odd = std::find_if(fixed.frame.classes[n - 1].begin(), fixed.frame.classes[n - 1].end(),
                                              [](const auto& c) { return c.size() % 2 == 1; });
                if (odd == fixed.frame.classes[n - 1].end()) continue;
                const Tuple xa = *fixed(n - 1, odd->front());
                par.table[k][a] = xa;
                std::vector<Element> cls{a};
                for (Element c = a + 1; c < m; ++c) {
                    if (!pending[c] || !w(k, c)) continue;
                    if (auto y = check_epsilon_class(ctx, w, xa, a, c, k, observer)) {
                        par.table[k][c] = std::move(y);
                        pending[c] = false;
                        cls.push_back(c);
                    }
                }
                par.frame.classes[k].push_back(std::move(cls));
            }
        }
    }
    // The derivation event validates PAR-R and tilde-R against their
    // definitions, so the projection itself is not reported separately.
    auto tilde = project_last(par);
    if (observer) observer->on_derive(w, par, tilde);
    return {std::move(par), std::move(tilde)};
}

std::uint64_t calculate_size(const ParityContext& ctx, const WitnessFunction& w, FrameObserver* observer) {
    if (w.arity() == 0) throw PreconditionError("calculate_size: the relation must have arity at least 1");
    WitnessFunction current = w;
    while (true) {
        const std::size_t n = current.arity();
        if (n == 1) {
            const auto count = std::count_if(current.table[0].begin(), current.table[0].end(),
                                             [](const auto& t) { return t.has_value(); });
            return static_cast<std::uint64_t>(count) % 2;
        }
        const auto& last = current.frame.classes[n - 1];
        if (std::all_of(last.begin(), last.end(), [](const auto& c) { return c.size() % 2 == 0; })) return 0;
        current = derive_tilde_witness(ctx, current, observer).tilde;
    }
}

std::uint64_t parity_count(const ParityContext& ctx, const Instance& p, FrameObserver* observer) {
    require_valid(p, ctx.structure());
    if (p.variable_count() == 0) return 1;
    const auto w = build_witness_function(ctx, p, observer);
    return calculate_size(ctx, w, observer);
}

}  // namespace modcsp
