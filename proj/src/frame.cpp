// SPDX-License-Identifier: Apache-2.0
/**
 * @file frame.cpp
 * @brief Witness functions: the parity context, reference construction from
 *        explicit relations, enumeration through φ, and validation.
 */
#include <algorithm>
#include <array>
#include <numeric>
#include <set>

#include "modcsp/mpp.hpp"
#include "modcsp/oracle.hpp"
#include "modcsp/parity.hpp"

namespace modcsp {
namespace {

std::string tuple_text(const Tuple& t) {
    std::string s = "(";
    for (std::size_t j = 0; j < t.size(); ++j) s += (j ? "," : "") + std::to_string(t[j]);
    return s + ")";
}

std::string values_text(const std::vector<Element>& v) {
    std::string s = "{";
    for (std::size_t j = 0; j < v.size(); ++j) s += (j ? "," : "") + std::to_string(v[j]);
    return s + "}";
}

/// Name of the first relation of `h` that `phi` does not preserve.
std::optional<std::string> unpreserved_relation(const Operation& phi, const Structure& h) {
    Tuple image;
    for (const auto& r : h.relations()) {
        image.resize(r.arity());
        for (const auto& x : r.tuples) {
            for (const auto& y : r.tuples) {
                for (const auto& z : r.tuples) {
                    for (std::size_t q = 0; q < r.arity(); ++q) {
                        const std::array<Element, 3> args{x[q], y[q], z[q]};
                        image[q] = phi(r.signature[q], args);
                    }
                    if (!r.contains(image)) return r.name;
                }
            }
        }
    }
    return std::nullopt;
}

/// Union-find over element indices.
struct Components {
    std::vector<std::size_t> parent;
    explicit Components(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

/// The definitional ∼_i classes of an explicit relation (sorted tuples)
/// together with every prefix whose extension set is not a whole class.
struct PrefixAnalysis {
    std::vector<std::vector<std::vector<Element>>> classes;
    std::vector<std::string> problems;
};

PrefixAnalysis analyze_prefixes(std::span<const Tuple> r, std::span<const std::size_t> sort_sizes) {
    const std::size_t n = sort_sizes.size();
    PrefixAnalysis out;
    out.classes.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        // Tuples are sorted, so tuples sharing the prefix [0,i) are contiguous.
        std::vector<std::vector<Element>> extensions;
        std::vector<Tuple> prefixes;
        for (std::size_t lo = 0; lo < r.size();) {
            std::size_t hi = lo;
            std::vector<Element> ext;
            while (hi < r.size() && std::equal(r[lo].begin(), r[lo].begin() + static_cast<std::ptrdiff_t>(i),
                                               r[hi].begin())) {
                ext.push_back(r[hi][i]);
                ++hi;
            }
            std::sort(ext.begin(), ext.end());
            ext.erase(std::unique(ext.begin(), ext.end()), ext.end());
            extensions.push_back(std::move(ext));
            prefixes.emplace_back(r[lo].begin(), r[lo].begin() + static_cast<std::ptrdiff_t>(i));
            lo = hi;
        }
        Components comp(sort_sizes[i]);
        std::vector<bool> present(sort_sizes[i], false);
        for (const auto& ext : extensions) {
            for (const auto v : ext) {
                present[v] = true;
                comp.unite(v, ext.front());
            }
        }
        std::vector<std::vector<Element>> by_root(sort_sizes[i]);
        for (Element v = 0; v < sort_sizes[i]; ++v) {
            if (present[v]) by_root[comp.find(v)].push_back(v);
        }
        for (auto& c : by_root) {
            if (!c.empty()) out.classes[i].push_back(std::move(c));
        }
        std::sort(out.classes[i].begin(), out.classes[i].end());
        for (std::size_t e = 0; e < extensions.size(); ++e) {
            const auto& cls = extensions[e];
            const auto root = comp.find(cls.front());
            const auto it = std::find_if(out.classes[i].begin(), out.classes[i].end(),
                                         [&](const auto& c) { return comp.find(c.front()) == root; });
            if (it->size() != cls.size()) {
                out.problems.push_back("not rectangular at coordinate " + std::to_string(i) + ": prefix " +
                                       tuple_text(prefixes[e]) + " extends to " + values_text(cls) +
                                       " inside the class " + values_text(*it));
            }
        }
    }
    return out;
}

std::vector<std::size_t> sizes_of(const Structure& h, std::span<const SortId> sorts) {
    std::vector<std::size_t> sizes;
    sizes.reserve(sorts.size());
    for (const auto s : sorts) sizes.push_back(h.sort_size(s));
    return sizes;
}

std::vector<std::size_t> sizes_of(const WitnessFunction& w) {
    std::vector<std::size_t> sizes;
    sizes.reserve(w.table.size());
    for (const auto& row : w.table) sizes.push_back(row.size());
    return sizes;
}

std::vector<Tuple> solutions_of(const Instance& p, const Structure& h) {
    std::vector<Tuple> out;
    for_each_solution(p, h, [&](const Assignment& a) {
        out.push_back(a);
        return true;
    });
    canonicalize(out);
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// WitnessFunction
// ---------------------------------------------------------------------------

bool WitnessFunction::empty() const {
    if (table.empty()) return false;
    return std::none_of(table.front().begin(), table.front().end(), [](const auto& t) { return t.has_value(); });
}

std::optional<std::size_t> WitnessFunction::class_of(std::size_t i, Element a) const {
    const auto& cls = frame.classes.at(i);
    for (std::size_t c = 0; c < cls.size(); ++c) {
        if (std::binary_search(cls[c].begin(), cls[c].end(), a)) return c;
    }
    return std::nullopt;
}

std::vector<Tuple> WitnessFunction::frame_tuples() const {
    std::vector<Tuple> out;
    for (const auto& row : table) {
        for (const auto& t : row) {
            if (t) out.push_back(*t);
        }
    }
    canonicalize(out);
    return out;
}

// ---------------------------------------------------------------------------
// ParityContext
// ---------------------------------------------------------------------------

ParityContext::ParityContext(Structure h, std::optional<Operation> phi) : h_(std::move(h)) {
    if (!has_all_constants(h_)) {
        throw PreconditionError("parity: the structure lacks constant relations "
                                "(a 2-rigid structure may be given its constants first)");
    }
    if (!phi) {
        phi = find_maltsev(h_);
        if (!phi) throw PreconditionError("parity: the structure has no Mal'tsev polymorphism");
    }
    if (phi->tables.size() != h_.sort_count()) {
        throw PreconditionError("parity: the supplied operation has the wrong number of sorts");
    }
    for (std::size_t s = 0; s < h_.sort_count(); ++s) {
        const auto m = h_.sort_size(SortId{s});
        if (phi->sort_sizes[s] != m || phi->tables[s].size() != m * m * m) {
            throw PreconditionError("parity: the supplied operation does not match the sort sizes");
        }
    }
    if (!satisfies_maltsev_identities(*phi)) {
        throw PreconditionError("parity: the supplied operation violates the Mal'tsev identities");
    }
    if (const auto bad = unpreserved_relation(*phi, h_)) {
        throw PreconditionError("parity: the supplied operation does not preserve relation " + *bad);
    }
    phi_ = std::move(*phi);
}

Element ParityContext::apply(SortId s, Element x, Element y, Element z) const {
    const auto m = phi_.sort_sizes[s.value];
    return phi_.tables[s.value][(x * m + y) * m + z];
}

Tuple ParityContext::apply(std::span<const SortId> sorts, const Tuple& x, const Tuple& y, const Tuple& z) const {
    Tuple out(sorts.size());
    for (std::size_t i = 0; i < sorts.size(); ++i) out[i] = apply(sorts[i], x[i], y[i], z[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Construction from explicit relations
// ---------------------------------------------------------------------------

WitnessFunction full_witness_function(const Structure& h, std::span<const SortId> sorts) {
    WitnessFunction w;
    w.sorts.assign(sorts.begin(), sorts.end());
    const auto sizes = sizes_of(h, sorts);
    w.table.resize(sorts.size());
    w.frame.classes.resize(sorts.size());
    for (std::size_t i = 0; i < sorts.size(); ++i) w.table[i].resize(sizes[i]);
    if (std::find(sizes.begin(), sizes.end(), std::size_t{0}) != sizes.end()) return w;
    const Tuple base(sorts.size(), 0);
    for (std::size_t i = 0; i < sorts.size(); ++i) {
        std::vector<Element> all(sizes[i]);
        std::iota(all.begin(), all.end(), Element{0});
        for (const auto a : all) {
            Tuple t = base;
            t[i] = a;
            w.table[i][a] = std::move(t);
        }
        w.frame.classes[i].push_back(std::move(all));
    }
    return w;
}

WitnessFunction reference_witness_function(const Structure& h, std::span<const SortId> sorts,
                                           std::vector<Tuple> tuples) {
    const auto sizes = sizes_of(h, sorts);
    for (const auto& t : tuples) {
        if (t.size() != sorts.size()) throw PreconditionError("reference witness function: tuple of wrong arity");
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (t[i] >= sizes[i]) throw PreconditionError("reference witness function: element out of range");
        }
    }
    canonicalize(tuples);
    auto analysis = analyze_prefixes(tuples, sizes);
    if (!analysis.problems.empty()) throw PreconditionError("reference witness function: " + analysis.problems.front());
    WitnessFunction w;
    w.sorts.assign(sorts.begin(), sorts.end());
    w.table.resize(sorts.size());
    for (std::size_t i = 0; i < sorts.size(); ++i) w.table[i].resize(sizes[i]);
    // Ascending order makes the first tuple seen with entry a at i the
    // lexicographically least one.
    for (const auto& t : tuples) {
        for (std::size_t i = 0; i < t.size(); ++i) {
            if (!w.table[i][t[i]]) w.table[i][t[i]] = t;
        }
    }
    w.frame.classes = std::move(analysis.classes);
    return w;
}

WitnessFunction reference_witness_function(const Structure& h, const Instance& p) {
    require_valid(p, h);
    const auto sorts = variable_sorts(p, h);
    return reference_witness_function(h, sorts, solutions_of(p, h));
}

std::vector<Tuple> enumerate_relation(const ParityContext& ctx, const WitnessFunction& w) {
    const std::size_t n = w.arity();
    if (n == 0) return {Tuple{}};
    if (w.empty()) return {};
    const std::size_t limit = size_guard(1'000'000);
    std::vector<Tuple> out;
    // Depth-first over prefixes: a tuple t fixes the prefix [0,l); the values
    // extending it form the class of t_l, reached through φ(t, ω(l,t_l), ω(l,c)).
    auto extend = [&](auto&& self, const Tuple& t, std::size_t l) -> void {
        if (l == n) {
            if (out.size() >= limit) throw GuardError("enumerate_relation: more than " + std::to_string(limit) + " tuples");
            out.push_back(t);
            return;
        }
        const Element b = t[l];
        const auto k = w.class_of(l, b);
        if (!k || !w(l, b)) throw Error("enumerate_relation: inconsistent frame at coordinate " + std::to_string(l));
        for (const auto c : w.frame.classes[l][*k]) {
            if (c == b) {
                self(self, t, l + 1);
            } else {
                if (!w(l, c)) throw Error("enumerate_relation: missing witness at coordinate " + std::to_string(l));
                self(self, ctx.apply(w.sorts, t, *w(l, b), *w(l, c)), l + 1);
            }
        }
    };
    const auto first = std::find_if(w.table[0].begin(), w.table[0].end(), [](const auto& t) { return t.has_value(); });
    extend(extend, **first, 0);
    canonicalize(out);
    return out;
}

std::vector<Tuple> frame_closure(const ParityContext& ctx, const WitnessFunction& w) {
    const std::size_t limit = size_guard(2'000);
    std::vector<Tuple> order = w.frame_tuples();
    std::set<Tuple> seen(order.begin(), order.end());
    auto add = [&](Tuple t) {
        if (seen.insert(t).second) {
            order.push_back(std::move(t));
            if (order.size() > limit) throw GuardError("frame_closure: more than " + std::to_string(limit) + " tuples");
        }
    };
    // Semi-naive fixpoint: every triple is tried once its last member arrives.
    for (std::size_t idx = 0; idx < order.size(); ++idx) {
        for (std::size_t a = 0; a <= idx; ++a) {
            for (std::size_t b = 0; b <= idx; ++b) {
                const Tuple e = order[idx];
                const Tuple x = order[a];
                const Tuple y = order[b];
                add(ctx.apply(w.sorts, e, x, y));
                add(ctx.apply(w.sorts, x, e, y));
                add(ctx.apply(w.sorts, x, y, e));
            }
        }
    }
    canonicalize(order);
    return order;
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

std::vector<std::string> witness_violations(const WitnessFunction& w, std::span<const Tuple> r) {
    std::vector<std::string> out;
    const std::size_t n = w.arity();
    const auto sizes = sizes_of(w);
    if (w.frame.classes.size() != n || w.table.size() != n) {
        out.push_back("shape: tables or classes do not match the arity");
        return out;
    }
    std::vector<Tuple> rel(r.begin(), r.end());
    for (const auto& t : rel) {
        if (t.size() != n) {
            out.push_back("shape: relation tuple of wrong arity");
            return out;
        }
    }
    canonicalize(rel);
    auto analysis = analyze_prefixes(rel, sizes);
    for (auto& p : analysis.problems) out.push_back("rectangularity: " + std::move(p));

    for (std::size_t i = 0; i < n; ++i) {
        std::vector<bool> in_projection(sizes[i], false);
        for (const auto& t : rel) in_projection[t[i]] = true;
        for (Element a = 0; a < sizes[i]; ++a) {
            const auto& wa = w.table[i][a];
            const std::string at = "ω(" + std::to_string(i) + "," + std::to_string(a) + ")";
            if (in_projection[a] && !wa) out.push_back("(i) " + at + " is ⊥ although the value is in the projection");
            if (!in_projection[a] && wa) out.push_back("(i) " + at + " is defined outside the projection");
            if (!wa) continue;
            if (wa->size() != n || !std::binary_search(rel.begin(), rel.end(), *wa)) {
                out.push_back("(ii) " + at + " = " + tuple_text(*wa) + " is not in the relation");
            } else if ((*wa)[i] != a) {
                out.push_back("(ii) " + at + " = " + tuple_text(*wa) + " has the wrong entry");
            }
        }
        if (i == 0 && w.frame.classes[0].size() > 1) out.push_back("classes: ∼_0 has more than one class");
        if (w.frame.classes[i] != analysis.classes[i]) {
            out.push_back("classes: ∼_" + std::to_string(i) + " differs from the definitional equivalence");
        }
        for (const auto& cls : w.frame.classes[i]) {
            const std::optional<Tuple>* first = nullptr;
            for (const auto a : cls) {
                if (a >= sizes[i] || !w.table[i][a] || w.table[i][a]->size() != n) continue;
                if (!first) {
                    first = &w.table[i][a];
                } else if (!std::equal((**first).begin(), (**first).begin() + static_cast<std::ptrdiff_t>(i),
                                       w.table[i][a]->begin())) {
                    out.push_back("(iii) witnesses of " + std::to_string(cls.front()) + " and " + std::to_string(a) +
                                  " at coordinate " + std::to_string(i) + " have different prefixes");
                }
            }
        }
    }
    return out;
}

void FrameValidator::report(std::string message) {
    violations_.push_back(message);
    if (strict_) throw PreconditionError("frame validation: " + message);
}

void FrameValidator::check(std::string_view operation, const WitnessFunction& w, std::span<const Tuple> expected) {
    ++checks_;
    for (auto& v : witness_violations(w, expected)) report(std::string(operation) + ": " + v);
}

void FrameValidator::on_build(const Instance& p, const WitnessFunction& out) {
    check("build", out, solutions_of(p, ctx_.structure()));
}

std::optional<std::vector<Tuple>> FrameValidator::relation_of(std::string_view operation, const WitnessFunction& w) {
    try {
        return enumerate_relation(ctx_, w);
    } catch (const GuardError&) {
        throw;
    } catch (const Error& e) {
        ++checks_;
        report(std::string(operation) + ": input frame cannot be enumerated: " + e.what());
        return std::nullopt;
    }
}

void FrameValidator::on_fix(const WitnessFunction& in, std::size_t coordinate, Element value,
                            const WitnessFunction& out) {
    auto rel = relation_of("fix", in);
    if (!rel) return;
    auto& r = *rel;
    std::erase_if(r, [&](const Tuple& t) { return t[coordinate] != value; });
    check("fix", out, r);
}

void FrameValidator::on_project(const WitnessFunction& in, const WitnessFunction& out) {
    auto rel = relation_of("project", in);
    if (!rel) return;
    auto& r = *rel;
    for (auto& t : r) t.pop_back();
    canonicalize(r);
    check("project", out, r);
}

void FrameValidator::on_derive(const WitnessFunction& in, const WitnessFunction& par, const WitnessFunction& tilde) {
    const auto rel = relation_of("derive", in);
    if (!rel) return;
    const auto& r = *rel;
    const std::size_t n = in.arity();
    // H plus the explicit relation R, over which PAR-R and tilde-R are
    // evaluated from their defining formulas.
    Structure hr = ctx_.structure();
    const std::string name = "R#";
    hr.add_relation(name, in.sorts, r, true);
    MppFormula par_formula;
    std::vector<std::string> with_y;
    std::vector<std::string> with_z;
    for (std::size_t i = 0; i < n; ++i) {
        const auto var = i + 1 == n ? std::string("y") : "x" + std::to_string(i);
        par_formula.free.push_back({var, hr.sort(in.sorts[i]).name});
        with_y.push_back(var);
        with_z.push_back(i + 1 == n ? std::string("z") : var);
    }
    par_formula.blocks.push_back(modular_block({"z"}, 2));
    par_formula.atoms = {{name, with_y}, {name, with_z}};
    MppFormula tilde_formula = par_formula;
    tilde_formula.free.pop_back();
    tilde_formula.blocks.insert(tilde_formula.blocks.begin(), modular_block({"y"}, 2));

    const auto par_rel = evaluate_formula(hr, par_formula, "PAR");
    const auto tilde_rel = evaluate_formula(hr, tilde_formula, "tilde");
    check("derive (PAR)", par, par_rel.tuples);
    check("derive (tilde)", tilde, tilde_rel.tuples);
    ++parity_checks_;
    if (r.size() % 2 != par_rel.size() % 2 || par_rel.size() % 2 != tilde_rel.size() % 2) {
        report("derive: parities differ: |R| = " + std::to_string(r.size()) + ", |PAR-R| = " +
               std::to_string(par_rel.size()) + ", |tilde-R| = " + std::to_string(tilde_rel.size()));
    }
}

}  // namespace modcsp
