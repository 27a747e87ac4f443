// SPDX-License-Identifier: Apache-2.0
/**
 * @file expansion.cpp
 * @brief Equality elimination, indicator problems, conjunctive expansion and
 *        counting with constants through partition-lattice inversion.
 */
#include "modcsp/expansion.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "modcsp/automorphism.hpp"

namespace modcsp {
namespace {

/// Minimal union-find over indices.
class DisjointSets {
public:
    explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }
    std::size_t find(std::size_t x) {
        while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
        return x;
    }
    /// Keeps the smaller index as representative.
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return;
        if (b < a) std::swap(a, b);
        parent_[b] = a;
    }

private:
    std::vector<std::size_t> parent_;
};

std::size_t checked_power(std::size_t base, std::size_t exp, std::size_t limit, std::string_view what) {
    std::size_t r = 1;
    for (std::size_t i = 0; i < exp; ++i) {
        if (base != 0 && r > limit / base) enforce_guard(what, limit + 1, limit);
        r *= base;
    }
    return r;
}

/// Modular inverse of `a` modulo the prime `p`.
std::uint64_t inverse_mod(std::uint64_t a, std::uint64_t p) {
    std::uint64_t result = 1;
    std::uint64_t base = a % p;
    for (std::uint64_t e = p - 2; e > 0; e >>= 1) {
        if (e & 1U) result = result * base % p;
        base = base * base % p;
    }
    return result;
}

}  // namespace

// ---------------------------------------------------------------------------
// Equality elimination
// ---------------------------------------------------------------------------

Merged eliminate_equality(const Instance& p, const Structure& h) {
    require_valid(p, h);
    const std::size_t n = p.variable_count();
    DisjointSets sets(n);
    for (const auto& c : p.constraints()) {
        if (c.relation != kEquality) continue;
        const auto& a = p.variables()[c.scope[0]];
        const auto& b = p.variables()[c.scope[1]];
        if (a.sort != b.sort) {
            throw PreconditionError("equality between variables '" + a.name + "' and '" + b.name +
                                    "' of different sorts");
        }
        sets.unite(c.scope[0], c.scope[1]);
    }
    Merged out;
    out.variable_map.assign(n, 0);
    std::vector<std::optional<std::size_t>> fresh(n);
    for (std::size_t v = 0; v < n; ++v) {
        const auto r = sets.find(v);
        if (!fresh[r]) fresh[r] = out.instance.add_variable(p.variables()[r].name, p.variables()[r].sort);
        out.variable_map[v] = *fresh[r];
    }
    for (const auto& c : p.constraints()) {
        if (c.relation == kEquality) continue;
        std::vector<std::size_t> scope;
        for (const auto v : c.scope) scope.push_back(out.variable_map[v]);
        out.instance.add_constraint(std::move(scope), c.relation);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

std::size_t Operation::index(std::span<const Element> args, std::size_t base) {
    std::size_t code = 0;
    for (const auto a : args) code = code * base + a;
    return code;
}

Element Operation::operator()(SortId s, std::span<const Element> args) const {
    return tables[s.value][index(args, sort_sizes[s.value])];
}

namespace {

/// Calls `visit` with every n-tuple of tuple indices of a relation of size m.
template <class Visit>
void for_each_index_tuple(std::size_t m, std::size_t n, Visit&& visit) {
    if (m == 0) return;
    std::vector<std::size_t> idx(n, 0);
    while (true) {
        visit(idx);
        std::size_t j = n;
        while (j > 0) {
            --j;
            if (++idx[j] < m) break;
            idx[j] = 0;
            if (j == 0) return;
        }
        if (n == 0) return;
    }
}

}  // namespace

bool is_polymorphism(const Operation& f, const Structure& h) {
    if (f.tables.size() != h.sort_count()) throw PreconditionError("operation has the wrong number of sorts");
    Tuple image;
    Tuple args(f.arity);
    for (const auto& r : h.relations()) {
        bool ok = true;
        for_each_index_tuple(r.size(), f.arity, [&](const std::vector<std::size_t>& idx) {
            if (!ok) return;
            image.resize(r.arity());
            for (std::size_t pos = 0; pos < r.arity(); ++pos) {
                for (std::size_t j = 0; j < f.arity; ++j) args[j] = r.tuples[idx[j]][pos];
                image[pos] = f(r.signature[pos], args);
            }
            if (!r.contains(image)) ok = false;
        });
        if (!ok) return false;
    }
    return true;
}

bool satisfies_maltsev_identities(const Operation& f) {
    if (f.arity != 3) return false;
    for (std::size_t s = 0; s < f.tables.size(); ++s) {
        const auto n = static_cast<Element>(f.sort_sizes[s]);
        for (Element a = 0; a < n; ++a) {
            for (Element b = 0; b < n; ++b) {
                const Element aab[] = {a, a, b};
                const Element baa[] = {b, a, a};
                if (f(SortId{s}, aab) != b || f(SortId{s}, baa) != b) return false;
            }
        }
    }
    return true;
}

bool is_maltsev_polymorphism(const Operation& f, const Structure& h) {
    return satisfies_maltsev_identities(f) && is_polymorphism(f, h);
}

// ---------------------------------------------------------------------------
// Indicator problem
// ---------------------------------------------------------------------------

Indicator indicator_problem(const Structure& h, std::size_t n) {
    if (n == 0) throw PreconditionError("indicator problem needs n >= 1");
    const std::size_t limit = size_guard(2'000'000);
    std::size_t total_constraints = 0;
    for (const auto& r : h.relations()) {
        total_constraints += checked_power(r.size(), n, limit, "indicator problem constraint count");
        enforce_guard("indicator problem constraint count", total_constraints, limit);
    }
    Indicator ind;
    ind.arity = n;
    const bool qualify = h.sort_count() > 1;
    for (std::size_t s = 0; s < h.sort_count(); ++s) {
        const auto& sort = h.sorts()[s];
        const std::size_t size = sort.elements.size();
        ind.sort_offset.push_back(ind.instance.variable_count());
        const std::size_t count = checked_power(size, n, limit, "indicator problem variable count");
        std::vector<Element> args(n, 0);
        for (std::size_t code = 0; code < count; ++code) {
            std::size_t c = code;
            for (std::size_t j = n; j-- > 0;) {
                args[j] = static_cast<Element>(c % size);
                c /= size;
            }
            std::string name = qualify ? "f_" + sort.name + "(" : "f(";
            for (std::size_t j = 0; j < n; ++j) name += (j ? "," : "") + sort.elements[args[j]];
            ind.instance.add_variable(name + ")", sort.name);
        }
    }
    std::vector<Element> args(n);
    for (const auto& r : h.relations()) {
        for_each_index_tuple(r.size(), n, [&](const std::vector<std::size_t>& idx) {
            std::vector<std::size_t> scope;
            for (std::size_t pos = 0; pos < r.arity(); ++pos) {
                for (std::size_t j = 0; j < n; ++j) args[j] = r.tuples[idx[j]][pos];
                const auto s = r.signature[pos].value;
                scope.push_back(ind.sort_offset[s] + Operation::index(args, h.sort_size(SortId{s})));
            }
            ind.instance.add_constraint(std::move(scope), r.name);
        });
    }
    return ind;
}

Operation operation_from_solution(const Indicator& ind, const Structure& h, const Assignment& a) {
    Operation f;
    f.arity = ind.arity;
    for (std::size_t s = 0; s < h.sort_count(); ++s) {
        const std::size_t begin = ind.sort_offset[s];
        const std::size_t end = s + 1 < h.sort_count() ? ind.sort_offset[s + 1] : a.size();
        f.sort_sizes.push_back(h.sort_size(SortId{s}));
        f.tables.emplace_back(a.begin() + static_cast<std::ptrdiff_t>(begin), a.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return f;
}

Assignment solution_from_operation(const Indicator& ind, const Operation& f) {
    Assignment a(ind.instance.variable_count());
    for (std::size_t s = 0; s < f.tables.size(); ++s) {
        std::copy(f.tables[s].begin(), f.tables[s].end(), a.begin() + static_cast<std::ptrdiff_t>(ind.sort_offset[s]));
    }
    return a;
}

std::optional<Operation> find_maltsev(const Structure& h) {
    return find_polymorphism(h, 3, [](SortId, std::span<const Element> x) -> std::optional<Element> {
        if (x[0] == x[1]) return x[2];
        if (x[1] == x[2]) return x[0];
        return std::nullopt;
    });
}

// ---------------------------------------------------------------------------
// Conjunctive expansion
// ---------------------------------------------------------------------------

Structure without_relation(const Structure& h, std::string_view name) {
    Structure out = h;
    out.remove_relation(name);
    return out;
}

Instance conjunctive_expand(const Instance& p, const Structure& h_plus_r, const ConjunctiveDefinition& def) {
    require_valid(p, h_plus_r);
    const auto& r = h_plus_r.relation(def.relation);
    if (r.arity() != def.arity) {
        throw PreconditionError("definition of '" + def.relation + "' has " + std::to_string(def.arity) +
                                " variables but the relation has arity " + std::to_string(r.arity()));
    }
    for (const auto& atom : def.atoms) {
        if (atom.relation == def.relation) throw PreconditionError("definition refers to the defined relation");
        for (const auto a : atom.args) {
            if (a >= def.arity) throw PreconditionError("definition atom uses an undeclared variable");
        }
    }
    Instance out;
    for (const auto& v : p.variables()) out.add_variable(v.name, v.sort);
    for (const auto& c : p.constraints()) {
        if (c.relation != def.relation) {
            out.add_constraint(c.scope, c.relation);
            continue;
        }
        for (const auto& atom : def.atoms) {
            std::vector<std::size_t> scope;
            for (const auto a : atom.args) scope.push_back(c.scope[a]);
            out.add_constraint(std::move(scope), atom.relation);
        }
    }
    require_valid(out, without_relation(h_plus_r, def.relation));
    return out;
}

// ---------------------------------------------------------------------------
// Partition lattice
// ---------------------------------------------------------------------------

bool refines(const Partition& finer, const Partition& coarser) {
    if (finer.blocks.size() != coarser.blocks.size()) return false;
    for (std::size_t s = 0; s < finer.blocks.size(); ++s) {
        const auto& f = finer.blocks[s];
        const auto& c = coarser.blocks[s];
        if (f.size() != c.size()) return false;
        std::map<std::uint32_t, std::uint32_t> image;
        for (std::size_t e = 0; e < f.size(); ++e) {
            const auto [it, inserted] = image.emplace(f[e], c[e]);
            if (!inserted && it->second != c[e]) return false;
        }
    }
    return true;
}

std::vector<PartitionWeight> partition_mobius_weights(const Structure& h) {
    enforce_guard("partition lattice universe size", h.universe_size(), size_guard(8));
    std::vector<PartitionWeight> out;
    for_each_partition(h, [&](const Partition& theta) {
        BigInt w = 1;
        for (std::size_t s = 0; s < theta.blocks.size(); ++s) {
            std::map<std::uint32_t, std::size_t> sizes;
            for (const auto b : theta.blocks[s]) ++sizes[b];
            for (const auto& [block, size] : sizes) {
                for (std::size_t k = 2; k < size; ++k) w *= static_cast<unsigned>(k);
                if (size % 2 == 0) w = -w;
            }
        }
        out.push_back({theta, w});
        return true;
    });
    return out;
}

std::vector<PartitionWeight> partition_mobius_weights_by_recursion(const Structure& h) {
    enforce_guard("partition lattice universe size", h.universe_size(), size_guard(8));
    std::vector<PartitionWeight> all;
    for_each_partition(h, [&](const Partition& theta) {
        all.push_back({theta, 0});
        return true;
    });
    const auto blocks = [](const Partition& t) {
        std::size_t n = 0;
        for (std::size_t s = 0; s < t.blocks.size(); ++s) n += block_count(t, s);
        return n;
    };
    // Finer partitions (more blocks) first, so every η < θ is done before θ.
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](auto a, auto b) { return blocks(all[a].theta) > blocks(all[b].theta); });
    for (std::size_t i = 0; i < order.size(); ++i) {
        auto& theta = all[order[i]];
        if (is_discrete(theta.theta)) {
            theta.weight = 1;
            continue;
        }
        BigInt sum = 0;
        for (std::size_t j = 0; j < i; ++j) {
            const auto& eta = all[order[j]];
            if (refines(eta.theta, theta.theta)) sum += eta.weight;
        }
        theta.weight = -sum;
    }
    return all;
}

// ---------------------------------------------------------------------------
// Counting with constants
// ---------------------------------------------------------------------------

Structure endomorphism_expansion(const Structure& h) {
    enforce_guard("endomorphism relation arity", h.universe_size(), size_guard(8));
    std::vector<SortId> signature;
    for (std::size_t s = 0; s < h.sort_count(); ++s) {
        for (std::size_t e = 0; e < h.sort_size(SortId{s}); ++e) signature.push_back(SortId{s});
    }
    std::vector<Tuple> tuples;
    for_each_homomorphism(h, h, [&](const Mapping& phi) {
        Tuple t;
        for (const auto& c : phi.components) t.insert(t.end(), c.begin(), c.end());
        tuples.push_back(std::move(t));
        return true;
    });
    Structure out = h;
    out.add_relation(std::string(kEndomorphismRelation), std::move(signature), std::move(tuples));
    return out;
}

ModularOracle brute_force_oracle() {
    return [](const Instance& p, const Structure& h, std::uint64_t prime) { return count_solutions_mod(p, h, prime); };
}

std::uint64_t count_with_constants(const Instance& p, const Structure& hc, std::uint64_t prime, const Structure& h,
                                   const ModularOracle& oracle) {
    require_prime(prime);
    require_valid(p, hc);
    if (h.find_relation(kEndomorphismRelation) != nullptr) {
        throw PreconditionError("relation name '" + std::string(kEndomorphismRelation) + "' is reserved");
    }
    if (!is_p_rigid(h, prime)) {
        throw PreconditionError("counting with constants requires a " + std::to_string(prime) + "-rigid structure");
    }
    const std::size_t group = enumerate_automorphisms(h).size();
    const Structure target = endomorphism_expansion(h);

    // P': the original non-constant constraints, the endomorphism constraint
    // on the anchor variables v_a, and x = v_a for every C_a(x).
    Instance base;
    for (const auto& v : p.variables()) base.add_variable(v.name, v.sort);
    std::vector<std::vector<std::size_t>> anchor(h.sort_count());
    std::vector<std::size_t> all_anchors;
    for (std::size_t s = 0; s < h.sort_count(); ++s) {
        for (Element a = 0; a < h.sort_size(SortId{s}); ++a) {
            const auto v = base.add_variable("v#" + h.sort(SortId{s}).name + "." + h.element_name(SortId{s}, a),
                                             h.sort(SortId{s}).name);
            anchor[s].push_back(v);
            all_anchors.push_back(v);
        }
    }
    for (const auto& c : p.constraints()) {
        if (c.relation == kEquality || h.find_relation(c.relation) != nullptr) {
            base.add_constraint(c.scope, c.relation);
        } else if (const auto a = parse_constant_name(h, c.relation)) {
            base.add_constraint({c.scope[0], anchor[a->sort.value][a->element]}, std::string(kEquality));
        } else {
            throw PreconditionError("relation '" + c.relation + "' is neither in the structure nor a constant");
        }
    }
    base.add_constraint(all_anchors, std::string(kEndomorphismRelation));

    std::uint64_t n0 = 0;
    for (const auto& [theta, weight] : partition_mobius_weights(h)) {
        Instance pt = base;
        for (std::size_t s = 0; s < h.sort_count(); ++s) {
            const auto& labels = theta.blocks[s];
            for (std::size_t a = 0; a < labels.size(); ++a) {
                for (std::size_t b = a + 1; b < labels.size(); ++b) {
                    if (labels[a] == labels[b]) {
                        pt.add_constraint({anchor[s][a], anchor[s][b]}, std::string(kEquality));
                        break;  // linking to the next block member suffices
                    }
                }
            }
        }
        const auto m = oracle(eliminate_equality(pt, target).instance, target, prime);
        n0 = (n0 + residue(weight, prime) * (m % prime)) % prime;
    }
    return n0 * inverse_mod(group % prime, prime) % prime;
}

}  // namespace modcsp
