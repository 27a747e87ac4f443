// SPDX-License-Identifier: Apache-2.0
/**
 * @file oracle.cpp
 * @brief Exhaustive backtracking counter with early constraint checks.
 */
#include "modcsp/oracle.hpp"

#include <algorithm>
#include <map>
#include <numeric>

namespace modcsp {

HomCount HomCount::reduce(std::uint64_t p) const {
    require_prime(p);
    HomCount out = *this;
    out.reduced = Residue{residue(exact, p), p};
    return out;
}

bool is_prime(std::uint64_t n) {
    if (n < 2) return false;
    for (std::uint64_t d = 2; d * d <= n; ++d) {
        if (n % d == 0) return false;
    }
    return true;
}

void require_prime(std::uint64_t p) {
    if (!is_prime(p)) throw PreconditionError("modulus " + std::to_string(p) + " is not prime");
}

std::uint64_t residue(const BigInt& x, std::uint64_t m) {
    BigInt r = x % m;
    if (r < 0) r += m;
    return r.convert_to<std::uint64_t>();
}

namespace {

/// Pre-resolved search plan for one instance over one structure.
class Search {
public:
    Search(const Instance& p, const Structure& h, const Domains* domains) : p_(p) {
        require_valid(p, h);
        const std::size_t n = p.variable_count();
        const auto sorts = variable_sorts(p, h);
        domain_.resize(n);
        for (std::size_t v = 0; v < n; ++v) {
            if (domains != nullptr && v < domains->size() && (*domains)[v]) {
                auto d = *(*domains)[v];
                std::sort(d.begin(), d.end());
                d.erase(std::unique(d.begin(), d.end()), d.end());
                for (const auto e : d) {
                    if (e >= h.sort_size(sorts[v])) throw PreconditionError("domain element outside its sort");
                }
                domain_[v] = std::move(d);
            } else {
                domain_[v].resize(h.sort_size(sorts[v]));
                std::iota(domain_[v].begin(), domain_[v].end(), Element{0});
            }
        }
        // Order constrained variables by descending degree, ties by index.
        std::vector<std::size_t> degree(n, 0);
        for (const auto& c : p.constraints()) {
            for (const auto v : c.scope) ++degree[v];
        }
        std::vector<std::size_t> vars(n);
        std::iota(vars.begin(), vars.end(), std::size_t{0});
        std::stable_sort(vars.begin(), vars.end(), [&](auto a, auto b) { return degree[a] > degree[b]; });
        for (const auto v : vars) {
            if (degree[v] > 0) order_.push_back(v);
            else free_.push_back(v);
        }
        std::vector<std::size_t> level(n, 0);
        for (std::size_t i = 0; i < order_.size(); ++i) level[order_[i]] = i;
        checks_.resize(order_.size());
        for (const auto& c : p.constraints()) {
            std::size_t last = 0;
            for (const auto v : c.scope) last = std::max(last, level[v]);
            const Relation* rel = c.relation == kEquality ? nullptr : &h.relation(c.relation);
            if (c.scope.empty()) {
                if (rel != nullptr && rel->tuples.empty()) empty_constraint_ = true;
                continue;
            }
            checks_[last].push_back(Check{rel, &c.scope});
        }
    }

    /// Counts solutions; free variables contribute multiplicatively.
    BigInt count() {
        if (empty_constraint_) return 0;
        for (const auto v : free_) {
            if (domain_[v].empty()) return 0;
        }
        assignment_.assign(p_.variable_count(), 0);
        std::uint64_t leaves = 0;
        count_rec(0, leaves);
        BigInt total = leaves;
        for (const auto v : free_) total *= domain_[v].size();
        return total;
    }

    /// Enumerates full assignments, free variables included.
    void enumerate(const std::function<bool(const Assignment&)>& visit) {
        if (empty_constraint_) return;
        assignment_.assign(p_.variable_count(), 0);
        stop_ = false;
        enum_rec(0, visit);
    }

private:
    struct Check {
        const Relation* relation;  // nullptr for equality
        const std::vector<std::size_t>* scope;
    };

    bool consistent(std::size_t level) {
        for (const auto& chk : checks_[level]) {
            const auto& scope = *chk.scope;
            if (chk.relation == nullptr) {
                if (assignment_[scope[0]] != assignment_[scope[1]]) return false;
                continue;
            }
            image_.resize(scope.size());
            for (std::size_t j = 0; j < scope.size(); ++j) image_[j] = assignment_[scope[j]];
            if (!chk.relation->contains(image_)) return false;
        }
        return true;
    }

    void count_rec(std::size_t level, std::uint64_t& leaves) {
        if (level == order_.size()) {
            ++leaves;
            return;
        }
        const auto v = order_[level];
        for (const auto e : domain_[v]) {
            assignment_[v] = e;
            if (consistent(level)) count_rec(level + 1, leaves);
        }
    }

    void enum_rec(std::size_t level, const std::function<bool(const Assignment&)>& visit) {
        if (stop_) return;
        const std::size_t total = order_.size() + free_.size();
        if (level == total) {
            if (!visit(assignment_)) stop_ = true;
            return;
        }
        const auto v = level < order_.size() ? order_[level] : free_[level - order_.size()];
        for (const auto e : domain_[v]) {
            if (stop_) return;
            assignment_[v] = e;
            if (level >= order_.size() || consistent(level)) enum_rec(level + 1, visit);
        }
    }

    const Instance& p_;
    std::vector<std::vector<Element>> domain_;
    std::vector<std::size_t> order_;
    std::vector<std::size_t> free_;
    std::vector<std::vector<Check>> checks_;
    bool empty_constraint_ = false;
    Assignment assignment_;
    Tuple image_;
    bool stop_ = false;
};

}  // namespace

void for_each_solution(const Instance& p, const Structure& h, const std::function<bool(const Assignment&)>& visit,
                       const Domains* domains) {
    Search(p, h, domains).enumerate(visit);
}

HomCount count_solutions(const Instance& p, const Structure& h, const Domains* domains) {
    return HomCount{Search(p, h, domains).count(), std::nullopt};
}

std::uint64_t count_solutions_mod(const Instance& p, const Structure& h, std::uint64_t prime, const Domains* domains) {
    require_prime(prime);
    return residue(count_solutions(p, h, domains).exact, prime);
}

bool is_satisfiable(const Instance& p, const Structure& h, const Domains* domains) {
    return first_solution(p, h, domains).has_value();
}

std::optional<Assignment> first_solution(const Instance& p, const Structure& h, const Domains* domains) {
    std::optional<Assignment> found;
    for_each_solution(
        p, h,
        [&](const Assignment& a) {
            found = a;
            return false;
        },
        domains);
    return found;
}

HomCount count_hom(const Structure& g, const Structure& h) {
    require_similar(g, h);
    return count_solutions(structure_to_instance(g), h);
}

std::uint64_t count_hom_mod(const Structure& g, const Structure& h, std::uint64_t prime) {
    require_prime(prime);
    return residue(count_hom(g, h).exact, prime);
}

namespace {

/// Variable index of each element of g in structure_to_instance(g).
std::vector<std::vector<std::size_t>> element_variables(const Structure& g) {
    std::vector<std::vector<std::size_t>> var(g.sort_count());
    std::size_t next = 0;
    for (std::size_t s = 0; s < g.sort_count(); ++s) {
        for (std::size_t e = 0; e < g.sort_size(SortId{s}); ++e) var[s].push_back(next++);
    }
    return var;
}

Mapping assignment_to_mapping(const Structure& g, const std::vector<std::vector<std::size_t>>& var,
                              const Assignment& a) {
    Mapping m;
    for (std::size_t s = 0; s < g.sort_count(); ++s) {
        std::vector<Element> c;
        for (const auto v : var[s]) c.push_back(a[v]);
        m.components.push_back(std::move(c));
    }
    return m;
}

/// Domains pinning anchors of k to anchors of g; nullopt if contradictory.
std::optional<Domains> anchor_domains(const Anchored& k, const Anchored& g,
                                      const std::vector<std::vector<std::size_t>>& var) {
    if (k.anchors.size() != g.anchors.size()) throw PreconditionError("anchor tuples differ in length");
    Domains d(k.structure.universe_size());
    for (std::size_t i = 0; i < k.anchors.size(); ++i) {
        if (k.anchors[i].sort != g.anchors[i].sort) return std::nullopt;
        const auto v = var[k.anchors[i].sort.value][k.anchors[i].element];
        const Element target = g.anchors[i].element;
        if (d[v] && (*d[v])[0] != target) return std::nullopt;
        d[v] = std::vector<Element>{target};
    }
    return d;
}

}  // namespace

void for_each_homomorphism(const Structure& g, const Structure& h, const std::function<bool(const Mapping&)>& visit) {
    require_similar(g, h);
    const auto var = element_variables(g);
    for_each_solution(structure_to_instance(g), h,
                      [&](const Assignment& a) { return visit(assignment_to_mapping(g, var, a)); });
}

BigInt count_hom_anchored(const Anchored& k, const Anchored& g) {
    require_similar(k.structure, g.structure);
    const auto var = element_variables(k.structure);
    const auto d = anchor_domains(k, g, var);
    if (!d) return 0;
    return count_solutions(structure_to_instance(k.structure), g.structure, &*d).exact;
}

BigInt count_inj(const Anchored& k, const Anchored& g) {
    require_similar(k.structure, g.structure);
    const auto var = element_variables(k.structure);
    const auto d = anchor_domains(k, g, var);
    if (!d) return 0;
    for (std::size_t s = 0; s < k.structure.sort_count(); ++s) {
        if (k.structure.sort_size(SortId{s}) > g.structure.sort_size(SortId{s})) return 0;
    }
    std::uint64_t n = 0;
    std::vector<char> seen;
    for_each_solution(
        structure_to_instance(k.structure), g.structure,
        [&](const Assignment& a) {
            for (std::size_t s = 0; s < var.size(); ++s) {
                seen.assign(g.structure.sort_size(SortId{s}), 0);
                for (const auto v : var[s]) {
                    if (seen[a[v]]) return true;
                    seen[a[v]] = 1;
                }
            }
            ++n;
            return true;
        },
        &*d);
    return n;
}

BigInt count_ext(const Relation& r, std::span<const std::size_t> positions, std::span<const Element> partial) {
    if (positions.size() != partial.size()) throw PreconditionError("count_ext: partial tuple length mismatch");
    std::uint64_t n = 0;
    for (const auto& t : r.tuples) {
        bool match = true;
        for (std::size_t i = 0; i < positions.size() && match; ++i) match = t.at(positions[i]) == partial[i];
        if (match) ++n;
    }
    return n;
}

std::uint64_t count_ext_mod(const Relation& r, std::span<const std::size_t> positions, std::span<const Element> partial,
                            std::uint64_t prime) {
    require_prime(prime);
    return residue(count_ext(r, positions, partial), prime);
}

Relation mod_projection(const Relation& r, std::span<const std::size_t> positions, std::uint64_t prime,
                        std::string name) {
    require_prime(prime);
    std::map<Tuple, std::uint64_t> counts;
    for (const auto& t : r.tuples) {
        Tuple u;
        for (const auto i : positions) u.push_back(t.at(i));
        ++counts[u];
    }
    Relation out;
    out.name = std::move(name);
    for (const auto i : positions) out.signature.push_back(r.signature.at(i));
    for (const auto& [u, c] : counts) {
        if (c % prime != 0) out.tuples.push_back(u);
    }
    return out;
}

Relation projection(const Relation& r, std::span<const std::size_t> positions, std::string name) {
    Relation out;
    out.name = std::move(name);
    for (const auto i : positions) out.signature.push_back(r.signature.at(i));
    for (const auto& t : r.tuples) {
        Tuple u;
        for (const auto i : positions) u.push_back(t.at(i));
        out.tuples.push_back(std::move(u));
    }
    canonicalize(out.tuples);
    return out;
}

BigInt inj_from_hom_by_mobius(const Anchored& k, const Anchored& g, const HomOracle& hom) {
    BigInt result = hom(k, g);
    for_each_partition(k.structure, [&](const Partition& theta) {
        if (is_discrete(theta)) return true;
        auto [quotient, q] = factor_structure(k.structure, theta);
        Anchored kq{std::move(quotient), {}};
        for (const auto& a : k.anchors) kq.anchors.push_back({a.sort, q(a.sort, a.element)});
        result -= inj_from_hom_by_mobius(kq, g, hom);
        return true;
    });
    return result;
}

}  // namespace modcsp
