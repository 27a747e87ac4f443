// SPDX-License-Identifier: Apache-2.0
/**
 * @file properties.cpp
 * @brief Rectangularity and balancedness checks, exact matrix ranks,
 *        relational products, permutability and formula generation.
 */
#include "modcsp/properties.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>

namespace modcsp {
namespace {

Tuple restrict_tuple(const Tuple& t, std::span<const std::size_t> positions) {
    Tuple out;
    out.reserve(positions.size());
    for (const auto q : positions) out.push_back(t[q]);
    return out;
}

void require_positions(std::span<const std::size_t> positions, std::size_t arity, std::string_view what) {
    std::vector<bool> seen(arity, false);
    for (const auto q : positions) {
        if (q >= arity) throw PreconditionError(std::string(what) + ": position " + std::to_string(q) + " out of range");
        if (seen[q]) throw PreconditionError(std::string(what) + ": repeated position " + std::to_string(q));
        seen[q] = true;
    }
}

/// Union-find over indices.
struct Components {
    std::vector<std::size_t> parent;
    explicit Components(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

std::uint64_t mul_mod(std::uint64_t a, std::uint64_t b, std::uint64_t p) {
    return static_cast<std::uint64_t>(static_cast<unsigned __int128>(a) * b % p);
}

std::uint64_t pow_mod(std::uint64_t a, std::uint64_t e, std::uint64_t p) {
    std::uint64_t r = 1 % p;
    for (a %= p; e > 0; e >>= 1) {
        if (e & 1U) r = mul_mod(r, a, p);
        a = mul_mod(a, a, p);
    }
    return r;
}

std::string tuple_text(const Structure& h, const std::vector<SortId>& sig, const Tuple& t) {
    std::string s = "(";
    for (std::size_t j = 0; j < t.size(); ++j) s += (j ? "," : "") + h.element_name(sig[j], t[j]);
    return s + ")";
}

}  // namespace

// ---------------------------------------------------------------------------
// Rectangularity
// ---------------------------------------------------------------------------

std::vector<std::size_t> complement_positions(std::span<const std::size_t> left, std::size_t arity) {
    std::vector<bool> in(arity, false);
    for (const auto q : left) {
        if (q < arity) in[q] = true;
    }
    std::vector<std::size_t> out;
    for (std::size_t q = 0; q < arity; ++q) {
        if (!in[q]) out.push_back(q);
    }
    return out;
}

std::optional<RectangularityWitness> rectangularity_witness(const Relation& r, std::span<const std::size_t> left) {
    require_positions(left, r.arity(), "rectangularity split");
    if (left.empty() || left.size() >= r.arity()) {
        throw PreconditionError("rectangularity split must be a proper nonempty subset of the positions");
    }
    const auto right = complement_positions(left, r.arity());
    std::map<Tuple, std::set<Tuple>> rows;
    for (const auto& t : r.tuples) rows[restrict_tuple(t, left)].insert(restrict_tuple(t, right));
    for (const auto& [a, row_a] : rows) {
        for (const auto& [b, row_b] : rows) {
            if (a == b) continue;
            const auto common = std::find_if(row_a.begin(), row_a.end(), [&](const Tuple& c) { return row_b.count(c) > 0; });
            if (common == row_a.end()) continue;
            const auto missing = std::find_if(row_a.begin(), row_a.end(), [&](const Tuple& d) { return row_b.count(d) == 0; });
            if (missing == row_a.end()) continue;
            return RectangularityWitness{{left.begin(), left.end()}, a, b, *common, *missing};
        }
    }
    return std::nullopt;
}

std::optional<RectangularityWitness> find_rectangularity_witness(const Relation& r) {
    enforce_guard("rectangularity arity", r.arity(), 16);
    const std::size_t n = r.arity();
    if (n < 2) return std::nullopt;
    for (std::uint32_t mask = 1; mask + 1 < (1U << n); ++mask) {
        std::vector<std::size_t> left;
        for (std::size_t q = 0; q < n; ++q) {
            if ((mask >> q) & 1U) left.push_back(q);
        }
        if (auto w = rectangularity_witness(r, left)) return w;
    }
    return std::nullopt;
}

bool is_rectangular(const Relation& r) { return !find_rectangularity_witness(r).has_value(); }

// ---------------------------------------------------------------------------
// Ranks
// ---------------------------------------------------------------------------

std::size_t rank_over_rationals(std::vector<std::vector<BigInt>> m) {
    if (m.empty()) return 0;
    const std::size_t rows = m.size();
    const std::size_t cols = m[0].size();
    std::size_t rank = 0;
    BigInt previous = 1;
    for (std::size_t c = 0; c < cols && rank < rows; ++c) {
        std::size_t pivot = rank;
        while (pivot < rows && m[pivot][c] == 0) ++pivot;
        if (pivot == rows) continue;
        std::swap(m[pivot], m[rank]);
        for (std::size_t i = rank + 1; i < rows; ++i) {
            for (std::size_t j = c + 1; j < cols; ++j) {
                m[i][j] = (m[rank][c] * m[i][j] - m[i][c] * m[rank][j]) / previous;
            }
            m[i][c] = 0;
        }
        previous = m[rank][c];
        ++rank;
    }
    return rank;
}

std::size_t rank_mod_p(std::vector<std::vector<std::uint64_t>> m, std::uint64_t p) {
    require_prime(p);
    if (m.empty()) return 0;
    const std::size_t rows = m.size();
    const std::size_t cols = m[0].size();
    for (auto& row : m) {
        for (auto& x : row) x %= p;
    }
    std::size_t rank = 0;
    for (std::size_t c = 0; c < cols && rank < rows; ++c) {
        std::size_t pivot = rank;
        while (pivot < rows && m[pivot][c] == 0) ++pivot;
        if (pivot == rows) continue;
        std::swap(m[pivot], m[rank]);
        const auto inv = pow_mod(m[rank][c], p - 2, p);
        for (std::size_t i = rank + 1; i < rows; ++i) {
            if (m[i][c] == 0) continue;
            const auto factor = mul_mod(m[i][c], inv, p);
            for (std::size_t j = c; j < cols; ++j) {
                m[i][j] = (m[i][j] + p - mul_mod(factor, m[rank][j], p)) % p;
            }
        }
        ++rank;
    }
    return rank;
}

// ---------------------------------------------------------------------------
// Count matrices
// ---------------------------------------------------------------------------

ThreeWaySplit contiguous_split(std::size_t k, std::size_t l) {
    ThreeWaySplit s;
    for (std::size_t q = 0; q < k; ++q) s.left.push_back(q);
    for (std::size_t q = k; q < k + l; ++q) s.middle.push_back(q);
    return s;
}

std::vector<ThreeWaySplit> contiguous_splits(std::size_t arity) {
    std::vector<ThreeWaySplit> out;
    for (std::size_t k = 1; k + 1 < arity; ++k) {
        for (std::size_t l = 1; k + l < arity; ++l) out.push_back(contiguous_split(k, l));
    }
    return out;
}

CountMatrix count_matrix(const Relation& r, const ThreeWaySplit& split, std::optional<std::uint64_t> modulus) {
    std::vector<std::size_t> both = split.left;
    both.insert(both.end(), split.middle.begin(), split.middle.end());
    require_positions(both, r.arity(), "count matrix split");
    if (split.left.empty() || split.middle.empty() || both.size() >= r.arity()) {
        throw PreconditionError("count matrix split needs nonempty left, middle and counted parts");
    }
    if (modulus) require_prime(*modulus);
    std::map<Tuple, std::size_t> row_index;
    std::map<Tuple, std::size_t> col_index;
    std::map<std::pair<Tuple, Tuple>, BigInt> counts;
    for (const auto& t : r.tuples) {
        auto x = restrict_tuple(t, split.left);
        auto y = restrict_tuple(t, split.middle);
        row_index.emplace(x, 0);
        col_index.emplace(y, 0);
        counts[{std::move(x), std::move(y)}] += 1;
    }
    CountMatrix m;
    m.modulus = modulus;
    for (auto& [t, i] : row_index) {
        i = m.rows.size();
        m.rows.push_back(t);
    }
    for (auto& [t, j] : col_index) {
        j = m.columns.size();
        m.columns.push_back(t);
    }
    m.entries.assign(m.rows.size(), std::vector<BigInt>(m.columns.size(), 0));
    for (const auto& [key, c] : counts) {
        BigInt v = c;
        if (modulus) v = residue(c, *modulus);
        m.entries[row_index[key.first]][col_index[key.second]] = v;
    }
    return m;
}

bool is_rank1_block(const CountMatrix& m) {
    const std::size_t rows = m.entries.size();
    const std::size_t cols = rows == 0 ? 0 : m.entries[0].size();
    Components comp(rows + cols);
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            if (m.entries[i][j] != 0) comp.unite(i, rows + j);
        }
    }
    std::map<std::size_t, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> blocks;
    for (std::size_t i = 0; i < rows; ++i) blocks[comp.find(i)].first.push_back(i);
    for (std::size_t j = 0; j < cols; ++j) blocks[comp.find(rows + j)].second.push_back(j);
    for (const auto& [root, block] : blocks) {
        const auto& [bi, bj] = block;
        if (bi.size() < 2 || bj.size() < 2) continue;  // a single line has rank ≤ 1
        if (m.modulus) {
            std::vector<std::vector<std::uint64_t>> sub;
            for (const auto i : bi) {
                std::vector<std::uint64_t> row;
                for (const auto j : bj) row.push_back(residue(m.entries[i][j], *m.modulus));
                sub.push_back(std::move(row));
            }
            if (rank_mod_p(std::move(sub), *m.modulus) > 1) return false;
        } else {
            std::vector<std::vector<BigInt>> sub;
            for (const auto i : bi) {
                std::vector<BigInt> row;
                for (const auto j : bj) row.push_back(m.entries[i][j]);
                sub.push_back(std::move(row));
            }
            if (rank_over_rationals(std::move(sub)) > 1) return false;
        }
    }
    return true;
}

bool is_balanced(const Relation& r, const ThreeWaySplit& split) { return is_rank1_block(count_matrix(r, split)); }

bool is_p_balanced(const Relation& r, const ThreeWaySplit& split, std::uint64_t p) {
    return is_rank1_block(count_matrix(r, split, p));
}

std::optional<ThreeWaySplit> unbalanced_split(const Relation& r, std::optional<std::uint64_t> modulus) {
    for (const auto& s : contiguous_splits(r.arity())) {
        if (!is_rank1_block(count_matrix(r, s, modulus))) return s;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Binary relations
// ---------------------------------------------------------------------------

bool BinaryRelation::contains(Element a, Element b) const {
    return std::binary_search(pairs.begin(), pairs.end(), std::pair{a, b});
}

BinaryRelation equality_relation(std::size_t n) {
    BinaryRelation r{n, {}};
    for (Element a = 0; a < n; ++a) r.pairs.emplace_back(a, a);
    return r;
}

bool is_equivalence(const BinaryRelation& r) {
    for (Element a = 0; a < r.carrier_size; ++a) {
        if (!r.contains(a, a)) return false;
    }
    for (const auto& [a, b] : r.pairs) {
        if (a >= r.carrier_size || b >= r.carrier_size || !r.contains(b, a)) return false;
    }
    for (const auto& [a, b] : r.pairs) {
        const auto first = std::lower_bound(r.pairs.begin(), r.pairs.end(), std::pair<Element, Element>{b, 0});
        for (auto it = first; it != r.pairs.end() && it->first == b; ++it) {
            if (!r.contains(a, it->second)) return false;
        }
    }
    return true;
}

namespace {

std::vector<std::vector<Element>> successors(const BinaryRelation& r) {
    std::vector<std::vector<Element>> out(r.carrier_size);
    for (const auto& [a, b] : r.pairs) out[a].push_back(b);
    return out;
}

BinaryRelation compose_counting(const BinaryRelation& alpha, const BinaryRelation& beta,
                                std::optional<std::uint64_t> p) {
    if (alpha.carrier_size != beta.carrier_size) throw PreconditionError("composition of relations on different carriers");
    const auto sa = successors(alpha);
    const auto sb = successors(beta);
    BinaryRelation out{alpha.carrier_size, {}};
    std::vector<std::size_t> count(alpha.carrier_size);
    for (Element a = 0; a < alpha.carrier_size; ++a) {
        std::fill(count.begin(), count.end(), 0);
        for (const auto c : sa[a]) {
            for (const auto b : sb[c]) ++count[b];
        }
        for (Element b = 0; b < alpha.carrier_size; ++b) {
            if (p ? count[b] % *p != 0 : count[b] != 0) out.pairs.emplace_back(a, b);
        }
    }
    return out;
}

}  // namespace

BinaryRelation compose(const BinaryRelation& alpha, const BinaryRelation& beta) {
    return compose_counting(alpha, beta, std::nullopt);
}

BinaryRelation compose_p(const BinaryRelation& alpha, const BinaryRelation& beta, std::uint64_t p) {
    require_prime(p);
    return compose_counting(alpha, beta, p);
}

std::size_t composition_count(const BinaryRelation& alpha, const BinaryRelation& beta, Element a, Element b) {
    std::size_t n = 0;
    for (Element c = 0; c < alpha.carrier_size; ++c) n += alpha.contains(a, c) && beta.contains(c, b) ? 1 : 0;
    return n;
}

// ---------------------------------------------------------------------------
// Congruences
// ---------------------------------------------------------------------------

Congruence congruence_from_relation(const Structure& h, std::string_view relation) {
    const auto& r = h.relation(relation);
    if (r.arity() != 2 || r.signature[0] != r.signature[1]) {
        throw PreconditionError("congruence '" + r.name + "' must be a binary relation on one sort");
    }
    Congruence c;
    c.name = r.name;
    c.provenance = "relation " + r.name + " of the structure";
    c.relation.carrier_size = h.sort_size(r.signature[0]);
    for (const auto& t : r.tuples) c.relation.pairs.emplace_back(t[0], t[1]);
    std::sort(c.relation.pairs.begin(), c.relation.pairs.end());
    c.point_names = h.sort(r.signature[0]).elements;
    if (!is_equivalence(c.relation)) throw PreconditionError("relation '" + r.name + "' is not an equivalence relation");
    return c;
}

Congruence congruence_on_relation(const Structure& h, const Relation& s, const Relation& alpha,
                                  std::string provenance) {
    const std::size_t k = s.arity();
    if (alpha.arity() != 2 * k) throw PreconditionError("a congruence of a k-ary relation must have arity 2k");
    for (std::size_t q = 0; q < k; ++q) {
        if (alpha.signature[q] != s.signature[q] || alpha.signature[k + q] != s.signature[q]) {
            throw PreconditionError("congruence signature does not match the relation");
        }
    }
    Congruence c;
    c.name = alpha.name;
    c.provenance = std::move(provenance);
    c.relation.carrier_size = s.size();
    for (std::size_t i = 0; i < s.size(); ++i) {
        c.point_names.push_back(tuple_text(h, s.signature, s.tuples[i]));
        for (std::size_t j = 0; j < s.size(); ++j) {
            Tuple t = s.tuples[i];
            t.insert(t.end(), s.tuples[j].begin(), s.tuples[j].end());
            if (alpha.contains(t)) c.relation.pairs.emplace_back(static_cast<Element>(i), static_cast<Element>(j));
        }
    }
    if (!is_equivalence(c.relation)) {
        throw PreconditionError("relation '" + alpha.name + "' is not an equivalence relation on the tuples");
    }
    return c;
}

std::pair<Congruence, Congruence> projection_congruences(const Structure& h, const Relation& s,
                                                         std::span<const std::size_t> left) {
    require_positions(left, s.arity(), "projection congruence");
    const auto right = complement_positions(left, s.arity());
    const auto kernel = [&](std::span<const std::size_t> positions, std::string name) {
        Congruence c;
        c.name = std::move(name);
        c.provenance = "tuples of " + s.name + " agreeing on positions";
        for (const auto q : positions) c.provenance += " " + std::to_string(q);
        c.relation.carrier_size = s.size();
        for (std::size_t i = 0; i < s.size(); ++i) {
            c.point_names.push_back(tuple_text(h, s.signature, s.tuples[i]));
            for (std::size_t j = 0; j < s.size(); ++j) {
                if (restrict_tuple(s.tuples[i], positions) == restrict_tuple(s.tuples[j], positions)) {
                    c.relation.pairs.emplace_back(static_cast<Element>(i), static_cast<Element>(j));
                }
            }
        }
        return c;
    };
    return {kernel(left, "~left"), kernel(right, "~right")};
}

PermutabilityReport check_permutability(std::span<const Congruence> congruences, std::optional<std::uint64_t> p) {
    if (p) require_prime(*p);
    for (const auto& c : congruences) {
        if (!is_equivalence(c.relation)) throw PreconditionError("'" + c.name + "' is not an equivalence relation");
        if (c.relation.carrier_size != congruences[0].relation.carrier_size) {
            throw PreconditionError("congruences '" + congruences[0].name + "' and '" + c.name +
                                    "' live on different carriers");
        }
    }
    PermutabilityReport report;
    for (std::size_t i = 0; i < congruences.size(); ++i) {
        for (std::size_t j = i + 1; j < congruences.size(); ++j) {
            const auto& alpha = congruences[i].relation;
            const auto& beta = congruences[j].relation;
            const auto ab = p ? compose_p(alpha, beta, *p) : compose(alpha, beta);
            const auto ba = p ? compose_p(beta, alpha, *p) : compose(beta, alpha);
            std::set_symmetric_difference(ab.pairs.begin(), ab.pairs.end(), ba.pairs.begin(), ba.pairs.end(),
                                          std::back_inserter(report.asymmetric));
            if (report.asymmetric.empty()) continue;
            report.ok = false;
            auto chosen = std::find_if(report.asymmetric.begin(), report.asymmetric.end(), [&](const auto& xy) {
                return !alpha.contains(xy.first, xy.second) && !beta.contains(xy.first, xy.second);
            });
            if (chosen == report.asymmetric.end()) chosen = report.asymmetric.begin();
            report.witness = PermutabilityWitness{i, j, chosen->first, chosen->second,
                                                  ab.contains(chosen->first, chosen->second)};
            return report;
        }
    }
    return report;
}

PermutabilityReport check_p_permutability(std::span<const Congruence> congruences, std::uint64_t p) {
    return check_permutability(congruences, p);
}

// ---------------------------------------------------------------------------
// Formula generation
// ---------------------------------------------------------------------------

namespace {

struct CandidateAtom {
    std::string relation;
    std::vector<std::size_t> args;  ///< variable indices
};

std::vector<CandidateAtom> candidate_atoms(const Structure& h, std::size_t vars, bool equality) {
    std::vector<CandidateAtom> out;
    const auto add_all = [&](const std::string& name, std::size_t arity) {
        std::vector<std::size_t> args(arity, 0);
        while (true) {
            out.push_back({name, args});
            std::size_t q = arity;
            while (q > 0 && ++args[q - 1] == vars) args[--q] = 0;
            if (q == 0) break;
        }
    };
    for (const auto& r : h.relations()) add_all(r.name, r.arity());
    if (equality) {
        for (std::size_t a = 0; a < vars; ++a) {
            for (std::size_t b = a + 1; b < vars; ++b) out.push_back({std::string(kEquality), {a, b}});
        }
    }
    return out;
}

/// Sorts of the variables forced by the atoms, or nullopt on a conflict or
/// an unresolved variable.
std::optional<std::vector<std::string>> infer_sorts(const Structure& h, const std::vector<CandidateAtom>& atoms,
                                                    std::size_t vars) {
    std::vector<std::string> sort(vars);
    const auto set = [&](std::size_t v, const std::string& s) {
        if (sort[v].empty()) {
            sort[v] = s;
            return true;
        }
        return sort[v] == s;
    };
    for (const auto& a : atoms) {
        if (a.relation == kEquality) continue;
        const auto& r = h.relation(a.relation);
        for (std::size_t q = 0; q < a.args.size(); ++q) {
            if (!set(a.args[q], h.sort(r.signature[q]).name)) return std::nullopt;
        }
    }
    for (bool changed = true; changed;) {
        changed = false;
        for (const auto& a : atoms) {
            if (a.relation != kEquality) continue;
            const auto x = a.args[0];
            const auto y = a.args[1];
            if (sort[x].empty() != sort[y].empty()) {
                sort[x].empty() ? (void)set(x, sort[y]) : (void)set(y, sort[x]);
                changed = true;
            } else if (!sort[x].empty() && sort[x] != sort[y]) {
                return std::nullopt;
            }
        }
    }
    for (auto& s : sort) {
        if (s.empty()) {
            if (h.sort_count() != 1) return std::nullopt;
            s = h.sorts()[0].name;
        }
    }
    return sort;
}

}  // namespace

std::vector<MppFormula> generate_formulas(const Structure& h, const FormulaBounds& bounds) {
    std::vector<MppFormula> out;
    for (const auto p : bounds.primes) require_prime(p);
    for (std::size_t nf = 1; nf <= bounds.max_free; ++nf) {
        for (std::size_t nb = 0; nb <= bounds.max_bound; ++nb) {
            const std::size_t vars = nf + nb;
            const auto candidates = candidate_atoms(h, vars, bounds.equality_atoms);
            for (std::size_t na = 1; na <= bounds.max_atoms; ++na) {
                if (na > candidates.size()) break;
                std::vector<std::size_t> pick(na);
                std::iota(pick.begin(), pick.end(), std::size_t{0});
                while (true) {
                    std::vector<CandidateAtom> atoms;
                    std::vector<bool> used(vars, false);
                    for (const auto i : pick) {
                        atoms.push_back(candidates[i]);
                        for (const auto v : candidates[i].args) used[v] = true;
                    }
                    const auto sorts = std::all_of(used.begin(), used.end(), [](bool u) { return u; })
                                           ? infer_sorts(h, atoms, vars)
                                           : std::nullopt;
                    if (sorts) {
                        const auto name = [&](std::size_t v) {
                            return v < nf ? "x" + std::to_string(v) : "y" + std::to_string(v - nf);
                        };
                        MppFormula base;
                        for (std::size_t v = 0; v < nf; ++v) base.free.push_back({name(v), (*sorts)[v]});
                        for (const auto& a : atoms) {
                            FormulaAtom fa{a.relation, {}};
                            for (const auto v : a.args) fa.args.push_back(name(v));
                            base.atoms.push_back(std::move(fa));
                        }
                        std::vector<FormulaVariable> bound;
                        for (std::size_t v = nf; v < vars; ++v) bound.push_back({name(v), (*sorts)[v]});
                        const auto emit = [&](MppFormula f) {
                            if (out.size() < bounds.limit) out.push_back(std::move(f));
                        };
                        if (nb == 0) {
                            emit(base);
                        } else {
                            if (bounds.existential) {
                                MppFormula f = base;
                                f.blocks.push_back({bound, Quantifier::Exists, 0});
                                emit(std::move(f));
                            }
                            for (const auto p : bounds.primes) {
                                MppFormula f = base;
                                f.blocks.push_back({bound, Quantifier::Modular, p});
                                emit(std::move(f));
                            }
                        }
                        if (out.size() >= bounds.limit) return out;
                    }
                    // Next combination of na indices out of candidates.size().
                    std::size_t i = na;
                    while (i > 0 && pick[i - 1] == candidates.size() - na + i - 1) --i;
                    if (i == 0) break;
                    ++pick[i - 1];
                    for (std::size_t k = i; k < na; ++k) pick[k] = pick[k - 1] + 1;
                }
            }
        }
    }
    return out;
}

}  // namespace modcsp
