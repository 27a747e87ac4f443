// SPDX-License-Identifier: Apache-2.0
/**
 * @file search.cpp
 * @brief Polymorphism search over the implicit indicator problem.
 *
 * Variables are the operation entries f_s(a_1..a_n).  A constraint is a
 * relation R together with n tuples of R; its scope holds, for every position
 * q, the entry at the q-th coordinates of those tuples.  Constraints are never
 * stored: those containing a given entry are enumerated from per-position
 * indexes of each relation.  Domains are bitsets; propagation is arc
 * consistency driven by a queue of changed entries; branching is two-way
 * (x = c, then x ≠ c) on a smallest non-singleton domain.
 */
#include <algorithm>
#include <bit>
#include <deque>

#include "modcsp/expansion.hpp"

namespace modcsp {
namespace {

class PolymorphismSearch {
public:
    PolymorphismSearch(const Structure& h, std::size_t arity, const PinFunction& pin) : h_(h), n_(arity) {
        if (n_ == 0) throw PreconditionError("polymorphism arity must be positive");
        const std::size_t limit = 200'000;
        std::size_t total = 0;
        for (std::size_t s = 0; s < h.sort_count(); ++s) {
            const std::size_t size = h.sort_size(SortId{s});
            std::size_t count = 1;
            for (std::size_t j = 0; j < n_; ++j) {
                count *= size;
                enforce_guard("polymorphism search entries", count, limit);
            }
            sort_offset_.push_back(total);
            sort_words_.push_back((size + 63) / 64);
            total += count;
            enforce_guard("polymorphism search entries", total, limit);
            for (std::size_t i = 0; i < count; ++i) {
                var_sort_.push_back(s);
                var_word_.push_back(words_.size());
                words_.resize(words_.size() + sort_words_[s], 0);
            }
        }
        size_.assign(total, 0);
        in_queue_.assign(total, false);

        // Per relation, position and element: tuples holding the element there.
        index_.resize(h.relations().size());
        for (std::size_t r = 0; r < h.relations().size(); ++r) {
            const auto& rel = h.relations()[r];
            index_[r].resize(rel.arity());
            for (std::size_t q = 0; q < rel.arity(); ++q) {
                index_[r][q].resize(h.sort_size(rel.signature[q]));
                for (std::size_t t = 0; t < rel.size(); ++t) index_[r][q][rel.tuples[t][q]].push_back(t);
            }
        }

        // Initial domains: pinned entries are singletons, others full.
        std::vector<Element> args(n_);
        for (std::size_t v = 0; v < total; ++v) {
            const auto s = var_sort_[v];
            decode(v, args);
            const std::size_t size = h.sort_size(SortId{s});
            if (const auto forced = pin ? pin(SortId{s}, args) : std::nullopt) {
                if (*forced >= size) throw PreconditionError("pinned value outside its sort");
                set_bit(v, *forced);
                size_[v] = 1;
            } else {
                for (Element c = 0; c < size; ++c) set_bit(v, c);
                size_[v] = size;
            }
            if (size_[v] == 1) enqueue(v);
        }
    }

    std::optional<Operation> run() {
        if (!propagate() || !search()) return std::nullopt;
        Operation f;
        f.arity = n_;
        for (std::size_t s = 0; s < h_.sort_count(); ++s) {
            f.sort_sizes.push_back(h_.sort_size(SortId{s}));
            const std::size_t begin = sort_offset_[s];
            const std::size_t end = s + 1 < h_.sort_count() ? sort_offset_[s + 1] : size_.size();
            std::vector<Element> table;
            for (std::size_t v = begin; v < end; ++v) table.push_back(first_value(v));
            f.tables.push_back(std::move(table));
        }
        return f;
    }

private:
    // -- domains ------------------------------------------------------------

    [[nodiscard]] std::uint64_t* dom(std::size_t v) { return words_.data() + var_word_[v]; }
    [[nodiscard]] std::size_t width(std::size_t v) const { return sort_words_[var_sort_[v]]; }
    void set_bit(std::size_t v, Element c) { dom(v)[c / 64] |= std::uint64_t{1} << (c % 64); }
    [[nodiscard]] bool has(std::size_t v, Element c) { return (dom(v)[c / 64] >> (c % 64)) & 1U; }

    Element first_value(std::size_t v) {
        const auto* d = dom(v);
        for (std::size_t w = 0; w < width(v); ++w) {
            if (d[w] != 0) return static_cast<Element>(w * 64 + static_cast<std::size_t>(std::countr_zero(d[w])));
        }
        return 0;
    }

    void save(std::size_t v) {
        trail_.push_back({v, saved_.size(), size_[v]});
        const auto* d = dom(v);
        saved_.insert(saved_.end(), d, d + width(v));
    }

    void undo(std::size_t mark) {
        while (trail_.size() > mark) {
            const auto& e = trail_.back();
            std::copy_n(saved_.begin() + static_cast<std::ptrdiff_t>(e.offset), width(e.var), dom(e.var));
            size_[e.var] = e.size;
            saved_.resize(e.offset);
            trail_.pop_back();
        }
    }

    /// Intersects the domain of `v` with `mask`; false on wipe-out.
    bool restrict(std::size_t v, const std::uint64_t* mask) {
        auto* d = dom(v);
        bool changed = false;
        for (std::size_t w = 0; w < width(v); ++w) {
            if ((d[w] & ~mask[w]) != 0) changed = true;
        }
        if (!changed) return true;
        save(v);
        std::size_t count = 0;
        for (std::size_t w = 0; w < width(v); ++w) {
            d[w] &= mask[w];
            count += static_cast<std::size_t>(std::popcount(d[w]));
        }
        size_[v] = count;
        if (count == 0) return false;
        enqueue(v);
        return true;
    }

    void enqueue(std::size_t v) {
        if (!in_queue_[v]) {
            in_queue_[v] = true;
            queue_.push_back(v);
        }
    }

    void clear_queue() {
        for (const auto v : queue_) in_queue_[v] = false;
        queue_.clear();
    }

    // -- entries ------------------------------------------------------------

    void decode(std::size_t v, std::vector<Element>& args) const {
        const auto s = var_sort_[v];
        const std::size_t size = h_.sort_size(SortId{s});
        std::size_t code = v - sort_offset_[s];
        for (std::size_t j = n_; j-- > 0;) {
            args[j] = static_cast<Element>(code % size);
            code /= size;
        }
    }

    [[nodiscard]] std::size_t entry(std::size_t s, const std::vector<Element>& args) const {
        return sort_offset_[s] + Operation::index(args, h_.sort_size(SortId{s}));
    }

    // -- propagation --------------------------------------------------------

    /// Revises the constraint (relation r, tuples idx); false on wipe-out.
    bool revise(std::size_t r, const std::vector<std::size_t>& idx) {
        const auto& rel = h_.relations()[r];
        const std::size_t l = rel.arity();
        scope_.resize(l);
        std::vector<Element>& args = args_;
        args.resize(n_);
        for (std::size_t q = 0; q < l; ++q) {
            for (std::size_t j = 0; j < n_; ++j) args[j] = rel.tuples[idx[j]][q];
            scope_[q] = entry(rel.signature[q].value, args);
        }
        // Iterate the tuples compatible with the smallest domain in scope.
        std::size_t pivot = 0;
        for (std::size_t q = 1; q < l; ++q) {
            if (size_[scope_[q]] < size_[scope_[pivot]]) pivot = q;
        }
        support_offset_.resize(l + 1);
        support_offset_[0] = 0;
        for (std::size_t q = 0; q < l; ++q) support_offset_[q + 1] = support_offset_[q] + width(scope_[q]);
        support_.assign(support_offset_[l], 0);
        const std::size_t pv = scope_[pivot];
        const std::size_t psize = h_.sort_size(rel.signature[pivot]);
        for (Element c = 0; c < psize; ++c) {
            if (!has(pv, c)) continue;
            for (const auto t : index_[r][pivot][c]) {
                const auto& u = rel.tuples[t];
                bool valid = true;
                for (std::size_t q = 0; q < l && valid; ++q) valid = has(scope_[q], u[q]);
                if (!valid) continue;
                for (std::size_t q = 0; q < l; ++q) {
                    support_[support_offset_[q] + u[q] / 64] |= std::uint64_t{1} << (u[q] % 64);
                }
            }
        }
        // Copy the masks: restrict() may re-enter nothing, but scope_ is shared.
        const auto scope = scope_;
        const auto support = support_;
        const auto offsets = support_offset_;
        for (std::size_t q = 0; q < l; ++q) {
            if (!restrict(scope[q], support.data() + offsets[q])) return false;
        }
        return true;
    }

    /// Revises every constraint containing entry v; false on wipe-out.
    bool revise_around(std::size_t v) {
        const auto s = var_sort_[v];
        std::vector<Element> args(n_);
        decode(v, args);
        std::vector<std::size_t> idx(n_);
        for (std::size_t r = 0; r < h_.relations().size(); ++r) {
            const auto& rel = h_.relations()[r];
            for (std::size_t q = 0; q < rel.arity(); ++q) {
                if (rel.signature[q].value != s) continue;
                std::vector<const std::vector<std::size_t>*> lists(n_);
                bool empty = false;
                for (std::size_t j = 0; j < n_; ++j) {
                    lists[j] = &index_[r][q][args[j]];
                    empty = empty || lists[j]->empty();
                }
                if (empty) continue;
                std::vector<std::size_t> pos(n_, 0);
                while (true) {
                    for (std::size_t j = 0; j < n_; ++j) idx[j] = (*lists[j])[pos[j]];
                    if (!revise(r, idx)) return false;
                    std::size_t j = n_;
                    bool done = true;
                    while (j-- > 0) {
                        if (++pos[j] < lists[j]->size()) {
                            done = false;
                            break;
                        }
                        pos[j] = 0;
                    }
                    if (done) break;
                }
            }
        }
        return true;
    }

    bool propagate() {
        while (!queue_.empty()) {
            const auto v = queue_.front();
            queue_.pop_front();
            in_queue_[v] = false;
            if (!revise_around(v)) {
                clear_queue();
                return false;
            }
        }
        return true;
    }

    // -- search -------------------------------------------------------------

    [[nodiscard]] std::optional<std::size_t> pick() const {
        std::optional<std::size_t> best;
        for (std::size_t v = 0; v < size_.size(); ++v) {
            if (size_[v] > 1 && (!best || size_[v] < size_[*best])) {
                best = v;
                if (size_[v] == 2) break;
            }
        }
        return best;
    }

    bool search() {
        while (true) {
            const auto v = pick();
            if (!v) return true;
            const Element c = first_value(*v);
            const std::size_t mark = trail_.size();
            std::vector<std::uint64_t> only(width(*v), 0);
            only[c / 64] |= std::uint64_t{1} << (c % 64);
            if (restrict(*v, only.data()) && propagate() && search()) return true;
            clear_queue();
            undo(mark);
            std::vector<std::uint64_t> others(width(*v), ~std::uint64_t{0});
            others[c / 64] &= ~(std::uint64_t{1} << (c % 64));
            if (!restrict(*v, others.data()) || !propagate()) {
                clear_queue();
                return false;
            }
        }
    }

    struct TrailEntry {
        std::size_t var;
        std::size_t offset;
        std::size_t size;
    };

    const Structure& h_;
    std::size_t n_;
    std::vector<std::size_t> sort_offset_;
    std::vector<std::size_t> sort_words_;
    std::vector<std::size_t> var_sort_;
    std::vector<std::size_t> var_word_;
    std::vector<std::uint64_t> words_;
    std::vector<std::size_t> size_;
    std::vector<bool> in_queue_;
    std::deque<std::size_t> queue_;
    std::vector<TrailEntry> trail_;
    std::vector<std::uint64_t> saved_;
    std::vector<std::vector<std::vector<std::vector<std::size_t>>>> index_;
    // Scratch buffers for revise().
    std::vector<std::size_t> scope_;
    std::vector<Element> args_;
    std::vector<std::uint64_t> support_;
    std::vector<std::size_t> support_offset_;
};

}  // namespace

std::optional<Operation> find_polymorphism(const Structure& h, std::size_t arity, const PinFunction& pin) {
    return PolymorphismSearch(h, arity, pin).run();
}

}  // namespace modcsp
